use nalgebra::{DMatrix, SymmetricEigen};

use super::operator::LinearOperator;
use crate::error::{Error, Result};

/// Above this size the full dense eigensolve is replaced by shifted inverse
/// iteration on the band.
const DENSE_LIMIT: usize = 600;

/// Smallest eigenvalue of a symmetric operator.
pub fn smallest_eigenvalue(op: &LinearOperator) -> Result<f64> {
    if !op.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if op.dim() <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(op.to_dense());
        return Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min));
    }
    inverse_iteration(op)
}

fn inverse_iteration(op: &LinearOperator) -> Result<f64> {
    let n = op.dim();
    let lower = op.gershgorin_lower();
    let scale = (0..n).map(|i| op.get(i, i).abs()).fold(0.0, f64::max).max(1.0);
    let shift = lower - 1e-9 * scale;
    let factor = op.shifted(-shift, 1.0).cholesky()?;
    // deterministic start with components in every mode
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 2654435761) % 1000) as f64 / 1000.0).collect();
    normalize(&mut x);
    let mut rq_old = f64::INFINITY;
    for _ in 0..20_000 {
        let mut y = factor.solve(&x);
        normalize(&mut y);
        let ay = op.apply(&y);
        let rq: f64 = y.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let resid: f64 = ay.iter().zip(&y).map(|(a, b)| (a - rq * b).powi(2)).sum::<f64>().sqrt();
        x = y;
        if resid <= 1e-10 * rq.abs().max(1.0) || (rq - rq_old).abs() <= 1e-15 * rq.abs() {
            return Ok(rq);
        }
        rq_old = rq;
    }
    Ok(rq_old)
}

fn normalize(x: &mut [f64]) {
    let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in x {
        *v /= nrm;
    }
}

/// Eigenpairs of a dense symmetric matrix sorted by ascending eigenvalue.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}
