use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square banded matrix acting on vectors of interior unknowns.
///
/// Entries with `|i - j| > bandwidth` are structurally zero. A dense matrix
/// is simply a banded one with `bandwidth = n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    symmetric: bool,
}

impl LinearOperator {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut op = Self::zeros(n, 0);
        for i in 0..n {
            op.set(i, i, 1.0);
        }
        op.symmetric = true;
        op
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut bw = 0;
        for j in 0..n {
            for i in 0..n {
                if m[(i, j)] != 0.0 {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        let mut op = Self::zeros(n, bw);
        for j in 0..n {
            for i in 0..n {
                if i.abs_diff(j) <= bw {
                    op.set(i, j, m[(i, j)]);
                }
            }
        }
        op.symmetric = op.is_symmetric_within(0.0);
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Whether the operator was built (and verified) as symmetric.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.offset(i, j)]
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.offset(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) <= self.bw, "entry ({i},{j}) outside band {}", self.bw);
        let k = self.offset(i, j);
        self.data[k] += v;
    }

    /// Check the transpose against `tol * max|a_ij|` and record the result.
    pub fn mark_symmetric(mut self) -> Result<Self> {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !self.is_symmetric_within(1e-14 * scale) {
            return Err(Error::NotSymmetric);
        }
        self.symmetric = true;
        Ok(self)
    }

    fn is_symmetric_within(&self, tol: f64) -> bool {
        for i in 0..self.n {
            let hi = (i + self.bw).min(self.n - 1);
            for j in i + 1..=hi {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = 2 * self.bw + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += row[j + self.bw - i] * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.bw);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            for j in lo..=hi {
                t.set(j, i, self.get(i, j));
            }
        }
        t.symmetric = self.symmetric;
        t
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= beta;
        }
        for i in 0..self.n {
            out.add(i, i, alpha);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                let off: f64 = (lo..=hi).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// Cholesky factor `L Lᵀ` of a symmetric positive definite banded matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // row i holds L(i, i-bw..=i)
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &LinearOperator) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        let at = |l: &Vec<f64>, i: usize, j: usize| l[i * w + (j + bw - i)];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = a.get(i, j);
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= at(&l, i, k) * at(&l, j, k);
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (j + bw - i)] = s / at(&l, j, j);
                }
            }
        }
        Ok(Self { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let mut s = x[i];
            for k in lo..i {
                s -= row[k + bw - i] * x[k];
            }
            x[i] = s / row[bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.l[k * w + (i + bw - k)] * x[k];
            }
            x[i] = s / self.l[i * w + bw];
        }
    }
}
