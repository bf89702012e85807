use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_ops::Grid1D;

/// Scalar function applied pointwise in the heat model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarNonlinearity {
    /// `F(z) = -z³`
    NegCubic,
    /// `F(z) = -tanh z`
    NegTanh,
    /// `F(z) = z³`, violates `z F(z) <= 0`.
    Cubic,
}

impl ScalarNonlinearity {
    pub fn value(self, z: f64) -> f64 {
        match self {
            Self::NegCubic => -z * z * z,
            Self::NegTanh => -z.tanh(),
            Self::Cubic => z * z * z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Self::NegCubic => -3.0 * z * z,
            Self::NegTanh => {
                let c = z.cosh();
                -1.0 / (c * c)
            }
            Self::Cubic => 3.0 * z * z,
        }
    }

    /// Whether `z F(z) <= 0` holds on all of ℝ.
    pub fn satisfies_sign_condition(self) -> bool {
        matches!(self, Self::NegCubic | Self::NegTanh)
    }
}

/// `F(w) = -w w_ξ` with centred differences and zero boundary values.
pub fn ks_nonlinearity(w: &[f64], grid: &Grid1D) -> Vec<f64> {
    let dw = central_difference(w, grid.h());
    w.iter().zip(&dw).map(|(a, b)| -a * b).collect()
}

/// `F'_w f = -w f_ξ - w_ξ f`.
pub fn ks_jacobian_apply(w: &[f64], f: &[f64], grid: &Grid1D) -> Vec<f64> {
    let dw = central_difference(w, grid.h());
    let df = central_difference(f, grid.h());
    (0..w.len()).map(|i| -w[i] * df[i] - dw[i] * f[i]).collect()
}

/// Exact transpose of [`ks_jacobian_apply`] at `w`. The continuum limit of
/// this is `+w g_ξ`.
pub fn ks_jacobian_adjoint_apply(w: &[f64], g: &[f64], grid: &Grid1D) -> Vec<f64> {
    let dw = central_difference(w, grid.h());
    let wg: Vec<f64> = w.iter().zip(g).map(|(a, b)| a * b).collect();
    let dwg = central_difference(&wg, grid.h());
    (0..w.len()).map(|i| dwg[i] - dw[i] * g[i]).collect()
}

fn central_difference(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            v[i as usize]
        }
    };
    (0..n as isize)
        .map(|i| (at(i + 1) - at(i - 1)) / (2.0 * h))
        .collect()
}

pub fn heat_nonlinearity(w: &[f64], f: ScalarNonlinearity) -> Result<Vec<f64>> {
    let out: Vec<f64> = w.iter().map(|&z| f.value(z)).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalOverflow);
    }
    Ok(out)
}

pub fn heat_jacobian_apply(w: &[f64], g: &[f64], f: ScalarNonlinearity) -> Vec<f64> {
    w.iter().zip(g).map(|(&z, &v)| f.derivative(z) * v).collect()
}

/// The pointwise Jacobian is diagonal, hence its own adjoint.
pub fn heat_jacobian_adjoint_apply(w: &[f64], g: &[f64], f: ScalarNonlinearity) -> Vec<f64> {
    heat_jacobian_apply(w, g, f)
}
