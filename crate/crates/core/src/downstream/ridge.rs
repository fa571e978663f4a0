use serde::{Deserialize, Serialize};

use super::check_width;
use crate::numeric::Matrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RidgeOptions {
    pub l2: f64,
    /// Without an intercept the inputs are not centered and the target is
    /// only rescaled, never shifted.
    pub fit_intercept: bool,
}

/// Linear model whose weights live in standardized target units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub target_mean: f64,
    pub target_std: f64,
    pub l2: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_width(self.weights.len(), x)?;
        Ok(x.iter_rows()
            .map(|row| {
                let z: f64 = row
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| a * w)
                    .sum::<f64>()
                    + self.intercept;
                z * self.target_std + self.target_mean
            })
            .collect())
    }

    /// Slope coefficients in original target units.
    pub fn coefficients(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.target_std).collect()
    }

    pub fn original_intercept(&self) -> f64 {
        self.intercept * self.target_std + self.target_mean
    }
}

pub fn fit_ridge(x: &Matrix, y: &[f64], l2: f64) -> Result<RidgeModel> {
    fit_ridge_with(
        x,
        y,
        RidgeOptions {
            l2,
            fit_intercept: true,
        },
    )
}

/// Minimizes `‖Xw + b − y‖² + l2‖w‖²` through the normal equations, with the
/// intercept left unpenalized.
pub fn fit_ridge_with(x: &Matrix, y: &[f64], opts: RidgeOptions) -> Result<RidgeModel> {
    let (n, d) = x.shape();
    if n != y.len() {
        return Err(Error::shape(
            "fit_ridge",
            x.shape_str(),
            format!("{} targets", y.len()),
        ));
    }
    if n < 2 || d == 0 {
        return Err(Error::InvalidArgument(
            "ridge needs at least two rows and one feature".into(),
        ));
    }
    if !(opts.l2.is_finite() && opts.l2 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ridge l2 must be >= 0, got {}",
            opts.l2
        )));
    }

    let (x_mean, target_mean, target_std) = if opts.fit_intercept {
        let means: Vec<f64> = x.col_sums().into_iter().map(|s| s / n as f64).collect();
        let ym = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - ym).powi(2)).sum::<f64>() / n as f64;
        (means, ym, nonzero_scale(var.sqrt()))
    } else {
        let ms = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        (vec![0.0; d], 0.0, nonzero_scale(ms.sqrt()))
    };

    let mut xc = x.clone();
    for r in 0..n {
        for (v, m) in xc.row_mut(r).iter_mut().zip(&x_mean) {
            *v -= m;
        }
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - target_mean) / target_std).collect();

    let mut gram = xc.t_matmul(&xc)?;
    for i in 0..d {
        let v = gram.get(i, i) + opts.l2;
        gram.set(i, i, v);
    }
    let rhs = xc.t_matmul(&Matrix::column(&ys))?.into_vec();
    let weights = cholesky_solve(&gram, &rhs).map_err(|e| match e {
        Error::Singular(msg) if opts.l2 == 0.0 => Error::Singular(format!("{msg}; use l2 > 0")),
        other => other,
    })?;
    let intercept = -x_mean.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();

    let model = RidgeModel {
        weights,
        intercept,
        target_mean,
        target_std,
        l2: opts.l2,
    };
    if !model.weights.iter().all(|w| w.is_finite()) {
        return Err(Error::Singular("ridge solution is not finite".into()));
    }
    Ok(model)
}

fn nonzero_scale(s: f64) -> f64 {
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Solves `A x = b` for symmetric positive definite `A`.
fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-10 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if diag <= tol {
            return Err(Error::Singular(format!(
                "normal equations are rank deficient at column {j}"
            )));
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}
