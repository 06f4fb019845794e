//! Closed-form marginal posterior of a Bayesian variable-selection model
//! (conjugate Gaussian slab, inverse-gamma noise, uniform inclusion prior).

use nalgebra::{DMatrix, DVector};

use crate::error::{LsviError, Result};
use crate::numerics::{cholesky, cholesky_solve, tri_solve, Points, RngStream, SymMatrix, Transpose};

use super::LogTarget;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarSelHyper {
    pub w: f64,
    pub lambda: f64,
    /// Slab variance multiplier `v²`.
    pub v2: f64,
}

#[derive(Debug, Clone)]
pub struct VarSelTarget {
    gram: DMatrix<f64>,
    zty: Vec<f64>,
    yty: f64,
    hyper: VarSelHyper,
}

fn gram_and_cross(z: &Points, y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    if z.nrows() != y.len() {
        return Err(LsviError::DimensionMismatch {
            expected: z.nrows(),
            found: y.len(),
        });
    }
    let zm = DMatrix::from_row_slice(z.nrows(), z.ncols(), z.as_slice());
    let yv = DVector::from_column_slice(y);
    Ok((zm.tr_mul(&zm), zm.tr_mul(&yv), yv.dot(&yv)))
}

/// `w = 4`, `λ` the residual variance of the saturated least-squares fit,
/// `v² = 10 / λ`.
pub fn hyperparams_from_data(z: &Points, y: &[f64]) -> Result<VarSelHyper> {
    let (n, p) = (z.nrows(), z.ncols());
    if n == 0 {
        return Err(LsviError::DegenerateData("no observations".into()));
    }
    let (gram, zty, yty) = gram_and_cross(z, y)?;
    let g = SymMatrix::from_lower(gram.clone())?;
    let l = match cholesky(&g) {
        Ok(l) => l,
        Err(_) => cholesky(&g.add_ridge(1e-10)).map_err(|_| LsviError::Singular)?,
    };
    let beta = cholesky_solve(&l, zty.as_slice())?;
    let rss: f64 = z
        .rows()
        .zip(y)
        .map(|(row, yi)| {
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            (yi - fit).powi(2)
        })
        .sum();
    let dof = if n > p { n - p } else { n };
    let sigma2 = rss / dof as f64;
    if !(sigma2 > 1e-14 * (yty / n as f64)) {
        return Err(LsviError::DegenerateData(
            "saturated model leaves no residual variance".into(),
        ));
    }
    Ok(VarSelHyper {
        w: 4.0,
        lambda: sigma2,
        v2: 10.0 / sigma2,
    })
}

impl VarSelTarget {
    pub fn new(z: &Points, y: &[f64], hyper: VarSelHyper) -> Result<Self> {
        if !(hyper.w > 0.0 && hyper.lambda > 0.0 && hyper.v2 > 0.0) {
            return Err(LsviError::InvalidArgument(
                "variable-selection hyperparameters must be positive".into(),
            ));
        }
        let (gram, zty, yty) = gram_and_cross(z, y)?;
        Ok(VarSelTarget {
            gram,
            zty: zty.as_slice().to_vec(),
            yty,
            hyper,
        })
    }

    /// Target with hyperparameters set from the data.
    pub fn from_data(z: &Points, y: &[f64]) -> Result<Self> {
        Self::new(z, y, hyperparams_from_data(z, y)?)
    }

    pub fn hyper(&self) -> VarSelHyper {
        self.hyper
    }

    /// Number of candidate predictors.
    pub fn predictors(&self) -> usize {
        self.zty.len()
    }

    /// Log marginal posterior of an inclusion vector, up to a constant.
    /// Entries above 1/2 count as selected.
    pub fn logpost(&self, gamma: &[f64]) -> f64 {
        let d = self.predictors() as f64;
        let VarSelHyper { w, lambda, v2 } = self.hyper;
        let selected: Vec<usize> = (0..gamma.len()).filter(|&i| gamma[i] > 0.5).collect();
        let k = selected.len();
        let tail = |sigma2: f64| -(w + d) / 2.0 * (w * lambda / d + sigma2).ln();
        if k == 0 {
            return tail(self.yty / d);
        }
        let g = DMatrix::from_fn(k, k, |a, b| {
            self.gram[(selected[a], selected[b])] + if a == b { 1.0 / v2 } else { 0.0 }
        });
        let l = cholesky(&SymMatrix::from_lower(g).expect("square"))
            .expect("regularised Gram matrix is positive definite");
        let b: Vec<f64> = selected.iter().map(|&i| self.zty[i]).collect();
        let u = tri_solve(&l, &b, Transpose::No).expect("matching dimensions");
        let sigma2 = (self.yty - u.iter().map(|v| v * v).sum::<f64>()) / d;
        let log_diag: f64 = l.matrix().diagonal().iter().map(|c| c.ln()).sum();
        -log_diag - k as f64 * 0.5 * v2.ln() + tail(sigma2)
    }
}

impl LogTarget for VarSelTarget {
    fn dim(&self) -> usize {
        self.predictors()
    }

    fn log_density(&self, x: &[f64], _stream: &RngStream) -> f64 {
        self.logpost(x)
    }
}
