//! Bayesian logistic regression with a diagonal zero-mean Gaussian prior.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{LsviError, Result};
use crate::expfam::log_sigmoid;
use crate::numerics::{row_products, Points, RngStream};

use super::{rows_one_by_one, LogTarget};

pub const INTERCEPT_PRIOR_VAR: f64 = 400.0;
pub const COEFFICIENT_PRIOR_VAR: f64 = 25.0;

#[derive(Debug, Clone)]
pub struct LogisticTarget {
    x: Points,
    y: Vec<f64>,
    prior_var: Vec<f64>,
    /// Rows `yᵢ xᵢ`.
    signed: Points,
    /// Batch size of the subsampled estimator, if enabled.
    batch: Option<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

impl LogisticTarget {
    /// `x` is the design (one row per observation), `y` labels in `{-1, +1}`.
    pub fn new(x: Points, y: Vec<f64>, prior_var: Vec<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(LsviError::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if prior_var.len() != x.ncols() {
            return Err(LsviError::DimensionMismatch {
                expected: x.ncols(),
                found: prior_var.len(),
            });
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(LsviError::InvalidArgument("labels must be -1 or +1".into()));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(LsviError::DegenerateData("design has non-finite entries".into()));
        }
        if prior_var.iter().any(|v| !(*v > 0.0)) {
            return Err(LsviError::InvalidArgument("prior variances must be positive".into()));
        }
        let mut signed = x.clone();
        for (i, &yi) in y.iter().enumerate() {
            signed.row_mut(i).iter_mut().for_each(|v| *v *= yi);
        }
        Ok(LogisticTarget {
            x,
            y,
            prior_var,
            signed,
            batch: None,
        })
    }

    /// Prior variance 400 on the first column (the intercept) and 25 on the rest.
    pub fn with_default_prior(x: Points, y: Vec<f64>) -> Result<Self> {
        let mut prior = vec![COEFFICIENT_PRIOR_VAR; x.ncols()];
        if let Some(first) = prior.first_mut() {
            *first = INTERCEPT_PRIOR_VAR;
        }
        Self::new(x, y, prior)
    }

    /// Evaluate through the subsampled estimator with `batch` draws.
    pub fn subsampled(mut self, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(LsviError::InvalidArgument("batch size must be at least 1".into()));
        }
        self.batch = Some(batch);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn design(&self) -> &Points {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn log_prior(&self, beta: &[f64]) -> f64 {
        -0.5 * beta.iter().zip(&self.prior_var).map(|(b, v)| b * b / v).sum::<f64>()
    }

    fn datum(&self, i: usize, beta: &[f64]) -> f64 {
        log_sigmoid(dot(self.signed.row(i), beta))
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        self.signed.rows().map(|r| log_sigmoid(dot(r, beta))).sum()
    }

    /// Unnormalised log-posterior over the full data set.
    pub fn logpost(&self, beta: &[f64]) -> f64 {
        self.log_prior(beta) + self.log_likelihood(beta)
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = beta.iter().zip(&self.prior_var).map(|(b, v)| -b / v).collect();
        for i in 0..self.n() {
            let u = self.y[i] * dot(self.x.row(i), beta);
            // σ(-u), computed without overflow
            let w = (log_sigmoid(-u)).exp() * self.y[i];
            for (gj, xj) in g.iter_mut().zip(self.x.row(i)) {
                *gj += w * xj;
            }
        }
        g
    }

    /// Prior plus `(n / P)` times the likelihood over the given indices.
    pub fn logpost_with_indices(&self, beta: &[f64], indices: &[usize]) -> f64 {
        let scale = self.n() as f64 / indices.len() as f64;
        self.log_prior(beta) + scale * indices.iter().map(|&i| self.datum(i, beta)).sum::<f64>()
    }

    /// Unbiased estimate of the log-posterior from `batch` indices drawn
    /// uniformly with replacement.
    pub fn logpost_subsampled(&self, beta: &[f64], batch: usize, stream: &RngStream) -> f64 {
        let mut rng = stream.rng();
        let indices: Vec<usize> = (0..batch).map(|_| rng.random_range(0..self.n())).collect();
        self.logpost_with_indices(beta, &indices)
    }
}

impl LogTarget for LogisticTarget {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn log_density(&self, x: &[f64], stream: &RngStream) -> f64 {
        match self.batch {
            Some(p) => self.logpost_subsampled(x, p, stream),
            None => self.logpost(x),
        }
    }

    /// Full-data evaluation in blocks of draws, with all margins `yᵢ xᵢᵀβ`
    /// of a block from one matrix product.
    fn log_density_rows(&self, points: &Points, stream: &RngStream) -> Vec<f64> {
        if self.batch.is_some() || points.nrows() == 0 {
            return rows_one_by_one(self, points, stream);
        }
        let d = self.x.ncols();
        let n = self.n();
        let mut out = vec![0.0; points.nrows()];
        out.par_chunks_mut(BLOCK)
            .zip(points.as_slice().par_chunks(BLOCK * d))
            .for_each(|(vals, block)| {
                let margins = row_products(block, self.signed.as_slice(), d);
                for (r, v) in vals.iter_mut().enumerate() {
                    let beta = &block[r * d..(r + 1) * d];
                    let lik: f64 = margins[r * n..(r + 1) * n].iter().map(|&u| log_sigmoid(u)).sum();
                    *v = self.log_prior(beta) + lik;
                }
            });
        out
    }
}

/// Draws per matrix product in batched evaluation.
const BLOCK: usize = 256;
