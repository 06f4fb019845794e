//! KL-up-to-a-constant, residual statistics and predictive metrics.

use crate::error::{LsviError, Result};
use crate::expfam::{Family, LogDensity, NaturalParam};
use crate::numerics::{Points, RngStream};
use crate::targets::{evaluate, LogTarget};

pub use crate::stepsize::{residual_stats, ResidualStats};

/// Monte-Carlo estimate of `E_q̄[log q̄(X) - f(X)] = KL(q̄ ‖ π̄) - log Z_π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_eval: usize,
}

/// KL estimate over `n_eval` fresh draws from `q̄_η`.
pub fn kl_up_to_const(
    family: &Family,
    eta: &NaturalParam,
    target: &dyn LogTarget,
    n_eval: usize,
    stream: &RngStream,
) -> Result<KlEstimate> {
    if n_eval == 0 {
        return Err(LsviError::InvalidArgument("KL needs at least one draw".into()));
    }
    let density = family.density(eta)?;
    let x = family.sample(eta, n_eval, &stream.derive(0))?;
    let eval = evaluate(target, &x, &stream.derive(1))?;
    let (x, f) = eval.retained(&x);
    Ok(kl_from_draws(&density, &x, &f))
}

/// KL estimate from draws of `q̄` and target values at them.
pub fn kl_from_draws(density: &LogDensity, samples: &Points, values: &[f64]) -> KlEstimate {
    let diffs: Vec<f64> = samples
        .rows()
        .zip(values)
        .map(|(x, f)| density.eval(x) - f)
        .collect();
    let n = diffs.len();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    KlEstimate {
        value: mean,
        std_error,
        n_eval: n,
    }
}

/// Fraction of rows with `sign(xᵢᵀμ) ≠ yᵢ`, counting `sign(0)` as `+1`.
pub fn misclassification_rate(mean: &[f64], x: &Points, y: &[f64]) -> Result<f64> {
    if x.ncols() != mean.len() {
        return Err(LsviError::DimensionMismatch {
            expected: x.ncols(),
            found: mean.len(),
        });
    }
    if x.nrows() != y.len() {
        return Err(LsviError::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let wrong = x
        .rows()
        .zip(y)
        .filter(|(row, &label)| {
            let score: f64 = row.iter().zip(mean).map(|(a, b)| a * b).sum();
            let predicted = if score >= 0.0 { 1.0 } else { -1.0 };
            predicted != label
        })
        .count();
    Ok(wrong as f64 / y.len() as f64)
}
