//! Unnormalised target log-densities.

use rayon::prelude::*;

use crate::error::{LsviError, Result};
use crate::numerics::{Points, RngStream};

pub mod bsl;
pub mod logistic;
pub mod stable;
pub mod toad;
pub mod varsel;

pub use bsl::{BslTarget, LogitBox, Parameterisation};
pub use logistic::LogisticTarget;
pub use stable::levy_stable_sample;
pub use toad::{toad_simulate, toad_summaries, Theta, ToadConfig};
pub use varsel::{hyperparams_from_data, VarSelHyper, VarSelTarget};

/// An unnormalised log-density `f = log π`.
///
/// `stream` is private to one evaluation. Noisy targets draw from it;
/// deterministic targets ignore it. `-∞` marks zero density.
pub trait LogTarget: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64], stream: &RngStream) -> f64;

    /// Values at every row of `points`, row `i` with `stream.derive(i)`.
    /// Targets with a cheaper batched form override this; the result must
    /// not depend on how rows are scheduled.
    fn log_density_rows(&self, points: &Points, stream: &RngStream) -> Vec<f64> {
        rows_one_by_one(self, points, stream)
    }
}

pub(crate) fn rows_one_by_one<T: LogTarget + ?Sized>(target: &T, points: &Points, stream: &RngStream) -> Vec<f64> {
    (0..points.nrows())
        .into_par_iter()
        .map(|i| target.log_density(points.row(i), &stream.derive(i as u64)))
        .collect()
}

/// Deterministic target backed by a closure.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnTarget { dim, f }
    }
}

impl<F> LogTarget for FnTarget<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64], _stream: &RngStream) -> f64 {
        (self.f)(x)
    }
}

/// Target values at a block of points, with `-∞` draws marked for removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub keep: Vec<bool>,
    pub dropped: usize,
}

impl Evaluation {
    /// The kept points and their values.
    pub fn retained(&self, points: &Points) -> (Points, Vec<f64>) {
        if self.dropped == 0 {
            return (points.clone(), self.values.clone());
        }
        let values = self
            .values
            .iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .map(|(v, _)| *v)
            .collect();
        (points.select_rows(&self.keep), values)
    }
}

/// Evaluates `target` at every row in parallel. Row `i` gets the stream
/// `stream.derive(i)`, so the result does not depend on scheduling.
pub fn evaluate(target: &dyn LogTarget, points: &Points, stream: &RngStream) -> Result<Evaluation> {
    if points.ncols() != target.dim() {
        return Err(LsviError::DimensionMismatch {
            expected: target.dim(),
            found: points.ncols(),
        });
    }
    let values = target.log_density_rows(points, stream);
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| v.is_nan() || **v == f64::INFINITY)
    {
        return Err(LsviError::TargetNotFinite { index, value });
    }
    let keep: Vec<bool> = values.iter().map(|v| v.is_finite()).collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    if dropped == values.len() && !values.is_empty() {
        return Err(LsviError::AllSamplesDropped);
    }
    if 2 * dropped > values.len() {
        log::warn!(
            "{dropped} of {} draws fell where the target has zero density",
            values.len()
        );
    }
    Ok(Evaluation { values, keep, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_plus_infinity() {
        let pts = Points::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let t = FnTarget::new(1, |x: &[f64]| if x[0] == 1.0 { f64::NAN } else { 0.0 });
        assert!(matches!(
            evaluate(&t, &pts, &RngStream::new(0)),
            Err(LsviError::TargetNotFinite { index: 1, .. })
        ));
        let t = FnTarget::new(1, |_: &[f64]| f64::INFINITY);
        assert!(evaluate(&t, &pts, &RngStream::new(0)).is_err());
    }

    #[test]
    fn drops_zero_density_draws() {
        let pts = Points::from_vec(3, 1, vec![0.0, 1.0, 2.0]);
        let t = FnTarget::new(1, |x: &[f64]| if x[0] > 1.5 { f64::NEG_INFINITY } else { x[0] });
        let ev = evaluate(&t, &pts, &RngStream::new(0)).unwrap();
        assert_eq!(ev.dropped, 1);
        let (kept, vals) = ev.retained(&pts);
        assert_eq!(kept.as_slice(), &[0.0, 1.0]);
        assert_eq!(vals, vec![0.0, 1.0]);
        let t = FnTarget::new(1, |_: &[f64]| f64::NEG_INFINITY);
        assert_eq!(evaluate(&t, &pts, &RngStream::new(0)), Err(LsviError::AllSamplesDropped));
    }
}
