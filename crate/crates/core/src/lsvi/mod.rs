//! Generic LSVI: regress the target on the family's statistic under draws
//! from the current approximation, then take a momentum step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{LsviError, Result};
use crate::expfam::{DesignMap, Family, NaturalParam};
use crate::numerics::{ols_solve, outer_gram, Points, RngStream, SymMatrix};
use crate::targets::{evaluate, LogTarget};

mod driver;
mod trace;

pub use crate::stepsize::momentum_update;
pub use driver::{drive, KlSettings, Proposal, RunOutput, RunSettings};
pub use trace::{IterationTrace, TraceRow};

/// Monte-Carlo moments of the regression of `f` on `s`.
///
/// Moments are stored over the distinct columns of the statistic (see
/// [`DesignMap`]); [`RegressionEstimate::fisher`] expands them.
#[derive(Debug, Clone)]
pub struct RegressionEstimate {
    map: DesignMap,
    reduced_fisher: SymMatrix,
    reduced_cross: Vec<f64>,
    /// Draws the cross-moment was computed from (zero-density draws removed).
    pub samples: Points,
    pub values: Vec<f64>,
    pub dropped: usize,
}

/// Draws per block of the moment sums.
const BLOCK: usize = 1024;

/// `(A Aᵀ / n, A f / n)` where column `i` of `A` is the reduced statistic of
/// row `i`. Blocks of columns are summed in order, so the result does not
/// depend on the thread count; `values = None` skips the cross-moment.
fn moments(family: &Family, samples: &Points, values: Option<&[f64]>) -> (SymMatrix, Vec<f64>) {
    let mr = family.design_map().reduced_len();
    let n = samples.nrows();
    let partials: Vec<(DMatrix<f64>, DVector<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|c| {
            let rows = c * BLOCK..((c + 1) * BLOCK).min(n);
            let mut a = DMatrix::zeros(mr, rows.len());
            for (k, i) in rows.clone().enumerate() {
                family.reduced_stat_into(samples.row(i), a.column_mut(k).as_mut_slice());
            }
            let cross = match values {
                Some(v) => &a * DVector::from_column_slice(&v[rows]),
                None => DVector::zeros(mr),
            };
            (outer_gram(&a), cross)
        })
        .collect();
    let mut gram = DMatrix::zeros(mr, mr);
    let mut cross = DVector::zeros(mr);
    for (g, z) in partials {
        gram += g;
        cross += z;
    }
    let n = n as f64;
    let fisher = SymMatrix::symmetrized(&(gram / n)).expect("square");
    (fisher, (cross / n).as_slice().to_vec())
}

impl RegressionEstimate {
    /// Moments from given draws and target values; `-∞` values are removed.
    pub fn from_samples(family: &Family, samples: &Points, values: &[f64]) -> Result<Self> {
        if samples.nrows() != values.len() {
            return Err(LsviError::DimensionMismatch {
                expected: samples.nrows(),
                found: values.len(),
            });
        }
        let keep: Vec<bool> = values.iter().map(|v| *v != f64::NEG_INFINITY).collect();
        let dropped = keep.iter().filter(|k| !**k).count();
        let (samples, values) = if dropped > 0 {
            let v: Vec<f64> = values.iter().copied().filter(|v| *v != f64::NEG_INFINITY).collect();
            (samples.select_rows(&keep), v)
        } else {
            (samples.clone(), values.to_vec())
        };
        if values.is_empty() {
            return Err(LsviError::AllSamplesDropped);
        }
        let (reduced_fisher, reduced_cross) = moments(family, &samples, Some(&values));
        Ok(RegressionEstimate {
            map: family.design_map(),
            reduced_fisher,
            reduced_cross,
            samples,
            values,
            dropped,
        })
    }

    /// Number of draws behind the estimate.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `F̂ = N⁻¹ Σ s(Xᵢ)s(Xᵢ)ᵀ` over the full statistic.
    pub fn fisher(&self) -> SymMatrix {
        let m = self.map.full_to_reduced.len();
        let r = &self.map.full_to_reduced;
        let full = DMatrix::from_fn(m, m, |i, j| self.reduced_fisher.get(r[i], r[j]));
        SymMatrix::symmetrized(&full).expect("square")
    }

    /// `ẑ = N⁻¹ Σ f(Xᵢ)s(Xᵢ)` over the full statistic.
    pub fn cross(&self) -> Vec<f64> {
        self.map.full_to_reduced.iter().map(|&r| self.reduced_cross[r]).collect()
    }
}

/// Draws `n` points from `q_η` and evaluates the target on them, with one
/// shared sample set for both moments.
pub fn estimate_regression(
    family: &Family,
    eta: &NaturalParam,
    target: &dyn LogTarget,
    n: usize,
    stream: &RngStream,
) -> Result<RegressionEstimate> {
    if n == 0 {
        return Err(LsviError::InvalidArgument("sample size must be at least 1".into()));
    }
    let samples = family.sample(eta, n, &stream.derive(0))?;
    let eval = evaluate(target, &samples, &stream.derive(1))?;
    RegressionEstimate::from_samples(family, &samples, &eval.values)
}

/// Variant with independent draws for `F̂` and for `ẑ`.
pub fn estimate_regression_split(
    family: &Family,
    eta: &NaturalParam,
    target: &dyn LogTarget,
    n: usize,
    stream: &RngStream,
) -> Result<RegressionEstimate> {
    let mut est = estimate_regression(family, eta, target, n, stream)?;
    let other = family.sample(eta, n, &stream.derive(2))?;
    est.reduced_fisher = moments(family, &other, None).0;
    Ok(est)
}

/// Least-squares coefficients `F̂⁻¹ẑ`, retrying once with a tiny ridge.
pub fn lsvi_ols(est: &RegressionEstimate) -> Result<NaturalParam> {
    let reduced = match ols_solve(&est.reduced_fisher, &est.reduced_cross, 0.0) {
        Ok(beta) => beta,
        Err(LsviError::Singular) => {
            let m = est.reduced_fisher.dim() as f64;
            let ridge = 1e-10 * est.reduced_fisher.trace() / m;
            log::debug!("singular design; retrying with ridge {ridge:e}");
            ols_solve(&est.reduced_fisher, &est.reduced_cross, ridge)?
        }
        Err(e) => return Err(e),
    };
    if reduced.iter().any(|v| !v.is_finite()) {
        return Err(LsviError::Singular);
    }
    Ok(NaturalParam::new(est.map.expand(&reduced)))
}

/// Generic LSVI for any family.
pub fn run_generic(
    family: &Family,
    target: &dyn LogTarget,
    eta0: NaturalParam,
    settings: &RunSettings,
    stream: &RngStream,
) -> Result<RunOutput> {
    drive(family, target, eta0, settings, stream, |eta, it| {
        let est = if settings.independent_sets {
            estimate_regression_split(family, eta, target, settings.samples, it)?
        } else {
            estimate_regression(family, eta, target, settings.samples, it)?
        };
        let eta_new = lsvi_ols(&est)?;
        Ok(Proposal {
            eta_new,
            samples: est.samples,
            values: est.values,
            dropped: est.dropped,
        })
    })
}
