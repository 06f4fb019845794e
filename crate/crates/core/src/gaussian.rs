//! Inversion-free LSVI for Gaussian families.
//!
//! Draws are written `x = μ + C z` with `z` standard normal. In the
//! orthonormal basis `t(z)` the regression coefficients are plain
//! averages `γ̂ = N⁻¹ Σ t(zᵢ) f(xᵢ)`, which are then mapped back to natural
//! parameters with triangular solves only.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{LsviError, Result};
use crate::expfam::{CanonicalParam, Family, NaturalParam};
use crate::lsvi::{drive, Proposal, RunOutput, RunSettings};
use crate::numerics::{
    cholesky, draw_standard_normal, outer_gram, tri_solve, tri_solve_matrix, unvec, vech_len, vech_pairs,
    vech_position, LowerTriangular, Points, RngStream, SymMatrix, Transpose,
};
use crate::targets::{evaluate, LogTarget};

/// Length of the full-covariance orthonormal statistic.
pub fn t_len_fc(d: usize) -> usize {
    1 + d + vech_len(d)
}

pub fn t_stat_fc_into(z: &[f64], out: &mut [f64]) {
    let d = z.len();
    out[0] = 1.0;
    out[1..=d].copy_from_slice(z);
    for (k, (i, j)) in vech_pairs(d).enumerate() {
        out[1 + d + k] = if i == j {
            (z[i] * z[i] - 1.0) / SQRT_2
        } else {
            z[i] * z[j]
        };
    }
}

/// `(1, z, (z₁²-1)/√2, z₁z₂, …, (z_d²-1)/√2)`, quadratic part in row-major
/// upper-triangular order.
pub fn t_stat_fc(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t_len_fc(z.len())];
    t_stat_fc_into(z, &mut out);
    out
}

pub fn t_stat_mf_into(z: &[f64], out: &mut [f64]) {
    let d = z.len();
    out[0] = 1.0;
    out[1..=d].copy_from_slice(z);
    for i in 0..d {
        out[1 + d + i] = (z[i] * z[i] - 1.0) / SQRT_2;
    }
}

/// `(1, z, (z²-1)/√2)`.
pub fn t_stat_mf(z: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; 1 + 2 * z.len()];
    t_stat_mf_into(z, &mut out);
    out
}

/// Coefficients in the orthonormal basis `t(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaCoeffs {
    pub intercept: f64,
    pub linear: Vec<f64>,
    /// `d(d+1)/2` entries (full covariance) or `d` (mean-field).
    pub quadratic: Vec<f64>,
}

impl GammaCoeffs {
    pub fn from_slice(d: usize, v: &[f64]) -> Result<Self> {
        let q = v.len().checked_sub(1 + d).ok_or(LsviError::DimensionMismatch {
            expected: 1 + 2 * d,
            found: v.len(),
        })?;
        if q != d && q != vech_len(d) {
            return Err(LsviError::DimensionMismatch {
                expected: 1 + d + vech_len(d),
                found: v.len(),
            });
        }
        Ok(GammaCoeffs {
            intercept: v[0],
            linear: v[1..=d].to_vec(),
            quadratic: v[1 + d..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.intercept];
        v.extend_from_slice(&self.linear);
        v.extend_from_slice(&self.quadratic);
        v
    }

    fn is_full(&self) -> bool {
        let d = self.linear.len();
        self.quadratic.len() == vech_len(d) && d > 1
    }

    /// `γᵀt(z)`.
    pub fn dot_t(&self, z: &[f64]) -> f64 {
        let t = if self.is_full() { t_stat_fc(z) } else { t_stat_mf(z) };
        self.to_vec().iter().zip(&t).map(|(a, b)| a * b).sum()
    }
}

/// The map `z ↦ x = μ + C z`.
#[derive(Debug, Clone, PartialEq)]
pub enum Scale {
    Full(LowerTriangular),
    /// Per-coordinate standard deviations.
    Diagonal(Vec<f64>),
}

impl Scale {
    fn is_full(&self) -> bool {
        matches!(self, Scale::Full(_))
    }

    fn apply(&self, mean: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            Scale::Full(c) => {
                let m = c.matrix();
                for i in 0..mean.len() {
                    let mut acc = mean[i];
                    for j in 0..=i {
                        acc += m[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
            }
            Scale::Diagonal(sd) => {
                for i in 0..mean.len() {
                    out[i] = mean[i] + sd[i] * z[i];
                }
            }
        }
    }
}

/// How `γ` is obtained from the draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaEstimator {
    /// `N⁻¹ Σ t(zᵢ) f(xᵢ)`: unbiased for the population coefficients, exact
    /// only in expectation.
    Average,
    /// The average applied to the residual `f - ηᵀs` of the current
    /// approximation, plus the current coefficients: a control variate that
    /// is unbiased because `E[t tᵀ] = I`, and whose noise shrinks with the
    /// residual as the iteration settles.
    ControlVariate,
    /// Least squares of `f` on `t(z)` over the draws, solved by conjugate
    /// gradients started from the control-variate estimate (or the average
    /// when no current coefficients are given). The empirical Gram matrix is close
    /// to the identity, so few matrix-vector products are needed and no
    /// matrix is inverted. Exact on finite samples whenever `f` lies in the
    /// span of the statistic.
    Refined { tol: f64, max_iter: usize },
}

impl GammaEstimator {
    pub fn refined() -> Self {
        GammaEstimator::Refined {
            tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Draws and coefficients from one `γ` estimation.
#[derive(Debug, Clone)]
pub struct GammaFit {
    pub coeffs: GammaCoeffs,
    /// Draws `x = μ + C z` with finite target values.
    pub points: Points,
    pub values: Vec<f64>,
    pub dropped: usize,
}

const CHUNK: usize = 1024;

/// In-order sum over fixed chunks of per-index vector contributions.
fn chunked_vec_sum<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync,
{
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            let mut scratch = vec![0.0; len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(i, &mut acc, &mut scratch);
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; len];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// `γ` from standard-normal draws `z` and target values at `μ + C z`.
/// `current` holds the coefficients of the current approximation and is
/// required by [`GammaEstimator::ControlVariate`] only.
pub fn gamma_from_draws(
    z: &Points,
    values: &[f64],
    full: bool,
    estimator: GammaEstimator,
    current: Option<&GammaCoeffs>,
) -> Result<GammaCoeffs> {
    let n = z.nrows();
    let d = z.ncols();
    if n == 0 {
        return Err(LsviError::AllSamplesDropped);
    }
    let stat: fn(&[f64], &mut [f64]) = if full { t_stat_fc_into } else { t_stat_mf_into };
    let len = if full { t_len_fc(d) } else { 1 + 2 * d };
    let centre = match (estimator, current) {
        (GammaEstimator::Average, _) => None,
        (_, Some(c)) => Some(c.to_vec()),
        (GammaEstimator::ControlVariate, None) => {
            return Err(LsviError::InvalidArgument(
                "the control-variate estimator needs the current coefficients".into(),
            ))
        }
        (GammaEstimator::Refined { .. }, None) => None,
    };
    if let Some(c) = &centre {
        if c.len() != len {
            return Err(LsviError::DimensionMismatch {
                expected: len,
                found: c.len(),
            });
        }
    }
    // plain sums of t·f and, with a centre c, of t·(f - cᵀt)
    let both = centre.is_some();
    let sums = chunked_vec_sum(n, 2 * len, |i, acc, scratch| {
        let t = &mut scratch[..len];
        stat(z.row(i), t);
        let f = values[i];
        let (plain, centred) = acc.split_at_mut(len);
        let r = match &centre {
            Some(c) => f - t.iter().zip(c).map(|(a, b)| a * b).sum::<f64>(),
            None => f,
        };
        for k in 0..len {
            plain[k] += t[k] * f;
            if both {
                centred[k] += t[k] * r;
            }
        }
    });
    let average: Vec<f64> = sums[..len].iter().map(|v| v / n as f64).collect();
    let controlled: Option<Vec<f64>> = centre.as_ref().map(|c| {
        sums[len..].iter().zip(c).map(|(v, c)| v / n as f64 + c).collect()
    });
    let gamma = match estimator {
        GammaEstimator::Average => average,
        GammaEstimator::ControlVariate => controlled.expect("centre present"),
        GammaEstimator::Refined { tol, max_iter } => {
            let start = controlled.unwrap_or_else(|| average.clone());
            refine(z, stat, len, average, start, tol, max_iter)
        }
    };
    GammaCoeffs::from_slice(d, &gamma)
}

/// Conjugate gradients on `(TᵀT/N) γ = Tᵀf/N`, started from `start`.
/// `b = Tᵀf/N` is the plain average. `TᵀT` is accumulated from fixed
/// blocks of rows, in block order, so the result does not depend on the
/// thread count.
fn refine(
    z: &Points,
    stat: fn(&[f64], &mut [f64]),
    len: usize,
    b: Vec<f64>,
    start: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = z.nrows();
    let partials: Vec<DMatrix<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let rows = c * CHUNK..((c + 1) * CHUNK).min(n);
            // columns are the t(z) of the block's draws
            let mut block = DMatrix::zeros(len, rows.len());
            for (k, i) in rows.enumerate() {
                stat(z.row(i), block.column_mut(k).as_mut_slice());
            }
            outer_gram(&block)
        })
        .collect();
    let mut gram = DMatrix::zeros(len, len);
    for p in partials {
        gram += p;
    }
    gram /= n as f64;

    let b = DVector::from_vec(b);
    let mut x = DVector::from_vec(start);
    let mut r = &b - &gram * &x;
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let stop = (tol * b.norm()).powi(2);
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        let ap = &gram * &p;
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.norm_squared();
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    x.as_slice().to_vec()
}

/// Draws `z`, evaluates the target at `μ + C z` and estimates `γ`.
pub fn estimate_gamma(
    mean: &[f64],
    scale: &Scale,
    target: &dyn LogTarget,
    n: usize,
    stream: &RngStream,
    estimator: GammaEstimator,
    current: Option<&GammaCoeffs>,
) -> Result<GammaFit> {
    let d = mean.len();
    if n == 0 {
        return Err(LsviError::InvalidArgument("sample size must be at least 1".into()));
    }
    let z = draw_standard_normal(&stream.derive(0), n, d);
    let mut x = Points::zeros(n, d);
    for i in 0..n {
        scale.apply(mean, z.row(i), x.row_mut(i));
    }
    let eval = evaluate(target, &x, &stream.derive(1))?;
    let (z, _) = eval.retained(&z);
    let (points, values) = eval.retained(&x);
    let coeffs = gamma_from_draws(&z, &values, scale.is_full(), estimator, current)?;
    Ok(GammaFit {
        coeffs,
        points,
        values,
        dropped: eval.dropped,
    })
}

fn check_dims(eta_len: usize, expected: usize, mean: usize, scale: usize) -> Result<()> {
    if eta_len != expected {
        return Err(LsviError::DimensionMismatch {
            expected,
            found: eta_len,
        });
    }
    if mean != scale {
        return Err(LsviError::DimensionMismatch {
            expected: mean,
            found: scale,
        });
    }
    Ok(())
}

/// Coefficients of `z ↦ ηᵀs(μ + C z)` in the basis `t(z)`.
pub fn beta_to_gamma_fc(eta: &NaturalParam, mean: &[f64], c: &LowerTriangular) -> Result<GammaCoeffs> {
    let d = mean.len();
    let eta = eta.as_slice();
    check_dims(eta.len(), 1 + d + d * d, d, c.dim())?;
    let h = SymMatrix::symmetrized(&unvec(&eta[1 + d..], d)?)?.into_matrix();
    let cm = c.matrix();
    let mu = DVector::from_column_slice(mean);
    let eta1 = DVector::from_column_slice(&eta[1..=d]);
    let big_gamma = cm.transpose() * &h * cm;
    let h_mu = &h * &mu;
    let linear = cm.transpose() * (&eta1 + &h_mu * 2.0);
    let intercept = eta[0] + eta1.dot(&mu) + mu.dot(&h_mu) + big_gamma.trace();
    let quadratic = vech_pairs(d)
        .map(|(i, j)| {
            if i == j {
                SQRT_2 * big_gamma[(i, i)]
            } else {
                big_gamma[(i, j)] + big_gamma[(j, i)]
            }
        })
        .collect();
    Ok(GammaCoeffs {
        intercept,
        linear: linear.as_slice().to_vec(),
        quadratic,
    })
}

/// Natural parameter `β` with `βᵀs(μ + C z) = γᵀt(z)` for all `z`.
pub fn gamma_to_beta_fc(gamma: &GammaCoeffs, mean: &[f64], c: &LowerTriangular) -> Result<NaturalParam> {
    let d = mean.len();
    check_dims(gamma.to_vec().len(), 1 + d + vech_len(d), d, c.dim())?;
    let mut big_gamma = DMatrix::<f64>::zeros(d, d);
    for (i, j) in vech_pairs(d) {
        let g = gamma.quadratic[vech_position(i, j, d)];
        if i == j {
            big_gamma[(i, i)] = g / SQRT_2;
        } else {
            big_gamma[(i, j)] = g / 2.0;
            big_gamma[(j, i)] = g / 2.0;
        }
    }
    // H = C⁻ᵀ Γ C⁻¹
    let w = tri_solve_matrix(c, &big_gamma, Transpose::Yes)?;
    let h = tri_solve_matrix(c, &w.transpose(), Transpose::Yes)?;
    let h = SymMatrix::symmetrized(&h)?.into_matrix();
    let mu = DVector::from_column_slice(mean);
    let h_mu = &h * &mu;
    let beta1 = DVector::from_vec(tri_solve(c, &gamma.linear, Transpose::Yes)?) - &h_mu * 2.0;
    let beta0 = gamma.intercept - big_gamma.trace() - beta1.dot(&mu) - mu.dot(&h_mu);
    let mut eta = Vec::with_capacity(1 + d + d * d);
    eta.push(beta0);
    eta.extend_from_slice(beta1.as_slice());
    eta.extend_from_slice(h.as_slice());
    Ok(NaturalParam::new(eta))
}

fn check_sd(sd: &[f64]) -> Result<()> {
    if sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(LsviError::DomainViolation("standard deviations must be positive".into()));
    }
    Ok(())
}

/// Mean-field counterpart of [`beta_to_gamma_fc`], with `x = μ + σ ⊙ z`.
pub fn beta_to_gamma_mf(eta: &NaturalParam, mean: &[f64], sd: &[f64]) -> Result<GammaCoeffs> {
    let d = mean.len();
    let eta = eta.as_slice();
    check_dims(eta.len(), 1 + 2 * d, d, sd.len())?;
    check_sd(sd)?;
    let (e1, e2) = (&eta[1..=d], &eta[1 + d..]);
    let mut intercept = eta[0];
    for i in 0..d {
        intercept += e1[i] * mean[i] + e2[i] * (mean[i] * mean[i] + sd[i] * sd[i]);
    }
    Ok(GammaCoeffs {
        intercept,
        linear: (0..d).map(|i| sd[i] * (e1[i] + 2.0 * e2[i] * mean[i])).collect(),
        quadratic: (0..d).map(|i| SQRT_2 * e2[i] * sd[i] * sd[i]).collect(),
    })
}

/// Mean-field counterpart of [`gamma_to_beta_fc`].
pub fn gamma_to_beta_mf(gamma: &GammaCoeffs, mean: &[f64], sd: &[f64]) -> Result<NaturalParam> {
    let d = mean.len();
    check_dims(gamma.to_vec().len(), 1 + 2 * d, d, sd.len())?;
    check_sd(sd)?;
    let b2: Vec<f64> = (0..d).map(|i| gamma.quadratic[i] / (SQRT_2 * sd[i] * sd[i])).collect();
    let b1: Vec<f64> = (0..d).map(|i| gamma.linear[i] / sd[i] - 2.0 * b2[i] * mean[i]).collect();
    let mut b0 = gamma.intercept;
    for i in 0..d {
        b0 -= b1[i] * mean[i] + b2[i] * (mean[i] * mean[i] + sd[i] * sd[i]);
    }
    let mut eta = vec![b0];
    eta.extend(b1);
    eta.extend(b2);
    Ok(NaturalParam::new(eta))
}

/// LSVI over the full-covariance Gaussian family without `m × m` solves.
pub fn run_fc(
    target: &dyn LogTarget,
    mean0: &[f64],
    cov0: &SymMatrix,
    settings: &RunSettings,
    stream: &RngStream,
) -> Result<RunOutput> {
    let d = mean0.len();
    let family = Family::FullCovGaussian { dim: d };
    let eta0 = family.from_canonical(&CanonicalParam::FullCov {
        mean: mean0.to_vec(),
        cov: cov0.clone(),
    })?;
    drive(&family, target, eta0, settings, stream, |eta, it| {
        let CanonicalParam::FullCov { mean, cov } = family.to_canonical(eta)? else {
            unreachable!("full-covariance family")
        };
        let c = cholesky(&cov)?;
        let current = beta_to_gamma_fc(eta, &mean, &c)?;
        let scale = Scale::Full(c.clone());
        let fit = estimate_gamma(&mean, &scale, target, settings.samples, it, settings.gamma, Some(&current))?;
        let eta_new = gamma_to_beta_fc(&fit.coeffs, &mean, &c)?;
        Ok(Proposal {
            eta_new,
            samples: fit.points,
            values: fit.values,
            dropped: fit.dropped,
        })
    })
}

/// LSVI over the mean-field Gaussian family, `O(N d)` per iteration.
pub fn run_mf(
    target: &dyn LogTarget,
    mean0: &[f64],
    var0: &[f64],
    settings: &RunSettings,
    stream: &RngStream,
) -> Result<RunOutput> {
    let d = mean0.len();
    let family = Family::MeanFieldGaussian { dim: d };
    let eta0 = family.from_canonical(&CanonicalParam::MeanField {
        mean: mean0.to_vec(),
        var: var0.to_vec(),
    })?;
    drive(&family, target, eta0, settings, stream, |eta, it| {
        let CanonicalParam::MeanField { mean, var } = family.to_canonical(eta)? else {
            unreachable!("mean-field family")
        };
        let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let current = beta_to_gamma_mf(eta, &mean, &sd)?;
        let scale = Scale::Diagonal(sd.clone());
        let fit = estimate_gamma(&mean, &scale, target, settings.samples, it, settings.gamma, Some(&current))?;
        let eta_new = gamma_to_beta_mf(&fit.coeffs, &mean, &sd)?;
        Ok(Proposal {
            eta_new,
            samples: fit.points,
            values: fit.values,
            dropped: fit.dropped,
        })
    })
}
