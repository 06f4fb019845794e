//! Exponential families `q_η(x) = exp{ηᵀ s(x)}` with an intercept slot.
//!
//! Every statistic starts with the constant 1, so `η[0]` only rescales the
//! unnormalised density. It is carried along but never used for sampling,
//! domain membership or normalised densities.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{LsviError, Result};
use crate::numerics::{
    cholesky, draw_standard_normal, draw_uniform, spd_inverse, unvec, vech_len, vech_pairs,
    LowerTriangular, Points, RngStream, SymMatrix,
};

const PHI_CLAMP: f64 = 1e-15;
const PROB_CLAMP: f64 = 1e-12;

/// Natural parameter `η = (η⁽⁰⁾, η̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalParam(Vec<f64>);

impl NaturalParam {
    pub fn new(eta: Vec<f64>) -> Self {
        NaturalParam(eta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }
}

/// Family-specific canonical parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalParam {
    FullCov { mean: Vec<f64>, cov: SymMatrix },
    MeanField { mean: Vec<f64>, var: Vec<f64> },
    /// Parent Gaussian `(mean, var)` restricted to the box `[lower, upper]`.
    Truncated {
        mean: Vec<f64>,
        var: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Bernoulli { probs: Vec<f64> },
}

/// An exponential family together with its sampler and conversions.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `s(x) = (1, x, vec(xxᵀ))`, `m = 1 + d + d²`.
    FullCovGaussian { dim: usize },
    /// `s(x) = (1, x, x²)`, `m = 1 + 2d`.
    MeanFieldGaussian { dim: usize },
    /// Mean-field statistic on the box `[lower, upper]`, restricted to
    /// `η⁽²⁾ < 0`.
    TruncatedMeanField { lower: Vec<f64>, upper: Vec<f64> },
    /// `s(x) = (1, x)` on `{0, 1}^d`.
    BernoulliProduct { dim: usize },
}

/// How the regression columns collapse onto linearly independent ones.
///
/// `vec(xxᵀ)` holds every off-diagonal product twice; the least-squares
/// design is regressed on the distinct columns and the coefficient of a
/// duplicated column is split evenly between its copies.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMap {
    /// For each reduced column, one full-statistic index holding it.
    pub representatives: Vec<usize>,
    /// For each full-statistic index, its reduced column.
    pub full_to_reduced: Vec<usize>,
    /// Number of full-statistic copies of each reduced column.
    pub counts: Vec<usize>,
}

impl DesignMap {
    fn identity(m: usize) -> Self {
        DesignMap {
            representatives: (0..m).collect(),
            full_to_reduced: (0..m).collect(),
            counts: vec![1; m],
        }
    }

    pub fn reduced_len(&self) -> usize {
        self.representatives.len()
    }

    /// Minimum-norm expansion of reduced coefficients to the full statistic.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.full_to_reduced
            .iter()
            .map(|&r| reduced[r] / self.counts[r] as f64)
            .collect()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 / (1 + e^{-u}))` without overflow.
pub fn log_sigmoid(u: f64) -> f64 {
    // u - log1p(e^u) for u < 0 and -log1p(e^-u) otherwise, without a branch
    u.min(0.0) - (-u.abs()).exp().ln_1p()
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p.clamp(PHI_CLAMP, 1.0 - PHI_CLAMP))
}

/// `log(Φ(b) - Φ(a))` for `a < b`, evaluated in the upper tail when both
/// ends are positive.
fn log_normal_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (std_normal_cdf(-a) - std_normal_cdf(-b)).ln()
    } else {
        (std_normal_cdf(b) - std_normal_cdf(a)).ln()
    }
}

/// Inverse-CDF draw of a standard normal truncated to `[a, b]`.
fn truncated_std_normal(a: f64, b: f64, u: f64) -> f64 {
    if a > 0.0 {
        // mirror into the lower tail for accuracy
        return -truncated_std_normal(-b, -a, 1.0 - u);
    }
    let lo = std_normal_cdf(a);
    let hi = std_normal_cdf(b);
    let p = (lo + u * (hi - lo)).clamp(PHI_CLAMP, 1.0 - PHI_CLAMP);
    std_normal_quantile(p).clamp(a, b)
}

impl Family {
    pub fn truncated(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(LsviError::InvalidArgument(
                "truncation box bounds must have equal, non-zero length".into(),
            ));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(LsviError::InvalidArgument("truncation box needs finite a < b".into()));
        }
        Ok(Family::TruncatedMeanField { lower, upper })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::FullCovGaussian { .. } => "fullcov",
            Family::MeanFieldGaussian { .. } => "meanfield",
            Family::TruncatedMeanField { .. } => "truncated",
            Family::BernoulliProduct { .. } => "bernoulli",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::FullCovGaussian { dim }
            | Family::MeanFieldGaussian { dim }
            | Family::BernoulliProduct { dim } => *dim,
            Family::TruncatedMeanField { lower, .. } => lower.len(),
        }
    }

    /// Length `m` of the statistic, intercept included.
    pub fn stat_len(&self) -> usize {
        let d = self.dim();
        match self {
            Family::FullCovGaussian { .. } => 1 + d + d * d,
            Family::MeanFieldGaussian { .. } | Family::TruncatedMeanField { .. } => 1 + 2 * d,
            Family::BernoulliProduct { .. } => 1 + d,
        }
    }

    fn check_eta(&self, eta: &[f64]) -> Result<()> {
        if eta.len() != self.stat_len() {
            return Err(LsviError::DimensionMismatch {
                expected: self.stat_len(),
                found: eta.len(),
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LsviError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn suff_stat(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut out = vec![0.0; self.stat_len()];
        self.suff_stat_into(x, &mut out);
        Ok(out)
    }

    /// Writes `s(x)` into `out` (lengths are the caller's responsibility).
    pub fn suff_stat_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out[0] = 1.0;
        out[1..=d].copy_from_slice(x);
        match self {
            Family::FullCovGaussian { .. } => {
                for c in 0..d {
                    for r in 0..d {
                        out[1 + d + c * d + r] = x[r] * x[c];
                    }
                }
            }
            Family::MeanFieldGaussian { .. } | Family::TruncatedMeanField { .. } => {
                for i in 0..d {
                    out[1 + d + i] = x[i] * x[i];
                }
            }
            Family::BernoulliProduct { .. } => {}
        }
    }

    /// Linearly independent columns of the statistic.
    pub fn design_map(&self) -> DesignMap {
        match self {
            Family::FullCovGaussian { dim } => {
                let d = *dim;
                let mut representatives: Vec<usize> = (0..=d).collect();
                let mut full_to_reduced: Vec<usize> = (0..=d).collect();
                full_to_reduced.resize(1 + d + d * d, 0);
                let mut counts = vec![1; 1 + d];
                for (k, (r, c)) in vech_pairs(d).enumerate() {
                    let reduced = 1 + d + k;
                    let upper = 1 + d + c * d + r;
                    let lower = 1 + d + r * d + c;
                    representatives.push(upper);
                    full_to_reduced[upper] = reduced;
                    full_to_reduced[lower] = reduced;
                    counts.push(if r == c { 1 } else { 2 });
                }
                DesignMap {
                    representatives,
                    full_to_reduced,
                    counts,
                }
            }
            _ => DesignMap::identity(self.stat_len()),
        }
    }

    /// Writes the distinct entries of `s(x)`, ordered as in [`DesignMap`].
    pub fn reduced_stat_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Family::FullCovGaussian { dim } => {
                let d = *dim;
                out[0] = 1.0;
                out[1..=d].copy_from_slice(x);
                for (k, (r, c)) in vech_pairs(d).enumerate() {
                    out[1 + d + k] = x[r] * x[c];
                }
            }
            _ => self.suff_stat_into(x, out),
        }
    }

    /// `ηᵀ s(x)` without materialising `s(x)`.
    pub fn stat_dot(&self, eta: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = eta[0];
        for i in 0..d {
            acc += eta[1 + i] * x[i];
        }
        match self {
            Family::FullCovGaussian { .. } => {
                for c in 0..d {
                    let col = &eta[1 + d + c * d..1 + d + (c + 1) * d];
                    let mut inner = 0.0;
                    for r in 0..d {
                        inner += col[r] * x[r];
                    }
                    acc += inner * x[c];
                }
            }
            Family::MeanFieldGaussian { .. } | Family::TruncatedMeanField { .. } => {
                for i in 0..d {
                    acc += eta[1 + d + i] * x[i] * x[i];
                }
            }
            Family::BernoulliProduct { .. } => {}
        }
        acc
    }

    /// Whether `η` lies in the (open) natural parameter space.
    pub fn in_domain(&self, eta: &[f64]) -> bool {
        if eta.len() != self.stat_len() || eta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let d = self.dim();
        match self {
            Family::FullCovGaussian { .. } => match neg_quadratic(eta, d) {
                Ok(neg) => cholesky(&neg).is_ok(),
                Err(_) => false,
            },
            Family::MeanFieldGaussian { .. } | Family::TruncatedMeanField { .. } => {
                eta[1 + d..].iter().all(|&v| v < 0.0)
            }
            Family::BernoulliProduct { .. } => true,
        }
    }

    pub fn to_canonical(&self, eta: &NaturalParam) -> Result<CanonicalParam> {
        let eta = eta.as_slice();
        self.check_eta(eta)?;
        if !self.in_domain(eta) {
            return Err(LsviError::DomainViolation(format!(
                "{} parameter is not normalisable",
                self.name()
            )));
        }
        let d = self.dim();
        Ok(match self {
            Family::FullCovGaussian { .. } => {
                let precision = neg_quadratic(eta, d)?.into_matrix() * 2.0;
                let precision = SymMatrix::from_lower(precision)?;
                let l = cholesky(&precision).map_err(|e| LsviError::DomainViolation(e.to_string()))?;
                let cov = spd_inverse(&l);
                let mean = (cov.matrix() * nalgebra::DVector::from_column_slice(&eta[1..=d]))
                    .iter()
                    .copied()
                    .collect();
                CanonicalParam::FullCov { mean, cov }
            }
            Family::MeanFieldGaussian { .. } => {
                let (mean, var) = mean_field_canonical(eta, d);
                CanonicalParam::MeanField { mean, var }
            }
            Family::TruncatedMeanField { lower, upper } => {
                let (mean, var) = mean_field_canonical(eta, d);
                CanonicalParam::Truncated {
                    mean,
                    var,
                    lower: lower.clone(),
                    upper: upper.clone(),
                }
            }
            Family::BernoulliProduct { .. } => CanonicalParam::Bernoulli {
                probs: eta[1..].iter().map(|&v| logistic(v)).collect(),
            },
        })
    }

    /// Natural parameter of a canonical parameter, with `η⁽⁰⁾ = 0`.
    pub fn from_canonical(&self, c: &CanonicalParam) -> Result<NaturalParam> {
        let d = self.dim();
        let mut eta = vec![0.0; self.stat_len()];
        match (self, c) {
            (Family::FullCovGaussian { .. }, CanonicalParam::FullCov { mean, cov }) => {
                check_len(mean.len(), d)?;
                check_len(cov.dim(), d)?;
                let l = cholesky(cov).map_err(|e| LsviError::DomainViolation(e.to_string()))?;
                let precision = spd_inverse(&l);
                let lin = precision.matrix() * nalgebra::DVector::from_column_slice(mean);
                eta[1..=d].copy_from_slice(lin.as_slice());
                for (k, v) in precision.matrix().as_slice().iter().enumerate() {
                    eta[1 + d + k] = -0.5 * v;
                }
            }
            (Family::MeanFieldGaussian { .. }, CanonicalParam::MeanField { mean, var }) => {
                mean_field_natural(mean, var, d, &mut eta)?;
            }
            (
                Family::TruncatedMeanField { lower, upper },
                CanonicalParam::Truncated {
                    mean,
                    var,
                    lower: a,
                    upper: b,
                },
            ) => {
                if a != lower || b != upper {
                    return Err(LsviError::DomainViolation(
                        "truncation box does not match the family".into(),
                    ));
                }
                mean_field_natural(mean, var, d, &mut eta)?;
            }
            (Family::BernoulliProduct { .. }, CanonicalParam::Bernoulli { probs }) => {
                check_len(probs.len(), d)?;
                for (i, &q) in probs.iter().enumerate() {
                    if !(0.0..=1.0).contains(&q) {
                        return Err(LsviError::DomainViolation(format!(
                            "probability {q} outside [0, 1]"
                        )));
                    }
                    let q = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    eta[1 + i] = (q / (1.0 - q)).ln();
                }
            }
            _ => {
                return Err(LsviError::InvalidArgument(format!(
                    "canonical parameter does not belong to the {} family",
                    self.name()
                )))
            }
        }
        Ok(NaturalParam(eta))
    }

    /// `n` independent draws from the normalised density, one per row.
    pub fn sample(&self, eta: &NaturalParam, n: usize, stream: &RngStream) -> Result<Points> {
        let d = self.dim();
        match self.to_canonical(eta)? {
            CanonicalParam::FullCov { mean, cov } => {
                let c = cholesky(&cov).map_err(|e| LsviError::DomainViolation(e.to_string()))?;
                let mut z = draw_standard_normal(stream, n, d);
                let mut buf = vec![0.0; d];
                for i in 0..n {
                    let row = z.row_mut(i);
                    c.mul_vec_into(row, &mut buf);
                    for j in 0..d {
                        row[j] = mean[j] + buf[j];
                    }
                }
                Ok(z)
            }
            CanonicalParam::MeanField { mean, var } => {
                let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
                let mut z = draw_standard_normal(stream, n, d);
                for i in 0..n {
                    for (j, v) in z.row_mut(i).iter_mut().enumerate() {
                        *v = mean[j] + sd[j] * *v;
                    }
                }
                Ok(z)
            }
            CanonicalParam::Truncated {
                mean,
                var,
                lower,
                upper,
            } => {
                let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
                let u = draw_uniform(stream, n * d);
                let mut out = Points::zeros(n, d);
                for i in 0..n {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        let a = (lower[j] - mean[j]) / sd[j];
                        let b = (upper[j] - mean[j]) / sd[j];
                        let z = truncated_std_normal(a, b, u[i * d + j]);
                        *v = (mean[j] + sd[j] * z).clamp(lower[j], upper[j]);
                    }
                }
                Ok(out)
            }
            CanonicalParam::Bernoulli { probs } => {
                let mut rng = stream.rng();
                let mut out = Points::zeros(n, d);
                for i in 0..n {
                    for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                        *v = if rng.random::<f64>() < probs[j] { 1.0 } else { 0.0 };
                    }
                }
                Ok(out)
            }
        }
    }

    /// Precomputed normalised log-density `log q̄_η`.
    pub fn density(&self, eta: &NaturalParam) -> Result<LogDensity> {
        let canonical = self.to_canonical(eta)?;
        Ok(match canonical {
            CanonicalParam::FullCov { mean, cov } => {
                let precision = spd_inverse(
                    &cholesky(&cov).map_err(|e| LsviError::DomainViolation(e.to_string()))?,
                );
                let factor =
                    cholesky(&precision).map_err(|e| LsviError::DomainViolation(e.to_string()))?;
                let d = mean.len() as f64;
                let constant = -0.5 * d * (2.0 * PI).ln() + 0.5 * factor.log_det_product();
                LogDensity::Gaussian {
                    mean,
                    precision_factor: factor,
                    constant,
                }
            }
            CanonicalParam::MeanField { mean, var } => LogDensity::Diagonal {
                constant: diagonal_constant(&var),
                mean,
                var,
                bounds: None,
            },
            CanonicalParam::Truncated {
                mean,
                var,
                lower,
                upper,
            } => {
                let mut constant = diagonal_constant(&var);
                for j in 0..mean.len() {
                    let sd = var[j].sqrt();
                    constant -= log_normal_mass((lower[j] - mean[j]) / sd, (upper[j] - mean[j]) / sd);
                }
                LogDensity::Diagonal {
                    constant,
                    mean,
                    var,
                    bounds: Some((lower, upper)),
                }
            }
            CanonicalParam::Bernoulli { .. } => LogDensity::Bernoulli {
                logits: eta.as_slice()[1..].to_vec(),
            },
        })
    }

    pub fn log_density(&self, eta: &NaturalParam, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.density(eta)?.eval(x))
    }

    /// Closed-form `E_η[s(X)]`.
    pub fn mean_statistic(&self, eta: &NaturalParam) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![1.0; self.stat_len()];
        match self.to_canonical(eta)? {
            CanonicalParam::FullCov { mean, cov } => {
                out[1..=d].copy_from_slice(&mean);
                for c in 0..d {
                    for r in 0..d {
                        out[1 + d + c * d + r] = cov.get(r, c) + mean[r] * mean[c];
                    }
                }
            }
            CanonicalParam::MeanField { mean, var } => {
                for j in 0..d {
                    out[1 + j] = mean[j];
                    out[1 + d + j] = var[j] + mean[j] * mean[j];
                }
            }
            CanonicalParam::Truncated {
                mean,
                var,
                lower,
                upper,
            } => {
                for j in 0..d {
                    let sd = var[j].sqrt();
                    let a = (lower[j] - mean[j]) / sd;
                    let b = (upper[j] - mean[j]) / sd;
                    let z = log_normal_mass(a, b).exp();
                    let ratio = (std_normal_pdf(a) - std_normal_pdf(b)) / z;
                    let m = mean[j] + sd * ratio;
                    let v = var[j]
                        * (1.0 + (a * std_normal_pdf(a) - b * std_normal_pdf(b)) / z - ratio * ratio);
                    out[1 + j] = m;
                    out[1 + d + j] = v + m * m;
                }
            }
            CanonicalParam::Bernoulli { probs } => out[1..].copy_from_slice(&probs),
        }
        Ok(out)
    }
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(LsviError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `-sym(unvec(η⁽²⁾))`, positive definite exactly when `η ∈ 𝒱`.
fn neg_quadratic(eta: &[f64], d: usize) -> Result<SymMatrix> {
    let h = unvec(&eta[1 + d..], d)?;
    SymMatrix::symmetrized(&(-h))
}

fn mean_field_canonical(eta: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let var: Vec<f64> = eta[1 + d..].iter().map(|&q| -0.5 / q).collect();
    let mean = (0..d).map(|j| eta[1 + j] * var[j]).collect();
    (mean, var)
}

fn mean_field_natural(mean: &[f64], var: &[f64], d: usize, eta: &mut [f64]) -> Result<()> {
    check_len(mean.len(), d)?;
    check_len(var.len(), d)?;
    for j in 0..d {
        if !(var[j] > 0.0) || !var[j].is_finite() || !mean[j].is_finite() {
            return Err(LsviError::DomainViolation(format!(
                "variance {} at coordinate {j} must be positive and finite",
                var[j]
            )));
        }
        eta[1 + j] = mean[j] / var[j];
        eta[1 + d + j] = -0.5 / var[j];
    }
    Ok(())
}

fn diagonal_constant(var: &[f64]) -> f64 {
    -0.5 * var.iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>()
}

/// Normalised log-density with its per-parameter work done once.
#[derive(Debug, Clone)]
pub enum LogDensity {
    Gaussian {
        mean: Vec<f64>,
        precision_factor: LowerTriangular,
        constant: f64,
    },
    Diagonal {
        mean: Vec<f64>,
        var: Vec<f64>,
        constant: f64,
        bounds: Option<(Vec<f64>, Vec<f64>)>,
    },
    Bernoulli {
        logits: Vec<f64>,
    },
}

impl LogDensity {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            LogDensity::Gaussian {
                mean,
                precision_factor,
                constant,
            } => {
                // (x-μ)ᵀ P (x-μ) = ‖Lᵀ(x-μ)‖² with P = L Lᵀ
                let l = precision_factor.matrix();
                let d = mean.len();
                let mut quad = 0.0;
                for c in 0..d {
                    let mut acc = 0.0;
                    for r in c..d {
                        acc += l[(r, c)] * (x[r] - mean[r]);
                    }
                    quad += acc * acc;
                }
                constant - 0.5 * quad
            }
            LogDensity::Diagonal {
                mean,
                var,
                constant,
                bounds,
            } => {
                if let Some((lower, upper)) = bounds {
                    if x.iter().zip(lower.iter().zip(upper)).any(|(v, (a, b))| v < a || v > b) {
                        return f64::NEG_INFINITY;
                    }
                }
                let mut acc = *constant;
                for j in 0..mean.len() {
                    acc -= 0.5 * (x[j] - mean[j]).powi(2) / var[j];
                }
                acc
            }
            LogDensity::Bernoulli { logits } => logits
                .iter()
                .zip(x)
                .map(|(&e, &v)| if v > 0.5 { log_sigmoid(e) } else { log_sigmoid(-e) })
                .sum(),
        }
    }
}

fn fmt_values(out: &mut String, values: &[f64]) {
    for v in values {
        let _ = write!(out, " {v:e}");
    }
}

impl CanonicalParam {
    pub fn family_name(&self) -> &'static str {
        match self {
            CanonicalParam::FullCov { .. } => "fullcov",
            CanonicalParam::MeanField { .. } => "meanfield",
            CanonicalParam::Truncated { .. } => "truncated",
            CanonicalParam::Bernoulli { .. } => "bernoulli",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CanonicalParam::FullCov { mean, .. }
            | CanonicalParam::MeanField { mean, .. }
            | CanonicalParam::Truncated { mean, .. } => mean.len(),
            CanonicalParam::Bernoulli { probs } => probs.len(),
        }
    }

    /// The family this parameter belongs to.
    pub fn family(&self) -> Family {
        let dim = self.dim();
        match self {
            CanonicalParam::FullCov { .. } => Family::FullCovGaussian { dim },
            CanonicalParam::MeanField { .. } => Family::MeanFieldGaussian { dim },
            CanonicalParam::Truncated { lower, upper, .. } => Family::TruncatedMeanField {
                lower: lower.clone(),
                upper: upper.clone(),
            },
            CanonicalParam::Bernoulli { .. } => Family::BernoulliProduct { dim },
        }
    }

    /// Mean of the distribution (inclusion probabilities for Bernoulli,
    /// truncated-law mean for the truncated family).
    pub fn mean(&self) -> Vec<f64> {
        match self {
            CanonicalParam::FullCov { mean, .. } | CanonicalParam::MeanField { mean, .. } => {
                mean.clone()
            }
            CanonicalParam::Bernoulli { probs } => probs.clone(),
            CanonicalParam::Truncated { .. } => {
                let family = self.family();
                let eta = family.from_canonical(self).expect("valid canonical parameter");
                let stat = family.mean_statistic(&eta).expect("valid canonical parameter");
                stat[1..=self.dim()].to_vec()
            }
        }
    }

    /// Values after the `family d` prefix of the text record.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            CanonicalParam::FullCov { mean, cov } => {
                out.extend_from_slice(mean);
                out.extend(cov.lower_triangle());
            }
            CanonicalParam::MeanField { mean, var } => {
                out.extend_from_slice(mean);
                out.extend_from_slice(var);
            }
            CanonicalParam::Truncated {
                mean,
                var,
                lower,
                upper,
            } => {
                out.extend_from_slice(mean);
                out.extend_from_slice(var);
                out.extend_from_slice(lower);
                out.extend_from_slice(upper);
            }
            CanonicalParam::Bernoulli { probs } => out.extend_from_slice(probs),
        }
        out
    }

    /// Whitespace-separated record `family d values…`.
    pub fn to_record(&self) -> String {
        let mut out = format!("{} {}", self.family_name(), self.dim());
        fmt_values(&mut out, &self.flatten());
        out
    }

    pub fn parse_record(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let bad = |m: String| LsviError::Parse { line: 1, message: m };
        let family = tokens.next().ok_or_else(|| bad("empty record".into()))?;
        let d: usize = tokens
            .next()
            .ok_or_else(|| bad("missing dimension".into()))?
            .parse()
            .map_err(|e| bad(format!("dimension: {e}")))?;
        let values: Vec<f64> = tokens
            .map(|t| t.parse::<f64>().map_err(|e| bad(format!("value {t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let expect = |n: usize| {
            if values.len() == n {
                Ok(())
            } else {
                Err(bad(format!("{family} record needs {n} values, got {}", values.len())))
            }
        };
        Ok(match family {
            "fullcov" => {
                expect(d + vech_len(d))?;
                CanonicalParam::FullCov {
                    mean: values[..d].to_vec(),
                    cov: SymMatrix::from_lower_triangle(d, &values[d..])?,
                }
            }
            "meanfield" => {
                expect(2 * d)?;
                CanonicalParam::MeanField {
                    mean: values[..d].to_vec(),
                    var: values[d..].to_vec(),
                }
            }
            "truncated" => {
                expect(4 * d)?;
                CanonicalParam::Truncated {
                    mean: values[..d].to_vec(),
                    var: values[d..2 * d].to_vec(),
                    lower: values[2 * d..3 * d].to_vec(),
                    upper: values[3 * d..].to_vec(),
                }
            }
            "bernoulli" => {
                expect(d)?;
                CanonicalParam::Bernoulli { probs: values }
            }
            other => return Err(bad(format!("unknown family {other:?}"))),
        })
    }
}

/// `C` such that `C Cᵀ = Σ` for a full-covariance canonical parameter.
pub fn covariance_factor(cov: &SymMatrix) -> Result<LowerTriangular> {
    cholesky(cov).map_err(|e| LsviError::DomainViolation(e.to_string()))
}

/// Dense `d × d` matrix from the quadratic block of a full-covariance `η`.
pub fn quadratic_block(eta: &[f64], d: usize) -> Result<DMatrix<f64>> {
    unvec(&eta[1 + d..], d)
}
