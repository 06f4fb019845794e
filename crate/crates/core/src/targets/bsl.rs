//! Bayesian synthetic likelihood for the toad model.
//!
//! Each evaluation simulates `P` data sets at `θ`, fits a Gaussian to their
//! summaries with a correlation-shrunk covariance, and scores the observed
//! summary under it.

use nalgebra::DMatrix;

use crate::error::{LsviError, Result};
use crate::expfam::log_sigmoid;
use crate::numerics::{cholesky, tri_solve, RngStream, SymMatrix, Transpose};

use super::toad::{toad_simulate, toad_summaries, Theta, ToadConfig};
use super::LogTarget;

/// Affine-logit map between a box `[a, a + b]` and the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitBox {
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
}

impl LogitBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(LsviError::InvalidArgument("box needs lower < upper coordinatewise".into()));
        }
        let width = lower.iter().zip(&upper).map(|(a, b)| b - a).collect();
        Ok(LogitBox { lower, width })
    }

    /// `[1, 2] × [0, 100] × [0, 0.9]`.
    pub fn toad_prior() -> Self {
        LogitBox::new(vec![1.0, 0.0, 0.0], vec![2.0, 100.0, 0.9]).expect("valid box")
    }

    pub fn upper(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.width).map(|(a, b)| a + b).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.width))
            .all(|(t, (a, b))| *t >= *a && *t <= a + b)
    }

    /// `ξᵢ = logit((θᵢ - aᵢ)/bᵢ)`; errors on or outside the boundary.
    pub fn to_unconstrained(&self, theta: &[f64]) -> Result<Vec<f64>> {
        theta
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let u = (t - self.lower[i]) / self.width[i];
                if !(u > 0.0 && u < 1.0) {
                    return Err(LsviError::DomainViolation(format!(
                        "coordinate {i} = {t} is not strictly inside the box"
                    )));
                }
                Ok((u / (1.0 - u)).ln())
            })
            .collect()
    }

    pub fn to_constrained(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter()
            .enumerate()
            .map(|(i, x)| self.lower[i] + self.width[i] * log_sigmoid(*x).exp())
            .collect()
    }

    /// `log |∂θ/∂ξ| = Σ log bᵢ + log uᵢ + log(1 - uᵢ)`.
    pub fn log_jacobian(&self, xi: &[f64]) -> f64 {
        xi.iter()
            .zip(&self.width)
            .map(|(x, b)| b.ln() + log_sigmoid(*x) + log_sigmoid(-*x))
            .sum()
    }
}

/// Coordinates the variational family works in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterisation {
    /// `θ` itself, with a uniform prior on the box.
    Box,
    /// `ξ = logit((θ - a)/b)`, prior density including the Jacobian.
    Logit,
}

/// Mean and `D^{1/2}(γC + (1-γ)I)D^{1/2}` of a set of summary vectors,
/// where `D` holds the sample variances and `C` the sample correlations.
pub fn shrinkage_covariance(summaries: &[Vec<f64>], shrinkage: f64) -> (Vec<f64>, SymMatrix) {
    let p = summaries.len();
    let k = summaries[0].len();
    let mut mean = vec![0.0; k];
    for s in summaries {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= p as f64);
    let centred = DMatrix::from_fn(k, p, |j, r| summaries[r][j] - mean[j]);
    let mut cov = (&centred * centred.transpose()) / (p as f64 - 1.0);
    // off-diagonal entries are shrunk, variances kept
    for i in 0..k {
        for j in 0..k {
            if i != j {
                cov[(i, j)] *= shrinkage;
            }
        }
    }
    (mean, SymMatrix::symmetrized(&cov).expect("square"))
}

/// `log N(x; mean, cov)`, or `-∞` when `cov` is singular.
fn gaussian_log_density(x: &[f64], mean: &[f64], cov: &SymMatrix) -> f64 {
    let Ok(l) = cholesky(cov) else {
        return f64::NEG_INFINITY;
    };
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let u = tri_solve(&l, &diff, Transpose::No).expect("matching dimensions");
    let quad: f64 = u.iter().map(|v| v * v).sum();
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + l.log_det_product() + quad)
}

#[derive(Debug, Clone)]
pub struct BslTarget {
    observed: Vec<f64>,
    config: ToadConfig,
    prior: LogitBox,
    param: Parameterisation,
}

impl BslTarget {
    pub fn new(observed: Vec<f64>, config: ToadConfig, param: Parameterisation) -> Result<Self> {
        config.validate()?;
        if config.replicates < 2 {
            return Err(LsviError::InvalidArgument("synthetic likelihood needs at least 2 replicates".into()));
        }
        if observed.len() != config.summary_len() {
            return Err(LsviError::DimensionMismatch {
                expected: config.summary_len(),
                found: observed.len(),
            });
        }
        if observed.iter().any(|v| !v.is_finite()) {
            return Err(LsviError::DegenerateSummary("observed summary has undefined entries".into()));
        }
        Ok(BslTarget {
            observed,
            config,
            prior: LogitBox::toad_prior(),
            param,
        })
    }

    /// Observed summaries simulated in-process at `theta_star`.
    pub fn simulated(theta_star: Theta, config: ToadConfig, param: Parameterisation, stream: &RngStream) -> Result<Self> {
        config.validate()?;
        let y = toad_simulate(theta_star, config.toads, config.days, stream);
        let observed = toad_summaries(&y, &config.lags, config.threshold).into_result()?;
        Self::new(observed, config, param)
    }

    pub fn prior(&self) -> &LogitBox {
        &self.prior
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn config(&self) -> &ToadConfig {
        &self.config
    }

    /// Synthetic log-likelihood at `θ` (`-∞` outside the prior box or when
    /// a replicate's summary is undefined).
    pub fn log_likelihood(&self, theta: &[f64], stream: &RngStream) -> f64 {
        if !self.prior.contains(theta) {
            return f64::NEG_INFINITY;
        }
        let th = Theta::from_slice(theta);
        let c = &self.config;
        let mut summaries = Vec::with_capacity(c.replicates);
        for r in 0..c.replicates {
            let y = toad_simulate(th, c.toads, c.days, &stream.derive(r as u64));
            match toad_summaries(&y, &c.lags, c.threshold).into_result() {
                Ok(s) => summaries.push(s),
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        let (mean, cov) = shrinkage_covariance(&summaries, c.shrinkage);
        gaussian_log_density(&self.observed, &mean, &cov)
    }

    /// Log-posterior in the target's working coordinates.
    pub fn logpost(&self, x: &[f64], stream: &RngStream) -> f64 {
        match self.param {
            Parameterisation::Box => self.log_likelihood(x, stream),
            Parameterisation::Logit => {
                let theta = self.prior.to_constrained(x);
                self.log_likelihood(&theta, stream) + self.prior.log_jacobian(x)
            }
        }
    }
}

impl LogTarget for BslTarget {
    fn dim(&self) -> usize {
        3
    }

    fn log_density(&self, x: &[f64], stream: &RngStream) -> f64 {
        self.logpost(x, stream)
    }
}
