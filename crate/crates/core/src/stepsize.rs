//! Step-size schedules, domain backtracking and residual-variance control.

use crate::error::{LsviError, Result};
use crate::expfam::{Family, NaturalParam};
use crate::numerics::Points;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Fixed(f64),
    /// `ε_t = 1 / (offset + slope·t)`, clamped to at most 1.
    Linear { offset: f64, slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizePolicy {
    pub schedule: Schedule,
    /// Upper bound `u` on the residual standard deviation of the tempered
    /// regression; `None` disables variance control.
    pub variance_cap: Option<f64>,
    pub max_halvings: u32,
}

/// Mean and standard deviation of regression residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub mean: f64,
    pub std: f64,
}

/// What [`StepsizePolicy::apply`] settled on.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub epsilon: f64,
    pub params: NaturalParam,
    pub halvings: u32,
    /// Residuals of the untempered fit `f - η′ᵀs` on the iteration's samples.
    pub residuals: ResidualStats,
    /// Whether `u / v̂` lowered the step.
    pub variance_capped: bool,
}

pub const DEFAULT_MAX_HALVINGS: u32 = 60;

impl StepsizePolicy {
    pub fn fixed(epsilon: f64) -> Self {
        StepsizePolicy {
            schedule: Schedule::Fixed(epsilon),
            variance_cap: None,
            max_halvings: DEFAULT_MAX_HALVINGS,
        }
    }

    pub fn linear(offset: f64, slope: f64) -> Self {
        StepsizePolicy {
            schedule: Schedule::Linear { offset, slope },
            variance_cap: None,
            max_halvings: DEFAULT_MAX_HALVINGS,
        }
    }

    pub fn with_variance_cap(mut self, u: f64) -> Self {
        self.variance_cap = Some(u);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LsviError::InvalidArgument(m.into()));
        match self.schedule {
            Schedule::Fixed(e) if !(e > 0.0 && e <= 1.0) => return bad("fixed epsilon must lie in (0, 1]"),
            Schedule::Linear { offset, slope } if !(offset >= 1.0) || !(slope >= 0.0) || !slope.is_finite() => {
                return bad("linear schedule needs L >= 1 and alpha >= 0")
            }
            _ => {}
        }
        if let Some(u) = self.variance_cap {
            if !(u > 0.0) {
                return bad("variance cap u must be positive");
            }
        }
        if self.max_halvings < 1 {
            return bad("max_halvings must be at least 1");
        }
        Ok(())
    }

    pub fn base_epsilon(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Fixed(e) => e,
            Schedule::Linear { offset, slope } => (1.0 / (offset + slope * t as f64)).min(1.0),
        }
    }

    /// Picks `ε` for iteration `t` and forms `εη′ + (1-ε)η`.
    ///
    /// `samples`/`values` are the draws and target evaluations the
    /// regression `η′` was fitted on.
    pub fn apply(
        &self,
        t: usize,
        family: &Family,
        eta: &NaturalParam,
        eta_new: &NaturalParam,
        samples: &Points,
        values: &[f64],
    ) -> Result<StepOutcome> {
        let mut epsilon = self.base_epsilon(t);
        let mut halvings = 0;
        let mut candidate = momentum_update(eta, eta_new, epsilon);
        while !family.in_domain(candidate.as_slice()) {
            if halvings >= self.max_halvings {
                return Err(LsviError::StepsizeCollapse { halvings });
            }
            halvings += 1;
            epsilon *= 0.5;
            candidate = momentum_update(eta, eta_new, epsilon);
        }

        // Along the segment the tempered residual is exactly ε(f - η′ᵀs),
        // so capping ε at u/v̂ caps the tempered residual spread at u.
        let residuals = residual_stats(family, eta_new, samples, values);
        let mut variance_capped = false;
        if let Some(u) = self.variance_cap {
            if residuals.std * epsilon > u {
                epsilon = u / residuals.std;
                variance_capped = true;
                candidate = momentum_update(eta, eta_new, epsilon);
                while !family.in_domain(candidate.as_slice()) {
                    // unreachable for convex domains; kept as a runtime check
                    if halvings >= self.max_halvings {
                        return Err(LsviError::StepsizeCollapse { halvings });
                    }
                    halvings += 1;
                    epsilon *= 0.5;
                    candidate = momentum_update(eta, eta_new, epsilon);
                }
            }
        }
        Ok(StepOutcome {
            epsilon,
            params: candidate,
            halvings,
            residuals,
            variance_capped,
        })
    }
}

/// `εη′ + (1-ε)η`.
pub fn momentum_update(eta: &NaturalParam, eta_new: &NaturalParam, epsilon: f64) -> NaturalParam {
    NaturalParam::new(
        eta.as_slice()
            .iter()
            .zip(eta_new.as_slice())
            .map(|(a, b)| epsilon * b + (1.0 - epsilon) * a)
            .collect(),
    )
}

/// Mean and standard deviation of `f(xᵢ) - ηᵀs(xᵢ)` (population form).
pub fn residual_stats(family: &Family, eta: &NaturalParam, samples: &Points, values: &[f64]) -> ResidualStats {
    let n = values.len();
    if n == 0 {
        return ResidualStats { mean: 0.0, std: 0.0 };
    }
    let r: Vec<f64> = samples
        .rows()
        .zip(values)
        .map(|(x, f)| f - family.stat_dot(eta.as_slice(), x))
        .collect();
    let mean = r.iter().sum::<f64>() / n as f64;
    let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    ResidualStats { mean, std: var.sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let lin = StepsizePolicy::linear(1.0, 1.0);
        assert_eq!(lin.base_epsilon(0), 1.0);
        assert!((lin.base_epsilon(9) - 0.1).abs() < 1e-15);
        let fixed = StepsizePolicy::fixed(1e-3);
        assert!((0..50).all(|t| fixed.base_epsilon(t) == 1e-3));
        let eps: Vec<f64> = (0..100).map(|t| StepsizePolicy::linear(2.0, 0.3).base_epsilon(t)).collect();
        assert!(eps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn validation() {
        assert!(StepsizePolicy::fixed(0.0).validate().is_err());
        assert!(StepsizePolicy::fixed(1.5).validate().is_err());
        assert!(StepsizePolicy::linear(0.5, 1.0).validate().is_err());
        assert!(StepsizePolicy::fixed(1.0).with_variance_cap(-1.0).validate().is_err());
        assert!(StepsizePolicy::linear(1.0, 1.0).with_variance_cap(1.0).validate().is_ok());
    }

    #[test]
    fn momentum_examples() {
        let a = NaturalParam::new(vec![0.0, 0.0]);
        let b = NaturalParam::new(vec![2.0, 4.0]);
        assert_eq!(momentum_update(&a, &b, 1.0), b);
        assert_eq!(momentum_update(&a, &b, 0.5).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn backtracking_to_one_eighth() {
        let fam = Family::MeanFieldGaussian { dim: 1 };
        let eta = NaturalParam::new(vec![0.0, 0.0, -1.0]);
        let eta_new = NaturalParam::new(vec![0.0, 0.0, 3.0]);
        let pts = Points::from_vec(1, 1, vec![0.0]);
        let out = StepsizePolicy::fixed(1.0).apply(0, &fam, &eta, &eta_new, &pts, &[0.0]).unwrap();
        assert_eq!(out.epsilon, 0.125);
        assert_eq!(out.halvings, 3);
        assert!(fam.in_domain(out.params.as_slice()));
    }

    #[test]
    fn collapse_when_never_in_domain() {
        let fam = Family::MeanFieldGaussian { dim: 1 };
        let eta = NaturalParam::new(vec![0.0, 0.0, -1e-300]);
        let eta_new = NaturalParam::new(vec![0.0, 0.0, 1e300]);
        let pts = Points::from_vec(1, 1, vec![0.0]);
        let mut policy = StepsizePolicy::fixed(1.0);
        policy.max_halvings = 5;
        assert_eq!(
            policy.apply(0, &fam, &eta, &eta_new, &pts, &[0.0]),
            Err(LsviError::StepsizeCollapse { halvings: 5 })
        );
    }

    fn two_point_residuals(spread: f64) -> (Family, NaturalParam, Points, Vec<f64>) {
        // residuals ±spread around a zero fit
        let fam = Family::BernoulliProduct { dim: 1 };
        let eta_new = NaturalParam::new(vec![0.0, 0.0]);
        let pts = Points::from_vec(2, 1, vec![0.0, 1.0]);
        (fam, eta_new, pts, vec![spread, -spread])
    }

    #[test]
    fn variance_control_examples() {
        let (fam, eta_new, pts, f) = two_point_residuals(2.0);
        let eta = NaturalParam::new(vec![1.0, 1.0]);
        let policy = StepsizePolicy::fixed(1.0).with_variance_cap(1.0);
        let out = policy.apply(0, &fam, &eta, &eta_new, &pts, &f).unwrap();
        assert_eq!(out.residuals.std, 2.0);
        assert_eq!(out.epsilon, 0.5);
        assert!(out.variance_capped);

        let (fam, eta_new, pts, f) = two_point_residuals(0.1);
        let out = policy.apply(0, &fam, &eta, &eta_new, &pts, &f).unwrap();
        assert_eq!(out.epsilon, 1.0);
        assert!(!out.variance_capped);
    }

    #[test]
    fn residual_shift_invariance() {
        let (fam, eta, pts, f) = two_point_residuals(0.7);
        let a = residual_stats(&fam, &eta, &pts, &f);
        let shifted: Vec<f64> = f.iter().map(|v| v + 5.0).collect();
        let b = residual_stats(&fam, &eta, &pts, &shifted);
        assert!((a.std - b.std).abs() < 1e-12);
        assert!((b.mean - a.mean - 5.0).abs() < 1e-12);
    }
}
