use std::time::Instant;

use crate::diagnostics::{kl_from_draws, kl_up_to_const, KlEstimate};
use crate::error::{LsviError, Result};
use crate::expfam::{CanonicalParam, Family, NaturalParam};
use crate::gaussian::GammaEstimator;
use crate::numerics::{Points, RngStream};
use crate::stepsize::StepsizePolicy;
use crate::targets::LogTarget;

use super::trace::{IterationTrace, TraceRow};

/// How often and with how many draws the KL diagnostic is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlSettings {
    /// Every `every`-th iteration (and the last); 0 turns it off.
    pub every: usize,
    pub samples: usize,
    /// Reuse the iteration's fitting draws instead of fresh ones. The
    /// estimate then refers to the parameter the draws came from.
    pub reuse_fit_draws: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    /// Draws per iteration.
    pub samples: usize,
    pub iterations: usize,
    pub policy: StepsizePolicy,
    pub kl: KlSettings,
    /// Estimate the second moment and the cross-moment from separate draws.
    pub independent_sets: bool,
    /// Stop once the KL estimate moves less than this over 10 recorded values.
    pub early_stop: Option<f64>,
    /// Coefficient estimator of the tailored Gaussian schemes.
    pub gamma: GammaEstimator,
}

const EARLY_STOP_WINDOW: usize = 10;

impl RunSettings {
    pub fn new(samples: usize, iterations: usize, policy: StepsizePolicy) -> Self {
        RunSettings {
            samples,
            iterations,
            policy,
            kl: KlSettings {
                every: 1,
                samples,
                reuse_fit_draws: false,
            },
            independent_sets: false,
            early_stop: None,
            gamma: GammaEstimator::Average,
        }
    }

    pub fn without_kl(mut self) -> Self {
        self.kl.every = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.iterations == 0 {
            return Err(LsviError::InvalidArgument("N and T must be at least 1".into()));
        }
        if self.kl.every > 0 && self.kl.samples == 0 {
            return Err(LsviError::InvalidArgument("KL sample count must be at least 1".into()));
        }
        self.policy.validate()
    }
}

/// One regression step's output before the step size is chosen.
#[derive(Debug, Clone)]
pub struct Proposal {
    /// Fitted natural parameter `η′`.
    pub eta_new: NaturalParam,
    /// Draws in the target's space with their (finite) target values.
    pub samples: Points,
    pub values: Vec<f64>,
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: NaturalParam,
    pub canonical: CanonicalParam,
    pub trace: IterationTrace,
}

/// Shared iteration loop: propose, pick the step, record.
///
/// Iteration `t` works on the stream `stream.derive(t)`; proposals use its
/// children 0 and 1, the KL diagnostic children 2.
pub fn drive<P>(
    family: &Family,
    target: &dyn LogTarget,
    eta0: NaturalParam,
    settings: &RunSettings,
    stream: &RngStream,
    mut propose: P,
) -> Result<RunOutput>
where
    P: FnMut(&NaturalParam, &RngStream) -> Result<Proposal>,
{
    settings.validate()?;
    if eta0.len() != family.stat_len() {
        return Err(LsviError::DimensionMismatch {
            expected: family.stat_len(),
            found: eta0.len(),
        });
    }
    if target.dim() != family.dim() {
        return Err(LsviError::DimensionMismatch {
            expected: family.dim(),
            found: target.dim(),
        });
    }
    if !family.in_domain(eta0.as_slice()) {
        return Err(LsviError::DomainViolation("initial parameter".into()));
    }
    let start = Instant::now();
    let kl = &settings.kl;
    let mut trace = IterationTrace::default();
    if kl.every > 0 {
        trace.initial_kl = Some(kl_up_to_const(
            family,
            &eta0,
            target,
            kl.samples,
            &stream.derive(u64::MAX),
        )?);
    }

    let mut eta = eta0;
    let mut history: Vec<f64> = Vec::new();
    for t in 0..settings.iterations {
        let it = stream.derive(t as u64);
        let proposal = propose(&eta, &it)?;
        let outcome = settings.policy.apply(
            t,
            family,
            &eta,
            &proposal.eta_new,
            &proposal.samples,
            &proposal.values,
        )?;
        let due = kl.every > 0 && ((t + 1) % kl.every == 0 || t + 1 == settings.iterations);
        let estimate: Option<KlEstimate> = if !due {
            None
        } else if kl.reuse_fit_draws {
            let density = family.density(&eta)?;
            Some(kl_from_draws(&density, &proposal.samples, &proposal.values))
        } else {
            Some(kl_up_to_const(family, &outcome.params, target, kl.samples, &it.derive(2))?)
        };
        eta = outcome.params;
        let canonical = family.to_canonical(&eta)?;
        trace.rows.push(TraceRow {
            t,
            epsilon: outcome.epsilon,
            kl: estimate,
            residual_std: outcome.residuals.std,
            halvings: outcome.halvings,
            variance_capped: outcome.variance_capped,
            dropped: proposal.dropped,
            elapsed_ns: start.elapsed().as_nanos() as u64,
            params: canonical.flatten(),
        });
        if let (Some(tol), Some(k)) = (settings.early_stop, estimate) {
            history.push(k.value);
            let h = history.len();
            if h > EARLY_STOP_WINDOW && (history[h - 1] - history[h - 1 - EARLY_STOP_WINDOW]).abs() < tol {
                log::info!("early stop after {} iterations", t + 1);
                break;
            }
        }
    }
    let canonical = family.to_canonical(&eta)?;
    Ok(RunOutput {
        params: eta,
        canonical,
        trace,
    })
}
