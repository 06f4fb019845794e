use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lsvi_core::data::{load_csv, preprocess_logistic, synth_logistic, synth_varsel, Dataset, LabelCoding};
use lsvi_core::gaussian::{run_fc, run_mf};
use lsvi_core::lsvi::KlSettings;
use lsvi_core::numerics::SymMatrix;
use lsvi_core::targets::{BslTarget, FnTarget, LogTarget, LogisticTarget, LogitBox, Theta, VarSelTarget};
use lsvi_core::{run_generic, CanonicalParam, Family, RngStream, RunOutput, RunSettings};

use crate::config::{Algorithm, DataSource, FamilyKind, InitSpec, RunConfig, TargetSpec};

/// Intercept prior variance kept when `prior_var` overrides the coefficients'.
const INTERCEPT_PRIOR_VAR: f64 = 400.0;

fn matrix(rows: &[Vec<f64>]) -> Result<SymMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        bail!("covariance matrix must be square");
    }
    let mut lower = Vec::with_capacity(d * (d + 1) / 2);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate().take(i + 1) {
            if *v != rows[j][i] {
                bail!("covariance matrix is not symmetric at ({i}, {j})");
            }
            lower.push(*v);
        }
    }
    Ok(SymMatrix::from_lower_triangle(d, &lower)?)
}

fn load(source: &DataSource, coding: LabelCoding) -> Result<Dataset> {
    match source {
        DataSource::Csv { path, label } => {
            load_csv(path, label, coding).with_context(|| format!("loading {}", path.display()))
        }
        DataSource::Synthetic { n, d, seed } => Ok(synth_logistic(*n, *d, &RngStream::new(*seed))),
    }
}

pub fn build_target(spec: &TargetSpec) -> Result<Box<dyn LogTarget>> {
    Ok(match spec {
        TargetSpec::Gaussian { mean, cov } => {
            let family = Family::FullCovGaussian { dim: mean.len() };
            let eta = family.from_canonical(&CanonicalParam::FullCov {
                mean: mean.clone(),
                cov: matrix(cov)?,
            })?;
            let density = family.density(&eta)?;
            Box::new(FnTarget::new(mean.len(), move |x: &[f64]| density.eval(x)))
        }
        TargetSpec::Logistic {
            data,
            zero_one,
            preprocess,
            prior_var,
            batch,
        } => {
            let coding = if *zero_one { LabelCoding::ZeroOne } else { LabelCoding::PlusMinusOne };
            let mut ds = load(data, coding)?;
            if *preprocess {
                ds = preprocess_logistic(&ds)?;
            }
            let target = match prior_var {
                None => LogisticTarget::with_default_prior(ds.x, ds.y)?,
                Some(v) => {
                    let mut prior = vec![*v; ds.x.ncols()];
                    if *preprocess {
                        prior[0] = INTERCEPT_PRIOR_VAR;
                    }
                    LogisticTarget::new(ds.x, ds.y, prior)?
                }
            };
            match batch {
                Some(b) => Box::new(target.subsampled(*b)?),
                None => Box::new(target),
            }
        }
        TargetSpec::VarSel { data, active, noise_std } => {
            let ds = match data {
                DataSource::Csv { path, label } => load_csv(path, label, LabelCoding::Response)
                    .with_context(|| format!("loading {}", path.display()))?,
                DataSource::Synthetic { n, d, seed } => synth_varsel(*n, *d, *active, *noise_std, &RngStream::new(*seed)).0,
            };
            Box::new(VarSelTarget::from_data(&ds.x, &ds.y)?)
        }
        TargetSpec::Bsl {
            theta_star,
            data_seed,
            toad,
            param,
        } => Box::new(BslTarget::simulated(
            Theta::from_slice(theta_star),
            toad.clone(),
            *param,
            &RngStream::new(*data_seed),
        )?),
    })
}

fn family_for(config: &RunConfig, dim: usize) -> Result<Family> {
    Ok(match config.family {
        FamilyKind::FullCov => Family::FullCovGaussian { dim },
        FamilyKind::MeanField => Family::MeanFieldGaussian { dim },
        FamilyKind::Bernoulli => Family::BernoulliProduct { dim },
        FamilyKind::Truncated => {
            let prior = LogitBox::toad_prior();
            let lower = config.init.lower.clone().unwrap_or_else(|| prior.lower.clone());
            let upper = config.init.upper.clone().unwrap_or_else(|| prior.upper());
            Family::truncated(lower, upper)?
        }
    })
}

fn check_len(name: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        bail!("init `{name}` has {} entries, the target has dimension {dim}", v.len());
    }
    Ok(())
}

/// Starting canonical parameters: whatever `[init]` gives, the family
/// default for the rest (zero mean and unit variances, probabilities 1/2,
/// the box midpoint with a quarter of the width as standard deviation).
pub fn initial(family: &Family, init: &InitSpec) -> Result<CanonicalParam> {
    let d = family.dim();
    let mean = init.mean.clone();
    if let Some(m) = &mean {
        check_len("mean", m, d)?;
    }
    if let Some(v) = &init.var {
        check_len("var", v, d)?;
    }
    Ok(match family {
        Family::FullCovGaussian { .. } => {
            let cov = match (&init.cov, &init.var) {
                (Some(c), _) => {
                    if c.len() != d {
                        bail!("init `cov` must be {d} × {d}");
                    }
                    matrix(c)?
                }
                (None, Some(v)) => SymMatrix::from_diagonal(v),
                (None, None) => SymMatrix::identity(d),
            };
            CanonicalParam::FullCov {
                mean: mean.unwrap_or_else(|| vec![0.0; d]),
                cov,
            }
        }
        Family::MeanFieldGaussian { .. } => CanonicalParam::MeanField {
            mean: mean.unwrap_or_else(|| vec![0.0; d]),
            var: init.var.clone().unwrap_or_else(|| vec![1.0; d]),
        },
        Family::TruncatedMeanField { lower, upper } => CanonicalParam::Truncated {
            mean: mean.unwrap_or_else(|| lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect()),
            var: init
                .var
                .clone()
                .unwrap_or_else(|| lower.iter().zip(upper).map(|(a, b)| ((b - a) / 4.0).powi(2)).collect()),
            lower: lower.clone(),
            upper: upper.clone(),
        },
        Family::BernoulliProduct { .. } => {
            let probs = init.probs.clone().unwrap_or_else(|| vec![0.5; d]);
            check_len("probs", &probs, d)?;
            CanonicalParam::Bernoulli { probs }
        }
    })
}

fn settings(config: &RunConfig) -> RunSettings {
    let mut s = RunSettings::new(config.samples, config.iterations, config.policy);
    s.kl = KlSettings {
        every: config.kl_every,
        samples: config.kl_samples.unwrap_or(config.samples),
        reuse_fit_draws: false,
    };
    s.gamma = config.gamma;
    s.independent_sets = config.independent_sets;
    s
}

pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    let target = build_target(&config.target)?;
    let family = family_for(config, target.dim())?;
    let start = initial(&family, &config.init)?;
    let settings = settings(config);
    let stream = RngStream::new(config.seed);
    let output = match (config.algorithm, start) {
        (Algorithm::Generic, start) => {
            let eta0 = family.from_canonical(&start)?;
            run_generic(&family, target.as_ref(), eta0, &settings, &stream)?
        }
        (Algorithm::FullCov, CanonicalParam::FullCov { mean, cov }) => {
            run_fc(target.as_ref(), &mean, &cov, &settings, &stream)?
        }
        (Algorithm::MeanField, CanonicalParam::MeanField { mean, var }) => {
            run_mf(target.as_ref(), &mean, &var, &settings, &stream)?
        }
        _ => unreachable!("algorithm and family were checked together"),
    };
    Ok(output)
}

/// Runs a config and writes `trace.csv`, `final.params` and `meta` into
/// `out`.
pub fn run_to_dir(config: &RunConfig, out: &Path, threads: usize) -> Result<()> {
    let started = Instant::now();
    let output = execute(config)?;
    let wall = started.elapsed();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let trace = fs::File::create(out.join("trace.csv")).context("creating trace.csv")?;
    output
        .trace
        .write_csv(std::io::BufWriter::new(trace), config.timing)
        .context("writing trace.csv")?;
    fs::write(out.join("final.params"), output.canonical.to_record() + "\n").context("writing final.params")?;
    let meta = format!(
        "seed = {}\nlsvi_version = {}\nalgorithm = {:?}\nfamily = {}\ntarget = {}\nN = {}\nT = {}\niterations_run = {}\nthreads = {}\nwall_seconds = {:.3}\n",
        config.seed,
        env!("CARGO_PKG_VERSION"),
        config.algorithm,
        output.canonical.family_name(),
        config.target.name(),
        config.samples,
        config.iterations,
        output.trace.len(),
        threads,
        wall.as_secs_f64(),
    );
    fs::write(out.join("meta"), meta).context("writing meta")?;
    Ok(())
}
