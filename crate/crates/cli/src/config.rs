//! Run configuration: TOML text checked into a [`RunConfig`].
//!
//! Validation walks the whole document and reports every problem at once
//! instead of stopping at the first.

use std::path::{Path, PathBuf};

use lsvi_core::gaussian::GammaEstimator;
use lsvi_core::stepsize::DEFAULT_MAX_HALVINGS;
use lsvi_core::targets::{Parameterisation, ToadConfig};
use lsvi_core::StepsizePolicy;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Generic,
    MeanField,
    FullCov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    FullCov,
    MeanField,
    Truncated,
    Bernoulli,
}

impl FamilyKind {
    fn name(self) -> &'static str {
        match self {
            FamilyKind::FullCov => "fullcov",
            FamilyKind::MeanField => "meanfield",
            FamilyKind::Truncated => "truncated",
            FamilyKind::Bernoulli => "bernoulli",
        }
    }
}

/// Where a data set comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label: String },
    Synthetic { n: usize, d: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Logistic {
        data: DataSource,
        /// Label coding of a CSV source: `true` for 0/1, `false` for -1/+1.
        zero_one: bool,
        preprocess: bool,
        prior_var: Option<f64>,
        batch: Option<usize>,
    },
    VarSel {
        data: DataSource,
        active: usize,
        noise_std: f64,
    },
    Bsl {
        theta_star: [f64; 3],
        data_seed: u64,
        toad: ToadConfig,
        param: Parameterisation,
    },
}

impl TargetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Gaussian { .. } => "gaussian",
            TargetSpec::Logistic { .. } => "logistic",
            TargetSpec::VarSel { .. } => "varsel",
            TargetSpec::Bsl { .. } => "bsl",
        }
    }
}

/// Starting point; missing entries fall back to family defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitSpec {
    pub mean: Option<Vec<f64>>,
    pub cov: Option<Vec<Vec<f64>>>,
    pub var: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub family: FamilyKind,
    pub target: TargetSpec,
    pub samples: usize,
    pub iterations: usize,
    pub seed: u64,
    pub policy: StepsizePolicy,
    pub init: InitSpec,
    pub out: PathBuf,
    pub kl_every: usize,
    pub kl_samples: Option<usize>,
    pub timing: bool,
    pub gamma: GammaEstimator,
    pub independent_sets: bool,
}

/// Every problem found in one config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub const TARGETS: &[(&str, &str)] = &[
    (
        "gaussian",
        "mean = [..] (required), cov = [[..], ..] (required, symmetric positive definite)",
    ),
    (
        "logistic",
        "source = \"csv\" with path, label, coding = \"zero-one\" | \"plus-minus-one\"; \
         or source = \"synthetic\" with n, d, data_seed. Optional: preprocess (default true), \
         prior_var (default: 25, intercept 400), batch",
    ),
    (
        "varsel",
        "source = \"csv\" with path, label; or source = \"synthetic\" with n, d, data_seed, \
         active (default 4), noise_std (default 1). Family must be bernoulli",
    ),
    (
        "bsl",
        "theta_star = [alpha, delta, p0] (default [1.7, 35, 0.6]), data_seed (default 0), \
         param = \"box\" | \"logit\" (default box), toads, days, replicates, shrinkage, \
         threshold, lags",
    ),
];

const TOP_KEYS: &[&str] = &[
    "algorithm",
    "family",
    "N",
    "T",
    "seed",
    "out",
    "kl_every",
    "kl_samples",
    "timing",
    "gamma",
    "independent_sets",
    "stepsize",
    "init",
    "target",
];

/// Collects errors while fields are read out of tables.
struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn unknown_keys(&mut self, table: &Table, allowed: &[&str], scope: &str) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.err(format!("{scope}: unknown key `{key}`"));
            }
        }
    }

    fn float(&mut self, table: &Table, key: &str, scope: &str) -> Option<f64> {
        match table.get(key)? {
            Value::Float(v) => Some(*v),
            Value::Integer(v) => Some(*v as f64),
            other => {
                self.err(format!("{scope}: `{key}` must be a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, table: &Table, key: &str, scope: &str) -> Option<u64> {
        match table.get(key)? {
            Value::Integer(v) if *v >= 0 => Some(*v as u64),
            other => {
                self.err(format!("{scope}: `{key}` must be a non-negative integer, found {other}"));
                None
            }
        }
    }

    fn string(&mut self, table: &Table, key: &str, scope: &str) -> Option<String> {
        match table.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(format!("{scope}: `{key}` must be a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn boolean(&mut self, table: &Table, key: &str, scope: &str) -> Option<bool> {
        match table.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(format!("{scope}: `{key}` must be true or false, found {other}"));
                None
            }
        }
    }

    fn floats(&mut self, table: &Table, key: &str, scope: &str) -> Option<Vec<f64>> {
        let value = table.get(key)?;
        let parsed = value.as_array().and_then(|a| a.iter().map(number).collect::<Option<Vec<f64>>>());
        if parsed.is_none() {
            self.err(format!("{scope}: `{key}` must be an array of numbers"));
        }
        parsed
    }

    fn matrix(&mut self, table: &Table, key: &str, scope: &str) -> Option<Vec<Vec<f64>>> {
        let value = table.get(key)?;
        let parsed = value.as_array().and_then(|rows| {
            rows.iter()
                .map(|r| r.as_array().and_then(|a| a.iter().map(number).collect::<Option<Vec<f64>>>()))
                .collect::<Option<Vec<_>>>()
        });
        if parsed.is_none() {
            self.err(format!("{scope}: `{key}` must be an array of number arrays"));
        }
        parsed
    }

    fn required<T>(&mut self, value: Option<T>, table: &Table, key: &str, scope: &str) -> Option<T> {
        if value.is_none() && !table.contains_key(key) {
            self.err(format!("{scope}: missing required key `{key}`"));
        }
        value
    }

    fn block<'a>(&mut self, table: &'a Table, key: &str) -> Option<&'a Table> {
        match table.get(key)? {
            Value::Table(t) => Some(t),
            _ => {
                self.err(format!("`{key}` must be a [{key}] block"));
                None
            }
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl RunConfig {
    /// Reads and checks a config file. Relative paths inside it are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigErrors(vec![format!("cannot read {}: {e}", path.display())]))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigErrors> {
        let doc: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax: {e}")]))?;
        let mut r = Reader { errors: Vec::new() };
        let top = "config";
        r.unknown_keys(&doc, TOP_KEYS, top);

        let algorithm = r.string(&doc, "algorithm", top);
        let algorithm = r.required(algorithm, &doc, "algorithm", top).and_then(|a| match a.as_str() {
            "generic" => Some(Algorithm::Generic),
            "mf" => Some(Algorithm::MeanField),
            "fc" => Some(Algorithm::FullCov),
            other => {
                r.err(format!("algorithm: unknown `{other}` (expected generic, mf or fc)"));
                None
            }
        });
        let family = r.string(&doc, "family", top);
        let family = r.required(family, &doc, "family", top).and_then(|f| match f.as_str() {
            "fullcov" => Some(FamilyKind::FullCov),
            "meanfield" => Some(FamilyKind::MeanField),
            "truncated" => Some(FamilyKind::Truncated),
            "bernoulli" => Some(FamilyKind::Bernoulli),
            other => {
                r.err(format!(
                    "family: unknown `{other}` (expected fullcov, meanfield, truncated or bernoulli)"
                ));
                None
            }
        });
        match (algorithm, family) {
            (Some(Algorithm::MeanField), Some(f)) if f != FamilyKind::MeanField => r.err(format!(
                "algorithm = \"mf\" needs family = \"meanfield\", but family = \"{}\"",
                f.name()
            )),
            (Some(Algorithm::FullCov), Some(f)) if f != FamilyKind::FullCov => r.err(format!(
                "algorithm = \"fc\" needs family = \"fullcov\", but family = \"{}\"",
                f.name()
            )),
            _ => {}
        }

        let samples = r.uint(&doc, "N", top);
        let samples = r.required(samples, &doc, "N", top);
        let iterations = r.uint(&doc, "T", top);
        let iterations = r.required(iterations, &doc, "T", top);
        for (key, v) in [("N", samples), ("T", iterations)] {
            if v == Some(0) {
                r.err(format!("`{key}` must be at least 1"));
            }
        }
        let seed = r.uint(&doc, "seed", top).unwrap_or(0);
        let out = r.string(&doc, "out", top).map(|o| base.join(o)).unwrap_or_else(|| base.join("out"));
        let kl_every = r.uint(&doc, "kl_every", top).unwrap_or(1) as usize;
        let kl_samples = r.uint(&doc, "kl_samples", top).map(|v| v as usize);
        if kl_samples == Some(0) {
            r.err("`kl_samples` must be at least 1".into());
        }
        let timing = r.boolean(&doc, "timing", top).unwrap_or(false);
        let independent_sets = r.boolean(&doc, "independent_sets", top).unwrap_or(false);
        let gamma = match r.string(&doc, "gamma", top).as_deref() {
            None | Some("average") => GammaEstimator::Average,
            Some("control-variate") => GammaEstimator::ControlVariate,
            Some("refined") => GammaEstimator::refined(),
            Some(other) => {
                r.err(format!(
                    "gamma: unknown `{other}` (expected average, control-variate or refined)"
                ));
                GammaEstimator::Average
            }
        };

        let policy = match r.block(&doc, "stepsize") {
            Some(t) => read_policy(&mut r, t),
            None => {
                if !doc.contains_key("stepsize") {
                    r.err("missing required block [stepsize]".into());
                }
                None
            }
        };
        let init = r.block(&doc, "init").map(|t| read_init(&mut r, t)).unwrap_or_default();
        let target = match r.block(&doc, "target") {
            Some(t) => read_target(&mut r, t, base),
            None => {
                if !doc.contains_key("target") {
                    r.err("missing required block [target]".into());
                }
                None
            }
        };

        if let (Some(t), Some(f)) = (&target, family) {
            check_pairing(&mut r, t, f);
        }

        if !r.errors.is_empty() {
            return Err(ConfigErrors(r.errors));
        }
        Ok(RunConfig {
            algorithm: algorithm.expect("checked"),
            family: family.expect("checked"),
            target: target.expect("checked"),
            samples: samples.expect("checked") as usize,
            iterations: iterations.expect("checked") as usize,
            seed,
            policy: policy.expect("checked"),
            init,
            out,
            kl_every,
            kl_samples,
            timing,
            gamma,
            independent_sets,
        })
    }
}

fn read_policy(r: &mut Reader, t: &Table) -> Option<StepsizePolicy> {
    let scope = "stepsize";
    r.unknown_keys(t, &["schedule", "epsilon", "offset", "slope", "u", "u2", "max_halvings"], scope);
    let schedule = r.string(t, "schedule", scope);
    let mut policy = match r.required(schedule, t, "schedule", scope)?.as_str() {
        "fixed" => {
            let e = r.float(t, "epsilon", scope);
            StepsizePolicy::fixed(r.required(e, t, "epsilon", scope)?)
        }
        "linear" => {
            let offset = r.float(t, "offset", scope).unwrap_or(1.0);
            let slope = r.float(t, "slope", scope).unwrap_or(1.0);
            StepsizePolicy::linear(offset, slope)
        }
        other => {
            r.err(format!("stepsize: unknown schedule `{other}` (expected fixed or linear)"));
            return None;
        }
    };
    // the cap may be given as a standard deviation or as a variance
    match (r.float(t, "u", scope), r.float(t, "u2", scope)) {
        (Some(_), Some(_)) => r.err("stepsize: give only one of `u` and `u2`".into()),
        (Some(u), None) => policy = policy.with_variance_cap(u),
        (None, Some(u2)) if u2 > 0.0 => policy = policy.with_variance_cap(u2.sqrt()),
        (None, Some(_)) => r.err("stepsize: `u2` must be positive".into()),
        (None, None) => {}
    }
    policy.max_halvings = r.uint(t, "max_halvings", scope).map_or(DEFAULT_MAX_HALVINGS, |v| v as u32);
    if let Err(e) = policy.validate() {
        r.err(format!("stepsize: {e}"));
        return None;
    }
    Some(policy)
}

fn read_init(r: &mut Reader, t: &Table) -> InitSpec {
    let scope = "init";
    r.unknown_keys(t, &["mean", "cov", "var", "probs", "lower", "upper"], scope);
    InitSpec {
        mean: r.floats(t, "mean", scope),
        cov: r.matrix(t, "cov", scope),
        var: r.floats(t, "var", scope),
        probs: r.floats(t, "probs", scope),
        lower: r.floats(t, "lower", scope),
        upper: r.floats(t, "upper", scope),
    }
}

fn read_source(r: &mut Reader, t: &Table, base: &Path, scope: &str) -> Option<DataSource> {
    let source = r.string(t, "source", scope);
    match r.required(source, t, "source", scope)?.as_str() {
        "csv" => {
            let path = r.string(t, "path", scope);
            let path = r.required(path, t, "path", scope);
            let label = r.string(t, "label", scope);
            let label = r.required(label, t, "label", scope);
            Some(DataSource::Csv {
                path: base.join(path?),
                label: label?,
            })
        }
        "synthetic" => {
            let n = r.uint(t, "n", scope);
            let n = r.required(n, t, "n", scope);
            let d = r.uint(t, "d", scope);
            let d = r.required(d, t, "d", scope);
            let seed = r.uint(t, "data_seed", scope).unwrap_or(0);
            Some(DataSource::Synthetic {
                n: n? as usize,
                d: d? as usize,
                seed,
            })
        }
        other => {
            r.err(format!("{scope}: unknown source `{other}` (expected csv or synthetic)"));
            None
        }
    }
}

fn read_target(r: &mut Reader, t: &Table, base: &Path) -> Option<TargetSpec> {
    let names: Vec<&str> = TARGETS.iter().map(|(n, _)| *n).collect();
    let name = r.string(t, "name", "target");
    let name = r.required(name, t, "name", "target")?;
    let scope = format!("target {name}");
    match name.as_str() {
        "gaussian" => {
            r.unknown_keys(t, &["name", "mean", "cov"], &scope);
            let mean = r.floats(t, "mean", &scope);
            let mean = r.required(mean, t, "mean", &scope);
            let cov = r.matrix(t, "cov", &scope);
            let cov = r.required(cov, t, "cov", &scope);
            let (mean, cov) = (mean?, cov?);
            if cov.len() != mean.len() || cov.iter().any(|row| row.len() != mean.len()) {
                r.err(format!("{scope}: `cov` must be {0} × {0} to match `mean`", mean.len()));
                return None;
            }
            Some(TargetSpec::Gaussian { mean, cov })
        }
        "logistic" => {
            r.unknown_keys(
                t,
                &["name", "source", "path", "label", "coding", "n", "d", "data_seed", "preprocess", "prior_var", "batch"],
                &scope,
            );
            let data = read_source(r, t, base, &scope);
            let zero_one = match r.string(t, "coding", &scope).as_deref() {
                None | Some("zero-one") => true,
                Some("plus-minus-one") => false,
                Some(other) => {
                    r.err(format!("{scope}: unknown coding `{other}` (expected zero-one or plus-minus-one)"));
                    true
                }
            };
            let preprocess = r.boolean(t, "preprocess", &scope).unwrap_or(true);
            let prior_var = r.float(t, "prior_var", &scope);
            if prior_var.is_some_and(|v| !(v > 0.0)) {
                r.err(format!("{scope}: `prior_var` must be positive"));
            }
            let batch = r.uint(t, "batch", &scope).map(|b| b as usize);
            if batch == Some(0) {
                r.err(format!("{scope}: `batch` must be at least 1"));
            }
            Some(TargetSpec::Logistic {
                data: data?,
                zero_one,
                preprocess,
                prior_var,
                batch,
            })
        }
        "varsel" => {
            r.unknown_keys(
                t,
                &["name", "source", "path", "label", "n", "d", "data_seed", "active", "noise_std"],
                &scope,
            );
            let data = read_source(r, t, base, &scope);
            let active = r.uint(t, "active", &scope).unwrap_or(4) as usize;
            let noise_std = r.float(t, "noise_std", &scope).unwrap_or(1.0);
            if let Some(DataSource::Synthetic { d, .. }) = &data {
                if active > *d {
                    r.err(format!("{scope}: `active` = {active} exceeds d = {d}"));
                }
            }
            Some(TargetSpec::VarSel {
                data: data?,
                active,
                noise_std,
            })
        }
        "bsl" => {
            r.unknown_keys(
                t,
                &["name", "theta_star", "data_seed", "param", "toads", "days", "replicates", "shrinkage", "threshold", "lags"],
                &scope,
            );
            let theta = r.floats(t, "theta_star", &scope).unwrap_or_else(|| vec![1.7, 35.0, 0.6]);
            if theta.len() != 3 {
                r.err(format!("{scope}: `theta_star` needs three entries (alpha, delta, p0)"));
                return None;
            }
            let data_seed = r.uint(t, "data_seed", &scope).unwrap_or(0);
            let param = match r.string(t, "param", &scope).as_deref() {
                None | Some("box") => Parameterisation::Box,
                Some("logit") => Parameterisation::Logit,
                Some(other) => {
                    r.err(format!("{scope}: unknown param `{other}` (expected box or logit)"));
                    Parameterisation::Box
                }
            };
            let mut toad = ToadConfig::default();
            if let Some(v) = r.uint(t, "toads", &scope) {
                toad.toads = v as usize;
            }
            if let Some(v) = r.uint(t, "days", &scope) {
                toad.days = v as usize;
            }
            if let Some(v) = r.uint(t, "replicates", &scope) {
                toad.replicates = v as usize;
            }
            if let Some(v) = r.float(t, "shrinkage", &scope) {
                toad.shrinkage = v;
            }
            if let Some(v) = r.float(t, "threshold", &scope) {
                toad.threshold = v;
            }
            if let Some(lags) = r.floats(t, "lags", &scope) {
                if lags.iter().any(|l| l.fract() != 0.0 || *l < 1.0) {
                    r.err(format!("{scope}: `lags` must be positive integers"));
                } else {
                    toad.lags = lags.iter().map(|l| *l as usize).collect();
                }
            }
            if let Err(e) = toad.validate() {
                r.err(format!("{scope}: {e}"));
            }
            if toad.replicates < 2 {
                r.err(format!("{scope}: `replicates` must be at least 2"));
            }
            Some(TargetSpec::Bsl {
                theta_star: [theta[0], theta[1], theta[2]],
                data_seed,
                toad,
                param,
            })
        }
        other => {
            r.err(format!("target: unknown name `{other}`; available targets: {}", names.join(", ")));
            None
        }
    }
}

/// Discrete targets go with the Bernoulli family and continuous ones with
/// the Gaussian families.
fn check_pairing(r: &mut Reader, target: &TargetSpec, family: FamilyKind) {
    let discrete = matches!(target, TargetSpec::VarSel { .. });
    if discrete != (family == FamilyKind::Bernoulli) {
        r.err(format!(
            "family = \"{}\" cannot approximate target = \"{}\"",
            family.name(),
            target.name()
        ));
    }
    if family == FamilyKind::Truncated && !matches!(target, TargetSpec::Bsl { param: Parameterisation::Box, .. }) {
        r.err("family = \"truncated\" is only paired with target bsl under param = \"box\"".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
algorithm = "fc"
family = "fullcov"
N = 200
T = 2
seed = 3

[stepsize]
schedule = "fixed"
epsilon = 1.0

[target]
name = "gaussian"
mean = [1.0, -1.0]
cov = [[2.0, 0.5], [0.5, 1.0]]
"#;

    fn errors(text: &str) -> Vec<String> {
        RunConfig::parse(text, Path::new(".")).unwrap_err().0
    }

    #[test]
    fn smoke_config_parses() {
        let c = RunConfig::parse(SMOKE, Path::new("/tmp/x")).unwrap();
        assert_eq!(c.algorithm, Algorithm::FullCov);
        assert_eq!((c.samples, c.iterations, c.seed), (200, 2, 3));
        assert_eq!(c.out, Path::new("/tmp/x/out"));
        assert_eq!(c.kl_every, 1);
    }

    #[test]
    fn variance_cap_from_u2() {
        let text = SMOKE.replace("epsilon = 1.0", "epsilon = 1.0\nu2 = 4.0");
        let c = RunConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(c.policy.variance_cap, Some(2.0));
    }

    #[test]
    fn incompatible_algorithm_names_both_fields() {
        let e = errors(&SMOKE.replace("\"fullcov\"", "\"meanfield\""));
        assert!(e.iter().any(|m| m.contains("algorithm") && m.contains("family")), "{e:?}");
    }

    #[test]
    fn all_problems_reported_together() {
        let e = errors(&SMOKE.replace("N = 200\n", "").replace("\"gaussian\"", "\"nope\""));
        assert!(e.iter().any(|m| m.contains("`N`")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("gaussian, logistic, varsel, bsl")), "{e:?}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = errors(&SMOKE.replace("seed = 3", "seed = 3\nsamples = 4"));
        assert!(e.iter().any(|m| m.contains("`samples`")), "{e:?}");
    }
}
