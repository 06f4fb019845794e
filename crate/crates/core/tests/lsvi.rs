mod common;

use proptest::prelude::*;

use common::{family, rng};
use lsvi_core::data::{preprocess_logistic, synth_logistic};
use lsvi_core::expfam::CanonicalParam;
use lsvi_core::gaussian::{run_fc, run_mf, GammaEstimator};
use lsvi_core::lsvi::{estimate_regression, lsvi_ols, momentum_update, RegressionEstimate};
use lsvi_core::numerics::SymMatrix;
use lsvi_core::stepsize::residual_stats;
use lsvi_core::targets::{FnTarget, LogTarget, LogisticTarget};
use lsvi_core::{run_generic, Family, RngStream, RunSettings, StepsizePolicy};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// With `f = log q_{η*} + c`, one regression returns `η*` whatever the
    /// sampling distribution, up to the intercept.
    #[test]
    fn in_family_targets_are_recovered_in_one_regression(
        which in 0u8..4, d in 1usize..4, seed in any::<u64>(), shift in -50.0f64..50.0,
    ) {
        let mut r = rng(seed);
        let fam = family(which, d, &mut r);
        let star = common::random_eta(&fam, &mut r);
        let current = common::random_eta(&fam, &mut r);
        let density = fam.density(&star).unwrap();
        let target = FnTarget::new(d, move |x: &[f64]| density.eval(x) + shift);
        let est = estimate_regression(&fam, &current, &target, 20 * fam.stat_len(), &RngStream::new(seed)).unwrap();
        let got = lsvi_ols(&est).unwrap();
        let scale = star.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in got.as_slice().iter().zip(star.as_slice()).skip(1) {
            prop_assert!((a - b).abs() <= 1e-7 * scale, "{} vs {}", a, b);
        }
    }

    /// Tempered responses regress onto the momentum combination, and the
    /// tempered residual spread is `ε` times the untempered one.
    #[test]
    fn tempering_matches_momentum_and_scales_residuals(eps in 0.01f64..=1.0, seed in any::<u64>()) {
        let fam = Family::MeanFieldGaussian { dim: 2 };
        let mut r = rng(seed);
        let eta = common::random_eta(&fam, &mut r);
        let target = FnTarget::new(2, |x: &[f64]| -(x[0] * x[1]).powi(2) / 4.0 - x[0].abs() + (2.0 * x[1]).cos());
        let est = estimate_regression(&fam, &eta, &target, 400, &RngStream::new(seed)).unwrap();
        let fitted = lsvi_ols(&est).unwrap();
        let tempered: Vec<f64> = est.samples.rows().zip(&est.values)
            .map(|(x, f)| eps * f + (1.0 - eps) * fam.stat_dot(eta.as_slice(), x))
            .collect();
        let direct = lsvi_ols(&RegressionEstimate::from_samples(&fam, &est.samples, &tempered).unwrap()).unwrap();
        let combined = momentum_update(&eta, &fitted, eps);
        let scale = combined.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(common::max_abs_diff(direct.as_slice(), combined.as_slice()) <= 1e-9 * scale);

        let untempered = residual_stats(&fam, &fitted, &est.samples, &est.values).std;
        let after = residual_stats(&fam, &combined, &est.samples, &tempered).std;
        prop_assert!((after - eps * untempered).abs() <= 1e-9 * untempered.max(1.0));
    }
}

fn logistic() -> LogisticTarget {
    let ds = preprocess_logistic(&synth_logistic(50, 3, &RngStream::new(31))).unwrap();
    LogisticTarget::with_default_prior(ds.x, ds.y).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn traces_do_not_depend_on_the_thread_count() {
    let target = logistic();
    let d = target.dim();
    let mut settings = RunSettings::new(3000, 4, StepsizePolicy::linear(1.0, 1.0).with_variance_cap(0.7));
    settings.kl.samples = 1000;
    let fam = Family::FullCovGaussian { dim: d };
    let start = CanonicalParam::FullCov {
        mean: vec![0.0; d],
        cov: SymMatrix::identity(d),
    };
    let runs = |threads: usize| {
        in_pool(threads, || {
            let s = RngStream::new(9);
            let generic = run_generic(&fam, &target, fam.from_canonical(&start).unwrap(), &settings, &s).unwrap();
            let mut refined = settings.clone();
            refined.gamma = GammaEstimator::refined();
            let fc = run_fc(&target, &vec![0.0; d], &SymMatrix::identity(d), &refined, &s).unwrap();
            let mf = run_mf(&target, &vec![0.0; d], &vec![1.0; d], &settings, &s).unwrap();
            [generic, fc, mf].map(|o| o.trace.to_csv_string(false))
        })
    };
    let one = runs(1);
    for threads in [2, 5] {
        assert_eq!(runs(threads), one, "{threads} threads");
    }
    assert_eq!(runs(1), one);
}
