mod common;

use lsvi_core::diagnostics::kl_up_to_const;
use lsvi_core::expfam::CanonicalParam;
use lsvi_core::numerics::SymMatrix;
use lsvi_core::targets::FnTarget;
use lsvi_core::{run_generic, Family, NaturalParam, RngStream, RunSettings, StepsizePolicy};

#[test]
fn kl_ignores_the_intercept() {
    let mut r = common::rng(3);
    let target = FnTarget::new(2, |x: &[f64]| -(x[0] - 1.0).powi(2) - x[1].powi(4));
    for which in 0..4u8 {
        let fam = common::family(which, 2, &mut r);
        if matches!(fam, Family::BernoulliProduct { .. }) {
            continue;
        }
        let eta = common::random_eta(&fam, &mut r);
        let mut shifted = eta.clone().into_vec();
        shifted[0] += 17.5;
        let s = RngStream::new(11);
        let a = kl_up_to_const(&fam, &eta, &target, 5000, &s).unwrap();
        let b = kl_up_to_const(&fam, &NaturalParam::new(shifted), &target, 5000, &s).unwrap();
        assert_eq!(a, b, "{}", fam.name());
    }
}

#[test]
fn kl_falls_quickly_and_settles_on_a_gaussian_target() {
    let mut r = common::rng(8);
    let fam = Family::FullCovGaussian { dim: 4 };
    let truth = common::random_eta(&fam, &mut r);
    let density = fam.density(&truth).unwrap();
    let target = FnTarget::new(4, move |x: &[f64]| density.eval(x));
    let start = fam
        .from_canonical(&CanonicalParam::FullCov {
            mean: vec![2.0; 4],
            cov: SymMatrix::identity(4),
        })
        .unwrap();
    let settings = RunSettings::new(2000, 15, StepsizePolicy::linear(1.0, 1.0));
    let out = run_generic(&fam, &target, start, &settings, &RngStream::new(4)).unwrap();
    let initial = out.trace.initial_kl.unwrap();
    let kl: Vec<_> = out.trace.rows.iter().map(|row| row.kl.unwrap()).collect();
    assert!(kl[1].value < initial.value, "{} vs {}", kl[1].value, initial.value);
    let (_, floor) = out.trace.min_kl().unwrap();
    let last = out.trace.last_kl().unwrap();
    assert!(last.value - floor.value <= 5.0 * last.std_error.max(floor.std_error));
}
