mod common;

use proptest::prelude::*;

use common::rng;
use lsvi_core::lsvi::{estimate_regression, lsvi_ols};
use lsvi_core::stepsize::{momentum_update, residual_stats};
use lsvi_core::targets::FnTarget;
use lsvi_core::{Family, NaturalParam, RngStream, StepsizePolicy};

fn policy(kind: u8, a: f64, b: f64, cap: Option<f64>) -> StepsizePolicy {
    let p = if kind.is_multiple_of(2) { StepsizePolicy::fixed(a.min(1.0)) } else { StepsizePolicy::linear(1.0 + a, b) };
    match cap {
        Some(u) => p.with_variance_cap(u),
        None => p,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accepted_steps_are_bounded_in_domain_and_capped(
        kind in 0u8..2, a in 0.05f64..3.0, b in 0.0f64..2.0, t in 0usize..50,
        cap in proptest::option::of(0.01f64..2.0), jitter in 0.0f64..5.0, seed in any::<u64>(),
    ) {
        let fam = Family::FullCovGaussian { dim: 2 };
        let mut r = rng(seed);
        let eta = common::random_eta(&fam, &mut r);
        let target = FnTarget::new(2, |x: &[f64]| -x[0].powi(4) - 0.5 * x[1] * x[1] + x[0] * x[1].sin());
        let est = estimate_regression(&fam, &eta, &target, 300, &RngStream::new(seed)).unwrap();
        let fitted = lsvi_ols(&est).unwrap();
        // push the proposal around so that backtracking is exercised too
        let noise = common::normals(&mut r, fam.stat_len());
        let eta_new = NaturalParam::new(fitted.as_slice().iter().zip(&noise).map(|(v, n)| v + jitter * n).collect());
        let p = policy(kind, a, b, cap);
        let out = p.apply(t, &fam, &eta, &eta_new, &est.samples, &est.values).unwrap();
        prop_assert!(out.epsilon > 0.0 && out.epsilon <= p.base_epsilon(t));
        prop_assert!(fam.in_domain(out.params.as_slice()));
        prop_assert_eq!(&out.params, &momentum_update(&eta, &eta_new, out.epsilon));
        if let (Some(u), true) = (cap, out.variance_capped) {
            let tempered: Vec<f64> = est.samples.rows().zip(&est.values)
                .map(|(x, f)| out.epsilon * f + (1.0 - out.epsilon) * fam.stat_dot(eta.as_slice(), x))
                .collect();
            let after = residual_stats(&fam, &out.params, &est.samples, &tempered).std;
            prop_assert!(after <= u * (1.0 + 1e-9), "{} > {}", after, u);
        }
    }

    #[test]
    fn linear_schedules_never_increase(offset in 1.0f64..10.0, slope in 0.0f64..3.0, t in 0usize..10_000) {
        let p = StepsizePolicy::linear(offset, slope);
        prop_assert!(p.base_epsilon(t + 1) <= p.base_epsilon(t));
        prop_assert!(p.base_epsilon(t) <= 1.0);
    }
}
