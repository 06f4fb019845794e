#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use lsvi_core::expfam::CanonicalParam;
use lsvi_core::numerics::SymMatrix;
use lsvi_core::{Family, NaturalParam, RngStream};

pub fn rng(seed: u64) -> ChaCha12Rng {
    RngStream::new(seed).rng()
}

pub fn normals(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `M Mᵀ / d + ridge·I` with standard normal `M`.
pub fn random_spd(rng: &mut ChaCha12Rng, d: usize, ridge: f64) -> SymMatrix {
    let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &m * m.transpose() / d as f64 + DMatrix::identity(d, d) * ridge;
    SymMatrix::symmetrized(&a).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// One of the four families, picked by `which`, in dimension `d`.
pub fn family(which: u8, d: usize, rng: &mut ChaCha12Rng) -> Family {
    match which % 4 {
        0 => Family::FullCovGaussian { dim: d },
        1 => Family::MeanFieldGaussian { dim: d },
        2 => {
            let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..0.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|a| a + rng.random_range(0.5..4.0)).collect();
            Family::truncated(lower, upper).unwrap()
        }
        _ => Family::BernoulliProduct { dim: d },
    }
}

/// Random canonical parameter of `family`.
pub fn canonical(family: &Family, rng: &mut ChaCha12Rng) -> CanonicalParam {
    let d = family.dim();
    let var = |rng: &mut ChaCha12Rng| (0..d).map(|_| rng.random_range(0.2..3.0)).collect::<Vec<f64>>();
    match family {
        Family::FullCovGaussian { .. } => CanonicalParam::FullCov {
            mean: normals(rng, d),
            cov: random_spd(rng, d, 0.3),
        },
        Family::MeanFieldGaussian { .. } => CanonicalParam::MeanField {
            mean: normals(rng, d),
            var: var(rng),
        },
        Family::TruncatedMeanField { lower, upper } => CanonicalParam::Truncated {
            mean: lower.iter().zip(upper).map(|(a, b)| rng.random_range(*a..*b)).collect(),
            var: var(rng),
            lower: lower.clone(),
            upper: upper.clone(),
        },
        Family::BernoulliProduct { .. } => CanonicalParam::Bernoulli {
            probs: (0..d).map(|_| rng.random_range(0.1..0.9)).collect(),
        },
    }
}

pub fn random_eta(family: &Family, rng: &mut ChaCha12Rng) -> NaturalParam {
    family.from_canonical(&canonical(family, rng)).unwrap()
}

/// Spike-and-slab log-posterior by LU determinant and dense solve, written
/// independently of the Cholesky-based target.
pub fn varsel_oracle(
    z: &DMatrix<f64>,
    y: &nalgebra::DVector<f64>,
    gamma: &[bool],
    h: lsvi_core::targets::VarSelHyper,
) -> f64 {
    let d = z.ncols() as f64;
    let sel: Vec<usize> = (0..gamma.len()).filter(|&i| gamma[i]).collect();
    let k = sel.len();
    let yty = y.dot(y);
    let tail = |s2: f64| -(h.w + d) / 2.0 * (h.w * h.lambda / d + s2).ln();
    if k == 0 {
        return tail(yty / d);
    }
    let zg = z.select_columns(&sel);
    let g = zg.transpose() * &zg + DMatrix::identity(k, k) / h.v2;
    let b = zg.transpose() * y;
    let lu = g.clone().lu();
    let x = lu.solve(&b).unwrap();
    let s2 = (yty - b.dot(&x)) / d;
    -0.5 * lu.determinant().ln() - k as f64 * h.v2.sqrt().ln() + tail(s2)
}
