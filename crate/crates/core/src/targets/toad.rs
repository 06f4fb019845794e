//! Toad displacement simulator and its lag-based summary statistics.

use rand::Rng;

use crate::error::{LsviError, Result};
use crate::numerics::{Points, RngStream};

use super::stable::standard_stable;

/// `(α, δ, p₀)`: stability, scale and probability of moving to a new site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub alpha: f64,
    pub delta: f64,
    pub p0: f64,
}

impl Theta {
    pub fn new(alpha: f64, delta: f64, p0: f64) -> Self {
        Theta { alpha, delta, p0 }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Theta::new(v[0], v[1], v[2])
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.alpha, self.delta, self.p0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToadConfig {
    pub toads: usize,
    pub days: usize,
    /// Displacements at or below this are treated as staying put.
    pub threshold: f64,
    /// Simulated data sets per likelihood evaluation.
    pub replicates: usize,
    /// Weight on the sample correlation in the shrunk covariance.
    pub shrinkage: f64,
    pub lags: Vec<usize>,
}

impl Default for ToadConfig {
    fn default() -> Self {
        ToadConfig {
            toads: 66,
            days: 63,
            threshold: 10.0,
            replicates: 100,
            shrinkage: 0.5,
            lags: vec![1, 2, 4, 8],
        }
    }
}

/// Quantiles per lag: `0, 0.1, …, 1`.
const QUANTILES: usize = 11;
/// Count, median and ten log-gaps per lag.
pub const STATS_PER_LAG: usize = 2 + QUANTILES - 1;

impl ToadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LsviError::InvalidArgument(m.into()));
        if self.toads == 0 || self.days == 0 || self.replicates == 0 {
            return bad("toads, days and replicates must be at least 1");
        }
        if self.lags.is_empty() || self.lags.windows(2).any(|w| w[0] >= w[1]) || self.lags[0] == 0 {
            return bad("lags must be positive and strictly increasing");
        }
        if *self.lags.last().unwrap() >= self.days {
            return bad("every lag must be smaller than the number of days");
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return bad("shrinkage must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn summary_len(&self) -> usize {
        STATS_PER_LAG * self.lags.len()
    }
}

/// Positions of `toads` animals over `days` days, one toad per row.
pub fn toad_simulate(theta: Theta, toads: usize, days: usize, stream: &RngStream) -> Points {
    let mut rng = stream.rng();
    let mut y = Points::zeros(toads, days);
    for i in 0..toads {
        let row = y.row_mut(i);
        if days == 0 {
            continue;
        }
        row[0] = theta.delta * standard_stable(theta.alpha, &mut rng);
        for t in 0..days - 1 {
            if rng.random::<f64>() < theta.p0 {
                row[t + 1] = row[t] + theta.delta * standard_stable(theta.alpha, &mut rng);
            } else {
                // the displacement draw is never observed on a return night
                let back = rng.random_range(0..=t);
                row[t + 1] = row[back];
            }
        }
    }
    y
}

/// Linear interpolation between order statistics of sorted data
/// (`p = 0` is the minimum, `p = 1` the maximum).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Partially orders `v` so that every position in `ks` (ascending) holds
/// the value it would hold after a full sort.
fn select_many<T: Ord>(v: &mut [T], ks: &[usize]) {
    if ks.is_empty() || v.len() < 2 {
        return;
    }
    let mid = ks.len() / 2;
    let k = ks[mid];
    let (left, _, right) = v.select_nth_unstable(k);
    select_many(left, &ks[..mid]);
    let rest: Vec<usize> = ks[mid + 1..].iter().map(|j| j - k - 1).collect();
    select_many(right, &rest);
}

/// Summary vector with a flag when some entry is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ToadSummary {
    /// Undefined entries are `NaN` (median) or `-∞` (log-gaps).
    pub values: Vec<f64>,
    pub degenerate: Option<String>,
}

impl ToadSummary {
    pub fn into_result(self) -> Result<Vec<f64>> {
        match self.degenerate {
            Some(msg) => Err(LsviError::DegenerateSummary(msg)),
            None => Ok(self.values),
        }
    }
}

/// For each lag: the number of displacements within the threshold, then
/// the median and the log-differences of adjacent deciles of the larger ones.
pub fn toad_summaries(y: &Points, lags: &[usize], threshold: f64) -> ToadSummary {
    let days = y.ncols();
    let mut values = Vec::with_capacity(STATS_PER_LAG * lags.len());
    let mut degenerate = None;
    // displacements are non-negative, so their bit patterns sort like the
    // values themselves (`total_cmp` order) but compare as plain integers
    let mut moved: Vec<u64> = Vec::with_capacity(y.nrows() * days);
    for &lag in lags {
        moved.clear();
        let mut stayed = 0usize;
        if lag < days {
            for row in y.rows() {
                for t in 0..days - lag {
                    let disp = (row[t] - row[t + lag]).abs();
                    if disp <= threshold {
                        stayed += 1;
                    } else {
                        moved.push(disp.to_bits());
                    }
                }
            }
        }
        values.push(stayed as f64);
        if moved.len() < 2 {
            degenerate.get_or_insert(format!(
                "lag {lag}: {} displacement(s) above the threshold",
                moved.len()
            ));
            values.push(f64::NAN);
            values.extend([f64::NEG_INFINITY; QUANTILES - 1]);
            continue;
        }
        // only the order statistics the quantiles touch are put in place
        let last = moved.len() - 1;
        let mut ks: Vec<usize> = (0..QUANTILES)
            .flat_map(|k| {
                let lo = (last as f64 * k as f64 / (QUANTILES - 1) as f64).floor() as usize;
                [lo, (lo + 1).min(last)]
            })
            .collect();
        ks.dedup();
        select_many(&mut moved, &ks);
        let q: Vec<f64> = (0..QUANTILES)
            .map(|k| {
                let p = k as f64 / (QUANTILES - 1) as f64;
                let h = last as f64 * p;
                let lo = h.floor() as usize;
                let at = |i: usize| f64::from_bits(moved[i]);
                if lo >= last {
                    at(last)
                } else {
                    at(lo) + (h - lo as f64) * (at(lo + 1) - at(lo))
                }
            })
            .collect();
        values.push(q[QUANTILES / 2]);
        for w in q.windows(2) {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                degenerate.get_or_insert(format!("lag {lag}: tied adjacent quantiles"));
                values.push(f64::NEG_INFINITY);
            } else {
                values.push(gap.ln());
            }
        }
    }
    ToadSummary { values, degenerate }
}
