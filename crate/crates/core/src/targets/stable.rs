//! Symmetric α-stable draws by the Chambers–Mallows–Stuck transform.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{LsviError, Result};
use crate::numerics::RngStream;

/// One standard (unit-scale) symmetric α-stable draw.
#[inline]
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = rng.sample(Exp1);
    let av = alpha * v;
    av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `n` draws with characteristic function `exp(-|δω|^α)`.
pub fn levy_stable_sample(alpha: f64, delta: f64, stream: &RngStream, n: usize) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(LsviError::InvalidArgument(format!("stability {alpha} outside (0, 2]")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(LsviError::InvalidArgument(format!("scale {delta} must be positive")));
    }
    let mut rng = stream.rng();
    Ok((0..n).map(|_| delta * standard_stable(alpha, &mut rng)).collect())
}
