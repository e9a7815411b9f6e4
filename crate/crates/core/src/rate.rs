//! Convergence-rate envelopes and their quasi-inverses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default search horizon for [`rate_inverse`].
pub const DEFAULT_RATE_HORIZON: u64 = 1_000_000_000;

/// A non-increasing envelope `gamma(t)`, `t >= 1`, tending to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateFunction<T> {
    /// `scale * t^(-exponent)`.
    PowerLaw { scale: T, exponent: f64 },
    /// `amplitude / t`.
    Reciprocal { amplitude: T },
    /// `values[t-1]` for `t <= values.len()`, the last entry afterwards.
    Table { values: Vec<T> },
}

impl<T: Scalar> RateFunction<T> {
    /// `c * t^(-1/2)`, the usual sub-Gaussian mean rate.
    pub fn inverse_sqrt(scale: T) -> Self {
        Self::PowerLaw { scale, exponent: 0.5 }
    }

    /// An envelope that is zero from the first pull on.
    pub fn instant() -> Self {
        Self::Table { values: vec![T::zero()] }
    }

    /// Checks positivity and monotonicity of the parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerLaw { scale, exponent } => {
                if *scale <= T::zero() || !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "power-law rate needs positive scale and exponent".into(),
                    ));
                }
            }
            Self::Reciprocal { amplitude } => {
                if *amplitude <= T::zero() {
                    return Err(Error::InvalidParameter("reciprocal rate needs a positive amplitude".into()));
                }
            }
            Self::Table { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter("table rate is empty".into()));
                }
                if values.iter().any(|v| *v < T::zero()) {
                    return Err(Error::InvalidParameter("table rate has a negative entry".into()));
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidParameter("table rate is not non-increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// `gamma(t)`; `t = 0` is treated as `t = 1`.
    pub fn eval(&self, t: u64) -> T {
        let t = t.max(1);
        match self {
            Self::PowerLaw { scale, exponent } => {
                if exponent.fract() == 0.0 && *exponent <= 8.0 {
                    scale.clone() / T::from_count(t).powf(*exponent)
                } else {
                    scale.clone() / T::from_f64_lossy((t as f64).powf(*exponent))
                }
            }
            Self::Reciprocal { amplitude } => amplitude.clone() / T::from_count(t),
            Self::Table { values } => {
                let idx = usize::try_from(t - 1).unwrap_or(usize::MAX).min(values.len() - 1);
                values[idx].clone()
            }
        }
    }

    /// Shorthand for [`rate_inverse`] with the default horizon.
    pub fn inverse(&self, alpha: &T) -> Result<u64> {
        rate_inverse(self, alpha)
    }
}

/// Smallest `t >= 1` with `rate(t) <= alpha`.
pub fn rate_inverse<T: Scalar>(rate: &RateFunction<T>, alpha: &T) -> Result<u64> {
    rate_inverse_with_horizon(rate, alpha, DEFAULT_RATE_HORIZON)
}

/// Largest inverse the closed-form rates are allowed to return.
const CLOSED_FORM_LIMIT: u64 = 1_000_000_000_000_000_000;

/// [`rate_inverse`] with an explicit search horizon for table rates.
pub fn rate_inverse_with_horizon<T: Scalar>(rate: &RateFunction<T>, alpha: &T, horizon: u64) -> Result<u64> {
    if !(*alpha > T::zero()) {
        return Err(Error::Domain(format!("rate inverse needs alpha > 0, got {alpha:?}")));
    }
    let ok = |t: u64| rate.eval(t) <= *alpha;
    let guess = match rate {
        RateFunction::PowerLaw { scale, exponent } => {
            Some((scale.to_f64_lossy() / alpha.to_f64_lossy()).powf(1.0 / exponent).ceil())
        }
        RateFunction::Reciprocal { amplitude } => Some((amplitude.clone() / alpha.clone()).to_f64_lossy().ceil()),
        RateFunction::Table { .. } => None,
    };
    match guess {
        Some(g) => {
            if !(g < CLOSED_FORM_LIMIT as f64) {
                return Err(Error::HorizonExceeded { alpha: alpha.to_f64_lossy(), horizon: CLOSED_FORM_LIMIT });
            }
            let mut t = (g as u64).max(1);
            while t > 1 && ok(t - 1) {
                t -= 1;
            }
            while !ok(t) {
                t += 1;
            }
            Ok(t)
        }
        None => search_inverse(ok, alpha.to_f64_lossy(), horizon),
    }
}

fn search_inverse(ok: impl Fn(u64) -> bool, alpha: f64, horizon: u64) -> Result<u64> {
    if ok(1) {
        return Ok(1);
    }
    let mut lo = 1_u64;
    let mut hi = 2_u64;
    while !ok(hi) {
        if hi >= horizon {
            return Err(Error::HorizonExceeded { alpha, horizon });
        }
        lo = hi;
        hi = hi.saturating_mul(2).min(horizon);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
