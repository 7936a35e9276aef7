use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::{erf, erfc};

use super::BayesError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// ln P(Z > x) for a standard normal Z, accurate far into the tail.
pub(crate) fn ln_upper_tail(x: f64) -> f64 {
    if x < 30.0 {
        (0.5 * erfc(x / std::f64::consts::SQRT_2)).ln()
    } else {
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        ln_std_normal_pdf(x) - x.ln() + series.ln()
    }
}

/// ln(Φ(b) − Φ(a)) for a < b.
pub(crate) fn ln_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if a >= 0.0 {
        let la = ln_upper_tail(a);
        let lb = ln_upper_tail(b);
        la + (-(lb - la).exp()).ln_1p()
    } else if b <= 0.0 {
        ln_mass(-b, -a)
    } else {
        let s = std::f64::consts::SQRT_2;
        (0.5 * (erf(b / s) - erf(a / s))).ln()
    }
}

/// Normal distribution restricted to (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormal {
    pub location: f64,
    pub scale: f64,
}

impl TruncNormal {
    pub const LOWER: f64 = 0.0;
    pub const UPPER: f64 = 1.0;

    pub fn new(location: f64, scale: f64) -> Result<Self, BayesError> {
        if !(scale > 0.0) || !location.is_finite() || !scale.is_finite() {
            return Err(BayesError::Config(format!(
                "truncated normal needs finite location and positive scale, got ({location}, {scale})"
            )));
        }
        Ok(TruncNormal { location, scale })
    }

    fn standardized_bounds(&self) -> (f64, f64) {
        (
            (Self::LOWER - self.location) / self.scale,
            (Self::UPPER - self.location) / self.scale,
        )
    }

    /// ln of the probability the untruncated normal assigns to the bounds.
    pub fn ln_mass(&self) -> f64 {
        let (a, b) = self.standardized_bounds();
        ln_mass(a, b)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(Self::LOWER..=Self::UPPER).contains(&x) {
            return f64::NEG_INFINITY;
        }
        ln_std_normal_pdf((x - self.location) / self.scale) - self.scale.ln() - self.ln_mass()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.ln_mass() > (1e-3f64).ln() {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                let x = self.location + self.scale * z;
                if x > Self::LOWER && x < Self::UPPER {
                    return x;
                }
            }
        }
        let normal = Normal::new(self.location, self.scale).expect("validated");
        let lo = normal.cdf(Self::LOWER);
        let hi = normal.cdf(Self::UPPER);
        let u: f64 = rng.random();
        normal
            .inverse_cdf(lo + u * (hi - lo))
            .clamp(Self::LOWER, Self::UPPER)
    }
}
