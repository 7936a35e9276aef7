use serde::{Deserialize, Serialize};

use super::BayesError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Narrowest interval spanning ⌈mass·n⌉ sorted draws. The leftmost window
/// wins ties.
pub fn hdi(chain: &[f64], mass: f64) -> Result<Interval, BayesError> {
    if chain.len() < 10 {
        return Err(BayesError::TooFewDraws(chain.len()));
    }
    if !(mass > 0.0 && mass < 1.0) {
        return Err(BayesError::Config(format!("interval mass {mass} outside (0, 1)")));
    }
    if chain.iter().any(|x| !x.is_finite()) {
        return Err(BayesError::NonFinite);
    }
    let mut sorted = chain.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let (mut best, mut best_width) = (0, f64::INFINITY);
    for i in 0..=n - k {
        let w = sorted[i + k - 1] - sorted[i];
        if w < best_width {
            best = i;
            best_width = w;
        }
    }
    Ok(Interval {
        lower: sorted[best],
        upper: sorted[best + k - 1],
    })
}
