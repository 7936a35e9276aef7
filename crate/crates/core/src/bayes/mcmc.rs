use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{log_posterior_suff, BayesConfig, Sufficient};

const ADAPT_WINDOW: usize = 50;

/// Draws from one chain after tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Post-tuning acceptance rates for (μ, ln σ).
    pub acceptance: [f64; 2],
    /// Proposal scales at the end of tuning.
    pub steps: [f64; 2],
}

fn adapt(step: f64, rate: f64) -> f64 {
    match rate {
        r if r < 0.05 => step * 0.5,
        r if r < 0.2 => step * 0.75,
        r if r > 0.75 => step * 2.0,
        r if r > 0.5 => step * 1.5,
        _ => step,
    }
}

/// Componentwise random-walk Metropolis on (μ, ln σ).
pub(crate) fn run_chain(suff: &Sufficient, cfg: &BayesConfig, rng: &mut ChaCha8Rng) -> Chain {
    let target = |mu: f64, log_sigma: f64| log_posterior_suff(suff, mu, log_sigma.exp(), cfg) + log_sigma;
    let n = suff.n.max(1) as f64;
    let spread = suff.sd().max(1e-3);
    let jitter: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let mut state = [
        suff.mean + jitter[0] * spread / n.sqrt(),
        spread.ln() + jitter[1] * 0.1,
    ];
    let mut lp = target(state[0], state[1]);
    let mut steps = [2.4 * spread / n.sqrt(), 2.4 / (2.0 * n).sqrt()];
    let mut window_accepts = [0usize; 2];
    let mut accepts = [0usize; 2];
    let mut chain = Chain {
        mu: Vec::with_capacity(cfg.draws),
        sigma: Vec::with_capacity(cfg.draws),
        acceptance: [0.0; 2],
        steps: [0.0; 2],
    };
    for iter in 0..cfg.tune + cfg.draws {
        let tuning = iter < cfg.tune;
        for k in 0..2 {
            let z: f64 = StandardNormal.sample(rng);
            let mut proposal = state;
            proposal[k] += steps[k] * z;
            let lp_new = target(proposal[0], proposal[1]);
            let u: f64 = rng.random();
            if lp_new.is_finite() && u.ln() < lp_new - lp {
                state = proposal;
                lp = lp_new;
                if tuning {
                    window_accepts[k] += 1;
                } else {
                    accepts[k] += 1;
                }
            }
        }
        if tuning && (iter + 1) % ADAPT_WINDOW == 0 {
            for k in 0..2 {
                steps[k] = adapt(steps[k], window_accepts[k] as f64 / ADAPT_WINDOW as f64);
            }
            window_accepts = [0; 2];
        }
        if !tuning {
            chain.mu.push(state[0]);
            chain.sigma.push(state[1].exp());
        }
    }
    chain.acceptance = [
        accepts[0] as f64 / cfg.draws as f64,
        accepts[1] as f64 / cfg.draws as f64,
    ];
    chain.steps = steps;
    chain
}

/// Split-chain potential scale reduction. Constant draws give 1.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    for c in chains {
        let h = c.len() / 2;
        if h < 2 {
            return f64::NAN;
        }
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    let len = halves[0].len();
    if halves.iter().any(|h| h.len() != len) {
        return f64::NAN;
    }
    let n = len as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = halves
        .iter()
        .zip(&means)
        .map(|(h, mean)| h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rhat_near_one_for_iid_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2000).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let r = split_rhat(&chains);
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn rhat_flags_separated_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..500).map(|_| c as f64 + rng.sample::<f64, _>(StandardNormal) * 0.1).collect())
            .collect();
        assert!(split_rhat(&chains) > 1.05);
        // a trend inside one chain is caught by splitting
        let trend = vec![(0..1000).map(|i| i as f64).collect::<Vec<_>>()];
        assert!(split_rhat(&trend) > 1.05);
        assert_eq!(split_rhat(&[vec![2.0; 10], vec![2.0; 10]]), 1.0);
    }

    #[test]
    fn rhat_matches_hand_computation() {
        // halves: [1,2],[3,4] and [2,2],[4,6]
        let chains = vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 2.0, 4.0, 6.0]];
        let means: [f64; 4] = [1.5, 3.5, 2.0, 5.0];
        let grand = means.iter().sum::<f64>() / 4.0;
        let b = 2.0 / 3.0 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
        let w = (0.5 + 0.5 + 0.0 + 2.0) / 4.0;
        let expected = ((0.5 * w + b / 2.0) / w).sqrt();
        assert!((split_rhat(&chains) - expected).abs() < 1e-12);
    }
}
