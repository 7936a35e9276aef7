//! Two-group comparison of scores in (0, 1) with truncated-normal models
//! sampled by adaptive Metropolis.

mod hdi;
mod mcmc;
mod truncnorm;

pub use hdi::{hdi, Interval};
pub use mcmc::{split_rhat, Chain};
pub use truncnorm::TruncNormal;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{derive_seed, hash_reals};
use truncnorm::{ln_mass, ln_std_normal_pdf};

/// Convergence threshold for the split-chain diagnostic.
pub const RHAT_THRESHOLD: f64 = 1.05;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("observation {index} = {value} outside [0, 1]")]
    OutOfBounds { index: usize, value: f64 },
    #[error("need at least 10 draws for an interval, got {0}")]
    TooFewDraws(usize),
    #[error("non-finite draw")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub prior_mean: f64,
    pub prior_variance: f64,
    /// Variance of the half-normal prior on the scale.
    pub sd_prior_variance: f64,
    pub tune: usize,
    pub draws: usize,
    pub chains: usize,
    pub ci_mass: f64,
    pub seed: u64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            prior_mean: 0.5,
            prior_variance: 0.25,
            sd_prior_variance: 0.25,
            tune: 1000,
            draws: 5000,
            chains: 4,
            ci_mass: 0.95,
            seed: 0,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<(), BayesError> {
        let fail = |m: &str| Err(BayesError::Config(m.to_string()));
        if self.tune < 1 || self.draws < 1 {
            return fail("tune and draws must be at least 1");
        }
        if self.chains < 1 {
            return fail("chains must be at least 1");
        }
        if self.chains * self.draws < 10 {
            return fail("chains × draws must be at least 10");
        }
        if !(self.ci_mass > 0.0 && self.ci_mass < 1.0) {
            return fail("ci_mass must lie in (0, 1)");
        }
        if !(self.prior_variance > 0.0 && self.sd_prior_variance > 0.0) {
            return fail("prior variances must be positive");
        }
        if !self.prior_mean.is_finite() {
            return fail("prior_mean must be finite");
        }
        Ok(())
    }
}

/// Centered sufficient statistics of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sufficient {
    pub n: usize,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Sufficient {
    pub fn new(data: &[f64]) -> Self {
        let n = data.len();
        if n == 0 {
            return Sufficient { n, mean: 0.0, m2: 0.0 };
        }
        let mean = data.iter().sum::<f64>() / n as f64;
        let m2 = data.iter().map(|x| (x - mean).powi(2)).sum();
        Sufficient { n, mean, m2 }
    }

    pub fn sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

fn log_prior(mu: f64, sigma: f64, cfg: &BayesConfig) -> f64 {
    let v = cfg.prior_variance;
    let w = cfg.sd_prior_variance;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let mu_term = -0.5 * (ln_2pi + v.ln()) - (mu - cfg.prior_mean).powi(2) / (2.0 * v);
    let sigma_term = std::f64::consts::LN_2 - 0.5 * (ln_2pi + w.ln()) - sigma * sigma / (2.0 * w);
    mu_term + sigma_term
}

pub(crate) fn log_posterior_suff(s: &Sufficient, mu: f64, sigma: f64, cfg: &BayesConfig) -> f64 {
    if !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
        return f64::NEG_INFINITY;
    }
    let prior = log_prior(mu, sigma, cfg);
    if s.n == 0 {
        return prior;
    }
    let n = s.n as f64;
    let ss = s.m2 + n * (s.mean - mu).powi(2);
    let ln_z = ln_mass(-mu / sigma, (1.0 - mu) / sigma);
    let ln_norm = 0.5 * (2.0 * std::f64::consts::PI).ln();
    -n * (sigma.ln() + ln_norm) - ss / (2.0 * sigma * sigma) - n * ln_z + prior
}

/// Log posterior density (up to a constant in the data) of a truncated
/// normal on (0, 1) with normal prior on the location and half-normal
/// prior on the scale. Non-positive scales give −∞.
pub fn log_posterior(data: &[f64], mu: f64, sigma: f64, cfg: &BayesConfig) -> f64 {
    log_posterior_suff(&Sufficient::new(data), mu, sigma, cfg)
}

/// Gradient of [`log_posterior`] with respect to (μ, σ).
pub fn log_posterior_gradient(data: &[f64], mu: f64, sigma: f64, cfg: &BayesConfig) -> [f64; 2] {
    let s = Sufficient::new(data);
    let n = s.n as f64;
    let mut g = [
        -(mu - cfg.prior_mean) / cfg.prior_variance,
        -sigma / cfg.sd_prior_variance,
    ];
    if s.n == 0 {
        return g;
    }
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    let ln_z = ln_mass(a, b);
    let ga = -(ln_std_normal_pdf(a) - ln_z).exp();
    let gb = (ln_std_normal_pdf(b) - ln_z).exp();
    let dz_dmu = -(ga + gb) / sigma;
    let dz_dsigma = -(ga * a + gb * b) / sigma;
    let ss = s.m2 + n * (s.mean - mu).powi(2);
    g[0] += n * (s.mean - mu) / (sigma * sigma) - n * dz_dmu;
    g[1] += -n / sigma + ss / sigma.powi(3) - n * dz_dsigma;
    g
}

fn validate_data(data: &[f64]) -> Result<(), BayesError> {
    if data.len() < 2 {
        return Err(BayesError::TooFewObservations(data.len()));
    }
    for (index, &value) in data.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(BayesError::OutOfBounds { index, value });
        }
    }
    Ok(())
}

/// Posterior draws for one group, chain by chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub chains: Vec<Chain>,
    pub rhat_mu: f64,
    pub rhat_sigma: f64,
    pub seed: u64,
}

impl Posterior {
    pub fn converged(&self) -> bool {
        self.rhat_mu <= RHAT_THRESHOLD && self.rhat_sigma <= RHAT_THRESHOLD
    }

    /// All μ draws, chain-major.
    pub fn mu(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.mu.iter().copied()).collect()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.sigma.iter().copied()).collect()
    }
}

fn sample_with_seed(data: &[f64], cfg: &BayesConfig, seed: u64) -> Posterior {
    let suff = Sufficient::new(data);
    let chains: Vec<Chain> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            mcmc::run_chain(&suff, cfg, &mut rng)
        })
        .collect();
    let mu: Vec<Vec<f64>> = chains.iter().map(|c| c.mu.clone()).collect();
    let sigma: Vec<Vec<f64>> = chains.iter().map(|c| c.sigma.clone()).collect();
    let posterior = Posterior {
        rhat_mu: split_rhat(&mu),
        rhat_sigma: split_rhat(&sigma),
        chains,
        seed,
    };
    if !posterior.converged() {
        log::warn!(
            "chains did not converge: split R-hat μ={:.4}, σ={:.4}",
            posterior.rhat_mu,
            posterior.rhat_sigma
        );
    }
    posterior
}

fn group_seed(root: u64, data: &[f64], slot: Option<usize>) -> u64 {
    let h = format!("{:016x}", hash_reals(data));
    match slot {
        None => derive_seed(root, &["bayes", &h]),
        Some(s) => derive_seed(root, &["bayes", &h, &s.to_string()]),
    }
}

/// Samples the posterior of one group. The chain streams depend on the
/// seed and on the data, so a group gets the same draws whichever side of
/// a comparison it sits on.
pub fn sample_posterior(data: &[f64], cfg: &BayesConfig) -> Result<Posterior, BayesError> {
    cfg.validate()?;
    validate_data(data)?;
    Ok(sample_with_seed(data, cfg, group_seed(cfg.seed, data, None)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub data_mean: f64,
    pub data_sd: f64,
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub mu_hdi: Interval,
    pub sigma_mean: f64,
    pub sigma_sd: f64,
    pub sigma_hdi: Interval,
    pub acceptance_mu: f64,
    pub acceptance_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhat: BTreeMap<String, f64>,
    pub threshold: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesComparison {
    pub group_a: GroupSummary,
    pub group_b: GroupSummary,
    /// Posterior probability that the first group's mean is larger.
    pub prob_diff: f64,
    pub delta_mean: f64,
    pub delta_ci: Interval,
    pub cohens_d: f64,
    pub cohens_d_ci: Interval,
    pub ci_mass: f64,
    pub diagnostics: Diagnostics,
    pub seed: u64,
    pub config: BayesConfig,
    #[serde(skip)]
    pub posterior_a: Option<Posterior>,
    #[serde(skip)]
    pub posterior_b: Option<Posterior>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize(data: &[f64], p: &Posterior, mass: f64) -> Result<GroupSummary, BayesError> {
    let suff = Sufficient::new(data);
    let mu = p.mu();
    let sigma = p.sigma();
    let (mu_mean, mu_sd) = mean_sd(&mu);
    let (sigma_mean, sigma_sd) = mean_sd(&sigma);
    let k = p.chains.len() as f64;
    Ok(GroupSummary {
        n: data.len(),
        data_mean: suff.mean,
        data_sd: suff.sd(),
        mu_mean,
        mu_sd,
        mu_hdi: hdi(&mu, mass)?,
        sigma_mean,
        sigma_sd,
        sigma_hdi: hdi(&sigma, mass)?,
        acceptance_mu: p.chains.iter().map(|c| c.acceptance[0]).sum::<f64>() / k,
        acceptance_sigma: p.chains.iter().map(|c| c.acceptance[1]).sum::<f64>() / k,
    })
}

/// Compares two groups with independent models, pairing draws by index.
pub fn compare_groups(a: &[f64], b: &[f64], cfg: &BayesConfig) -> Result<BayesComparison, BayesError> {
    cfg.validate()?;
    validate_data(a)?;
    validate_data(b)?;
    let (seed_a, seed_b) = if hash_reals(a) == hash_reals(b) {
        (group_seed(cfg.seed, a, Some(0)), group_seed(cfg.seed, b, Some(1)))
    } else {
        (group_seed(cfg.seed, a, None), group_seed(cfg.seed, b, None))
    };
    let (pa, pb) = rayon::join(
        || sample_with_seed(a, cfg, seed_a),
        || sample_with_seed(b, cfg, seed_b),
    );
    let (mu_a, mu_b) = (pa.mu(), pb.mu());
    let (sd_a, sd_b) = (pa.sigma(), pb.sigma());
    let delta: Vec<f64> = mu_a.iter().zip(&mu_b).map(|(x, y)| x - y).collect();
    let d: Vec<f64> = delta
        .iter()
        .zip(sd_a.iter().zip(&sd_b))
        .map(|(dm, (s1, s2))| dm / ((s1 * s1 + s2 * s2) / 2.0).sqrt())
        .collect();
    let prob_diff = delta.iter().filter(|&&x| x > 0.0).count() as f64 / delta.len() as f64;
    let rhat = BTreeMap::from([
        ("mu_a".to_string(), pa.rhat_mu),
        ("mu_b".to_string(), pb.rhat_mu),
        ("sigma_a".to_string(), pa.rhat_sigma),
        ("sigma_b".to_string(), pb.rhat_sigma),
    ]);
    Ok(BayesComparison {
        group_a: summarize(a, &pa, cfg.ci_mass)?,
        group_b: summarize(b, &pb, cfg.ci_mass)?,
        prob_diff,
        delta_mean: mean_sd(&delta).0,
        delta_ci: hdi(&delta, cfg.ci_mass)?,
        cohens_d: mean_sd(&d).0,
        cohens_d_ci: hdi(&d, cfg.ci_mass)?,
        ci_mass: cfg.ci_mass,
        diagnostics: Diagnostics {
            converged: pa.converged() && pb.converged(),
            rhat,
            threshold: RHAT_THRESHOLD,
        },
        seed: cfg.seed,
        config: cfg.clone(),
        posterior_a: Some(pa),
        posterior_b: Some(pb),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn draws(loc: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
        let t = TruncNormal::new(loc, scale).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| t.sample(&mut rng)).collect()
    }

    fn quick(seed: u64) -> BayesConfig {
        BayesConfig {
            tune: 500,
            draws: 1000,
            seed,
            ..BayesConfig::default()
        }
    }

    fn phi(x: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn empty_data_gives_prior() {
        let cfg = BayesConfig::default();
        let (mu, sigma) = (0.3, 0.2);
        // N(0.5, 0.25) at 0.3 and HalfNormal(0.25) at 0.2, written out
        let v: f64 = 0.25;
        let expected = -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (mu - 0.5f64).powi(2) / (2.0 * v)
            + (2.0f64).ln()
            - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
            - sigma * sigma / (2.0 * v);
        assert!((log_posterior(&[], mu, sigma, &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_scale_is_impossible() {
        let cfg = BayesConfig::default();
        assert_eq!(log_posterior(&[0.5], 0.5, 0.0, &cfg), f64::NEG_INFINITY);
        assert_eq!(log_posterior(&[0.5], 0.5, -1.0, &cfg), f64::NEG_INFINITY);
        assert!(log_posterior(&[0.5, 0.2], 3.0, 1e-3, &cfg).is_finite());
    }

    #[test]
    fn tight_scale_at_the_datum_wins() {
        let cfg = BayesConfig::default();
        assert!(log_posterior(&[0.4], 0.4, 0.01, &cfg) > log_posterior(&[0.4], 0.4, 0.5, &cfg));
    }

    #[test]
    fn truncation_factor() {
        let cfg = BayesConfig::default();
        let (mu, sigma) = (0.5, 0.2);
        let with_datum = log_posterior(&[0.5], mu, sigma, &cfg);
        let prior_only = log_posterior(&[], mu, sigma, &cfg);
        let untruncated = (1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt())).ln();
        let factor = 1.0 / (phi(2.5) - phi(-2.5));
        assert!(((with_datum - prior_only) - (untruncated + factor.ln())).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let cfg = BayesConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(0..40);
            let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mu = rng.random_range(-0.5..1.5);
            let sigma = rng.random_range(0.05..1.0);
            let g = log_posterior_gradient(&data, mu, sigma, &cfg);
            let h = 1e-6;
            let fd_mu = (log_posterior(&data, mu + h, sigma, &cfg) - log_posterior(&data, mu - h, sigma, &cfg)) / (2.0 * h);
            let fd_sigma =
                (log_posterior(&data, mu, sigma + h, &cfg) - log_posterior(&data, mu, sigma - h, &cfg)) / (2.0 * h);
            for (exact, approx) in [(g[0], fd_mu), (g[1], fd_sigma)] {
                let rel = (exact - approx).abs() / exact.abs().max(1.0);
                assert!(rel <= 1e-5, "{exact} vs {approx} at mu={mu} sigma={sigma} n={n}");
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(BayesConfig::default().validate().is_ok());
        let bad = [
            BayesConfig { draws: 0, ..Default::default() },
            BayesConfig { tune: 0, ..Default::default() },
            BayesConfig { ci_mass: 1.0, ..Default::default() },
            BayesConfig { prior_variance: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(BayesError::Config(_))));
        }
    }

    #[test]
    fn rejects_bad_data() {
        let cfg = quick(0);
        assert!(matches!(sample_posterior(&[0.5], &cfg), Err(BayesError::TooFewObservations(1))));
        assert!(matches!(
            sample_posterior(&[0.5, 1.2], &cfg),
            Err(BayesError::OutOfBounds { index: 1, .. })
        ));
        assert!(sample_posterior(&[0.5, f64::NAN], &cfg).is_err());
    }

    #[test]
    fn recovers_known_location() {
        let data = draws(0.5, 0.1, 500, 1);
        let p = sample_posterior(&data, &BayesConfig { seed: 4, ..Default::default() }).unwrap();
        let (mean, _) = mean_sd(&p.mu());
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
        assert!(p.converged());
        for c in &p.chains {
            assert!(c.acceptance.iter().all(|&r| (0.15..=0.6).contains(&r)), "{:?}", c.acceptance);
        }
    }

    #[test]
    fn two_observations_are_enough() {
        let p = sample_posterior(&[0.4, 0.6], &quick(1)).unwrap();
        let mu = p.mu();
        let i = hdi(&mu, 0.95).unwrap();
        assert!(i.width() > 0.2, "{i:?}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let data = draws(0.3, 0.1, 50, 2);
        let a = sample_posterior(&data, &quick(9)).unwrap();
        let b = sample_posterior(&data, &quick(9)).unwrap();
        assert_eq!(a, b);
        let c = sample_posterior(&data, &quick(10)).unwrap();
        assert_ne!(a.chains[0].mu, c.chains[0].mu);
    }

    #[test]
    fn identical_groups() {
        let data = draws(0.5, 0.1, 500, 3);
        let cmp = compare_groups(&data, &data, &BayesConfig { seed: 1, ..Default::default() }).unwrap();
        assert!((0.3..=0.7).contains(&cmp.prob_diff), "{}", cmp.prob_diff);
        assert!(cmp.delta_ci.contains(0.0));
    }

    #[test]
    fn separated_groups() {
        let a = draws(0.7, 0.05, 200, 4);
        let b = draws(0.3, 0.05, 200, 5);
        let cmp = compare_groups(&a, &b, &quick(2)).unwrap();
        assert!(cmp.prob_diff >= 0.999);
        assert!(cmp.cohens_d_ci.lower > 0.0);
        assert!(cmp.delta_ci.lower <= cmp.delta_ci.upper);
        assert!(cmp.diagnostics.converged);
        let json = serde_json::to_string(&cmp).unwrap();
        assert!(json.contains("prob_diff") && !json.contains("posterior_a"));
    }

    #[test]
    fn prob_diff_matches_sign_frequency() {
        let a = draws(0.52, 0.1, 60, 6);
        let b = draws(0.5, 0.1, 60, 7);
        let cmp = compare_groups(&a, &b, &quick(3)).unwrap();
        let (pa, pb) = (cmp.posterior_a.as_ref().unwrap(), cmp.posterior_b.as_ref().unwrap());
        let wins = pa.mu().iter().zip(pb.mu()).filter(|(x, y)| **x > *y).count();
        assert_eq!(cmp.prob_diff, wins as f64 / pa.mu().len() as f64);
    }

    #[test]
    fn shift_moves_location() {
        let a = draws(0.4, 0.05, 300, 8);
        let b = draws(0.45, 0.05, 300, 9);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.05).collect();
        let before = compare_groups(&a, &b, &quick(5)).unwrap();
        let after = compare_groups(&shifted, &b, &quick(5)).unwrap();
        let moved = after.group_a.mu_mean - before.group_a.mu_mean;
        assert!((moved - 0.05).abs() < 0.01, "{moved}");
        assert!(after.prob_diff >= before.prob_diff);
    }

    #[test]
    fn more_data_narrows_interval() {
        let cfg = |s| BayesConfig { tune: 300, draws: 600, chains: 2, seed: s, ..Default::default() };
        let (mut small, mut large) = (0.0, 0.0);
        for s in 0..20 {
            let full = draws(0.5, 0.1, 200, 100 + s);
            let half = &full[..100];
            small += sample_posterior(half, &cfg(s)).map(|p| hdi(&p.mu(), 0.95).unwrap().width()).unwrap();
            large += sample_posterior(&full, &cfg(s)).map(|p| hdi(&p.mu(), 0.95).unwrap().width()).unwrap();
        }
        assert!(large < small, "{large} vs {small}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn label_antisymmetry(seed in 0u64..1000, la in 0.3f64..0.7, lb in 0.3f64..0.7) {
            let a = draws(la, 0.1, 40, seed);
            let b = draws(lb, 0.1, 40, seed + 1);
            let cfg = BayesConfig { tune: 200, draws: 500, seed, ..Default::default() };
            let ab = compare_groups(&a, &b, &cfg).unwrap();
            let ba = compare_groups(&b, &a, &cfg).unwrap();
            prop_assert!((ab.prob_diff - (1.0 - ba.prob_diff)).abs() <= 0.01);
            prop_assert!((ab.cohens_d + ba.cohens_d).abs() < 1e-12);
        }
    }
}
