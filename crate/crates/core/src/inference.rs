//! Anchored comparison of concept similarity across unaligned embedding
//! spaces, and the two-sample Kolmogorov–Smirnov test behind it.
//!
//! Both spaces are probed with the same random sample of shared lemmas. In
//! each space a concept pair (a, b) becomes the profile
//! `cos(w_i, a) - cos(w_i, b)` over the sample; the two profiles are then
//! compared with a KS test.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{cosine, ConceptError, ConceptVector};
use crate::embeddings::{common_vocabulary, EmbeddingModel};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("common vocabulary has {available} lemmas, cannot sample {requested}; use n <= {available}")]
    VocabularyTooSmall { available: usize, requested: usize },
    #[error("anchor word `{word}` is not in the vocabulary of `{model}`")]
    MissingAnchor { word: String, model: String },
    #[error("KS test needs at least 2 values per sample, got {0} and {1}")]
    SampleTooSmall(usize, usize),
    #[error("sample contains NaN")]
    NotANumber,
    #[error(transparent)]
    Concept(#[from] ConceptError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSample {
    pub words: Vec<String>,
    pub seed: u64,
}

/// Uniform sample without replacement, reproducible from `seed`.
pub fn sample_anchors(
    vocab_common: &BTreeSet<String>,
    n: usize,
    seed: u64,
) -> Result<AnchorSample, InferenceError> {
    if n > vocab_common.len() {
        return Err(InferenceError::VocabularyTooSmall {
            available: vocab_common.len(),
            requested: n,
        });
    }
    let ordered: Vec<&String> = vocab_common.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = index::sample(&mut rng, ordered.len(), n)
        .into_iter()
        .map(|i| ordered[i].clone())
        .collect();
    Ok(AnchorSample { words, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorProfile {
    pub distances: Vec<f64>,
}

/// Cosine of every sampled word to `anchor`, in sample order.
pub fn anchor_profile(
    model: &EmbeddingModel,
    anchor: &[f64],
    sample: &AnchorSample,
) -> Result<AnchorProfile, InferenceError> {
    let distances = sample
        .words
        .iter()
        .map(|w| {
            let v = model.vector(w).ok_or_else(|| InferenceError::MissingAnchor {
                word: w.clone(),
                model: model.corpus_id.clone(),
            })?;
            Ok(cosine(v, anchor)?)
        })
        .collect::<Result<Vec<_>, InferenceError>>()?;
    Ok(AnchorProfile { distances })
}

/// Elementwise `profile(a) - profile(b)`.
pub fn anchored_difference(
    model: &EmbeddingModel,
    concept_a: &ConceptVector,
    concept_b: &ConceptVector,
    sample: &AnchorSample,
) -> Result<AnchorProfile, InferenceError> {
    let a = anchor_profile(model, &concept_a.vector, sample)?;
    let b = anchor_profile(model, &concept_b.vector, sample)?;
    Ok(AnchorProfile {
        distances: a
            .distances
            .iter()
            .zip(&b.distances)
            .map(|(x, y)| x - y)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsComparison {
    /// Supremum distance between the two empirical CDFs.
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub sample_a: Vec<f64>,
    pub sample_b: Vec<f64>,
}

fn sorted(values: &[f64]) -> Result<Vec<f64>, InferenceError> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(InferenceError::NotANumber);
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// KS distance of two sorted samples, evaluated at every distinct pooled value.
fn ks_distance_sorted(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0f64;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

pub fn ks_statistic(x: &[f64], y: &[f64]) -> Result<f64, InferenceError> {
    if x.is_empty() || y.is_empty() {
        return Err(InferenceError::SampleTooSmall(x.len(), y.len()));
    }
    Ok(ks_distance_sorted(&sorted(x)?, &sorted(y)?))
}

/// Complementary Kolmogorov distribution `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} e^{-2 j² λ²}`.
///
/// For λ < 1.18 the alternating series converges slowly, so the equivalent
/// theta-function form `1 - √(2π)/λ Σ_{k odd} e^{-k² π² / (8 λ²)}` is used.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        let mut k = 1.0f64;
        loop {
            let term = (c * k * k).exp();
            sum += term;
            if term < 1e-17 {
                break;
            }
            k += 2.0;
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1.. {
            let j = j as f64;
            let term = (-2.0 * j * j * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-12 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Asymptotic p-value with the usual small-sample correction of λ.
pub fn ks_p_value(statistic: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let root = ne.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * statistic)
}

pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsComparison, InferenceError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(InferenceError::SampleTooSmall(x.len(), y.len()));
    }
    let statistic = ks_distance_sorted(&sorted(x)?, &sorted(y)?);
    Ok(KsComparison {
        statistic,
        p_value: ks_p_value(statistic, x.len(), y.len()),
        n1: x.len(),
        n2: y.len(),
        sample_a: x.to_vec(),
        sample_b: y.to_vec(),
    })
}

/// Permutation p-value for the KS distance: the share of random relabellings
/// (plus the observed one) whose distance reaches the observed distance.
pub fn ks_permutation_p_value(
    x: &[f64],
    y: &[f64],
    iterations: usize,
    seed: u64,
) -> Result<f64, InferenceError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(InferenceError::SampleTooSmall(x.len(), y.len()));
    }
    let observed = ks_statistic(x, y)?;
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..iterations {
        pooled.shuffle(&mut rng);
        let (a, b) = pooled.split_at(x.len());
        if ks_statistic(a, b)? >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (iterations + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PValueMode {
    #[default]
    Asymptotic,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub p_value: PValueMode,
    pub permutations: usize,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            n: 1000,
            seed: 0,
            alpha: 0.05,
            p_value: PValueMode::Asymptotic,
            permutations: 2000,
        }
    }
}

/// One anchored KS comparison of a concept pair between two corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredKs {
    pub concept_a: String,
    pub concept_b: String,
    pub corpus_1: String,
    pub corpus_2: String,
    /// Plain cosine between the two concept vectors inside each corpus.
    pub similarity_1: f64,
    pub similarity_2: f64,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub p_value_mode: PValueMode,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub profile_1: Vec<f64>,
    pub profile_2: Vec<f64>,
}

/// Runs the anchored comparison of `(a, b)` between two models. One anchor
/// sample, drawn from their shared vocabulary, serves both corpora.
pub fn anchored_ks(
    model_1: &EmbeddingModel,
    concepts_1: (&ConceptVector, &ConceptVector),
    model_2: &EmbeddingModel,
    concepts_2: (&ConceptVector, &ConceptVector),
    cfg: &AnchorConfig,
) -> Result<AnchoredKs, InferenceError> {
    let common = common_vocabulary(model_1, model_2);
    let sample = sample_anchors(&common, cfg.n, cfg.seed)?;
    let (d1, d2) = rayon::join(
        || anchored_difference(model_1, concepts_1.0, concepts_1.1, &sample),
        || anchored_difference(model_2, concepts_2.0, concepts_2.1, &sample),
    );
    let (d1, d2) = (d1?, d2?);
    let ks = ks_two_sample(&d1.distances, &d2.distances)?;
    let p_value = match cfg.p_value {
        PValueMode::Asymptotic => ks.p_value,
        PValueMode::Permutation => {
            ks_permutation_p_value(&d1.distances, &d2.distances, cfg.permutations, cfg.seed)?
        }
    };
    Ok(AnchoredKs {
        concept_a: concepts_1.0.spec.name.clone(),
        concept_b: concepts_1.1.spec.name.clone(),
        corpus_1: model_1.corpus_id.clone(),
        corpus_2: model_2.corpus_id.clone(),
        similarity_1: cosine(&concepts_1.0.vector, &concepts_1.1.vector)?,
        similarity_2: cosine(&concepts_2.0.vector, &concepts_2.1.vector)?,
        n: cfg.n,
        seed: cfg.seed,
        alpha: cfg.alpha,
        p_value_mode: cfg.p_value,
        statistic: ks.statistic,
        p_value,
        significant: p_value < cfg.alpha,
        profile_1: d1.distances,
        profile_2: d2.distances,
    })
}
