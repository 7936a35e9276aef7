//! Skip-gram with negative sampling.
//!
//! Single-worker training is a pure function of (sentences, init, config):
//! one ChaCha stream drives the random window shrink and the negative draws,
//! and sentences are visited in input order. With `workers > 1` each epoch
//! trains disjoint sentence shards on copies of the parameters and averages
//! the copies afterwards; bit-identical output is only promised for one worker.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingModel, PretrainedInit};

pub const DEFAULT_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub min_count: u64,
    /// Maximum context distance on each side.
    pub window: usize,
    pub negatives: usize,
    /// Embedding size when training without a pretrained init. With an
    /// init, must be absent or equal to the init's size.
    pub dim: Option<usize>,
    pub seed: u64,
    pub workers: usize,
    pub alpha: f64,
    pub min_alpha: f64,
    /// Exponent applied to unigram counts for the noise distribution.
    pub noise_exponent: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            min_count: 1,
            window: 5,
            negatives: 5,
            dim: None,
            seed: 1,
            workers: 1,
            alpha: 0.025,
            min_alpha: 0.0001,
            noise_exponent: 0.75,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let fail = |m: &str| Err(EmbeddingError::Config(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        if self.dim == Some(0) {
            return fail("dim must be positive");
        }
        if !(self.alpha > 0.0 && self.min_alpha >= 0.0 && self.min_alpha <= self.alpha) {
            return fail("need alpha > 0 and 0 <= min_alpha <= alpha");
        }
        Ok(())
    }
}

struct Vocab {
    lemmas: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

fn build_vocab(sentences: &[Vec<String>], min_count: u64) -> Vocab {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for lemma in sentences.iter().flatten() {
        *counts.entry(lemma.as_str()).or_insert(0) += 1;
    }
    let mut entries: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let lemmas: Vec<String> = entries.iter().map(|(l, _)| l.to_string()).collect();
    let index = lemmas
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i as u32))
        .collect();
    Vocab {
        lemmas,
        counts: entries.iter().map(|&(_, c)| c).collect(),
        index,
    }
}

/// Parameters of a skip-gram model under training.
#[derive(Clone)]
struct Params {
    dim: usize,
    input: Vec<f32>,
    output: Vec<f32>,
}

struct Schedule {
    alpha: f64,
    min_alpha: f64,
    total: u64,
}

impl Schedule {
    fn rate(&self, processed: u64) -> f32 {
        let progress = processed as f64 / self.total.max(1) as f64;
        (self.alpha - (self.alpha - self.min_alpha) * progress).max(self.min_alpha) as f32
    }
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut lanes = [0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            lanes[l] += x[l] * y[l];
        }
    }
    lanes.iter().sum::<f32>() + tail
}

/// Unigram table for O(1) negative sampling: each index appears in
/// proportion to its weight.
struct NoiseTable {
    table: Vec<u32>,
}

impl NoiseTable {
    fn new(weights: &[f64]) -> Result<Self, EmbeddingError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(EmbeddingError::Config("noise distribution has no mass".into()));
        }
        let size = (weights.len() * 100).clamp(1 << 16, 1 << 24);
        let mut table = Vec::with_capacity(size);
        let mut cumulative = 0.0;
        let mut i = 0usize;
        for slot in 0..size {
            while i + 1 < weights.len() && (slot as f64 + 0.5) / size as f64 > (cumulative + weights[i]) / total {
                cumulative += weights[i];
                i += 1;
            }
            table.push(i as u32);
        }
        Ok(NoiseTable { table })
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.table[rng.random_range(0..self.table.len())] as usize
    }
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Params {
    /// One pass over `sentences`; `processed` is the global token position of
    /// the first token, used for the learning-rate schedule.
    #[allow(clippy::too_many_arguments)]
    fn train_pass(
        &mut self,
        sentences: &[Vec<u32>],
        window: usize,
        negatives: usize,
        noise: &NoiseTable,
        schedule: &Schedule,
        mut processed: u64,
        rng: &mut ChaCha8Rng,
    ) {
        let dim = self.dim;
        let mut grad = vec![0f32; dim];
        for sentence in sentences {
            for (i, &center) in sentence.iter().enumerate() {
                let lr = schedule.rate(processed);
                processed += 1;
                let span = window - rng.random_range(0..window);
                let lo = i.saturating_sub(span);
                let hi = (i + span + 1).min(sentence.len());
                for (j, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let c = center as usize;
                    let in_row = &mut self.input[c * dim..(c + 1) * dim];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for d in 0..=negatives {
                        let (target, label) = if d == 0 {
                            (context as usize, 1.0f32)
                        } else {
                            let t = noise.sample(rng);
                            if t == context as usize {
                                continue;
                            }
                            (t, 0.0f32)
                        };
                        let out_row = &mut self.output[target * dim..(target + 1) * dim];
                        let g = (label - sigmoid(dot(in_row, out_row))) * lr;
                        for k in 0..dim {
                            grad[k] += g * out_row[k];
                            out_row[k] += g * in_row[k];
                        }
                    }
                    for (x, g) in in_row.iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }
}

struct Prepared {
    vocab: Vocab,
    dim: usize,
    params: Params,
    encoded: Vec<Vec<u32>>,
    config: TrainConfig,
}

fn prepare(
    sentences: &[Vec<String>],
    init: Option<&PretrainedInit>,
    cfg: &TrainConfig,
) -> Result<Prepared, EmbeddingError> {
    cfg.validate()?;
    if sentences.iter().all(Vec::is_empty) {
        return Err(EmbeddingError::NoSentences);
    }
    let dim = match (init, cfg.dim) {
        (Some(init), Some(d)) if d != init.dim => {
            return Err(EmbeddingError::Dimension {
                expected: init.dim,
                found: d,
                context: "configured dim differs from pretrained init".into(),
            })
        }
        (Some(init), _) => init.dim,
        (None, Some(d)) => d,
        (None, None) => DEFAULT_DIM,
    };
    let vocab = build_vocab(sentences, cfg.min_count);
    if vocab.lemmas.is_empty() {
        return Err(EmbeddingError::NoSentences);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f32;
    let mut input = Vec::with_capacity(vocab.lemmas.len() * dim);
    for lemma in &vocab.lemmas {
        match init.and_then(|i| i.lemma_vectors.get(lemma)) {
            Some(v) => input.extend_from_slice(v),
            None => input.extend((0..dim).map(|_| rng.random_range(-bound..=bound))),
        }
    }
    let output = vec![0f32; vocab.lemmas.len() * dim];

    let encoded = sentences
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|l| vocab.index.get(l).copied())
                .collect::<Vec<u32>>()
        })
        .filter(|s| s.len() > 1)
        .collect();

    let config = TrainConfig {
        dim: Some(dim),
        ..cfg.clone()
    };
    Ok(Prepared {
        vocab,
        dim,
        params: Params { dim, input, output },
        encoded,
        config,
    })
}

impl Prepared {
    fn into_model(self, corpus_id: &str) -> Result<EmbeddingModel, EmbeddingError> {
        for (i, lemma) in self.vocab.lemmas.iter().enumerate() {
            let row = &self.params.input[i * self.dim..(i + 1) * self.dim];
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(lemma.clone()));
            }
        }
        Ok(EmbeddingModel::from_matrix(
            corpus_id.to_string(),
            self.dim,
            self.vocab.lemmas,
            self.params.input,
            self.vocab.counts,
            Some(self.config),
        ))
    }
}

/// The model as it stands before the first update: vocabulary built,
/// pretrained rows copied, remaining rows randomly initialised.
pub fn initial_model(
    corpus_id: &str,
    sentences: &[Vec<String>],
    init: Option<&PretrainedInit>,
    cfg: &TrainConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    prepare(sentences, init, cfg)?.into_model(corpus_id)
}

pub fn train(
    corpus_id: &str,
    sentences: &[Vec<String>],
    init: Option<&PretrainedInit>,
    cfg: &TrainConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    let mut prep = prepare(sentences, init, cfg)?;
    let weights: Vec<f64> = prep
        .vocab
        .counts
        .iter()
        .map(|&c| (c as f64).powf(cfg.noise_exponent))
        .collect();
    let noise = NoiseTable::new(&weights)?;

    let tokens_per_epoch: u64 = prep.encoded.iter().map(|s| s.len() as u64).sum();
    let schedule = Schedule {
        alpha: cfg.alpha,
        min_alpha: cfg.min_alpha,
        total: tokens_per_epoch * cfg.epochs as u64,
    };
    // Stream 0 seeded the random init; training draws from its own stream.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let workers = cfg.workers.min(prep.encoded.len().max(1));
    for epoch in 0..cfg.epochs {
        let start = tokens_per_epoch * epoch as u64;
        if workers <= 1 {
            prep.params.train_pass(
                &prep.encoded,
                cfg.window,
                cfg.negatives,
                &noise,
                &schedule,
                start,
                &mut rng,
            );
            continue;
        }
        let shard_len = prep.encoded.len().div_ceil(workers);
        let shards: Vec<&[Vec<u32>]> = prep.encoded.chunks(shard_len).collect();
        let mut offsets = Vec::with_capacity(shards.len());
        let mut acc = start;
        for shard in &shards {
            offsets.push(acc);
            acc += shard.iter().map(|s| s.len() as u64).sum::<u64>();
        }
        let base = &prep.params;
        let copies: Vec<Params> = shards
            .par_iter()
            .zip(offsets.par_iter())
            .enumerate()
            .map(|(w, (shard, &offset))| {
                let mut local = base.clone();
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(2 + (epoch * workers + w) as u64);
                local.train_pass(shard, cfg.window, cfg.negatives, &noise, &schedule, offset, &mut rng);
                local
            })
            .collect();
        let scale = 1.0 / copies.len() as f32;
        for (target, pick) in [
            (&mut prep.params.input, 0usize),
            (&mut prep.params.output, 1usize),
        ] {
            for (k, slot) in target.iter_mut().enumerate() {
                let sum: f32 = copies
                    .iter()
                    .map(|c| if pick == 0 { c.input[k] } else { c.output[k] })
                    .sum();
                *slot = sum * scale;
            }
        }
    }
    prep.into_model(corpus_id)
}
