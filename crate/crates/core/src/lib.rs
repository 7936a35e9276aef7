//! Corpus-comparison toolkit for measuring shifts in how a target group is
//! talked about: per-corpus lemma embeddings, concept vectors, anchored
//! two-sample Kolmogorov–Smirnov inference across unaligned spaces,
//! lexicon valence/arousal/dominance scoring and Bayesian group comparison.

pub mod corpus;
pub mod embeddings;
pub mod concepts;
pub mod inference;
pub mod sentiment;
pub mod bayes;
pub mod seed;
pub mod synth;
pub mod pipeline;
