//! Staged, cached execution of the full comparison workflow.
//!
//! Stages run in the order ingest → train → concepts → nn → ks → score →
//! bayes → report. Each stage stores its artifacts under
//! `<out>/cache/<stage>/` next to a key file hashing its configuration,
//! input files and upstream keys.

mod config;
mod export;
mod report;
mod stages;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    validate, Comparison, ConceptSection, CorpusSource, ExportSection, NnSection, PipelineConfig,
    PretrainedSection, SentimentSection, SubcorpusSplit,
};
pub use export::{export_distributions, DistributionExport, SeriesDistribution, KDE_POINTS};
pub use report::{stage_summary, DistributionRef, RunReport};
pub use stages::{
    export_stored_scores, run, seeds, write_distributions, BayesArtifact, BayesRecord, CorpusConcepts, CorpusScores,
    LabeledStats, ModelSummary, NnTable, RunOptions, RunOutcome, TrainArtifact,
};

use crate::bayes::BayesError;
use crate::concepts::ConceptError;
use crate::corpus::CorpusError;
use crate::embeddings::EmbeddingError;
use crate::inference::InferenceError;
use crate::sentiment::SentimentError;

pub const TOOLKIT_VERSION: &str = concat!("dehum ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("configuration has {} problem(s):\n  - {}", .0.len(), .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("missing artifact {path}; run the `{stage}` stage first")]
    MissingArtifact { stage: Stage, path: String },
    #[error("empty score series for corpus `{0}`")]
    EmptySeries(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Concept(#[from] ConceptError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Train,
    Concepts,
    Nn,
    Ks,
    Score,
    Bayes,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Train,
        Stage::Concepts,
        Stage::Nn,
        Stage::Ks,
        Stage::Score,
        Stage::Bayes,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Concepts => "concepts",
            Stage::Nn => "nn",
            Stage::Ks => "ks",
            Stage::Score => "score",
            Stage::Bayes => "bayes",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Train => &[Stage::Ingest],
            Stage::Concepts => &[Stage::Train],
            Stage::Nn => &[Stage::Train, Stage::Concepts],
            Stage::Ks => &[Stage::Train, Stage::Concepts],
            Stage::Score => &[Stage::Ingest, Stage::Nn],
            Stage::Bayes => &[Stage::Score],
            Stage::Report => &[
                Stage::Ingest,
                Stage::Train,
                Stage::Concepts,
                Stage::Nn,
                Stage::Ks,
                Stage::Score,
                Stage::Bayes,
            ],
        }
    }

    /// Every stage needed to produce this one, itself included, in run order.
    pub fn closure(self) -> Vec<Stage> {
        let mut needed = vec![self];
        let mut i = 0;
        while i < needed.len() {
            for &d in needed[i].deps() {
                if !needed.contains(&d) {
                    needed.push(d);
                }
            }
            i += 1;
        }
        needed.sort();
        needed
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
                format!("unknown stage `{s}` (expected one of {})", names.join(", "))
            })
    }
}
