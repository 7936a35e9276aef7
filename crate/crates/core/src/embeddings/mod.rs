//! Static lemma embeddings: storage, text-format I/O, pretrained collapse and
//! skip-gram training with negative sampling.

mod pretrained;
mod sgns;
mod textfmt;

pub use pretrained::{collapse_pretrained, read_form_lemma_map, CollapseReport, PretrainedInit};
pub use sgns::{initial_model, train, TrainConfig, DEFAULT_DIM};
pub use textfmt::{read_text_vectors, write_text_vectors, TextVectors};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("vector file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    Dimension {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("no input vectors")]
    EmptyInput,
    #[error("no training sentences")]
    NoSentences,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("non-finite value in vector for `{0}`")]
    NonFinite(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model metadata: {0}")]
    Meta(#[from] serde_json::Error),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmbeddingError + '_ {
    move |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A trained (or loaded) lemma embedding space.
///
/// Rows are stored contiguously in vocabulary order. Frequencies are the
/// training-corpus counts and cover exactly the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub corpus_id: String,
    dim: usize,
    lemmas: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
    frequencies: Vec<u64>,
    /// Configuration the model was trained with, seed included.
    pub config: Option<TrainConfig>,
}

/// Sidecar metadata stored next to the text vectors.
#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    corpus_id: String,
    config: Option<TrainConfig>,
    frequencies: BTreeMap<String, u64>,
}

impl EmbeddingModel {
    pub fn from_parts(
        corpus_id: impl Into<String>,
        dim: usize,
        rows: Vec<(String, Vec<f32>, u64)>,
        config: Option<TrainConfig>,
    ) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::Config("dimension must be positive".into()));
        }
        let mut lemmas = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        let mut vectors = Vec::with_capacity(rows.len() * dim);
        let mut frequencies = Vec::with_capacity(rows.len());
        for (lemma, vector, freq) in rows {
            if vector.len() != dim {
                return Err(EmbeddingError::Dimension {
                    expected: dim,
                    found: vector.len(),
                    context: lemma,
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(lemma));
            }
            if freq == 0 {
                return Err(EmbeddingError::Config(format!("lemma `{lemma}` has zero frequency")));
            }
            if index.insert(lemma.clone(), lemmas.len()).is_some() {
                return Err(EmbeddingError::Config(format!("duplicate lemma `{lemma}`")));
            }
            lemmas.push(lemma);
            vectors.extend_from_slice(&vector);
            frequencies.push(freq);
        }
        Ok(EmbeddingModel {
            corpus_id: corpus_id.into(),
            dim,
            lemmas,
            index,
            vectors,
            frequencies,
            config,
        })
    }

    pub(crate) fn from_matrix(
        corpus_id: String,
        dim: usize,
        lemmas: Vec<String>,
        vectors: Vec<f32>,
        frequencies: Vec<u64>,
        config: Option<TrainConfig>,
    ) -> Self {
        debug_assert_eq!(vectors.len(), lemmas.len() * dim);
        let index = lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        EmbeddingModel {
            corpus_id,
            dim,
            lemmas,
            index,
            vectors,
            frequencies,
            config,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.index.contains_key(lemma)
    }

    pub fn vector(&self, lemma: &str) -> Option<&[f32]> {
        self.index.get(lemma).map(|&i| self.row(i))
    }

    pub fn frequency(&self, lemma: &str) -> Option<u64> {
        self.index.get(lemma).map(|&i| self.frequencies[i])
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterates `(lemma, vector, frequency)` in vocabulary order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32], u64)> {
        self.lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), self.row(i), self.frequencies[i]))
    }

    /// Writes `<stem>.vec` (text vectors, lossless) and `<stem>.meta.json`.
    pub fn save(&self, vec_path: &Path) -> Result<(), EmbeddingError> {
        let rows: Vec<(&str, &[f32])> = self.iter().map(|(l, v, _)| (l, v)).collect();
        write_text_vectors(vec_path, self.dim, &rows, None)?;
        let meta = ModelMeta {
            corpus_id: self.corpus_id.clone(),
            config: self.config.clone(),
            frequencies: self.iter().map(|(l, _, f)| (l.to_string(), f)).collect(),
        };
        let meta_path = meta_path(vec_path);
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(&meta_path, json).map_err(io_err(&meta_path))?;
        Ok(())
    }

    /// Loads a model saved by [`EmbeddingModel::save`]. Without a metadata
    /// sidecar every frequency defaults to 1.
    pub fn load(vec_path: &Path) -> Result<Self, EmbeddingError> {
        let text = read_text_vectors(vec_path)?;
        let meta_path = meta_path(vec_path);
        let meta: Option<ModelMeta> = if meta_path.exists() {
            let raw = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
            Some(serde_json::from_str(&raw)?)
        } else {
            None
        };
        let corpus_id = meta
            .as_ref()
            .map(|m| m.corpus_id.clone())
            .unwrap_or_else(|| vec_path.display().to_string());
        let rows = text
            .rows
            .into_iter()
            .map(|(lemma, v)| {
                let freq = meta
                    .as_ref()
                    .and_then(|m| m.frequencies.get(&lemma).copied())
                    .unwrap_or(1);
                (lemma, v, freq)
            })
            .collect();
        EmbeddingModel::from_parts(corpus_id, text.dim, rows, meta.and_then(|m| m.config))
    }
}

fn meta_path(vec_path: &Path) -> std::path::PathBuf {
    vec_path.with_extension("meta.json")
}

/// Lemmas present in both models.
pub fn common_vocabulary(a: &EmbeddingModel, b: &EmbeddingModel) -> BTreeSet<String> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .lemmas()
        .iter()
        .filter(|l| large.contains(l))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(lemmas: &[&str]) -> EmbeddingModel {
        let rows = lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), vec![i as f32, 1.0], 1))
            .collect();
        EmbeddingModel::from_parts("m", 2, rows, None).unwrap()
    }

    #[test]
    fn vector_lookup() {
        let m = model(&["a", "b"]);
        assert_eq!(m.vector("b"), Some(&[1.0f32, 1.0][..]));
        assert_eq!(m.vector("zzz"), None);
        assert_eq!(m.frequency("a"), Some(1));
    }

    #[test]
    fn common_vocabulary_is_intersection() {
        let a = model(&["a", "b", "c"]);
        let b = model(&["b", "c", "d"]);
        let common: Vec<_> = common_vocabulary(&a, &b).into_iter().collect();
        assert_eq!(common, vec!["b", "c"]);
        assert_eq!(common_vocabulary(&a, &a).len(), 3);
        assert!(common_vocabulary(&a, &model(&["x"])).is_empty());
    }

    #[test]
    fn rejects_bad_rows() {
        let bad = vec![("a".to_string(), vec![1.0, f32::NAN], 1)];
        assert!(matches!(
            EmbeddingModel::from_parts("m", 2, bad, None),
            Err(EmbeddingError::NonFinite(_))
        ));
        let short = vec![("a".to_string(), vec![1.0], 1)];
        assert!(matches!(
            EmbeddingModel::from_parts("m", 2, short, None),
            Err(EmbeddingError::Dimension { .. })
        ));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.vec");
        let rows = vec![
            ("a".to_string(), vec![0.123_456_79, -1.0e-7], 3),
            ("č".to_string(), vec![1.0 / 3.0, 2.5e6], 1),
        ];
        let m = EmbeddingModel::from_parts("corp", 2, rows, Some(TrainConfig::default())).unwrap();
        m.save(&path).unwrap();
        let back = EmbeddingModel::load(&path).unwrap();
        assert_eq!(back, m);
    }
}
