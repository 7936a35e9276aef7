use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, EmbeddingError};
use crate::corpus::normalize_lemma;

/// Pretrained vectors collapsed from word forms onto lemmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainedInit {
    pub dim: usize,
    pub lemma_vectors: BTreeMap<String, Vec<f32>>,
    /// Number of word forms averaged into each lemma vector.
    pub collapse_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub forms_in: usize,
    pub forms_dropped: usize,
    pub lemmas_out: usize,
}

impl CollapseReport {
    /// Fraction of the input vocabulary removed by the collapse.
    pub fn reduction(&self) -> f64 {
        if self.forms_in == 0 {
            0.0
        } else {
            1.0 - self.lemmas_out as f64 / self.forms_in as f64
        }
    }

    pub fn drop_rate(&self) -> f64 {
        if self.forms_in == 0 {
            0.0
        } else {
            self.forms_dropped as f64 / self.forms_in as f64
        }
    }
}

/// Averages the vectors of all word forms sharing a lemma.
///
/// Forms without a mapping are dropped and counted in the report.
pub fn collapse_pretrained(
    forms: &[(String, Vec<f32>)],
    form_to_lemma: &HashMap<String, String>,
) -> Result<(PretrainedInit, CollapseReport), EmbeddingError> {
    let dim = forms.first().ok_or(EmbeddingError::EmptyInput)?.1.len();
    if dim == 0 {
        return Err(EmbeddingError::EmptyInput);
    }
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mut dropped = 0;
    for (form, vector) in forms {
        if vector.len() != dim {
            return Err(EmbeddingError::Dimension {
                expected: dim,
                found: vector.len(),
                context: form.clone(),
            });
        }
        let Some(lemma) = form_to_lemma.get(form) else {
            dropped += 1;
            continue;
        };
        let entry = sums
            .entry(normalize_lemma(lemma))
            .or_insert_with(|| (vec![0.0; dim], 0));
        for (acc, &v) in entry.0.iter_mut().zip(vector) {
            *acc += f64::from(v);
        }
        entry.1 += 1;
    }
    if dropped > 0 {
        log::info!(
            "pretrained collapse: {dropped} of {} forms had no lemma mapping",
            forms.len()
        );
    }

    let mut lemma_vectors = BTreeMap::new();
    let mut collapse_counts = BTreeMap::new();
    for (lemma, (sum, count)) in sums {
        let mean = sum.iter().map(|s| (s / count as f64) as f32).collect();
        lemma_vectors.insert(lemma.clone(), mean);
        collapse_counts.insert(lemma, count);
    }
    let report = CollapseReport {
        forms_in: forms.len(),
        forms_dropped: dropped,
        lemmas_out: lemma_vectors.len(),
    };
    Ok((
        PretrainedInit {
            dim,
            lemma_vectors,
            collapse_counts,
        },
        report,
    ))
}

/// Reads a `form<TAB>lemma` mapping, one pair per line. Later lines win.
pub fn read_form_lemma_map(path: &Path) -> Result<HashMap<String, String>, EmbeddingError> {
    let raw = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut map = HashMap::new();
    for (idx, line) in raw.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (form, lemma) = line.split_once('\t').ok_or(EmbeddingError::Format {
            line: idx + 1,
            message: "expected `form<TAB>lemma`".into(),
        })?;
        map.insert(form.to_string(), lemma.trim().to_string());
    }
    Ok(map)
}
