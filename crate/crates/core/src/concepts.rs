//! Concept vectors, cosine similarity and root-filtered nearest neighbours.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::normalize_lemma;
use crate::embeddings::EmbeddingModel;

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("concept file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("concept `{0}` has no terms")]
    NoTerms(String),
    #[error("concept `{name}` lists `{term}` twice")]
    DuplicateTerm { name: String, term: String },
    #[error("none of the terms of concept `{name}` is in the vocabulary of `{model}`")]
    AllTermsMissing { name: String, model: String },
    #[error("cosine of a zero vector")]
    ZeroVector,
    #[error("vector lengths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A named term list plus the lemma prefixes treated as sharing its root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub name: String,
    pub terms: Vec<String>,
    pub exclusion_roots: Vec<String>,
}

const MIGRANT: &str = include_str!("../data/concepts/migrant.txt");
const MORAL_DISGUST: &str = include_str!("../data/concepts/moral_disgust.txt");
const VERMIN: &str = include_str!("../data/concepts/vermin.txt");

impl ConceptSpec {
    pub fn new(
        name: impl Into<String>,
        terms: impl IntoIterator<Item = impl AsRef<str>>,
        exclusion_roots: impl IntoIterator<Item = impl AsRef<str>>,
    ) -> Result<Self, ConceptError> {
        let name = name.into();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in terms {
            let t = normalize_lemma(t.as_ref().trim());
            if t.is_empty() {
                continue;
            }
            if !seen.insert(t.clone()) {
                return Err(ConceptError::DuplicateTerm { name, term: t });
            }
            out.push(t);
        }
        if out.is_empty() {
            return Err(ConceptError::NoTerms(name));
        }
        let exclusion_roots = exclusion_roots
            .into_iter()
            .map(|r| normalize_lemma(r.as_ref().trim()))
            .filter(|r| !r.is_empty())
            .collect();
        Ok(ConceptSpec {
            name,
            terms: out,
            exclusion_roots,
        })
    }

    /// Parses the concept file format:
    ///
    /// ```text
    /// # comment
    /// name = migrant
    /// [terms]
    /// migrant
    /// begunec
    /// [exclusion_roots]
    /// begun
    /// ```
    pub fn parse(text: &str) -> Result<Self, ConceptError> {
        enum Section {
            Header,
            Terms,
            Roots,
        }
        let mut section = Section::Header;
        let mut name = None;
        let mut terms = Vec::new();
        let mut roots = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[terms]" => section = Section::Terms,
                "[exclusion_roots]" => section = Section::Roots,
                _ if line.starts_with('[') => {
                    return Err(ConceptError::Parse {
                        line: idx + 1,
                        message: format!("unknown section {line}"),
                    })
                }
                _ => match section {
                    Section::Header => {
                        let value = line
                            .strip_prefix("name")
                            .and_then(|r| r.trim_start().strip_prefix('='))
                            .ok_or_else(|| ConceptError::Parse {
                                line: idx + 1,
                                message: "expected `name = ...` before the first section".into(),
                            })?;
                        name = Some(value.trim().to_string());
                    }
                    Section::Terms => terms.push(line.to_string()),
                    Section::Roots => roots.push(line.to_string()),
                },
            }
        }
        let name = name.filter(|n| !n.is_empty()).ok_or(ConceptError::Parse {
            line: 1,
            message: "missing concept name".into(),
        })?;
        ConceptSpec::new(name, terms, roots)
    }

    pub fn load(path: &Path) -> Result<Self, ConceptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConceptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ConceptSpec::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name = {}\n\n[terms]\n", self.name);
        for t in &self.terms {
            let _ = writeln!(out, "{t}");
        }
        if !self.exclusion_roots.is_empty() {
            out.push_str("\n[exclusion_roots]\n");
            for r in &self.exclusion_roots {
                let _ = writeln!(out, "{r}");
            }
        }
        out
    }

    /// Shipped migrant term list (MV).
    pub fn migrant() -> Self {
        ConceptSpec::parse(MIGRANT).expect("bundled concept file parses")
    }

    /// Shipped moral disgust term list (DV).
    pub fn moral_disgust() -> Self {
        ConceptSpec::parse(MORAL_DISGUST).expect("bundled concept file parses")
    }

    /// Shipped vermin term list (VV).
    pub fn vermin() -> Self {
        ConceptSpec::parse(VERMIN).expect("bundled concept file parses")
    }
}

/// Frequency-weighted mean of the in-vocabulary term vectors of a concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub spec: ConceptSpec,
    pub vector: Vec<f64>,
    pub used_terms: BTreeMap<String, f64>,
    pub missing_terms: BTreeSet<String>,
}

pub fn build_concept(model: &EmbeddingModel, spec: &ConceptSpec) -> Result<ConceptVector, ConceptError> {
    let mut counts = BTreeMap::new();
    let mut missing_terms = BTreeSet::new();
    for term in &spec.terms {
        match model.frequency(term) {
            Some(f) => {
                counts.insert(term.clone(), f);
            }
            None => {
                missing_terms.insert(term.clone());
            }
        }
    }
    if counts.is_empty() {
        return Err(ConceptError::AllTermsMissing {
            name: spec.name.clone(),
            model: model.corpus_id.clone(),
        });
    }
    let total: u64 = counts.values().sum();
    let mut vector = vec![0f64; model.dim()];
    let mut used_terms = BTreeMap::new();
    for (term, count) in counts {
        let weight = count as f64 / total as f64;
        let v = model.vector(&term).expect("frequency implies vector");
        for (acc, &x) in vector.iter_mut().zip(v) {
            *acc += weight * f64::from(x);
        }
        used_terms.insert(term, weight);
    }
    Ok(ConceptVector {
        spec: spec.clone(),
        vector,
        used_terms,
        missing_terms,
    })
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine<A, B>(u: &[A], v: &[B]) -> Result<f64, ConceptError>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    if u.len() != v.len() {
        return Err(ConceptError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(ConceptError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbour {
    pub lemma: String,
    pub cosine: f64,
}

/// Descending cosine, ties broken by ascending lemma.
pub fn neighbour_order(a: &Neighbour, b: &Neighbour) -> Ordering {
    b.cosine
        .total_cmp(&a.cosine)
        .then_with(|| a.lemma.cmp(&b.lemma))
}

/// Top-`k` vocabulary lemmas by cosine to `query`, skipping any lemma that
/// starts with an exclusion root. Zero rows are skipped.
pub fn nearest_neighbours<S: AsRef<str>>(
    model: &EmbeddingModel,
    query: &[f64],
    k: usize,
    exclusion_roots: &[S],
) -> Result<Vec<Neighbour>, ConceptError> {
    if query.len() != model.dim() {
        return Err(ConceptError::DimensionMismatch(query.len(), model.dim()));
    }
    let qnorm = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    if qnorm == 0.0 {
        return Err(ConceptError::ZeroVector);
    }
    let roots: Vec<String> = exclusion_roots
        .iter()
        .map(|r| normalize_lemma(r.as_ref()))
        .filter(|r| !r.is_empty())
        .collect();
    let mut candidates: Vec<Neighbour> = model
        .iter()
        .filter(|(lemma, _, _)| !roots.iter().any(|r| lemma.starts_with(r.as_str())))
        .filter_map(|(lemma, v, _)| {
            cosine(query, v).ok().map(|c| Neighbour {
                lemma: lemma.to_string(),
                cosine: c,
            })
        })
        .collect();
    if k == 0 {
        return Ok(Vec::new());
    }
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, neighbour_order);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(neighbour_order);
    Ok(candidates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[(&str, &[f32], u64)]) -> EmbeddingModel {
        let dim = rows[0].1.len();
        EmbeddingModel::from_parts(
            "toy",
            dim,
            rows.iter()
                .map(|(l, v, f)| (l.to_string(), v.to_vec(), *f))
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn bundled_specs() {
        let mv = ConceptSpec::migrant();
        assert_eq!(mv.terms, ["migrant", "imigrant", "begunec", "azilant", "prebežnik", "pribežnik"]);
        assert!(mv.exclusion_roots.contains(&"migrant".to_string()));
        assert_eq!(ConceptSpec::moral_disgust().terms.len(), 70);
        assert_eq!(ConceptSpec::vermin().terms.len(), 23);
        let again = ConceptSpec::parse(&mv.to_text()).unwrap();
        assert_eq!(again, mv);
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(
            ConceptSpec::new("x", ["a", "A"], [""; 0]),
            Err(ConceptError::DuplicateTerm { .. })
        ));
        assert!(matches!(
            ConceptSpec::new("x", [""; 0], [""; 0]),
            Err(ConceptError::NoTerms(_))
        ));
        assert!(matches!(
            ConceptSpec::parse("[terms]\na\n"),
            Err(ConceptError::Parse { .. })
        ));
        assert!(matches!(
            ConceptSpec::parse("name = x\n[other]\n"),
            Err(ConceptError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn single_term_concept_is_that_vector() {
        let m = model(&[("a", &[0.25, -2.0], 7), ("b", &[1.0, 1.0], 1)]);
        let spec = ConceptSpec::new("c", ["a"], [""; 0]).unwrap();
        let c = build_concept(&m, &spec).unwrap();
        assert_eq!(c.vector, vec![0.25, -2.0]);
        assert_eq!(c.used_terms["a"], 1.0);
    }

    #[test]
    fn weighted_mean_by_frequency() {
        let m = model(&[("a", &[1.0, 0.0], 3), ("b", &[0.0, 1.0], 1)]);
        let spec = ConceptSpec::new("c", ["a", "b"], [""; 0]).unwrap();
        let c = build_concept(&m, &spec).unwrap();
        assert_eq!(c.vector, vec![0.75, 0.25]);
    }

    #[test]
    fn missing_terms_renormalise() {
        let m = model(&[("a", &[2.0, 0.0], 1), ("b", &[0.0, 2.0], 1)]);
        let spec = ConceptSpec::new("c", ["a", "zzz", "b"], [""; 0]).unwrap();
        let c = build_concept(&m, &spec).unwrap();
        assert_eq!(c.missing_terms.len(), 1);
        assert_eq!(c.used_terms.values().sum::<f64>(), 1.0);
        assert_eq!(c.vector, vec![1.0, 1.0]);

        let none = ConceptSpec::new("gone", ["x", "y"], [""; 0]).unwrap();
        match build_concept(&m, &none) {
            Err(ConceptError::AllTermsMissing { name, .. }) => assert_eq!(name, "gone"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&[1.0f64, 0.0], &[1.0f64, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0f64, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0f64, 1.0], &[1.0f32, 0.0]).unwrap();
        assert!((c - 0.707_107).abs() < 1e-6);
        assert!(matches!(cosine(&[0.0f64, 0.0], &[1.0f64, 0.0]), Err(ConceptError::ZeroVector)));
        assert!(matches!(
            cosine(&[1.0f64], &[1.0f64, 0.0]),
            Err(ConceptError::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn nearest_neighbour_hand_ordering() {
        // cosines to (1, 0): a = 1, b = 0.8, c = 0.6 (tie with d), e = -1
        let m = model(&[
            ("e", &[-1.0, 0.0], 1),
            ("c", &[3.0, 4.0], 1),
            ("a", &[2.0, 0.0], 1),
            ("d", &[3.0, -4.0], 1),
            ("b", &[4.0, 3.0], 1),
        ]);
        let nn = nearest_neighbours(&m, &[1.0, 0.0], 4, &[] as &[&str]).unwrap();
        let order: Vec<&str> = nn.iter().map(|n| n.lemma.as_str()).collect();
        assert_eq!(order, ["a", "b", "c", "d"]);
        assert!((nn[1].cosine - 0.8).abs() < 1e-12);

        let excl = nearest_neighbours(&m, &[1.0, 0.0], 1, &["a"]).unwrap();
        assert_eq!(excl[0].lemma, "b");

        let all = nearest_neighbours(&m, &[1.0, 0.0], 50, &[] as &[&str]).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all.last().unwrap().lemma, "e");
    }
}
