//! Lexicon-based valence/arousal/dominance scoring and ingestion of
//! externally produced paragraph scores.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_lemma, Paragraph};

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path} line {line}: score {value} for `{key}` outside [0, 1]")]
    OutOfRange {
        path: String,
        line: u64,
        key: String,
        value: f64,
    },
    #[error("{path} line {line}: duplicate paragraph id `{id}`")]
    DuplicateId { path: String, line: u64, id: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Emotion association columns, in file order.
pub const EMOTIONS: [&str; 10] = [
    "anger",
    "anticipation",
    "disgust",
    "fear",
    "joy",
    "negative",
    "positive",
    "sadness",
    "surprise",
    "trust",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
    pub emotions: Option<[bool; 10]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Valence,
    Arousal,
    Dominance,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Valence, Dimension::Arousal, Dimension::Dominance];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
        }
    }
}

impl LexiconEntry {
    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
    /// Rows folded into an earlier entry with the same lemma.
    pub duplicates_merged: usize,
}

impl Lexicon {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, LexiconEntry)>) -> Self {
        Lexicon {
            entries: entries
                .into_iter()
                .map(|(k, v)| (normalize_lemma(&k), v))
                .collect(),
            duplicates_merged: 0,
        }
    }

    pub fn get(&self, lemma: &str) -> Option<&LexiconEntry> {
        self.entries.get(lemma)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn io_error(path: &Path, source: std::io::Error) -> SentimentError {
    SentimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_error(path: &str, e: csv::Error) -> SentimentError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    SentimentError::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}

fn parse_score(path: &str, line: u64, key: &str, raw: &str) -> Result<f64, SentimentError> {
    let value: f64 = raw.trim().parse().map_err(|_| SentimentError::Parse {
        path: path.to_string(),
        line,
        message: format!("`{raw}` is not a number"),
    })?;
    if !(0.0..=1.0).contains(&value) {
        return Err(SentimentError::OutOfRange {
            path: path.to_string(),
            line,
            key: key.to_string(),
            value,
        });
    }
    Ok(value)
}

/// Reads a tab-separated lexicon with a header row: `lemma`, `valence`,
/// `arousal`, `dominance`, then optionally the ten emotion flags (0/1).
/// Repeated lemmas are averaged; their flags are OR-ed.
pub fn load_lexicon(path: &Path) -> Result<Lexicon, SentimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_lexicon(&text, &path.display().to_string())
}

pub fn parse_lexicon(text: &str, origin: &str) -> Result<Lexicon, SentimentError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .flexible(true)
        .quoting(false)
        .from_reader(text.as_bytes());
    let mut acc: HashMap<String, ([f64; 3], usize, Option<[bool; 10]>)> = HashMap::new();
    let mut duplicates = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != 4 && record.len() != 14 {
            return Err(SentimentError::Parse {
                path: origin.to_string(),
                line,
                message: format!("expected 4 or 14 columns, found {}", record.len()),
            });
        }
        let lemma = normalize_lemma(record[0].trim());
        if lemma.is_empty() {
            return Err(SentimentError::Parse {
                path: origin.to_string(),
                line,
                message: "empty lemma".into(),
            });
        }
        let mut scores = [0f64; 3];
        for (slot, (i, name)) in scores
            .iter_mut()
            .zip([(1, "valence"), (2, "arousal"), (3, "dominance")])
        {
            *slot = parse_score(origin, line, &format!("{lemma}/{name}"), &record[i])?;
        }
        let flags = if record.len() == 14 {
            let mut flags = [false; 10];
            for (k, flag) in flags.iter_mut().enumerate() {
                *flag = match record[4 + k].trim() {
                    "1" => true,
                    "0" | "" => false,
                    other => {
                        return Err(SentimentError::Parse {
                            path: origin.to_string(),
                            line,
                            message: format!("emotion flag `{}` must be 0 or 1, got `{other}`", EMOTIONS[k]),
                        })
                    }
                };
            }
            Some(flags)
        } else {
            None
        };
        match acc.get_mut(&lemma) {
            Some((sum, count, existing)) => {
                duplicates += 1;
                for (s, v) in sum.iter_mut().zip(scores) {
                    *s += v;
                }
                *count += 1;
                *existing = match (*existing, flags) {
                    (Some(a), Some(b)) => Some(std::array::from_fn(|k| a[k] || b[k])),
                    (a, b) => a.or(b),
                };
            }
            None => {
                acc.insert(lemma, (scores, 1, flags));
            }
        }
    }
    if duplicates > 0 {
        log::warn!("{origin}: averaged {duplicates} duplicate lexicon rows");
    }
    let entries = acc
        .into_iter()
        .map(|(lemma, (sum, count, emotions))| {
            let n = count as f64;
            (
                lemma,
                LexiconEntry {
                    valence: sum[0] / n,
                    arousal: sum[1] / n,
                    dominance: sum[2] / n,
                    emotions,
                },
            )
        })
        .collect();
    Ok(Lexicon {
        entries,
        duplicates_merged: duplicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Lexicon,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphScore {
    pub paragraph_id: String,
    pub valence: Option<f64>,
    pub arousal: Option<f64>,
    pub dominance: Option<f64>,
    /// Share of the paragraph's words found in the lexicon. Always 1 for
    /// external scores.
    pub coverage: f64,
    pub source: ScoreSource,
}

impl ParagraphScore {
    pub fn get(&self, dim: Dimension) -> Option<f64> {
        match dim {
            Dimension::Valence => self.valence,
            Dimension::Arousal => self.arousal,
            Dimension::Dominance => self.dominance,
        }
    }
}

/// Mean lexicon score over the paragraph's word tokens found in the lexicon.
/// Every occurrence counts.
pub fn score_paragraph(p: &Paragraph, lex: &Lexicon) -> ParagraphScore {
    let mut sums = [0f64; 3];
    let mut covered = 0usize;
    let mut words = 0usize;
    for token in p.words() {
        words += 1;
        if let Some(entry) = lex.get(&token.lemma) {
            covered += 1;
            sums[0] += entry.valence;
            sums[1] += entry.arousal;
            sums[2] += entry.dominance;
        }
    }
    let mean = |s: f64| (covered > 0).then(|| s / covered as f64);
    ParagraphScore {
        paragraph_id: p.id.clone(),
        valence: mean(sums[0]),
        arousal: mean(sums[1]),
        dominance: mean(sums[2]),
        coverage: if words == 0 {
            0.0
        } else {
            covered as f64 / words as f64
        },
        source: ScoreSource::Lexicon,
    }
}

/// Keeps external scores and lexicon scores with coverage at least `min_coverage`.
pub fn filter_by_coverage(scores: Vec<ParagraphScore>, min_coverage: f64) -> Vec<ParagraphScore> {
    scores
        .into_iter()
        .filter(|s| s.source == ScoreSource::External || s.coverage >= min_coverage)
        .collect()
}

/// Reads `paragraph_id,valence,arousal` rows (comma-separated, with header).
pub fn load_external_scores(path: &Path) -> Result<BTreeMap<String, (f64, f64)>, SentimentError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_external_scores(&text, &path.display().to_string())
}

pub fn parse_external_scores(
    text: &str,
    origin: &str,
) -> Result<BTreeMap<String, (f64, f64)>, SentimentError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(origin, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(SentimentError::Parse {
                path: origin.to_string(),
                line,
                message: format!("expected 3 columns, found {}", record.len()),
            });
        }
        let id = record[0].to_string();
        let valence = parse_score(origin, line, &format!("{id}/valence"), &record[1])?;
        let arousal = parse_score(origin, line, &format!("{id}/arousal"), &record[2])?;
        if out.insert(id.clone(), (valence, arousal)).is_some() {
            return Err(SentimentError::DuplicateId {
                path: origin.to_string(),
                line,
                id,
            });
        }
    }
    Ok(out)
}

/// External scores for the given paragraphs; paragraphs without a score are skipped.
pub fn external_paragraph_scores<'a>(
    paragraphs: impl IntoIterator<Item = &'a Paragraph>,
    scores: &BTreeMap<String, (f64, f64)>,
) -> Vec<ParagraphScore> {
    paragraphs
        .into_iter()
        .filter_map(|p| {
            scores.get(&p.id).map(|&(v, a)| ParagraphScore {
                paragraph_id: p.id.clone(),
                valence: Some(v),
                arousal: Some(a),
                dominance: None,
                coverage: 1.0,
                source: ScoreSource::External,
            })
        })
        .collect()
}

/// Lexicon scores of a ranked neighbour list, over covered lemmas only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnScoreSample {
    pub concept: String,
    pub corpus_id: String,
    pub lemmas: Vec<String>,
    pub valence: Vec<f64>,
    pub arousal: Vec<f64>,
    pub dominance: Vec<f64>,
    pub coverage: f64,
}

impl NnScoreSample {
    pub fn values(&self, dim: Dimension) -> &[f64] {
        match dim {
            Dimension::Valence => &self.valence,
            Dimension::Arousal => &self.arousal,
            Dimension::Dominance => &self.dominance,
        }
    }
}

pub fn score_nn_list<S: AsRef<str>>(
    concept: &str,
    corpus_id: &str,
    nns: &[S],
    lex: &Lexicon,
) -> NnScoreSample {
    let mut sample = NnScoreSample {
        concept: concept.to_string(),
        corpus_id: corpus_id.to_string(),
        lemmas: Vec::new(),
        valence: Vec::new(),
        arousal: Vec::new(),
        dominance: Vec::new(),
        coverage: 0.0,
    };
    for lemma in nns {
        if let Some(e) = lex.get(lemma.as_ref()) {
            sample.lemmas.push(lemma.as_ref().to_string());
            sample.valence.push(e.valence);
            sample.arousal.push(e.arousal);
            sample.dominance.push(e.dominance);
        }
    }
    if !nns.is_empty() {
        sample.coverage = sample.lemmas.len() as f64 / nns.len() as f64;
    }
    sample
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sentence, Token};

    fn entry(v: f64, a: f64, d: f64) -> LexiconEntry {
        LexiconEntry {
            valence: v,
            arousal: a,
            dominance: d,
            emotions: None,
        }
    }

    fn para(sentences: &[&[&str]]) -> Paragraph {
        Paragraph::new(
            "p",
            "d",
            sentences
                .iter()
                .map(|s| Sentence {
                    tokens: s.iter().map(|l| Token::new(l, l).unwrap()).collect(),
                })
                .collect(),
        )
    }

    #[test]
    fn lexicon_parsing() {
        let text = "lemma\tvalence\tarousal\tdominance\nmir\t0.9\t0.2\t0.6\nvojna\t0.05\t0.9\t0.5\nBegunec\t0.4\t0.5\t0.3\n";
        let lex = parse_lexicon(text, "t").unwrap();
        assert_eq!(lex.len(), 3);
        assert_eq!(lex.get("begunec").unwrap().dominance, 0.3);

        let dup = "lemma\tvalence\tarousal\tdominance\nx\t0.2\t0\t0\nx\t0.4\t1\t0\n";
        let lex = parse_lexicon(dup, "t").unwrap();
        assert_eq!(lex.len(), 1);
        assert!((lex.get("x").unwrap().valence - 0.3).abs() < 1e-15);
        assert_eq!(lex.get("x").unwrap().arousal, 0.5);
        assert_eq!(lex.duplicates_merged, 1);

        let bad = "lemma\tvalence\tarousal\tdominance\nok\t0.5\t0.5\t0.5\nx\t1.5\t0\t0\n";
        match parse_lexicon(bad, "t") {
            Err(SentimentError::OutOfRange { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lexicon_emotion_flags() {
        let text = "lemma\tv\ta\td\tanger\tanticipation\tdisgust\tfear\tjoy\tnegative\tpositive\tsadness\tsurprise\ttrust\n\
                    gnus\t0.1\t0.6\t0.4\t1\t0\t1\t0\t0\t1\t0\t0\t0\t0\n\
                    gnus\t0.1\t0.6\t0.4\t0\t0\t0\t1\t0\t0\t0\t0\t0\t0\n";
        let lex = parse_lexicon(text, "t").unwrap();
        let flags = lex.get("gnus").unwrap().emotions.unwrap();
        assert!(flags[0] && flags[2] && flags[3] && flags[5]);
        assert!(!flags[4]);
        let wrong = "lemma\tv\ta\td\nx\t0.1\t0.2\n";
        assert!(matches!(parse_lexicon(wrong, "t"), Err(SentimentError::Parse { .. })));
    }

    #[test]
    fn paragraph_scoring_examples() {
        let lex = Lexicon::from_entries([
            ("a".to_string(), entry(0.2, 0.1, 0.5)),
            ("b".to_string(), entry(0.8, 0.3, 0.5)),
        ]);
        let s = score_paragraph(&para(&[&["a", "b", "c"]]), &lex);
        assert!((s.valence.unwrap() - 0.5).abs() < 1e-15);
        assert!((s.coverage - 2.0 / 3.0).abs() < 1e-15);

        let none = score_paragraph(&para(&[&["x", "y"]]), &lex);
        assert_eq!(none.valence, None);
        assert_eq!(none.coverage, 0.0);

        let flat = Lexicon::from_entries([
            ("p".to_string(), entry(0.7, 0.7, 0.7)),
            ("q".to_string(), entry(0.7, 0.7, 0.7)),
        ]);
        let s = score_paragraph(&para(&[&["p", "q", "p", ","]]), &flat);
        assert!((s.valence.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(s.coverage, 1.0);
    }

    #[test]
    fn sentence_order_does_not_matter() {
        let lex = Lexicon::from_entries([
            ("a".to_string(), entry(0.125, 0.5, 0.25)),
            ("b".to_string(), entry(0.75, 0.25, 1.0)),
        ]);
        let one = score_paragraph(&para(&[&["a", "b", "a"], &["b", "z"]]), &lex);
        let two = score_paragraph(&para(&[&["b", "z"], &["a", "b", "a"]]), &lex);
        assert_eq!(one, two);
    }

    #[test]
    fn coverage_filter_keeps_boundary() {
        let mk = |c: f64, source| ParagraphScore {
            paragraph_id: format!("{c}"),
            valence: Some(0.5),
            arousal: Some(0.5),
            dominance: None,
            coverage: c,
            source,
        };
        let kept = filter_by_coverage(
            vec![
                mk(0.19, ScoreSource::Lexicon),
                mk(0.2, ScoreSource::Lexicon),
                mk(0.5, ScoreSource::Lexicon),
                mk(1.0, ScoreSource::External),
            ],
            0.2,
        );
        let ids: Vec<_> = kept.iter().map(|s| s.paragraph_id.as_str()).collect();
        assert_eq!(ids, ["0.2", "0.5", "1"]);
    }

    #[test]
    fn external_scores() {
        let ok = parse_external_scores("paragraph_id,valence,arousal\np1,0.2,0.3\np2,0.9,0.1\n", "t").unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok["p2"], (0.9, 0.1));
        assert!(matches!(
            parse_external_scores("paragraph_id,valence,arousal\np1,0.2,-0.1\n", "t"),
            Err(SentimentError::OutOfRange { line: 2, .. })
        ));
        assert!(matches!(
            parse_external_scores("paragraph_id,valence,arousal\np1,0.2,0.1\np1,0.3,0.3\n", "t"),
            Err(SentimentError::DuplicateId { line: 3, .. })
        ));
        let mut big = String::from("paragraph_id,valence,arousal\n");
        for i in 0..1000 {
            big.push_str(&format!("d{}:p{},{},{}\n", i / 10, i % 10, (i % 100) as f64 / 100.0, 0.5));
        }
        assert_eq!(parse_external_scores(&big, "t").unwrap().len(), 1000);
    }

    #[test]
    fn external_scores_pass_through() {
        let p = para(&[&["a"]]);
        let map = BTreeMap::from([("p".to_string(), (0.123_456_789, 0.987_654_321))]);
        let s = external_paragraph_scores([&p], &map);
        assert_eq!(s[0].valence, Some(0.123_456_789));
        assert_eq!(s[0].arousal, Some(0.987_654_321));
        assert_eq!(s[0].dominance, None);
    }

    #[test]
    fn nn_scoring() {
        let lex = Lexicon::from_entries(
            (0..100).map(|i| (format!("w{i}"), entry(0.5, 0.25, 0.5))),
        );
        let nns: Vec<String> = (0..500).map(|i| format!("w{}", i * 5)).collect();
        let s = score_nn_list("migrant", "c", &nns, &lex);
        assert_eq!(s.valence.len(), 20);
        assert!((s.coverage - 0.04).abs() < 1e-15);

        let nns: Vec<String> = (0..500).map(|i| format!("w{}", if i % 5 == 0 { i / 5 } else { 1000 + i })).collect();
        let s = score_nn_list("migrant", "c", &nns, &lex);
        assert_eq!(s.valence.len(), 100);
        assert!((s.coverage - 0.2).abs() < 1e-15);
        assert!(s.dominance.iter().all(|&d| d == 0.5));

        let empty = score_nn_list("migrant", "c", &["zz"], &lex);
        assert!(empty.valence.is_empty());
        assert_eq!(empty.coverage, 0.0);
    }

    proptest::proptest! {
        #[test]
        fn fully_covered_score_lies_between_extremes(
            values in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..8),
            picks in proptest::collection::vec(0usize..64, 1..40),
        ) {
            let names: Vec<String> = (0..values.len()).map(|i| format!("w{i}")).collect();
            let lex = Lexicon::from_entries(
                names.iter().cloned().zip(values.iter().map(|&(v, a, d)| entry(v, a, d))),
            );
            let used: Vec<&str> = picks.iter().map(|&i| names[i % names.len()].as_str()).collect();
            let s = score_paragraph(&para(&[&used]), &lex);
            proptest::prop_assert_eq!(s.coverage, 1.0);
            for dim in Dimension::ALL {
                let scores: Vec<f64> = used.iter().map(|w| lex.get(w).unwrap().get(dim)).collect();
                let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let x = s.get(dim).unwrap();
                proptest::prop_assert!(lo - 1e-12 <= x && x <= hi + 1e-12);
            }
        }
    }
}
