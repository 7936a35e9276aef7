//! Lemma-annotated corpora: documents, paragraphs, sentences and tokens.
//!
//! Corpora arrive pre-tokenised and pre-lemmatised (see [`format`] for the
//! accepted input grammars). Everything downstream works on lemmas.

mod format;
mod stats;

pub use format::{ingest, parse, write_plain, InputFormat};
pub use stats::CorpusStats;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus `{0}` contains no documents")]
    Empty(String),
    #[error("duplicate document id `{id}` (line {line})")]
    DuplicateDocument { id: String, line: usize },
    #[error("keyword set is empty")]
    NoKeywords,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Lowercase and NFC-normalise a lemma or keyword.
pub fn normalize_lemma(raw: &str) -> String {
    raw.nfc().flat_map(char::to_lowercase).collect()
}

/// A token counts as a word when its lemma carries at least one letter.
pub fn is_word(lemma: &str) -> bool {
    lemma.chars().any(char::is_alphabetic)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub lemma: String,
}

impl Token {
    /// Builds a token, normalising the lemma. Returns `None` when the form is
    /// non-empty but the lemma is not.
    pub fn new(form: &str, lemma: &str) -> Option<Self> {
        let lemma = normalize_lemma(lemma.trim());
        if !form.is_empty() && lemma.is_empty() {
            return None;
        }
        Some(Token {
            form: form.to_string(),
            lemma,
        })
    }

    pub fn is_word(&self) -> bool {
        is_word(&self.lemma)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: String,
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub word_count: usize,
    pub unique_lemma_count: usize,
}

impl Paragraph {
    pub fn new(id: impl Into<String>, doc_id: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        let word_count = sentences.iter().map(Sentence::word_count).sum();
        let unique_lemma_count = sentences
            .iter()
            .flat_map(Sentence::words)
            .map(|t| t.lemma.as_str())
            .collect::<HashSet<_>>()
            .len();
        Paragraph {
            id: id.into(),
            doc_id: doc_id.into(),
            sentences,
            word_count,
            unique_lemma_count,
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens().filter(|t| t.is_word())
    }

    /// True when some token lemma starts with one of the (normalised) prefixes.
    pub fn mentions_any(&self, prefixes: &[String]) -> bool {
        self.tokens()
            .any(|t| prefixes.iter().any(|p| t.lemma.starts_with(p.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    /// Title text, kept for provenance only. Title tokens never reach the paragraphs.
    pub title: Option<String>,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub id: String,
    pub documents: Vec<Document>,
    pub lemma_frequencies: BTreeMap<String, u64>,
}

impl Corpus {
    /// Assembles a corpus and recounts lemma frequencies over every token.
    pub fn new(id: impl Into<String>, documents: Vec<Document>) -> Self {
        let mut lemma_frequencies = BTreeMap::new();
        for token in documents
            .iter()
            .flat_map(|d| d.paragraphs.iter())
            .flat_map(Paragraph::tokens)
        {
            *lemma_frequencies.entry(token.lemma.clone()).or_insert(0) += 1;
        }
        Corpus {
            id: id.into(),
            documents,
            lemma_frequencies,
        }
    }

    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.documents.iter().flat_map(|d| d.paragraphs.iter())
    }

    pub fn token_count(&self) -> u64 {
        self.paragraphs().flat_map(Paragraph::tokens).count() as u64
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats::of(self)
    }

    /// Sentences usable for embedding training: the word lemmas of every
    /// sentence holding more than two words.
    pub fn training_sentences(&self) -> Vec<Vec<String>> {
        self.paragraphs()
            .flat_map(|p| p.sentences.iter())
            .map(|s| s.words().map(|t| t.lemma.clone()).collect::<Vec<_>>())
            .filter(|lemmas| lemmas.len() > 2)
            .collect()
    }

    /// Partitions paragraphs into those mentioning any keyword prefix and the rest.
    ///
    /// Documents keep their order; a document appears on a side only if at
    /// least one of its paragraphs went there. The halves are labelled
    /// `<id>/match` and `<id>/other`.
    pub fn split_by_keywords<S: AsRef<str>>(
        &self,
        keywords: &[S],
    ) -> Result<(Corpus, Corpus), CorpusError> {
        let prefixes: Vec<String> = keywords
            .iter()
            .map(|k| normalize_lemma(k.as_ref().trim()))
            .filter(|k| !k.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if prefixes.is_empty() {
            return Err(CorpusError::NoKeywords);
        }

        let mut matched = Vec::new();
        let mut other = Vec::new();
        for doc in &self.documents {
            let (hit, miss): (Vec<_>, Vec<_>) = doc
                .paragraphs
                .iter()
                .cloned()
                .partition(|p| p.mentions_any(&prefixes));
            for (side, paragraphs) in [(&mut matched, hit), (&mut other, miss)] {
                if !paragraphs.is_empty() {
                    side.push(Document {
                        id: doc.id.clone(),
                        title: doc.title.clone(),
                        paragraphs,
                    });
                }
            }
        }
        Ok((
            Corpus::new(format!("{}/match", self.id), matched),
            Corpus::new(format!("{}/other", self.id), other),
        ))
    }
}

/// Paragraph admission rule for sentiment comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Paragraphs with this many words or fewer are rejected.
    pub min_words: usize,
    /// Paragraphs with this many words or more are rejected.
    pub max_words: usize,
    pub min_unique_lemmas: usize,
    /// Lemma prefixes of which at least one must occur. Empty disables the check.
    pub required_prefixes: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_words: 15,
            max_words: 500,
            min_unique_lemmas: 5,
            required_prefixes: Vec::new(),
        }
    }
}

pub fn paragraph_eligible(p: &Paragraph, cfg: &FilterConfig) -> bool {
    if p.word_count <= cfg.min_words || p.word_count >= cfg.max_words {
        return false;
    }
    if p.unique_lemma_count < cfg.min_unique_lemmas {
        return false;
    }
    if cfg.required_prefixes.is_empty() {
        return true;
    }
    let prefixes: Vec<String> = cfg
        .required_prefixes
        .iter()
        .map(|r| normalize_lemma(r))
        .collect();
    p.mentions_any(&prefixes)
}

/// Splits raw text into paragraphs on runs of blank (whitespace-only) lines.
pub fn segment_paragraphs(raw_text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in raw_text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}
