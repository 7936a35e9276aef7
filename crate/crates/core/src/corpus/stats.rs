use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Corpus;

/// Descriptive corpus statistics.
///
/// Word counts use the word rule (lemma carries a letter). `unique_words`
/// counts distinct lowercased forms. Every token in the input carries a
/// lemma, so `total_lemmas` equals `total_words`; both are kept so tables
/// line up with the usual layout.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: u64,
    pub sentences: u64,
    pub paragraphs: u64,
    pub total_words: u64,
    pub unique_words: u64,
    pub total_lemmas: u64,
    pub unique_lemmas: u64,
    pub words_per_doc: f64,
    pub words_per_sentence: f64,
    pub words_per_paragraph: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl CorpusStats {
    pub fn of(corpus: &Corpus) -> Self {
        let mut forms = HashSet::new();
        let mut lemmas = HashSet::new();
        let mut stats = CorpusStats {
            documents: corpus.documents.len() as u64,
            ..CorpusStats::default()
        };
        for p in corpus.paragraphs() {
            stats.paragraphs += 1;
            stats.sentences += p.sentences.iter().filter(|s| !s.tokens.is_empty()).count() as u64;
            for t in p.words() {
                stats.total_words += 1;
                forms.insert(t.form.to_lowercase());
                lemmas.insert(t.lemma.as_str());
            }
        }
        stats.total_lemmas = stats.total_words;
        stats.unique_words = forms.len() as u64;
        stats.unique_lemmas = lemmas.len() as u64;
        stats.words_per_doc = ratio(stats.total_words, stats.documents);
        stats.words_per_sentence = ratio(stats.total_words, stats.sentences);
        stats.words_per_paragraph = ratio(stats.total_words, stats.paragraphs);
        stats
    }

    /// Rows as (label, formatted value), in table order.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("documents", self.documents.to_string()),
            ("sentences", self.sentences.to_string()),
            ("paragraphs", self.paragraphs.to_string()),
            ("total words", self.total_words.to_string()),
            ("unique words", self.unique_words.to_string()),
            ("total lemmas", self.total_lemmas.to_string()),
            ("unique lemmas", self.unique_lemmas.to_string()),
            ("words per doc.", format!("{:.2}", self.words_per_doc)),
            ("words per sent.", format!("{:.2}", self.words_per_sentence)),
            ("words per par.", format!("{:.2}", self.words_per_paragraph)),
        ]
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, value) in self.rows() {
            writeln!(f, "{label:<16} {value:>12}")?;
        }
        Ok(())
    }
}
