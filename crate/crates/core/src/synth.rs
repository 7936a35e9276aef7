//! Deterministic synthetic corpora, lexicons, score files and pretrained
//! vectors for tests, demos and the bundled toy configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptSpec;
use crate::corpus::{write_plain, Corpus, Document, Paragraph, Sentence, Token};
use crate::embeddings::write_text_vectors;
use crate::sentiment::{score_paragraph, Lexicon, LexiconEntry, EMOTIONS};

const SYLLABLES: [&str; 18] = [
    "ba", "ce", "di", "fo", "gu", "ka", "le", "mi", "no", "pu", "ra", "se", "ti", "vo", "za", "že", "ši", "če",
];
const SUFFIXES: [&str; 5] = ["a", "e", "i", "om", "ih"];

/// Lemma inventory shared by every generated artefact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Filler lemmas grouped by topic.
    pub topics: Vec<Vec<String>>,
    pub migrant: Vec<String>,
    pub disgust: Vec<String>,
    pub vermin: Vec<String>,
    pub keyword: String,
}

impl Vocabulary {
    pub fn new(fillers: usize, topics: usize, keyword: &str) -> Self {
        let migrant = ConceptSpec::migrant();
        let disgust = ConceptSpec::moral_disgust();
        let vermin = ConceptSpec::vermin();
        let reserved: BTreeSet<&str> = migrant
            .terms
            .iter()
            .chain(&disgust.terms)
            .chain(&vermin.terms)
            .map(String::as_str)
            .collect();
        let roots: Vec<&str> = migrant
            .exclusion_roots
            .iter()
            .map(String::as_str)
            .chain([keyword])
            .collect();
        let topics = topics.max(1);
        let mut groups = vec![Vec::new(); topics];
        let mut i = 0usize;
        let mut made = 0usize;
        while made < fillers {
            let name = filler_name(i);
            i += 1;
            if reserved.contains(name.as_str()) || roots.iter().any(|r| name.starts_with(r)) {
                continue;
            }
            groups[made % topics].push(name);
            made += 1;
        }
        Vocabulary {
            topics: groups,
            migrant: migrant.terms,
            disgust: disgust.terms,
            vermin: vermin.terms,
            keyword: keyword.to_string(),
        }
    }

    pub fn fillers(&self) -> impl Iterator<Item = &String> {
        self.topics.iter().flatten()
    }

    /// Every lemma a generated corpus can contain, punctuation excluded.
    pub fn all_lemmas(&self) -> BTreeSet<String> {
        self.fillers()
            .chain(&self.migrant)
            .chain(&self.disgust)
            .chain(&self.vermin)
            .chain([&self.keyword])
            .cloned()
            .collect()
    }
}

fn filler_name(mut i: usize) -> String {
    let mut name = String::new();
    for _ in 0..3 {
        name.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
    }
    while i > 0 {
        name.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
    }
    name
}

/// Co-occurrence planted into sentences that carry a migrant term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planting {
    pub terms: Vec<String>,
    /// Probability that a migrant sentence also receives a planted term.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub documents: usize,
    pub paragraphs_per_doc: (usize, usize),
    pub sentences_per_paragraph: (usize, usize),
    pub sentence_words: (usize, usize),
    /// Share of words drawn from the sentence topic.
    pub topic_purity: f64,
    pub zipf_exponent: f64,
    pub migrant_rate: f64,
    pub disgust_rate: f64,
    pub vermin_rate: f64,
    /// Zipf exponent for picking a term inside a concept list.
    pub term_exponent: f64,
    /// Share of paragraphs mentioning the keyword.
    pub keyword_rate: f64,
    /// Topic that keyword paragraphs favour, with probability one half.
    pub keyword_topic: Option<usize>,
    pub planting: Option<Planting>,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            documents: 200,
            paragraphs_per_doc: (2, 5),
            sentences_per_paragraph: (1, 4),
            sentence_words: (5, 12),
            topic_purity: 0.85,
            zipf_exponent: 1.0,
            migrant_rate: 0.25,
            disgust_rate: 0.08,
            vermin_rate: 0.04,
            term_exponent: 1.0,
            keyword_rate: 0.0,
            keyword_topic: None,
            planting: None,
        }
    }
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

fn token(rng: &mut ChaCha8Rng, lemma: &str, first: bool) -> Token {
    let mut form = if rng.random_bool(0.4) {
        lemma.to_string()
    } else {
        format!("{lemma}{}", SUFFIXES.choose(rng).expect("non-empty"))
    };
    if first {
        let mut chars = form.chars();
        if let Some(c) = chars.next() {
            form = c.to_uppercase().chain(chars).collect();
        }
    }
    Token::new(&form, lemma).expect("lemma non-empty")
}

fn insert_at(rng: &mut ChaCha8Rng, words: &mut Vec<String>, lemma: &str) {
    let at = rng.random_range(0..=words.len());
    words.insert(at, lemma.to_string());
}

struct Generator<'a> {
    vocab: &'a Vocabulary,
    spec: &'a CorpusSpec,
    rng: ChaCha8Rng,
    /// Separate stream so planting leaves the base text unchanged.
    plant_rng: ChaCha8Rng,
    zipf: Vec<Zipf<f64>>,
}

fn pick<'t>(rng: &mut ChaCha8Rng, terms: &'t [String], exponent: f64) -> &'t str {
    let rank = Zipf::new(terms.len() as f64, exponent)
        .expect("valid zipf")
        .sample(rng) as usize;
    &terms[(rank - 1).min(terms.len() - 1)]
}

impl Generator<'_> {
    fn topic_word(&mut self, topic: usize) -> String {
        let group = &self.vocab.topics[topic];
        let rank = self.zipf[topic].sample(&mut self.rng) as usize;
        group[(rank - 1).min(group.len() - 1)].clone()
    }

    fn sentence(&mut self, topic: usize, keyword: bool) -> Sentence {
        let n = range(&mut self.rng, self.spec.sentence_words);
        let topics = self.vocab.topics.len();
        let mut words: Vec<String> = (0..n)
            .map(|_| {
                let t = if self.rng.random_bool(self.spec.topic_purity) {
                    topic
                } else {
                    self.rng.random_range(0..topics)
                };
                self.topic_word(t)
            })
            .collect();
        let mut planted = None;
        if self.rng.random_bool(self.spec.migrant_rate) {
            let m = pick(&mut self.rng, &self.vocab.migrant, self.spec.term_exponent).to_string();
            insert_at(&mut self.rng, &mut words, &m);
            if let Some(plant) = &self.spec.planting {
                if self.plant_rng.random_bool(plant.rate) {
                    planted = Some(pick(&mut self.plant_rng, &plant.terms, self.spec.term_exponent).to_string());
                }
            }
        }
        if self.rng.random_bool(self.spec.disgust_rate) {
            let d = pick(&mut self.rng, &self.vocab.disgust, self.spec.term_exponent).to_string();
            insert_at(&mut self.rng, &mut words, &d);
        }
        if self.rng.random_bool(self.spec.vermin_rate) {
            let v = pick(&mut self.rng, &self.vocab.vermin, self.spec.term_exponent).to_string();
            insert_at(&mut self.rng, &mut words, &v);
        }
        if keyword {
            let k = self.vocab.keyword.clone();
            insert_at(&mut self.rng, &mut words, &k);
        }
        let mut tokens: Vec<Token> = Vec::with_capacity(words.len() + 2);
        for (i, w) in words.iter().enumerate() {
            tokens.push(token(&mut self.rng, w, i == 0));
            if i + 1 < words.len() && self.rng.random_bool(0.05) {
                tokens.push(Token::new(",", ",").expect("non-empty"));
            }
        }
        if let Some(p) = planted {
            let at = self.plant_rng.random_range(0..=tokens.len());
            let t = token(&mut self.plant_rng, &p, at == 0);
            tokens.insert(at, t);
        }
        tokens.push(Token::new(".", ".").expect("non-empty"));
        Sentence { tokens }
    }
}

/// Generates a corpus of `spec.documents` documents with ids `<id>-dNNNN`.
/// With the same seed, a planted and an unplanted spec produce the same
/// base text.
pub fn generate_corpus(id: &str, vocab: &Vocabulary, spec: &CorpusSpec, seed: u64) -> Corpus {
    let zipf = vocab
        .topics
        .iter()
        .map(|g| Zipf::new(g.len().max(1) as f64, spec.zipf_exponent).expect("valid zipf"))
        .collect();
    let mut g = Generator {
        vocab,
        spec,
        rng: ChaCha8Rng::seed_from_u64(seed),
        plant_rng: {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(1);
            r
        },
        zipf,
    };
    let topics = vocab.topics.len();
    let mut documents = Vec::with_capacity(spec.documents);
    for d in 0..spec.documents {
        let doc_id = format!("{id}-d{d:04}");
        let title_topic = g.rng.random_range(0..topics);
        let title: Vec<String> = (0..4).map(|_| g.topic_word(title_topic)).collect();
        let mut paragraphs = Vec::new();
        for p in 0..range(&mut g.rng, spec.paragraphs_per_doc) {
            let keyword = spec.keyword_rate > 0.0 && g.rng.random_bool(spec.keyword_rate);
            let topic = match spec.keyword_topic {
                Some(t) if keyword && g.rng.random_bool(0.5) => t % topics,
                _ => g.rng.random_range(0..topics),
            };
            let count = range(&mut g.rng, spec.sentences_per_paragraph);
            let keyword_at = g.rng.random_range(0..count.max(1));
            let sentences = (0..count)
                .map(|s| g.sentence(topic, keyword && s == keyword_at))
                .collect();
            paragraphs.push(Paragraph::new(format!("{doc_id}:p{}", p + 1), doc_id.clone(), sentences));
        }
        documents.push(Document {
            id: doc_id,
            title: Some(title.join(" ")),
            paragraphs,
        });
    }
    Corpus::new(id, documents)
}

/// Per-topic mean valence/arousal/dominance used by the lexicon generator.
fn topic_profile(topic: usize, topics: usize) -> [f64; 3] {
    let t = if topics > 1 {
        topic as f64 / (topics - 1) as f64
    } else {
        0.5
    };
    [0.3 + 0.4 * t, 0.6 - 0.2 * t, 0.4 + 0.2 * t]
}

/// Lexicon covering a share of the fillers plus every concept term.
pub fn generate_lexicon(vocab: &Vocabulary, coverage: f64, seed: u64) -> Vec<(String, LexiconEntry)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).expect("valid");
    let topics = vocab.topics.len();
    let mut out = Vec::new();
    let mut push = |rng: &mut ChaCha8Rng, lemma: &str, base: [f64; 3], disgust: bool| {
        let v = base.map(|b| (b + noise.sample(rng)).clamp(0.0, 1.0));
        let mut flags = [false; 10];
        flags[2] = disgust;
        flags[5] = v[0] < 0.35;
        flags[6] = v[0] > 0.65;
        for (k, f) in flags.iter_mut().enumerate() {
            if ![2, 5, 6].contains(&k) {
                *f = rng.random_bool(0.05);
            }
        }
        out.push((
            lemma.to_string(),
            LexiconEntry {
                valence: v[0],
                arousal: v[1],
                dominance: v[2],
                emotions: Some(flags),
            },
        ));
    };
    for (t, group) in vocab.topics.iter().enumerate() {
        for lemma in group {
            if rng.random_bool(coverage) {
                push(&mut rng, lemma, topic_profile(t, topics), false);
            }
        }
    }
    for m in &vocab.migrant {
        push(&mut rng, m, [0.5, 0.5, 0.45], false);
    }
    for d in &vocab.disgust {
        push(&mut rng, d, [0.15, 0.65, 0.4], true);
    }
    for v in &vocab.vermin {
        push(&mut rng, v, [0.2, 0.55, 0.35], true);
    }
    out
}

pub fn lexicon_tsv(entries: &[(String, LexiconEntry)]) -> String {
    let mut out = String::from("lemma\tvalence\tarousal\tdominance");
    for e in EMOTIONS {
        out.push('\t');
        out.push_str(e);
    }
    out.push('\n');
    for (lemma, e) in entries {
        out.push_str(&format!("{lemma}\t{:.4}\t{:.4}\t{:.4}", e.valence, e.arousal, e.dominance));
        for f in e.emotions.unwrap_or_default() {
            out.push_str(if f { "\t1" } else { "\t0" });
        }
        out.push('\n');
    }
    out
}

/// Model-style paragraph scores: a stretched lexicon score plus noise,
/// kept strictly inside (0, 1). Paragraphs without lexicon coverage get a
/// neutral centre.
pub fn external_scores(corpus: &Corpus, lexicon: &Lexicon, seed: u64) -> BTreeMap<String, (f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeMap::new();
    for p in corpus.paragraphs() {
        let s = score_paragraph(p, lexicon);
        let mut draw = |centre: Option<f64>| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (0.5 + 1.5 * (centre.unwrap_or(0.5) - 0.5) + 0.08 * z).clamp(0.001, 0.999)
        };
        let v = draw(s.valence);
        let a = draw(s.arousal);
        out.insert(p.id.clone(), (v, a));
    }
    out
}

pub fn external_scores_csv(scores: &BTreeMap<String, (f64, f64)>) -> String {
    let mut out = String::from("paragraph_id,valence,arousal\n");
    for (id, (v, a)) in scores {
        out.push_str(&format!("{id},{v:.6},{a:.6}\n"));
    }
    out
}

/// Word-form vectors with a latent topic structure, and the form → lemma map.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedForms {
    pub dim: usize,
    pub forms: Vec<(String, Vec<f32>)>,
    pub form_to_lemma: Vec<(String, String)>,
}

pub fn generate_pretrained(vocab: &Vocabulary, dim: usize, seed: u64) -> PretrainedForms {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let gauss = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> {
        (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) * s * scale).collect()
    };
    let mut groups: Vec<(Vec<f64>, Vec<String>)> = Vec::new();
    for group in &vocab.topics {
        groups.push((gauss(&mut rng, 1.0), group.clone()));
    }
    for terms in [&vocab.migrant, &vocab.disgust, &vocab.vermin] {
        groups.push((gauss(&mut rng, 1.0), terms.clone()));
    }
    groups.push((gauss(&mut rng, 1.0), vec![vocab.keyword.clone()]));
    let mut out = PretrainedForms {
        dim,
        forms: Vec::new(),
        form_to_lemma: Vec::new(),
    };
    for (centre, lemmas) in groups {
        for lemma in lemmas {
            let base: Vec<f64> = centre
                .iter()
                .zip(gauss(&mut rng, 0.8))
                .map(|(c, n)| c + n)
                .collect();
            let forms = 1 + rng.random_range(0..3usize);
            for k in 0..forms {
                let form = if k == 0 {
                    lemma.clone()
                } else {
                    format!("{lemma}{}", SUFFIXES[k - 1])
                };
                let v = base
                    .iter()
                    .zip(gauss(&mut rng, 0.1))
                    .map(|(b, n)| (b + n) as f32)
                    .collect();
                out.forms.push((form.clone(), v));
                out.form_to_lemma.push((form, lemma.clone()));
            }
        }
    }
    // unmapped forms, dropped by the collapse
    for k in 0..dim.min(20) {
        let v = gauss(&mut rng, 1.0).into_iter().map(|x| x as f32).collect();
        out.forms.push((format!("xq{k}"), v));
    }
    out
}

pub fn form_lemma_tsv(map: &[(String, String)]) -> String {
    let mut out = String::new();
    for (form, lemma) in map {
        out.push_str(&format!("{form}\t{lemma}\n"));
    }
    out
}

const TOY_KEYWORD: &str = "ukrajina";

fn toml_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

/// Writes the bundled toy dataset into `dir`: two 200-document corpora,
/// a lexicon, external score files, pretrained form vectors with their
/// lemma map, and `toy.toml`. Returns the config path.
pub fn write_toy_dataset(dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let vocab = Vocabulary::new(1500, 8, TOY_KEYWORD);
    let base = CorpusSpec::default();
    let syr = CorpusSpec {
        planting: Some(Planting {
            terms: vocab.disgust.clone(),
            rate: 0.5,
        }),
        ..base.clone()
    };
    let ukr = CorpusSpec {
        keyword_rate: 0.35,
        keyword_topic: Some(0),
        ..base
    };
    let corpora = [
        generate_corpus("c_syr", &vocab, &syr, 11),
        generate_corpus("c_ukr", &vocab, &ukr, 12),
    ];
    let entries = generate_lexicon(&vocab, 0.6, 13);
    std::fs::write(dir.join("lexicon.tsv"), lexicon_tsv(&entries))?;
    let lexicon = Lexicon::from_entries(entries);
    for (i, c) in corpora.iter().enumerate() {
        std::fs::write(dir.join(format!("{}.txt", c.id)), write_plain(c))?;
        let scores = external_scores(c, &lexicon, 14 + i as u64);
        std::fs::write(dir.join(format!("{}_scores.csv", c.id)), external_scores_csv(&scores))?;
    }
    let pre = generate_pretrained(&vocab, 50, 16);
    let rows: Vec<(&str, &[f32])> = pre.forms.iter().map(|(f, v)| (f.as_str(), v.as_slice())).collect();
    write_text_vectors(&dir.join("pretrained.vec"), pre.dim, &rows, Some(5)).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("form_lemma.tsv"), form_lemma_tsv(&pre.form_to_lemma))?;

    let roots = ConceptSpec::migrant().exclusion_roots;
    let config = format!(
        r#"# Toy configuration: two synthetic 200-document corpora.
seed = 20240501

[[corpus]]
label = "c_syr"
path = "c_syr.txt"
external_scores = "c_syr_scores.csv"

[[corpus]]
label = "c_ukr"
path = "c_ukr.txt"
external_scores = "c_ukr_scores.csv"

[[subcorpus]]
source = "c_ukr"
keywords = ["{kw}"]
match_label = "c_ukr_kw"
other_label = "c_ukr_rest"

[[comparison]]
first = "c_syr"
second = "c_ukr"

[[comparison]]
first = "c_ukr_kw"
second = "c_ukr_rest"

[concepts]
target = "builtin:migrant"
others = ["builtin:moral-disgust", "builtin:vermin"]

[pretrained]
vectors = "pretrained.vec"
form_lemma_map = "form_lemma.tsv"

[train]
epochs = 50
min_count = 1
window = 5
negatives = 5
workers = 1

[filter]
min_words = 15
max_words = 500
min_unique_lemmas = 5
required_prefixes = {roots}

[sentiment]
lexicon = "lexicon.tsv"
min_coverage = 0.2

[anchors]
n = 500
alpha = 0.05

[nn]
k = 500
report_top = 20

[bayes]
ci_mass = 0.95

[export]
bins = 20
"#,
        kw = &TOY_KEYWORD[..7],
        roots = toml_list(&roots),
    );
    let path = dir.join("toy.toml");
    std::fs::write(&path, config)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{paragraph_eligible, FilterConfig};

    fn small() -> CorpusSpec {
        CorpusSpec {
            documents: 30,
            keyword_rate: 0.3,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn vocabulary_avoids_concept_roots() {
        let v = Vocabulary::new(3000, 6, "ukrajina");
        assert_eq!(v.fillers().count(), 3000);
        let distinct: BTreeSet<_> = v.fillers().collect();
        assert_eq!(distinct.len(), 3000);
        let roots = ConceptSpec::migrant().exclusion_roots;
        assert!(v.fillers().all(|f| !roots.iter().any(|r| f.starts_with(r.as_str()))));
        assert!(v.fillers().all(|f| !v.disgust.contains(f)));
    }

    #[test]
    fn corpus_generation_is_deterministic() {
        let v = Vocabulary::new(400, 4, "ukrajina");
        let a = generate_corpus("a", &v, &small(), 7);
        let b = generate_corpus("a", &v, &small(), 7);
        assert_eq!(a, b);
        assert_ne!(a, generate_corpus("a", &v, &small(), 8));
        assert_eq!(a.documents.len(), 30);
        let text = crate::corpus::write_plain(&a);
        let back = crate::corpus::parse(&text, crate::corpus::InputFormat::PlainWithLemmas, "a").unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn corpus_has_keyword_and_eligible_paragraphs() {
        let v = Vocabulary::new(400, 4, "ukrajina");
        let c = generate_corpus("a", &v, &small(), 1);
        let (hit, other) = c.split_by_keywords(&["ukrajin"]).unwrap();
        assert!(hit.paragraphs().count() > 0 && other.paragraphs().count() > 0);
        let filter = FilterConfig {
            required_prefixes: ConceptSpec::migrant().exclusion_roots,
            ..FilterConfig::default()
        };
        assert!(c.paragraphs().any(|p| paragraph_eligible(p, &filter)));
        assert!(c.paragraphs().any(|p| !paragraph_eligible(p, &filter)));
    }

    #[test]
    fn planting_raises_co_occurrence() {
        let v = Vocabulary::new(400, 4, "ukrajina");
        let plain = generate_corpus("a", &v, &small(), 3);
        let spec = CorpusSpec {
            planting: Some(Planting {
                terms: v.disgust.clone(),
                rate: 0.8,
            }),
            ..small()
        };
        let planted = generate_corpus("b", &v, &spec, 3);
        let both = |c: &Corpus| {
            c.training_sentences()
                .iter()
                .filter(|s| s.iter().any(|w| v.migrant.contains(w)) && s.iter().any(|w| v.disgust.contains(w)))
                .count()
        };
        assert!(both(&planted) > 3 * both(&plain).max(1));
        let strip = |c: &Corpus| -> Vec<Vec<String>> {
            c.training_sentences()
                .into_iter()
                .map(|s| s.into_iter().filter(|w| !v.disgust.contains(w)).collect())
                .collect()
        };
        let unplanted_same_seed = generate_corpus("b", &v, &CorpusSpec { disgust_rate: 0.0, ..small() }, 3);
        let planted_no_base_disgust = generate_corpus("b", &v, &CorpusSpec { disgust_rate: 0.0, ..spec }, 3);
        assert_eq!(strip(&unplanted_same_seed), strip(&planted_no_base_disgust));
    }

    #[test]
    fn lexicon_and_scores_are_valid() {
        let v = Vocabulary::new(200, 4, "ukrajina");
        let entries = generate_lexicon(&v, 0.5, 2);
        let lex = crate::sentiment::parse_lexicon(&lexicon_tsv(&entries), "synth").unwrap();
        assert_eq!(lex.len(), entries.len());
        let c = generate_corpus("a", &v, &small(), 4);
        let scores = external_scores(&c, &lex, 5);
        assert_eq!(scores.len(), c.paragraphs().count());
        let parsed = crate::sentiment::parse_external_scores(&external_scores_csv(&scores), "synth").unwrap();
        assert_eq!(parsed.len(), scores.len());
    }

    #[test]
    fn pretrained_collapses_to_lemmas() {
        let v = Vocabulary::new(100, 4, "ukrajina");
        let p = generate_pretrained(&v, 16, 9);
        let map: std::collections::HashMap<String, String> = p.form_to_lemma.iter().cloned().collect();
        let (init, report) = crate::embeddings::collapse_pretrained(&p.forms, &map).unwrap();
        assert_eq!(init.lemma_vectors.len(), v.all_lemmas().len());
        assert_eq!(report.forms_dropped, 16);
    }
}
