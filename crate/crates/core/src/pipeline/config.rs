use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bayes::BayesConfig;
use crate::concepts::ConceptSpec;
use crate::corpus::{ingest, Corpus, FilterConfig, InputFormat};
use crate::embeddings::TrainConfig;
use crate::inference::AnchorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub label: String,
    pub path: PathBuf,
    #[serde(default)]
    pub format: InputFormat,
    /// Comma-separated `paragraph_id,valence,arousal` file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_scores: Option<PathBuf>,
}

/// Splits a corpus into paragraphs mentioning any keyword prefix and the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcorpusSplit {
    pub source: String,
    pub keywords: Vec<String>,
    pub match_label: String,
    pub other_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub first: String,
    pub second: String,
}

/// Concept references are `builtin:<name>` or a path to a concept file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConceptSection {
    pub target: String,
    pub others: Vec<String>,
}

impl Default for ConceptSection {
    fn default() -> Self {
        ConceptSection {
            target: "builtin:migrant".into(),
            others: vec!["builtin:moral-disgust".into(), "builtin:vermin".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainedSection {
    /// Word-form vectors in text format.
    pub vectors: PathBuf,
    /// Tab-separated `form<TAB>lemma` lines.
    pub form_lemma_map: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentSection {
    pub lexicon: PathBuf,
    #[serde(default = "default_min_coverage")]
    pub min_coverage: f64,
}

fn default_min_coverage() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnSection {
    pub k: usize,
    /// Rows per neighbour table in the readable report.
    pub report_top: usize,
}

impl Default for NnSection {
    fn default() -> Self {
        NnSection { k: 500, report_top: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    pub bins: usize,
}

impl Default for ExportSection {
    fn default() -> Self {
        ExportSection { bins: 20 }
    }
}

/// Whole-run configuration, read from TOML. Relative paths resolve against
/// the directory of the config file.
///
/// Section-level seeds (`train.seed`, `anchors.seed`, `bayes.seed`) are
/// replaced by seeds derived from the root `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    #[serde(rename = "corpus")]
    pub corpora: Vec<CorpusSource>,
    #[serde(default, rename = "subcorpus")]
    pub subcorpora: Vec<SubcorpusSplit>,
    #[serde(default, rename = "comparison")]
    pub comparisons: Vec<Comparison>,
    #[serde(default)]
    pub concepts: ConceptSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretrained: Option<PretrainedSection>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    pub sentiment: SentimentSection,
    #[serde(default)]
    pub anchors: AnchorConfig,
    #[serde(default)]
    pub nn: NnSection,
    #[serde(default)]
    pub bayes: BayesConfig,
    #[serde(default)]
    pub export: ExportSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_toml(&text, &base).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Every corpus label in processing order: configured corpora, then split halves.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.corpora.iter().map(|c| c.label.clone()).collect();
        for s in &self.subcorpora {
            out.push(s.match_label.clone());
            out.push(s.other_label.clone());
        }
        out
    }

    /// External score file for a label; split halves inherit their source's.
    pub fn external_scores_for(&self, label: &str) -> Option<PathBuf> {
        let source = self
            .subcorpora
            .iter()
            .find(|s| s.match_label == label || s.other_label == label)
            .map(|s| s.source.as_str())
            .unwrap_or(label);
        self.corpora
            .iter()
            .find(|c| c.label == source)
            .and_then(|c| c.external_scores.as_ref())
            .map(|p| self.resolve(p))
    }

    pub fn concept_refs(&self) -> Vec<&str> {
        std::iter::once(self.concepts.target.as_str())
            .chain(self.concepts.others.iter().map(String::as_str))
            .collect()
    }

    pub fn load_concept(&self, reference: &str) -> Result<ConceptSpec, PipelineError> {
        match reference.strip_prefix("builtin:") {
            Some("migrant") => Ok(ConceptSpec::migrant()),
            Some("moral-disgust") => Ok(ConceptSpec::moral_disgust()),
            Some("vermin") => Ok(ConceptSpec::vermin()),
            Some(other) => Err(PipelineError::Config(format!(
                "unknown builtin concept `{other}` (known: migrant, moral-disgust, vermin)"
            ))),
            None => Ok(ConceptSpec::load(&self.resolve(Path::new(reference)))?),
        }
    }

    /// Target concept first, then the others, in configured order.
    pub fn load_concepts(&self) -> Result<Vec<ConceptSpec>, PipelineError> {
        self.concept_refs().into_iter().map(|r| self.load_concept(r)).collect()
    }

    /// Reads every corpus and materialises the keyword splits.
    pub fn ingest_all(&self) -> Result<Vec<Corpus>, PipelineError> {
        let mut out: Vec<Corpus> = Vec::new();
        for c in &self.corpora {
            out.push(ingest(&self.resolve(&c.path), c.format, &c.label)?);
        }
        for s in &self.subcorpora {
            let source = out
                .iter()
                .find(|c| c.id == s.source)
                .ok_or_else(|| PipelineError::Config(format!("unknown split source `{}`", s.source)))?;
            let (mut hit, mut miss) = source.split_by_keywords(&s.keywords)?;
            hit.id = s.match_label.clone();
            miss.id = s.other_label.clone();
            out.push(hit);
            out.push(miss);
        }
        Ok(out)
    }
}

fn label_ok(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !label.starts_with('.')
}

/// Problems preventing a run; empty when the config is runnable.
pub fn validate(cfg: &PipelineConfig) -> Vec<String> {
    let mut problems = Vec::new();
    let missing_file = |what: &str, p: &Path, problems: &mut Vec<String>| {
        let resolved = cfg.resolve(p);
        if !resolved.is_file() {
            problems.push(format!("{what} not found: {}", resolved.display()));
            true
        } else {
            false
        }
    };

    if cfg.corpora.is_empty() {
        problems.push("no corpora configured".to_string());
    }
    let mut corpus_files_ok = true;
    for c in &cfg.corpora {
        corpus_files_ok &= !missing_file(&format!("corpus `{}`", c.label), &c.path, &mut problems);
        if let Some(ext) = &c.external_scores {
            missing_file(&format!("external scores of `{}`", c.label), ext, &mut problems);
        }
    }
    missing_file("lexicon", &cfg.sentiment.lexicon, &mut problems);
    if let Some(p) = &cfg.pretrained {
        missing_file("pretrained vectors", &p.vectors, &mut problems);
        missing_file("form-lemma map", &p.form_lemma_map, &mut problems);
    }

    let labels = cfg.labels();
    let mut seen = HashSet::new();
    let mut reported = HashSet::new();
    for label in &labels {
        if !label_ok(label) {
            problems.push(format!(
                "label `{label}` must be non-empty and use only ASCII letters, digits, '-', '_' or '.'"
            ));
        }
        if !seen.insert(label.as_str()) && reported.insert(label.as_str()) {
            problems.push(format!("duplicate corpus label `{label}`"));
        }
    }
    let top: BTreeSet<&str> = cfg.corpora.iter().map(|c| c.label.as_str()).collect();
    for s in &cfg.subcorpora {
        if !top.contains(s.source.as_str()) {
            problems.push(format!("split source `{}` is not a configured corpus", s.source));
        }
        if s.keywords.iter().all(|k| k.trim().is_empty()) {
            problems.push(format!("split of `{}` has no keywords", s.source));
        }
    }
    let known: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    for c in &cfg.comparisons {
        for side in [&c.first, &c.second] {
            if !known.contains(side.as_str()) {
                problems.push(format!("comparison refers to unknown corpus `{side}`"));
            }
        }
        if c.first == c.second {
            problems.push(format!("comparison of `{}` with itself", c.first));
        }
    }

    let mut concept_names = HashSet::new();
    for r in cfg.concept_refs() {
        match cfg.load_concept(r) {
            Ok(spec) => {
                if !concept_names.insert(spec.name.clone()) {
                    problems.push(format!("concept name `{}` used twice", spec.name));
                }
            }
            Err(e) => problems.push(format!("concept `{r}`: {e}")),
        }
    }
    if cfg.concepts.others.is_empty() {
        problems.push("concepts.others is empty; nothing to compare the target with".into());
    }

    if let Err(e) = cfg.train.validate() {
        problems.push(e.to_string());
    }
    if cfg.train.workers != 1 {
        log::warn!("train.workers > 1: output is deterministic per worker count but differs from single-worker runs");
    }
    if let Err(e) = cfg.bayes.validate() {
        problems.push(e.to_string());
    }
    let a = &cfg.anchors;
    if a.n < 2 {
        problems.push(format!("anchors.n = {} must be at least 2", a.n));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        problems.push(format!("anchors.alpha = {} must lie in (0, 1)", a.alpha));
    }
    if a.p_value == crate::inference::PValueMode::Permutation && a.permutations == 0 {
        problems.push("anchors.permutations must be at least 1".into());
    }
    if cfg.nn.k == 0 {
        problems.push("nn.k must be at least 1".into());
    }
    if cfg.export.bins < 2 {
        problems.push(format!("export.bins = {} must be at least 2", cfg.export.bins));
    }
    if cfg.filter.min_words >= cfg.filter.max_words {
        problems.push("filter.min_words must be below filter.max_words".into());
    }
    if !(0.0..=1.0).contains(&cfg.sentiment.min_coverage) {
        problems.push(format!(
            "sentiment.min_coverage = {} must lie in [0, 1]",
            cfg.sentiment.min_coverage
        ));
    }

    if corpus_files_ok && problems.is_empty() && !cfg.comparisons.is_empty() {
        match anchor_bound(cfg) {
            Ok(Some((available, pair))) if cfg.anchors.n > available => problems.push(format!(
                "anchors.n = {} exceeds the smallest shared vocabulary ({available} lemmas, {pair}); use anchors.n <= {available}",
                cfg.anchors.n
            )),
            Ok(_) => {}
            Err(e) => problems.push(e.to_string()),
        }
    }
    problems
}

/// Smallest shared training vocabulary over all comparisons.
fn anchor_bound(cfg: &PipelineConfig) -> Result<Option<(usize, String)>, PipelineError> {
    let corpora = cfg.ingest_all()?;
    let vocab: BTreeMap<&str, BTreeSet<String>> = corpora
        .iter()
        .map(|c| {
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            for s in c.training_sentences() {
                for l in s {
                    *counts.entry(l).or_insert(0) += 1;
                }
            }
            let kept = counts
                .into_iter()
                .filter(|&(_, n)| n >= cfg.train.min_count)
                .map(|(l, _)| l)
                .collect();
            (c.id.as_str(), kept)
        })
        .collect();
    Ok(cfg
        .comparisons
        .iter()
        .map(|c| {
            let shared = vocab[c.first.as_str()].intersection(&vocab[c.second.as_str()]).count();
            (shared, format!("{} vs {}", c.first, c.second))
        })
        .min())
}
