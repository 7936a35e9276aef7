use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::export::export_distributions;
use super::report::{build_report, render_markdown, DistributionRef};
use super::{validate, PipelineConfig, PipelineError, Stage, TOOLKIT_VERSION};
use crate::bayes::{compare_groups, BayesComparison};
use crate::concepts::{build_concept, nearest_neighbours, ConceptVector, Neighbour};
use crate::corpus::{paragraph_eligible, Corpus, CorpusStats};
use crate::embeddings::{
    collapse_pretrained, read_form_lemma_map, read_text_vectors, train, CollapseReport,
    EmbeddingModel, PretrainedInit, TrainConfig,
};
use crate::inference::{anchored_ks, AnchorConfig, AnchoredKs};
use crate::seed::{content_hash, derive_seed};
use crate::sentiment::{
    external_paragraph_scores, filter_by_coverage, load_external_scores, load_lexicon,
    score_nn_list, score_paragraph, Dimension, NnScoreSample, ParagraphScore, ScoreSource,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the root seed of the config.
    pub seed: Option<u64>,
    /// Last stage to produce; only the stages it depends on run.
    pub stage: Stage,
    /// Re-execute every selected stage even when its cache is current.
    pub force: bool,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions {
            out_dir: out_dir.into(),
            seed: None,
            stage: Stage::Report,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
    /// Config after the seed override.
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStats {
    pub corpus: String,
    pub stats: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub corpus: String,
    pub sentences: usize,
    pub vocabulary: usize,
    /// Vocabulary rows initialised from pretrained vectors.
    pub pretrained_rows: usize,
    pub dim: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArtifact {
    pub config: TrainConfig,
    pub collapse: Option<CollapseReport>,
    pub models: Vec<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConcepts {
    pub corpus: String,
    /// Target concept first.
    pub concepts: Vec<ConceptVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnTable {
    pub corpus: String,
    pub concept: String,
    pub k: usize,
    pub neighbours: Vec<Neighbour>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub corpus: String,
    pub paragraphs: usize,
    /// Paragraphs passing the length, diversity and mention filter.
    pub eligible: usize,
    /// Eligible paragraphs with at least one lexicon word.
    pub lexicon_covered: usize,
    /// Eligible paragraphs dropped for coverage below the threshold.
    pub lexicon_dropped: usize,
    pub lexicon: Vec<ParagraphScore>,
    pub external: Option<Vec<ParagraphScore>>,
    /// Lexicon scores of the target concept's neighbour list.
    pub nn: NnScoreSample,
}

impl CorpusScores {
    pub fn series(&self, source: ScoreSource, dim: Dimension) -> Option<Vec<f64>> {
        let scores = match source {
            ScoreSource::Lexicon => &self.lexicon,
            ScoreSource::External => self.external.as_ref()?,
        };
        Some(scores.iter().filter_map(|s| s.get(dim)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Paragraph,
    Nn,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Paragraph => "paragraph",
            Level::Nn => "nn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesRecord {
    pub first: String,
    pub second: String,
    pub level: Level,
    pub source: ScoreSource,
    pub dimension: Dimension,
    pub comparison: BayesComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesArtifact {
    pub records: Vec<BayesRecord>,
    /// Planned comparisons that lacked data, with the reason.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct BayesPlan {
    first: String,
    second: String,
    level: Level,
    source: ScoreSource,
    dim: Dimension,
}

impl BayesPlan {
    fn seed_key(&self) -> String {
        format!(
            "bayes/{}/{}/{}/{}/{}",
            self.first,
            self.second,
            self.level.name(),
            source_name(self.source),
            self.dim.name()
        )
    }
}

pub(crate) fn source_name(s: ScoreSource) -> &'static str {
    match s {
        ScoreSource::Lexicon => "lexicon",
        ScoreSource::External => "external",
    }
}

fn bayes_plan(cfg: &PipelineConfig) -> Vec<BayesPlan> {
    let mut plan = Vec::new();
    let vad = Dimension::ALL;
    let va = [Dimension::Valence, Dimension::Arousal];
    for c in &cfg.comparisons {
        let both_external =
            cfg.external_scores_for(&c.first).is_some() && cfg.external_scores_for(&c.second).is_some();
        let mut push = |level, source, dims: &[Dimension]| {
            for &dim in dims {
                plan.push(BayesPlan {
                    first: c.first.clone(),
                    second: c.second.clone(),
                    level,
                    source,
                    dim,
                });
            }
        };
        push(Level::Paragraph, ScoreSource::Lexicon, &vad);
        if both_external {
            push(Level::Paragraph, ScoreSource::External, &va);
        }
        push(Level::Nn, ScoreSource::Lexicon, &vad);
    }
    plan
}

/// Every seed the run uses, derived from the root seed by role.
pub fn seeds(cfg: &PipelineConfig) -> BTreeMap<String, u64> {
    let root = cfg.seed;
    let mut out = BTreeMap::new();
    for label in cfg.labels() {
        out.insert(format!("train/{label}"), derive_seed(root, &["train", &label]));
    }
    for c in &cfg.comparisons {
        out.insert(
            format!("anchors/{}/{}", c.first, c.second),
            derive_seed(root, &["anchors", &c.first, &c.second]),
        );
    }
    for p in bayes_plan(cfg) {
        let seed = derive_seed(
            root,
            &["bayes", &p.first, &p.second, p.level.name(), source_name(p.source), p.dim.name()],
        );
        out.insert(p.seed_key(), seed);
    }
    out
}

pub(crate) fn cache_dir(out: &Path, stage: Stage) -> PathBuf {
    out.join("cache").join(stage.name())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<(), PipelineError> {
    let mut bytes = if pretty {
        serde_json::to_vec_pretty(value)
    } else {
        serde_json::to_vec(value)
    }
    .map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path, stage: Stage) -> Result<T, PipelineError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(PipelineError::MissingArtifact {
                stage,
                path: path.display().to_string(),
            })
        }
        Err(e) => return Err(io_err(path)(e)),
    };
    serde_json::from_slice(&bytes).map_err(|source| PipelineError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn artifact_file(stage: Stage) -> &'static str {
    match stage {
        Stage::Ingest => "stats.json",
        Stage::Train => "train.json",
        Stage::Concepts => "concepts.json",
        Stage::Nn => "nn.json",
        Stage::Ks => "ks.json",
        Stage::Score => "scores.json",
        Stage::Bayes => "bayes.json",
        Stage::Report => "report.json",
    }
}

pub(crate) fn artifact_path(out: &Path, stage: Stage) -> PathBuf {
    match stage {
        Stage::Report => out.join("report.json"),
        s => cache_dir(out, s).join(artifact_file(s)),
    }
}

fn model_path(out: &Path, label: &str) -> PathBuf {
    cache_dir(out, Stage::Train).join(format!("{label}.vec"))
}

fn expected_artifacts(cfg: &PipelineConfig, out: &Path, stage: Stage) -> Vec<PathBuf> {
    let mut files = vec![artifact_path(out, stage)];
    match stage {
        Stage::Ingest => files.push(cache_dir(out, stage).join("corpora.json")),
        Stage::Train => {
            for label in cfg.labels() {
                let vec = model_path(out, &label);
                files.push(vec.with_extension("meta.json"));
                files.push(vec);
            }
        }
        Stage::Report => files.push(out.join("report.md")),
        _ => {}
    }
    files
}

fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(content_hash([bytes]))
}

fn stage_params(cfg: &PipelineConfig, seeds: &BTreeMap<String, u64>, stage: Stage) -> Result<(serde_json::Value, Vec<PathBuf>), PipelineError> {
    let seeds_with = |prefix: &str| -> BTreeMap<&String, &u64> {
        seeds.iter().filter(|(k, _)| k.starts_with(prefix)).collect()
    };
    Ok(match stage {
        Stage::Ingest => {
            let corpora: Vec<_> = cfg.corpora.iter().map(|c| json!([c.label, c.format])).collect();
            (
                json!({ "corpora": corpora, "subcorpora": cfg.subcorpora }),
                cfg.corpora.iter().map(|c| cfg.resolve(&c.path)).collect(),
            )
        }
        Stage::Train => (
            json!({ "train": cfg.train, "seeds": seeds_with("train/"), "pretrained": cfg.pretrained.is_some() }),
            cfg.pretrained
                .iter()
                .flat_map(|p| [cfg.resolve(&p.vectors), cfg.resolve(&p.form_lemma_map)])
                .collect(),
        ),
        Stage::Concepts => {
            let specs: Vec<String> = cfg.load_concepts()?.iter().map(|s| s.to_text()).collect();
            (json!({ "concepts": specs }), Vec::new())
        }
        Stage::Nn => (json!({ "k": cfg.nn.k }), Vec::new()),
        Stage::Ks => (
            json!({ "anchors": cfg.anchors, "comparisons": cfg.comparisons, "seeds": seeds_with("anchors/") }),
            Vec::new(),
        ),
        Stage::Score => {
            let mut files = vec![cfg.resolve(&cfg.sentiment.lexicon)];
            let mut external = BTreeMap::new();
            for label in cfg.labels() {
                if let Some(p) = cfg.external_scores_for(&label) {
                    external.insert(label, p.display().to_string());
                    files.push(p);
                }
            }
            (
                json!({ "filter": cfg.filter, "min_coverage": cfg.sentiment.min_coverage, "external": external.keys().collect::<Vec<_>>() }),
                files,
            )
        }
        Stage::Bayes => (
            json!({ "bayes": cfg.bayes, "comparisons": cfg.comparisons, "seeds": seeds_with("bayes/") }),
            Vec::new(),
        ),
        Stage::Report => (json!({ "config": cfg, "seeds": seeds }), Vec::new()),
    })
}

fn stage_keys(cfg: &PipelineConfig, seeds: &BTreeMap<String, u64>) -> Result<BTreeMap<Stage, String>, PipelineError> {
    let mut keys: BTreeMap<Stage, String> = BTreeMap::new();
    for stage in Stage::ALL {
        let (params, files) = stage_params(cfg, seeds, stage)?;
        let mut parts: Vec<Vec<u8>> = vec![
            stage.name().as_bytes().to_vec(),
            TOOLKIT_VERSION.as_bytes().to_vec(),
            params.to_string().into_bytes(),
        ];
        for f in files {
            parts.push(file_digest(&f)?.into_bytes());
        }
        for d in stage.deps() {
            parts.push(keys[d].clone().into_bytes());
        }
        keys.insert(stage, content_hash(parts));
    }
    Ok(keys)
}

fn key_path(out: &Path, stage: Stage) -> PathBuf {
    cache_dir(out, stage).join("key")
}

fn clear_stage(out: &Path, stage: Stage) -> Result<(), PipelineError> {
    let dir = cache_dir(out, stage);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    if stage == Stage::Report {
        for f in [out.join("report.json"), out.join("report.md")] {
            if f.exists() {
                std::fs::remove_file(&f).map_err(io_err(&f))?;
            }
        }
        let d = out.join("distributions");
        if d.exists() {
            std::fs::remove_dir_all(&d).map_err(io_err(&d))?;
        }
    }
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))
}

/// Runs the selected stage and everything it depends on, reusing cached
/// stages whose key matches, whose artifacts exist and whose upstream did
/// not re-run.
pub fn run(cfg: &PipelineConfig, opts: &RunOptions) -> Result<RunOutcome, PipelineError> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let problems = validate(&cfg);
    if !problems.is_empty() {
        return Err(PipelineError::Invalid(problems));
    }
    let seeds = seeds(&cfg);
    let keys = stage_keys(&cfg, &seeds)?;
    let out = opts.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;

    let mut ctx = Ctx::new(&cfg, &seeds, &out);
    let mut outcome = RunOutcome {
        executed: Vec::new(),
        skipped: Vec::new(),
        config: cfg.clone(),
    };
    for stage in opts.stage.closure() {
        let stored = std::fs::read_to_string(key_path(&out, stage)).ok();
        let current = stored.as_deref().map(str::trim) == Some(keys[&stage].as_str());
        let present = expected_artifacts(&cfg, &out, stage).iter().all(|p| p.is_file());
        let upstream_ran = stage.deps().iter().any(|d| outcome.executed.contains(d));
        if !opts.force && current && present && !upstream_ran {
            log::info!("stage {stage}: up to date");
            outcome.skipped.push(stage);
            continue;
        }
        log::info!("stage {stage}: running");
        clear_stage(&out, stage).map_err(|e| stage_err(stage, e))?;
        ctx.execute(stage).map_err(|e| stage_err(stage, e))?;
        let kp = key_path(&out, stage);
        std::fs::write(&kp, format!("{}\n", keys[&stage]))
            .map_err(io_err(&kp))
            .map_err(|e| stage_err(stage, e))?;
        outcome.executed.push(stage);
    }
    Ok(outcome)
}

fn stage_err(stage: Stage, e: PipelineError) -> PipelineError {
    PipelineError::Stage {
        stage,
        source: Box::new(e),
    }
}

/// Writes histogram and density tables for every score source and
/// dimension into `dir`. Paths in the returned references are relative to
/// `relative_to`.
pub fn write_distributions(
    scores: &[CorpusScores],
    bins: usize,
    dir: &Path,
    relative_to: &Path,
) -> Result<Vec<DistributionRef>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut refs = Vec::new();
    let plan = [
        (ScoreSource::Lexicon, &Dimension::ALL[..]),
        (ScoreSource::External, &[Dimension::Valence, Dimension::Arousal][..]),
    ];
    for (source, dims) in plan {
        for &dim in dims {
            let series: Vec<(String, Vec<f64>)> = scores
                .iter()
                .filter_map(|s| s.series(source, dim).map(|v| (s.corpus.clone(), v)))
                .collect();
            if series.is_empty() {
                continue;
            }
            let export = export_distributions(&series, bins)?;
            let stem = format!("{}_{}", source_name(source), dim.name());
            let hist = dir.join(format!("{stem}_hist.tsv"));
            let kde = dir.join(format!("{stem}_kde.tsv"));
            std::fs::write(&hist, export.histogram_tsv()).map_err(io_err(&hist))?;
            std::fs::write(&kde, export.density_tsv()).map_err(io_err(&kde))?;
            let rel = |p: &Path| {
                p.strip_prefix(relative_to)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .replace('\\', "/")
            };
            refs.push(DistributionRef {
                source,
                dimension: dim,
                bins,
                series: series.iter().map(|(l, v)| (l.clone(), v.len())).collect(),
                histogram: rel(&hist),
                density: rel(&kde),
            });
        }
    }
    Ok(refs)
}

/// Distribution tables from the stored score artifacts, written to `<out>/export`.
pub fn export_stored_scores(out: &Path, bins: usize) -> Result<Vec<DistributionRef>, PipelineError> {
    let scores: Vec<CorpusScores> = read_json(&artifact_path(out, Stage::Score), Stage::Score)?;
    write_distributions(&scores, bins, &out.join("export"), out)
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    seeds: &'a BTreeMap<String, u64>,
    out: &'a Path,
    corpora: Option<Vec<Corpus>>,
    models: Option<Vec<EmbeddingModel>>,
    concepts: Option<Vec<CorpusConcepts>>,
    nn: Option<Vec<NnTable>>,
    scores: Option<Vec<CorpusScores>>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a PipelineConfig, seeds: &'a BTreeMap<String, u64>, out: &'a Path) -> Self {
        Ctx {
            cfg,
            seeds,
            out,
            corpora: None,
            models: None,
            concepts: None,
            nn: None,
            scores: None,
        }
    }

    fn execute(&mut self, stage: Stage) -> Result<(), PipelineError> {
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::Train => self.train(),
            Stage::Concepts => self.concepts(),
            Stage::Nn => self.nn(),
            Stage::Ks => self.ks(),
            Stage::Score => self.score(),
            Stage::Bayes => self.bayes(),
            Stage::Report => self.report(),
        }
    }

    fn dir(&self, stage: Stage) -> PathBuf {
        cache_dir(self.out, stage)
    }

    fn need_corpora(&mut self) -> Result<(), PipelineError> {
        if self.corpora.is_none() {
            let path = self.dir(Stage::Ingest).join("corpora.json");
            self.corpora = Some(read_json(&path, Stage::Ingest)?);
        }
        Ok(())
    }

    fn need_models(&mut self) -> Result<(), PipelineError> {
        if self.models.is_none() {
            let models = self
                .cfg
                .labels()
                .iter()
                .map(|l| {
                    let p = model_path(self.out, l);
                    if !p.is_file() {
                        return Err(PipelineError::MissingArtifact {
                            stage: Stage::Train,
                            path: p.display().to_string(),
                        });
                    }
                    Ok(EmbeddingModel::load(&p)?)
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            self.models = Some(models);
        }
        Ok(())
    }

    fn need_concepts(&mut self) -> Result<(), PipelineError> {
        if self.concepts.is_none() {
            self.concepts = Some(read_json(&artifact_path(self.out, Stage::Concepts), Stage::Concepts)?);
        }
        Ok(())
    }

    fn need_nn(&mut self) -> Result<(), PipelineError> {
        if self.nn.is_none() {
            self.nn = Some(read_json(&artifact_path(self.out, Stage::Nn), Stage::Nn)?);
        }
        Ok(())
    }

    fn need_scores(&mut self) -> Result<(), PipelineError> {
        if self.scores.is_none() {
            self.scores = Some(read_json(&artifact_path(self.out, Stage::Score), Stage::Score)?);
        }
        Ok(())
    }

    fn ingest(&mut self) -> Result<(), PipelineError> {
        let corpora = self.cfg.ingest_all()?;
        let stats: Vec<LabeledStats> = corpora
            .iter()
            .map(|c| LabeledStats {
                corpus: c.id.clone(),
                stats: c.stats(),
            })
            .collect();
        write_json(&self.dir(Stage::Ingest).join("corpora.json"), &corpora, false)?;
        write_json(&artifact_path(self.out, Stage::Ingest), &stats, true)?;
        self.corpora = Some(corpora);
        Ok(())
    }

    fn pretrained(&self) -> Result<Option<(PretrainedInit, CollapseReport)>, PipelineError> {
        let Some(p) = &self.cfg.pretrained else {
            return Ok(None);
        };
        let vectors = read_text_vectors(&self.cfg.resolve(&p.vectors))?;
        let map = read_form_lemma_map(&self.cfg.resolve(&p.form_lemma_map))?;
        let (init, report) = collapse_pretrained(&vectors.rows, &map)?;
        Ok(Some((init, report)))
    }

    fn train(&mut self) -> Result<(), PipelineError> {
        self.need_corpora()?;
        let pretrained = self.pretrained()?;
        let init = pretrained.as_ref().map(|(i, _)| i);
        let corpora = self.corpora.as_deref().expect("loaded");
        let results = corpora
            .par_iter()
            .map(|c| {
                let mut tc = self.cfg.train.clone();
                tc.seed = self.seeds[&format!("train/{}", c.id)];
                let sentences = c.training_sentences();
                let model = train(&c.id, &sentences, init, &tc)?;
                model.save(&model_path(self.out, &c.id))?;
                let pretrained_rows = init.map_or(0, |i| {
                    model.lemmas().iter().filter(|l| i.lemma_vectors.contains_key(*l)).count()
                });
                let summary = ModelSummary {
                    corpus: c.id.clone(),
                    sentences: sentences.len(),
                    vocabulary: model.len(),
                    pretrained_rows,
                    dim: model.dim(),
                    seed: tc.seed,
                };
                Ok((model, summary))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let (models, summaries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let artifact = TrainArtifact {
            config: self.cfg.train.clone(),
            collapse: pretrained.map(|(_, r)| r),
            models: summaries,
        };
        write_json(&artifact_path(self.out, Stage::Train), &artifact, true)?;
        self.models = Some(models);
        Ok(())
    }

    fn concepts(&mut self) -> Result<(), PipelineError> {
        self.need_models()?;
        let specs = self.cfg.load_concepts()?;
        let models = self.models.as_deref().expect("loaded");
        let out = models
            .iter()
            .map(|m| {
                Ok(CorpusConcepts {
                    corpus: m.corpus_id.clone(),
                    concepts: specs
                        .iter()
                        .map(|s| build_concept(m, s))
                        .collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        write_json(&artifact_path(self.out, Stage::Concepts), &out, true)?;
        self.concepts = Some(out);
        Ok(())
    }

    fn nn(&mut self) -> Result<(), PipelineError> {
        self.need_models()?;
        self.need_concepts()?;
        let models = self.models.as_deref().expect("loaded");
        let concepts = self.concepts.as_deref().expect("loaded");
        let mut tables = Vec::new();
        for (m, cc) in models.iter().zip(concepts) {
            for cv in &cc.concepts {
                tables.push(NnTable {
                    corpus: m.corpus_id.clone(),
                    concept: cv.spec.name.clone(),
                    k: self.cfg.nn.k,
                    neighbours: nearest_neighbours(m, &cv.vector, self.cfg.nn.k, &cv.spec.exclusion_roots)?,
                });
            }
        }
        write_json(&artifact_path(self.out, Stage::Nn), &tables, true)?;
        self.nn = Some(tables);
        Ok(())
    }

    fn ks(&mut self) -> Result<(), PipelineError> {
        self.need_models()?;
        self.need_concepts()?;
        let labels = self.cfg.labels();
        let idx = |l: &str| labels.iter().position(|x| x == l).expect("validated label");
        let models = self.models.as_deref().expect("loaded");
        let concepts = self.concepts.as_deref().expect("loaded");
        let mut out: Vec<AnchoredKs> = Vec::new();
        for c in &self.cfg.comparisons {
            let (i, j) = (idx(&c.first), idx(&c.second));
            let ac = AnchorConfig {
                seed: self.seeds[&format!("anchors/{}/{}", c.first, c.second)],
                ..self.cfg.anchors.clone()
            };
            let (c1, c2) = (&concepts[i].concepts, &concepts[j].concepts);
            for k in 1..c1.len() {
                out.push(anchored_ks(&models[i], (&c1[0], &c1[k]), &models[j], (&c2[0], &c2[k]), &ac)?);
            }
        }
        write_json(&artifact_path(self.out, Stage::Ks), &out, true)?;
        Ok(())
    }

    fn score(&mut self) -> Result<(), PipelineError> {
        self.need_corpora()?;
        self.need_nn()?;
        let lex = load_lexicon(&self.cfg.resolve(&self.cfg.sentiment.lexicon))?;
        if lex.duplicates_merged > 0 {
            log::warn!("lexicon: {} duplicate entries averaged", lex.duplicates_merged);
        }
        let target = self.cfg.load_concept(&self.cfg.concepts.target)?.name;
        let corpora = self.corpora.as_deref().expect("loaded");
        let nn = self.nn.as_deref().expect("loaded");
        let mut out = Vec::new();
        for c in corpora {
            let eligible: Vec<_> = c
                .paragraphs()
                .filter(|p| paragraph_eligible(p, &self.cfg.filter))
                .collect();
            let lexical: Vec<ParagraphScore> = eligible.iter().map(|p| score_paragraph(p, &lex)).collect();
            let covered = lexical.iter().filter(|s| s.coverage > 0.0).count();
            let before = lexical.len();
            let kept = filter_by_coverage(lexical, self.cfg.sentiment.min_coverage);
            let external = match self.cfg.external_scores_for(&c.id) {
                Some(p) => Some(external_paragraph_scores(eligible.iter().copied(), &load_external_scores(&p)?)),
                None => None,
            };
            let table = nn
                .iter()
                .find(|t| t.corpus == c.id && t.concept == target)
                .ok_or_else(|| PipelineError::MissingArtifact {
                    stage: Stage::Nn,
                    path: format!("{} neighbours of `{target}` for `{}`", artifact_file(Stage::Nn), c.id),
                })?;
            let lemmas: Vec<&str> = table.neighbours.iter().map(|n| n.lemma.as_str()).collect();
            out.push(CorpusScores {
                corpus: c.id.clone(),
                paragraphs: c.paragraphs().count(),
                eligible: eligible.len(),
                lexicon_covered: covered,
                lexicon_dropped: before - kept.len(),
                lexicon: kept,
                external,
                nn: score_nn_list(&target, &c.id, &lemmas, &lex),
            });
        }
        write_json(&artifact_path(self.out, Stage::Score), &out, true)?;
        self.scores = Some(out);
        Ok(())
    }

    fn bayes(&mut self) -> Result<(), PipelineError> {
        self.need_scores()?;
        let scores = self.scores.as_deref().expect("loaded");
        let find = |l: &str| scores.iter().find(|s| s.corpus == l).expect("validated label");
        let mut artifact = BayesArtifact {
            records: Vec::new(),
            skipped: Vec::new(),
        };
        for plan in bayes_plan(self.cfg) {
            let values = |label: &str| -> Vec<f64> {
                let s = find(label);
                match plan.level {
                    Level::Paragraph => s.series(plan.source, plan.dim).unwrap_or_default(),
                    Level::Nn => s.nn.values(plan.dim).to_vec(),
                }
            };
            let (a, b) = (values(&plan.first), values(&plan.second));
            if a.len() < 2 || b.len() < 2 {
                artifact.skipped.push(format!(
                    "{}: too few values ({} vs {})",
                    plan.seed_key(),
                    a.len(),
                    b.len()
                ));
                continue;
            }
            let mut bc = self.cfg.bayes.clone();
            bc.seed = self.seeds[&plan.seed_key()];
            let comparison = compare_groups(&a, &b, &bc)?;
            if !comparison.diagnostics.converged {
                log::warn!("{}: chains did not converge", plan.seed_key());
            }
            artifact.records.push(BayesRecord {
                first: plan.first.clone(),
                second: plan.second.clone(),
                level: plan.level,
                source: plan.source,
                dimension: plan.dim,
                comparison,
            });
        }
        write_json(&artifact_path(self.out, Stage::Bayes), &artifact, true)?;
        Ok(())
    }

    fn report(&mut self) -> Result<(), PipelineError> {
        let report = build_report(self.cfg, self.seeds, self.out, |scores| {
            write_distributions(scores, self.cfg.export.bins, &self.out.join("distributions"), self.out)
        })?;
        write_json(&artifact_path(self.out, Stage::Report), &report, true)?;
        let md = self.out.join("report.md");
        std::fs::write(&md, render_markdown(&report)).map_err(io_err(&md))?;
        Ok(())
    }
}
