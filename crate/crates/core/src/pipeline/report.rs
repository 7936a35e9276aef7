use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stages::{
    artifact_path, read_json, source_name, BayesArtifact, BayesRecord, CorpusConcepts, CorpusScores,
    LabeledStats, NnTable, TrainArtifact,
};
use super::{PipelineConfig, PipelineError, Stage, TOOLKIT_VERSION};
use crate::concepts::cosine;
use crate::corpus::CorpusStats;
use crate::inference::{AnchoredKs, PValueMode};
use crate::sentiment::{Dimension, ScoreSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRef {
    pub source: ScoreSource,
    pub dimension: Dimension,
    pub bins: usize,
    /// Series label and sample size, in column order.
    pub series: Vec<(String, usize)>,
    pub histogram: String,
    pub density: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub corpus: String,
    pub target: String,
    pub other: String,
    pub cosine: f64,
    pub target_terms_used: usize,
    pub other_terms_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub corpus_1: String,
    pub corpus_2: String,
    pub concept_a: String,
    pub concept_b: String,
    pub similarity_1: f64,
    pub similarity_2: f64,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub p_value_mode: PValueMode,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

impl From<&AnchoredKs> for KsRow {
    fn from(k: &AnchoredKs) -> Self {
        KsRow {
            corpus_1: k.corpus_1.clone(),
            corpus_2: k.corpus_2.clone(),
            concept_a: k.concept_a.clone(),
            concept_b: k.concept_b.clone(),
            similarity_1: k.similarity_1,
            similarity_2: k.similarity_2,
            n: k.n,
            seed: k.seed,
            alpha: k.alpha,
            p_value_mode: k.p_value_mode,
            statistic: k.statistic,
            p_value: k.p_value,
            significant: k.significant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSummary {
    pub dimension: Dimension,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn summarize(dimension: Dimension, values: &[f64]) -> Option<DimSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Some(DimSummary {
        dimension,
        n,
        mean,
        sd,
        median,
        min: sorted[0],
        max: sorted[n - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub corpus: String,
    pub source: ScoreSource,
    pub paragraphs: usize,
    pub eligible: usize,
    /// Lexicon: eligible paragraphs with any covered word. External: matched ids.
    pub covered: usize,
    /// Lexicon paragraphs removed by the coverage threshold.
    pub dropped: usize,
    pub kept: usize,
    pub dimensions: Vec<DimSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnScoreSummary {
    pub corpus: String,
    pub concept: String,
    pub neighbours: usize,
    pub covered: usize,
    pub coverage: f64,
    pub dimensions: Vec<DimSummary>,
}

/// Everything a run produced, assembled from the stored stage artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub toolkit: String,
    pub seeds: BTreeMap<String, u64>,
    pub notes: Vec<String>,
    pub corpus_stats: Vec<LabeledStats>,
    pub embeddings: TrainArtifact,
    pub concept_similarity: Vec<SimilarityRow>,
    pub ks: Vec<KsRow>,
    pub nearest_neighbours: Vec<NnTable>,
    pub paragraph_scores: Vec<ScoreSummary>,
    pub nn_scores: Vec<NnScoreSummary>,
    pub bayes: Vec<BayesRecord>,
    pub bayes_skipped: Vec<String>,
    pub distributions: Vec<DistributionRef>,
    pub config: PipelineConfig,
}

fn notes(cfg: &PipelineConfig) -> Vec<String> {
    let dim = match (cfg.train.dim, &cfg.pretrained) {
        (Some(d), _) => d.to_string(),
        (None, Some(_)) => "taken from the pretrained vectors".into(),
        (None, None) => crate::embeddings::DEFAULT_DIM.to_string(),
    };
    vec![
        format!(
            "Credible intervals are highest-density intervals at mass {}; the mass is a configurable choice.",
            cfg.bayes.ci_mass
        ),
        "prob_diff is the posterior probability P(mu_first > mu_second).".into(),
        "Cohen's d pools the two posterior sds as the root mean of their variances.".into(),
        "The KS `statistic` is the two-sample D on the anchored differences; reading published k values as D is an assumption.".into(),
        "KS p-values are reported raw, without multiple-comparison correction.".into(),
        format!(
            "Embedding window ({}) and negative samples ({}) are configured defaults; dimensionality: {dim}.",
            cfg.train.window, cfg.train.negatives
        ),
        format!(
            "Lexicon paragraph scores average over word tokens; paragraphs below {} coverage are dropped.",
            cfg.sentiment.min_coverage
        ),
    ]
}

fn similarity_rows(concepts: &[CorpusConcepts]) -> Result<Vec<SimilarityRow>, PipelineError> {
    let mut rows = Vec::new();
    for cc in concepts {
        let target = &cc.concepts[0];
        for other in &cc.concepts[1..] {
            rows.push(SimilarityRow {
                corpus: cc.corpus.clone(),
                target: target.spec.name.clone(),
                other: other.spec.name.clone(),
                cosine: cosine(&target.vector, &other.vector)?,
                target_terms_used: target.used_terms.len(),
                other_terms_used: other.used_terms.len(),
            });
        }
    }
    Ok(rows)
}

fn score_summaries(scores: &[CorpusScores]) -> (Vec<ScoreSummary>, Vec<NnScoreSummary>) {
    let mut para = Vec::new();
    let mut nn = Vec::new();
    for s in scores {
        let dims = |source: ScoreSource, dims: &[Dimension]| -> Vec<DimSummary> {
            dims.iter()
                .filter_map(|&d| summarize(d, &s.series(source, d).unwrap_or_default()))
                .collect()
        };
        para.push(ScoreSummary {
            corpus: s.corpus.clone(),
            source: ScoreSource::Lexicon,
            paragraphs: s.paragraphs,
            eligible: s.eligible,
            covered: s.lexicon_covered,
            dropped: s.lexicon_dropped,
            kept: s.lexicon.len(),
            dimensions: dims(ScoreSource::Lexicon, &Dimension::ALL),
        });
        if let Some(ext) = &s.external {
            para.push(ScoreSummary {
                corpus: s.corpus.clone(),
                source: ScoreSource::External,
                paragraphs: s.paragraphs,
                eligible: s.eligible,
                covered: ext.len(),
                dropped: 0,
                kept: ext.len(),
                dimensions: dims(ScoreSource::External, &[Dimension::Valence, Dimension::Arousal]),
            });
        }
        let total = if s.nn.coverage > 0.0 {
            (s.nn.lemmas.len() as f64 / s.nn.coverage).round() as usize
        } else {
            0
        };
        nn.push(NnScoreSummary {
            corpus: s.corpus.clone(),
            concept: s.nn.concept.clone(),
            neighbours: total,
            covered: s.nn.lemmas.len(),
            coverage: s.nn.coverage,
            dimensions: Dimension::ALL
                .iter()
                .filter_map(|&d| summarize(d, s.nn.values(d)))
                .collect(),
        });
    }
    (para, nn)
}

pub(crate) fn build_report(
    cfg: &PipelineConfig,
    seeds: &BTreeMap<String, u64>,
    out: &Path,
    write_distributions: impl FnOnce(&[CorpusScores]) -> Result<Vec<DistributionRef>, PipelineError>,
) -> Result<RunReport, PipelineError> {
    let corpus_stats: Vec<LabeledStats> = read_json(&artifact_path(out, Stage::Ingest), Stage::Ingest)?;
    let embeddings: TrainArtifact = read_json(&artifact_path(out, Stage::Train), Stage::Train)?;
    let concepts: Vec<CorpusConcepts> = read_json(&artifact_path(out, Stage::Concepts), Stage::Concepts)?;
    let nearest_neighbours: Vec<NnTable> = read_json(&artifact_path(out, Stage::Nn), Stage::Nn)?;
    let ks: Vec<AnchoredKs> = read_json(&artifact_path(out, Stage::Ks), Stage::Ks)?;
    let scores: Vec<CorpusScores> = read_json(&artifact_path(out, Stage::Score), Stage::Score)?;
    let bayes: BayesArtifact = read_json(&artifact_path(out, Stage::Bayes), Stage::Bayes)?;
    let (paragraph_scores, nn_scores) = score_summaries(&scores);
    Ok(RunReport {
        toolkit: TOOLKIT_VERSION.to_string(),
        seeds: seeds.clone(),
        notes: notes(cfg),
        corpus_stats,
        embeddings,
        concept_similarity: similarity_rows(&concepts)?,
        ks: ks.iter().map(KsRow::from).collect(),
        nearest_neighbours,
        paragraph_scores,
        nn_scores,
        bayes: bayes.records,
        bayes_skipped: bayes.skipped,
        distributions: write_distributions(&scores)?,
        config: cfg.clone(),
    })
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn p_fmt(p: f64) -> String {
    if p != 0.0 && p < 1e-3 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn render_stats(out: &mut String, stats: &[LabeledStats]) {
    out.push_str("## Corpus statistics\n\n");
    let mut header = vec!["statistic"];
    header.extend(stats.iter().map(|s| s.corpus.as_str()));
    let rows_per: Vec<Vec<(&str, String)>> = stats.iter().map(|s| s.stats.rows()).collect();
    let names: Vec<&str> = CorpusStats::default().rows().iter().map(|r| r.0).collect();
    let rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            std::iter::once(name.to_string())
                .chain(rows_per.iter().map(|r| r[i].1.clone()))
                .collect()
        })
        .collect();
    table(out, &header, &rows);
}

fn render_embeddings(out: &mut String, t: &TrainArtifact) {
    out.push_str("## Embeddings\n\n");
    if let Some(c) = &t.collapse {
        let _ = writeln!(
            out,
            "Pretrained vocabulary: {} forms collapsed to {} lemmas ({:.1}% reduction), {} unmapped forms dropped ({:.1}%).\n",
            c.forms_in,
            c.lemmas_out,
            100.0 * c.reduction(),
            c.forms_dropped,
            100.0 * c.drop_rate()
        );
    }
    let _ = writeln!(
        out,
        "Training: {} epochs, window {}, {} negatives, min_count {}, learning rate {} to {}, {} worker(s).\n",
        t.config.epochs, t.config.window, t.config.negatives, t.config.min_count, t.config.alpha, t.config.min_alpha, t.config.workers
    );
    let rows: Vec<Vec<String>> = t
        .models
        .iter()
        .map(|m| {
            vec![
                m.corpus.clone(),
                m.sentences.to_string(),
                m.vocabulary.to_string(),
                m.pretrained_rows.to_string(),
                m.dim.to_string(),
                m.seed.to_string(),
            ]
        })
        .collect();
    table(out, &["corpus", "sentences", "vocabulary", "pretrained rows", "dim", "seed"], &rows);
}

fn render_similarity(out: &mut String, rows: &[SimilarityRow]) {
    out.push_str("## Concept similarity\n\n");
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.corpus.clone(),
                format!("{} / {}", r.target, r.other),
                f4(r.cosine),
                format!("{} / {}", r.target_terms_used, r.other_terms_used),
            ]
        })
        .collect();
    table(out, &["corpus", "pair", "cosine", "terms used"], &rows);
}

fn render_ks(out: &mut String, rows: &[KsRow]) {
    out.push_str("## Anchored KS comparisons\n\n");
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|k| {
            vec![
                format!("{} vs {}", k.corpus_1, k.corpus_2),
                format!("{} / {}", k.concept_a, k.concept_b),
                f4(k.similarity_1),
                f4(k.similarity_2),
                k.n.to_string(),
                f4(k.statistic),
                p_fmt(k.p_value),
                if k.significant { format!("yes (alpha {})", k.alpha) } else { format!("no (alpha {})", k.alpha) },
                k.seed.to_string(),
            ]
        })
        .collect();
    table(
        out,
        &["corpora", "pair", "cosine 1", "cosine 2", "n", "statistic", "p", "significant", "seed"],
        &rows,
    );
}

fn render_nn(out: &mut String, tables: &[NnTable], top: usize) {
    out.push_str("## Nearest neighbours\n\n");
    for t in tables {
        let _ = writeln!(
            out,
            "### {} in {} (top {} of {})\n",
            t.concept,
            t.corpus,
            top.min(t.neighbours.len()),
            t.neighbours.len()
        );
        let rows: Vec<Vec<String>> = t
            .neighbours
            .iter()
            .take(top)
            .enumerate()
            .map(|(i, n)| vec![(i + 1).to_string(), n.lemma.clone(), f4(n.cosine)])
            .collect();
        table(out, &["rank", "lemma", "cosine"], &rows);
    }
}

fn dim_cells(dims: &[DimSummary], d: Dimension) -> String {
    dims.iter()
        .find(|s| s.dimension == d)
        .map(|s| format!("{} ± {}", f4(s.mean), f4(s.sd)))
        .unwrap_or_else(|| "-".into())
}

fn render_scores(out: &mut String, para: &[ScoreSummary], nn: &[NnScoreSummary]) {
    out.push_str("## Paragraph scores\n\n");
    let rows: Vec<Vec<String>> = para
        .iter()
        .map(|s| {
            vec![
                s.corpus.clone(),
                source_name(s.source).to_string(),
                s.paragraphs.to_string(),
                s.eligible.to_string(),
                s.covered.to_string(),
                s.dropped.to_string(),
                s.kept.to_string(),
                dim_cells(&s.dimensions, Dimension::Valence),
                dim_cells(&s.dimensions, Dimension::Arousal),
                dim_cells(&s.dimensions, Dimension::Dominance),
            ]
        })
        .collect();
    table(
        out,
        &["corpus", "source", "paragraphs", "eligible", "covered", "dropped", "kept", "valence", "arousal", "dominance"],
        &rows,
    );
    out.push_str("## Neighbour-list scores\n\n");
    let rows: Vec<Vec<String>> = nn
        .iter()
        .map(|s| {
            vec![
                s.corpus.clone(),
                s.concept.clone(),
                format!("{} / {}", s.covered, s.neighbours),
                f4(s.coverage),
                dim_cells(&s.dimensions, Dimension::Valence),
                dim_cells(&s.dimensions, Dimension::Arousal),
                dim_cells(&s.dimensions, Dimension::Dominance),
            ]
        })
        .collect();
    table(out, &["corpus", "concept", "covered", "coverage", "valence", "arousal", "dominance"], &rows);
}

fn render_bayes(out: &mut String, records: &[BayesRecord], skipped: &[String]) {
    out.push_str("## Bayesian group comparisons\n\n");
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let c = &r.comparison;
            vec![
                format!("{} vs {}", r.first, r.second),
                r.level.name().to_string(),
                source_name(r.source).to_string(),
                r.dimension.name().to_string(),
                format!("{} / {}", c.group_a.n, c.group_b.n),
                format!("{} / {}", f4(c.group_a.mu_mean), f4(c.group_b.mu_mean)),
                f4(c.prob_diff),
                format!("{} [{}, {}]", f4(c.delta_mean), f4(c.delta_ci.lower), f4(c.delta_ci.upper)),
                format!("{} [{}, {}]", f4(c.cohens_d), f4(c.cohens_d_ci.lower), f4(c.cohens_d_ci.upper)),
                if c.diagnostics.converged { "yes".into() } else { "no".into() },
                c.seed.to_string(),
            ]
        })
        .collect();
    table(
        out,
        &["groups", "level", "source", "dimension", "n", "mu", "P(first > second)", "delta [HDI]", "Cohen's d [HDI]", "converged", "seed"],
        &rows,
    );
    if !skipped.is_empty() {
        out.push_str("Skipped:\n\n");
        for s in skipped {
            let _ = writeln!(out, "- {s}");
        }
        out.push('\n');
    }
}

fn render_distributions(out: &mut String, refs: &[DistributionRef]) {
    out.push_str("## Score distributions\n\n");
    let rows: Vec<Vec<String>> = refs
        .iter()
        .map(|d| {
            vec![
                source_name(d.source).to_string(),
                d.dimension.name().to_string(),
                d.series
                    .iter()
                    .map(|(l, n)| format!("{l} ({n})"))
                    .collect::<Vec<_>>()
                    .join(", "),
                d.bins.to_string(),
                format!("`{}`", d.histogram),
                format!("`{}`", d.density),
            ]
        })
        .collect();
    table(out, &["source", "dimension", "series", "bins", "histogram", "density"], &rows);
}

pub(crate) fn render_markdown(r: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run report\n\nToolkit: {}. Root seed: {}.\n", r.toolkit, r.config.seed);
    out.push_str("## Notes\n\n");
    for n in &r.notes {
        let _ = writeln!(out, "- {n}");
    }
    out.push('\n');
    render_stats(&mut out, &r.corpus_stats);
    render_embeddings(&mut out, &r.embeddings);
    render_similarity(&mut out, &r.concept_similarity);
    render_ks(&mut out, &r.ks);
    render_nn(&mut out, &r.nearest_neighbours, r.config.nn.report_top);
    render_scores(&mut out, &r.paragraph_scores, &r.nn_scores);
    render_bayes(&mut out, &r.bayes, &r.bayes_skipped);
    render_distributions(&mut out, &r.distributions);
    out.push_str("## Seeds\n\n");
    let rows: Vec<Vec<String>> = r.seeds.iter().map(|(k, v)| vec![k.clone(), v.to_string()]).collect();
    table(&mut out, &["role", "seed"], &rows);
    out.push_str("## Configuration\n\n```json\n");
    out.push_str(&serde_json::to_string_pretty(&r.config).expect("config serializes"));
    out.push_str("\n```\n");
    out
}

/// Readable summary of one stage's stored artifacts.
pub fn stage_summary(cfg: &PipelineConfig, out: &Path, stage: Stage) -> Result<String, PipelineError> {
    let mut s = String::new();
    match stage {
        Stage::Ingest => render_stats(&mut s, &read_json::<Vec<LabeledStats>>(&artifact_path(out, stage), stage)?),
        Stage::Train => render_embeddings(&mut s, &read_json(&artifact_path(out, stage), stage)?),
        Stage::Concepts => {
            let concepts: Vec<CorpusConcepts> = read_json(&artifact_path(out, stage), stage)?;
            render_similarity(&mut s, &similarity_rows(&concepts)?);
        }
        Stage::Nn => render_nn(&mut s, &read_json::<Vec<NnTable>>(&artifact_path(out, stage), stage)?, cfg.nn.report_top),
        Stage::Ks => {
            let ks: Vec<AnchoredKs> = read_json(&artifact_path(out, stage), stage)?;
            render_ks(&mut s, &ks.iter().map(KsRow::from).collect::<Vec<_>>());
        }
        Stage::Score => {
            let scores: Vec<CorpusScores> = read_json(&artifact_path(out, stage), stage)?;
            let (para, nn) = score_summaries(&scores);
            render_scores(&mut s, &para, &nn);
        }
        Stage::Bayes => {
            let b: BayesArtifact = read_json(&artifact_path(out, stage), stage)?;
            render_bayes(&mut s, &b.records, &b.skipped);
        }
        Stage::Report => {
            let _ = writeln!(
                s,
                "Report written to {} and {}",
                out.join("report.md").display(),
                out.join("report.json").display()
            );
        }
    }
    Ok(s)
}
