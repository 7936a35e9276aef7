//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use dehum::bayes::{compare_groups, BayesConfig, TruncNormal};
use dehum::concepts::{build_concept, nearest_neighbours, ConceptSpec};
use dehum::corpus::{paragraph_eligible, FilterConfig, Paragraph, Sentence, Token};
use dehum::embeddings::{collapse_pretrained, train, EmbeddingModel, TrainConfig};
use dehum::inference::{anchored_ks, ks_two_sample, AnchorConfig};
use dehum::pipeline::{run, PipelineConfig, RunOptions, RunReport};
use dehum::sentiment::{filter_by_coverage, score_paragraph, Lexicon, LexiconEntry};
use dehum::synth::{generate_corpus, generate_pretrained, CorpusSpec, Planting, Vocabulary};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn brute_force_d(x: &[f64], y: &[f64]) -> f64 {
    let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    x.iter()
        .chain(y)
        .map(|&t| (ecdf(x, t) - ecdf(y, t)).abs())
        .fold(0.0, f64::max)
}

fn series_p(d: f64, n1: usize, n2: usize) -> f64 {
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let sum: f64 = (1..=50)
        .map(|j| {
            let j = j as f64;
            let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * j * j * lambda * lambda).exp()
        })
        .sum();
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut d_mismatch = 0;
    let mut worst_p = 0f64;
    for _ in 0..1000 {
        let n1 = rng.random_range(2..=50);
        let n2 = rng.random_range(2..=50);
        let x: Vec<f64> = (0..n1).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n2).map(|_| 0.3 * rng.random::<f64>() + rng.sample::<f64, _>(StandardNormal)).collect();
        let ks = ks_two_sample(&x, &y).unwrap();
        if ks.statistic != brute_force_d(&x, &y) {
            d_mismatch += 1;
        }
        worst_p = worst_p.max((ks.p_value - series_p(ks.statistic, n1, n2)).abs());
    }
    let t = start.elapsed();
    verdict(
        d_mismatch == 0 && worst_p <= 1e-9 && within(t, 10),
        format!("D mismatches {d_mismatch}/1000, max |p - series| {worst_p:.2e}"),
    )
}

fn ks_calibration() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut rejections = 0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
        if ks_two_sample(&x, &y).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    let t = start.elapsed();
    verdict(
        (rate - 0.05).abs() <= 0.02 && within(t, 30),
        format!("rejection rate {rate:.3} at alpha 0.05"),
    )
}

struct AnchorFixture {
    vocab: Vocabulary,
    base: CorpusSpec,
    planted: CorpusSpec,
    init: dehum::embeddings::PretrainedInit,
    migrant: ConceptSpec,
    disgust: ConceptSpec,
}

impl AnchorFixture {
    fn new() -> Self {
        let vocab = Vocabulary::new(1500, 8, "ukrajina");
        let base = CorpusSpec {
            documents: 600,
            migrant_rate: 0.4,
            ..CorpusSpec::default()
        };
        let planted = CorpusSpec {
            planting: Some(Planting {
                terms: vocab.disgust.clone(),
                rate: 1.0,
            }),
            ..base.clone()
        };
        let forms = generate_pretrained(&vocab, 50, 7);
        let map: HashMap<String, String> = forms.form_to_lemma.iter().cloned().collect();
        let (init, _) = collapse_pretrained(&forms.forms, &map).unwrap();
        AnchorFixture {
            vocab,
            base,
            planted,
            init,
            migrant: ConceptSpec::migrant(),
            disgust: ConceptSpec::moral_disgust(),
        }
    }

    /// p-value of the anchored comparison for run `r`. Corpus 2 is built
    /// from `spec_b` with `seed_b`; corpus 1 always uses the base spec.
    fn p_value(&self, r: u64, spec_b: &CorpusSpec, seed_b: u64) -> f64 {
        let a = generate_corpus("a", &self.vocab, &self.base, 100 + 2 * r);
        let b = generate_corpus("b", &self.vocab, spec_b, seed_b);
        let cfg = |seed| TrainConfig {
            epochs: 5,
            seed,
            ..TrainConfig::default()
        };
        let ma = train("a", &a.training_sentences(), Some(&self.init), &cfg(r)).unwrap();
        let mb = train("b", &b.training_sentences(), Some(&self.init), &cfg(r + 1000)).unwrap();
        let concepts = |m: &EmbeddingModel| {
            (
                build_concept(m, &self.migrant).unwrap(),
                build_concept(m, &self.disgust).unwrap(),
            )
        };
        let (am, ad) = concepts(&ma);
        let (bm, bd) = concepts(&mb);
        let ac = AnchorConfig {
            n: 1000,
            seed: r,
            ..AnchorConfig::default()
        };
        anchored_ks(&ma, (&am, &ad), &mb, (&bm, &bd), &ac).unwrap().p_value
    }
}

fn anchoring_sensitivity() -> Verdict {
    let start = Instant::now();
    let f = AnchorFixture::new();
    let runs = 20u64;
    let mut detected = 0;
    let mut null_quiet = 0;
    for r in 0..runs {
        if f.p_value(r, &f.planted, 100 + 2 * r) < 0.05 {
            detected += 1;
        }
        if f.p_value(r, &f.base, 100 + 2 * r) > 0.05 {
            null_quiet += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        detected * 100 >= 90 * runs && null_quiet * 100 >= 85 * runs && within(t, 300),
        format!("planted p<0.05 in {detected}/{runs}, no-difference p>0.05 in {null_quiet}/{runs}"),
    )
}

/// Not a criterion: how the null behaves when corpus 2 is an independent
/// draw from the same generator instead of the same text.
fn independent_text_null_rate() -> String {
    let f = AnchorFixture::new();
    let runs = 10u64;
    let quiet = (0..runs)
        .filter(|&r| f.p_value(r, &f.base, 101 + 2 * r) > 0.05)
        .count();
    format!("independently drawn texts, no planted difference: p>0.05 in {quiet}/{runs}")
}

fn truncnormal_sample(loc: f64, scale: f64, n: usize, seed: u64) -> Vec<f64> {
    let t = TruncNormal::new(loc, scale).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| t.sample(&mut rng)).collect()
}

fn bayes_arousal_reproduction() -> Verdict {
    let start = Instant::now();
    let a = truncnormal_sample(0.480, 0.054, 5000, 41);
    let b = truncnormal_sample(0.466, 0.056, 5000, 42);
    let c = compare_groups(&a, &b, &BayesConfig::default()).unwrap();
    let t = start.elapsed();
    verdict(
        c.prob_diff >= 0.99 && (c.cohens_d - 0.245).abs() <= 0.05 && within(t, 120),
        format!(
            "prob_diff {:.4}, Cohen's d {:.3} [{:.3}, {:.3}], converged {}",
            c.prob_diff, c.cohens_d, c.cohens_d_ci.lower, c.cohens_d_ci.upper, c.diagnostics.converged
        ),
    )
}

fn bayes_null() -> Verdict {
    let mut good = 0;
    for s in 0..20u64 {
        let data = truncnormal_sample(0.5, 0.1, 300, 500 + s);
        let cfg = BayesConfig {
            seed: s,
            ..BayesConfig::default()
        };
        let c = compare_groups(&data, &data, &cfg).unwrap();
        if c.delta_ci.contains(0.0) && (0.3..=0.7).contains(&c.prob_diff) {
            good += 1;
        }
    }
    verdict(good >= 18, format!("{good}/20 seeds with HDI straddling 0 and prob_diff in [0.3, 0.7]"))
}

fn two_cluster_sentences(seed: u64) -> (Vec<Vec<String>>, Vec<String>, Vec<String>) {
    let a: Vec<String> = (0..50).map(|i| format!("alfa{i}")).collect();
    let b: Vec<String> = (0..50).map(|i| format!("beta{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..2000)
        .map(|i| {
            let words = if i % 2 == 0 { &a } else { &b };
            (0..8).map(|_| words[rng.random_range(0..words.len())].clone()).collect()
        })
        .collect();
    (sentences, a, b)
}

fn mean_cosine(m: &EmbeddingModel, xs: &[String], ys: &[String], same: bool) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            if same && i >= j {
                continue;
            }
            total += dehum::concepts::cosine(m.vector(x).unwrap(), m.vector(y).unwrap()).unwrap();
            count += 1;
        }
    }
    total / count as f64
}

fn embedding_clusters() -> Verdict {
    let (sentences, a, b) = two_cluster_sentences(6);
    let cfg = TrainConfig {
        epochs: 50,
        min_count: 1,
        seed: 3,
        ..TrainConfig::default()
    };
    let m1 = train("clusters", &sentences, None, &cfg).unwrap();
    let m2 = train("clusters", &sentences, None, &cfg).unwrap();
    let identical = m1.len() == m2.len()
        && (0..m1.len()).all(|i| {
            m1.row(i).iter().map(|v| v.to_bits()).eq(m2.row(i).iter().map(|v| v.to_bits()))
        });
    let intra = 0.5 * (mean_cosine(&m1, &a, &a, true) + mean_cosine(&m1, &b, &b, true));
    let inter = mean_cosine(&m1, &a, &b, false);
    verdict(
        intra - inter >= 0.1 && identical,
        format!("intra {intra:.3}, inter {inter:.3}, gap {:.3}; repeat bit-identical {identical}", intra - inter),
    )
}

fn exhaustive_ranking(m: &EmbeddingModel, q: &[f64], k: usize, roots: &[&str]) -> Vec<String> {
    let mut all: Vec<(f64, String)> = m
        .iter()
        .filter(|(l, _, _)| !roots.iter().any(|r| l.starts_with(r)))
        .filter_map(|(l, v, _)| {
            let (mut dot, mut nq, mut nv) = (0f64, 0f64, 0f64);
            for (&a, &b) in q.iter().zip(v) {
                let b = f64::from(b);
                dot += a * b;
                nq += a * a;
                nv += b * b;
            }
            (nv > 0.0).then(|| ((dot / (nq.sqrt() * nv.sqrt())).clamp(-1.0, 1.0), l.to_string()))
        })
        .collect();
    all.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
    all.into_iter().take(k).map(|(_, l)| l).collect()
}

fn concept_and_nn_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut concept_ok = 0;
    let fixtures = 20;
    for _ in 0..fixtures {
        // dyadic values and power-of-two totals keep every product exact
        let dim = rng.random_range(1..6);
        let counts: [u64; 3] = *[[1, 1, 2], [2, 2, 4], [1, 3, 4], [4, 2, 2], [5, 1, 2]]
            .choose(&mut rng)
            .unwrap();
        let total: u64 = counts.iter().sum();
        let names = ["tri", "ena", "dva"];
        let vecs: Vec<Vec<f32>> = (0..3)
            .map(|_| (0..dim).map(|_| rng.random_range(-16..=16) as f32 / 8.0).collect())
            .collect();
        let rows = (0..3).map(|i| (names[i].to_string(), vecs[i].clone(), counts[i])).collect();
        let model = EmbeddingModel::from_parts("fx", dim, rows, None).unwrap();
        let spec = ConceptSpec::new("c", names, Vec::<String>::new()).unwrap();
        let cv = build_concept(&model, &spec).unwrap();
        let expected: Vec<f64> = (0..dim)
            .map(|d| (0..3).map(|i| counts[i] as f64 / total as f64 * f64::from(vecs[i][d])).sum())
            .collect();
        if cv.vector == expected {
            concept_ok += 1;
        }
    }

    let mut nn_ok = 0;
    let mut nn_cases = 0;
    for &size in &[1usize, 2, 7, 50, 333, 1000] {
        for trial in 0..3 {
            let dim = 8;
            let rows: Vec<(String, Vec<f32>, u64)> = (0..size)
                .map(|i| {
                    // small integer grid makes exact ties common
                    let v = (0..dim).map(|_| rng.random_range(-2..=2) as f32).collect();
                    (format!("w{i:04}"), v, 1)
                })
                .collect();
            let model = EmbeddingModel::from_parts("nn", dim, rows, None).unwrap();
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-2..=2) as f64 + 0.5).collect();
            let roots: Vec<&str> = if trial == 1 { vec!["w00"] } else { vec![] };
            for k in [1, 5, size / 2 + 1, size + 3] {
                nn_cases += 1;
                let got: Vec<String> = nearest_neighbours(&model, &q, k, &roots)
                    .unwrap()
                    .into_iter()
                    .map(|n| n.lemma)
                    .collect();
                if got == exhaustive_ranking(&model, &q, k, &roots) {
                    nn_ok += 1;
                }
            }
        }
    }
    verdict(
        concept_ok == fixtures && nn_ok == nn_cases,
        format!("concept fixtures exact {concept_ok}/{fixtures}, NN rankings equal {nn_ok}/{nn_cases}"),
    )
}

fn paragraph(words: &[&str]) -> Paragraph {
    Paragraph::new(
        "p",
        "d",
        vec![Sentence {
            tokens: words.iter().map(|w| Token::new(w, w).unwrap()).collect(),
        }],
    )
}

fn sentiment_scoring() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lemmas: Vec<String> = (0..12).map(|i| format!("leks{i}")).collect();
    let values: BTreeMap<String, [f64; 3]> = lemmas
        .iter()
        .map(|l| (l.clone(), [0, 1, 2].map(|_| rng.random_range(0..=16) as f64 / 16.0)))
        .collect();
    let lex = Lexicon::from_entries(values.iter().map(|(l, v)| {
        (
            l.clone(),
            LexiconEntry {
                valence: v[0],
                arousal: v[1],
                dominance: v[2],
                emotions: None,
            },
        )
    }));
    let mut exact = 0;
    for f in 0..10 {
        // 2, 4 or 8 covered tokens keep the means exact
        let covered = [2usize, 4, 8][f % 3];
        let uncovered = f % 4;
        let mut words: Vec<String> = (0..covered)
            .map(|_| lemmas[rng.random_range(0..lemmas.len())].clone())
            .collect();
        words.extend((0..uncovered).map(|i| format!("nič{i}")));
        words.shuffle(&mut rng);
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let s = score_paragraph(&paragraph(&refs), &lex);
        let hand = |d: usize| {
            words.iter().filter_map(|w| values.get(w)).map(|v| v[d]).sum::<f64>() / covered as f64
        };
        let coverage = covered as f64 / (covered + uncovered) as f64;
        if s.valence == Some(hand(0)) && s.arousal == Some(hand(1)) && s.dominance == Some(hand(2)) && s.coverage == coverage {
            exact += 1;
        }
    }

    // one of five words covered is exactly 0.2, one of six is below
    let at = score_paragraph(&paragraph(&["leks0", "a", "b", "c", "d"]), &lex);
    let below = score_paragraph(&paragraph(&["leks0", "a", "b", "c", "d", "e"]), &lex);
    let kept = filter_by_coverage(vec![at.clone(), below.clone()], 0.2);
    let coverage_ok = kept.len() == 1 && kept[0].coverage == 0.2;

    let cfg = FilterConfig::default();
    let of_len = |n: usize| {
        let words: Vec<String> = (0..n).map(|i| format!("beseda{}", i % 40)).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        paragraph_eligible(&paragraph(&refs), &cfg)
    };
    let length: Vec<(usize, bool)> = [15, 16, 499, 500].iter().map(|&n| (n, of_len(n))).collect();
    let length_ok = length == vec![(15, false), (16, true), (499, true), (500, false)];
    verdict(
        exact == 10 && coverage_ok && length_ok,
        format!("exact means {exact}/10, 20% boundary kept only {{0.2}}: {coverage_ok}, length filter {length:?}"),
    )
}

fn toy_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy/toy.toml")
}

fn full_pipeline() -> Verdict {
    let start = Instant::now();
    let cfg = PipelineConfig::load(&toy_config()).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let first = run(&cfg, &RunOptions::new(dir_a.path())).unwrap();
    let elapsed = start.elapsed();
    let json_a = std::fs::read(dir_a.path().join("report.json")).unwrap();
    let md_a = std::fs::read(dir_a.path().join("report.md")).unwrap();

    let again = run(&cfg, &RunOptions::new(dir_a.path())).unwrap();
    let cached = again.executed.is_empty() && first.skipped.is_empty();
    run(&cfg, &RunOptions::new(dir_b.path())).unwrap();
    let same_dir = std::fs::read(dir_a.path().join("report.json")).unwrap() == json_a;
    let fresh = std::fs::read(dir_b.path().join("report.json")).unwrap() == json_a
        && std::fs::read(dir_b.path().join("report.md")).unwrap() == md_a;

    let report: RunReport = serde_json::from_slice(&json_a).unwrap();
    let pairs: Vec<(&str, &str)> = report
        .concept_similarity
        .iter()
        .map(|r| (r.target.as_str(), r.other.as_str()))
        .collect();
    let tables = [
        ("stats", report.corpus_stats.len() >= 2),
        (
            "CS pairs",
            pairs.contains(&("migrant", "moral-disgust")) && pairs.contains(&("migrant", "vermin")),
        ),
        ("KS", !report.ks.is_empty()),
        (
            "top-k NNs",
            !report.nearest_neighbours.is_empty()
                && report.nearest_neighbours.iter().all(|t| t.neighbours.len() >= 20),
        ),
        (
            "VA summaries",
            report.paragraph_scores.iter().any(|s| s.dimensions.len() >= 2),
        ),
        ("Bayes records", !report.bayes.is_empty()),
    ];
    let missing: Vec<&str> = tables.iter().filter(|t| !t.1).map(|t| t.0).collect();
    verdict(
        missing.is_empty() && cached && same_dir && fresh && within(elapsed, 300),
        format!(
            "first run {:.1}s, missing tables {missing:?}, rerun fully cached {cached}, byte-identical rerun {same_dir}, byte-identical fresh run {fresh}",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "KS oracle equivalence", ks_oracle),
        (2, "KS calibration", ks_calibration),
        (3, "anchoring sensitivity", anchoring_sensitivity),
        (4, "Bayes arousal reproduction", bayes_arousal_reproduction),
        (5, "Bayes null behaviour", bayes_null),
        (6, "embedding clusters", embedding_clusters),
        (7, "concept and NN oracles", concept_and_nn_oracles),
        (8, "sentiment scoring", sentiment_scoring),
        (9, "full pipeline", full_pipeline),
    ];
    let only: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failures = 0;
    for (n, name, check) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failures += 1;
        }
        println!(
            "criterion {n} ({name}): {} - {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if n == 3 && std::env::var("ACCEPTANCE_SKIP_INFO").is_err() {
            println!("  info: {}", independent_text_null_rate());
        }
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
