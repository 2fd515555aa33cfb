//! Acceptance criteria 1 to 11.
//!
//! Runs every criterion, prints one PASS/FAIL line each and exits non-zero
//! when any of them fails. Criteria 5 to 8 share one set of synthetic runs.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use embclf::baselines::{FitScope, LogRegConfig, LogRegModel, SparseVec};
use embclf::classifier::{self, ClassifierConfig, LabelSet, TextClassifier};
use embclf::compare::{parallel_coords_svg, ranks, saturation, RunMatrix};
use embclf::corpus::{keep_probability, PreprocessConfig, SubsampleConfig, Subsampler, Vocabulary};
use embclf::embeddings::sgd::binary_logistic;
use embclf::embeddings::{self, EmbeddingConfig, HuffmanCoding, LossKind, ModelKind, UnigramTable};
use embclf::eval::{
    cross_validate, format_cell, render_report, roc_auc, ClassSummary, CvReport, EmbeddingTrainer, FoldPlan,
    LogRegTrainer, NaiveBayesTrainer,
};
use embclf::matrix::{cosine, Matrix};
use embclf::subword::{extract_ngrams, mean_of_rows, ngram_buckets, NGramConfig};
use embclf::synth::{self, KeywordCorpusConfig};
use embclf::vecio::{self, VectorSet};
use embclf::LabeledDoc;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-4;

/// Central differences of `f` at `x`.
fn numeric_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` over whole gradient vectors.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn log_sigmoid(x: f64) -> f64 {
    -(1.0 + (-x).exp()).ln()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect()
}

/// Runs `binary_logistic` once per output row with lr = 1 and returns the
/// analytic gradient of the summed loss with respect to (hidden, outputs).
fn logistic_gradient(hidden: &[f32], outputs: &[Vec<f32>], labels: &[bool]) -> Vec<f64> {
    let mut grad = vec![0.0f32; hidden.len()];
    let mut out_grads = Vec::new();
    for (row, &label) in outputs.iter().zip(labels) {
        let mut updated = row.clone();
        binary_logistic(hidden, &mut grad, &mut updated, label, 1.0);
        out_grads.extend(row.iter().zip(&updated).map(|(b, a)| f64::from(b - a)));
    }
    let mut all: Vec<f64> = grad.iter().map(|g| -f64::from(*g)).collect();
    all.extend(out_grads);
    all
}

/// Oracle loss over the packed parameters (hidden, then output rows).
fn logistic_loss(params: &[f64], dim: usize, labels: &[bool]) -> f64 {
    let (h, outs) = params.split_at(dim);
    outs.chunks(dim)
        .zip(labels)
        .map(|(u, &l)| {
            let s: f64 = u.iter().zip(h).map(|(a, b)| a * b).sum();
            if l {
                -log_sigmoid(s)
            } else {
                -log_sigmoid(-s)
            }
        })
        .sum()
}

fn pack(hidden: &[f32], outputs: &[Vec<f32>]) -> Vec<f64> {
    hidden
        .iter()
        .chain(outputs.iter().flatten())
        .map(|&x| f64::from(x))
        .collect()
}

fn gradient_ns(rng: &mut ChaCha8Rng) -> f64 {
    let dim = 8;
    let hidden = random_vec(rng, dim);
    let outputs: Vec<Vec<f32>> = (0..6).map(|_| random_vec(rng, dim)).collect();
    let labels: Vec<bool> = (0..6).map(|i| i == 0).collect();
    let analytic = logistic_gradient(&hidden, &outputs, &labels);
    let numeric = numeric_gradient(&pack(&hidden, &outputs), |p| logistic_loss(p, dim, &labels));
    relative_error(&analytic, &numeric)
}

fn gradient_hs(rng: &mut ChaCha8Rng) -> f64 {
    let dim = 8;
    let v = rng.random_range(3..12);
    let counts: Vec<u64> = (0..v).map(|_| rng.random_range(1..100)).collect();
    let tree = HuffmanCoding::build(&counts).unwrap();
    let word = rng.random_range(0..v);
    let hidden = random_vec(rng, dim);
    let nodes: Vec<Vec<f32>> = tree.path(word).iter().map(|_| random_vec(rng, dim)).collect();
    // A zero bit is the positive branch.
    let labels: Vec<bool> = tree.code(word).iter().map(|&b| b == 0).collect();
    let analytic = logistic_gradient(&hidden, &nodes, &labels);
    let numeric = numeric_gradient(&pack(&hidden, &nodes), |p| logistic_loss(p, dim, &labels));
    relative_error(&analytic, &numeric)
}

fn gradient_classifier(rng: &mut ChaCha8Rng) -> f64 {
    let (dim, k, v) = (8, 3, 6);
    let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
    let vocab = Vocabulary::build(words.iter(), 1).unwrap();
    let labels = LabelSet::new(["a", "b", "c"]).unwrap();
    let emb = Matrix::from_vec(v, dim, random_vec(rng, v * dim));
    let out = Matrix::from_vec(k, dim, random_vec(rng, k * dim));
    let model = TextClassifier::new(labels, vocab, emb, out, None, PreprocessConfig::default()).unwrap();

    let len = rng.random_range(1..6);
    let doc: Vec<&String> = (0..len).map(|_| words.choose(rng).unwrap()).collect();
    let ids: Vec<usize> = doc.iter().map(|w| model.vocab().id(w).unwrap()).collect();
    let label = rng.random_range(0..k);

    let mut stepped = model.clone();
    stepped.sgd_step(&model.token_rows(&doc), label, 1.0, false);
    let diff = |a: &Matrix, b: &Matrix| -> Vec<f64> {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| f64::from(x - y))
            .collect()
    };
    let mut analytic = diff(model.embeddings(), stepped.embeddings());
    analytic.extend(diff(model.output(), stepped.output()));

    let params: Vec<f64> = model
        .embeddings()
        .as_slice()
        .iter()
        .chain(model.output().as_slice())
        .map(|&x| f64::from(x))
        .collect();
    let loss = |p: &[f64]| {
        let (e, w) = p.split_at(v * dim);
        let mut h = vec![0.0; dim];
        for &id in &ids {
            for (hj, ej) in h.iter_mut().zip(&e[id * dim..(id + 1) * dim]) {
                *hj += ej / ids.len() as f64;
            }
        }
        let z: Vec<f64> = w
            .chunks(dim)
            .map(|r| r.iter().zip(&h).map(|(a, b)| a * b).sum())
            .collect();
        let lse = z.iter().map(|x| x.exp()).sum::<f64>().ln();
        lse - z[label]
    };
    relative_error(&analytic, &numeric_gradient(&params, loss))
}

fn gradient_logreg(rng: &mut ChaCha8Rng) -> f64 {
    let (k, f) = (3, 6);
    let lambda = rng.random_range(0.1..2.0);
    let docs: Vec<(SparseVec, usize)> = (0..5)
        .map(|_| {
            let mut x: SparseVec = Vec::new();
            for i in 0..f {
                if rng.random_bool(0.6) {
                    x.push((i, rng.random_range(0.0..3.0)));
                }
            }
            (x, rng.random_range(0..k))
        })
        .collect();
    let weights: Vec<f64> = (0..k * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = LogRegModel::zeros(k, f, lambda);
    let analytic = model.gradient(&weights, &docs);
    let objective = |w: &[f64]| {
        let mut total = 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>();
        for (x, y) in &docs {
            let z: Vec<f64> = (0..k).map(|c| x.iter().map(|&(i, v)| w[c * f + i] * v).sum()).collect();
            total += z.iter().map(|v| v.exp()).sum::<f64>().ln() - z[*y];
        }
        total
    };
    relative_error(&analytic, &numeric_gradient(&weights, objective))
}

/// Draws one random instance and returns its relative gradient error.
type GradientCheck = fn(&mut ChaCha8Rng) -> f64;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cases: [(&str, GradientCheck); 4] = [
        ("ns", gradient_ns),
        ("hs", gradient_hs),
        ("softmax", gradient_classifier),
        ("logreg", gradient_logreg),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, case) in cases {
        let worst = (0..50).map(|_| case(&mut rng)).fold(0.0f64, f64::max);
        pass &= worst <= FD_TOLERANCE;
        parts.push(format!("{name} max_rel={worst:.2e}"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    check(pass, format!("{} in {elapsed:.2?}", parts.join(", ")))
}

// ---------------------------------------------------------------------------
// 2. AUC oracle
// ---------------------------------------------------------------------------

fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0.0, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / pairs as f64
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut with_ties = 0;
    let mut instances = 0;
    while instances < 200 {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=n.max(3));
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        instances += 1;
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        if roc_auc(&scores, &labels).unwrap() != brute_force_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && with_ties > 0 && elapsed < Duration::from_secs(1),
        format!("{instances} instances ({with_ties} with tied scores), {mismatches} mismatches in {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Huffman optimality
// ---------------------------------------------------------------------------

/// Minimum of `sum c_i l_i` over all length vectors satisfying Kraft's
/// inequality, i.e. over all prefix codes. Counts are sorted descending and
/// only non-decreasing length vectors are enumerated: swapping the lengths
/// of a more frequent and a less frequent symbol never lowers the cost, so
/// the minimum is attained there.
fn exhaustive_optimal(counts: &[u64]) -> u64 {
    fn go(counts: &[u64], i: usize, min_len: u32, kraft: f64, cost: u64, best: &mut u64) {
        if i == counts.len() {
            if kraft <= 1.0 + 1e-12 {
                *best = (*best).min(cost);
            }
            return;
        }
        let max_len = counts.len() as u32 - 1;
        for l in min_len..=max_len {
            let k = kraft + 0.5f64.powi(l as i32);
            // Remaining symbols each need at least 2^-l.
            let rest = (counts.len() - i - 1) as f64 * 0.5f64.powi(max_len as i32);
            if k + rest > 1.0 + 1e-12 {
                continue;
            }
            go(counts, i + 1, l, k, cost + counts[i] * u64::from(l), best);
        }
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let mut best = u64::MAX;
    go(&sorted, 0, 1, 0.0, 0, &mut best);
    best
}

fn prefix_free_and_kraft(tree: &HuffmanCoding) -> Result<(), String> {
    let mut codes: Vec<&[u8]> = (0..tree.len()).map(|w| tree.code(w)).collect();
    codes.sort();
    if let Some(w) = codes.windows(2).find(|w| w[1].starts_with(w[0])) {
        return Err(format!("{:?} is a prefix of {:?}", w[0], w[1]));
    }
    let max_len = codes.iter().map(|c| c.len()).max().unwrap_or(0);
    if max_len >= 127 {
        return Err(format!("code length {max_len} too long to check exactly"));
    }
    let sum: u128 = codes.iter().map(|c| 1u128 << (max_len - c.len())).sum();
    if sum != 1u128 << max_len {
        return Err("Kraft sum differs from 1".into());
    }
    Ok(())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut suboptimal = 0;
    for _ in 0..100 {
        let v = rng.random_range(2..=8);
        let counts: Vec<u64> = (0..v).map(|_| rng.random_range(1..=50)).collect();
        let tree = HuffmanCoding::build(&counts).unwrap();
        if tree.weighted_length(&counts) != exhaustive_optimal(&counts) {
            suboptimal += 1;
        }
    }
    let mut structural = Vec::new();
    for v in [2usize, 3, 17, 100, 1000, 10_000] {
        let counts: Vec<u64> = (0..v).map(|_| rng.random_range(1..=100_000)).collect();
        if let Err(e) = prefix_free_and_kraft(&HuffmanCoding::build(&counts).unwrap()) {
            structural.push(format!("V={v}: {e}"));
        }
    }
    // Zipfian counts give deep, unbalanced trees.
    let zipf: Vec<u64> = (1..=10_000u64).map(|r| 1_000_000 / r + 1).collect();
    if let Err(e) = prefix_free_and_kraft(&HuffmanCoding::build(&zipf).unwrap()) {
        structural.push(format!("zipf: {e}"));
    }
    let elapsed = start.elapsed();
    check(
        suboptimal == 0 && structural.is_empty() && elapsed < Duration::from_secs(30),
        format!("{suboptimal}/100 suboptimal, structural failures {structural:?}, {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 4. Sampling fidelity
// ---------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let counts: Vec<u64> = (0..100).map(|_| rng.random_range(1..=10_000)).collect();
    let table = UnigramTable::new(&counts, 0.75, embeddings::DEFAULT_TABLE_SIZE).unwrap();
    let draws = 1_000_000;
    let mut hits = vec![0u64; counts.len()];
    for _ in 0..draws {
        hits[table.sample(&mut rng) as usize] += 1;
    }
    let z: f64 = counts.iter().map(|&c| (c as f64).powf(0.75)).sum();
    let worst_negative = counts
        .iter()
        .zip(&hits)
        .map(|(&c, &h)| (h as f64 / draws as f64 - (c as f64).powf(0.75) / z).abs())
        .fold(0.0, f64::max);

    let tokens: Vec<String> = (0..100)
        .flat_map(|r: usize| std::iter::repeat_n(format!("w{r}"), 20_000 / (r + 1)))
        .collect();
    let vocab = Vocabulary::build(tokens.iter(), 1).unwrap();
    let cfg = SubsampleConfig::default();
    let sub = Subsampler::new(&vocab, &cfg);
    let trials = 100_000;
    let mut worst_discard: f64 = 0.0;
    for w in 0..vocab.len() {
        let kept = (0..trials).filter(|_| sub.keep(w, &mut rng)).count();
        let analytic = 1.0 - keep_probability(vocab.count(w), vocab.total_tokens(), &cfg);
        worst_discard = worst_discard.max((1.0 - kept as f64 / trials as f64 - analytic).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst_negative <= 0.01 && worst_discard <= 0.01 && elapsed < Duration::from_secs(30),
        format!("negative max_abs_err={worst_negative:.2e}, discard max_abs_err={worst_discard:.2e}, {elapsed:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 5 to 8. Synthetic end-to-end runs
// ---------------------------------------------------------------------------

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const EMBED_DIM: usize = 50;

/// Everything one seed produces, in serialized form where determinism is
/// checked byte for byte.
struct SeedRun {
    reports: Vec<CvReport>,
    in_domain: Vec<u8>,
    disjoint: Vec<u8>,
    small: Vec<u8>,
    classifier: Vec<u8>,
    report_text: String,
    /// Corpus generation, in-domain pretraining and the three
    /// cross-validations of criterion 5.
    criterion_5_time: Duration,
}

fn pretrain(docs: &[Vec<String>], seed: u64, name: &str) -> VectorSet {
    let vocab = Vocabulary::build(docs.iter().flatten(), 5).unwrap();
    let mut cfg = EmbeddingConfig::new(ModelKind::SkipGram, LossKind::NegativeSampling);
    cfg.dim = EMBED_DIM;
    cfg.window = 5;
    cfg.seed = seed;
    embeddings::train(docs, &vocab, &cfg).unwrap().to_vector_set(name)
}

fn binary_bytes(set: &VectorSet) -> Vec<u8> {
    let mut out = Vec::new();
    vecio::write_binary_to(set, &mut out).unwrap();
    out
}

fn classifier_config() -> ClassifierConfig {
    ClassifierConfig {
        dim: EMBED_DIM,
        freeze_embeddings: true,
        ..Default::default()
    }
}

fn run_seed(seed: u64) -> SeedRun {
    let start = Instant::now();
    let cfg = KeywordCorpusConfig::default();
    let corpus = synth::keyword_corpus(&cfg, seed);
    let labels = LabelSet::new(synth::class_names(cfg.classes)).unwrap();
    let names: Vec<&str> = corpus.labeled.iter().map(|d| d.label.as_str()).collect();
    let plan = FoldPlan::stratified(&names, 5, seed).unwrap();
    let in_domain = pretrain(&corpus.unlabeled, seed, "in-domain");

    let cv =
        |trainer: &dyn embclf::eval::Trainer| cross_validate(trainer, &corpus.labeled, &labels, &plan, false).unwrap();
    let embedding = |name: &str, set: &VectorSet| {
        cv(&EmbeddingTrainer {
            name: name.into(),
            config: classifier_config(),
            pretrained: Some(set),
        })
    };
    let mut reports = vec![
        cv(&NaiveBayesTrainer {
            scope: FitScope::EntireCorpus,
        }),
        cv(&LogRegTrainer {
            scope: FitScope::EntireCorpus,
            config: LogRegConfig::default(),
        }),
        embedding("emb-50k", &in_domain),
    ];
    let criterion_5_time = start.elapsed();

    let disjoint = pretrain(&synth::disjoint_topic_corpus(&cfg, seed + 1000), seed, "disjoint");
    reports.push(embedding("emb-disjoint-50k", &disjoint));
    let labeled_text: Vec<Vec<String>> = corpus.labeled.iter().map(|d| d.tokens.clone()).collect();
    let small = pretrain(&labeled_text, seed, "labeled-only");
    reports.push(embedding("emb-labeled-600", &small));

    let final_model = classifier::train(&corpus.labeled, &labels, &classifier_config(), Some(&in_domain)).unwrap();
    let mut classifier_bytes = Vec::new();
    final_model.write_to(&mut classifier_bytes).unwrap();

    let mut report_text = render_report(&reports);
    let mut csv = Vec::new();
    CvReport::write_long_csv(&reports, &mut csv).unwrap();
    embclf::compare::write_predictions_csv(&reports, &mut csv).unwrap();
    report_text.push_str(&String::from_utf8(csv).unwrap());

    SeedRun {
        reports,
        in_domain: binary_bytes(&in_domain),
        disjoint: binary_bytes(&disjoint),
        small: binary_bytes(&small),
        classifier: classifier_bytes,
        report_text,
        criterion_5_time,
    }
}

fn report<'a>(run: &'a SeedRun, model: &str) -> &'a CvReport {
    run.reports.iter().find(|r| r.model == model).unwrap()
}

fn criterion_5(runs: &[SeedRun]) -> Outcome {
    let run = &runs[0];
    println!("{}", render_report(&run.reports[..3]));
    let mut worst = f64::INFINITY;
    for r in &run.reports[..3] {
        for c in 0..r.classes.len() {
            worst = worst.min(r.summary(c).mean);
        }
    }
    let t = run.criterion_5_time;
    check(
        worst >= 0.95 && t < Duration::from_secs(300),
        format!("lowest per-class mean AUC {worst:.4} (nb, logreg, emb-50k), {t:.1?}"),
    )
}

fn majority(wins: usize) -> bool {
    2 * wins > SEEDS.len()
}

fn criterion_6(runs: &[SeedRun]) -> Outcome {
    let mut wins = 0;
    let mut gaps = Vec::new();
    for run in runs {
        let gap = report(run, "emb-50k").mean_auc() - report(run, "emb-disjoint-50k").mean_auc();
        wins += usize::from(gap >= -0.01);
        gaps.push(format!("{gap:+.4}"));
    }
    println!("{}", render_report(&runs[0].reports[2..4]));
    check(
        majority(wins),
        format!(
            "in-domain minus disjoint mean AUC per seed [{}], {wins}/5 within tolerance",
            gaps.join(", ")
        ),
    )
}

fn criterion_7(runs: &[SeedRun]) -> Outcome {
    let mut wins = 0;
    let mut gaps = Vec::new();
    for run in runs {
        let gap = report(run, "emb-50k").mean_auc() - report(run, "emb-labeled-600").mean_auc();
        wins += usize::from(gap >= 0.02);
        gaps.push(format!("{gap:+.4}"));
    }
    println!(
        "{}",
        render_report(&[runs[0].reports[2].clone(), runs[0].reports[4].clone()])
    );
    check(
        majority(wins),
        format!(
            "50k minus labeled-only mean AUC per seed [{}], {wins}/5 at least 0.02",
            gaps.join(", ")
        ),
    )
}

fn criterion_8(runs: &[SeedRun]) -> Outcome {
    let again = run_seed(SEEDS[0]);
    let first = &runs[0];
    let mut differing = Vec::new();
    for (name, a, b) in [
        ("in-domain vectors", &first.in_domain, &again.in_domain),
        ("disjoint vectors", &first.disjoint, &again.disjoint),
        ("labeled-only vectors", &first.small, &again.small),
        ("classifier model", &first.classifier, &again.classifier),
        (
            "reports",
            &first.report_text.as_bytes().to_vec(),
            &again.report_text.as_bytes().to_vec(),
        ),
    ] {
        if a != b {
            differing.push(name);
        }
    }
    check(
        differing.is_empty(),
        format!("seed {} re-run, differing artifacts: {differing:?}", SEEDS[0]),
    )
}

// ---------------------------------------------------------------------------
// 9. Format round-trips
// ---------------------------------------------------------------------------

fn random_vector_set(rng: &mut ChaCha8Rng) -> VectorSet {
    let v = rng.random_range(1..30);
    let dim = rng.random_range(1..12);
    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < v {
        let len = rng.random_range(1..8);
        let t: String = (0..len)
            .map(|_| *['a', 'b', 'z', 'é', '中', '_', '9', 'Q'].choose(rng).unwrap())
            .collect();
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    let data: Vec<f32> = (0..v * dim)
        .map(|_| {
            let mantissa: f32 = rng.random_range(-1.0..1.0);
            mantissa * 10f32.powi(rng.random_range(-8..8))
        })
        .collect();
    VectorSet::new("random", tokens, Matrix::from_vec(v, dim, data)).unwrap()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut text_failures = 0;
    let mut binary_failures = 0;
    for _ in 0..100 {
        let set = random_vector_set(&mut rng);

        let mut buf = Vec::new();
        vecio::write_text_to(&set, &mut buf).unwrap();
        let back = vecio::read_text_from(&buf[..], "<mem>", "random").unwrap();
        let quantized = back.tokens() == set.tokens()
            && back
                .matrix()
                .as_slice()
                .iter()
                .zip(set.matrix().as_slice())
                // Half a unit in the sixth significant digit, plus f32 rounding.
                .all(|(b, a)| (f64::from(*b) - f64::from(*a)).abs() <= 5.0e-6 * f64::from(a.abs()) * 1.0001);
        text_failures += usize::from(!quantized);

        let mut buf = Vec::new();
        vecio::write_binary_to(&set, &mut buf).unwrap();
        let back = vecio::read_binary_from(&buf[..], "<mem>", "random").unwrap();
        let exact = back.tokens() == set.tokens()
            && back
                .matrix()
                .as_slice()
                .iter()
                .zip(set.matrix().as_slice())
                .all(|(b, a)| b.to_bits() == a.to_bits());
        binary_failures += usize::from(!exact);
    }

    let dir = tempfile::tempdir().unwrap();
    let docs: Vec<LabeledDoc> = (0..40)
        .map(|i| LabeledDoc {
            label: ["x", "y"][i % 2].into(),
            tokens: (0..6).map(|j| format!("t{}", (i * 7 + j * 3) % (11 + i % 2))).collect(),
        })
        .collect();
    let labels = LabelSet::new(["x", "y"]).unwrap();
    let mut model_failures = 0;
    for subwords in [
        None,
        Some(NGramConfig {
            minn: 2,
            maxn: 4,
            buckets: 64,
        }),
    ] {
        let cfg = ClassifierConfig {
            dim: 10,
            epochs: 5,
            subwords,
            ..Default::default()
        };
        let model = classifier::train(&docs, &labels, &cfg, None).unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        let loaded = TextClassifier::load(&path).unwrap();
        let probes = [vec!["t1", "t5"], vec!["unseen", "t3"], vec![]];
        for probe in probes {
            let a = model.predict(&probe);
            let b = loaded.predict(&probe);
            if a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
                model_failures += 1;
            }
        }
    }
    check(
        text_failures == 0 && binary_failures == 0 && model_failures == 0,
        format!(
            "100 sets: text failures {text_failures}, binary failures {binary_failures}; classifier prediction mismatches {model_failures}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Report fidelity
// ---------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let cell = format_cell(&ClassSummary {
        mean: 0.961,
        min: 0.956,
        max: 0.969,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (m, n) = (8, 108);
    let models: Vec<String> = (0..m).map(|i| format!("model{i}")).collect();
    let probabilities: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    let run = RunMatrix::new(
        models,
        (0..n).map(|d| format!("doc{d}")).collect(),
        probabilities.clone(),
        truth.clone(),
        "model3",
    )
    .unwrap();
    let rank_matrix = run.ranks();
    let svg = parallel_coords_svg(&rank_matrix).unwrap();
    let doc = roxmltree::Document::parse(&svg).map_err(|e| format!("malformed SVG: {e}"))?;

    let axes: Vec<_> = doc
        .descendants()
        .filter(|x| x.has_tag_name("line") && x.attribute("class") == Some("axis"))
        .collect();
    let lines: Vec<_> = doc.descendants().filter(|x| x.has_tag_name("polyline")).collect();
    let reference = ranks(&probabilities[3]);
    let mut color_errors = 0;
    let mut order_errors = 0;
    for (d, line) in lines.iter().enumerate() {
        let hue = if truth[d] { 240 } else { 0 };
        let expected = format!("hsl({hue}, {:.1}%, 45%)", saturation(reference[d], n));
        color_errors += usize::from(line.attribute("stroke") != Some(expected.as_str()));
        let ys: Vec<f64> = line
            .attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        for (model, y) in ys.iter().enumerate() {
            let r = rank_matrix.ranks[model][d];
            // Rank 1 at the top: y grows with rank.
            let expected_y = 40.0 + 500.0 * (r - 1) as f64 / (n - 1) as f64;
            order_errors += usize::from((y - expected_y).abs() > 1e-9);
        }
    }
    let full = lines
        .iter()
        .enumerate()
        .filter(|(d, _)| reference[*d] == 1)
        .all(|(_, l)| l.attribute("stroke").unwrap().contains("100.0%"));
    check(
        cell == "96.1% [95.6, 96.9]"
            && axes.len() == m
            && lines.len() == n
            && color_errors == 0
            && order_errors == 0
            && full,
        format!(
            "cell {cell:?}; SVG axes {}, polylines {}, color errors {color_errors}, position errors {order_errors}",
            axes.len(),
            lines.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. Subword imputation
// ---------------------------------------------------------------------------

fn morphology_trial(seed: u64) -> (f32, f32) {
    let corpus = synth::morphology_corpus(48, 2000, seed);
    let vocab = Vocabulary::build(corpus.docs.iter().flatten(), 1).unwrap();
    let ng = NGramConfig {
        minn: 3,
        maxn: 6,
        buckets: 100_000,
    };
    let mut cfg = EmbeddingConfig::new(ModelKind::SkipGram, LossKind::NegativeSampling);
    cfg.dim = EMBED_DIM;
    cfg.seed = seed;
    cfg.subwords = Some(ng);
    let model = embeddings::train(&corpus.docs, &vocab, &cfg).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11CE);
    let word = corpus.words.choose(&mut rng).unwrap();
    let original = model.word_vector(word).unwrap();
    // Imputation after dropping `word` from the vocabulary: the mean of its
    // n-gram bucket rows alone.
    let v = vocab.len();
    let rows: Vec<usize> = ngram_buckets(word, &ng).into_iter().map(|b| v + b).collect();
    let imputed = mean_of_rows(&model.input, &rows);

    let mut others: Vec<&String> = vocab.words().iter().filter(|w| *w != word).collect();
    others.shuffle(&mut rng);
    let mut sims: Vec<f32> = others[..100]
        .iter()
        .map(|w| cosine(&imputed, &model.word_vector(w).unwrap()))
        .collect();
    sims.sort_by(f32::total_cmp);
    let median = (sims[49] + sims[50]) / 2.0;
    (cosine(&imputed, &original), median)
}

fn criterion_11() -> Outcome {
    let cfg = |minn, maxn| NGramConfig {
        minn,
        maxn,
        buckets: 2_000_000,
    };
    let enumeration = extract_ngrams("where", &cfg(3, 3)) == ["<wh", "whe", "her", "ere", "re>"]
        && extract_ngrams("a", &cfg(3, 6)).is_empty()
        && extract_ngrams("ab", &cfg(3, 6)) == ["<ab", "ab>"];

    let mut wins = 0;
    let mut worst_margin = f32::INFINITY;
    for seed in 0..20 {
        let (own, median) = morphology_trial(seed);
        wins += usize::from(own > median);
        worst_margin = worst_margin.min(own - median);
    }
    check(
        enumeration && wins > 10,
        format!("n-gram enumeration exact: {enumeration}; imputed beats median in {wins}/20 seeds (smallest margin {worst_margin:.3})"),
    )
}

// ---------------------------------------------------------------------------

fn run(number: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let (status, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!(
        "criterion {number:>2} {name:<28} {status}  {detail} [{:.1?}]",
        start.elapsed()
    );
    outcome.is_ok()
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; listing
    // requests must report no tests.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut passed = vec![
        run(1, "gradient correctness", criterion_1),
        run(2, "AUC oracle equivalence", criterion_2),
        run(3, "Huffman optimality", criterion_3),
        run(4, "sampling fidelity", criterion_4),
    ];

    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| run_seed(s)).collect();
    passed.push(run(5, "synthetic end-to-end", || criterion_5(&runs)));
    passed.push(run(6, "general vs specific", || criterion_6(&runs)));
    passed.push(run(7, "small-corpus degradation", || criterion_7(&runs)));
    passed.push(run(8, "determinism", || criterion_8(&runs)));

    passed.push(run(9, "format round-trips", criterion_9));
    passed.push(run(10, "report fidelity", criterion_10));
    passed.push(run(11, "subword imputation", criterion_11));

    let failed = passed.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
