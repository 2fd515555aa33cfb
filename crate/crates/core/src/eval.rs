//! Stratified k-fold cross-validation with per-class one-vs-rest AUC.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{BowModel, FitScope, LogRegConfig};
use crate::classifier::{self, ClassifierConfig, LabelSet, TextClassifier};
use crate::corpus::LabeledDoc;
use crate::error::{Error, Result};
use crate::vecio::VectorSet;

/// Assignment of documents to `k` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    /// Fold of each document.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Shuffles the members of each class with `seed` and deals them to the
    /// folds round-robin. Dealing continues across classes where the
    /// previous class stopped, which keeps total fold sizes within one.
    pub fn stratified<S: AsRef<str>>(labels: &[S], k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {k}")));
        }
        let mut classes: Vec<&str> = labels.iter().map(AsRef::as_ref).collect();
        classes.sort_unstable();
        classes.dedup();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = vec![0; labels.len()];
        let mut next = 0;
        for class in classes {
            let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].as_ref() == class).collect();
            if members.len() < k {
                return Err(Error::ClassTooSmall {
                    class: class.to_owned(),
                    size: members.len(),
                    k,
                });
            }
            members.shuffle(&mut rng);
            for i in members {
                assignment[i] = next;
                next = (next + 1) % k;
            }
        }
        Ok(FoldPlan {
            k,
            seed,
            stratified: true,
            assignment,
        })
    }

    /// Shuffles all `n` documents with `seed` and deals them round-robin.
    pub fn unstratified(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::Config(format!("cannot split {n} documents into {k} folds")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut assignment = vec![0; n];
        for (pos, i) in order.into_iter().enumerate() {
            assignment[i] = pos % k;
        }
        Ok(FoldPlan {
            k,
            seed,
            stratified: false,
            assignment,
        })
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    /// Seed handed to the trainer of `fold`.
    pub fn fold_seed(&self, fold: usize) -> u64 {
        self.seed ^ fold as u64
    }
}

pub fn stratified_kfold<S: AsRef<str>>(labels: &[S], k: usize, seed: u64) -> Result<FoldPlan> {
    FoldPlan::stratified(labels, k, seed)
}

/// Area under the ROC curve, computed as the Mann-Whitney statistic: the
/// fraction of (positive, negative) pairs ranked correctly, with ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedAuc("NaN score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc("need both positive and negative examples"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based, tie-averaged) ranks of the positives, doubled so
    // that averaged ranks stay integral.
    let mut rank_sum2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        // Ranks start+1..=end average to (start + 1 + end) / 2.
        rank_sum2 += tied_positives * (start + 1 + end) as u64;
        start = end;
    }
    let p = positives as u64;
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * negatives as u64) as f64)
}

/// A model that produces a class distribution for a tokenized document.
pub trait Predictor: Send + Sync {
    fn predict(&self, tokens: &[String]) -> Vec<f64>;
}

impl Predictor for TextClassifier {
    fn predict(&self, tokens: &[String]) -> Vec<f64> {
        TextClassifier::predict(self, tokens)
    }
}

impl Predictor for BowModel {
    fn predict(&self, tokens: &[String]) -> Vec<f64> {
        BowModel::predict(self, tokens)
    }
}

/// Documents available to a trainer for one fold.
pub struct FoldData<'a> {
    pub fold: usize,
    pub seed: u64,
    pub labels: &'a LabelSet,
    pub train: Vec<&'a LabeledDoc>,
    /// Held-out documents. Trainers may use their text (for instance to fit
    /// idf weights on the entire corpus) but never their labels.
    pub test: Vec<&'a LabeledDoc>,
}

/// Builds one model per fold.
pub trait Trainer: Sync {
    fn name(&self) -> &str;
    fn train(&self, data: &FoldData<'_>) -> Result<Box<dyn Predictor>>;
}

/// Held-out predictions of one fold.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldPredictions {
    pub docs: Vec<usize>,
    /// One distribution per entry of `docs`.
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Cross-validation results of one model.
#[derive(Clone, Debug, PartialEq)]
pub struct CvReport {
    pub model: String,
    pub classes: Vec<String>,
    /// `fold_auc[fold][class]`
    pub fold_auc: Vec<Vec<f64>>,
    pub predictions: Vec<FoldPredictions>,
    /// Class index of every document.
    pub truth: Vec<usize>,
    pub plan: FoldPlan,
}

impl CvReport {
    pub fn summary(&self, class: usize) -> ClassSummary {
        let values: Vec<f64> = self.fold_auc.iter().map(|f| f[class]).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ClassSummary { mean, min, max }
    }

    /// Mean over classes of the per-class mean AUC.
    pub fn mean_auc(&self) -> f64 {
        let k = self.classes.len();
        (0..k).map(|c| self.summary(c).mean).sum::<f64>() / k as f64
    }

    /// Long format: `model,class,fold,auc`.
    pub fn write_long_csv<W: Write>(reports: &[CvReport], w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["model", "class", "fold", "auc"])?;
        for r in reports {
            for (fold, aucs) in r.fold_auc.iter().enumerate() {
                for (class, auc) in r.classes.iter().zip(aucs) {
                    csv.write_record([r.model.as_str(), class, &fold.to_string(), &auc.to_string()])?;
                }
            }
        }
        csv.flush().map_err(|e| Error::io("<csv>", e))
    }

    /// Summary format: `model,class,mean_auc,min_auc,max_auc`.
    pub fn write_summary_csv<W: Write>(reports: &[CvReport], w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["model", "class", "mean_auc", "min_auc", "max_auc"])?;
        for r in reports {
            for (c, class) in r.classes.iter().enumerate() {
                let s = r.summary(c);
                csv.write_record([
                    r.model.as_str(),
                    class,
                    &s.mean.to_string(),
                    &s.min.to_string(),
                    &s.max.to_string(),
                ])?;
            }
        }
        csv.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Trains one model per fold of `plan` and scores its held-out documents.
///
/// Folds run in parallel when `parallel` is set; results do not depend on
/// it because every fold trains from its own seed.
pub fn cross_validate(
    trainer: &dyn Trainer,
    docs: &[LabeledDoc],
    labels: &LabelSet,
    plan: &FoldPlan,
    parallel: bool,
) -> Result<CvReport> {
    if plan.assignment.len() != docs.len() {
        return Err(Error::Config(format!(
            "fold plan covers {} documents, dataset has {}",
            plan.assignment.len(),
            docs.len()
        )));
    }
    let truth = docs
        .iter()
        .map(|d| labels.index(&d.label))
        .collect::<Result<Vec<_>>>()?;

    let run_fold = |fold: usize| -> Result<(Vec<f64>, FoldPredictions)> {
        let test_idx = plan.test_indices(fold);
        let data = FoldData {
            fold,
            seed: plan.fold_seed(fold),
            labels,
            train: plan.train_indices(fold).into_iter().map(|i| &docs[i]).collect(),
            test: test_idx.iter().map(|&i| &docs[i]).collect(),
        };
        let wrap = |e| Error::Fold {
            fold,
            source: Box::new(e),
        };
        let model = trainer.train(&data).map_err(wrap)?;
        let probabilities: Vec<Vec<f64>> = data.test.iter().map(|d| model.predict(&d.tokens)).collect();
        let aucs = (0..labels.len())
            .map(|c| {
                let scores: Vec<f64> = probabilities.iter().map(|p| p[c]).collect();
                let is_class: Vec<bool> = test_idx.iter().map(|&i| truth[i] == c).collect();
                roc_auc(&scores, &is_class)
            })
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        Ok((
            aucs,
            FoldPredictions {
                docs: test_idx,
                probabilities,
            },
        ))
    };

    let results: Vec<Result<(Vec<f64>, FoldPredictions)>> = if parallel {
        (0..plan.k).into_par_iter().map(run_fold).collect()
    } else {
        (0..plan.k).map(run_fold).collect()
    };
    let mut fold_auc = Vec::with_capacity(plan.k);
    let mut predictions = Vec::with_capacity(plan.k);
    for r in results {
        let (a, p) = r?;
        fold_auc.push(a);
        predictions.push(p);
    }

    Ok(CvReport {
        model: trainer.name().to_owned(),
        classes: labels.names().to_vec(),
        fold_auc,
        predictions,
        truth,
        plan: plan.clone(),
    })
}

/// Labeled training documents and unlabeled held-out documents.
type BowSplit<'a> = (Vec<(&'a [String], usize)>, Vec<&'a [String]>);

fn labeled<'a>(data: &FoldData<'a>) -> Result<BowSplit<'a>> {
    let train = data
        .train
        .iter()
        .map(|d| Ok((d.tokens.as_slice(), data.labels.index(&d.label)?)))
        .collect::<Result<Vec<_>>>()?;
    let heldout = data.test.iter().map(|d| d.tokens.as_slice()).collect();
    Ok((train, heldout))
}

/// Multinomial naive Bayes on term counts.
#[derive(Clone, Debug)]
pub struct NaiveBayesTrainer {
    pub scope: FitScope,
}

impl Trainer for NaiveBayesTrainer {
    fn name(&self) -> &str {
        "nb"
    }

    fn train(&self, data: &FoldData<'_>) -> Result<Box<dyn Predictor>> {
        let (train, heldout) = labeled(data)?;
        Ok(Box::new(BowModel::train_nb(&train, &heldout, data.labels, self.scope)?))
    }
}

/// L2-regularized logistic regression on tf-idf features.
#[derive(Clone, Debug)]
pub struct LogRegTrainer {
    pub scope: FitScope,
    pub config: LogRegConfig,
}

impl Trainer for LogRegTrainer {
    fn name(&self) -> &str {
        "logreg"
    }

    fn train(&self, data: &FoldData<'_>) -> Result<Box<dyn Predictor>> {
        let (train, heldout) = labeled(data)?;
        Ok(Box::new(BowModel::train_logreg(
            &train,
            &heldout,
            data.labels,
            self.scope,
            &self.config,
        )?))
    }
}

/// The embedding classifier, optionally initialized from pretrained
/// vectors. The fold seed replaces the configured seed.
#[derive(Clone, Debug)]
pub struct EmbeddingTrainer<'a> {
    pub name: String,
    pub config: ClassifierConfig,
    pub pretrained: Option<&'a VectorSet>,
}

impl Trainer for EmbeddingTrainer<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn train(&self, data: &FoldData<'_>) -> Result<Box<dyn Predictor>> {
        let docs: Vec<LabeledDoc> = data.train.iter().map(|d| (*d).clone()).collect();
        let cfg = ClassifierConfig {
            seed: data.seed,
            ..self.config.clone()
        };
        Ok(Box::new(classifier::train(&docs, data.labels, &cfg, self.pretrained)?))
    }
}

/// Formats a fraction as a percentage with one decimal, rounding half up.
pub fn percent(x: f64) -> String {
    // The small offset absorbs binary representation error, so that 0.8855
    // rounds to 88.6.
    let tenths = (x * 1000.0 + 0.5 + 1e-7).floor() as i64;
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// `NN.N% [NN.N, NN.N]`
pub fn format_cell(s: &ClassSummary) -> String {
    format!("{}% [{}, {}]", percent(s.mean), percent(s.min), percent(s.max))
}

/// Text table with one row per model and one column per class.
pub fn render_report(reports: &[CvReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(reports.len() + 1);
    let mut header = vec!["model".to_owned()];
    header.extend(first.classes.iter().cloned());
    rows.push(header);
    for r in reports {
        let mut row = vec![r.model.clone()];
        row.extend((0..r.classes.len()).map(|c| format_cell(&r.summary(c))));
        rows.push(row);
    }

    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:<width$}", width = widths[c]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
