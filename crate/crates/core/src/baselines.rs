//! Bag-of-words baselines: tf-idf features, multinomial naive Bayes and
//! L2-regularized multinomial logistic regression.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use indexmap::IndexMap;
use log::{debug, info};

use crate::classifier::{softmax, LabelSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"BOWMDL1\0";

/// Sparse feature vector as `(feature index, value)` pairs, sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

/// Documents whose token statistics determine the idf weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitScope {
    /// Training, validation and test documents together.
    EntireCorpus,
    /// Training documents only.
    TrainOnly,
}

/// Smoothed tf-idf: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, features are
/// raw counts times idf.
///
/// Feature indices follow first occurrence, training documents first, so
/// training tokens are indexed identically under either scope.
#[derive(Clone, Debug, PartialEq)]
pub struct TfIdfModel {
    index: IndexMap<String, usize>,
    idf: Vec<f64>,
    scope: FitScope,
    n_docs: usize,
}

impl TfIdfModel {
    /// Fits on `train`, and also on `heldout` when `scope` is
    /// [`FitScope::EntireCorpus`]. Labels are never looked at.
    pub fn fit<S: AsRef<str>>(train: &[&[S]], heldout: &[&[S]], scope: FitScope) -> Result<Self> {
        let docs: Vec<&[S]> = match scope {
            FitScope::EntireCorpus => train.iter().chain(heldout).copied().collect(),
            FitScope::TrainOnly => train.to_vec(),
        };
        if docs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }

        let mut index: IndexMap<String, usize> = IndexMap::new();
        let mut df: Vec<u64> = Vec::new();
        let mut seen_in_doc: Vec<usize> = Vec::new();
        for (d, doc) in docs.iter().enumerate() {
            for t in doc.iter() {
                let t = t.as_ref();
                let i = match index.get(t) {
                    Some(&i) => i,
                    None => {
                        let i = index.len();
                        index.insert(t.to_owned(), i);
                        df.push(0);
                        seen_in_doc.push(usize::MAX);
                        i
                    }
                };
                if seen_in_doc[i] != d {
                    seen_in_doc[i] = d;
                    df[i] += 1;
                }
            }
        }

        let n = docs.len() as f64;
        let idf = df
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect();
        Ok(TfIdfModel {
            index,
            idf,
            scope,
            n_docs: docs.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn scope(&self) -> FitScope {
        self.scope
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn feature(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.feature(token).map(|i| self.idf[i])
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Raw term counts of known tokens.
    pub fn counts<S: AsRef<str>>(&self, doc: &[S]) -> SparseVec {
        let mut v: Vec<(usize, f64)> = Vec::new();
        for t in doc {
            if let Some(i) = self.feature(t.as_ref()) {
                v.push((i, 1.0));
            }
        }
        v.sort_unstable_by_key(|e| e.0);
        let mut out: SparseVec = Vec::with_capacity(v.len());
        for (i, x) in v {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += x,
                _ => out.push((i, x)),
            }
        }
        out
    }

    /// tf-idf features; empty for documents without known tokens.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVec {
        let mut v = self.counts(doc);
        for (i, x) in v.iter_mut() {
            *x *= self.idf[*i];
        }
        v
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_u8(match self.scope {
            FitScope::EntireCorpus => 0,
            FitScope::TrainOnly => 1,
        })?;
        w.write_u64::<LittleEndian>(self.n_docs as u64)?;
        for (token, &idf) in self.index.keys().zip(&self.idf) {
            write_str(w, token)?;
            w.write_f64::<LittleEndian>(idf)?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R, v: usize) -> Result<Self> {
        let scope = match r.read_u8().map_err(fmt_err)? {
            0 => FitScope::EntireCorpus,
            1 => FitScope::TrainOnly,
            x => return Err(Error::Format(format!("baseline model: scope {x}"))),
        };
        let n_docs = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
        let mut index = IndexMap::with_capacity(v);
        let mut idf = Vec::with_capacity(v);
        for i in 0..v {
            let token = read_str(r)?;
            if index.insert(token, i).is_some() {
                return Err(Error::Format("baseline model: duplicate token".into()));
            }
            idf.push(r.read_f64::<LittleEndian>().map_err(fmt_err)?);
        }
        Ok(TfIdfModel {
            index,
            idf,
            scope,
            n_docs,
        })
    }
}

/// Multinomial naive Bayes over raw term counts with add-one smoothing.
#[derive(Clone, Debug, PartialEq)]
pub struct NaiveBayesModel {
    pub log_prior: Vec<f64>,
    /// `K x V`, row-major.
    pub log_likelihood: Vec<f64>,
    pub vocab_size: usize,
}

impl NaiveBayesModel {
    /// Trains on `(term counts, class)` pairs over a vocabulary of
    /// `vocab_size` features. Every class needs at least one document.
    pub fn train(docs: &[(SparseVec, usize)], classes: usize, vocab_size: usize) -> Result<Self> {
        let mut doc_counts = vec![0u64; classes];
        let mut term_counts = vec![0.0f64; classes * vocab_size];
        for (x, c) in docs {
            doc_counts[*c] += 1;
            for &(i, v) in x {
                term_counts[c * vocab_size + i] += v;
            }
        }
        if let Some(k) = doc_counts.iter().position(|&n| n == 0) {
            return Err(Error::Config(format!("class {k} has no training documents")));
        }

        let n = docs.len() as f64;
        let log_prior = doc_counts.iter().map(|&c| (c as f64 / n).ln()).collect();
        let mut log_likelihood = vec![0.0; classes * vocab_size];
        for k in 0..classes {
            let row = &term_counts[k * vocab_size..(k + 1) * vocab_size];
            let total: f64 = row.iter().sum::<f64>() + vocab_size as f64;
            for (dst, &c) in log_likelihood[k * vocab_size..].iter_mut().zip(row) {
                *dst = ((c + 1.0) / total).ln();
            }
        }
        Ok(NaiveBayesModel {
            log_prior,
            log_likelihood,
            vocab_size,
        })
    }

    pub fn classes(&self) -> usize {
        self.log_prior.len()
    }

    /// Posterior class distribution for term counts `x`.
    pub fn predict(&self, x: &SparseVec) -> Vec<f64> {
        let v = self.vocab_size;
        let scores: Vec<f64> = (0..self.classes())
            .map(|k| self.log_prior[k] + x.iter().map(|&(i, c)| c * self.log_likelihood[k * v + i]).sum::<f64>())
            .collect();
        softmax(&scores)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogRegConfig {
    pub l2_lambda: f64,
    /// Iteration cap for full-batch gradient descent.
    pub epochs: usize,
    /// Initial step size of the backtracking line search.
    pub lr: f64,
    /// Stop when the largest absolute gradient entry falls below this.
    pub tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2_lambda: 1.0,
            epochs: 500,
            lr: 1.0,
            tolerance: 1e-5,
        }
    }
}

/// Multinomial logistic regression without bias, fitted by minimizing
/// `sum_i CE(softmax(W x_i), y_i) + (lambda / 2) |W|^2`, the MAP estimate
/// under an isotropic Gaussian prior with variance `1 / lambda`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRegModel {
    /// `K x V`, row-major.
    pub weights: Vec<f64>,
    pub classes: usize,
    pub features: usize,
    pub l2_lambda: f64,
}

impl LogRegModel {
    pub fn zeros(classes: usize, features: usize, l2_lambda: f64) -> Self {
        LogRegModel {
            weights: vec![0.0; classes * features],
            classes,
            features,
            l2_lambda,
        }
    }

    fn logits(&self, weights: &[f64], x: &SparseVec) -> Vec<f64> {
        (0..self.classes)
            .map(|k| x.iter().map(|&(i, v)| weights[k * self.features + i] * v).sum())
            .collect()
    }

    pub fn predict(&self, x: &SparseVec) -> Vec<f64> {
        softmax(&self.logits(&self.weights, x))
    }

    /// Objective value at `weights`.
    pub fn objective(&self, weights: &[f64], docs: &[(SparseVec, usize)]) -> f64 {
        let ce: f64 = docs
            .iter()
            .map(|(x, y)| {
                let z = self.logits(weights, x);
                let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
                lse - z[*y]
            })
            .sum();
        ce + 0.5 * self.l2_lambda * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of the objective at `weights`.
    pub fn gradient(&self, weights: &[f64], docs: &[(SparseVec, usize)]) -> Vec<f64> {
        let mut grad: Vec<f64> = weights.iter().map(|w| self.l2_lambda * w).collect();
        for (x, y) in docs {
            let p = softmax(&self.logits(weights, x));
            for (k, &pk) in p.iter().enumerate() {
                let coeff = pk - if k == *y { 1.0 } else { 0.0 };
                for &(i, v) in x {
                    grad[k * self.features + i] += coeff * v;
                }
            }
        }
        grad
    }

    /// Full-batch gradient descent with Armijo backtracking. The step grows
    /// after every accepted iteration and halves until the sufficient
    /// decrease condition holds.
    pub fn train(docs: &[(SparseVec, usize)], classes: usize, features: usize, cfg: &LogRegConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut seen = vec![false; classes];
        docs.iter().for_each(|(_, y)| seen[*y] = true);
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("class {k} has no training documents")));
        }

        let mut model = LogRegModel::zeros(classes, features, cfg.l2_lambda);
        let mut step = cfg.lr;
        let mut f = model.objective(&model.weights, docs);
        let mut iterations = 0;
        for _ in 0..cfg.epochs {
            let grad = model.gradient(&model.weights, docs);
            let max_abs = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if !max_abs.is_finite() || !f.is_finite() {
                return Err(Error::NonFinite(format!("logistic regression objective {f}")));
            }
            if max_abs < cfg.tolerance {
                break;
            }
            let sq: f64 = grad.iter().map(|g| g * g).sum();
            loop {
                let candidate: Vec<f64> = model.weights.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
                let fc = model.objective(&candidate, docs);
                if fc <= f - 0.5 * step * sq {
                    model.weights = candidate;
                    f = fc;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    return Err(Error::NonFinite("line search failed to make progress".into()));
                }
            }
            iterations += 1;
            debug!("iteration={iterations} objective={f:.6} step={step:.3e}");
        }
        info!("logreg iterations={iterations} objective={f:.6}");
        Ok(model)
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

/// A fitted bag-of-words classifier together with its featurizer.
#[derive(Clone, Debug, PartialEq)]
pub enum BowModel {
    NaiveBayes {
        labels: LabelSet,
        tfidf: TfIdfModel,
        model: NaiveBayesModel,
    },
    LogReg {
        labels: LabelSet,
        tfidf: TfIdfModel,
        model: LogRegModel,
    },
}

impl BowModel {
    /// Naive Bayes on raw counts. The tf-idf fit only fixes the feature
    /// space.
    pub fn train_nb<S: AsRef<str>>(
        train: &[(&[S], usize)],
        heldout: &[&[S]],
        labels: &LabelSet,
        scope: FitScope,
    ) -> Result<Self> {
        let texts: Vec<&[S]> = train.iter().map(|d| d.0).collect();
        let tfidf = TfIdfModel::fit(&texts, heldout, scope)?;
        let data: Vec<(SparseVec, usize)> = train.iter().map(|(t, y)| (tfidf.counts(t), *y)).collect();
        let model = NaiveBayesModel::train(&data, labels.len(), tfidf.len())?;
        Ok(BowModel::NaiveBayes {
            labels: labels.clone(),
            tfidf,
            model,
        })
    }

    pub fn train_logreg<S: AsRef<str>>(
        train: &[(&[S], usize)],
        heldout: &[&[S]],
        labels: &LabelSet,
        scope: FitScope,
        cfg: &LogRegConfig,
    ) -> Result<Self> {
        let texts: Vec<&[S]> = train.iter().map(|d| d.0).collect();
        let tfidf = TfIdfModel::fit(&texts, heldout, scope)?;
        let data: Vec<(SparseVec, usize)> = train.iter().map(|(t, y)| (tfidf.transform(t), *y)).collect();
        let model = LogRegModel::train(&data, labels.len(), tfidf.len(), cfg)?;
        Ok(BowModel::LogReg {
            labels: labels.clone(),
            tfidf,
            model,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        match self {
            BowModel::NaiveBayes { labels, .. } | BowModel::LogReg { labels, .. } => labels,
        }
    }

    pub fn predict<S: AsRef<str>>(&self, doc: &[S]) -> Vec<f64> {
        match self {
            BowModel::NaiveBayes { tfidf, model, .. } => model.predict(&tfidf.counts(doc)),
            BowModel::LogReg { tfidf, model, .. } => model.predict(&tfidf.transform(doc)),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }

    /// Serializes the model.
    ///
    /// Layout, little-endian: magic `BOWMDL1\0`; `u8` kind (0 naive Bayes,
    /// 1 logistic regression); `u64` K, V; K labels; the tf-idf block (`u8`
    /// scope, `u64` document count, V entries of token and `f64` idf); then
    /// for naive Bayes K `f64` log priors and `K x V` `f64` log likelihoods,
    /// for logistic regression the `f64` lambda and `K x V` `f64` weights.
    /// Strings are a `u32` byte length followed by UTF-8.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let (kind, labels, tfidf) = match self {
            BowModel::NaiveBayes { labels, tfidf, .. } => (0u8, labels, tfidf),
            BowModel::LogReg { labels, tfidf, .. } => (1u8, labels, tfidf),
        };
        w.write_all(MAGIC)?;
        w.write_u8(kind)?;
        w.write_u64::<LittleEndian>(labels.len() as u64)?;
        w.write_u64::<LittleEndian>(tfidf.len() as u64)?;
        for name in labels.names() {
            write_str(w, name)?;
        }
        tfidf.write_to(w)?;
        match self {
            BowModel::NaiveBayes { model, .. } => {
                for &x in model.log_prior.iter().chain(&model.log_likelihood) {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
            BowModel::LogReg { model, .. } => {
                w.write_f64::<LittleEndian>(model.l2_lambda)?;
                for &x in &model.weights {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt_err)?;
        if &magic != MAGIC {
            return Err(Error::Format("baseline model: bad magic".into()));
        }
        let kind = r.read_u8().map_err(fmt_err)?;
        let k = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
        let v = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
        let labels = LabelSet::new((0..k).map(|_| read_str(r)).collect::<Result<Vec<_>>>()?)?;
        let tfidf = TfIdfModel::read_from(r, v)?;
        let mut read_f64s = |n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0.0; n];
            r.read_f64_into::<LittleEndian>(&mut buf).map_err(fmt_err)?;
            Ok(buf)
        };
        match kind {
            0 => {
                let log_prior = read_f64s(k)?;
                let log_likelihood = read_f64s(k * v)?;
                Ok(BowModel::NaiveBayes {
                    labels,
                    tfidf,
                    model: NaiveBayesModel {
                        log_prior,
                        log_likelihood,
                        vocab_size: v,
                    },
                })
            }
            1 => {
                let l2_lambda = read_f64s(1)?[0];
                let weights = read_f64s(k * v)?;
                Ok(BowModel::LogReg {
                    labels,
                    tfidf,
                    model: LogRegModel {
                        weights,
                        classes: k,
                        features: v,
                        l2_lambda,
                    },
                })
            }
            x => Err(Error::Format(format!("baseline model: unknown kind {x}"))),
        }
    }
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::Format(format!("baseline model: {e}"))
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(fmt_err)?;
    String::from_utf8(buf).map_err(|_| Error::Format("baseline model: invalid UTF-8".into()))
}
