//! Supervised text classifier: documents are represented by the mean of
//! their token vectors and classified by a linear softmax layer without
//! bias.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, DigitPolicy, LabeledDoc, PreprocessConfig, Vocabulary};
use crate::embeddings::sgd::LinearSchedule;
use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};
use crate::subword::{ngram_buckets, NGramConfig};
use crate::vecio::VectorSet;

pub const MAGIC: &[u8; 8] = b"EMBCLS1\0";

/// Ordered, unique class names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate label {n:?}")));
            }
        }
        if names.len() < 2 {
            return Err(Error::Config(format!(
                "at least two labels are required, got {}",
                names.len()
            )));
        }
        Ok(LabelSet { names, index })
    }

    /// The distinct labels of `docs`, sorted by name.
    pub fn from_docs(docs: &[LabeledDoc]) -> Result<Self> {
        let mut names: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(name.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierConfig {
    pub dim: usize,
    pub lr0: f32,
    pub lr_min: f32,
    pub epochs: usize,
    /// Represent tokens by their row and hashed character n-grams.
    pub subwords: Option<NGramConfig>,
    /// Only train the output layer.
    pub freeze_embeddings: bool,
    pub min_count: u64,
    pub preprocess: PreprocessConfig,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            dim: 200,
            lr0: 0.1,
            lr_min: 1e-5,
            epochs: 25,
            subwords: None,
            freeze_embeddings: false,
            min_count: 1,
            preprocess: PreprocessConfig::default(),
            seed: 1,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !(self.lr_min > 0.0 && self.lr0 > self.lr_min) {
            return Err(Error::Config("learning rates must satisfy lr0 > lr_min > 0".into()));
        }
        if let Some(ng) = &self.subwords {
            ng.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextClassifier {
    labels: LabelSet,
    vocab: Vocabulary,
    /// `(V + B) x dim`: word rows followed by n-gram bucket rows.
    embeddings: Matrix,
    /// `K x dim`
    output: Matrix,
    subwords: Option<NGramConfig>,
    preprocess: PreprocessConfig,
}

impl TextClassifier {
    pub fn new(
        labels: LabelSet,
        vocab: Vocabulary,
        embeddings: Matrix,
        output: Matrix,
        subwords: Option<NGramConfig>,
        preprocess: PreprocessConfig,
    ) -> Result<Self> {
        let buckets = subwords.map_or(0, |ng| ng.buckets);
        if embeddings.rows() != vocab.len() + buckets {
            return Err(Error::DimensionMismatch {
                expected: vocab.len() + buckets,
                got: embeddings.rows(),
            });
        }
        if output.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: output.rows(),
            });
        }
        if output.cols() != embeddings.cols() {
            return Err(Error::DimensionMismatch {
                expected: embeddings.cols(),
                got: output.cols(),
            });
        }
        Ok(TextClassifier {
            labels,
            vocab,
            embeddings,
            output,
            subwords,
            preprocess,
        })
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut Matrix {
        &mut self.output
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn preprocess(&self) -> &PreprocessConfig {
        &self.preprocess
    }

    /// Rows representing each token; tokens without any row are dropped.
    pub fn token_rows<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<Vec<usize>> {
        token_rows(&self.vocab, self.subwords.as_ref(), tokens)
    }

    /// Mean of the token vectors; zero for documents without known tokens.
    pub fn hidden<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f32> {
        self.hidden_of_rows(&self.token_rows(tokens))
    }

    fn hidden_of_rows(&self, rows: &[Vec<usize>]) -> Vec<f32> {
        let mut h = vec![0.0f32; self.dim()];
        if rows.is_empty() {
            return h;
        }
        let inv_tokens = 1.0 / rows.len() as f32;
        for token in rows {
            let w = inv_tokens / token.len() as f32;
            for &r in token {
                axpy(w, self.embeddings.row(r), &mut h);
            }
        }
        h
    }

    fn probabilities(&self, hidden: &[f32]) -> Vec<f64> {
        let logits: Vec<f64> = self.output.iter_rows().map(|w| f64::from(dot(w, hidden))).collect();
        softmax(&logits)
    }

    /// Class probabilities for a tokenized document.
    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        self.probabilities(&self.hidden(tokens))
    }

    /// Tokenizes `text` with the model's preprocessing and predicts.
    pub fn predict_text(&self, text: &str) -> Vec<f64> {
        self.predict(&tokenize(text, &self.preprocess))
    }

    /// Softmax cross-entropy of `label` for a document given as token rows.
    pub fn loss_of_rows(&self, rows: &[Vec<usize>], label: usize) -> f64 {
        let p = self.probabilities(&self.hidden_of_rows(rows));
        -p[label].max(f64::MIN_POSITIVE).ln()
    }

    /// One SGD step on a single document. Both gradients are evaluated at
    /// the current parameters before either layer is updated.
    pub fn sgd_step(&mut self, rows: &[Vec<usize>], label: usize, lr: f32, freeze: bool) -> f64 {
        let hidden = self.hidden_of_rows(rows);
        let p = self.probabilities(&hidden);
        let dim = self.dim();

        let mut grad_hidden = vec![0.0f32; dim];
        let coeffs: Vec<f32> = p
            .iter()
            .enumerate()
            .map(|(k, &pk)| (pk - if k == label { 1.0 } else { 0.0 }) as f32)
            .collect();
        for (k, &c) in coeffs.iter().enumerate() {
            axpy(c, self.output.row(k), &mut grad_hidden);
        }
        for (k, &c) in coeffs.iter().enumerate() {
            axpy(-lr * c, &hidden, self.output.row_mut(k));
        }
        if !freeze && !rows.is_empty() {
            let inv_tokens = 1.0 / rows.len() as f32;
            for token in rows {
                let w = -lr * inv_tokens / token.len() as f32;
                for &r in token {
                    axpy(w, &grad_hidden, self.embeddings.row_mut(r));
                }
            }
        }
        -p[label].max(f64::MIN_POSITIVE).ln()
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
    /// Layout, little-endian: magic `EMBCLS1\0`; `u64` K, V, B, dim; K
    /// labels; V vocabulary entries (token and `u64` count); preprocessing
    /// flags (`u8` lowercase, `u8` digit policy) and `u32` minn, maxn; the
    /// `(V + B) x dim` embedding rows; the `K x dim` output rows. Strings are
    /// a `u32` byte length followed by UTF-8; matrices are row-major `f32`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let (minn, maxn, buckets) = self.subwords.map_or((0, 0, 0), |ng| (ng.minn, ng.maxn, ng.buckets));
        w.write_all(MAGIC)?;
        for n in [self.labels.len(), self.vocab.len(), buckets, self.dim()] {
            w.write_u64::<LittleEndian>(n as u64)?;
        }
        for name in self.labels.names() {
            write_str(w, name)?;
        }
        for (word, &count) in self.vocab.words().iter().zip(self.vocab.counts()) {
            write_str(w, word)?;
            w.write_u64::<LittleEndian>(count)?;
        }
        w.write_u8(u8::from(self.preprocess.lowercase))?;
        w.write_u8(match self.preprocess.digits {
            DigitPolicy::Keep => 0,
            DigitPolicy::Strip => 1,
        })?;
        w.write_u32::<LittleEndian>(minn as u32)?;
        w.write_u32::<LittleEndian>(maxn as u32)?;
        for m in [&self.embeddings, &self.output] {
            for &x in m.as_slice() {
                w.write_f32::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("classifier model: {e}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("classifier model: bad magic".into()));
        }
        let mut header = [0u64; 4];
        r.read_u64_into::<LittleEndian>(&mut header).map_err(fmt)?;
        let [k, v, b, dim] = header.map(|x| x as usize);

        let names = (0..k).map(|_| read_str(r)).collect::<Result<Vec<_>>>()?;
        let labels = LabelSet::new(names)?;
        let mut entries = Vec::with_capacity(v);
        for _ in 0..v {
            let word = read_str(r)?;
            let count = r.read_u64::<LittleEndian>().map_err(fmt)?;
            entries.push((word, count));
        }
        let min_count = entries.iter().map(|e| e.1).min().unwrap_or(1).max(1);
        let vocab = Vocabulary::from_counts(entries.iter().cloned(), min_count)?;
        if entries.iter().enumerate().any(|(i, (w, _))| vocab.id(w) != Some(i)) {
            return Err(Error::Format("classifier model: vocabulary out of order".into()));
        }

        let lowercase = r.read_u8().map_err(fmt)? != 0;
        let digits = match r.read_u8().map_err(fmt)? {
            0 => DigitPolicy::Keep,
            1 => DigitPolicy::Strip,
            x => return Err(Error::Format(format!("classifier model: digit policy {x}"))),
        };
        let minn = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        let maxn = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
        let subwords = (b > 0).then_some(NGramConfig { minn, maxn, buckets: b });

        let mut emb = vec![0.0f32; (v + b) * dim];
        r.read_f32_into::<LittleEndian>(&mut emb).map_err(fmt)?;
        let mut out = vec![0.0f32; k * dim];
        r.read_f32_into::<LittleEndian>(&mut out).map_err(fmt)?;

        TextClassifier::new(
            labels,
            vocab,
            Matrix::from_vec(v + b, dim, emb),
            Matrix::from_vec(k, dim, out),
            subwords,
            PreprocessConfig { lowercase, digits },
        )
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let fmt = |e: std::io::Error| Error::Format(format!("classifier model: {e}"));
    let len = r.read_u32::<LittleEndian>().map_err(fmt)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(fmt)?;
    String::from_utf8(buf).map_err(|_| Error::Format("classifier model: invalid UTF-8".into()))
}

fn token_rows<S: AsRef<str>>(vocab: &Vocabulary, subwords: Option<&NGramConfig>, tokens: &[S]) -> Vec<Vec<usize>> {
    tokens
        .iter()
        .filter_map(|t| {
            let t = t.as_ref();
            let mut rows = Vec::new();
            if let Some(id) = vocab.id(t) {
                rows.push(id);
            }
            if let Some(ng) = subwords {
                rows.extend(ngram_buckets(t, ng).into_iter().map(|b| vocab.len() + b));
            }
            (!rows.is_empty()).then_some(rows)
        })
        .collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Trains a classifier on `docs`.
///
/// The vocabulary is built from the training documents. With `pretrained`
/// vectors, rows of words found there are copied verbatim; the remaining
/// rows are imputed from the pretrained n-gram buckets when both sides use
/// the same subword configuration, and drawn uniformly from
/// `(-1/dim, 1/dim)` otherwise.
pub fn train(
    docs: &[LabeledDoc],
    labels: &LabelSet,
    cfg: &ClassifierConfig,
    pretrained: Option<&VectorSet>,
) -> Result<TextClassifier> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if let Some(p) = pretrained {
        p.expect_dim(cfg.dim)?;
    }
    let targets = docs
        .iter()
        .map(|d| labels.index(&d.label))
        .collect::<Result<Vec<_>>>()?;

    let vocab = Vocabulary::build(docs.iter().flat_map(|d| d.tokens.iter()), cfg.min_count)?;
    let v = vocab.len();
    let buckets = cfg.subwords.map_or(0, |ng| ng.buckets);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 1.0 / cfg.dim as f32;
    let mut embeddings = Matrix::uniform(v + buckets, cfg.dim, -bound..bound, &mut rng);

    if let Some(p) = pretrained {
        let shared_buckets = match (p.subwords(), &cfg.subwords) {
            (Some((pcfg, rows)), Some(ccfg)) if pcfg == ccfg => Some(rows),
            _ => None,
        };
        let mut found = 0;
        for (id, word) in vocab.words().iter().enumerate() {
            if let Some(vec) = p.get(word) {
                embeddings.row_mut(id).copy_from_slice(vec);
                found += 1;
            } else if shared_buckets.is_some() {
                if let Some(vec) = p.lookup(word) {
                    embeddings.row_mut(id).copy_from_slice(&vec);
                }
            }
        }
        if let Some(rows) = shared_buckets {
            embeddings.as_mut_slice()[v * cfg.dim..].copy_from_slice(rows.as_slice());
        }
        info!(
            "pretrained={} coverage={:.4} dim={}",
            p.name(),
            found as f64 / v as f64,
            p.dim()
        );
    }

    let mut model = TextClassifier::new(
        labels.clone(),
        vocab,
        embeddings,
        Matrix::zeros(labels.len(), cfg.dim),
        cfg.subwords,
        cfg.preprocess,
    )?;

    let rows: Vec<Vec<Vec<usize>>> = docs.iter().map(|d| model.token_rows(&d.tokens)).collect();
    let doc_tokens: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
    let schedule = LinearSchedule {
        lr0: cfg.lr0,
        lr_min: cfg.lr_min,
        total: doc_tokens.max(1) * cfg.epochs as u64,
    };

    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut processed = 0u64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            let lr = schedule.at(processed);
            loss += model.sgd_step(&rows[i], targets[i], lr, cfg.freeze_embeddings);
            processed += docs[i].tokens.len() as u64;
        }
        let loss = loss / docs.len() as f64;
        info!(
            "epoch={} tokens={} lr={:.6} loss={:.6}",
            epoch + 1,
            processed,
            schedule.at(processed),
            loss
        );
        if !loss.is_finite() || !model.output.is_finite() || !model.embeddings.is_finite() {
            return Err(Error::NonFinite(format!(
                "classifier diverged in epoch {} (mean loss {loss})",
                epoch + 1
            )));
        }
    }

    Ok(model)
}
