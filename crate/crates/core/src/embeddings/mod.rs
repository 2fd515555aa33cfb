//! Unsupervised word embeddings: CBOW and skip-gram trained with
//! hierarchical softmax or negative sampling, optionally enriched with
//! hashed character n-grams.

mod huffman;
mod query;
mod sampling;
pub mod sgd;
mod train;

pub use huffman::HuffmanCoding;
pub use query::{analogy, nearest, Neighbor, VectorIndex, WordVectors};
pub use sampling::{UnigramTable, DEFAULT_TABLE_SIZE};
pub use train::train;

use crate::corpus::{SubsampleConfig, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::subword::{compose_vector, NGramConfig};
use crate::vecio::VectorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Cbow,
    SkipGram,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    HierarchicalSoftmax,
    NegativeSampling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub model: ModelKind,
    pub loss: LossKind,
    pub dim: usize,
    /// Maximum context window; the effective window per center word is
    /// drawn uniformly from `1..=window`.
    pub window: usize,
    pub epochs: usize,
    pub lr0: f32,
    pub lr_min: f32,
    /// Negative samples per prediction (negative sampling only).
    pub negatives: usize,
    pub subsample: SubsampleConfig,
    pub table_size: usize,
    /// Character n-gram buckets; `None` trains plain word vectors.
    pub subwords: Option<NGramConfig>,
    /// Number of training threads. More than one worker updates the shared
    /// weights without synchronization and is not reproducible.
    pub workers: usize,
    pub seed: u64,
}

impl EmbeddingConfig {
    /// Defaults for the given architecture: dim 200, window 5, 5 epochs,
    /// 5 negatives, and an initial learning rate of 0.05 for CBOW or 0.025
    /// for skip-gram.
    pub fn new(model: ModelKind, loss: LossKind) -> Self {
        let lr0 = match model {
            ModelKind::Cbow => 0.05,
            ModelKind::SkipGram => 0.025,
        };
        EmbeddingConfig {
            model,
            loss,
            dim: 200,
            window: 5,
            epochs: 5,
            lr0,
            lr_min: lr0 * 1e-4,
            negatives: 5,
            subsample: SubsampleConfig::default(),
            table_size: DEFAULT_TABLE_SIZE,
            subwords: None,
            workers: 1,
            seed: 1,
        }
    }

    /// Sets `lr0` and resets `lr_min` to `1e-4 * lr0`.
    pub fn with_lr(mut self, lr0: f32) -> Self {
        self.lr0 = lr0;
        self.lr_min = lr0 * 1e-4;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.dim < 1 {
            return fail("dim must be at least 1");
        }
        if self.window < 1 {
            return fail("window must be at least 1");
        }
        if !(self.lr_min > 0.0 && self.lr0 > self.lr_min) {
            return fail("learning rates must satisfy lr0 > lr_min > 0");
        }
        if self.loss == LossKind::NegativeSampling && self.negatives < 1 {
            return fail("negative sampling needs at least one negative");
        }
        if self.subsample.t < 0.0 {
            return fail("subsampling threshold must be non-negative");
        }
        if self.workers < 1 {
            return fail("at least one worker is required");
        }
        if let Some(ng) = &self.subwords {
            ng.validate()?;
        }
        Ok(())
    }
}

/// Trained embedding model.
///
/// `input` holds one row per vocabulary word followed by one row per
/// n-gram bucket. `output` holds one row per Huffman internal node under
/// hierarchical softmax, or one row per word under negative sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    pub input: Matrix,
    pub output: Matrix,
    pub config: EmbeddingConfig,
}

impl EmbeddingModel {
    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn buckets(&self) -> usize {
        self.config.subwords.map_or(0, |ng| ng.buckets)
    }

    /// Vector of `word`, composed from subwords when the model has them.
    /// `None` for unknown words without subword information.
    pub fn word_vector(&self, word: &str) -> Option<Vec<f32>> {
        match &self.config.subwords {
            Some(ng) => Some(compose_vector(&self.input, &self.vocab, word, ng)),
            None => self.vocab.id(word).map(|id| self.input.row(id).to_vec()),
        }
    }

    /// Vector of every vocabulary word, in id order.
    pub fn word_matrix(&self) -> Matrix {
        match &self.config.subwords {
            Some(ng) => Matrix::from_rows(
                self.dim(),
                self.vocab
                    .words()
                    .iter()
                    .map(|w| compose_vector(&self.input, &self.vocab, w, ng)),
            ),
            None => self.input.clone(),
        }
    }

    /// Exports the word vectors, carrying the bucket rows along when the
    /// model was trained with subwords.
    pub fn to_vector_set(&self, name: &str) -> VectorSet {
        let mut set = VectorSet::new(name, self.vocab.words().to_vec(), self.word_matrix())
            .expect("vocabulary tokens are unique");
        if let Some(ng) = self.config.subwords {
            let v = self.vocab.len();
            set = set.with_subwords(ng, self.input.slice_rows(v..v + ng.buckets));
        }
        set
    }
}
