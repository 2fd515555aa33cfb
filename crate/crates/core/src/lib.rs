//! Word embeddings and text classification with cross-validated evaluation.
//!
//! The crate covers the whole experimental pipeline:
//!
//! * [`corpus`]: tokenization, vocabularies and frequent-word subsampling.
//! * [`embeddings`]: CBOW and skip-gram training with hierarchical softmax or
//!   negative sampling, plus nearest-neighbor and analogy queries.
//! * [`subword`]: hashed character n-grams for out-of-vocabulary words.
//! * [`classifier`]: a linear softmax classifier over averaged embeddings.
//! * [`baselines`]: tf-idf features with naive Bayes and L2 logistic regression.
//! * [`eval`]: stratified k-fold cross-validation with one-vs-rest AUC.
//! * [`compare`]: rank matrices and parallel-coordinate exports.
//! * [`vecio`]: text and binary word-vector files.
//! * [`synth`]: synthetic corpora with known structure.

pub mod baselines;
pub mod classifier;
pub mod compare;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod subword;
pub mod synth;
pub mod vecio;

pub use classifier::{ClassifierConfig, LabelSet, TextClassifier};
pub use corpus::{tokenize, LabeledDoc, PreprocessConfig, Vocabulary};
pub use embeddings::{EmbeddingConfig, EmbeddingModel, LossKind, ModelKind};
pub use error::{Error, Result};
pub use eval::{CvReport, FoldPlan};

pub use matrix::Matrix;
pub use subword::NGramConfig;
pub use vecio::VectorSet;
