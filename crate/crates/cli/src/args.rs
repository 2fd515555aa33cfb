use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use embclf::baselines::FitScope;
use embclf::corpus::{DigitPolicy, PreprocessConfig};
use embclf::vecio::VectorFormat;
use embclf::{LossKind, ModelKind, NGramConfig};

/// Word embeddings and text classifiers for document classification.
///
/// Labeled input files hold one document per line, written as
/// `__label__<NAME> <text>`. Unlabeled corpora hold one document per line;
/// a leading label is ignored.
#[derive(Debug, Parser, Serialize)]
#[command(name = "embclf", version, propagate_version = true, arg_required_else_help = true)]
pub struct Cli {
    /// Minimum severity of log lines written to stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Info)]
    pub log_level: LogLevel,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Tokenize a file, one document per line. Labels are kept.
    Tokenize(TokenizeArgs),
    /// Print the vocabulary of a file as `token<TAB>count`, by decreasing count.
    Vocab(VocabArgs),
    /// Train word2vec or fastText-style word embeddings on an unlabeled corpus.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Print the nearest neighbors of a word by cosine similarity.
    Nn(NnArgs),
    /// Solve `a : b :: c : ?` by the words closest to `b - a + c`.
    Analogy(AnalogyArgs),
    /// Train the embedding classifier on a labeled file.
    TrainClassifier(TrainClassifierArgs),
    /// Print class probabilities of a trained classifier for every document.
    Predict(PredictArgs),
    /// Evaluate models by k-fold cross-validation and report per-class AUC.
    CrossValidate(CrossValidateArgs),
    /// Compare models on one class and fold through their probability ranks.
    Compare(CompareArgs),
    /// Convert word vectors between the text and binary formats.
    ConvertVectors(ConvertArgs),
    /// Cross-validate the embedding classifier over a grid of embedding settings.
    Gridsearch(GridsearchArgs),
    /// Write a synthetic labeled dataset and unlabeled corpus.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cbow,
    Skipgram,
}

impl Architecture {
    pub fn kind(self) -> ModelKind {
        match self {
            Architecture::Cbow => ModelKind::Cbow,
            Architecture::Skipgram => ModelKind::SkipGram,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Hierarchical softmax over a Huffman tree.
    Hs,
    /// Negative sampling.
    Ns,
}

impl Loss {
    pub fn kind(self) -> LossKind {
        match self {
            Loss::Hs => LossKind::HierarchicalSoftmax,
            Loss::Ns => LossKind::NegativeSampling,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// `.bin` files are binary, anything else is text.
    Auto,
    Text,
    Binary,
}

impl Format {
    pub fn resolve(self, path: &std::path::Path) -> VectorFormat {
        match self {
            Format::Auto => VectorFormat::from_path(path),
            Format::Text => VectorFormat::Text,
            Format::Binary => VectorFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Digits {
    Keep,
    Strip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    /// Multinomial naive Bayes on term counts.
    Nb,
    /// L2-regularized logistic regression on tf-idf features.
    Logreg,
    /// The embedding classifier.
    Embclf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Fit idf weights on training and held-out text together.
    Entire,
    /// Fit idf weights on training text only.
    Train,
}

impl Scope {
    pub fn fit_scope(self) -> FitScope {
        match self {
            Scope::Entire => FitScope::EntireCorpus,
            Scope::Train => FitScope::TrainOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    /// `NN.N% [NN.N, NN.N]` per model and class.
    Table,
    /// Long format `model,class,fold,auc`.
    Csv,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Keep the original letter case.
    #[arg(long)]
    pub no_lowercase: bool,

    /// Whether digits are kept or removed.
    #[arg(long, value_enum, default_value_t = Digits::Keep)]
    pub digits: Digits,
}

impl PreprocessArgs {
    pub fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            lowercase: !self.no_lowercase,
            digits: match self.digits {
                Digits::Keep => DigitPolicy::Keep,
                Digits::Strip => DigitPolicy::Strip,
            },
        }
    }
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SubwordArgs {
    /// Represent words by their vector plus hashed character n-grams.
    #[arg(long)]
    pub subwords: bool,

    /// Shortest character n-gram.
    #[arg(long, default_value_t = 3)]
    pub minn: usize,

    /// Longest character n-gram.
    #[arg(long, default_value_t = 6)]
    pub maxn: usize,

    /// Number of n-gram hash buckets.
    #[arg(long, default_value_t = 2_000_000)]
    pub buckets: usize,
}

impl SubwordArgs {
    pub fn config(&self) -> Option<NGramConfig> {
        self.subwords.then_some(NGramConfig {
            minn: self.minn,
            maxn: self.maxn,
            buckets: self.buckets,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct TokenizeArgs {
    /// Input file.
    pub input: PathBuf,

    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VocabArgs {
    /// Input file.
    pub input: PathBuf,

    /// Output file; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// Drop tokens seen fewer times.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

/// Embedding hyperparameters shared by `train-embeddings` and `gridsearch`.
#[derive(Clone, Debug, Args, Serialize)]
pub struct EmbeddingArgs {
    /// Training epochs.
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Initial learning rate [default: 0.025 for skipgram, 0.05 for cbow].
    #[arg(long)]
    pub lr: Option<f32>,

    /// Negative samples per prediction (negative sampling only).
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,

    /// Subsampling threshold for frequent words; 0 discards every token.
    #[arg(long, default_value_t = 1e-3)]
    pub subsample: f64,

    /// Ignore words seen fewer times.
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,

    /// Training threads; more than one is not reproducible.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    #[command(flatten)]
    pub subwords: SubwordArgs,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainEmbeddingsArgs {
    /// Unlabeled corpus, one document per line.
    pub input: PathBuf,

    /// Output vector file.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Vector file format.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,

    /// Architecture.
    #[arg(long, value_enum, default_value_t = Architecture::Skipgram)]
    pub model: Architecture,

    /// Output layer.
    #[arg(long, value_enum, default_value_t = Loss::Ns)]
    pub loss: Loss,

    /// Vector dimension.
    #[arg(long, default_value_t = 200)]
    pub dim: usize,

    /// Maximum context window.
    #[arg(long, default_value_t = 5)]
    pub window: usize,

    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct NnArgs {
    /// Vector file.
    #[arg(long)]
    pub vectors: PathBuf,

    /// Vector file format.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,

    /// Query word.
    pub word: String,

    /// Number of neighbors.
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalogyArgs {
    /// Vector file.
    #[arg(long)]
    pub vectors: PathBuf,

    /// Vector file format.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub format: Format,

    pub a: String,
    pub b: String,
    pub c: String,

    /// Number of answers.
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
}

/// Embedding classifier hyperparameters.
#[derive(Clone, Debug, Args, Serialize)]
pub struct ClassifierArgs {
    /// Vector dimension [default: that of --pretrained, else 200].
    #[arg(long)]
    pub dim: Option<usize>,

    /// Training epochs.
    #[arg(long, default_value_t = 25)]
    pub epochs: usize,

    /// Initial learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f32,

    /// Ignore words seen fewer times in the training documents.
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,

    /// Initialize word vectors from this vector file.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,

    /// Format of the --pretrained file.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub pretrained_format: Format,

    /// Train only the output layer, keeping word vectors fixed.
    #[arg(long)]
    pub freeze: bool,

    #[command(flatten)]
    pub subwords: SubwordArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainClassifierArgs {
    /// Labeled training file.
    pub input: PathBuf,

    /// Output model file.
    #[arg(short, long)]
    pub output: PathBuf,

    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[command(flatten)]
    pub classifier: ClassifierArgs,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Model written by train-classifier.
    #[arg(long)]
    pub model: PathBuf,

    /// Documents, one per line, labeled or not.
    pub input: PathBuf,

    /// Output CSV `doc,predicted,<class>...`; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CrossValidateArgs {
    /// Labeled dataset.
    pub input: PathBuf,

    /// Models to evaluate; repeat the flag for several.
    #[arg(long = "model", value_enum, default_values_t = [ModelChoice::Nb, ModelChoice::Logreg, ModelChoice::Embclf])]
    pub models: Vec<ModelChoice>,

    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    /// Random seed for fold assignment and training.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Assign folds without balancing classes.
    #[arg(long)]
    pub unstratified: bool,

    /// Format written to stdout.
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub report: ReportFormat,

    /// Also write held-out predictions as `model,fold,doc,truth,class,prob`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,

    /// Also write `model,class,mean_auc,min_auc,max_auc`.
    #[arg(long)]
    pub summary: Option<PathBuf>,

    /// Documents whose text determines the tf-idf weights.
    #[arg(long, value_enum, default_value_t = Scope::Entire)]
    pub tfidf_scope: Scope,

    /// L2 penalty of logistic regression.
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,

    /// Threads used to train folds in parallel; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,

    #[command(flatten)]
    pub classifier: ClassifierArgs,

    #[command(flatten)]
    pub preprocess: PreprocessArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Predictions CSV written by cross-validate --predictions.
    #[arg(long)]
    pub predictions: PathBuf,

    /// Class whose probabilities are ranked.
    #[arg(long)]
    pub class: String,

    /// Fold to compare.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,

    /// Reference model drawn first [default: first model in the file].
    #[arg(long)]
    pub reference: Option<String>,

    /// Write a parallel coordinates plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,

    /// Write ranks as `doc_id,truth,<model>...`.
    #[arg(long)]
    pub csv: Option<PathBuf>,

    /// Print documents whose ranks differ by at least this much between models.
    #[arg(long, default_value_t = 10)]
    pub threshold: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    /// Input vector file.
    pub input: PathBuf,

    /// Output vector file.
    pub output: PathBuf,

    /// Input format.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub from: Format,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Auto)]
    pub to: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct GridsearchArgs {
    /// Labeled dataset.
    pub input: PathBuf,

    /// Unlabeled corpus for embedding training.
    #[arg(long)]
    pub corpus: PathBuf,

    /// Output CSV; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,

    /// Vector dimensions to try.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [50, 100, 150, 200, 300])]
    pub dims: Vec<usize>,

    /// Context windows to try.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [4, 5, 6, 8, 10])]
    pub windows: Vec<usize>,

    /// Architectures to try.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [Architecture::Skipgram])]
    pub models: Vec<Architecture>,

    /// Output layers to try.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1.., default_values_t = [Loss::Ns])]
    pub losses: Vec<Loss>,

    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,

    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Classifier training epochs.
    #[arg(long, default_value_t = 25)]
    pub clf_epochs: usize,

    /// Classifier initial learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub clf_lr: f32,

    /// Train only the classifier output layer.
    #[arg(long)]
    pub freeze: bool,

    #[command(flatten)]
    pub embedding: EmbeddingArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Labeled output file.
    #[arg(long)]
    pub labeled: PathBuf,

    /// Unlabeled output file.
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,

    /// Number of classes.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,

    /// Labeled documents per class.
    #[arg(long, default_value_t = 200)]
    pub docs_per_class: usize,

    /// Unlabeled documents.
    #[arg(long, default_value_t = 50_000)]
    pub unlabeled_docs: usize,

    /// Probability that a token comes from the class lexicon.
    #[arg(long, default_value_t = 0.15)]
    pub keyword_rate: f64,

    /// Random seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}
