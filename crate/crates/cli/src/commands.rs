use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{error, info, warn};

use embclf::baselines::LogRegConfig;
use embclf::classifier::{self, ClassifierConfig, LabelSet, TextClassifier};
use embclf::compare::{
    disagreement_report, parallel_coords_csv, parallel_coords_svg, read_predictions_csv, run_matrix_from_predictions,
    write_predictions_csv,
};
use embclf::corpus::{format_labeled_line, parse_labeled_line, LABEL_PREFIX};
use embclf::embeddings::{self, VectorIndex};
use embclf::eval::{
    cross_validate, render_report, CvReport, EmbeddingTrainer, FoldPlan, LogRegTrainer, NaiveBayesTrainer, Trainer,
};
use embclf::synth::{keyword_corpus, KeywordCorpusConfig};
use embclf::vecio::{read_vectors, write_vectors, VectorSet};
use embclf::{tokenize, EmbeddingConfig, Error, LabeledDoc, LossKind, ModelKind, PreprocessConfig, Result, Vocabulary};

use crate::args::*;

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    open(path)?
        .lines()
        .collect::<io::Result<Vec<_>>>()
        .map_err(|e| io_error(path, e))
}

/// Runs `f` against the file at `path`, or against `out` when there is none.
fn with_output<F>(path: Option<&Path>, out: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w).and_then(|_| w.flush()).map_err(|e| io_error(p, e))
        }
        None => f(out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}

/// Reads a labeled file. Blank lines are skipped; any other line without a
/// label is an error.
pub fn read_labeled(path: &Path, cfg: &PreprocessConfig) -> Result<Vec<LabeledDoc>> {
    let mut docs = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc = parse_labeled_line(line, cfg).ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            msg: format!("expected {LABEL_PREFIX}<NAME> <text>"),
        })?;
        docs.push(doc);
    }
    if docs.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(docs)
}

/// Reads one tokenized document per non-empty line, dropping labels.
pub fn read_corpus(path: &Path, cfg: &PreprocessConfig) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|line| match parse_labeled_line(line, cfg) {
            Some(doc) => doc.tokens,
            None => tokenize(line, cfg),
        })
        .filter(|d| !d.is_empty())
        .collect())
}

fn load_vectors(path: &Path, format: Format) -> Result<VectorSet> {
    let set = read_vectors(path, format.resolve(path))?;
    info!(
        "event=vectors_loaded path={} words={} dim={}",
        path.display(),
        set.len(),
        set.dim()
    );
    Ok(set)
}

fn embedding_config(
    model: Architecture,
    loss: Loss,
    dim: usize,
    window: usize,
    seed: u64,
    a: &EmbeddingArgs,
) -> EmbeddingConfig {
    let mut cfg = EmbeddingConfig::new(model.kind(), loss.kind());
    if let Some(lr) = a.lr {
        cfg = cfg.with_lr(lr);
    }
    cfg.dim = dim;
    cfg.window = window;
    cfg.epochs = a.epochs;
    cfg.negatives = a.negatives;
    cfg.subsample.t = a.subsample;
    cfg.subwords = a.subwords.config();
    cfg.workers = a.workers;
    cfg.seed = seed;
    cfg
}

fn train_vectors(docs: &[Vec<String>], cfg: &EmbeddingConfig, min_count: u64) -> Result<VectorSet> {
    let vocab = Vocabulary::build(docs.iter().flatten(), min_count)?;
    info!(
        "event=vocabulary words={} tokens={} raw_tokens={} min_count={}",
        vocab.len(),
        vocab.total_tokens(),
        vocab.raw_total(),
        min_count
    );
    let start = Instant::now();
    let model = embeddings::train(docs, &vocab, cfg)?;
    info!("event=embeddings_trained seconds={:.3}", start.elapsed().as_secs_f64());
    let name = match (cfg.model, cfg.loss) {
        (ModelKind::Cbow, LossKind::HierarchicalSoftmax) => "cbow-hs",
        (ModelKind::Cbow, LossKind::NegativeSampling) => "cbow-ns",
        (ModelKind::SkipGram, LossKind::HierarchicalSoftmax) => "skipgram-hs",
        (ModelKind::SkipGram, LossKind::NegativeSampling) => "skipgram-ns",
    };
    Ok(model.to_vector_set(name))
}

/// Resolves classifier settings; the dimension follows the pretrained
/// vectors unless given explicitly, in which case the two must agree.
fn classifier_config(
    a: &ClassifierArgs,
    preprocess: PreprocessConfig,
    seed: u64,
    pretrained: Option<&VectorSet>,
) -> Result<ClassifierConfig> {
    let defaults = ClassifierConfig::default();
    let dim = match (a.dim, pretrained) {
        (Some(d), Some(p)) if d != p.dim() => {
            return Err(Error::Config(format!(
                "--dim {d} disagrees with the {}-dimensional pretrained vectors",
                p.dim()
            )))
        }
        (Some(d), _) => d,
        (None, Some(p)) => p.dim(),
        (None, None) => defaults.dim,
    };
    if a.freeze && pretrained.is_none() {
        warn!("event=freeze_without_pretrained note=word vectors stay at their random initialization");
    }
    let cfg = ClassifierConfig {
        dim,
        lr0: a.lr,
        lr_min: defaults.lr_min,
        epochs: a.epochs,
        subwords: a.subwords.config(),
        freeze_embeddings: a.freeze,
        min_count: a.min_count,
        preprocess,
        seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn tokenize_cmd(a: &TokenizeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.preprocess.config();
    let lines = read_lines(&a.input)?;
    with_output(a.output.as_deref(), out, |w| {
        for line in &lines {
            match parse_labeled_line(line, &cfg) {
                Some(doc) => writeln!(w, "{}", format_labeled_line(&doc))?,
                None => writeln!(w, "{}", tokenize(line, &cfg).join(" "))?,
            }
        }
        Ok(())
    })
}

pub fn vocab_cmd(a: &VocabArgs, out: &mut dyn Write) -> Result<()> {
    let docs = read_corpus(&a.input, &a.preprocess.config())?;
    let vocab = Vocabulary::build(docs.iter().flatten(), a.min_count)?;
    info!(
        "event=vocabulary words={} tokens={} raw_tokens={}",
        vocab.len(),
        vocab.total_tokens(),
        vocab.raw_total()
    );
    with_output(a.output.as_deref(), out, |w| {
        for (word, count) in vocab.words().iter().zip(vocab.counts()) {
            writeln!(w, "{word}\t{count}")?;
        }
        Ok(())
    })
}

pub fn train_embeddings_cmd(a: &TrainEmbeddingsArgs) -> Result<()> {
    let cfg = embedding_config(a.model, a.loss, a.dim, a.window, a.seed, &a.embedding);
    cfg.validate()?;
    if cfg.workers > 1 {
        warn!(
            "event=multi_worker workers={} note=output is not reproducible",
            cfg.workers
        );
    }
    let docs = read_corpus(&a.input, &a.embedding.preprocess.config())?;
    info!("event=corpus_loaded path={} docs={}", a.input.display(), docs.len());
    let set = train_vectors(&docs, &cfg, a.embedding.min_count)?;
    write_vectors(&set, &a.output, a.format.resolve(&a.output))?;
    info!("event=vectors_written path={} words={}", a.output.display(), set.len());
    Ok(())
}

pub fn nn_cmd(a: &NnArgs, out: &mut dyn Write) -> Result<()> {
    let set = load_vectors(&a.vectors, a.format)?;
    let neighbors = VectorIndex::new(&set).nearest(&a.word, a.k)?;
    with_output(None, out, |w| {
        for n in &neighbors {
            writeln!(w, "{}\t{:.6}", n.word, n.similarity)?;
        }
        Ok(())
    })
}

pub fn analogy_cmd(a: &AnalogyArgs, out: &mut dyn Write) -> Result<()> {
    let set = load_vectors(&a.vectors, a.format)?;
    let answers = VectorIndex::new(&set).analogy(&a.a, &a.b, &a.c, a.k)?;
    with_output(None, out, |w| {
        for n in &answers {
            writeln!(w, "{}\t{:.6}", n.word, n.similarity)?;
        }
        Ok(())
    })
}

pub fn train_classifier_cmd(a: &TrainClassifierArgs) -> Result<()> {
    let docs = read_labeled(&a.input, &a.preprocess.config())?;
    let labels = LabelSet::from_docs(&docs)?;
    let pretrained = a
        .classifier
        .pretrained
        .as_deref()
        .map(|p| load_vectors(p, a.classifier.pretrained_format))
        .transpose()?;
    let cfg = classifier_config(&a.classifier, a.preprocess.config(), a.seed, pretrained.as_ref())?;
    info!(
        "event=dataset_loaded docs={} classes={} dim={}",
        docs.len(),
        labels.len(),
        cfg.dim
    );
    let start = Instant::now();
    let model = classifier::train(&docs, &labels, &cfg, pretrained.as_ref())?;
    info!("event=classifier_trained seconds={:.3}", start.elapsed().as_secs_f64());
    model.save(&a.output)?;
    info!("event=model_written path={}", a.output.display());
    Ok(())
}

pub fn predict_cmd(a: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let model = TextClassifier::load(&a.model)?;
    let cfg = *model.preprocess();
    let docs = read_corpus_keep_empty(&a.input, &cfg)?;
    let labels = model.labels();
    with_output(a.output.as_deref(), out, |w| {
        write!(w, "doc,predicted")?;
        for name in labels.names() {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (i, doc) in docs.iter().enumerate() {
            let p = model.predict(doc);
            let best = (0..p.len()).fold(0, |b, c| if p[c] > p[b] { c } else { b });
            write!(w, "{i},{}", labels.name(best))?;
            for x in &p {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

/// Like [`read_corpus`] but keeps one entry per line so that output rows
/// line up with the input.
fn read_corpus_keep_empty(path: &Path, cfg: &PreprocessConfig) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|line| match parse_labeled_line(line, cfg) {
            Some(doc) => doc.tokens,
            None => tokenize(line, cfg),
        })
        .collect())
}

fn run_cross_validation(
    trainers: &[&dyn Trainer],
    docs: &[LabeledDoc],
    labels: &LabelSet,
    plan: &FoldPlan,
    workers: usize,
) -> Result<Vec<CvReport>> {
    let run = || -> Result<Vec<CvReport>> {
        trainers
            .iter()
            .map(|t| {
                let start = Instant::now();
                let report = cross_validate(*t, docs, labels, plan, workers > 1)?;
                info!(
                    "event=model_evaluated model={} mean_auc={:.4} seconds={:.3}",
                    t.name(),
                    report.mean_auc(),
                    start.elapsed().as_secs_f64()
                );
                Ok(report)
            })
            .collect()
    };
    if workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?
            .install(run)
    } else {
        run()
    }
}

pub fn cross_validate_cmd(a: &CrossValidateArgs, out: &mut dyn Write) -> Result<()> {
    if a.workers < 1 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let preprocess = a.preprocess.config();
    let docs = read_labeled(&a.input, &preprocess)?;
    let labels = LabelSet::from_docs(&docs)?;
    let plan = if a.unstratified {
        FoldPlan::unstratified(docs.len(), a.folds, a.seed)?
    } else {
        let names: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
        FoldPlan::stratified(&names, a.folds, a.seed)?
    };
    info!(
        "event=dataset_loaded docs={} classes={} folds={}",
        docs.len(),
        labels.len(),
        a.folds
    );

    let pretrained = match (&a.classifier.pretrained, a.models.contains(&ModelChoice::Embclf)) {
        (Some(p), true) => Some(load_vectors(p, a.classifier.pretrained_format)?),
        _ => None,
    };
    let nb = NaiveBayesTrainer {
        scope: a.tfidf_scope.fit_scope(),
    };
    let logreg = LogRegTrainer {
        scope: a.tfidf_scope.fit_scope(),
        config: LogRegConfig {
            l2_lambda: a.l2,
            ..LogRegConfig::default()
        },
    };
    let emb = if a.models.contains(&ModelChoice::Embclf) {
        Some(EmbeddingTrainer {
            name: "embclf".into(),
            config: classifier_config(&a.classifier, preprocess, a.seed, pretrained.as_ref())?,
            pretrained: pretrained.as_ref(),
        })
    } else {
        None
    };
    let mut trainers: Vec<&dyn Trainer> = Vec::new();
    for m in &a.models {
        let t: &dyn Trainer = match m {
            ModelChoice::Nb => &nb,
            ModelChoice::Logreg => &logreg,
            ModelChoice::Embclf => emb.as_ref().expect("built when requested"),
        };
        if trainers.iter().any(|x| x.name() == t.name()) {
            continue;
        }
        trainers.push(t);
    }

    let reports = run_cross_validation(&trainers, &docs, &labels, &plan, a.workers)?;

    if let Some(p) = &a.predictions {
        write_predictions_csv(&reports, create(p)?)?;
        info!("event=predictions_written path={}", p.display());
    }
    if let Some(p) = &a.summary {
        CvReport::write_summary_csv(&reports, create(p)?)?;
        info!("event=summary_written path={}", p.display());
    }
    match a.report {
        ReportFormat::Table => {
            let table = render_report(&reports);
            with_output(None, out, |w| w.write_all(table.as_bytes()))
        }
        ReportFormat::Csv => {
            let mut buf = Vec::new();
            CvReport::write_long_csv(&reports, &mut buf)?;
            with_output(None, out, |w| w.write_all(&buf))
        }
    }
}

pub fn compare_cmd(a: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let rows = read_predictions_csv(open(&a.predictions)?)?;
    let reference = match &a.reference {
        Some(r) => r.clone(),
        None => rows
            .first()
            .map(|r| r.model.clone())
            .ok_or_else(|| Error::Format(format!("{}: no predictions", a.predictions.display())))?,
    };
    let ranks = run_matrix_from_predictions(&rows, &a.class, a.fold, &reference)?.ranks();
    info!(
        "event=comparison class={} fold={} models={} docs={} reference={}",
        a.class,
        a.fold,
        ranks.models.len(),
        ranks.docs.len(),
        reference
    );
    if let Some(p) = &a.csv {
        write_string(p, &parallel_coords_csv(&ranks)?)?;
        info!("event=ranks_written path={}", p.display());
    }
    if let Some(p) = &a.svg {
        write_string(p, &parallel_coords_svg(&ranks)?)?;
        info!("event=plot_written path={}", p.display());
    }
    let report = disagreement_report(&ranks, a.threshold);
    with_output(None, out, |w| {
        writeln!(w, "doc_id,rank_gap")?;
        for (doc, gap) in &report {
            writeln!(w, "{doc},{gap}")?;
        }
        Ok(())
    })
}

fn write_string(path: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn convert_cmd(a: &ConvertArgs) -> Result<()> {
    let set = load_vectors(&a.input, a.from)?;
    write_vectors(&set, &a.output, a.to.resolve(&a.output))?;
    info!("event=vectors_written path={} words={}", a.output.display(), set.len());
    Ok(())
}

fn arch_name(m: Architecture) -> &'static str {
    match m {
        Architecture::Cbow => "cbow",
        Architecture::Skipgram => "skipgram",
    }
}

fn loss_name(l: Loss) -> &'static str {
    match l {
        Loss::Hs => "hs",
        Loss::Ns => "ns",
    }
}

pub fn gridsearch_cmd(a: &GridsearchArgs, out: &mut dyn Write) -> Result<()> {
    let preprocess = a.embedding.preprocess.config();
    let docs = read_labeled(&a.input, &preprocess)?;
    let corpus = read_corpus(&a.corpus, &preprocess)?;
    let labels = LabelSet::from_docs(&docs)?;
    let names: Vec<&str> = docs.iter().map(|d| d.label.as_str()).collect();
    let plan = FoldPlan::stratified(&names, a.folds, a.seed)?;
    info!(
        "event=grid_start settings={} docs={} corpus_docs={}",
        a.models.len() * a.losses.len() * a.dims.len() * a.windows.len(),
        docs.len(),
        corpus.len()
    );

    let mut file = a.output.as_deref().map(create).transpose()?;
    let sink: &mut dyn Write = match file.as_mut() {
        Some(f) => f,
        None => out,
    };
    let sink_path = a.output.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let emit = |w: &mut dyn Write, line: &str| -> Result<()> {
        writeln!(w, "{line}")
            .and_then(|_| w.flush())
            .map_err(|e| io_error(&sink_path, e))
    };
    emit(sink, "model,loss,dim,window,class,mean_auc,min_auc,max_auc")?;

    for &model in &a.models {
        for &loss in &a.losses {
            for &dim in &a.dims {
                for &window in &a.windows {
                    let setting = format!(
                        "model={} loss={} dim={dim} window={window}",
                        arch_name(model),
                        loss_name(loss)
                    );
                    let start = Instant::now();
                    let result = (|| -> Result<CvReport> {
                        let cfg = embedding_config(model, loss, dim, window, a.seed, &a.embedding);
                        cfg.validate()?;
                        let vectors = train_vectors(&corpus, &cfg, a.embedding.min_count)?;
                        let trainer = EmbeddingTrainer {
                            name: "embclf".into(),
                            config: ClassifierConfig {
                                dim,
                                lr0: a.clf_lr,
                                epochs: a.clf_epochs,
                                freeze_embeddings: a.freeze,
                                preprocess,
                                seed: a.seed,
                                ..ClassifierConfig::default()
                            },
                            pretrained: Some(&vectors),
                        };
                        cross_validate(&trainer, &docs, &labels, &plan, false)
                    })();
                    let report = result.inspect_err(|e| error!("event=setting_failed {setting} error=\"{e}\""))?;
                    for (c, class) in report.classes.iter().enumerate() {
                        let s = report.summary(c);
                        emit(
                            sink,
                            &format!(
                                "{},{},{dim},{window},{class},{},{},{}",
                                arch_name(model),
                                loss_name(loss),
                                s.mean,
                                s.min,
                                s.max
                            ),
                        )?;
                    }
                    info!(
                        "event=setting_done {setting} mean_auc={:.4} seconds={:.3}",
                        report.mean_auc(),
                        start.elapsed().as_secs_f64()
                    );
                }
            }
        }
    }
    Ok(())
}

pub fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let cfg = KeywordCorpusConfig {
        classes: a.classes,
        docs_per_class: a.docs_per_class,
        keyword_rate: a.keyword_rate,
        unlabeled: if a.unlabeled.is_some() { a.unlabeled_docs } else { 0 },
        ..KeywordCorpusConfig::default()
    };
    if cfg.classes < 2 {
        return Err(Error::Config("at least two classes are required".into()));
    }
    if !(0.0..=1.0).contains(&cfg.keyword_rate) {
        return Err(Error::Config("--keyword-rate must lie in [0, 1]".into()));
    }
    let corpus = keyword_corpus(&cfg, a.seed);
    let mut w = create(&a.labeled)?;
    for doc in &corpus.labeled {
        writeln!(w, "{}", format_labeled_line(doc)).map_err(|e| io_error(&a.labeled, e))?;
    }
    w.flush().map_err(|e| io_error(&a.labeled, e))?;
    info!(
        "event=labeled_written path={} docs={}",
        a.labeled.display(),
        corpus.labeled.len()
    );
    if let Some(p) = &a.unlabeled {
        let mut w = create(p)?;
        for doc in &corpus.unlabeled {
            writeln!(w, "{}", doc.join(" ")).map_err(|e| io_error(p, e))?;
        }
        w.flush().map_err(|e| io_error(p, e))?;
        info!(
            "event=unlabeled_written path={} docs={}",
            p.display(),
            corpus.unlabeled.len()
        );
    }
    Ok(())
}
