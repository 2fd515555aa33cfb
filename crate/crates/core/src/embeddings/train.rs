use std::sync::atomic::{AtomicU64, Ordering};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sgd::{binary_logistic, LinearSchedule};
use super::{EmbeddingConfig, EmbeddingModel, HuffmanCoding, LossKind, ModelKind, UnigramTable};
use crate::corpus::{Subsampler, Vocabulary};
use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};
use crate::subword::word_rows;

const NEGATIVE_POWER: f64 = 0.75;

/// Trains word embeddings on `docs`, each a token sequence. Context windows
/// never cross document boundaries; tokens missing from `vocab` are dropped.
///
/// With a single worker the result is fully determined by the inputs and
/// `cfg.seed`.
pub fn train(docs: &[Vec<String>], vocab: &Vocabulary, cfg: &EmbeddingConfig) -> Result<EmbeddingModel> {
    cfg.validate()?;
    if vocab.len() < 2 {
        return Err(Error::VocabularyTooSmall {
            needed: 2,
            got: vocab.len(),
        });
    }
    let encoded: Vec<Vec<u32>> = docs.iter().map(|d| vocab.encode(d)).filter(|d| !d.is_empty()).collect();
    let corpus_tokens: u64 = encoded.iter().map(|d| d.len() as u64).sum();
    if corpus_tokens == 0 {
        return Err(Error::EmptyTrainingSet);
    }

    let v = vocab.len();
    let dim = cfg.dim;
    let buckets = cfg.subwords.map_or(0, |ng| ng.buckets);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f32;
    let mut input = Matrix::uniform(v + buckets, dim, -bound..bound, &mut rng);

    let (mut output, target) = match cfg.loss {
        LossKind::HierarchicalSoftmax => {
            let huffman = HuffmanCoding::build(vocab.counts())?;
            (
                Matrix::zeros(huffman.internal_nodes(), dim),
                Target::Hierarchical(huffman),
            )
        }
        LossKind::NegativeSampling => {
            let table = UnigramTable::new(vocab.counts(), NEGATIVE_POWER, cfg.table_size)?;
            (Matrix::zeros(v, dim), Target::Negative(table))
        }
    };

    let rows: Vec<Vec<usize>> = match &cfg.subwords {
        Some(ng) => vocab.words().iter().map(|w| word_rows(w, vocab, ng)).collect(),
        None => (0..v).map(|id| vec![id]).collect(),
    };
    let keep = Subsampler::new(vocab, &cfg.subsample);

    let shared = Shared {
        cfg,
        target: &target,
        rows: &rows,
        keep: &keep,
        schedule: LinearSchedule {
            lr0: cfg.lr0,
            lr_min: cfg.lr_min,
            total: corpus_tokens * cfg.epochs as u64,
        },
        processed: AtomicU64::new(0),
        weights: RawWeights::new(&mut input, &mut output),
    };

    if cfg.workers == 1 {
        let mut worker = Worker::new(&shared, cfg.seed, true);
        worker.run(&encoded)?;
    } else {
        let shard = encoded.len().div_ceil(cfg.workers);
        let results: Vec<Result<()>> = std::thread::scope(|s| {
            let handles: Vec<_> = encoded
                .chunks(shard.max(1))
                .enumerate()
                .map(|(i, docs)| {
                    let shared = &shared;
                    s.spawn(move || {
                        let seed = cfg.seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        Worker::new(shared, seed, i == 0).run(docs)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        results.into_iter().collect::<Result<()>>()?;
    }

    if !input.is_finite() || !output.is_finite() {
        return Err(Error::NonFinite("embedding weights diverged".into()));
    }

    Ok(EmbeddingModel {
        vocab: vocab.clone(),
        input,
        output,
        config: cfg.clone(),
    })
}

enum Target {
    Hierarchical(HuffmanCoding),
    Negative(UnigramTable),
}

/// Base pointers of the input and output matrices.
///
/// Workers derive row slices from these pointers. A single worker never
/// holds two overlapping rows at once, so the single-worker path has plain
/// exclusive access. With several workers rows are shared without
/// synchronization: concurrent updates may be lost, which the lock-free SGD
/// regime tolerates.
struct RawWeights {
    input: *mut f32,
    output: *mut f32,
    input_rows: usize,
    output_rows: usize,
    dim: usize,
}

unsafe impl Send for RawWeights {}
unsafe impl Sync for RawWeights {}

impl RawWeights {
    fn new(input: &mut Matrix, output: &mut Matrix) -> Self {
        RawWeights {
            input_rows: input.rows(),
            output_rows: output.rows(),
            dim: input.cols(),
            input: input.as_mut_slice().as_mut_ptr(),
            output: output.as_mut_slice().as_mut_ptr(),
        }
    }

    /// # Safety
    /// The caller must not hold another reference to the same row.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    unsafe fn input_row(&self, row: usize) -> &mut [f32] {
        assert!(row < self.input_rows);
        std::slice::from_raw_parts_mut(self.input.add(row * self.dim), self.dim)
    }

    /// # Safety
    /// The caller must not hold another reference to the same row.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    unsafe fn output_row(&self, row: usize) -> &mut [f32] {
        assert!(row < self.output_rows);
        std::slice::from_raw_parts_mut(self.output.add(row * self.dim), self.dim)
    }
}

struct Shared<'a> {
    cfg: &'a EmbeddingConfig,
    target: &'a Target,
    rows: &'a [Vec<usize>],
    keep: &'a Subsampler,
    schedule: LinearSchedule,
    processed: AtomicU64,
    weights: RawWeights,
}

struct Worker<'a, 's> {
    shared: &'s Shared<'a>,
    rng: ChaCha8Rng,
    hidden: Vec<f32>,
    grad: Vec<f32>,
    sentence: Vec<(u32, u64)>,
    log: bool,
    loss: f64,
    predictions: u64,
}

impl<'a, 's> Worker<'a, 's> {
    fn new(shared: &'s Shared<'a>, seed: u64, log: bool) -> Self {
        let dim = shared.cfg.dim;
        Worker {
            shared,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5EED),
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
            sentence: Vec::new(),
            log,
            loss: 0.0,
            predictions: 0,
        }
    }

    fn run(&mut self, docs: &[Vec<u32>]) -> Result<()> {
        for epoch in 0..self.shared.cfg.epochs {
            self.loss = 0.0;
            self.predictions = 0;
            for doc in docs {
                self.doc(doc);
            }
            let loss = self.loss / self.predictions.max(1) as f64;
            let processed = self.shared.processed.load(Ordering::Relaxed);
            if self.log {
                info!(
                    "epoch={} tokens={} lr={:.6} loss={:.6}",
                    epoch + 1,
                    processed,
                    self.shared.schedule.at(processed),
                    loss
                );
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss is {loss} after epoch {}", epoch + 1)));
            }
        }
        Ok(())
    }

    fn doc(&mut self, doc: &[u32]) {
        let base = self.shared.processed.fetch_add(doc.len() as u64, Ordering::Relaxed);

        self.sentence.clear();
        for (i, &w) in doc.iter().enumerate() {
            if self.shared.keep.keep(w as usize, &mut self.rng) {
                self.sentence.push((w, base + i as u64));
            }
        }

        let window = self.shared.cfg.window;
        for pos in 0..self.sentence.len() {
            let (center, at) = self.sentence[pos];
            let lr = self.shared.schedule.at(at);
            let b = self.rng.random_range(1..=window);
            let lo = pos.saturating_sub(b);
            let hi = (pos + b).min(self.sentence.len() - 1);
            match self.shared.cfg.model {
                ModelKind::Cbow => self.cbow(center, pos, lo, hi, lr),
                ModelKind::SkipGram => {
                    for c in lo..=hi {
                        if c != pos {
                            let context = self.sentence[c].0;
                            self.skipgram(center, context, lr);
                        }
                    }
                }
            }
        }
    }

    fn cbow(&mut self, center: u32, pos: usize, lo: usize, hi: usize, lr: f32) {
        let w = &self.shared.weights;
        let mut contexts = 0;
        self.hidden.iter_mut().for_each(|h| *h = 0.0);
        for c in (lo..=hi).filter(|&c| c != pos) {
            let word = self.sentence[c].0 as usize;
            let rows = &self.shared.rows[word];
            let scale = 1.0 / rows.len() as f32;
            for &r in rows {
                // SAFETY: read-only access to one row at a time.
                axpy(scale, unsafe { w.input_row(r) }, &mut self.hidden);
            }
            contexts += 1;
        }
        if contexts == 0 {
            return;
        }
        let scale = 1.0 / contexts as f32;
        self.hidden.iter_mut().for_each(|h| *h *= scale);

        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.predict(center, lr);

        for c in (lo..=hi).filter(|&c| c != pos) {
            let word = self.sentence[c].0 as usize;
            for &r in &self.shared.rows[word] {
                // SAFETY: `grad` is a separate buffer.
                axpy(1.0, &self.grad, unsafe { w.input_row(r) });
            }
        }
    }

    /// Predicts `center` from `context`, which is the reference
    /// implementation's orientation of the skip-gram update.
    fn skipgram(&mut self, center: u32, context: u32, lr: f32) {
        let w = &self.shared.weights;
        let rows = &self.shared.rows[context as usize];
        if rows.len() == 1 {
            // SAFETY: one row, copied out.
            self.hidden.copy_from_slice(unsafe { w.input_row(rows[0]) });
        } else {
            self.hidden.iter_mut().for_each(|h| *h = 0.0);
            let scale = 1.0 / rows.len() as f32;
            for &r in rows {
                // SAFETY: read-only access to one row at a time.
                axpy(scale, unsafe { w.input_row(r) }, &mut self.hidden);
            }
        }

        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.predict(center, lr);

        for &r in rows {
            // SAFETY: `grad` is a separate buffer.
            axpy(1.0, &self.grad, unsafe { w.input_row(r) });
        }
    }

    /// Runs the output layer for `target` given `self.hidden`, updating
    /// output rows and accumulating the hidden gradient in `self.grad`.
    fn predict(&mut self, target: u32, lr: f32) {
        let w = &self.shared.weights;
        let mut loss = 0.0f32;
        match self.shared.target {
            Target::Hierarchical(huffman) => {
                let t = target as usize;
                for (&node, &bit) in huffman.path(t).iter().zip(huffman.code(t)) {
                    // SAFETY: path nodes are distinct; one row at a time.
                    let out = unsafe { w.output_row(node as usize) };
                    loss += binary_logistic(&self.hidden, &mut self.grad, out, bit == 0, lr);
                }
            }
            Target::Negative(table) => {
                // SAFETY: one output row at a time.
                let out = unsafe { w.output_row(target as usize) };
                loss += binary_logistic(&self.hidden, &mut self.grad, out, true, lr);
                for _ in 0..self.shared.cfg.negatives {
                    let negative = loop {
                        let n = table.sample(&mut self.rng);
                        if n != target {
                            break n;
                        }
                    };
                    let out = unsafe { w.output_row(negative as usize) };
                    loss += binary_logistic(&self.hidden, &mut self.grad, out, false, lr);
                }
            }
        }
        self.loss += f64::from(loss);
        self.predictions += 1;
    }
}
