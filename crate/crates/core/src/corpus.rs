//! Text preprocessing, vocabulary construction and frequent-word subsampling.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

/// Prefix that marks the label of a line in labeled input files.
pub const LABEL_PREFIX: &str = "__label__";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DigitPolicy {
    #[default]
    Keep,
    Strip,
}

/// Tokenizer settings. Punctuation is always stripped: every codepoint that
/// is neither alphanumeric nor whitespace becomes a token boundary.
///
/// Stop words are never removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub lowercase: bool,
    pub digits: DigitPolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            lowercase: true,
            digits: DigitPolicy::Keep,
        }
    }
}

/// Splits `text` into tokens.
///
/// "can't" becomes `["can", "t"]`: the apostrophe is punctuation and turns
/// into a boundary like any other non-alphanumeric character.
pub fn tokenize(text: &str, cfg: &PreprocessConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();

    let push_char = |c: char, current: &mut String, tokens: &mut Vec<String>| {
        let keep = c.is_alphanumeric() && !(cfg.digits == DigitPolicy::Strip && c.is_numeric());
        if keep {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(current));
        }
    };

    for c in text.chars() {
        if cfg.lowercase {
            for lc in c.to_lowercase() {
                push_char(lc, &mut current, &mut tokens);
            }
        } else {
            push_char(c, &mut current, &mut tokens);
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }

    tokens
}

/// One labeled document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDoc {
    pub label: String,
    pub tokens: Vec<String>,
}

/// Parses a line of the form `__label__<NAME> <text>`.
pub fn parse_labeled_line(line: &str, cfg: &PreprocessConfig) -> Option<LabeledDoc> {
    let rest = line.strip_prefix(LABEL_PREFIX)?;
    let (label, text) = match rest.split_once(' ') {
        Some((label, text)) => (label, text),
        None => (rest.trim_end(), ""),
    };
    if label.is_empty() {
        return None;
    }
    Some(LabeledDoc {
        label: label.to_owned(),
        tokens: tokenize(text, cfg),
    })
}

/// Formats a document as a labeled line. Tokens are joined by single spaces.
pub fn format_labeled_line(doc: &LabeledDoc) -> String {
    let mut line = format!("{}{}", LABEL_PREFIX, doc.label);
    for t in &doc.tokens {
        line.push(' ');
        line.push_str(t);
    }
    line
}

/// Token to id map with occurrence counts.
///
/// Ids are contiguous in `[0, len)` and assigned by descending count, ties
/// broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    words: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
    raw_total: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Counts `tokens` and keeps those occurring at least `min_count` times.
    pub fn build<I, S>(tokens: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for t in tokens {
            let t = t.as_ref();
            match counts.get_mut(t) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(t.to_owned(), 1);
                }
            }
        }
        Self::from_count_map(counts, min_count)
    }

    /// Builds a vocabulary from explicit `(token, count)` pairs.
    pub fn from_counts<I, S>(pairs: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        if min_count < 1 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (t, c) in pairs {
            *counts.entry(t.into()).or_default() += c;
        }
        Self::from_count_map(counts, min_count)
    }

    fn from_count_map(counts: HashMap<String, u64>, min_count: u64) -> Result<Self> {
        let raw_total = counts.values().sum();
        let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count && c > 0).collect();
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

        let mut index = HashMap::with_capacity(entries.len());
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (id, (w, c)) in entries.into_iter().enumerate() {
            index.insert(w.clone(), id);
            words.push(w);
            counts.push(c);
        }
        let total_tokens = counts.iter().sum();

        Ok(Vocabulary {
            index,
            words,
            counts,
            total_tokens,
            raw_total,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of counts of the retained tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Sum of counts before `min_count` pruning.
    pub fn raw_total(&self) -> u64 {
        self.raw_total
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Maps tokens to ids, dropping those not in the vocabulary.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens
            .iter()
            .filter_map(|t| self.id(t.as_ref()).map(|id| id as u32))
            .collect()
    }
}

/// Frequent-word subsampling threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsampleConfig {
    pub t: f64,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        SubsampleConfig { t: 1e-3 }
    }
}

/// Probability of keeping an occurrence of a word seen `count` times among
/// `total` tokens: with `f = count / total`, `min(1, sqrt(t/f) + t/f)`.
pub fn keep_probability(count: u64, total: u64, cfg: &SubsampleConfig) -> f64 {
    debug_assert!(count >= 1 && total >= count);
    if cfg.t <= 0.0 {
        return 0.0;
    }
    let f = count as f64 / total as f64;
    let r = cfg.t / f;
    (r.sqrt() + r).min(1.0)
}

/// Per-word keep probabilities for one vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Subsampler {
    keep: Vec<f64>,
}

impl Subsampler {
    pub fn new(vocab: &Vocabulary, cfg: &SubsampleConfig) -> Self {
        let keep = vocab
            .counts()
            .iter()
            .map(|&c| keep_probability(c, vocab.total_tokens(), cfg))
            .collect();
        Subsampler { keep }
    }

    pub fn keep_probability(&self, word: usize) -> f64 {
        self.keep[word]
    }

    /// Decides whether one occurrence of `word` survives.
    #[inline]
    pub fn keep<R: Rng + ?Sized>(&self, word: usize, rng: &mut R) -> bool {
        let p = self.keep[word];
        p >= 1.0 || rng.random::<f64>() < p
    }
}
