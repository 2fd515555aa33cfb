//! Character n-grams, bucket hashing and subword composition of word vectors.

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const BOW: char = '<';
pub const EOW: char = '>';

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NGramConfig {
    pub minn: usize,
    pub maxn: usize,
    pub buckets: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            minn: 3,
            maxn: 6,
            buckets: 2_000_000,
        }
    }
}

impl NGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.minn < 1 || self.minn > self.maxn {
            return Err(Error::Config(format!(
                "n-gram lengths must satisfy 1 <= minn <= maxn, got {}..{}",
                self.minn, self.maxn
            )));
        }
        if self.buckets < 1 {
            return Err(Error::Config("bucket count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Character n-grams of `word` wrapped in `<` and `>`.
///
/// N-grams are emitted by start position, shorter first at each position.
/// The wrapped word itself is never emitted.
pub fn extract_ngrams(word: &str, cfg: &NGramConfig) -> Vec<String> {
    let mut chars: Vec<char> = Vec::with_capacity(word.len() + 2);
    chars.push(BOW);
    chars.extend(word.chars());
    chars.push(EOW);

    let mut ngrams = Vec::new();
    for start in 0..chars.len() {
        for n in cfg.minn..=cfg.maxn {
            let end = start + n;
            if end > chars.len() {
                break;
            }
            if start == 0 && end == chars.len() {
                continue;
            }
            ngrams.push(chars[start..end].iter().collect());
        }
    }
    ngrams
}

/// 32-bit FNV-1a over the UTF-8 bytes, with each byte sign-extended before
/// the xor as in the fastText implementation. Identical to textbook FNV-1a
/// for ASCII input.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 2_166_136_261;
    for &b in s.as_bytes() {
        h ^= (b as i8) as u32;
        h = h.wrapping_mul(16_777_619);
    }
    h
}

/// Bucket id of an n-gram, in `[0, cfg.buckets)`.
pub fn bucket(ngram: &str, cfg: &NGramConfig) -> usize {
    (fnv1a(ngram) as u64 % cfg.buckets as u64) as usize
}

/// Bucket ids of the n-grams of `word`.
pub fn ngram_buckets(word: &str, cfg: &NGramConfig) -> Vec<usize> {
    extract_ngrams(word, cfg).iter().map(|g| bucket(g, cfg)).collect()
}

/// Rows of a `(V + B) x dim` table that represent `word`: its own row when
/// it is in `vocab`, followed by `V + bucket` for each of its n-grams.
pub fn word_rows(word: &str, vocab: &Vocabulary, cfg: &NGramConfig) -> Vec<usize> {
    let v = vocab.len();
    let mut rows = Vec::new();
    if let Some(id) = vocab.id(word) {
        rows.push(id);
    }
    rows.extend(ngram_buckets(word, cfg).into_iter().map(|b| v + b));
    rows
}

/// Mean of `rows` of `table`; the zero vector when `rows` is empty.
pub fn mean_of_rows(table: &Matrix, rows: &[usize]) -> Vec<f32> {
    let mut out = vec![0.0f32; table.cols()];
    if rows.is_empty() {
        return out;
    }
    for &r in rows {
        for (o, x) in out.iter_mut().zip(table.row(r)) {
            *o += x;
        }
    }
    let scale = 1.0 / rows.len() as f32;
    out.iter_mut().for_each(|o| *o *= scale);
    out
}

/// Vector of `word` composed from a `(V + B) x dim` table.
///
/// In-vocabulary words average their own row with their n-gram bucket rows;
/// out-of-vocabulary words average their bucket rows only. A word with no
/// n-grams and no row gets the zero vector.
pub fn compose_vector(table: &Matrix, vocab: &Vocabulary, word: &str, cfg: &NGramConfig) -> Vec<f32> {
    debug_assert_eq!(table.rows(), vocab.len() + cfg.buckets);
    mean_of_rows(table, &word_rows(word, vocab, cfg))
}
