use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_TABLE_SIZE: usize = 10_000_000;

/// Lookup table for drawing negative samples with probability proportional
/// to `count^power`.
///
/// Each word owns a contiguous run of slots. Run lengths are obtained by
/// rounding the cumulative distribution to table positions, with every word
/// receiving at least one slot.
#[derive(Clone, Debug)]
pub struct UnigramTable {
    table: Vec<u32>,
    targets: Vec<f64>,
}

impl UnigramTable {
    pub fn new(counts: &[u64], power: f64, table_size: usize) -> Result<Self> {
        let v = counts.len();
        if v < 2 {
            return Err(Error::VocabularyTooSmall { needed: 2, got: v });
        }
        if table_size < v {
            return Err(Error::Config(format!(
                "unigram table size {table_size} is smaller than the vocabulary ({v})"
            )));
        }

        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let targets: Vec<f64> = weights.iter().map(|w| w / total).collect();

        let mut table = Vec::with_capacity(table_size + v);
        let mut cumulative = 0.0;
        for (id, p) in targets.iter().enumerate() {
            cumulative += p;
            let end = ((cumulative * table_size as f64).round() as usize).max(table.len() + 1);
            table.resize(end, id as u32);
        }

        Ok(UnigramTable { table, targets })
    }

    /// Draws a word id.
    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        self.table[rng.random_range(0..self.table.len())]
    }

    /// The normalized `count^power` probability of `word`.
    pub fn target_probability(&self, word: usize) -> f64 {
        self.targets[word]
    }

    /// Probability with which `sample` returns `word`.
    pub fn probability(&self, word: usize) -> f64 {
        let w = word as u32;
        let start = self.table.partition_point(|&x| x < w);
        let end = self.table.partition_point(|&x| x <= w);
        (end - start) as f64 / self.table.len() as f64
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }
}
