//! Shared fixtures for the benchmarks.

use embclf::synth::{keyword_corpus, KeywordCorpus, KeywordCorpusConfig};

/// Keyword corpus with `unlabeled` unlabeled documents and the default
/// labeled set of 600 documents in three classes.
pub fn corpus(unlabeled: usize, seed: u64) -> KeywordCorpus {
    keyword_corpus(
        &KeywordCorpusConfig {
            unlabeled,
            ..KeywordCorpusConfig::default()
        },
        seed,
    )
}

/// Deterministic pseudo-random values in `[-1, 1)`.
pub fn values(n: usize, seed: u64) -> Vec<f32> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 40) as f32 / (1u64 << 23) as f32 - 1.0
        })
        .collect()
}
