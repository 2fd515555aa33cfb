use std::cmp::Ordering;

use super::EmbeddingModel;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::vecio::VectorSet;

/// Source of word vectors for similarity queries.
pub trait WordVectors {
    /// Candidate words, in id order.
    fn words(&self) -> &[String];

    /// One row per candidate word.
    fn word_matrix(&self) -> Matrix;

    /// Vector for an arbitrary word, possibly imputed from subwords.
    fn vector(&self, word: &str) -> Option<Vec<f32>>;
}

impl WordVectors for EmbeddingModel {
    fn words(&self) -> &[String] {
        self.vocab.words()
    }

    fn word_matrix(&self) -> Matrix {
        EmbeddingModel::word_matrix(self)
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        self.word_vector(word)
    }
}

impl WordVectors for VectorSet {
    fn words(&self) -> &[String] {
        self.tokens()
    }

    fn word_matrix(&self) -> Matrix {
        self.matrix().clone()
    }

    fn vector(&self, word: &str) -> Option<Vec<f32>> {
        self.lookup(word)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f32,
}

/// Unit-normalized word vectors for repeated cosine queries.
pub struct VectorIndex<'a, W: ?Sized> {
    source: &'a W,
    unit: Matrix,
}

impl<'a, W: WordVectors + ?Sized> VectorIndex<'a, W> {
    pub fn new(source: &'a W) -> Self {
        let mut unit = source.word_matrix();
        for r in 0..unit.rows() {
            let row = unit.row_mut(r);
            let n = norm(row);
            if n > 0.0 {
                row.iter_mut().for_each(|x| *x /= n);
            }
        }
        VectorIndex { source, unit }
    }

    fn resolve(&self, word: &str) -> Result<Vec<f32>> {
        self.source
            .vector(word)
            .ok_or_else(|| Error::UnknownWord(word.to_owned()))
    }

    /// The `k` words most cosine-similar to `query`, skipping `exclude`.
    /// Ties are broken by word id.
    pub fn nearest_to(&self, query: &[f32], k: usize, exclude: &[&str]) -> Vec<Neighbor> {
        let qn = norm(query);
        let words = self.source.words();
        let mut scored: Vec<(usize, f32)> = (0..self.unit.rows())
            .filter(|&id| !exclude.contains(&words[id].as_str()))
            .map(|id| {
                let s = if qn > 0.0 {
                    dot(self.unit.row(id), query) / qn
                } else {
                    0.0
                };
                (id, s)
            })
            .collect();
        scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        scored
            .into_iter()
            .take(k)
            .map(|(id, similarity)| Neighbor {
                word: words[id].clone(),
                similarity,
            })
            .collect()
    }

    pub fn nearest(&self, word: &str, k: usize) -> Result<Vec<Neighbor>> {
        let v = self.resolve(word)?;
        Ok(self.nearest_to(&v, k, &[word]))
    }

    /// Words closest to `b - a + c`, excluding the three query words.
    pub fn analogy(&self, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<Neighbor>> {
        let va = self.resolve(a)?;
        let vb = self.resolve(b)?;
        let vc = self.resolve(c)?;
        let q: Vec<f32> = va.iter().zip(&vb).zip(&vc).map(|((a, b), c)| b - a + c).collect();
        Ok(self.nearest_to(&q, k, &[a, b, c]))
    }
}

/// The `k` nearest neighbors of `word` by cosine similarity.
pub fn nearest<W: WordVectors + ?Sized>(source: &W, word: &str, k: usize) -> Result<Vec<Neighbor>> {
    VectorIndex::new(source).nearest(word, k)
}

/// Answers "a is to b as c is to ?".
pub fn analogy<W: WordVectors + ?Sized>(source: &W, a: &str, b: &str, c: &str, k: usize) -> Result<Vec<Neighbor>> {
    VectorIndex::new(source).analogy(a, b, c, k)
}
