use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Huffman codes over word ids, used by hierarchical softmax.
///
/// For word `w`, `code(w)[j]` is the branch taken at internal node
/// `path(w)[j]`, read from the root down. Internal nodes are numbered
/// `0..V-1` in creation order, so the root is `V - 2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanCoding {
    codes: Vec<Vec<u8>>,
    paths: Vec<Vec<u32>>,
}

impl HuffmanCoding {
    /// Builds the coding for words with the given counts.
    ///
    /// Merges always take the two lightest nodes; among equal weights the
    /// node created first wins. The first node of a merge becomes the left
    /// child (bit 0).
    pub fn build(counts: &[u64]) -> Result<Self> {
        let v = counts.len();
        if v < 2 {
            return Err(Error::VocabularyTooSmall { needed: 2, got: v });
        }

        // Node ids: leaves 0..v, internal nodes v..2v-1 in creation order.
        let mut parent = vec![0usize; 2 * v - 1];
        let mut bit = vec![0u8; 2 * v - 1];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
            counts.iter().enumerate().map(|(id, &c)| Reverse((c, id))).collect();

        for node in v..2 * v - 1 {
            let Reverse((w0, left)) = heap.pop().expect("heap holds at least two nodes");
            let Reverse((w1, right)) = heap.pop().expect("heap holds at least two nodes");
            parent[left] = node;
            parent[right] = node;
            bit[right] = 1;
            heap.push(Reverse((w0 + w1, node)));
        }

        let root = 2 * v - 2;
        let mut codes = Vec::with_capacity(v);
        let mut paths = Vec::with_capacity(v);
        for leaf in 0..v {
            let mut code = Vec::new();
            let mut path = Vec::new();
            let mut node = leaf;
            while node != root {
                code.push(bit[node]);
                node = parent[node];
                path.push((node - v) as u32);
            }
            code.reverse();
            path.reverse();
            codes.push(code);
            paths.push(path);
        }

        Ok(HuffmanCoding { codes, paths })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, word: usize) -> &[u8] {
        &self.codes[word]
    }

    pub fn path(&self, word: usize) -> &[u32] {
        &self.paths[word]
    }

    /// Number of internal nodes, i.e. rows of the hierarchical softmax
    /// output matrix.
    pub fn internal_nodes(&self) -> usize {
        self.codes.len() - 1
    }

    /// `sum(count(w) * len(code(w)))`
    pub fn weighted_length(&self, counts: &[u64]) -> u64 {
        self.codes.iter().zip(counts).map(|(c, &n)| c.len() as u64 * n).sum()
    }
}
