use std::collections::HashMap;

use super::preprocess::{HASHTAG, MENTION, URL};
use crate::embed::EmbeddingTable;
use crate::error::Result;
use crate::tensor::Tensor;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
/// Ids `2..5` are the URL, hashtag and mention placeholders, in that order.
pub const PLACEHOLDER_IDS: std::ops::Range<usize> = 2..5;
pub const MAX_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    /// The five special tokens only.
    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        for t in [PAD, UNK, URL, HASHTAG, MENTION] {
            v.add(t);
        }
        v
    }

    /// Returns the index of `token`, adding it if new.
    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Token ids with `<unk>` for unknown tokens, truncated to [`MAX_LEN`].
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().take(MAX_LEN).map(|t| self.get(t).unwrap_or(UNK_ID)).collect()
    }

    /// Fraction of tokens that map to `<unk>`.
    pub fn oov_rate<'a>(&self, seqs: impl IntoIterator<Item = &'a [String]>) -> f64 {
        let (mut oov, mut total) = (0usize, 0usize);
        for s in seqs {
            for t in s {
                total += 1;
                if self.get(t).is_none() {
                    oov += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            oov as f64 / total as f64
        }
    }
}

/// The frozen word-vector matrix aligned with a vocabulary.
///
/// `<pad>` is the zero vector; `<unk>` and the initial placeholder vectors
/// are the mean of the loaded vectors. Placeholder rows here are only an
/// initialization: the trainable copies live in the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddings {
    pub vocab: Vocab,
    pub matrix: Tensor,
}

impl WordEmbeddings {
    pub fn from_table(table: &EmbeddingTable) -> Result<Self> {
        let dim = table.dim();
        let mean = table.centroid()?;
        let mut vocab = Vocab::new();
        let mut data = vec![0.0; vocab.len() * dim];
        for i in 1..vocab.len() {
            data[i * dim..(i + 1) * dim].copy_from_slice(&mean);
        }
        for (i, id) in table.ids().iter().enumerate() {
            let before = vocab.len();
            let idx = vocab.add(id);
            if idx == before {
                data.extend_from_slice(table.row(i));
            } else {
                // A pretrained vector for a special token overrides the default.
                data[idx * dim..(idx + 1) * dim].copy_from_slice(table.row(i));
            }
        }
        let matrix = Tensor::matrix(vocab.len(), dim, data)?;
        Ok(WordEmbeddings { vocab, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn placeholder_init(&self) -> Tensor {
        let dim = self.dim();
        let data = self.matrix.data()[PLACEHOLDER_IDS.start * dim..PLACEHOLDER_IDS.end * dim].to_vec();
        Tensor::matrix(PLACEHOLDER_IDS.len(), dim, data).expect("placeholder block")
    }
}
