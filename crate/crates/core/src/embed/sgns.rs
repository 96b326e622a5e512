//! Skip-gram with negative sampling, shared by the node-embedding and
//! paragraph-vector front ends.
//!
//! Both front ends reduce to the same update: an input vector is pushed
//! toward the output vector of an observed target and away from the output
//! vectors of `negatives` tokens drawn from the unigram distribution raised to
//! the 0.75 power. Only the input side is returned.

use std::collections::{BTreeMap, HashMap};

use super::table::EmbeddingTable;
use super::walk::{generate_walks, WalkConfig};
use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::rng::Rng;
use crate::tape::sigmoid;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
}

impl SkipgramConfig {
    /// Node-embedding defaults: 200 dimensions, 20 epochs, window 10, 5 negatives.
    pub fn node2vec() -> Self {
        SkipgramConfig {
            dim: 200,
            window: 10,
            negatives: 5,
            epochs: 20,
            learning_rate: 0.025,
            min_count: 0,
        }
    }

    /// Paragraph-vector defaults: 200 dimensions, 30 epochs, minimum count 5.
    pub fn paragraph_vector() -> Self {
        SkipgramConfig {
            dim: 200,
            window: 5,
            negatives: 5,
            epochs: 30,
            learning_rate: 0.025,
            min_count: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::Parameter(format!("skip-gram config must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// A trained table together with the mean loss per (input, target) pair of
/// every epoch.
#[derive(Debug, Clone)]
pub struct SkipgramRun {
    pub table: EmbeddingTable,
    pub epoch_losses: Vec<f64>,
}

struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

fn build_vocab<'a>(seqs: impl Iterator<Item = &'a [String]>, min_count: usize) -> Vocab {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for s in seqs {
        for t in s {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count as u64).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocab {
        index: kept.iter().enumerate().map(|(i, (t, _))| (t.to_string(), i)).collect(),
        tokens: kept.iter().map(|(t, _)| t.to_string()).collect(),
        counts: kept.iter().map(|(_, c)| *c).collect(),
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn draw(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.uniform() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }
}

struct Sgns {
    dim: usize,
    output: Vec<f64>,
    sampler: NegativeSampler,
    negatives: usize,
    grad: Vec<f64>,
}

impl Sgns {
    fn new(dim: usize, counts: &[u64], negatives: usize) -> Self {
        Sgns {
            dim,
            output: vec![0.0; dim * counts.len()],
            sampler: NegativeSampler::new(counts),
            negatives,
            grad: vec![0.0; dim],
        }
    }

    /// One update of `input` toward `target`; returns the pair's loss.
    fn step(&mut self, input: &mut [f64], target: usize, lr: f64, rng: &mut Rng) -> f64 {
        let dim = self.dim;
        let vocab = self.output.len() / dim;
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for k in 0..=self.negatives {
            let (out_id, label) = if k == 0 {
                (target, 1.0)
            } else {
                let mut n = self.sampler.draw(rng);
                if n == target {
                    if vocab == 1 {
                        continue;
                    }
                    n = self.sampler.draw(rng);
                    if n == target {
                        continue;
                    }
                }
                (n, 0.0)
            };
            let out = &mut self.output[out_id * dim..(out_id + 1) * dim];
            let score: f64 = input.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
            let p = sigmoid(score);
            loss -= if label == 1.0 {
                p.max(1e-300).ln()
            } else {
                (1.0 - p).max(1e-300).ln()
            };
            let g = lr * (label - p);
            for ((gr, o), i) in self.grad.iter_mut().zip(out.iter_mut()).zip(input.iter()) {
                *gr += g * *o;
                *o += g * i;
            }
        }
        for (i, g) in input.iter_mut().zip(&self.grad) {
            *i += g;
        }
        loss
    }
}

fn init_uniform(n: usize, dim: usize, rng: &mut Rng) -> Vec<f64> {
    let bound = 0.5 / dim as f64;
    (0..n * dim).map(|_| rng.uniform_in(-bound, bound)).collect()
}

fn linear_lr(base: f64, done: u64, total: u64) -> f64 {
    let frac = if total == 0 { 0.0 } else { done as f64 / total as f64 };
    (base * (1.0 - frac)).max(base * 1e-4)
}

/// Trains input vectors for every token of `sequences` (after `min_count`
/// filtering) by predicting the tokens within `window` positions.
pub fn train_skipgram(sequences: &[Vec<String>], cfg: &SkipgramConfig, rng: &mut Rng) -> Result<SkipgramRun> {
    cfg.validate()?;
    let vocab = build_vocab(sequences.iter().map(Vec::as_slice), cfg.min_count);
    if vocab.tokens.is_empty() {
        return Err(Error::Empty("skip-gram corpus is empty after min_count filtering".into()));
    }
    let encoded: Vec<Vec<usize>> = sequences
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.index.get(t).copied()).collect())
        .collect();
    let dim = cfg.dim;
    let mut input = init_uniform(vocab.tokens.len(), dim, rng);
    let mut model = Sgns::new(dim, &vocab.counts, cfg.negatives);

    let pairs_per_epoch: u64 = encoded
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| (i.saturating_sub(cfg.window)..(i + cfg.window + 1).min(s.len())).len() as u64 - 1)
                .sum::<u64>()
        })
        .sum();
    let total = pairs_per_epoch * cfg.epochs as u64;
    let mut done = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut loss = 0.0;
        let mut pairs = 0u64;
        for seq in &encoded {
            for (i, &center) in seq.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(seq.len());
                for (j, &ctx) in seq.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = linear_lr(cfg.learning_rate, done, total);
                    let row = &mut input[center * dim..(center + 1) * dim];
                    loss += model.step(row, ctx, lr, rng);
                    pairs += 1;
                    done += 1;
                }
            }
        }
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        if !mean.is_finite() {
            return Err(Error::NonFinite("skip-gram loss"));
        }
        epoch_losses.push(mean);
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, tok) in vocab.tokens.iter().enumerate() {
        table.insert(tok.clone(), &input[i * dim..(i + 1) * dim])?;
    }
    Ok(SkipgramRun { table, epoch_losses })
}

/// Biased random walks followed by skip-gram over node ids. Every graph node
/// receives a vector, in graph index order.
pub fn node2vec(g: &SocialGraph, wc: &WalkConfig, sc: &SkipgramConfig, rng: &mut Rng) -> Result<EmbeddingTable> {
    let walks = generate_walks(g, wc, rng)?;
    let sequences: Vec<Vec<String>> = walks
        .iter()
        .map(|w| w.iter().map(|&i| g.id(i).to_string()).collect())
        .collect();
    let run = train_skipgram(&sequences, sc, rng)?;
    let mut table = EmbeddingTable::new(sc.dim);
    let bound = 0.5 / sc.dim as f64;
    for id in g.ids() {
        match run.table.get(id) {
            Some(v) => table.insert(id.clone(), v)?,
            // Only reachable when min_count exceeds the node's occurrences.
            None => {
                let v: Vec<f64> = (0..sc.dim).map(|_| rng.uniform_in(-bound, bound)).collect();
                table.insert(id.clone(), &v)?
            }
        };
    }
    Ok(table)
}

/// Distributed bag-of-words paragraph vectors: each author vector is trained
/// to predict the tokens of that author's concatenated timeline. Authors left
/// with no tokens after `min_count` filtering are omitted.
pub fn train_pv_dbow(
    author_docs: &BTreeMap<String, Vec<String>>,
    cfg: &SkipgramConfig,
    rng: &mut Rng,
) -> Result<SkipgramRun> {
    cfg.validate()?;
    if author_docs.is_empty() {
        return Err(Error::Empty("no author documents".into()));
    }
    let vocab = build_vocab(author_docs.values().map(Vec::as_slice), cfg.min_count);
    if vocab.tokens.is_empty() {
        return Err(Error::Empty("paragraph-vector corpus is empty after min_count filtering".into()));
    }
    let docs: Vec<(&String, Vec<usize>)> = author_docs
        .iter()
        .map(|(a, toks)| (a, toks.iter().filter_map(|t| vocab.index.get(t).copied()).collect::<Vec<_>>()))
        .filter(|(_, d)| !d.is_empty())
        .collect();
    let dim = cfg.dim;
    let mut doc_vecs = init_uniform(docs.len(), dim, rng);
    let mut model = Sgns::new(dim, &vocab.counts, cfg.negatives);
    let per_epoch: u64 = docs.iter().map(|(_, d)| d.len() as u64).sum();
    let total = per_epoch * cfg.epochs as u64;
    let mut done = 0u64;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..docs.len()).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss = 0.0;
        for &d in &order {
            for &tok in &docs[d].1 {
                let lr = linear_lr(cfg.learning_rate, done, total);
                let row = &mut doc_vecs[d * dim..(d + 1) * dim];
                loss += model.step(row, tok, lr, rng);
                done += 1;
            }
        }
        let mean = loss / per_epoch as f64;
        if !mean.is_finite() {
            return Err(Error::NonFinite("paragraph-vector loss"));
        }
        epoch_losses.push(mean);
    }
    let mut table = EmbeddingTable::new(dim);
    for (i, (author, _)) in docs.iter().enumerate() {
        table.insert((*author).clone(), &doc_vecs[i * dim..(i + 1) * dim])?;
    }
    Ok(SkipgramRun { table, epoch_losses })
}
