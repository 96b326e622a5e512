//! Second-order biased random walks over the social graph.

use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WalkConfig {
    /// Return bias: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out bias: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_length: 80,
            walks_per_node: 10,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) || self.walk_length == 0 || self.walks_per_node == 0 {
            return Err(Error::Parameter(format!("walk config must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Normalized transition probabilities from `cur` given the previous node.
///
/// Unnormalized weights are `1/p` for returning to `prev`, `1` for a
/// neighbor of `prev`, and `1/q` otherwise; the first step of a walk
/// (`prev == None`) is uniform. Entries follow `cur`'s sorted neighbor order.
pub fn next_step_distribution(
    g: &SocialGraph,
    prev: Option<usize>,
    cur: usize,
    cfg: &WalkConfig,
) -> Result<Vec<(usize, f64)>> {
    let neighbors = g.neighbors(cur);
    if neighbors.is_empty() {
        return Err(Error::Empty(format!("node `{}` has no neighbors", g.id(cur))));
    }
    let mut weights: Vec<(usize, f64)> = neighbors
        .iter()
        .map(|&x| {
            let w = match prev {
                None => 1.0,
                Some(t) if x == t => 1.0 / cfg.p,
                Some(t) if g.has_edge(t, x) => 1.0,
                Some(_) => 1.0 / cfg.q,
            };
            (x, w)
        })
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.iter_mut().for_each(|(_, w)| *w /= total);
    Ok(weights)
}

fn walk_from(g: &SocialGraph, start: usize, cfg: &WalkConfig, rng: &mut Rng, scratch: &mut Vec<f64>) -> Vec<usize> {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let mut prev = None;
    let mut cur = start;
    let unbiased = cfg.p == 1.0 && cfg.q == 1.0;
    while walk.len() < cfg.walk_length {
        let ns = g.neighbors(cur);
        if ns.is_empty() {
            break;
        }
        let next = if unbiased || prev.is_none() {
            ns[rng.below(ns.len())]
        } else {
            let t = prev.unwrap();
            scratch.clear();
            scratch.extend(ns.iter().map(|&x| {
                if x == t {
                    1.0 / cfg.p
                } else if g.has_edge(t, x) {
                    1.0
                } else {
                    1.0 / cfg.q
                }
            }));
            ns[rng.weighted_index(scratch)]
        };
        prev = Some(cur);
        cur = next;
        walk.push(cur);
    }
    walk
}

/// `walks_per_node` rounds; each round starts one walk from every node in
/// index order. Walks stop early at dead ends (isolated nodes give length 1).
pub fn generate_walks(g: &SocialGraph, cfg: &WalkConfig, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let mut walks = Vec::with_capacity(cfg.walks_per_node * g.node_count());
    let mut scratch = Vec::new();
    for _ in 0..cfg.walks_per_node {
        for start in 0..g.node_count() {
            walks.push(walk_from(g, start, cfg, rng, &mut scratch));
        }
    }
    Ok(walks)
}
