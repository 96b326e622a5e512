//! Single-hop multi-head graph attention over pretrained author vectors.

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::SocialGraph;
use crate::params::{Binding, ParamId, ParamKind, ParamStore};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const LEAKY_ALPHA: f64 = 0.2;
pub const HIDDEN_GRID: [usize; 6] = [10, 15, 20, 25, 30, 50];
pub const HEADS_GRID: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatHead {
    /// Projection `[d × d']`.
    pub wk: ParamId,
    /// Projection bias `[d']`.
    pub bk: ParamId,
    /// Attention vector `[2d']`, applied to `(W h_v ‖ W h_u)`.
    pub wa: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: Vec<GatHead>,
}

impl GatLayer {
    /// Independent per-head parameters, uniform in `±1/sqrt(hidden)`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if !(1..=4).contains(&heads) || hidden == 0 || input_dim == 0 {
            return Err(Error::Parameter(format!(
                "GAT needs 1 to 4 heads and positive dims, got heads={heads} hidden={hidden} input={input_dim}"
            )));
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut hs = Vec::with_capacity(heads);
        for k in 0..heads {
            let wk = store.add_uniform(format!("{prefix}.head{k}.wk"), &[input_dim, hidden], bound, ParamKind::Weight, rng)?;
            let bk = store.add_uniform(format!("{prefix}.head{k}.bk"), &[hidden], bound, ParamKind::Bias, rng)?;
            let wa = store.add_uniform(format!("{prefix}.head{k}.wa"), &[2 * hidden], bound, ParamKind::Weight, rng)?;
            hs.push(GatHead { wk, bk, wa });
        }
        Ok(GatLayer {
            input_dim,
            hidden,
            heads: hs,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.heads.len() * self.hidden
    }

    /// `h` holds one row per member of `N(v) ∪ {v}` with the target first.
    /// Returns the concatenated head outputs and the attention weights of
    /// every head, aligned with the rows of `h`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        bind: &mut Binding,
        store: &ParamStore,
        h: Var,
    ) -> Result<(Var, Vec<Var>)> {
        let hv = tape.value(h);
        if hv.rank() != 2 || hv.cols() != self.input_dim || hv.rows() == 0 {
            return Err(Error::Shape {
                op: "gat forward",
                left: vec![hv.rows(), self.input_dim],
                right: hv.shape().to_vec(),
            });
        }
        let d = self.hidden;
        let mut out: Option<Var> = None;
        let mut alphas = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let wk = bind.var(tape, store, head.wk);
            let bk = bind.var(tape, store, head.bk);
            let wa = bind.var(tape, store, head.wa);
            let proj = tape.matmul(h, wk)?;
            let a_self = tape.slice(wa, 0, d)?;
            let a_nb = tape.slice(wa, d, d)?;
            let p_self = tape.row(proj, 0)?;
            let prod = tape.mul(p_self, a_self)?;
            let s_self = tape.sum(prod)?;
            let s_nb = tape.matmul(proj, a_nb)?;
            let e = tape.add(s_nb, s_self)?;
            let e = tape.leaky_relu(e, LEAKY_ALPHA)?;
            let alpha = tape.softmax(e)?;
            // Σ α_u (W h_u + b) = α·(H W) + b because the weights sum to one.
            let agg = tape.matmul(alpha, proj)?;
            let agg = tape.add(agg, bk)?;
            let hk = tape.relu(agg)?;
            out = Some(match out {
                None => hk,
                Some(prev) => tape.concat(prev, hk)?,
            });
            alphas.push(alpha);
        }
        Ok((out.expect("at least one head"), alphas))
    }
}

/// The target and its neighbors with their input vectors, target first and
/// neighbors in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub ids: Vec<String>,
    pub vectors: Tensor,
}

impl Neighborhood {
    /// Neighbor order in the input is irrelevant: members are sorted by id.
    pub fn new(target: (String, Vec<f64>), mut neighbors: Vec<(String, Vec<f64>)>) -> Result<Self> {
        neighbors.sort_by(|a, b| a.0.cmp(&b.0));
        let dim = target.1.len();
        let mut ids = vec![target.0];
        let mut data = target.1;
        for (id, v) in neighbors {
            if v.len() != dim {
                return Err(Error::Shape {
                    op: "neighborhood",
                    left: vec![dim],
                    right: vec![v.len()],
                });
            }
            ids.push(id);
            data.extend(v);
        }
        let vectors = Tensor::matrix(ids.len(), dim, data)?;
        Ok(Neighborhood { ids, vectors })
    }

    /// `N(v) ∪ {v}` from the graph. A target missing from the table falls
    /// back to the table centroid; a target missing from the graph becomes a
    /// virtual node whose only connection is its self-loop. A neighbor
    /// without a vector is an error.
    pub fn from_graph(g: &SocialGraph, table: &EmbeddingTable, target: &str) -> Result<Self> {
        let tv = table.lookup_or_centroid(target)?;
        let mut neighbors = Vec::new();
        if let Some(v) = g.index_of(target) {
            for &u in g.neighbors(v) {
                let id = g.id(u);
                let vec = table
                    .get(id)
                    .ok_or_else(|| Error::UnknownId(format!("no embedding for graph node `{id}`")))?;
                neighbors.push((id.to_string(), vec.to_vec()));
            }
        }
        Neighborhood::new((target.to_string(), tv), neighbors)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    pub neighbor: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub target: String,
    /// Per head, entries sorted by descending weight; the self-loop is the
    /// entry whose neighbor equals the target.
    pub heads: Vec<Vec<AttentionEntry>>,
}

fn run_frozen(layer: &GatLayer, store: &ParamStore, nb: &Neighborhood) -> Result<(Tensor, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let mut bind = Binding::frozen(store);
    let h = tape.constant(nb.vectors.clone());
    let (out, alphas) = layer.forward(&mut tape, &mut bind, store, h)?;
    let alphas = alphas.iter().map(|a| tape.value(*a).data().to_vec()).collect();
    Ok((tape.value(out).clone(), alphas))
}

/// Normalized attention of one head over `N(v) ∪ {v}`, target first.
pub fn attention_weights(
    layer: &GatLayer,
    store: &ParamStore,
    head: usize,
    target: &str,
    table: &EmbeddingTable,
    g: &SocialGraph,
) -> Result<Vec<(String, f64)>> {
    if head >= layer.heads.len() {
        return Err(Error::Index {
            what: "attention head",
            index: head,
            size: layer.heads.len(),
        });
    }
    let nb = Neighborhood::from_graph(g, table, target)?;
    let (_, alphas) = run_frozen(layer, store, &nb)?;
    Ok(nb.ids.into_iter().zip(alphas[head].iter().copied()).collect())
}

/// The social vector of `target`: relu of the attention-weighted projected
/// neighborhood, heads concatenated.
pub fn node_update(
    layer: &GatLayer,
    store: &ParamStore,
    target: &str,
    table: &EmbeddingTable,
    g: &SocialGraph,
) -> Result<Tensor> {
    let nb = Neighborhood::from_graph(g, table, target)?;
    Ok(run_frozen(layer, store, &nb)?.0)
}

/// Builds a record from weights computed by a forward pass.
pub fn attention_record(nb: &Neighborhood, alphas: &[Vec<f64>]) -> AttentionRecord {
    let heads = alphas
        .iter()
        .map(|a| {
            let mut entries: Vec<AttentionEntry> = nb
                .ids
                .iter()
                .zip(a)
                .map(|(id, &w)| AttentionEntry {
                    neighbor: id.clone(),
                    weight: w,
                })
                .collect();
            entries.sort_by(|x, y| y.weight.total_cmp(&x.weight));
            entries
        })
        .collect();
    AttentionRecord {
        target: nb.ids[0].clone(),
        heads,
    }
}

pub fn extract_attention(
    layer: &GatLayer,
    store: &ParamStore,
    target: &str,
    table: &EmbeddingTable,
    g: &SocialGraph,
) -> Result<AttentionRecord> {
    let nb = Neighborhood::from_graph(g, table, target)?;
    let (_, alphas) = run_frozen(layer, store, &nb)?;
    Ok(attention_record(&nb, &alphas))
}
