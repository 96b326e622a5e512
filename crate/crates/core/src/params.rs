//! Named parameter tensors and their per-tape bindings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Biases are excluded from the L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    kinds: Vec<ParamKind>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, kind: ParamKind) -> Result<ParamId> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::Invalid(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name);
        self.values.push(value);
        self.kinds.push(kind);
        Ok(ParamId(self.values.len() - 1))
    }

    /// Uniform initialization in `[-bound, bound]`.
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        bound: f64,
        kind: ParamKind,
        rng: &mut Rng,
    ) -> Result<ParamId> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform_in(-bound, bound)).collect();
        self.add(name, Tensor::new(shape.to_vec(), data)?, kind)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn kind(&self, id: ParamId) -> ParamKind {
        self.kinds[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Result<&Tensor> {
        self.id(name)
            .map(|id| self.get(id))
            .ok_or_else(|| Error::UnknownId(format!("parameter `{name}`")))
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let cur = &self.values[id.0];
        if cur.shape() != value.shape() {
            return Err(Error::Shape {
                op: "parameter set",
                left: cur.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        self.values[id.0] = value;
        Ok(())
    }

    /// Shapes keyed by name, for checkpoint manifests.
    pub fn shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| (n.clone(), v.shape().to_vec()))
            .collect()
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.values.iter().map(|v| Tensor::zeros(v.shape())).collect()
    }

    pub fn total_size(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

/// Lazily created tape variables for the parameters of one store.
///
/// Whole tensors are bound once per tape. Rows of large embedding matrices
/// can be bound individually so that a backward pass touches only the rows
/// an example used.
pub struct Binding {
    whole: Vec<Option<Var>>,
    rows: BTreeMap<(usize, usize), Var>,
    frozen: bool,
}

impl Binding {
    pub fn new(store: &ParamStore) -> Self {
        Binding {
            whole: vec![None; store.len()],
            rows: BTreeMap::new(),
            frozen: false,
        }
    }

    /// A binding whose variables are constants; used for inference.
    pub fn frozen(store: &ParamStore) -> Self {
        Binding {
            frozen: true,
            ..Self::new(store)
        }
    }

    /// Binds `id` to an existing variable instead of a fresh leaf.
    pub fn set(&mut self, id: ParamId, var: Var) {
        self.whole[id.0] = Some(var);
    }

    pub fn var(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.whole[id.0] {
            return v;
        }
        let v = tape.leaf(store.get(id).clone(), !self.frozen);
        self.whole[id.0] = Some(v);
        v
    }

    /// One row of a rank-2 parameter. When the whole tensor is already bound
    /// (for instance by a gradient check) the row is sliced from it.
    pub fn row(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId, row: usize) -> Result<Var> {
        if let Some(v) = self.whole[id.0] {
            return tape.row(v, row);
        }
        if let Some(&v) = self.rows.get(&(id.0, row)) {
            return Ok(v);
        }
        let t = store.get(id);
        if row >= t.rows() {
            return Err(Error::Index {
                what: "parameter row",
                index: row,
                size: t.rows(),
            });
        }
        let v = tape.leaf(Tensor::vector(t.row(row).to_vec()), !self.frozen);
        self.rows.insert((id.0, row), v);
        Ok(v)
    }

    /// Adds this binding's gradients into `acc` (one dense buffer per
    /// parameter).
    pub fn accumulate(&self, grads: &Gradients, acc: &mut [Tensor]) {
        for (i, v) in self.whole.iter().enumerate() {
            if let Some(g) = v.and_then(|v| grads.get(v)) {
                acc[i].add_scaled(g, 1.0);
            }
        }
        for (&(i, r), &v) in &self.rows {
            if let Some(g) = grads.get(v) {
                for (a, d) in acc[i].row_mut(r).iter_mut().zip(g.data()) {
                    *a += d;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_binding_accumulates_into_dense_buffer() {
        let mut store = ParamStore::new();
        let m = store
            .add("m", Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap(), ParamKind::Embedding)
            .unwrap();
        let mut tape = Tape::new();
        let mut b = Binding::new(&store);
        let r1 = b.row(&mut tape, &store, m, 1).unwrap();
        let again = b.row(&mut tape, &store, m, 1).unwrap();
        assert_eq!(r1, again);
        let sq = tape.mul(r1, r1).unwrap();
        let loss = tape.sum(sq).unwrap();
        let grads = tape.backward(loss).unwrap();
        let mut acc = store.zeros_like();
        b.accumulate(&grads, &mut acc);
        assert_eq!(acc[0].data(), &[0.0, 0.0, 6.0, 8.0, 0.0, 0.0]);
    }

    #[test]
    fn frozen_binding_produces_no_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.0, 2.0]), ParamKind::Weight).unwrap();
        let mut tape = Tape::new();
        let mut b = Binding::frozen(&store);
        let v = b.var(&mut tape, &store, w);
        assert!(!tape.requires_grad(v));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::new();
        store.add("a", Tensor::scalar(1.0), ParamKind::Bias).unwrap();
        assert!(store.add("a", Tensor::scalar(1.0), ParamKind::Bias).is_err());
        assert!(store.set(ParamId(0), Tensor::vector(vec![1.0, 2.0])).is_err());
    }
}
