//! Single-layer bidirectional LSTM encoder over word vectors.

use super::vocab::{WordEmbeddings, PLACEHOLDER_IDS};
use crate::error::Result;
use crate::params::{Binding, ParamId, ParamKind, ParamStore};
use crate::rng::Rng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_HIDDEN: usize = 50;

/// Gate pre-activations are laid out as `[input | forget | cell | output]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstmDirection {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub forward: LstmDirection,
    pub backward: LstmDirection,
    /// Trainable `<url>`, `<hashtag>`, `<mention>` vectors.
    pub placeholders: ParamId,
}

impl LstmParams {
    /// Registers the encoder parameters under `prefix`. Forget-gate biases
    /// start at 1, everything else uniform in `±1/sqrt(hidden)`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        words: &WordEmbeddings,
        hidden: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let input_dim = words.dim();
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut direction = |name: &str, store: &mut ParamStore| -> Result<LstmDirection> {
            let wx = store.add_uniform(format!("{prefix}.{name}.wx"), &[input_dim, 4 * hidden], bound, ParamKind::Weight, rng)?;
            let wh = store.add_uniform(format!("{prefix}.{name}.wh"), &[hidden, 4 * hidden], bound, ParamKind::Weight, rng)?;
            let mut bias: Vec<f64> = (0..4 * hidden).map(|_| rng.uniform_in(-bound, bound)).collect();
            bias[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
            let b = store.add(format!("{prefix}.{name}.b"), Tensor::vector(bias), ParamKind::Bias)?;
            Ok(LstmDirection { wx, wh, b })
        };
        let forward = direction("fwd", store)?;
        let backward = direction("bwd", store)?;
        let placeholders = store.add(format!("{prefix}.placeholders"), words.placeholder_init(), ParamKind::Embedding)?;
        Ok(LstmParams {
            input_dim,
            hidden,
            forward,
            backward,
            placeholders,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    fn run(
        &self,
        tape: &mut Tape,
        bind: &mut Binding,
        store: &ParamStore,
        dir: LstmDirection,
        inputs: impl Iterator<Item = Var>,
    ) -> Result<Var> {
        let h_size = self.hidden;
        let wx = bind.var(tape, store, dir.wx);
        let wh = bind.var(tape, store, dir.wh);
        let b = bind.var(tape, store, dir.b);
        let mut state: Option<(Var, Var)> = None;
        for x in inputs {
            let mut z = tape.matmul(x, wx)?;
            if let Some((h, _)) = state {
                let zh = tape.matmul(h, wh)?;
                z = tape.add(z, zh)?;
            }
            z = tape.add(z, b)?;
            let zi = tape.slice(z, 0, h_size)?;
            let zf = tape.slice(z, h_size, h_size)?;
            let zg = tape.slice(z, 2 * h_size, h_size)?;
            let zo = tape.slice(z, 3 * h_size, h_size)?;
            let i = tape.sigmoid(zi)?;
            let g = tape.tanh(zg)?;
            let o = tape.sigmoid(zo)?;
            let mut c = tape.mul(i, g)?;
            if let Some((_, c_prev)) = state {
                let f = tape.sigmoid(zf)?;
                let kept = tape.mul(f, c_prev)?;
                c = tape.add(kept, c)?;
            }
            let tc = tape.tanh(c)?;
            let h = tape.mul(o, tc)?;
            state = Some((h, c));
        }
        Ok(match state {
            Some((h, _)) => h,
            None => tape.constant(Tensor::zeros(&[h_size])),
        })
    }

    /// Token id sequence to `[fwd final hidden ‖ bwd final hidden]`.
    /// An empty sequence encodes to the zero vector.
    pub fn encode(
        &self,
        tape: &mut Tape,
        bind: &mut Binding,
        store: &ParamStore,
        words: &WordEmbeddings,
        ids: &[usize],
    ) -> Result<Var> {
        if ids.is_empty() {
            return Ok(tape.constant(Tensor::zeros(&[self.output_dim()])));
        }
        let mut xs = Vec::with_capacity(ids.len());
        for &id in ids {
            let x = if PLACEHOLDER_IDS.contains(&id) {
                bind.row(tape, store, self.placeholders, id - PLACEHOLDER_IDS.start)?
            } else {
                tape.constant(Tensor::vector(words.matrix.row(id).to_vec()))
            };
            xs.push(x);
        }
        let f = self.run(tape, bind, store, self.forward, xs.iter().copied())?;
        let b = self.run(tape, bind, store, self.backward, xs.iter().rev().copied())?;
        tape.concat(f, b)
    }
}

/// Encodes preprocessed tokens without recording gradients.
pub fn bilstm_encode(
    tokens: &[String],
    params: &LstmParams,
    store: &ParamStore,
    words: &WordEmbeddings,
) -> Result<Tensor> {
    let mut tape = Tape::new();
    let mut bind = Binding::frozen(store);
    let ids = words.vocab.encode(tokens);
    let v = params.encode(&mut tape, &mut bind, store, words, &ids)?;
    Ok(tape.value(v).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingTable;
    use crate::gradcheck::check_gradients;

    fn words(dim: usize, n: usize, rng: &mut Rng) -> WordEmbeddings {
        let mut t = EmbeddingTable::new(dim);
        for i in 0..n {
            let v: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
            t.insert(format!("w{i}"), &v).unwrap();
        }
        WordEmbeddings::from_table(&t).unwrap()
    }

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut rng = Rng::new(1);
        let w = words(4, 3, &mut rng);
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", &w, DEFAULT_HIDDEN, &mut rng).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.get_mut(id).fill(0.0);
        }
        let out = bilstm_encode(&toks(&["w0", "w1", "zzz"]), &p, &store, &w).unwrap();
        assert_eq!(out.data(), &vec![0.0; 100][..]);
    }

    #[test]
    fn output_length_is_twice_hidden() {
        let mut rng = Rng::new(2);
        let w = words(5, 3, &mut rng);
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", &w, 7, &mut rng).unwrap();
        for len in [0, 1, 3, 80] {
            let t: Vec<String> = (0..len).map(|i| format!("w{}", i % 3)).collect();
            assert_eq!(bilstm_encode(&t, &p, &store, &w).unwrap().len(), 14);
        }
        let b = store.get(p.forward.b).data();
        assert!(b[7..14].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_token_runs_one_step_each_way() {
        let mut rng = Rng::new(3);
        let w = words(4, 2, &mut rng);
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", &w, 3, &mut rng).unwrap();
        let out = bilstm_encode(&toks(&["w1"]), &p, &store, &w).unwrap();
        // Hand-evaluated single step: h = σ(o)·tanh(σ(i)·tanh(g)).
        let x = w.matrix.row(w.vocab.get("w1").unwrap());
        for (dir, half) in [(p.forward, 0), (p.backward, 1)] {
            let wx = store.get(dir.wx);
            let b = store.get(dir.b).data();
            for j in 0..3 {
                let z = |gate: usize| -> f64 {
                    let col = gate * 3 + j;
                    b[col] + (0..4).map(|r| x[r] * wx.data()[r * 12 + col]).sum::<f64>()
                };
                let s = |v: f64| 1.0 / (1.0 + (-v).exp());
                let c = s(z(0)) * z(2).tanh();
                let h = s(z(3)) * c.tanh();
                assert!((out.data()[half * 3 + j] - h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversal_with_swapped_directions_swaps_halves() {
        let mut rng = Rng::new(4);
        let w = words(4, 5, &mut rng);
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", &w, 6, &mut rng).unwrap();
        let seq = toks(&["w0", "w3", "#x", "w1", "w4"]);
        let seq: Vec<String> = seq.iter().flat_map(|s| crate::text::preprocess(s)).collect();
        let out = bilstm_encode(&seq, &p, &store, &w).unwrap();
        let swapped = LstmParams {
            forward: p.backward,
            backward: p.forward,
            ..p.clone()
        };
        let rev: Vec<String> = seq.iter().rev().cloned().collect();
        let out2 = bilstm_encode(&rev, &swapped, &store, &w).unwrap();
        assert_eq!(&out.data()[..6], &out2.data()[6..]);
        assert_eq!(&out.data()[6..], &out2.data()[..6]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = Rng::new(5);
        let w = words(4, 3, &mut rng);
        let mut store = ParamStore::new();
        let p = LstmParams::new(&mut store, "lstm", &w, 3, &mut rng).unwrap();
        let ids = w.vocab.encode(&toks(&["w0", "<url>", "w2"]));
        let head = Tensor::vector((0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect());
        for id in store.ids().collect::<Vec<_>>() {
            let x = store.get(id).clone();
            let err = check_gradients(
                |tape, xv| {
                    let mut bind = Binding::new(&store);
                    bind.set(id, xv);
                    let out = p.encode(tape, &mut bind, &store, &w, &ids)?;
                    let hv = tape.constant(head.clone());
                    let prod = tape.mul(out, hv)?;
                    tape.sum(prod)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{}: {err}", store.name(id));
        }
    }
}
