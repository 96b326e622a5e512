//! Finite-difference verification of tape gradients.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Compares the tape gradient of scalar `f` at `x` against central
/// differences with step `eps`.
///
/// Returns the largest `|analytic - numeric| / max(1e-8, |numeric|)` over all
/// coordinates of `x`.
pub fn check_gradients<F>(mut f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let out = f(&mut tape, xv)?;
    if tape.value(out).len() != 1 {
        return Err(Error::Rank {
            op: "check_gradients",
            reason: format!("function must be scalar-valued, got shape {:?}", tape.value(out).shape()),
        });
    }
    let grads = tape.backward(out)?;
    let analytic = grads.get(xv).expect("leaf gradient").clone();

    let mut eval = |point: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.constant(point);
        let out = f(&mut tape, v)?;
        tape.value(out).item()
    };

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let err = (analytic.data()[i] - numeric).abs() / numeric.abs().max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap()
    }

    /// Uniform in ±[0.1, 1], keeping away from activation kinks.
    fn off_kink(rng: &mut Rng, n: usize) -> Tensor {
        Tensor::vector(
            (0..n)
                .map(|_| {
                    let m = rng.uniform_in(0.1, 1.0);
                    if rng.bernoulli(0.5) {
                        m
                    } else {
                        -m
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn sum_of_squares() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let err = check_gradients(
            |t, x| {
                let sq = t.mul(x, x)?;
                t.sum(sq)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Tensor::vector(vec![0.3, -0.7]);
        let err = check_gradients(
            |t, _x| Ok(t.constant(Tensor::scalar(4.0))),
            &x,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn non_scalar_function_is_rejected() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        assert!(check_gradients(|_t, x| Ok(x), &x, 1e-5).is_err());
    }

    #[test]
    fn leaky_relu_away_from_kinks() {
        let mut rng = Rng::new(11);
        for _ in 0..10 {
            let x = off_kink(&mut rng, 6);
            let w = random_tensor(&mut rng, &[6]);
            let err = check_gradients(
                |t, x| {
                    let y = t.leaky_relu(x, 0.2)?;
                    let wv = t.constant(w.clone());
                    let p = t.mul(y, wv)?;
                    t.sum(p)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn matmul_gradient_vs_finite_differences() {
        let mut rng = Rng::new(5);
        let a = random_tensor(&mut rng, &[3, 4]);
        let b = random_tensor(&mut rng, &[4, 2]);
        let bb = b.clone();
        let err = check_gradients(
            |t, x| {
                let bv = t.constant(bb.clone());
                let m = t.matmul(x, bv)?;
                t.sum(m)
            },
            &a,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
        let aa = a.clone();
        let err = check_gradients(
            |t, x| {
                let av = t.constant(aa.clone());
                let m = t.matmul(av, x)?;
                t.sum(m)
            },
            &b,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn sigmoid_gradient_at_one() {
        let err = check_gradients(|t, x| t.sigmoid(x), &Tensor::scalar(1.0), 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn cross_entropy_gradient_at_random_logits() {
        let mut rng = Rng::new(8);
        for label in 0..4 {
            let x = random_tensor(&mut rng, &[4]).map(|v| 3.0 * v);
            let err = check_gradients(|t, x| t.cross_entropy(x, label), &x, 1e-5).unwrap();
            assert!(err < 1e-6, "{err}");
        }
    }

    /// Every differentiable op at ten random points.
    #[test]
    fn every_op_passes_at_random_points() {
        let mut rng = Rng::new(77);
        for _ in 0..10 {
            let x = off_kink(&mut rng, 6);
            let w = random_tensor(&mut rng, &[6, 3]);
            let c = random_tensor(&mut rng, &[6]);
            let err = check_gradients(
                |t, x| {
                    let wv = t.constant(w.clone());
                    let cv = t.constant(c.clone());
                    let sig = t.sigmoid(x)?;
                    let th = t.tanh(x)?;
                    let lr = t.leaky_relu(x, 0.2)?;
                    let prod = t.mul(sig, th)?;
                    let mix = t.add(prod, lr)?;
                    let mix = t.add(mix, cv)?;
                    let mix = t.scale(mix, 0.7)?;
                    let h = t.matmul(mix, wv)?;
                    let head = t.slice(x, 0, 2)?;
                    let cat = t.concat(h, head)?;
                    let sm = t.softmax(cat)?;
                    let ce = t.cross_entropy(cat, 2)?;
                    let s = t.sum(sm)?;
                    let s2 = t.mul(s, ce)?;
                    let one = t.constant(Tensor::scalar(0.5));
                    t.add(s2, one)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn row_gradient() {
        let mut rng = Rng::new(12);
        let m = random_tensor(&mut rng, &[3, 4]);
        let err = check_gradients(
            |t, x| {
                let r = t.row(x, 1)?;
                let sq = t.mul(r, r)?;
                t.sum(sq)
            },
            &m,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
