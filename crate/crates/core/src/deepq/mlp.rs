//! Fully-connected network with rectified-linear hidden layers, exact
//! backpropagation, adaptive-moment gradient scaling, and a finite-difference
//! gradient check.

use crate::error::{Error, Result};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Standard normal draw via Box-Muller on two generator words.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// Layer widths, input first (e.g. `[19, 64, 64, 17]`).
    pub sizes: Vec<usize>,
    /// Row-major `out x in` weight matrix per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradient (or moment) storage with the same shape as an [`Mlp`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Gradients {
        Gradients {
            w: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            b: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

impl Mlp {
    /// He-style initialization, deterministic in the generator state.
    pub fn init(sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        assert!(sizes.len() >= 2, "need input and output layers");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = (2.0 / fan_in as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| gaussian(rng) * scale).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    pub fn zeros(sizes: &[usize]) -> Mlp {
        Mlp {
            sizes: sizes.to_vec(),
            weights: (0..sizes.len() - 1)
                .map(|l| vec![0.0; sizes[l] * sizes[l + 1]])
                .collect(),
            biases: (0..sizes.len() - 1).map(|l| vec![0.0; sizes[l + 1]]).collect(),
        }
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Q-values for one input. Rejects non-finite inputs; finite inputs give
    /// finite outputs by construction.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp forward input"));
        }
        Ok(self.forward_full(input).pop().unwrap())
    }

    /// Forward pass keeping every layer's post-activation output;
    /// `result[0]` is the input, `result.last()` the network output.
    pub fn forward_full(&self, input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.layer_count() {
            let last = l + 1 == self.layer_count();
            let x = acts.last().unwrap();
            let mut out = vec![0.0; self.sizes[l + 1]];
            for (o, (row, bias)) in out
                .iter_mut()
                .zip(self.weights[l].chunks_exact(self.sizes[l]).zip(&self.biases[l]))
            {
                let mut acc = *bias;
                for (w, xv) in row.iter().zip(x.iter()) {
                    acc += w * xv;
                }
                *o = if last { acc } else { acc.max(0.0) };
            }
            acts.push(out);
        }
        acts
    }

    /// Backpropagate `delta_out = dL/d(output)` through activations from
    /// [`forward_full`], accumulating into `grads`.
    pub fn backward(&self, acts: &[Vec<f64>], delta_out: &[f64], grads: &mut Gradients) {
        let mut delta = delta_out.to_vec();
        for l in (0..self.layer_count()).rev() {
            let input = &acts[l];
            let fan_in = self.sizes[l];
            for (r, d) in delta.iter().enumerate() {
                grads.b[l][r] += d;
                let row = &mut grads.w[l][r * fan_in..(r + 1) * fan_in];
                for (g, x) in row.iter_mut().zip(input.iter()) {
                    *g += d * x;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; fan_in];
                for (r, d) in delta.iter().enumerate() {
                    let row = &self.weights[l][r * fan_in..(r + 1) * fan_in];
                    for (p, w) in prev.iter_mut().zip(row.iter()) {
                        *p += d * w;
                    }
                }
                // rectifier mask: a unit that output zero passes no gradient
                for (p, a) in prev.iter_mut().zip(acts[l].iter()) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mlp serializes")
    }

    pub fn from_json(text: &str) -> Result<Mlp> {
        let net: Mlp = serde_json::from_str(text)?;
        for l in 0..net.layer_count() {
            if net.weights[l].len() != net.sizes[l] * net.sizes[l + 1]
                || net.biases[l].len() != net.sizes[l + 1]
            {
                return Err(Error::config("mlp checkpoint shape mismatch"));
            }
        }
        Ok(net)
    }
}

/// Adaptive-moment gradient descent.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(lr: f64, net: &Mlp) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let apply = |param: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..param.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                param[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        };
        for l in 0..net.layer_count() {
            apply(&mut net.weights[l], &grads.w[l], &mut self.m.w[l], &mut self.v.w[l]);
            apply(&mut net.biases[l], &grads.b[l], &mut self.m.b[l], &mut self.v.b[l]);
        }
    }
}

/// Training losses over the temporal-difference error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    /// Huber with delta = 1; bounded gradient against the huge violation
    /// rewards.
    Huber,
}

impl LossKind {
    pub fn loss(self, err: f64) -> f64 {
        match self {
            LossKind::Quadratic => 0.5 * err * err,
            LossKind::Huber => {
                if err.abs() <= 1.0 {
                    0.5 * err * err
                } else {
                    err.abs() - 0.5
                }
            }
        }
    }

    pub fn grad(self, err: f64) -> f64 {
        match self {
            LossKind::Quadratic => err,
            LossKind::Huber => err.clamp(-1.0, 1.0),
        }
    }
}

/// Compare analytic gradients against central finite differences on a small
/// random network; returns the maximum relative error over all parameters.
///
/// Inputs that park a rectifier (or the Huber boundary) within the
/// differencing step of a kink are resampled — the loss is not differentiable
/// there, so those points are excluded from the check.
pub fn grad_check(sizes: &[usize], loss: LossKind, rng: &mut ChaCha8Rng) -> f64 {
    const H: f64 = 1e-5;
    let net = Mlp::init(sizes, rng);
    let out_len = *sizes.last().unwrap();

    let (input, target) = loop {
        let input: Vec<f64> = (0..sizes[0]).map(|_| gaussian(rng)).collect();
        let target: Vec<f64> = (0..out_len).map(|_| gaussian(rng)).collect();
        if !near_kink(&net, &input, &target, loss) {
            break (input, target);
        }
    };

    let eval = |net: &Mlp| -> f64 {
        let out = net.forward_full(&input).pop().unwrap();
        out.iter().zip(&target).map(|(o, t)| loss.loss(o - t)).sum()
    };

    // analytic
    let acts = net.forward_full(&input);
    let out = acts.last().unwrap();
    let delta: Vec<f64> = out.iter().zip(&target).map(|(o, t)| loss.grad(o - t)).collect();
    let mut grads = Gradients::zeros_like(&net);
    net.backward(&acts, &delta, &mut grads);

    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for l in 0..net.layer_count() {
        for is_weight in [true, false] {
            let n = if is_weight { grads.w[l].len() } else { grads.b[l].len() };
            for i in 0..n {
                let analytic = if is_weight { grads.w[l][i] } else { grads.b[l][i] };
                let set = |p: &mut Mlp, v: f64| {
                    if is_weight {
                        p.weights[l][i] = v;
                    } else {
                        p.biases[l][i] = v;
                    }
                };
                let original = if is_weight { probe.weights[l][i] } else { probe.biases[l][i] };
                set(&mut probe, original + H);
                let up = eval(&probe);
                set(&mut probe, original - H);
                let down = eval(&probe);
                set(&mut probe, original);
                let numeric = (up - down) / (2.0 * H);
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// True when any hidden pre-activation or error term sits close enough to a
/// non-differentiable point to poison a finite difference.
fn near_kink(net: &Mlp, input: &[f64], target: &[f64], loss: LossKind) -> bool {
    const GUARD: f64 = 1e-3;
    let mut x = input.to_vec();
    for l in 0..net.layer_count() {
        let last = l + 1 == net.layer_count();
        let mut z = vec![0.0; net.sizes[l + 1]];
        for (o, (row, bias)) in z
            .iter_mut()
            .zip(net.weights[l].chunks_exact(net.sizes[l]).zip(&net.biases[l]))
        {
            *o = *bias + row.iter().zip(&x).map(|(w, xv)| w * xv).sum::<f64>();
        }
        if !last && z.iter().any(|v| v.abs() < GUARD) {
            return true;
        }
        x = if last {
            z
        } else {
            z.into_iter().map(|v| v.max(0.0)).collect()
        };
    }
    if loss == LossKind::Huber {
        return x
            .iter()
            .zip(target)
            .any(|(o, t)| ((o - t).abs() - 1.0).abs() < GUARD);
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[19, 8, 17]);
        let out = net.forward(&[0.3; 19]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_layer_one_hot_selects_weight_column() {
        let mut net = Mlp::zeros(&[4, 3]);
        // column 2 of the weight matrix
        net.weights[0][2] = 1.5;
        net.weights[0][4 + 2] = -0.5;
        net.weights[0][8 + 2] = 2.0;
        let mut x = [0.0; 4];
        x[2] = 1.0;
        let out = net.forward(&x).unwrap();
        assert_eq!(out, vec![1.5, -0.5, 2.0]);
    }

    #[test]
    fn forward_is_bit_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let net = Mlp::init(&[19, 64, 64, 17], &mut rng);
        let input = [0.123; 19];
        let a = net.forward(&input).unwrap();
        let b = net.forward(&input).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn forward_rejects_non_finite() {
        let net = Mlp::zeros(&[2, 2]);
        assert!(net.forward(&[f64::NAN, 0.0]).is_err());
        assert!(net.forward(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn linear_net_quadratic_loss_gradient_is_exact() {
        // no hidden layer means no rectifier kinks
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = grad_check(&[4, 3], LossKind::Quadratic, &mut rng);
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn rectified_net_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let err = grad_check(&[4, 8, 3], LossKind::Huber, &mut rng);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(&[6, 5, 4], &mut rng);
        let back = Mlp::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
        assert!(Mlp::from_json("{\"sizes\":[2,2],\"weights\":[[1.0]],\"biases\":[[0.0,0.0]]}").is_err());
    }

    #[test]
    fn adam_reduces_a_simple_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::init(&[3, 8, 2], &mut rng);
        let mut adam = Adam::new(1e-2, &net);
        let input = [0.4, -0.2, 0.9];
        let target = [1.0, -1.0];
        let loss_of = |net: &Mlp| -> f64 {
            let out = net.forward(&input).unwrap();
            out.iter().zip(&target).map(|(o, t)| 0.5 * (o - t) * (o - t)).sum()
        };
        let before = loss_of(&net);
        for _ in 0..200 {
            let acts = net.forward_full(&input);
            let out = acts.last().unwrap();
            let delta: Vec<f64> = out.iter().zip(&target).map(|(o, t)| o - t).collect();
            let mut grads = Gradients::zeros_like(&net);
            net.backward(&acts, &delta, &mut grads);
            adam.step(&mut net, &grads);
        }
        let after = loss_of(&net);
        assert!(after < before * 0.01, "{before} -> {after}");
        assert!(net.weights.iter().flatten().all(|w| w.is_finite()));
    }
}
