//! Feed-forward policy/value network with hand-written backpropagation.
//!
//! Architecture: `obs -> tanh(W1 x + b1) -> tanh(W2 h1 + b2)`, followed by
//! categorical heads (linear logits) and a scalar value head on the second
//! hidden layer.
//!
//! Flat parameter layout (bit-exact, also the checkpoint layout), all
//! matrices row-major `[out][in]`:
//!
//! ```text
//! W1 [hidden x obs_len]  b1 [hidden]
//! W2 [hidden x hidden]   b2 [hidden]
//! Wp [logits x hidden]   bp [logits]
//! Wv [1 x hidden]        bv [1]
//! ```
//!
//! `logits` is the sum of the action component sizes for factorized heads
//! and their product for a single joint head.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum HeadLayout {
    /// One independent categorical per action component.
    #[default]
    Factorized,
    /// A single categorical over the product space; component 0 is the most
    /// significant digit of the joint index.
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicyParams {
    pub obs_len: usize,
    pub hidden: usize,
    pub components: Vec<usize>,
    pub layout: HeadLayout,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Offsets {
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
    wp: Range<usize>,
    bp: Range<usize>,
    wv: Range<usize>,
    bv: Range<usize>,
}

fn head_sizes(components: &[usize], layout: HeadLayout) -> Vec<usize> {
    match layout {
        HeadLayout::Factorized => components.to_vec(),
        HeadLayout::Joint => vec![components.iter().product()],
    }
}

fn offsets(obs_len: usize, hidden: usize, logits: usize) -> Offsets {
    let mut at = 0;
    let mut take = |n: usize| {
        let r = at..at + n;
        at += n;
        r
    };
    Offsets {
        w1: take(hidden * obs_len),
        b1: take(hidden),
        w2: take(hidden * hidden),
        b2: take(hidden),
        wp: take(logits * hidden),
        bp: take(logits),
        wv: take(hidden),
        bv: take(1),
    }
}

pub fn param_count(obs_len: usize, hidden: usize, components: &[usize], layout: HeadLayout) -> usize {
    let logits: usize = head_sizes(components, layout).iter().sum();
    offsets(obs_len, hidden, logits).bv.end
}

/// Per-head logits and the value estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub logits: Vec<Vec<f64>>,
    pub value: f64,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    h1: Vec<f64>,
    h2: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl PolicyParams {
    pub fn zeros(obs_len: usize, hidden: usize, components: &[usize], layout: HeadLayout) -> PolicyParams {
        PolicyParams {
            obs_len,
            hidden,
            components: components.to_vec(),
            layout,
            data: vec![0.0; param_count(obs_len, hidden, components, layout)],
        }
    }

    /// Glorot-uniform hidden layers, policy head scaled by 0.01, zero biases.
    pub fn init(
        obs_len: usize,
        hidden: usize,
        components: &[usize],
        layout: HeadLayout,
        rng: &mut SimRng,
    ) -> PolicyParams {
        let mut p = PolicyParams::zeros(obs_len, hidden, components, layout);
        let o = p.offsets();
        let logits = p.logit_count();
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize, gain: f64| {
            let a = gain * libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for v in &mut p.data[range] {
                *v = rng.gen_range(-a..a);
            }
        };
        fill(o.w1, obs_len, hidden, 1.0);
        fill(o.w2, hidden, hidden, 1.0);
        fill(o.wp, hidden, logits, 0.01);
        fill(o.wv, hidden, 1, 1.0);
        p
    }

    pub fn head_sizes(&self) -> Vec<usize> {
        head_sizes(&self.components, self.layout)
    }

    fn logit_count(&self) -> usize {
        self.head_sizes().iter().sum()
    }

    fn offsets(&self) -> Offsets {
        offsets(self.obs_len, self.hidden, self.logit_count())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Checks internal consistency, e.g. after loading a checkpoint.
    pub fn check(&self) -> Result<()> {
        let expected = param_count(self.obs_len, self.hidden, &self.components, self.layout);
        if self.data.len() != expected {
            return Err(Error::Shape {
                expected,
                actual: self.data.len(),
            });
        }
        if self.components.iter().any(|&c| c == 0) {
            return Err(Error::Input("action components must be positive".into()));
        }
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<PolicyOutput> {
        self.forward_cached(obs).map(|(out, _)| out)
    }

    pub fn forward_cached(&self, obs: &[f64]) -> Result<(PolicyOutput, ForwardCache)> {
        if obs.len() != self.obs_len {
            return Err(Error::Shape {
                expected: self.obs_len,
                actual: obs.len(),
            });
        }
        let o = self.offsets();
        let d = &self.data;
        let mut h1 = vec![0.0; self.hidden];
        affine(&d[o.w1], &d[o.b1], obs, &mut h1);
        h1.iter_mut().for_each(|v| *v = libm::tanh(*v));
        let mut h2 = vec![0.0; self.hidden];
        affine(&d[o.w2], &d[o.b2], &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = libm::tanh(*v));
        let mut flat = vec![0.0; self.logit_count()];
        affine(&d[o.wp], &d[o.bp], &h2, &mut flat);
        let mut value = [0.0];
        affine(&d[o.wv], &d[o.bv], &h2, &mut value);

        let mut logits = Vec::new();
        let mut rest = &flat[..];
        for n in self.head_sizes() {
            let (head, tail) = rest.split_at(n);
            logits.push(head.to_vec());
            rest = tail;
        }
        Ok((
            PolicyOutput {
                logits,
                value: value[0],
            },
            ForwardCache { h1, h2 },
        ))
    }

    /// Accumulates into `grad` the parameter gradient for upstream
    /// gradients `d_logits` (flattened over heads) and `d_value`.
    pub fn backward(
        &self,
        obs: &[f64],
        cache: &ForwardCache,
        d_logits: &[f64],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let o = self.offsets();
        let d = &self.data;
        let h = self.hidden;
        let (h1, h2) = (&cache.h1, &cache.h2);

        let mut d_h2 = vec![0.0; h];
        for (k, &g) in d_logits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[o.bp.start + k] += g;
            let row = o.wp.start + k * h;
            for j in 0..h {
                grad[row + j] += g * h2[j];
                d_h2[j] += g * d[row + j];
            }
        }
        grad[o.bv.start] += d_value;
        for j in 0..h {
            grad[o.wv.start + j] += d_value * h2[j];
            d_h2[j] += d_value * d[o.wv.start + j];
        }

        // through tanh
        let d_z2: Vec<f64> = d_h2.iter().zip(h2).map(|(g, a)| g * (1.0 - a * a)).collect();
        let mut d_h1 = vec![0.0; h];
        for (i, &g) in d_z2.iter().enumerate() {
            grad[o.b2.start + i] += g;
            let row = o.w2.start + i * h;
            for j in 0..h {
                grad[row + j] += g * h1[j];
                d_h1[j] += g * d[row + j];
            }
        }
        let n_in = self.obs_len;
        for (i, (g, a)) in d_h1.iter().zip(h1).enumerate() {
            let g = g * (1.0 - a * a);
            grad[o.b1.start + i] += g;
            let row = o.w1.start + i * n_in;
            for (j, x) in obs.iter().enumerate() {
                if *x != 0.0 {
                    grad[row + j] += g * x;
                }
            }
        }
    }
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + libm::log(logits.iter().map(|z| libm::exp(z - max)).sum::<f64>());
    logits.iter().map(|z| z - lse).collect()
}

pub fn entropy(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|lp| libm::exp(*lp) * lp).sum::<f64>()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a categorical given by log-probabilities.
pub fn sample_categorical(log_probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += libm::exp(*lp);
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Gradient-descent step on `params` (minimizes the loss whose gradient is `grad`).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}
