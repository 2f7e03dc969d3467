//! Minimal feedforward network with reverse-mode gradients, sized for
//! conditional distribution-parameter heads (a few thousand weights).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{c, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    fn eval<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Softplus => softplus(z),
        }
    }

    /// Derivative given (pre-activation, activation value).
    fn deriv<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Tanh => T::one() - a * a,
            Activation::Softplus => sigmoid(z),
        }
    }
}

pub fn softplus<T: Scalar>(z: T) -> T {
    // ln(1 + e^z), stable on both sides.
    if z > c(30.0) {
        z
    } else if z < c(-30.0) {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        (T::one() + (-z).exp()).recip()
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Fully connected network; hidden layers share one activation, the output
/// layer is linear unless `activate_output` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    activation: Activation,
    activate_output: bool,
    weights: Vec<T>,
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward`].
pub struct ForwardCache<T> {
    /// Layer inputs: x, a1, ..., a_{L-1} (length = number of layers).
    inputs: Vec<Vec<T>>,
    /// Pre-activations z per layer.
    pre: Vec<Vec<T>>,
    /// Final output.
    pub output: Vec<T>,
}

impl<T: Scalar> Mlp<T> {
    /// `sizes` = [input, hidden..., output]. Weights are
    /// U(-s, s)/sqrt(fan_in) from the given RNG; biases start at zero.
    pub fn new<R: Rng>(
        sizes: Vec<usize>,
        activation: Activation,
        activate_output: bool,
        init_scale: f64,
        rng: &mut R,
    ) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        assert!(sizes.iter().all(|&s| s > 0), "zero-width layer");
        let n_params: usize = (0..sizes.len() - 1)
            .map(|l| sizes[l] * sizes[l + 1] + sizes[l + 1])
            .sum();
        let mut weights = Vec::with_capacity(n_params);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = init_scale / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let u: f64 = rng.random();
                weights.push(c((2.0 * u - 1.0) * bound));
            }
            weights.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        Mlp {
            sizes,
            activation,
            activate_output,
            weights,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1])
            .sum()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x).output
    }

    pub fn forward_cached(&self, x: &[T]) -> ForwardCache<T> {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let w = &self.weights[off..off + n_in * n_out];
            let b = &self.weights[off + n_in * n_out..off + n_in * n_out + n_out];
            let mut z = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut s = *zo;
                for (wi, &ai) in row.iter().zip(&a) {
                    s = s + *wi * ai;
                }
                *zo = s;
            }
            let act_here = l + 1 < self.n_layers() || self.activate_output;
            let out: Vec<T> = if act_here {
                z.iter().map(|&v| self.activation.eval(v)).collect()
            } else {
                z.clone()
            };
            inputs.push(a);
            pre.push(z);
            a = out;
        }
        ForwardCache {
            inputs,
            pre,
            output: a,
        }
    }

    /// Backpropagate `d_output` through the cached pass: accumulates the
    /// parameter gradient into `grad` (same layout as `weights`) and returns
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache<T>, d_output: &[T], grad: &mut [T]) -> Vec<T> {
        debug_assert_eq!(grad.len(), self.weights.len());
        debug_assert_eq!(d_output.len(), self.output_dim());
        let mut delta: Vec<T> = d_output.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = self.layer_offset(l);
            let act_here = l + 1 < self.n_layers() || self.activate_output;
            if act_here {
                let a_l = if l + 1 == self.n_layers() {
                    &cache.output
                } else {
                    &cache.inputs[l + 1]
                };
                for ((d, &z), &a) in delta.iter_mut().zip(&cache.pre[l]).zip(a_l) {
                    *d = *d * self.activation.deriv(z, a);
                }
            }
            let a_in = &cache.inputs[l];
            let (gw, rest) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, &ai) in row.iter_mut().zip(a_in) {
                    *g = *g + d * ai;
                }
                rest[o] = rest[o] + d;
            }
            let w = &self.weights[off..off + n_in * n_out];
            let mut d_in = vec![T::zero(); n_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                for (di, &wi) in d_in.iter_mut().zip(row) {
                    *di = *di + d * wi;
                }
            }
            delta = d_in;
        }
        delta
    }
}
