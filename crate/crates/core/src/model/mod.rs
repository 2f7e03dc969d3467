//! Conditional GEV regression: learners mapping (x, t) to distribution
//! parameters, trained by conditional negative log-likelihood.
//!
//! Three learner shapes:
//! - s-learner: one network over the concatenated (x, t);
//! - t-learner: disjoint networks per treatment arm;
//! - TARNet: a shared representation Φ(x) feeding one head per arm, with a
//!   sliced-Wasserstein balance penalty (α > 0 is the counterfactual
//!   regression variant).
//!
//! Location and scale heads are typically frozen to known functions of
//! (x, t) — fitting all three conditional parameters is numerically
//! unstable, and the tail index is the quantity of interest. The ξ head is
//! squashed into the same clamp the marginal MLE uses.

mod serialize;
mod train;

pub use train::{nll_loss, train, TrainConfig, Trained};

use serde::{Deserialize, Serialize};

use crate::data::Treatment;
use crate::error::{Error, Result};
use crate::gev::{GevParams, XI_MAX, XI_MIN};
use crate::nn::{sigmoid, softplus, Activation, Mlp};
use crate::scalar::{c, Scalar};
use crate::util::rng_from;

/// Which learner family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    SLearner,
    TLearner,
    /// α = 0 is TARNet; α > 0 adds the Wasserstein balance penalty (CFR).
    TarNet { alpha: f64 },
}

/// Hidden-layer widths and activation; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for Arch {
    fn default() -> Self {
        Arch {
            hidden: vec![64, 64, 64],
            activation: Activation::Tanh,
        }
    }
}

/// A closed-form function of the covariates, used for frozen μ/σ/ξ heads.
/// Serializable so saved models restore their frozen heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case")]
pub enum KnownFn {
    Const { value: f64 },
    /// exp(x[0])
    ExpX0,
    /// x[0]^2
    SquareX0,
    /// coef·x + intercept
    Linear { coef: Vec<f64>, intercept: f64 },
    /// exp(coef·x + intercept)
    ExpLinear { coef: Vec<f64>, intercept: f64 },
}

impl KnownFn {
    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        match self {
            KnownFn::Const { value } => c(*value),
            KnownFn::ExpX0 => x[0].exp(),
            KnownFn::SquareX0 => x[0] * x[0],
            KnownFn::Linear { coef, intercept } => dot_affine(coef, *intercept, x),
            KnownFn::ExpLinear { coef, intercept } => dot_affine(coef, *intercept, x).exp(),
        }
    }
}

fn dot_affine<T: Scalar>(coef: &[f64], intercept: f64, x: &[T]) -> T {
    debug_assert_eq!(coef.len(), x.len());
    coef.iter()
        .zip(x)
        .fold(c(intercept), |s, (&w, &v)| s + c::<T>(w) * v)
}

/// Per-parameter head mode: learned by the network, or frozen to a known
/// function per treatment arm `[control, treated]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub mu: Option<[KnownFn; 2]>,
    pub sigma: Option<[KnownFn; 2]>,
    pub xi: Option<[KnownFn; 2]>,
}

impl HeadConfig {
    /// Everything learned.
    pub fn all_learned() -> Self {
        HeadConfig {
            mu: None,
            sigma: None,
            xi: None,
        }
    }

    /// μ and σ frozen to known functions, ξ learned — the usual setup.
    pub fn frozen_loc_scale(mu: [KnownFn; 2], sigma: [KnownFn; 2]) -> Self {
        HeadConfig {
            mu: Some(mu),
            sigma: Some(sigma),
            xi: None,
        }
    }

    pub fn n_learned(&self) -> usize {
        [self.mu.is_none(), self.sigma.is_none(), self.xi.is_none()]
            .iter()
            .filter(|&&b| b)
            .count()
    }
}

/// The networks behind a learner.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NetBank<T> {
    Single(Mlp<T>),
    PerArm(Box<[Mlp<T>; 2]>),
    Shared {
        rep: Mlp<T>,
        heads: Box<[Mlp<T>; 2]>,
    },
}

/// A learner mapping (x, t) to GEV parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGevModel<T> {
    pub kind: LearnerKind,
    pub arch: Arch,
    pub input_dim: usize,
    pub heads: HeadConfig,
    pub(crate) nets: Option<NetBank<T>>,
}

/// Build a learner with scaled-uniform weights from the seed.
pub fn build_learner<T: Scalar>(
    kind: LearnerKind,
    input_dim: usize,
    arch: &Arch,
    heads: HeadConfig,
    init_scale: f64,
    seed: u64,
) -> Result<ConditionalGevModel<T>> {
    if input_dim == 0 {
        return Err(Error::invalid("input dimension must be >= 1"));
    }
    if arch.hidden.is_empty() || arch.hidden.iter().any(|&w| w == 0) {
        return Err(Error::invalid(format!("invalid hidden widths {:?}", arch.hidden)));
    }
    if let LearnerKind::TarNet { alpha } = kind {
        if !(alpha >= 0.0) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {alpha}")));
        }
    }
    let n_out = heads.n_learned();
    let mut rng = rng_from(seed);
    let nets = if n_out == 0 {
        None
    } else {
        Some(match kind {
            LearnerKind::SLearner => {
                let mut sizes = vec![input_dim + 1];
                sizes.extend(&arch.hidden);
                sizes.push(n_out);
                NetBank::Single(Mlp::new(sizes, arch.activation, false, init_scale, &mut rng))
            }
            LearnerKind::TLearner => {
                let mut sizes = vec![input_dim];
                sizes.extend(&arch.hidden);
                sizes.push(n_out);
                let n0 = Mlp::new(sizes.clone(), arch.activation, false, init_scale, &mut rng);
                let n1 = Mlp::new(sizes, arch.activation, false, init_scale, &mut rng);
                NetBank::PerArm(Box::new([n0, n1]))
            }
            LearnerKind::TarNet { .. } => {
                // First half of the hidden stack forms the representation
                // (activated output), the rest sits in each head.
                let split = arch.hidden.len().div_ceil(2);
                let mut rep_sizes = vec![input_dim];
                rep_sizes.extend(&arch.hidden[..split]);
                let rep_width = *rep_sizes.last().unwrap();
                let rep = Mlp::new(rep_sizes, arch.activation, true, init_scale, &mut rng);
                let mut head_sizes = vec![rep_width];
                head_sizes.extend(&arch.hidden[split..]);
                head_sizes.push(n_out);
                let h0 = Mlp::new(head_sizes.clone(), arch.activation, false, init_scale, &mut rng);
                let h1 = Mlp::new(head_sizes, arch.activation, false, init_scale, &mut rng);
                NetBank::Shared {
                    rep,
                    heads: Box::new([h0, h1]),
                }
            }
        })
    };
    Ok(ConditionalGevModel {
        kind,
        arch: arch.clone(),
        input_dim,
        heads,
        nets,
    })
}

/// Output transforms keeping σ positive and ξ inside the MLE clamp.
pub(crate) fn transform_sigma<T: Scalar>(raw: T) -> T {
    softplus(raw)
}

pub(crate) fn transform_sigma_deriv<T: Scalar>(raw: T) -> T {
    sigmoid(raw)
}

pub(crate) fn transform_xi<T: Scalar>(raw: T) -> T {
    let mid = c::<T>((XI_MIN + XI_MAX) / 2.0);
    let half = c::<T>((XI_MAX - XI_MIN) / 2.0);
    mid + half * raw.tanh()
}

pub(crate) fn transform_xi_deriv<T: Scalar>(raw: T) -> T {
    let half = c::<T>((XI_MAX - XI_MIN) / 2.0);
    let t = raw.tanh();
    half * (T::one() - t * t)
}

impl<T: Scalar> ConditionalGevModel<T> {
    /// Network outputs for (x, t) plus the representation cache when the
    /// learner has one. Used by prediction and by the training loop.
    pub(crate) fn raw_outputs(&self, x: &[T], t: Treatment) -> Vec<T> {
        match &self.nets {
            None => Vec::new(),
            Some(NetBank::Single(net)) => {
                let mut input = x.to_vec();
                input.push(c(t.index() as f64));
                net.forward(&input)
            }
            Some(NetBank::PerArm(arms)) => arms[t.index()].forward(x),
            Some(NetBank::Shared { rep, heads }) => {
                let r = rep.forward(x);
                heads[t.index()].forward(&r)
            }
        }
    }

    /// Assemble GEV parameters from frozen functions and learned heads.
    /// Learned outputs are ordered (μ, σ, ξ) restricted to the learned set.
    pub(crate) fn assemble_params(&self, x: &[T], t: Treatment, raw: &[T]) -> (T, T, T) {
        let mut next = 0usize;
        let mu = match &self.heads.mu {
            Some(fns) => fns[t.index()].eval(x),
            None => {
                let v = raw[next];
                next += 1;
                v
            }
        };
        let sigma = match &self.heads.sigma {
            Some(fns) => fns[t.index()].eval(x),
            None => {
                let v = transform_sigma(raw[next]);
                next += 1;
                v
            }
        };
        let xi = match &self.heads.xi {
            Some(fns) => fns[t.index()].eval(x),
            None => transform_xi(raw[next]),
        };
        (mu, sigma, xi)
    }

    /// Predicted GEV parameters at (x, t).
    pub fn predict_params(&self, x: &[T], t: Treatment) -> Result<GevParams<T>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let raw = self.raw_outputs(x, t);
        let (mu, sigma, xi) = self.assemble_params(x, t, &raw);
        GevParams::new(mu, sigma, xi)
    }

    /// Predicted shape (tail index) at (x, t).
    pub fn predict_xi(&self, x: &[T], t: Treatment) -> Result<T> {
        Ok(self.predict_params(x, t)?.xi)
    }

    /// Networks in canonical order (the flat weight layout).
    pub(crate) fn net_list(&self) -> Vec<&Mlp<T>> {
        match &self.nets {
            None => vec![],
            Some(NetBank::Single(n)) => vec![n],
            Some(NetBank::PerArm(arms)) => vec![&arms[0], &arms[1]],
            Some(NetBank::Shared { rep, heads }) => vec![rep, &heads[0], &heads[1]],
        }
    }

    pub(crate) fn net_list_mut(&mut self) -> Vec<&mut Mlp<T>> {
        match &mut self.nets {
            None => vec![],
            Some(NetBank::Single(n)) => vec![n],
            Some(NetBank::PerArm(arms)) => {
                let [a, b] = arms.as_mut();
                vec![a, b]
            }
            Some(NetBank::Shared { rep, heads }) => {
                let [a, b] = heads.as_mut();
                vec![rep, a, b]
            }
        }
    }

    /// Total number of trainable weights.
    pub fn n_weights(&self) -> usize {
        self.net_list().iter().map(|n| n.n_params()).sum()
    }

    /// All weights concatenated in canonical order.
    pub fn flat_weights(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_weights());
        for net in self.net_list() {
            out.extend_from_slice(net.weights());
        }
        out
    }

    pub fn set_flat_weights(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.n_weights() {
            return Err(Error::DimensionMismatch {
                expected: self.n_weights(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for net in self.net_list_mut() {
            let n = net.n_params();
            net.weights_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }
}
