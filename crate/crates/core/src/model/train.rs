//! Training of conditional GEV learners: mini-batch momentum gradient
//! descent on the conditional negative log-likelihood, plus the sliced
//! Wasserstein balance penalty for TARNet-style models.

use serde::{Deserialize, Serialize};

use crate::data::{CausalDataset, CausalRecord, Treatment, ARMS};
use crate::error::{Error, Result};
use crate::gev::{logpdf_grad_raw, logpdf_raw, LOG_SENTINEL};
use crate::model::{
    transform_sigma_deriv, transform_xi_deriv, ConditionalGevModel, LearnerKind, NetBank,
};
use crate::nn::ForwardCache;
use crate::scalar::{c, to_f64, Scalar};
use crate::util::{derive_seed, rng_from};

const MOMENTUM: f64 = 0.9;
const GRAD_CLIP: f64 = 10.0;
const LR_DECAY: f64 = 0.5;
const MAX_LR_DECAYS: u32 = 8;

/// Knobs for [`train`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub step_size: f64,
    pub seed: u64,
    /// Scale of the uniform weight initialization (used when the harness
    /// builds the learner).
    pub weight_init_scale: f64,
    /// Epochs without improvement before the step size is halved.
    pub early_stop_patience: usize,
    /// Random directions per sliced-Wasserstein evaluation.
    pub ipm_projections: usize,
    /// Validate backprop against finite differences before training.
    pub check_gradients: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 128,
            step_size: 0.05,
            seed: 0,
            weight_init_scale: 1.0,
            early_stop_patience: 25,
            ipm_projections: 32,
            check_gradients: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.ipm_projections == 0 || self.early_stop_patience == 0 {
            return Err(Error::invalid("counts in TrainConfig must be positive"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step_size must be > 0"));
        }
        Ok(())
    }
}

/// A trained model plus the per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub model: ConditionalGevModel<T>,
    pub history: Vec<T>,
}

/// Mean negative conditional log-likelihood of a batch, each record
/// evaluated under its own treatment's head; out-of-support records
/// contribute the sentinel penalty.
pub fn nll_loss<T: Scalar>(model: &ConditionalGevModel<T>, batch: &[CausalRecord<T>]) -> T {
    assert!(!batch.is_empty(), "empty batch");
    let mut acc = T::zero();
    for r in batch {
        let raw = model.raw_outputs(&r.x, r.t);
        let (mu, sigma, xi) = model.assemble_params(&r.x, r.t, &raw);
        let l = logpdf_raw(mu, sigma, xi, r.y);
        acc = acc
            + if l.is_finite() && l > c(LOG_SENTINEL) {
                -l
            } else {
                c(-LOG_SENTINEL)
            };
    }
    acc / c(batch.len() as f64)
}

/// Minimize the conditional NLL (plus α·IPM for TARNet kinds) over the
/// dataset. Deterministic given the seeds in `cfg`. Returns the per-epoch
/// training loss; `epochs = 0` returns the model unchanged with an empty
/// history.
pub fn train<T: Scalar>(
    model: &ConditionalGevModel<T>,
    data: &CausalDataset<T>,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    cfg.validate()?;
    if data.dim() != model.input_dim {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim,
            got: data.dim(),
        });
    }
    if !matches!(model.kind, LearnerKind::SLearner) {
        for arm in ARMS {
            if data.count(arm) == 0 {
                return Err(Error::invalid(
                    "t-learner and TARNet require both treatment groups in the data",
                ));
            }
        }
    }
    let mut trained = model.clone();
    if cfg.epochs == 0 || trained.n_weights() == 0 {
        return Ok(Trained {
            model: trained,
            history: vec![],
        });
    }

    if cfg.check_gradients {
        let probe = &data.records()[..data.len().min(cfg.batch_size)];
        check_gradients(&trained, probe, cfg)?;
    }

    let n_weights = trained.n_weights();
    let mut velocity = vec![T::zero(); n_weights];
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.step_size;
    let mut best_loss = f64::INFINITY;
    let mut stall = 0usize;
    let mut decays = 0u32;
    let mut checkpoint = trained.flat_weights();

    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(data.len(), derive_seed(cfg.seed, epoch as u64));
        let mut epoch_loss = 0.0f64;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&CausalRecord<T>> =
                chunk.iter().map(|&i| &data.records()[i]).collect();
            let ipm_seed = derive_seed(cfg.seed, (epoch as u64) << 20 | batch_no as u64);
            let (loss, mut grad) = loss_and_grad(&trained, &batch, cfg.ipm_projections, ipm_seed);
            clip_grad(&mut grad);
            let mut off = 0;
            for net in trained.net_list_mut() {
                let w = net.weights_mut();
                for (k, wk) in w.iter_mut().enumerate() {
                    let v = velocity[off + k] * c(MOMENTUM) - grad[off + k] * c(lr);
                    velocity[off + k] = v;
                    *wk = *wk + v;
                }
                off += w.len();
            }
            epoch_loss += to_f64(loss) * chunk.len() as f64;
        }
        epoch_loss /= data.len() as f64;
        if !epoch_loss.is_finite() {
            trained.set_flat_weights(&checkpoint)?;
            return Err(Error::TrainingDiverged {
                epoch,
                last_stable: trained.flat_weights().iter().map(|&w| to_f64(w)).collect(),
            });
        }
        history.push(c(epoch_loss));
        checkpoint = trained.flat_weights();

        if epoch_loss + 1e-9 < best_loss {
            best_loss = epoch_loss;
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.early_stop_patience {
                stall = 0;
                decays += 1;
                if decays > MAX_LR_DECAYS {
                    break;
                }
                lr *= LR_DECAY;
            }
        }
    }

    Ok(Trained {
        model: trained,
        history,
    })
}

fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(seed));
    idx
}

fn clip_grad<T: Scalar>(grad: &mut [T]) {
    let norm = to_f64(grad.iter().fold(T::zero(), |s, &g| s + g * g)).sqrt();
    if norm > GRAD_CLIP {
        let scale = c::<T>(GRAD_CLIP / norm);
        for g in grad.iter_mut() {
            *g = *g * scale;
        }
    }
}

/// Mean batch loss and its gradient in the flat weight layout.
///
/// The loss is the mean sentinel NLL; TARNet kinds add α times the sliced
/// W1 between treated and control representations of the batch.
pub(crate) fn loss_and_grad<T: Scalar>(
    model: &ConditionalGevModel<T>,
    batch: &[&CausalRecord<T>],
    ipm_projections: usize,
    ipm_seed: u64,
) -> (T, Vec<T>) {
    let n = batch.len();
    let inv_n = c::<T>(1.0 / n as f64);
    let mut grad = vec![T::zero(); model.n_weights()];
    let mut loss = T::zero();

    // Per-net gradient slices: [net] or [arm0, arm1] or [rep, head0, head1].
    let offsets: Vec<usize> = {
        let mut off = 0;
        model
            .net_list()
            .iter()
            .map(|net| {
                let here = off;
                off += net.n_params();
                here
            })
            .collect()
    };

    match &model.nets {
        None => {
            for r in batch {
                let (mu, sigma, xi) = model.assemble_params(&r.x, r.t, &[]);
                loss = loss + inv_n * nll_of(mu, sigma, xi, r.y).0;
            }
            (loss, grad)
        }
        Some(NetBank::Single(net)) => {
            for r in batch {
                let mut input = r.x.clone();
                input.push(c(r.t.index() as f64));
                let cache = net.forward_cached(&input);
                let (mu, sigma, xi) = model.assemble_params(&r.x, r.t, &cache.output);
                let (l, d_params) = nll_of(mu, sigma, xi, r.y);
                loss = loss + inv_n * l;
                if let Some(d_raw) = chain_heads(model, &cache.output, d_params, inv_n) {
                    net.backward(&cache, &d_raw, &mut grad);
                }
            }
            (loss, grad)
        }
        Some(NetBank::PerArm(arms)) => {
            for r in batch {
                let arm = r.t.index();
                let cache = arms[arm].forward_cached(&r.x);
                let (mu, sigma, xi) = model.assemble_params(&r.x, r.t, &cache.output);
                let (l, d_params) = nll_of(mu, sigma, xi, r.y);
                loss = loss + inv_n * l;
                if let Some(d_raw) = chain_heads(model, &cache.output, d_params, inv_n) {
                    let g = &mut grad[offsets[arm]..offsets[arm] + arms[arm].n_params()];
                    arms[arm].backward(&cache, &d_raw, g);
                }
            }
            (loss, grad)
        }
        Some(NetBank::Shared { rep, heads }) => {
            let alpha = match model.kind {
                LearnerKind::TarNet { alpha } => alpha,
                _ => 0.0,
            };
            let mut rep_caches: Vec<ForwardCache<T>> = Vec::with_capacity(n);
            let mut head_caches: Vec<ForwardCache<T>> = Vec::with_capacity(n);
            for r in batch {
                let rc = rep.forward_cached(&r.x);
                let hc = heads[r.t.index()].forward_cached(&rc.output);
                rep_caches.push(rc);
                head_caches.push(hc);
            }
            // Balance penalty over this batch's representations.
            let ipm_grads = if alpha > 0.0 {
                let reps: Vec<Vec<T>> = rep_caches.iter().map(|rc| rc.output.clone()).collect();
                let ts: Vec<Treatment> = batch.iter().map(|r| r.t).collect();
                let (pen, grads) =
                    crate::wasserstein::ipm_penalty_with_grad(&reps, &ts, ipm_projections, ipm_seed);
                loss = loss + c::<T>(alpha) * pen.value;
                Some(grads)
            } else {
                None
            };
            for (i, r) in batch.iter().enumerate() {
                let arm = r.t.index();
                let (mu, sigma, xi) = model.assemble_params(&r.x, r.t, &head_caches[i].output);
                let (l, d_params) = nll_of(mu, sigma, xi, r.y);
                loss = loss + inv_n * l;
                let mut d_rep = vec![T::zero(); rep.output_dim()];
                if let Some(d_raw) = chain_heads(model, &head_caches[i].output, d_params, inv_n) {
                    let g = &mut grad[offsets[1 + arm]..offsets[1 + arm] + heads[arm].n_params()];
                    d_rep = heads[arm].backward(&head_caches[i], &d_raw, g);
                }
                if let Some(gs) = &ipm_grads {
                    for (d, &g) in d_rep.iter_mut().zip(&gs[i]) {
                        *d = *d + c::<T>(alpha) * g;
                    }
                }
                let g = &mut grad[offsets[0]..offsets[0] + rep.n_params()];
                rep.backward(&rep_caches[i], &d_rep, g);
            }
            (loss, grad)
        }
    }
}

/// NLL of one record with the sentinel; returns d(NLL)/d(μ, σ, ξ), zero in
/// the sentinel region (it is flat there).
fn nll_of<T: Scalar>(mu: T, sigma: T, xi: T, y: T) -> (T, [T; 3]) {
    let l = logpdf_raw(mu, sigma, xi, y);
    if l.is_finite() && l > c(LOG_SENTINEL) {
        let g = logpdf_grad_raw(mu, sigma, xi, y);
        (-l, [-g[0], -g[1], -g[2]])
    } else {
        (c(-LOG_SENTINEL), [T::zero(); 3])
    }
}

/// Chain d(NLL)/d(μ, σ, ξ) through the head output transforms; None when the
/// record carries no gradient (sentinel region).
fn chain_heads<T: Scalar>(
    model: &ConditionalGevModel<T>,
    raw: &[T],
    d_params: [T; 3],
    scale: T,
) -> Option<Vec<T>> {
    if d_params.iter().all(|d| d.is_zero()) {
        return None;
    }
    let mut d_raw = Vec::with_capacity(raw.len());
    let mut next = 0usize;
    if model.heads.mu.is_none() {
        d_raw.push(scale * d_params[0]);
        next += 1;
    }
    if model.heads.sigma.is_none() {
        d_raw.push(scale * d_params[1] * transform_sigma_deriv(raw[next]));
        next += 1;
    }
    if model.heads.xi.is_none() {
        d_raw.push(scale * d_params[2] * transform_xi_deriv(raw[next]));
    }
    Some(d_raw)
}

/// Central-difference validation of the batch gradient on a few weights.
fn check_gradients<T: Scalar>(
    model: &ConditionalGevModel<T>,
    probe: &[CausalRecord<T>],
    cfg: &TrainConfig,
) -> Result<()> {
    let refs: Vec<&CausalRecord<T>> = probe.iter().collect();
    let seed = derive_seed(cfg.seed, u64::MAX);
    let (_, grad) = loss_and_grad(model, &refs, cfg.ipm_projections, seed);
    let n = model.n_weights();
    let picks: Vec<usize> = (0..5).map(|k| (k * n / 5 + k) % n).collect();
    for &i in &picks {
        let h = 1e-5;
        let mut plus = model.clone();
        let mut minus = model.clone();
        bump_weight(&mut plus, i, c(h));
        bump_weight(&mut minus, i, c(-h));
        let (fp, _) = loss_and_grad(&plus, &refs, cfg.ipm_projections, seed);
        let (fm, _) = loss_and_grad(&minus, &refs, cfg.ipm_projections, seed);
        let (fp, fm) = (to_f64(fp), to_f64(fm));
        // A sentinel flip inside the stencil makes the comparison meaningless.
        if (fp - fm).abs() > 1e6 {
            continue;
        }
        let fd = (fp - fm) / (2.0 * h);
        let an = to_f64(grad[i]);
        let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1.0);
        if rel > 1e-3 {
            return Err(Error::GradientCheck {
                index: i,
                analytic: an,
                numeric: fd,
            });
        }
    }
    Ok(())
}

fn bump_weight<T: Scalar>(model: &mut ConditionalGevModel<T>, index: usize, delta: T) {
    let mut off = 0;
    for net in model.net_list_mut() {
        let n = net.n_params();
        if index < off + n {
            net.weights_mut()[index - off] = net.weights_mut()[index - off] + delta;
            return;
        }
        off += n;
    }
    panic!("weight index out of range");
}
