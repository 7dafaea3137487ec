//! Clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::adam::{clip_grad_norm, Adam};
use super::gae::compute_gae;
use super::rollout::RolloutBuffer;
use super::{TrainConfig, TrainError};
use crate::policy::{log_softmax, Logits, PolicyParams, NUM_ACTIONS};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossCoefs {
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl LossCoefs {
    pub fn from_config(c: &TrainConfig) -> Self {
        Self {
            clip_ratio: c.clip_ratio,
            value_coef: c.value_loss_coef,
            entropy_coef: c.entropy_coef,
        }
    }
}

/// Loss of one transition and its gradient w.r.t. the logits and the value output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleLoss {
    pub loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clipped: bool,
    pub d_logits: Logits,
    pub d_value: f64,
}

/// `-min(ρA, clip(ρ)A) + c_v·½(V-R)² - c_e·H` for one transition.
pub fn sample_loss(
    logits: &Logits,
    value: f64,
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    ret: f64,
    coefs: &LossCoefs,
) -> SampleLoss {
    let logp = log_softmax(logits);
    let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
    let ratio = (logp[action] - old_log_prob).exp();
    let eps = coefs.clip_ratio;
    let unclipped = ratio * advantage;
    let clipped_obj = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    let surrogate = -unclipped.min(clipped_obj);
    // The gradient flows only when the unclipped term is the active minimum.
    let d_logp = if unclipped <= clipped_obj { -unclipped } else { 0.0 };

    let entropy: f64 = -p.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
    let diff = value - ret;
    let value_loss = 0.5 * diff * diff;

    let mut d_logits = [0.0; NUM_ACTIONS];
    for j in 0..NUM_ACTIONS {
        let onehot = if j == action { 1.0 } else { 0.0 };
        let d_entropy = -p[j] * (logp[j] + entropy);
        d_logits[j] = d_logp * (onehot - p[j]) - coefs.entropy_coef * d_entropy;
    }
    SampleLoss {
        loss: surrogate + coefs.value_coef * value_loss - coefs.entropy_coef * entropy,
        surrogate,
        value_loss,
        entropy,
        clipped: (ratio - 1.0).abs() > eps,
        d_logits,
        d_value: coefs.value_coef * diff,
    }
}

/// Zero mean, unit (population) standard deviation.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// GAE advantages and returns for the whole buffer, time-major like the buffer.
pub fn buffer_advantages(buf: &RolloutBuffer, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; buf.len()];
    let mut ret = vec![0.0; buf.len()];
    for lane in 0..buf.lanes {
        let (r, v, d) = buf.lane_series(lane);
        let (a, g) = compute_gae(&r, &v, &d, buf.bootstrap[lane], gamma, lambda);
        for t in 0..buf.steps {
            let i = buf.index(t, lane);
            adv[i] = a[t];
            ret[i] = g[t];
        }
    }
    (adv, ret)
}

/// A contiguous run of `chunk_len` steps of one lane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub lane: usize,
    pub index: usize,
}

pub fn all_chunks(buf: &RolloutBuffer) -> Vec<Chunk> {
    let per_lane = buf.steps / buf.chunk_len;
    (0..per_lane)
        .flat_map(|index| (0..buf.lanes).map(move |lane| Chunk { lane, index }))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub loss: f64,
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub samples: usize,
}

impl PpoStats {
    fn absorb(&mut self, other: &PpoStats) {
        let (a, b) = (self.samples as f64, other.samples as f64);
        let n = a + b;
        if n == 0.0 {
            return;
        }
        let mix = |x: f64, y: f64| (x * a + y * b) / n;
        self.loss = mix(self.loss, other.loss);
        self.surrogate_loss = mix(self.surrogate_loss, other.surrogate_loss);
        self.value_loss = mix(self.value_loss, other.value_loss);
        self.entropy = mix(self.entropy, other.entropy);
        self.clip_fraction = mix(self.clip_fraction, other.clip_fraction);
        self.samples += other.samples;
    }
}

/// Mean loss over the transitions of `chunks`, and, when `grads` is given, its
/// gradient accumulated into it. `advantages` must already be normalized and
/// is indexed like the buffer.
pub fn minibatch_loss(
    params: &PolicyParams,
    buf: &RolloutBuffer,
    chunks: &[Chunk],
    advantages: &[f64],
    returns: &[f64],
    coefs: &LossCoefs,
    mut grads: Option<&mut [f64]>,
) -> Result<PpoStats, TrainError> {
    let n = (chunks.len() * buf.chunk_len) as f64;
    let mut stats = PpoStats::default();
    let mut clipped = 0usize;
    for c in chunks {
        let idx: Vec<usize> = (0..buf.chunk_len)
            .map(|k| buf.index(c.index * buf.chunk_len + k, c.lane))
            .collect();
        let inputs: Vec<&[f64]> = idx.iter().map(|&i| buf.input(i)).collect();
        let resets: Vec<bool> = idx.iter().map(|&i| buf.resets[i]).collect();
        let h0 = buf.chunk_memory(c.index, c.lane);
        let (outputs, cache) = params.forward_sequence(&inputs, h0, &resets)?;
        let mut d_logits = Vec::with_capacity(idx.len());
        let mut d_values = Vec::with_capacity(idx.len());
        for (&i, out) in idx.iter().zip(&outputs) {
            let s = sample_loss(
                &out.logits,
                out.value,
                buf.actions[i] as usize,
                buf.log_probs[i],
                advantages[i],
                returns[i],
                coefs,
            );
            if !s.loss.is_finite() {
                return Err(TrainError::NonFinite(format!(
                    "loss {} at lane {} step {} (logits {:?}, value {}, advantage {}, return {})",
                    s.loss,
                    c.lane,
                    i / buf.lanes,
                    out.logits,
                    out.value,
                    advantages[i],
                    returns[i]
                )));
            }
            stats.loss += s.loss / n;
            stats.surrogate_loss += s.surrogate / n;
            stats.value_loss += s.value_loss / n;
            stats.entropy += s.entropy / n;
            clipped += usize::from(s.clipped);
            d_logits.push(s.d_logits.map(|g| g / n));
            d_values.push(s.d_value / n);
        }
        if let Some(g) = grads.as_deref_mut() {
            params.backward_sequence(&cache, &d_logits, &d_values, g);
        }
    }
    stats.clip_fraction = clipped as f64 / n;
    stats.samples = n as usize;
    Ok(stats)
}

/// Normalize `raw` advantages over the transitions of `chunks`, writing into a buffer-indexed copy.
pub fn normalized_for(buf: &RolloutBuffer, chunks: &[Chunk], raw: &[f64]) -> Vec<f64> {
    let idx: Vec<usize> = chunks
        .iter()
        .flat_map(|c| (0..buf.chunk_len).map(move |k| buf.index(c.index * buf.chunk_len + k, c.lane)))
        .collect();
    let values: Vec<f64> = idx.iter().map(|&i| raw[i]).collect();
    let mut out = raw.to_vec();
    for (&i, v) in idx.iter().zip(normalize_advantages(&values)) {
        out[i] = v;
    }
    out
}

/// Optimize `params` on `buf` for the configured epochs with shuffled minibatches.
pub fn ppo_update(
    params: &mut PolicyParams,
    buf: &RolloutBuffer,
    config: &TrainConfig,
    adam: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<PpoStats, TrainError> {
    let coefs = LossCoefs::from_config(config);
    let (adv, ret) = buffer_advantages(buf, config.gamma, config.gae_lambda);
    let mut chunks = all_chunks(buf);
    let per_batch = (config.batch_size / buf.chunk_len).max(1);
    let mut total = PpoStats::default();
    let mut grads = vec![0.0; params.len()];
    for _ in 0..config.epochs {
        chunks.shuffle(rng);
        for batch in chunks.chunks(per_batch) {
            let norm = normalized_for(buf, batch, &adv);
            grads.iter_mut().for_each(|g| *g = 0.0);
            let stats = minibatch_loss(params, buf, batch, &norm, &ret, &coefs, Some(&mut grads))?;
            if grads.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::NonFinite(format!("gradient after loss {}", stats.loss)));
            }
            clip_grad_norm(&mut grads, config.max_grad_norm);
            adam.step(params.values_mut(), &grads);
            total.absorb(&stats);
        }
    }
    Ok(total)
}
