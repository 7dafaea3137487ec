//! Forward and backward passes of the follower network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::arch::{Architecture, Layout, NUM_ACTIONS};
use super::ops::{
    conv_backward, conv_forward, conv_out_side, gru_backward, gru_forward, linear_backward, linear_forward, relu,
    relu_backward, GruCache,
};
use super::PolicyError;

pub type Logits = [f64; NUM_ACTIONS];

/// Flat parameter vector bound to its architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    layout: Layout,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub logits: Logits,
    pub value: f64,
    /// Recurrent state after this step (empty for feed-forward variants).
    pub memory: Vec<f64>,
}

impl PolicyOutput {
    pub fn probabilities(&self) -> Logits {
        softmax(&self.logits)
    }
}

pub fn softmax(logits: &Logits) -> Logits {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; NUM_ACTIONS];
    let mut sum = 0.0;
    for (pi, &l) in p.iter_mut().zip(logits) {
        *pi = (l - m).exp();
        sum += *pi;
    }
    p.iter_mut().for_each(|v| *v /= sum);
    p
}

pub fn log_softmax(logits: &Logits) -> Logits {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln();
    let mut out = [0.0; NUM_ACTIONS];
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = l - lse;
    }
    out
}

#[derive(Clone, Debug)]
struct EncoderCache {
    input: Vec<f64>,
    /// (block input, first conv pre-activation) per residual block.
    blocks: Vec<(Vec<f64>, Vec<f64>)>,
    top: Vec<f64>,
    projection_pre: Option<Vec<f64>>,
    /// (layer input, pre-activation) per MLP layer.
    mlp: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug)]
struct StepCache {
    encoder: EncoderCache,
    gru: Option<GruCache>,
    core: Vec<f64>,
}

/// Activations kept from [`PolicyParams::forward_sequence`] for backpropagation.
#[derive(Clone, Debug)]
pub struct SequenceCache {
    steps: Vec<StepCache>,
    resets: Vec<bool>,
}

impl PolicyParams {
    /// Wrap a parameter vector; the length must match the architecture, and the
    /// named variants must match their published sizes.
    pub fn new(arch: Architecture, values: Vec<f64>) -> Result<Self, PolicyError> {
        let layout = arch.layout();
        if let Some(pinned) = arch.pinned_param_count() {
            if layout.total != pinned {
                return Err(PolicyError::ParamCount {
                    arch: arch.name.clone(),
                    expected: pinned,
                    got: layout.total,
                });
            }
        }
        if values.len() != layout.total {
            return Err(PolicyError::ParamCount {
                arch: arch.name.clone(),
                expected: layout.total,
                got: values.len(),
            });
        }
        Ok(Self { arch, layout, values })
    }

    pub fn zeros(arch: Architecture) -> Result<Self, PolicyError> {
        let n = arch.param_count();
        Self::new(arch, vec![0.0; n])
    }

    /// Orthogonal weight init (actor head scaled by 0.01), zero biases.
    pub fn init_orthogonal(arch: Architecture, seed: u64) -> Result<Self, PolicyError> {
        let mut p = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = p.layout.clone();
        let mut fill = |slot: super::arch::Slot, rows: usize, gain: f64, values: &mut [f64]| {
            let cols = slot.len / rows;
            orthogonal(&mut values[slot.range()], rows, cols, gain, &mut rng);
        };
        let convs = std::iter::once(&layout.stem)
            .chain(layout.blocks.iter().flat_map(|(a, b)| [a, b]))
            .chain(layout.projection.iter());
        for c in convs {
            fill(c.weight, c.out_ch, 1.0, &mut p.values);
        }
        for l in &layout.mlp {
            fill(l.weight, l.outputs, 1.0, &mut p.values);
        }
        if let Some(g) = &layout.gru {
            fill(g.w_ih, 3 * g.hidden, 1.0, &mut p.values);
            fill(g.w_hh, 3 * g.hidden, 1.0, &mut p.values);
        }
        fill(layout.actor.weight, NUM_ACTIONS, 0.01, &mut p.values);
        fill(layout.critic.weight, 1, 1.0, &mut p.values);
        Ok(p)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn initial_memory(&self) -> Vec<f64> {
        vec![0.0; self.arch.memory_size()]
    }

    fn check_input(&self, input: &[f64]) -> Result<(), PolicyError> {
        if input.len() != self.arch.input_len() {
            return Err(PolicyError::InputShape {
                expected: self.arch.input_len(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// One decision step. Feed-forward variants ignore `memory`.
    pub fn forward(&self, input: &[f64], memory: &[f64]) -> Result<PolicyOutput, PolicyError> {
        self.check_input(input)?;
        let h0 = self.checked_memory(memory)?;
        let (feat, _) = self.encode(input);
        Ok(self.core_and_heads(feat, &h0).0)
    }

    fn checked_memory(&self, memory: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let m = self.arch.memory_size();
        if m == 0 {
            return Ok(Vec::new());
        }
        if memory.len() != m {
            return Err(PolicyError::MemoryShape {
                expected: m,
                got: memory.len(),
            });
        }
        Ok(memory.to_vec())
    }

    /// Run a contiguous segment from `h0`. `resets[t]` zeroes the memory before step `t`.
    pub fn forward_sequence(
        &self,
        inputs: &[&[f64]],
        h0: &[f64],
        resets: &[bool],
    ) -> Result<(Vec<PolicyOutput>, SequenceCache), PolicyError> {
        assert_eq!(inputs.len(), resets.len());
        let mut h = self.checked_memory(h0)?;
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut steps = Vec::with_capacity(inputs.len());
        for (x, &reset) in inputs.iter().zip(resets) {
            self.check_input(x)?;
            if reset {
                h.iter_mut().for_each(|v| *v = 0.0);
            }
            let (feat, encoder) = self.encode(x);
            let (out, gru, core) = self.core_and_heads(feat, &h);
            h = out.memory.clone();
            outputs.push(out);
            steps.push(StepCache { encoder, gru, core });
        }
        Ok((
            outputs,
            SequenceCache {
                steps,
                resets: resets.to_vec(),
            },
        ))
    }

    /// Accumulate parameter gradients given loss gradients w.r.t. each step's logits and value.
    /// The initial memory is treated as a constant.
    pub fn backward_sequence(&self, cache: &SequenceCache, d_logits: &[Logits], d_values: &[f64], grads: &mut [f64]) {
        assert_eq!(grads.len(), self.values.len());
        let mut dh_next: Option<Vec<f64>> = None;
        for t in (0..cache.steps.len()).rev() {
            let step = &cache.steps[t];
            let mut d_core = self.heads_backward(&step.core, &d_logits[t], d_values[t], grads);
            if let Some(dh) = dh_next.take() {
                for (a, b) in d_core.iter_mut().zip(dh) {
                    *a += b;
                }
            }
            let d_feat = match (&self.layout.gru, &step.gru) {
                (Some(g), Some(gc)) => {
                    let (dx, dh) = gru_backward(&self.values, g, gc, &d_core, grads);
                    if !cache.resets[t] {
                        dh_next = Some(dh);
                    }
                    dx
                }
                _ => d_core,
            };
            self.encoder_backward(&step.encoder, d_feat, grads);
        }
    }

    fn encode(&self, input: &[f64]) -> (Vec<f64>, EncoderCache) {
        let p = &self.values;
        let l = &self.layout;
        let side = self.arch.input_size;
        let mut a = conv_forward(p, &l.stem, input, side);
        let mut blocks = Vec::with_capacity(l.blocks.len());
        for (c1, c2) in &l.blocks {
            let h1 = conv_forward(p, c1, &relu(&a), side);
            let h2 = conv_forward(p, c2, &relu(&h1), side);
            let next: Vec<f64> = a.iter().zip(&h2).map(|(x, y)| x + y).collect();
            blocks.push((std::mem::replace(&mut a, next), h1));
        }
        let mut z = relu(&a);
        let projection_pre = l.projection.as_ref().map(|pc| {
            let pre = conv_forward(p, pc, &z, side);
            z = relu(&pre);
            pre
        });
        let mut mlp = Vec::with_capacity(l.mlp.len());
        for lin in &l.mlp {
            let pre = linear_forward(p, lin, &z);
            let next = relu(&pre);
            mlp.push((std::mem::replace(&mut z, next), pre));
        }
        (
            z,
            EncoderCache {
                input: input.to_vec(),
                blocks,
                top: a,
                projection_pre,
                mlp,
            },
        )
    }

    fn encoder_backward(&self, cache: &EncoderCache, d_feat: Vec<f64>, grads: &mut [f64]) {
        let p = &self.values;
        let l = &self.layout;
        let side = self.arch.input_size;
        let mut d = d_feat;
        for (lin, (x, pre)) in l.mlp.iter().zip(&cache.mlp).rev() {
            relu_backward(pre, &mut d);
            d = linear_backward(p, lin, x, &d, grads);
        }
        if let (Some(pc), Some(pre)) = (&l.projection, &cache.projection_pre) {
            relu_backward(pre, &mut d);
            d = conv_backward(p, pc, &relu(&cache.top), side, &d, grads);
            debug_assert_eq!(conv_out_side(side, pc), self.arch.feature_side());
        }
        relu_backward(&cache.top, &mut d);
        for ((c1, c2), (a_in, h1)) in l.blocks.iter().zip(&cache.blocks).rev() {
            let mut d_r2 = conv_backward(p, c2, &relu(h1), side, &d, grads);
            relu_backward(h1, &mut d_r2);
            let mut d_r1 = conv_backward(p, c1, &relu(a_in), side, &d_r2, grads);
            relu_backward(a_in, &mut d_r1);
            for (a, b) in d.iter_mut().zip(&d_r1) {
                *a += b;
            }
        }
        conv_backward(p, &l.stem, &cache.input, side, &d, grads);
    }

    fn core_and_heads(&self, feat: Vec<f64>, h: &[f64]) -> (PolicyOutput, Option<GruCache>, Vec<f64>) {
        let (core, gru) = match &self.layout.gru {
            Some(g) => {
                let (out, cache) = gru_forward(&self.values, g, &feat, h);
                (out, Some(cache))
            }
            None => (feat, None),
        };
        let raw = linear_forward(&self.values, &self.layout.actor, &core);
        let mut logits = [0.0; NUM_ACTIONS];
        logits.copy_from_slice(&raw);
        let value = linear_forward(&self.values, &self.layout.critic, &core)[0];
        let memory = if gru.is_some() { core.clone() } else { Vec::new() };
        (PolicyOutput { logits, value, memory }, gru, core)
    }

    fn heads_backward(&self, core: &[f64], d_logits: &Logits, d_value: f64, grads: &mut [f64]) -> Vec<f64> {
        let mut d = linear_backward(&self.values, &self.layout.actor, core, d_logits, grads);
        let dv = linear_backward(&self.values, &self.layout.critic, core, &[d_value], grads);
        for (a, b) in d.iter_mut().zip(dv) {
            *a += b;
        }
        d
    }
}

/// Fill a `rows x cols` matrix with (semi-)orthogonal rows or columns scaled by `gain`.
fn orthogonal(out: &mut [f64], rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) {
    let (m, n) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    for (i, b) in basis.iter().enumerate() {
        for (j, &x) in b.iter().enumerate() {
            let (r, c) = if rows <= cols { (i, j) } else { (j, i) };
            out[r * cols + c] = gain * x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_uniform_policy() {
        for arch in [Architecture::follower_lite(), Architecture::follower()] {
            let p = PolicyParams::zeros(arch).unwrap();
            let x = vec![1.0; p.arch().input_len()];
            let out = p.forward(&x, &p.initial_memory()).unwrap();
            assert_eq!(out.logits, [0.0; 5]);
            assert_eq!(out.value, 0.0);
            for q in out.probabilities() {
                assert!((q - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let p = PolicyParams::zeros(Architecture::follower_lite()).unwrap();
        assert!(matches!(p.forward(&[0.0; 3], &[]), Err(PolicyError::InputShape { .. })));
        assert!(matches!(
            PolicyParams::new(Architecture::follower_lite(), vec![0.0; 10]),
            Err(PolicyError::ParamCount {
                expected: 3678,
                got: 10,
                ..
            })
        ));
    }

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (rows, cols) = (4, 9);
        let mut w = vec![0.0; rows * cols];
        orthogonal(&mut w, rows, cols, 1.0, &mut rng);
        for i in 0..rows {
            for j in 0..rows {
                let dot: f64 = (0..cols).map(|k| w[i * cols + k] * w[j * cols + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
        let mut tall = vec![0.0; 9 * 4];
        orthogonal(&mut tall, 9, 4, 2.0, &mut rng);
        for i in 0..4 {
            let norm: f64 = (0..9).map(|k| tall[k * 4 + i].powi(2)).sum();
            assert!((norm - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lite_ignores_memory_and_is_pure() {
        let p = PolicyParams::init_orthogonal(Architecture::follower_lite(), 1).unwrap();
        let x: Vec<f64> = (0..p.arch().input_len()).map(|i| ((i * 7) % 3) as f64 * 0.5).collect();
        let a = p.forward(&x, &[]).unwrap();
        let b = p.forward(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(a, b);
        assert!(a.logits.iter().all(|l| l.is_finite()) && a.value.is_finite());
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0, 0.0, -1000.0, 999.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
        let lp = log_softmax(&[1000.0, 0.0, -1000.0, 999.0, 0.0]);
        assert!(lp.iter().all(|v| v.is_finite()));
    }
}
