//! Central finite-difference checks of the policy and PPO gradients.

use follower::policy::{log_softmax, Architecture, Logits, PolicyParams, Projection, NUM_ACTIONS};
use follower::train::{minibatch_loss, Chunk, LossCoefs, RolloutBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-7;
pub const REL_TOL: f64 = 1e-4;

/// Follower-shaped network (several blocks, MLP, GRU) at a size that is cheap to probe.
pub fn small_recurrent() -> Architecture {
    Architecture {
        name: "small-recurrent".into(),
        input_size: 5,
        filters: 4,
        res_blocks: 2,
        projection: None,
        mlp: vec![12],
        gru_hidden: Some(6),
    }
}

/// FollowerLite-shaped network with a biased projection and a wider GRU-free head.
pub fn small_projected() -> Architecture {
    Architecture {
        name: "small-projected".into(),
        input_size: 5,
        filters: 3,
        res_blocks: 1,
        projection: Some(Projection {
            filters: 2,
            kernel: 3,
            stride: 2,
            padding: 1,
            bias: true,
        }),
        mlp: vec![7],
        gru_hidden: None,
    }
}

/// Perturbed copy of `base` with a sharpened actor head so that logits are not uniform.
pub fn jitter(base: &PolicyParams, rng: &mut ChaCha8Rng) -> PolicyParams {
    let mut p = base.clone();
    let actor = p.layout().actor.weight.range();
    for v in p.values_mut().iter_mut() {
        *v += 0.05 * rng.sample::<f64, _>(StandardNormal);
    }
    for v in &mut p.values_mut()[actor] {
        *v *= 20.0;
    }
    p
}

#[derive(Clone, Copy, Debug)]
pub enum LossKind {
    LogProb,
    ValueLoss,
    Ppo,
}

pub const ALL_LOSSES: [LossKind; 3] = [LossKind::LogProb, LossKind::ValueLoss, LossKind::Ppo];

/// A short random trajectory: inputs, actions, targets and stored log-probs.
pub struct Instance {
    pub buf: RolloutBuffer,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

pub fn instance(params: &PolicyParams, rng: &mut ChaCha8Rng) -> Instance {
    let arch = params.arch();
    let chunk_len = if arch.is_recurrent() { 3 } else { 1 };
    let lanes = 2;
    let steps = chunk_len;
    let n = steps * lanes;
    let input_len = arch.input_len();
    let memory_size = arch.memory_size();
    let mut buf = RolloutBuffer {
        steps,
        lanes,
        input_len,
        memory_size,
        chunk_len,
        inputs: (0..n * input_len).map(|_| rng.gen::<f64>()).collect(),
        actions: (0..n).map(|_| rng.gen_range(0..NUM_ACTIONS as u8)).collect(),
        log_probs: vec![0.0; n],
        values: vec![0.0; n],
        rewards: vec![0.0; n],
        dones: vec![false; n],
        resets: (0..n).map(|i| i >= lanes && rng.gen_bool(0.3)).collect(),
        memories: (0..lanes * memory_size).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        bootstrap: vec![0.0; lanes],
        goal_events: 0,
    };
    // Behaviour log-probs near the current ones, so that some ratios fall outside the clip range.
    for lane in 0..lanes {
        let idx: Vec<usize> = (0..steps).map(|t| buf.index(t, lane)).collect();
        let inputs: Vec<&[f64]> = idx.iter().map(|&i| buf.input(i)).collect();
        let resets: Vec<bool> = idx.iter().map(|&i| buf.resets[i]).collect();
        let (outs, _) = params
            .forward_sequence(&inputs, buf.chunk_memory(0, lane), &resets)
            .unwrap();
        for (&i, o) in idx.iter().zip(&outs) {
            buf.log_probs[i] = log_softmax(&o.logits)[buf.actions[i] as usize] + rng.gen_range(-0.4..0.4);
        }
    }
    let advantages = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let returns = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Instance {
        buf,
        advantages,
        returns,
    }
}

pub fn coefs() -> LossCoefs {
    LossCoefs {
        clip_ratio: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.0157,
    }
}

/// Loss value, and its gradient when `grads` is given.
pub fn loss(params: &PolicyParams, inst: &Instance, kind: LossKind, grads: Option<&mut [f64]>) -> f64 {
    let buf = &inst.buf;
    if let LossKind::Ppo = kind {
        let chunks: Vec<Chunk> = (0..buf.lanes).map(|lane| Chunk { lane, index: 0 }).collect();
        return minibatch_loss(params, buf, &chunks, &inst.advantages, &inst.returns, &coefs(), grads)
            .unwrap()
            .loss;
    }
    let mut total = 0.0;
    let mut grads = grads;
    for lane in 0..buf.lanes {
        let idx: Vec<usize> = (0..buf.steps).map(|t| buf.index(t, lane)).collect();
        let inputs: Vec<&[f64]> = idx.iter().map(|&i| buf.input(i)).collect();
        let resets: Vec<bool> = idx.iter().map(|&i| buf.resets[i]).collect();
        let (outs, cache) = params
            .forward_sequence(&inputs, buf.chunk_memory(0, lane), &resets)
            .unwrap();
        let mut d_logits: Vec<Logits> = Vec::new();
        let mut d_values = Vec::new();
        for (&i, o) in idx.iter().zip(&outs) {
            match kind {
                LossKind::LogProb => {
                    let lp = log_softmax(&o.logits);
                    let a = buf.actions[i] as usize;
                    total += lp[a];
                    let mut d = [0.0; NUM_ACTIONS];
                    for j in 0..NUM_ACTIONS {
                        d[j] = f64::from(u8::from(j == a)) - lp[j].exp();
                    }
                    d_logits.push(d);
                    d_values.push(0.0);
                }
                LossKind::ValueLoss => {
                    let diff = o.value - inst.returns[i];
                    total += 0.5 * diff * diff;
                    d_logits.push([0.0; NUM_ACTIONS]);
                    d_values.push(diff);
                }
                LossKind::Ppo => unreachable!(),
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            params.backward_sequence(&cache, &d_logits, &d_values, g);
        }
    }
    total
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn shifted(params: &PolicyParams, dir: &[(usize, f64)], step: f64) -> PolicyParams {
    let mut p = params.clone();
    for &(i, d) in dir {
        p.values_mut()[i] += step * d;
    }
    p
}

/// Worst relative error over a gradient-aligned random direction and the three
/// largest gradient coordinates.
pub fn check(params: &PolicyParams, inst: &Instance, kind: LossKind, rng: &mut ChaCha8Rng) -> f64 {
    let mut g = vec![0.0; params.len()];
    loss(params, inst, kind, Some(&mut g));
    let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let noise: Vec<f64> = (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let nnorm = noise.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut dir: Vec<(usize, f64)> = g
        .iter()
        .zip(&noise)
        .enumerate()
        .map(|(i, (gi, ni))| (i, gi / gnorm.max(1e-300) + ni / nnorm))
        .collect();
    let dnorm = dir.iter().map(|(_, d)| d * d).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|(_, d)| *d /= dnorm);

    let mut probes: Vec<Vec<(usize, f64)>> = vec![dir];
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()));
    probes.extend(order.iter().take(3).map(|&i| vec![(i, 1.0)]));

    let mut worst: f64 = 0.0;
    for probe in probes {
        let analytic: f64 = probe.iter().map(|&(i, d)| g[i] * d).sum();
        let plus = loss(&shifted(params, &probe, FD_STEP), inst, kind, None);
        let minus = loss(&shifted(params, &probe, -FD_STEP), inst, kind, None);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic, numeric));
    }
    worst
}

/// Run `instances` random checks of every loss kind; returns the worst relative error.
pub fn sweep(base: &PolicyParams, instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let params = jitter(base, &mut rng);
        let inst = instance(&params, &mut rng);
        for kind in ALL_LOSSES {
            worst = worst.max(check(&params, &inst, kind, &mut rng));
        }
    }
    worst
}
