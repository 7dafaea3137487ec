/// Generalized advantage estimation over one trajectory.
///
/// `dones[t]` marks that the episode ended after step `t`; `bootstrap` is the
/// value of the state following the last step (ignored if that step is terminal).
/// Returns `(advantages, returns)` with `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "misaligned trajectory arrays");
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = bootstrap;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}
