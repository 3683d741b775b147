//! Clipped-surrogate policy optimization (PPO) over [`PolicyParams`].
//!
//! The objective maximized per minibatch is
//!
//! ```text
//! mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) - value_coef * mean((V - R)^2) + entropy_coef * mean(H)
//! ```
//!
//! with `r = exp(logp_new - logp_old)`, advantages from GAE normalized per
//! minibatch, `H` the summed entropy of all heads. The gradient is computed
//! analytically and applied with Adam after global-norm clipping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{argmax, entropy, log_softmax, sample_categorical, Adam, HeadLayout, PolicyParams};
use crate::rng::{derive_seed, rng_from_seed, SimRng};

pub mod corridor;

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Episodic environment with a flat observation and a multi-discrete action.
pub trait Environment {
    fn observation_len(&self) -> usize;
    fn action_components(&self) -> Vec<usize>;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[usize]) -> Result<Step>;
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub rollout_length: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub hidden: usize,
    pub head_layout: HeadLayout,
    pub total_steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 2.5e-4,
            rollout_length: 256,
            epochs: 4,
            minibatch_size: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            hidden: 64,
            head_layout: HeadLayout::Factorized,
            total_steps: 200_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("clip_ratio", self.clip_ratio),
            ("learning_rate", self.learning_rate),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("value_coef", self.value_coef)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Input(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return Err(Error::Input("gamma and gae_lambda must be <= 1".into()));
        }
        for (name, v) in [
            ("rollout_length", self.rollout_length),
            ("epochs", self.epochs),
            ("minibatch_size", self.minibatch_size),
            ("hidden", self.hidden),
            ("total_steps", self.total_steps),
        ] {
            if v == 0 {
                return Err(Error::Input(format!("{name} must be positive")));
            }
        }
        if self.rollout_length % self.minibatch_size != 0 {
            return Err(Error::Input(format!(
                "minibatch_size {} must divide rollout_length {}",
                self.minibatch_size, self.rollout_length
            )));
        }
        Ok(())
    }
}

/// Collected transitions of one rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<usize>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Value estimate of the state after the last transition (0 if it ended an episode).
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, action: Vec<usize>, log_prob: f64, reward: f64, value: f64, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
    }
}

/// Generalized advantage estimation.
///
/// `delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t` with
/// `V_T = bootstrap`, and `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`.
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

fn joint_index(action: &[usize], components: &[usize]) -> usize {
    action.iter().zip(components).fold(0, |acc, (a, n)| acc * n + a)
}

fn split_joint(mut index: usize, components: &[usize]) -> Vec<usize> {
    let mut out = vec![0; components.len()];
    for (slot, n) in out.iter_mut().zip(components).rev() {
        *slot = index % n;
        index /= n;
    }
    out
}

/// Per-head log-probabilities plus the value for one observation.
pub fn head_log_probs(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<Vec<f64>>, f64)> {
    let out = params.forward(obs)?;
    Ok((out.logits.iter().map(|l| log_softmax(l)).collect(), out.value))
}

/// Indices chosen in each head for a component-wise action.
fn head_choices(params: &PolicyParams, action: &[usize]) -> Vec<usize> {
    match params.layout {
        HeadLayout::Factorized => action.to_vec(),
        HeadLayout::Joint => vec![joint_index(action, &params.components)],
    }
}

pub fn action_log_prob(params: &PolicyParams, obs: &[f64], action: &[usize]) -> Result<f64> {
    check_action(params, action)?;
    let (lps, _) = head_log_probs(params, obs)?;
    Ok(head_choices(params, action)
        .iter()
        .zip(&lps)
        .map(|(&a, lp)| lp[a])
        .sum())
}

fn check_action(params: &PolicyParams, action: &[usize]) -> Result<()> {
    if action.len() != params.components.len() || action.iter().zip(&params.components).any(|(a, n)| a >= n) {
        return Err(Error::Action(format!(
            "action {action:?} does not fit components {:?}",
            params.components
        )));
    }
    Ok(())
}

/// Draws an action; returns it with its log-probability and the value estimate.
pub fn sample_action(params: &PolicyParams, obs: &[f64], rng: &mut SimRng) -> Result<(Vec<usize>, f64, f64)> {
    let (lps, value) = head_log_probs(params, obs)?;
    let picks: Vec<usize> = lps.iter().map(|lp| sample_categorical(lp, rng)).collect();
    let log_prob = picks.iter().zip(&lps).map(|(&a, lp)| lp[a]).sum();
    let action = match params.layout {
        HeadLayout::Factorized => picks,
        HeadLayout::Joint => split_joint(picks[0], &params.components),
    };
    Ok((action, log_prob, value))
}

/// Per-component argmax; ties go to the lowest index.
pub fn act_greedy(params: &PolicyParams, obs: &[f64]) -> Result<Vec<usize>> {
    let out = params.forward(obs)?;
    let picks: Vec<usize> = out.logits.iter().map(|l| argmax(l)).collect();
    Ok(match params.layout {
        HeadLayout::Factorized => picks,
        HeadLayout::Joint => split_joint(picks[0], &params.components),
    })
}

/// One training sample with its precomputed advantage and return.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub action: Vec<usize>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossParts {
    /// Negated clipped surrogate (the quantity minimized).
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_ratio: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl From<&TrainConfig> for LossCoefficients {
    fn from(c: &TrainConfig) -> Self {
        LossCoefficients {
            clip_ratio: c.clip_ratio,
            value_coef: c.value_coef,
            entropy_coef: c.entropy_coef,
        }
    }
}

/// Clipped surrogate term `min(r A, clip(r, 1 - eps, 1 + eps) A)` for one sample.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_ratio: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio);
    f64::min(ratio * advantage, clipped * advantage)
}

/// Loss (to minimize) over `batch` and its gradient. Advantages are used as given.
pub fn loss_and_grad(params: &PolicyParams, batch: &[Sample], coef: LossCoefficients) -> Result<(LossParts, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let parts = accumulate(params, batch, coef, Some(&mut grad))?;
    Ok((parts, grad))
}

/// Loss only; used by the finite-difference check.
pub fn loss(params: &PolicyParams, batch: &[Sample], coef: LossCoefficients) -> Result<LossParts> {
    accumulate(params, batch, coef, None)
}

fn accumulate(
    params: &PolicyParams,
    batch: &[Sample],
    coef: LossCoefficients,
    mut grad: Option<&mut Vec<f64>>,
) -> Result<LossParts> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut parts = LossParts::default();
    for s in batch {
        check_action(params, &s.action)?;
        let (out, cache) = params.forward_cached(&s.observation)?;
        let lps: Vec<Vec<f64>> = out.logits.iter().map(|l| log_softmax(l)).collect();
        let choices = head_choices(params, &s.action);
        let log_prob: f64 = choices.iter().zip(&lps).map(|(&a, lp)| lp[a]).sum();
        let ratio = libm::exp(log_prob - s.old_log_prob);
        let unclipped = ratio * s.advantage;
        let surrogate = clipped_surrogate(ratio, s.advantage, coef.clip_ratio);
        let ent: Vec<f64> = lps.iter().map(|lp| entropy(lp)).collect();
        let ent_sum: f64 = ent.iter().sum();
        let v_err = out.value - s.ret;

        parts.policy_loss -= surrogate * scale;
        parts.value_loss += v_err * v_err * scale;
        parts.entropy += ent_sum * scale;
        if libm::fabs(ratio - 1.0) > coef.clip_ratio {
            parts.clip_fraction += scale;
        }

        if let Some(g) = grad.as_deref_mut() {
            // d(-surrogate)/d(log_prob): zero when the clipped branch is active
            let d_logp = if unclipped <= surrogate { -unclipped * scale } else { 0.0 };
            let d_ent = -coef.entropy_coef * scale;
            let mut d_logits = Vec::with_capacity(lps.iter().map(Vec::len).sum());
            for ((lp, &a), h) in lps.iter().zip(&choices).zip(&ent) {
                for (k, &l) in lp.iter().enumerate() {
                    let p = libm::exp(l);
                    let one_hot = if k == a { 1.0 } else { 0.0 };
                    // dH/dz_k = -p_k (log p_k + H)
                    d_logits.push(d_logp * (one_hot - p) + d_ent * (-p * (l + h)));
                }
            }
            let d_value = 2.0 * coef.value_coef * v_err * scale;
            params.backward(&s.observation, &cache, &d_logits, d_value, g);
        }
    }
    parts.total = parts.policy_loss + coef.value_coef * parts.value_loss - coef.entropy_coef * parts.entropy;
    Ok(parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean return of episodes finished during the rollout, if any finished.
    pub mean_episode_reward: Option<f64>,
}

fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = libm::sqrt(var);
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

/// Several epochs of shuffled minibatch updates over `samples`.
pub fn ppo_update(
    params: &mut PolicyParams,
    optimizer: &mut Adam,
    samples: &[Sample],
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<UpdateStats> {
    let coef = LossCoefficients::from(cfg);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mut batches = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mut batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            if batch.len() > 1 {
                let mut adv: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
                normalize(&mut adv);
                for (s, a) in batch.iter_mut().zip(adv) {
                    s.advantage = a;
                }
            }
            let (parts, mut grad) = loss_and_grad(params, &batch, coef)?;
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "policy {} value {} entropy {}",
                    parts.policy_loss, parts.value_loss, parts.entropy
                )));
            }
            let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
            if norm > cfg.max_grad_norm {
                let k = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            optimizer.step(&mut params.data, &grad);
            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.clip_fraction += parts.clip_fraction;
            batches += 1;
        }
    }
    let k = 1.0 / batches.max(1) as f64;
    stats.policy_loss *= k;
    stats.value_loss *= k;
    stats.entropy *= k;
    stats.clip_fraction *= k;
    Ok(stats)
}

/// One row of the learning curve.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurveRow {
    pub update: usize,
    pub steps: usize,
    pub episodes: usize,
    pub stats: UpdateStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: PolicyParams,
    pub curve: Vec<CurveRow>,
}

/// Seed streams used by [`train`], all derived from `TrainConfig::seed`.
mod streams {
    pub const INIT: u64 = 0;
    pub const SAMPLING: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const EPISODES: u64 = 3;
}

/// Alternates rollouts of `rollout_length` steps with PPO updates until
/// `total_steps / rollout_length` updates are done. `on_update` sees each
/// curve row as it is produced.
pub fn train<E: Environment>(
    env: &mut E,
    cfg: &TrainConfig,
    mut on_update: impl FnMut(&CurveRow),
) -> Result<TrainOutput> {
    cfg.validate()?;
    let components = env.action_components();
    let obs_len = env.observation_len();
    let seed = cfg.seed;
    let mut params = PolicyParams::init(
        obs_len,
        cfg.hidden,
        &components,
        cfg.head_layout,
        &mut rng_from_seed(derive_seed(seed, streams::INIT)),
    );
    let mut optimizer = Adam::new(params.len(), cfg.learning_rate);
    let mut sample_rng = rng_from_seed(derive_seed(seed, streams::SAMPLING));
    let mut shuffle_rng = rng_from_seed(derive_seed(seed, streams::SHUFFLE));
    let episode_seed = derive_seed(seed, streams::EPISODES);

    let mut episodes = 0u64;
    let mut obs = env.reset(derive_seed(episode_seed, episodes))?;
    let mut episode_return = 0.0;
    let mut curve = Vec::new();
    let updates = cfg.total_steps / cfg.rollout_length;

    for update in 0..updates {
        let mut traj = Trajectory::default();
        let mut finished = Vec::new();
        for _ in 0..cfg.rollout_length {
            let (action, log_prob, value) = sample_action(&params, &obs, &mut sample_rng)?;
            let step = env.step(&action)?;
            episode_return += step.reward;
            traj.push(obs, action, log_prob, step.reward, value, step.done);
            if step.done {
                finished.push(episode_return);
                episode_return = 0.0;
                episodes += 1;
                obs = env.reset(derive_seed(episode_seed, episodes))?;
            } else {
                obs = step.observation;
            }
        }
        traj.bootstrap_value = if traj.dones.last().copied().unwrap_or(true) {
            0.0
        } else {
            params.forward(&obs)?.value
        };
        let (adv, ret) = compute_gae(
            &traj.rewards,
            &traj.values,
            &traj.dones,
            traj.bootstrap_value,
            cfg.gamma,
            cfg.gae_lambda,
        );
        let samples: Vec<Sample> = (0..traj.len())
            .map(|t| Sample {
                observation: core::mem::take(&mut traj.observations[t]),
                action: core::mem::take(&mut traj.actions[t]),
                old_log_prob: traj.log_probs[t],
                advantage: adv[t],
                ret: ret[t],
            })
            .collect();
        let mut stats = ppo_update(&mut params, &mut optimizer, &samples, cfg, &mut shuffle_rng)?;
        stats.mean_episode_reward =
            (!finished.is_empty()).then(|| finished.iter().sum::<f64>() / finished.len() as f64);
        let row = CurveRow {
            update: update + 1,
            steps: (update + 1) * cfg.rollout_length,
            episodes: finished.len(),
            stats,
        };
        on_update(&row);
        curve.push(row);
    }
    Ok(TrainOutput { params, curve })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_hand_examples() {
        let (adv, ret) = compute_gae(&[0.0, 1.0], &[0.0, 0.0], &[false, true], 0.0, 1.0, 1.0);
        assert_eq!(adv, vec![1.0, 1.0]);
        assert_eq!(ret, vec![1.0, 1.0]);

        let r = [0.5, -1.0, 2.0];
        let v = [0.1, 0.2, -0.3];
        let d = [false, false, false];
        let (adv, _) = compute_gae(&r, &v, &d, 0.7, 0.9, 0.0);
        let deltas = [0.5 + 0.9 * 0.2 - 0.1, -1.0 + 0.9 * -0.3 - 0.2, 2.0 + 0.9 * 0.7 + 0.3];
        for (a, dl) in adv.iter().zip(deltas) {
            assert!((a - dl).abs() < 1e-15);
        }
    }

    #[test]
    fn clipped_surrogate_values() {
        assert!((clipped_surrogate(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_surrogate(0.5, 1.0, 0.2) - 0.5).abs() < 1e-15);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
    }

    #[test]
    fn joint_index_round_trip() {
        let comps = [6, 6, 6, 6, 2];
        for idx in [0, 1, 17, 2591] {
            assert_eq!(joint_index(&split_joint(idx, &comps), &comps), idx);
        }
        assert_eq!(split_joint(1, &[2, 3]), vec![0, 1]);
    }

    #[test]
    fn greedy_on_zero_weights_picks_first() {
        let p = PolicyParams::zeros(4, 3, &[4, 4, 2], HeadLayout::Factorized);
        assert_eq!(act_greedy(&p, &[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0, 0, 0]);
        let j = PolicyParams::zeros(4, 3, &[4, 4, 2], HeadLayout::Joint);
        assert_eq!(act_greedy(&j, &[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn zero_advantage_has_no_policy_gradient() {
        let mut rng = rng_from_seed(5);
        let p = PolicyParams::init(3, 4, &[2], HeadLayout::Factorized, &mut rng);
        let obs = vec![0.2, -0.1, 0.4];
        let lp = action_log_prob(&p, &obs, &[1]).unwrap();
        let batch = [Sample {
            observation: obs,
            action: vec![1],
            old_log_prob: lp,
            advantage: 0.0,
            ret: 0.0,
        }];
        let coef = LossCoefficients {
            clip_ratio: 0.2,
            value_coef: 0.0,
            entropy_coef: 0.0,
        };
        let (parts, grad) = loss_and_grad(&p, &batch, coef).unwrap();
        assert_eq!(parts.policy_loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            minibatch_size: 100,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }
}
