//! Trajectory storage, generalized advantage estimation and the critic loss.

use crate::autodiff::{Tape, Var, PROB_FLOOR};
use crate::error::{contract, Result};
use crate::nn::{BoundMlp, Mlp};
use crate::policy::ActionDistribution;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Ensemble distribution at collection time.
    pub behavior_probs: ActionDistribution,
    pub value_estimate: f64,
    pub done: bool,
}

/// Rollout data plus the advantages and return targets computed from it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdvantageBuffer {
    transitions: Vec<Transition>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    computed: bool,
    normalized: bool,
}

/// Advantages `Â_t` and returns `Â_t + V(s_t)` by backward recursion.
///
/// `dones[t]` cuts the bootstrap after step `t`; `bootstrap` is `V(s_T)` for
/// the observation following the last transition.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    contract!(n > 0, "GAE over an empty trajectory");
    contract!(
        values.len() == n && dones.len() == n,
        "GAE inputs of lengths {n}, {}, {}",
        values.len(),
        dones.len()
    );
    contract!((0.0..=1.0).contains(&gamma), "gamma {gamma} outside [0, 1]");
    contract!((0.0..=1.0).contains(&lambda), "lambda {lambda} outside [0, 1]");
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
    Ok((adv, returns))
}

/// Shifts to mean 0 and scales to unit sample (n - 1) standard deviation.
/// Constant inputs, including single elements, map to zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if std <= 1e-12 * (1.0 + mean.abs()) {
        return vec![0.0; n];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// Flat, row-major slice of a buffer ready for the loss functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub obs: Vec<f64>,
    pub obs_dim: usize,
    pub actions: Vec<usize>,
    /// Behavior probabilities, `len × num_actions`.
    pub behavior: Vec<f64>,
    pub num_actions: usize,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// One-hot action mask, `len × num_actions`.
    pub fn action_mask(&self) -> Vec<f64> {
        let mut mask = vec![0.0; self.len() * self.num_actions];
        for (t, &a) in self.actions.iter().enumerate() {
            mask[t * self.num_actions + a] = 1.0;
        }
        mask
    }

    /// Behavior probability of the taken action, floored.
    pub fn behavior_taken(&self) -> Vec<f64> {
        self.actions
            .iter()
            .enumerate()
            .map(|(t, &a)| self.behavior[t * self.num_actions + a].max(PROB_FLOOR))
            .collect()
    }

    /// `Σ_a p'(a) log p'(a)` per row, with `0 log 0 = 0`.
    pub fn behavior_neg_entropy(&self) -> Vec<f64> {
        self.behavior
            .chunks(self.num_actions)
            .map(|row| row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum())
            .collect()
    }
}

impl AdvantageBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        contract!(
            t.action < t.behavior_probs.num_actions(),
            "action {} outside {} actions",
            t.action,
            t.behavior_probs.num_actions()
        );
        contract!(
            t.behavior_probs.probs()[t.action] >= PROB_FLOOR,
            "behavior probability of the taken action is below the floor"
        );
        if let Some(first) = self.transitions.first() {
            contract!(
                first.observation.len() == t.observation.len(),
                "observation width changed within a buffer"
            );
        }
        self.transitions.push(t);
        self.computed = false;
        self.normalized = false;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn is_computed(&self) -> bool {
        self.computed
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Fills advantages and returns; `bootstrap_value` is the critic's value
    /// of the observation after the last transition (ignored if it ended an
    /// episode).
    pub fn compute_gae(&mut self, bootstrap_value: f64, gamma: f64, lambda: f64) -> Result<(&[f64], &[f64])> {
        let rewards: Vec<f64> = self.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = self.transitions.iter().map(|t| t.value_estimate).collect();
        let dones: Vec<bool> = self.transitions.iter().map(|t| t.done).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap_value, gamma, lambda)?;
        self.advantages = adv;
        self.returns = ret;
        self.computed = true;
        self.normalized = false;
        Ok((&self.advantages, &self.returns))
    }

    pub fn normalize_advantages(&mut self) -> Result<()> {
        contract!(self.computed, "normalize before advantages were computed");
        self.advantages = normalize(&self.advantages);
        self.normalized = true;
        Ok(())
    }

    /// Overrides the advantages directly, e.g. for handcrafted loss checks.
    pub fn set_advantages(&mut self, advantages: Vec<f64>, returns: Vec<f64>) -> Result<()> {
        contract!(
            advantages.len() == self.len() && returns.len() == self.len(),
            "advantage/return lengths must match the buffer"
        );
        self.advantages = advantages;
        self.returns = returns;
        self.computed = true;
        Ok(())
    }

    pub fn minibatch(&self, indices: &[usize]) -> Result<Minibatch> {
        contract!(self.computed, "minibatch requested before advantages were computed");
        contract!(!indices.is_empty(), "empty minibatch");
        let first = &self.transitions[0];
        let obs_dim = first.observation.len();
        let num_actions = first.behavior_probs.num_actions();
        let mut mb = Minibatch {
            obs: Vec::with_capacity(indices.len() * obs_dim),
            obs_dim,
            actions: Vec::with_capacity(indices.len()),
            behavior: Vec::with_capacity(indices.len() * num_actions),
            num_actions,
            advantages: Vec::with_capacity(indices.len()),
            returns: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            contract!(i < self.len(), "index {i} outside buffer of {}", self.len());
            let t = &self.transitions[i];
            mb.obs.extend_from_slice(&t.observation);
            mb.actions.push(t.action);
            mb.behavior.extend_from_slice(t.behavior_probs.probs());
            mb.advantages.push(self.advantages[i]);
            mb.returns.push(self.returns[i]);
        }
        Ok(mb)
    }

    pub fn full_batch(&self) -> Result<Minibatch> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.minibatch(&all)
    }
}

/// Mean squared error between critic predictions and return targets.
pub fn value_loss(tape: &mut Tape, net: &Mlp, bound: &BoundMlp, obs: Var, returns: &[f64]) -> Result<Var> {
    let pred = net.forward(tape, bound, obs)?;
    contract!(
        tape.shape(pred) == [returns.len(), 1],
        "critic output {:?} for {} returns",
        tape.shape(pred),
        returns.len()
    );
    let target = tape.constant(&[returns.len(), 1], returns.to_vec())?;
    let diff = tape.sub(pred, target)?;
    let sq = tape.mul(diff, diff)?;
    tape.mean(sq, None)
}
