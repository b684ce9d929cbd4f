use rand::Rng;

use crate::advantage::{AdvantageBuffer, Transition};
use crate::envs::{Action, EnvSpec, GridEnv, Termination};
use crate::error::{contract, Result};
use crate::policy::{ActionDistribution, PolicyEnsemble};
use crate::seeding;

/// One environment interaction as seen by the audit log.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub observation: Vec<f64>,
    /// Distribution the action was drawn from.
    pub sampling_probs: ActionDistribution,
    pub action: usize,
}

/// Environment plus the bookkeeping needed to continue episodes across
/// rollouts.
#[derive(Debug, Clone)]
pub struct Collector {
    env: GridEnv,
    obs: Vec<f64>,
    layout_seed: u64,
    episode: u64,
    env_steps: u64,
    episode_return: f64,
    finished: Vec<(f64, Termination)>,
    audit: Option<Vec<InteractionRecord>>,
}

impl Collector {
    /// Episode layouts are drawn from `derive(seed, episode index)`.
    pub fn new(spec: &EnvSpec, seed: u64) -> Result<Self> {
        let mut env = spec.build()?;
        let layout_seed = seeding::derive(seed, seeding::streams::LAYOUTS);
        let obs = env.reset(seeding::derive(layout_seed, 0))?;
        Ok(Self {
            env,
            obs,
            layout_seed,
            episode: 0,
            env_steps: 0,
            episode_return: 0.0,
            finished: Vec::new(),
            audit: None,
        })
    }

    /// Starts recording every interaction.
    pub fn enable_audit(&mut self) {
        self.audit = Some(Vec::new());
    }

    pub fn audit_log(&self) -> Option<&[InteractionRecord]> {
        self.audit.as_deref()
    }

    pub fn env(&self) -> &GridEnv {
        &self.env
    }

    pub fn observation(&self) -> &[f64] {
        &self.obs
    }

    /// Total calls to `step` so far.
    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Returns and end reasons of completed episodes, oldest first.
    pub fn finished_episodes(&self) -> &[(f64, Termination)] {
        &self.finished
    }

    /// Applies `action`, sampled from `probs`, and auto-resets on episode end.
    /// Returns `(reward, done)`.
    pub fn step(&mut self, probs: &ActionDistribution, action: usize) -> Result<(f64, bool)> {
        if let Some(log) = &mut self.audit {
            log.push(InteractionRecord {
                observation: self.obs.clone(),
                sampling_probs: probs.clone(),
                action,
            });
        }
        let out = self.env.step(Action::from_index(action)?)?;
        self.env_steps += 1;
        self.episode_return += out.reward;
        if out.done {
            self.finished.push((self.episode_return, out.info));
            self.episode_return = 0.0;
            self.episode += 1;
            self.obs = self.env.reset(seeding::derive(self.layout_seed, self.episode))?;
        } else {
            self.obs = out.observation;
        }
        Ok((out.reward, out.done))
    }
}

/// Runs the mean policy for exactly `steps` interactions. Sub-policies never
/// act on their own: every action is drawn from `(1/K)·Σ_k π_k(·|s)`.
/// Advantages are not computed yet.
pub fn collect_rollout<R: Rng + ?Sized>(
    ensemble: &PolicyEnsemble,
    collector: &mut Collector,
    steps: usize,
    rng: &mut R,
) -> Result<AdvantageBuffer> {
    contract!(steps >= 1, "a rollout needs at least one step");
    let mut buf = AdvantageBuffer::new();
    for _ in 0..steps {
        let obs = collector.obs.clone();
        let probs = ensemble.distribution(&obs)?;
        let value = ensemble.value(&obs)?;
        let action = probs.sample(rng);
        let (reward, done) = collector.step(&probs, action)?;
        buf.push(Transition {
            observation: obs,
            action,
            reward,
            behavior_probs: probs,
            value_estimate: value,
            done,
        })?;
    }
    Ok(buf)
}

/// Fills advantages, bootstrapping from the critic on the collector's current
/// observation, and optionally normalizes them.
pub fn finish_rollout(
    buf: &mut AdvantageBuffer,
    ensemble: &PolicyEnsemble,
    collector: &Collector,
    gamma: f64,
    lambda: f64,
    normalize: bool,
) -> Result<()> {
    let bootstrap = ensemble.value(collector.observation())?;
    buf.compute_gae(bootstrap, gamma, lambda)?;
    if normalize {
        buf.normalize_advantages()?;
    }
    Ok(())
}
