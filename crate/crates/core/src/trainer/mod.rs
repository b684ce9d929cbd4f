//! Training loop for the ensemble learner and its baselines.

mod eval;
mod rollout;
mod update;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::losses::{Hyperparams, LossBreakdown};
use crate::policy::{ActionDistribution, Architecture, PolicyEnsemble, SubPolicy};
use crate::seeding::{self, streams};

pub use eval::{evaluate, evaluate_detailed, EvalOutcome};
pub use rollout::{collect_rollout, finish_rollout, Collector, InteractionRecord};
pub use update::{minibatch_step, update, Objective, Optimizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Single policy, KL-penalized surrogate.
    #[serde(rename = "PPO")]
    Ppo,
    /// K independent single-policy learners, majority vote at evaluation.
    #[serde(rename = "PEMV")]
    Pemv,
    /// K independent single-policy learners, averaged at evaluation.
    #[serde(rename = "PEMA")]
    Pema,
    #[serde(rename = "EPPO")]
    Eppo,
    /// Ensemble learner without the diversity penalty.
    #[serde(rename = "EPPO_NO_DIV")]
    EppoNoDiv,
    /// Ensemble learner without the ensemble surrogate.
    #[serde(rename = "EPPO_NO_ENS")]
    EppoNoEns,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Ppo,
        Variant::Pemv,
        Variant::Pema,
        Variant::Eppo,
        Variant::EppoNoDiv,
        Variant::EppoNoEns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ppo => "PPO",
            Variant::Pemv => "PEMV",
            Variant::Pema => "PEMA",
            Variant::Eppo => "EPPO",
            Variant::EppoNoDiv => "EPPO_NO_DIV",
            Variant::EppoNoEns => "EPPO_NO_ENS",
        }
    }

    /// Trains K separate learners instead of one ensemble.
    pub fn independent_learners(self) -> bool {
        matches!(self, Variant::Pemv | Variant::Pema)
    }

    /// Hyperparameters of each learner after the variant's overrides.
    pub fn learner_hyperparams(self, hp: &Hyperparams) -> Hyperparams {
        let mut out = hp.clone();
        match self {
            Variant::Ppo | Variant::Pemv | Variant::Pema => {
                out.k = 1;
                out.alpha = 0.0;
                out.beta = 0.0;
            }
            Variant::Eppo => {}
            Variant::EppoNoDiv => out.beta = 0.0,
            Variant::EppoNoEns => out.alpha = 0.0,
        }
        out
    }

    /// Number of learners trained side by side.
    pub fn learner_count(self, hp: &Hyperparams) -> usize {
        if self.independent_learners() {
            hp.k
        } else {
            1
        }
    }

    fn objective(self) -> Objective {
        match self {
            Variant::Ppo | Variant::Pemv | Variant::Pema => Objective::SinglePolicy,
            _ => Objective::Ensemble,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        let v = match norm.as_str() {
            "PPO" => Variant::Ppo,
            "PEMV" => Variant::Pemv,
            "PEMA" => Variant::Pema,
            "EPPO" => Variant::Eppo,
            "EPPO_NO_DIV" | "EPPO_DIV" => Variant::EppoNoDiv,
            "EPPO_NO_ENS" | "EPPO_ENS" => Variant::EppoNoEns,
            _ => {
                return Err(Error::Config(format!(
                    "unknown variant {s:?}; expected one of PPO, PEMV, PEMA, EPPO, EPPO_NO_DIV, EPPO_NO_ENS"
                )))
            }
        };
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub variant: Variant,
    pub hyperparams: Hyperparams,
    pub env: EnvSpec,
    pub seed: u64,
    /// Environment steps between evaluations.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Act greedily during evaluation instead of sampling.
    pub greedy_eval: bool,
    /// Cap on stored evaluation states used for action disagreement.
    pub metric_states: usize,
    pub hidden: Vec<usize>,
    /// Where `latest.ckpt` and `final.ckpt` go; nothing is written if unset.
    pub checkpoint_dir: Option<PathBuf>,
}

impl AlgoConfig {
    pub fn new(variant: Variant, env: EnvSpec, seed: u64) -> Self {
        Self {
            variant,
            hyperparams: Hyperparams::default(),
            env,
            seed,
            eval_interval: 10_000,
            eval_episodes: 20,
            greedy_eval: false,
            metric_states: 1000,
            hidden: vec![64, 64],
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.env.validate()?;
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval_interval and eval_episodes must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden.clone(),
            ..Architecture::new(self.env.observation_len(), crate::envs::Action::COUNT)
        }
    }
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub env_steps: usize,
    pub mean_return: f64,
    /// Losses of the most recent update (zeros before the first one).
    pub losses: LossBreakdown,
    pub mean_kl: f64,
    pub mu: f64,
    pub entropy: f64,
    /// `None` when fewer than two policies are evaluated.
    pub action_disagreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    /// Environment interactions made by each learner.
    pub learner_steps: Vec<u64>,
    /// Final policies; independent learners are stacked into one ensemble
    /// whose critic is the first learner's.
    pub final_policy: PolicyEnsemble,
    pub final_checkpoint: Option<PathBuf>,
}

impl RunRecord {
    pub fn total_env_steps(&self) -> u64 {
        self.learner_steps.iter().sum()
    }

    pub fn final_return(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.mean_return)
    }

    /// Trapezoidal area under the return curve divided by its step span.
    pub fn normalized_auc(&self) -> f64 {
        let rows = &self.rows;
        if rows.len() < 2 {
            return self.final_return();
        }
        let mut area = 0.0;
        for w in rows.windows(2) {
            area += 0.5 * (w[0].mean_return + w[1].mean_return) * (w[1].env_steps - w[0].env_steps) as f64;
        }
        area / (rows[rows.len() - 1].env_steps - rows[0].env_steps) as f64
    }
}

/// A policy learner with its own environment stream.
#[derive(Debug, Clone)]
pub struct Learner {
    pub ensemble: PolicyEnsemble,
    pub optimizer: Optimizer,
    pub collector: Collector,
    pub hyperparams: Hyperparams,
    objective: Objective,
    action_rng: ChaCha8Rng,
    minibatch_rng: ChaCha8Rng,
    last_losses: LossBreakdown,
}

impl Learner {
    pub fn new(arch: &Architecture, env: &EnvSpec, hp: Hyperparams, objective: Objective, seed: u64) -> Result<Self> {
        Ok(Self {
            ensemble: PolicyEnsemble::new(arch, hp.k, seed)?,
            optimizer: Optimizer::new(&hp),
            collector: Collector::new(env, seed)?,
            objective,
            action_rng: seeding::rng(seed, streams::ACTIONS),
            minibatch_rng: seeding::rng(seed, streams::MINIBATCH),
            last_losses: LossBreakdown {
                per_subpolicy_losses: vec![0.0; hp.k],
                ..LossBreakdown::default()
            },
            hyperparams: hp,
        })
    }

    /// Collects `steps` interactions and runs one update on them.
    pub fn iterate(&mut self, steps: usize) -> Result<&LossBreakdown> {
        let hp = &self.hyperparams;
        let mut buf = collect_rollout(&self.ensemble, &mut self.collector, steps, &mut self.action_rng)?;
        finish_rollout(
            &mut buf,
            &self.ensemble,
            &self.collector,
            hp.gamma,
            hp.lambda,
            hp.normalize_advantages,
        )?;
        self.last_losses = update(
            &mut self.ensemble,
            &mut self.optimizer,
            &buf,
            hp,
            self.objective,
            &mut self.minibatch_rng,
        )?;
        Ok(&self.last_losses)
    }

    pub fn last_losses(&self) -> &LossBreakdown {
        &self.last_losses
    }
}

/// Splits `total` as evenly as possible over `parts`; earlier parts take the
/// remainder.
pub fn split_budget(total: usize, parts: usize) -> Vec<usize> {
    let (base, rem) = (total / parts, total % parts);
    (0..parts).map(|i| base + usize::from(i < rem)).collect()
}

struct Run {
    cfg: AlgoConfig,
    learners: Vec<Learner>,
}

impl Run {
    fn new(cfg: &AlgoConfig) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.architecture();
        let hp = cfg.variant.learner_hyperparams(&cfg.hyperparams);
        let count = cfg.variant.learner_count(&cfg.hyperparams);
        let learners = (0..count)
            .map(|i| {
                let seed = if cfg.variant.independent_learners() {
                    seeding::derive(cfg.seed, streams::LEARNER + i as u64)
                } else {
                    cfg.seed
                };
                Learner::new(&arch, &cfg.env, hp.clone(), cfg.variant.objective(), seed)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            learners,
        })
    }

    fn sub_policies(&self) -> Vec<&SubPolicy> {
        self.learners.iter().flat_map(|l| l.ensemble.sub_policies()).collect()
    }

    fn policy(&self, obs: &[f64]) -> Result<ActionDistribution> {
        match self.cfg.variant {
            Variant::Pemv | Variant::Pema => {
                let dists = self
                    .learners
                    .iter()
                    .map(|l| l.ensemble.distribution(obs))
                    .collect::<Result<Vec<_>>>()?;
                if self.cfg.variant == Variant::Pemv {
                    ActionDistribution::vote(&dists)
                } else {
                    ActionDistribution::mean(&dists)
                }
            }
            _ => self.learners[0].ensemble.distribution(obs),
        }
    }

    fn combined(&self) -> Result<PolicyEnsemble> {
        if self.learners.len() == 1 {
            return Ok(self.learners[0].ensemble.clone());
        }
        let subs = self.sub_policies().into_iter().cloned().collect();
        PolicyEnsemble::from_parts(subs, self.learners[0].ensemble.value_net().clone())
    }

    fn eval_row(&self, env_steps: usize) -> Result<EvalRow> {
        let cfg = &self.cfg;
        let out = evaluate_detailed(
            |o| self.policy(o),
            &cfg.env,
            cfg.eval_episodes,
            cfg.seed,
            cfg.greedy_eval,
            cfg.metric_states,
        )?;
        let subs = self.sub_policies();
        let action_disagreement = if subs.len() >= 2 && !out.states.is_empty() {
            Some(crate::policy::action_disagreement(&subs, &out.states)?)
        } else {
            None
        };
        let n = self.learners.len() as f64;
        let mut losses = LossBreakdown::default();
        let (mut kl, mut mu) = (0.0, 0.0);
        for l in &self.learners {
            let b = l.last_losses();
            losses.per_subpolicy_losses.extend(&b.per_subpolicy_losses);
            losses.ensemble_loss += b.ensemble_loss / n;
            losses.diversity_loss += b.diversity_loss / n;
            losses.total += b.total / n;
            kl += b.mean_kl_to_behavior / n;
            mu += l.optimizer.mu / n;
        }
        losses.mean_kl_to_behavior = kl;
        Ok(EvalRow {
            env_steps,
            mean_return: out.mean_return,
            losses,
            mean_kl: kl,
            mu,
            entropy: out.mean_entropy,
            action_disagreement,
        })
    }

    fn save(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.cfg.checkpoint_dir {
            None => Ok(None),
            Some(dir) => {
                let path = dir.join(name);
                checkpoint::save(&self.combined()?, &path)?;
                Ok(Some(path))
            }
        }
    }
}

/// Alternates rollouts and updates until the step budget is spent,
/// evaluating at step 0, whenever a multiple of `eval_interval` is crossed,
/// and at the end.
pub fn train(cfg: &AlgoConfig) -> Result<RunRecord> {
    let mut run = Run::new(cfg)?;
    let budget = cfg.hyperparams.total_env_steps;
    let rollout = run.learners[0].hyperparams.rollout_length;
    let mut rows = vec![run.eval_row(0)?];
    let mut consumed = 0usize;
    let mut next_eval = cfg.eval_interval;
    while consumed < budget {
        let epoch = rollout.min(budget - consumed);
        let shares = split_budget(epoch, run.learners.len());
        for (learner, steps) in run.learners.iter_mut().zip(shares) {
            if steps > 0 {
                learner.iterate(steps)?;
            }
        }
        consumed += epoch;
        let crossed = consumed >= next_eval;
        while next_eval <= consumed {
            next_eval += cfg.eval_interval;
        }
        if crossed || consumed == budget {
            rows.push(run.eval_row(consumed)?);
            run.save("latest.ckpt")?;
        }
    }
    let final_checkpoint = run.save("final.ckpt")?;
    Ok(RunRecord {
        variant: cfg.variant,
        seed: cfg.seed,
        rows,
        learner_steps: run.learners.iter().map(|l| l.collector.env_steps()).collect(),
        final_policy: run.combined()?,
        final_checkpoint,
    })
}
