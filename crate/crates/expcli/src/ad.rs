//! Action-disagreement reports on saved ensembles.

use std::path::Path;

use eppo_core::checkpoint;
use eppo_core::envs::EnvSpec;
use eppo_core::policy::ActionDistribution;
use eppo_core::seeding;
use eppo_core::trainer::Collector;

use crate::error::{CliError, CliResult};

/// Visits `count` states by sampling actions from `policy`, resetting on
/// episode end. Layouts and actions are drawn from `seed`.
pub fn collect_states<F>(policy: F, spec: &EnvSpec, count: usize, seed: u64) -> CliResult<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> eppo_core::Result<ActionDistribution>,
{
    let mut collector = Collector::new(spec, seed)?;
    let mut rng = seeding::rng(seed, seeding::streams::ACTIONS);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let obs = collector.observation().to_vec();
        let probs = policy(&obs)?;
        let action = probs.sample(&mut rng);
        collector.step(&probs, action)?;
        states.push(obs);
    }
    Ok(states)
}

/// Loads an ensemble, visits `num_states` states by rolling out its mean
/// policy, and returns the action disagreement over them.
pub fn report_ad(checkpoint_path: &Path, spec: &EnvSpec, num_states: usize, seed: u64) -> CliResult<f64> {
    let ensemble = checkpoint::load(checkpoint_path)?;
    if ensemble.k() < 2 {
        return Err(CliError::Runtime(format!(
            "{}: action disagreement needs at least two sub-policies, checkpoint has {}",
            checkpoint_path.display(),
            ensemble.k()
        )));
    }
    if ensemble.obs_dim() != spec.observation_len() {
        return Err(CliError::Config(format!(
            "checkpoint expects {} observation features, environment gives {}",
            ensemble.obs_dim(),
            spec.observation_len()
        )));
    }
    if num_states == 0 {
        return Err(CliError::Config("--states must be at least 1".into()));
    }
    let states = collect_states(|o| ensemble.distribution(o), spec, num_states, seed)?;
    Ok(ensemble.action_disagreement(&states)?)
}
