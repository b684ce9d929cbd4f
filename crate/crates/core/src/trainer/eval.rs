use crate::envs::{Action, EnvSpec};
use crate::error::{contract, Result};
use crate::policy::ActionDistribution;
use crate::seeding::{self, streams};

/// Result of an evaluation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub returns: Vec<f64>,
    pub mean_return: f64,
    /// Mean entropy of the evaluated distribution over visited states.
    pub mean_entropy: f64,
    /// Observations in visit order, capped at the requested count.
    pub states: Vec<Vec<f64>>,
}

/// Runs `episodes` fresh layouts drawn from `seed`. With `greedy` the most
/// probable action is taken, otherwise actions are sampled.
pub fn evaluate_detailed<F>(
    policy: F,
    spec: &EnvSpec,
    episodes: usize,
    seed: u64,
    greedy: bool,
    max_states: usize,
) -> Result<EvalOutcome>
where
    F: Fn(&[f64]) -> Result<ActionDistribution>,
{
    contract!(episodes >= 1, "evaluation needs at least one episode");
    let mut env = spec.build()?;
    let layouts = seeding::derive(seed, streams::EVAL_LAYOUTS);
    let mut rng = seeding::rng(seed, streams::EVAL_ACTIONS);
    let mut returns = Vec::with_capacity(episodes);
    let mut states = Vec::new();
    let (mut entropy_sum, mut visits) = (0.0, 0usize);
    for ep in 0..episodes {
        let mut obs = env.reset(seeding::derive(layouts, ep as u64))?;
        let mut total = 0.0;
        loop {
            let dist = policy(&obs)?;
            entropy_sum += dist.entropy();
            visits += 1;
            let action = if greedy { dist.argmax() } else { dist.sample(&mut rng) };
            let out = env.step(Action::from_index(action)?)?;
            if states.len() < max_states {
                states.push(obs);
            }
            total += out.reward;
            if out.done {
                break;
            }
            obs = out.observation;
        }
        returns.push(total);
    }
    let mean_return = returns.iter().sum::<f64>() / episodes as f64;
    Ok(EvalOutcome {
        returns,
        mean_return,
        mean_entropy: entropy_sum / visits as f64,
        states,
    })
}

/// Mean undiscounted return of `policy` over `episodes` fresh layouts.
pub fn evaluate<F>(policy: F, spec: &EnvSpec, episodes: usize, seed: u64, greedy: bool) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<ActionDistribution>,
{
    Ok(evaluate_detailed(policy, spec, episodes, seed, greedy, 0)?.mean_return)
}
