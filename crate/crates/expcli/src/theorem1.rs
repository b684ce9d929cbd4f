//! Randomized check that averaging policies never lowers entropy below the
//! members' mean entropy.

use eppo_core::policy::ActionDistribution;
use eppo_core::seeding;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{CliError, CliResult};

/// Allowed numerical shortfall.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub policies: Vec<Vec<f64>>,
    /// `H(mean) − mean(H)`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub trials: usize,
    pub min_slack: f64,
    pub violations: Vec<Instance>,
    /// Constructed equality cases (identical members) and their slacks.
    pub equality_cases: Vec<Instance>,
    /// Two disjoint point masses; slack should be `ln 2`.
    pub disjoint_pair_slack: f64,
}

impl Theorem1Report {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.equality_cases.iter().all(|c| c.slack.abs() < TOLERANCE)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "trials: {}\nviolations: {}\nmin slack: {:.3e}\nequality cases: {} (max |slack| {:.3e})\ndisjoint pair slack: {:.12} (ln 2 = {:.12})\n",
            self.trials,
            self.violations.len(),
            self.min_slack,
            self.equality_cases.len(),
            self.equality_cases.iter().map(|c| c.slack.abs()).fold(0.0, f64::max),
            self.disjoint_pair_slack,
            std::f64::consts::LN_2,
        );
        for v in self.violations.iter().take(10) {
            out.push_str(&format!("counterexample (slack {:.3e}): {:?}\n", v.slack, v.policies));
        }
        out
    }
}

/// Draw from the symmetric Dirichlet(1) distribution over `n` outcomes.
pub fn dirichlet_one<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn slack(policies: &[Vec<f64>]) -> CliResult<f64> {
    let dists = policies
        .iter()
        .map(|p| ActionDistribution::new(p.clone()))
        .collect::<eppo_core::Result<Vec<_>>>()?;
    let mixture = ActionDistribution::mean(&dists)?;
    let mean_entropy = dists.iter().map(ActionDistribution::entropy).sum::<f64>() / dists.len() as f64;
    Ok(mixture.entropy() - mean_entropy)
}

/// Samples `trials` instances with `K ∈ [1, max_k]` members over
/// `|A| ∈ [2, max_actions]` actions, plus as many identical-member cases.
pub fn verify_theorem1(trials: usize, max_k: usize, max_actions: usize, seed: u64) -> CliResult<Theorem1Report> {
    if trials == 0 || max_k == 0 || max_actions < 2 {
        return Err(CliError::Config(
            "need trials >= 1, max_k >= 1 and max_actions >= 2".into(),
        ));
    }
    let mut rng = seeding::rng(seed, 0x7431);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    let mut equality_cases = Vec::new();
    for _ in 0..trials {
        let k = rng.random_range(1..=max_k);
        let a = rng.random_range(2..=max_actions);
        let policies: Vec<Vec<f64>> = (0..k).map(|_| dirichlet_one(&mut rng, a)).collect();
        let s = slack(&policies)?;
        min_slack = min_slack.min(s);
        if s < -TOLERANCE {
            violations.push(Instance { policies, slack: s });
        }
        let one = dirichlet_one(&mut rng, a);
        let copies = vec![one; k.max(2)];
        let s = slack(&copies)?;
        equality_cases.push(Instance {
            policies: copies,
            slack: s,
        });
    }
    Ok(Theorem1Report {
        trials,
        min_slack,
        violations,
        equality_cases,
        disjoint_pair_slack: slack(&[vec![1.0, 0.0], vec![0.0, 1.0]])?,
    })
}
