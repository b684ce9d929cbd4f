//! Categorical sub-policies and their arithmetic-mean ensemble.

use rand::Rng;

use crate::autodiff::{kernels, Tape, Tensor, Var, PROB_FLOOR};
use crate::error::{contract, Error, Result};
use crate::nn::{Activation, BoundMlp, Mlp};
use crate::seeding::{self, streams};

/// Probability vector over a discrete action set.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    /// Validates nonnegativity and normalization to within 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        contract!(!probs.is_empty(), "empty action distribution");
        contract!(
            probs.iter().all(|p| p.is_finite() && *p >= 0.0),
            "negative or non-finite probability in {probs:?}"
        );
        let total: f64 = probs.iter().sum();
        contract!((total - 1.0).abs() <= 1e-9, "probabilities sum to {total}, not 1");
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, action: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[action] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_actions(&self) -> usize {
        self.probs.len()
    }

    /// Inverse-CDF draw from one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }

    /// `log(max(p[a], 1e-12))`.
    pub fn log_prob(&self, action: usize) -> Result<f64> {
        contract!(
            action < self.probs.len(),
            "action {action} out of range for {} actions",
            self.probs.len()
        );
        Ok(self.probs[action].max(PROB_FLOOR).ln())
    }

    /// Shannon entropy in nats, with `0·log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    /// Most probable action; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = a;
            }
        }
        best
    }

    /// Arithmetic mean of equally sized distributions.
    pub fn mean(dists: &[ActionDistribution]) -> Result<Self> {
        contract!(!dists.is_empty(), "mean of zero distributions");
        let n = dists[0].num_actions();
        contract!(
            dists.iter().all(|d| d.num_actions() == n),
            "distributions over different action sets"
        );
        let mut probs = vec![0.0; n];
        for d in dists {
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += p;
            }
        }
        let scale = 1.0 / dists.len() as f64;
        probs.iter_mut().for_each(|p| *p *= scale);
        Ok(Self { probs })
    }

    /// Majority-vote distribution: the share of inputs whose argmax is each
    /// action.
    pub fn vote(dists: &[ActionDistribution]) -> Result<Self> {
        contract!(!dists.is_empty(), "vote over zero distributions");
        let n = dists[0].num_actions();
        let mut probs = vec![0.0; n];
        for d in dists {
            contract!(d.num_actions() == n, "distributions over different action sets");
            probs[d.argmax()] += 1.0;
        }
        let scale = 1.0 / dists.len() as f64;
        probs.iter_mut().for_each(|p| *p *= scale);
        Ok(Self { probs })
    }
}

/// `KL(p || q) = Σ p·log(p / max(q, 1e-12))`.
pub fn kl_categorical(p: &ActionDistribution, q: &ActionDistribution) -> Result<f64> {
    contract!(
        p.num_actions() == q.num_actions(),
        "KL between {} and {} actions",
        p.num_actions(),
        q.num_actions()
    );
    let kl: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pa, _)| pa > 0.0)
        .map(|(&pa, &qa)| pa * (pa.ln() - qa.max(PROB_FLOOR).ln()))
        .sum();
    Ok(kl.max(0.0))
}

/// Architecture shared by every network of an ensemble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub num_actions: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(obs_dim: usize, num_actions: usize) -> Self {
        Self {
            obs_dim,
            hidden: vec![64, 64],
            num_actions,
            activation: Activation::Tanh,
        }
    }

    pub fn policy_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(self.num_actions);
        s
    }

    pub fn value_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.obs_dim];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

/// One categorical policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPolicy {
    net: Mlp,
}

impl SubPolicy {
    pub const OUTPUT_GAIN: f64 = 0.01;

    pub fn new<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(&arch.policy_sizes(), arch.activation, Self::OUTPUT_GAIN, rng)?,
        })
    }

    pub fn from_net(net: Mlp) -> Self {
        Self { net }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn num_actions(&self) -> usize {
        self.net.output_dim()
    }

    /// Action probabilities for `rows` stacked observations, row-major.
    pub fn probs_batch(&self, obs: &[f64], rows: usize) -> Result<Vec<f64>> {
        let logits = self.net.infer(obs, rows)?;
        Ok(kernels::softmax_rows(&logits, self.num_actions()))
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<ActionDistribution> {
        contract!(
            obs.len() == self.net.input_dim(),
            "observation of length {} for input width {}",
            obs.len(),
            self.net.input_dim()
        );
        Ok(ActionDistribution {
            probs: self.probs_batch(obs, 1)?,
        })
    }

    /// Differentiable `batch × actions` probabilities.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundMlp, obs: Var) -> Result<Var> {
        let logits = self.net.forward(tape, bound, obs)?;
        Ok(tape.softmax(logits))
    }
}

/// `K` sub-policies averaged into one policy, plus a shared critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEnsemble {
    sub_policies: Vec<SubPolicy>,
    value_net: Mlp,
}

/// Tape bindings for every network of an ensemble.
#[derive(Debug, Clone)]
pub struct BoundEnsemble {
    pub subs: Vec<BoundMlp>,
    pub value: BoundMlp,
}

impl PolicyEnsemble {
    /// Sub-policy `k` is initialized from its own seed stream, so sub-policy 0
    /// of any ensemble matches a single policy built from the same seed.
    pub fn new(arch: &Architecture, k: usize, seed: u64) -> Result<Self> {
        contract!(k >= 1, "an ensemble needs at least one sub-policy");
        let sub_policies = (0..k)
            .map(|i| {
                let mut rng = seeding::rng(seed, streams::SUB_POLICY_INIT + i as u64);
                SubPolicy::new(arch, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rng = seeding::rng(seed, streams::VALUE_INIT);
        let value_net = Mlp::new(&arch.value_sizes(), arch.activation, 1.0, &mut rng)?;
        Self::from_parts(sub_policies, value_net)
    }

    pub fn from_parts(sub_policies: Vec<SubPolicy>, value_net: Mlp) -> Result<Self> {
        let first = sub_policies
            .first()
            .ok_or_else(|| Error::Contract("an ensemble needs at least one sub-policy".into()))?;
        contract!(
            sub_policies
                .iter()
                .all(|p| p.net.sizes() == first.net.sizes() && p.net.activation() == first.net.activation()),
            "sub-policies must share one architecture"
        );
        contract!(
            value_net.input_dim() == first.net.input_dim() && value_net.output_dim() == 1,
            "value net must map observations to one scalar"
        );
        Ok(Self {
            sub_policies,
            value_net,
        })
    }

    pub fn k(&self) -> usize {
        self.sub_policies.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.value_net.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.sub_policies[0].num_actions()
    }

    pub fn sub_policies(&self) -> &[SubPolicy] {
        &self.sub_policies
    }

    pub fn sub_policy(&self, k: usize) -> Result<&SubPolicy> {
        self.sub_policies
            .get(k)
            .ok_or_else(|| Error::Contract(format!("sub-policy {k} of {}", self.k())))
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value_net
    }

    /// Every trainable tensor: sub-policies in order, then the critic.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for p in &mut self.sub_policies {
            out.extend(p.net.params_mut().iter_mut());
        }
        out.extend(self.value_net.params_mut().iter_mut());
        out
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for p in &self.sub_policies {
            out.extend(p.net.params());
        }
        out.extend(self.value_net.params());
        out
    }

    pub fn policy_param_count(&self) -> usize {
        self.sub_policies.iter().map(|p| p.net.param_count()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.sub_policies.iter_mut().for_each(|p| p.net.zero_grad());
        self.value_net.zero_grad();
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundEnsemble {
        BoundEnsemble {
            subs: self.sub_policies.iter().map(|p| p.net.bind(tape)).collect(),
            value: self.value_net.bind(tape),
        }
    }

    pub fn accumulate_grads(&mut self, grads: &crate::autodiff::Gradients, bound: &BoundEnsemble) -> Result<()> {
        for (p, b) in self.sub_policies.iter_mut().zip(&bound.subs) {
            p.net.accumulate_grads(grads, b)?;
        }
        self.value_net.accumulate_grads(grads, &bound.value)
    }

    /// Ensemble probabilities for `rows` stacked observations.
    pub fn probs_batch(&self, obs: &[f64], rows: usize) -> Result<Vec<f64>> {
        let mut total = self.sub_policies[0].probs_batch(obs, rows)?;
        for p in &self.sub_policies[1..] {
            for (acc, v) in total.iter_mut().zip(p.probs_batch(obs, rows)?) {
                *acc += v;
            }
        }
        let scale = 1.0 / self.k() as f64;
        total.iter_mut().for_each(|v| *v *= scale);
        Ok(total)
    }

    /// `(1/K)·Σ_k π_k(·|obs)`.
    pub fn distribution(&self, obs: &[f64]) -> Result<ActionDistribution> {
        contract!(
            obs.len() == self.obs_dim(),
            "observation of length {} for input width {}",
            obs.len(),
            self.obs_dim()
        );
        Ok(ActionDistribution {
            probs: self.probs_batch(obs, 1)?,
        })
    }

    pub fn sub_distributions(&self, obs: &[f64]) -> Result<Vec<ActionDistribution>> {
        self.sub_policies.iter().map(|p| p.distribution(obs)).collect()
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.value_net.infer(obs, 1)?[0])
    }

    pub fn values_batch(&self, obs: &[f64], rows: usize) -> Result<Vec<f64>> {
        self.value_net.infer(obs, rows)
    }

    /// Differentiable per-sub-policy probabilities.
    pub fn sub_forward(&self, tape: &mut Tape, bound: &BoundEnsemble, obs: Var) -> Result<Vec<Var>> {
        self.sub_policies
            .iter()
            .zip(&bound.subs)
            .map(|(p, b)| p.forward(tape, b, obs))
            .collect()
    }

    /// Differentiable mixture of already computed sub-policy probabilities.
    pub fn mixture(tape: &mut Tape, sub_probs: &[Var]) -> Result<Var> {
        let mut total = sub_probs[0];
        for &p in &sub_probs[1..] {
            total = tape.add(total, p)?;
        }
        Ok(tape.scale(total, 1.0 / sub_probs.len() as f64))
    }

    pub fn ensemble_forward(&self, tape: &mut Tape, bound: &BoundEnsemble, obs: Var) -> Result<Var> {
        let subs = self.sub_forward(tape, bound, obs)?;
        Self::mixture(tape, &subs)
    }

    /// Critic output of shape `batch × 1`.
    pub fn value_forward(&self, tape: &mut Tape, bound: &BoundEnsemble, obs: Var) -> Result<Var> {
        self.value_net.forward(tape, &bound.value, obs)
    }
}

/// Fraction of ordered sub-policy pairs and states whose greedy actions
/// differ.
pub fn action_disagreement(policies: &[&SubPolicy], states: &[Vec<f64>]) -> Result<f64> {
    let k = policies.len();
    contract!(k >= 2, "action disagreement needs K >= 2, got {k}");
    contract!(!states.is_empty(), "action disagreement needs at least one state");
    let mut differing = 0usize;
    for s in states {
        let greedy = policies
            .iter()
            .map(|p| p.distribution(s).map(|d| d.argmax()))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..k {
            for j in 0..k {
                if i != j && greedy[i] != greedy[j] {
                    differing += 1;
                }
            }
        }
    }
    Ok(differing as f64 / (states.len() * k * (k - 1)) as f64)
}

impl PolicyEnsemble {
    pub fn action_disagreement(&self, states: &[Vec<f64>]) -> Result<f64> {
        let refs: Vec<&SubPolicy> = self.sub_policies.iter().collect();
        action_disagreement(&refs, states)
    }
}
