//! Ensemble training objective: per-sub-policy and ensemble KL-penalized
//! surrogates, the pairwise diversity penalty, and the adaptive penalty
//! coefficient.

use serde::{Deserialize, Serialize};

use crate::advantage::Minibatch;
use crate::autodiff::{Tape, Var, PROB_FLOOR};
use crate::error::{contract, Error, Result};
use crate::policy::PolicyEnsemble;

pub const MU_MIN: f64 = 1e-4;
pub const MU_MAX: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub k: usize,
    /// Weight of the ensemble surrogate.
    pub alpha: f64,
    /// Weight of the diversity penalty.
    pub beta: f64,
    /// Initial KL penalty coefficient.
    pub mu: f64,
    pub kl_target: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub rollout_length: usize,
    pub total_env_steps: usize,
    pub value_loss_weight: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            k: 4,
            alpha: 1.0,
            beta: 0.5,
            mu: 1.0,
            kl_target: 0.01,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            epochs_per_update: 4,
            minibatch_size: 64,
            rollout_length: 2048,
            total_env_steps: 200_000,
            value_loss_weight: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return bad(format!(
                "alpha {} and beta {} must be non-negative",
                self.alpha, self.beta
            ));
        }
        if !(self.mu > 0.0 && self.kl_target > 0.0) {
            return bad(format!(
                "mu {} and kl_target {} must be positive",
                self.mu, self.kl_target
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!(
                "gamma {} and lambda {} must lie in [0, 1]",
                self.gamma, self.lambda
            ));
        }
        if !(self.learning_rate >= 0.0) || !(self.value_loss_weight >= 0.0) {
            return bad("learning_rate and value_loss_weight must be non-negative".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return bad(format!("max_grad_norm {} must be positive", self.max_grad_norm));
        }
        if self.epochs_per_update == 0 || self.minibatch_size == 0 || self.rollout_length == 0 {
            return bad("epochs_per_update, minibatch_size and rollout_length must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub per_subpolicy_losses: Vec<f64>,
    pub ensemble_loss: f64,
    pub diversity_loss: f64,
    pub total: f64,
    /// Mean `KL(π̂′ ‖ π̂)` over the batch.
    pub mean_kl_to_behavior: f64,
}

/// Tape constants derived from one minibatch, shared by every surrogate.
#[derive(Debug, Clone, Copy)]
pub struct BatchConstants {
    pub rows: usize,
    pub num_actions: usize,
    behavior: Var,
    behavior_neg_entropy: Var,
    action_mask: Var,
    behavior_taken: Var,
    advantages: Var,
}

impl BatchConstants {
    pub fn new(tape: &mut Tape, mb: &Minibatch) -> Result<Self> {
        contract!(!mb.is_empty(), "losses over an empty batch");
        let (b, a) = (mb.len(), mb.num_actions);
        Ok(Self {
            rows: b,
            num_actions: a,
            behavior: tape.constant(&[b, a], mb.behavior.clone())?,
            behavior_neg_entropy: tape.constant(&[b], mb.behavior_neg_entropy())?,
            action_mask: tape.constant(&[b, a], mb.action_mask())?,
            behavior_taken: tape.constant(&[b], mb.behavior_taken())?,
            advantages: tape.constant(&[b], mb.advantages.clone())?,
        })
    }
}

/// `mean_t [ μ·KL(π̂′(·|s_t) ‖ p(·|s_t)) − p(a_t|s_t)/π̂′(a_t|s_t)·Â_t ]` for
/// batch probabilities `probs` of shape `rows × actions`.
pub fn penalized_surrogate(tape: &mut Tape, probs: Var, c: &BatchConstants, mu: f64) -> Result<Var> {
    contract!(
        tape.shape(probs) == [c.rows, c.num_actions],
        "probabilities {:?} for a {}×{} batch",
        tape.shape(probs),
        c.rows,
        c.num_actions
    );
    let floored = tape.clamp_min(probs, PROB_FLOOR);
    let log_p = tape.log(floored)?;
    let weighted = tape.mul(c.behavior, log_p)?;
    let cross = tape.sum(weighted, Some(1))?;
    let kl = tape.sub(c.behavior_neg_entropy, cross)?;
    let masked = tape.mul(probs, c.action_mask)?;
    let taken = tape.sum(masked, Some(1))?;
    let ratio = tape.div(taken, c.behavior_taken)?;
    let surrogate = tape.mul(ratio, c.advantages)?;
    let penalty = tape.scale(kl, mu);
    let per_step = tape.sub(penalty, surrogate)?;
    tape.mean(per_step, None)
}

/// Surrogate for sub-policy `k`; gradients reach only that sub-policy.
pub fn sub_policy_loss(tape: &mut Tape, sub_probs: &[Var], k: usize, c: &BatchConstants, mu: f64) -> Result<Var> {
    contract!(k < sub_probs.len(), "sub-policy {k} of {}", sub_probs.len());
    penalized_surrogate(tape, sub_probs[k], c, mu)
}

/// Surrogate for the mean policy; gradients reach every sub-policy.
pub fn ensemble_loss(tape: &mut Tape, sub_probs: &[Var], c: &BatchConstants, mu: f64) -> Result<Var> {
    contract!(!sub_probs.is_empty(), "ensemble loss without sub-policies");
    let mixture = PolicyEnsemble::mixture(tape, sub_probs)?;
    penalized_surrogate(tape, mixture, c, mu)
}

/// Batch mean of `2/(K(K−1)) · Σ_{i<j} Σ_a π_i(a|s) π_j(a|s)`; zero for `K = 1`.
pub fn diversity_loss(tape: &mut Tape, sub_probs: &[Var]) -> Result<Var> {
    let k = sub_probs.len();
    contract!(k >= 1, "diversity loss without sub-policies");
    if k == 1 {
        return tape.constant(&[1], vec![0.0]);
    }
    let mut acc: Option<Var> = None;
    for i in 0..k {
        for j in i + 1..k {
            let prod = tape.mul(sub_probs[i], sub_probs[j])?;
            acc = Some(match acc {
                None => prod,
                Some(a) => tape.add(a, prod)?,
            });
        }
    }
    let acc = acc.expect("K >= 2 gives at least one pair");
    let per_state = tape.sum(acc, Some(1))?;
    let mean = tape.mean(per_state, None)?;
    Ok(tape.scale(mean, 2.0 / (k * (k - 1)) as f64))
}

/// `Σ_k L_k + α·L_e + β·L_d`. Terms with zero weight are left out of the
/// differentiable total but still reported.
pub fn total_loss(
    tape: &mut Tape,
    sub_probs: &[Var],
    c: &BatchConstants,
    hp: &Hyperparams,
    mu: f64,
) -> Result<(Var, LossBreakdown)> {
    let k = sub_probs.len();
    contract!(k >= 1, "total loss without sub-policies");
    let mut per_sub = Vec::with_capacity(k);
    let mut total = sub_policy_loss(tape, sub_probs, 0, c, mu)?;
    per_sub.push(tape.item(total)?);
    for i in 1..k {
        let l = sub_policy_loss(tape, sub_probs, i, c, mu)?;
        per_sub.push(tape.item(l)?);
        total = tape.add(total, l)?;
    }
    let mixture = PolicyEnsemble::mixture(tape, sub_probs)?;
    let l_e = penalized_surrogate(tape, mixture, c, mu)?;
    if hp.alpha != 0.0 {
        let weighted = tape.scale(l_e, hp.alpha);
        total = tape.add(total, weighted)?;
    }
    let l_d = diversity_loss(tape, sub_probs)?;
    if hp.beta != 0.0 && k >= 2 {
        let weighted = tape.scale(l_d, hp.beta);
        total = tape.add(total, weighted)?;
    }
    let breakdown = LossBreakdown {
        per_subpolicy_losses: per_sub,
        ensemble_loss: tape.item(l_e)?,
        diversity_loss: tape.item(l_d)?,
        total: tape.item(total)?,
        mean_kl_to_behavior: mean_kl(tape.value(c.behavior), tape.value(mixture), c.num_actions),
    };
    Ok((total, breakdown))
}

/// Standalone KL-penalized single-policy objective, written independently of
/// the ensemble path; a one-member ensemble with zero extra weights must
/// reproduce it bit for bit.
pub fn ppo_penalty_loss(tape: &mut Tape, probs: Var, mb: &Minibatch, mu: f64) -> Result<Var> {
    let (b, a) = (mb.len(), mb.num_actions);
    contract!(b > 0, "losses over an empty batch");
    contract!(
        tape.shape(probs) == [b, a],
        "probabilities {:?} for a {b}×{a} batch",
        tape.shape(probs)
    );
    let old = tape.constant(&[b, a], mb.behavior.clone())?;
    let old_neg_entropy = tape.constant(&[b], mb.behavior_neg_entropy())?;
    let onehot = tape.constant(&[b, a], mb.action_mask())?;
    let old_taken = tape.constant(&[b], mb.behavior_taken())?;
    let adv = tape.constant(&[b], mb.advantages.clone())?;

    let safe = tape.clamp_min(probs, PROB_FLOOR);
    let logits_like = tape.log(safe)?;
    let old_times_log = tape.mul(old, logits_like)?;
    let row_cross = tape.sum(old_times_log, Some(1))?;
    let kl_old_new = tape.sub(old_neg_entropy, row_cross)?;
    let picked = tape.mul(probs, onehot)?;
    let new_taken = tape.sum(picked, Some(1))?;
    let importance = tape.div(new_taken, old_taken)?;
    let gain = tape.mul(importance, adv)?;
    let scaled_kl = tape.scale(kl_old_new, mu);
    let objective = tape.sub(scaled_kl, gain)?;
    tape.mean(objective, None)
}

/// Batch mean of `KL(p ‖ q)` over row-major `rows × actions` slices.
pub fn mean_kl(p: &[f64], q: &[f64], num_actions: usize) -> f64 {
    let rows = p.len() / num_actions;
    let mut total = 0.0;
    for (pr, qr) in p.chunks(num_actions).zip(q.chunks(num_actions)) {
        let mut kl = 0.0;
        for (&pa, &qa) in pr.iter().zip(qr) {
            if pa > 0.0 {
                kl += pa * (pa.ln() - qa.max(PROB_FLOOR).ln());
            }
        }
        total += kl.max(0.0);
    }
    total / rows as f64
}

/// Doubles `mu` when the measured KL overshoots 1.5× the target, halves it
/// below target/1.5, and clamps to `[1e-4, 1e4]`.
pub fn adapt_mu(mu: f64, measured_kl: f64, kl_target: f64) -> f64 {
    let next = if measured_kl > 1.5 * kl_target {
        mu * 2.0
    } else if measured_kl < kl_target / 1.5 {
        mu / 2.0
    } else {
        mu
    };
    next.clamp(MU_MIN, MU_MAX)
}

/// Loss values of an ensemble on a batch, without gradients.
pub fn evaluate_losses(ensemble: &PolicyEnsemble, mb: &Minibatch, hp: &Hyperparams, mu: f64) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let c = BatchConstants::new(&mut tape, mb)?;
    let obs = tape.constant(&[mb.len(), mb.obs_dim], mb.obs.clone())?;
    let bound = ensemble.bind(&mut tape);
    let subs = ensemble.sub_forward(&mut tape, &bound, obs)?;
    Ok(total_loss(&mut tape, &subs, &c, hp, mu)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, Tensor};
    use crate::policy::{ActionDistribution, Architecture};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn handcrafted() -> (Vec<Vec<f64>>, Minibatch) {
        let subs = vec![vec![0.2, 0.5, 0.3, 0.6, 0.1, 0.3], vec![0.4, 0.4, 0.2, 0.1, 0.7, 0.2]];
        let mb = Minibatch {
            obs: vec![0.0; 2],
            obs_dim: 1,
            actions: vec![1, 0],
            behavior: vec![0.25, 0.5, 0.25, 0.3, 0.4, 0.3],
            num_actions: 3,
            advantages: vec![0.8, -1.1],
            returns: vec![0.0; 2],
        };
        (subs, mb)
    }

    fn leaves(tape: &mut Tape, subs: &[Vec<f64>], rows: usize, a: usize) -> Vec<Var> {
        subs.iter()
            .map(|p| tape.leaf(&Tensor::new(&[rows, a], p.clone()).unwrap().with_grad()))
            .collect()
    }

    #[test]
    fn handcrafted_two_policy_values() {
        let (subs, mb) = handcrafted();
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let vars = leaves(&mut tape, &subs, 2, 3);
        let hp = Hyperparams {
            alpha: 1.0,
            beta: 0.5,
            ..Hyperparams::default()
        };
        let (_, br) = total_loss(&mut tape, &vars, &c, &hp, 0.7).unwrap();
        // Reference values evaluated in 30-digit arithmetic.
        assert!((br.per_subpolicy_losses[0] - 0.824872681118512752984041).abs() < 1e-12);
        assert!((br.per_subpolicy_losses[1] - -0.0396348856551388650962035).abs() < 1e-12);
        assert!((br.ensemble_loss - 0.287109562768818353389432).abs() < 1e-12);
        assert!((br.diversity_loss - 0.265).abs() < 1e-12);
        assert!((br.total - 1.20484735823219224127727).abs() < 1e-12);
    }

    #[test]
    fn matching_behavior_gives_negative_mean_advantage() {
        let (_, mb) = handcrafted();
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let p = tape.constant(&[2, 3], mb.behavior.clone()).unwrap();
        let l = penalized_surrogate(&mut tape, p, &c, 3.0).unwrap();
        assert!((tape.item(l).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn zero_advantage_leaves_only_the_penalty() {
        let (subs, mut mb) = handcrafted();
        mb.advantages = vec![0.0; 2];
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let vars = leaves(&mut tape, &subs, 2, 3);
        let l = sub_policy_loss(&mut tape, &vars, 0, &c, 2.0).unwrap();
        let kl = mean_kl(&mb.behavior, &subs[0], 3);
        assert!(kl > 0.0);
        assert!((tape.item(l).unwrap() - 2.0 * kl).abs() < 1e-14);
        assert!(sub_policy_loss(&mut tape, &vars, 2, &c, 2.0).is_err());
    }

    #[test]
    fn one_member_ensemble_loss_equals_its_sub_policy_loss() {
        let (subs, mb) = handcrafted();
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let vars = leaves(&mut tape, &subs[..1], 2, 3);
        let a = sub_policy_loss(&mut tape, &vars, 0, &c, 0.7).unwrap();
        let b = ensemble_loss(&mut tape, &vars, &c, 0.7).unwrap();
        assert_eq!(tape.item(a).unwrap(), tape.item(b).unwrap());
    }

    fn diversity_of(subs: &[Vec<f64>], rows: usize, a: usize) -> f64 {
        let mut tape = Tape::new();
        let vars = leaves(&mut tape, subs, rows, a);
        let d = diversity_loss(&mut tape, &vars).unwrap();
        tape.item(d).unwrap()
    }

    #[test]
    fn diversity_anchors() {
        assert_eq!(diversity_of(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1, 2), 0.0);
        assert_eq!(diversity_of(&[vec![0.5, 0.5], vec![0.5, 0.5]], 1, 2), 0.5);
        assert_eq!(diversity_of(&[vec![0.5, 0.5]], 1, 2), 0.0);
        assert_eq!(diversity_of(&[vec![0.0, 1.0], vec![0.0, 1.0]], 1, 2), 1.0);
    }

    fn random_probs(rng: &mut ChaCha8Rng, rows: usize, a: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for _ in 0..rows {
            let raw: Vec<f64> = (0..a).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            out.extend(raw.iter().map(|v| v / s));
        }
        out
    }

    #[test]
    fn diversity_matches_triple_loop_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let (k, rows, a) = (4, 3, 4);
            let subs: Vec<Vec<f64>> = (0..k).map(|_| random_probs(&mut rng, rows, a)).collect();
            let mut oracle = 0.0;
            for s in 0..rows {
                for i in 0..k {
                    for j in i + 1..k {
                        for x in 0..a {
                            oracle += subs[i][s * a + x] * subs[j][s * a + x];
                        }
                    }
                }
            }
            oracle *= 2.0 / (k * (k - 1)) as f64 / rows as f64;
            let got = diversity_of(&subs, rows, a);
            assert!((got - oracle).abs() < 1e-12);
            assert!(got > 0.0 && got <= 1.0);
            let mut rev = subs.clone();
            rev.reverse();
            assert!((diversity_of(&rev, rows, a) - got).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_reduce_to_sub_policy_sum() {
        let (subs, mb) = handcrafted();
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let vars = leaves(&mut tape, &subs, 2, 3);
        let hp = Hyperparams {
            alpha: 0.0,
            beta: 0.0,
            ..Hyperparams::default()
        };
        let (t, br) = total_loss(&mut tape, &vars, &c, &hp, 0.7).unwrap();
        let sum: f64 = br.per_subpolicy_losses.iter().sum();
        assert_eq!(tape.item(t).unwrap(), sum);
    }

    #[test]
    fn adapt_mu_rule() {
        assert_eq!(adapt_mu(1.0, 0.01, 0.01), 1.0);
        assert_eq!(adapt_mu(1.0, 0.1, 0.01), 2.0);
        assert_eq!(adapt_mu(1.0, 0.001, 0.01), 0.5);
        assert_eq!(adapt_mu(MU_MAX, 5.0, 0.01), MU_MAX);
        assert_eq!(adapt_mu(MU_MIN, 0.0, 0.01), MU_MIN);
    }

    #[test]
    fn ensemble_gradient_is_mixture_gradient_over_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (k, rows, a) = (3, 4, 3);
        let subs: Vec<Vec<f64>> = (0..k).map(|_| random_probs(&mut rng, rows, a)).collect();
        let mb = Minibatch {
            obs: vec![0.0; rows],
            obs_dim: 1,
            actions: vec![0, 2, 1, 1],
            behavior: random_probs(&mut rng, rows, a),
            num_actions: a,
            advantages: vec![0.5, -0.3, 1.2, 0.1],
            returns: vec![0.0; rows],
        };
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let vars = leaves(&mut tape, &subs, rows, a);
        let l = ensemble_loss(&mut tape, &vars, &c, 0.9).unwrap();
        let g = tape.backward(l).unwrap();

        let mut mix = vec![0.0; rows * a];
        for s in &subs {
            for (m, v) in mix.iter_mut().zip(s) {
                *m += v / k as f64;
            }
        }
        let mut tape2 = Tape::new();
        let c2 = BatchConstants::new(&mut tape2, &mb).unwrap();
        let m = tape2.leaf(&Tensor::new(&[rows, a], mix).unwrap().with_grad());
        let l2 = penalized_surrogate(&mut tape2, m, &c2, 0.9).unwrap();
        let g2 = tape2.backward(l2).unwrap();
        let through_mix = g2.wrt(m).unwrap();
        for v in &vars {
            for (x, y) in g.wrt(*v).unwrap().iter().zip(through_mix) {
                assert!((x - y / k as f64).abs() < 1e-12);
            }
        }
    }

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize, obs_dim: usize, a: usize) -> Minibatch {
        Minibatch {
            obs: (0..rows * obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            obs_dim,
            actions: (0..rows).map(|_| rng.random_range(0..a)).collect(),
            behavior: random_probs(rng, rows, a),
            num_actions: a,
            advantages: (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
            returns: (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn network_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let arch = Architecture {
            hidden: vec![5],
            ..Architecture::new(3, 3)
        };
        for trial in 0..4 {
            let ens = PolicyEnsemble::new(&arch, 3, trial).unwrap();
            // Sharpen the heads so the penalty and ratio terms are not flat.
            let mut ens = ens;
            for p in ens.params_mut() {
                p.values_mut().iter_mut().for_each(|v| *v *= 3.0);
            }
            let mb = random_batch(&mut rng, 4, 3, 3);
            let hp = Hyperparams {
                alpha: 0.8,
                beta: 0.6,
                ..Hyperparams::default()
            };
            for (k, layer) in [(0, 0), (1, 2), (2, 3)] {
                let x = ens.sub_policies()[k].net().params()[layer].clone();
                let f = |tape: &mut Tape, v: Var| {
                    let c = BatchConstants::new(tape, &mb)?;
                    let obs = tape.constant(&[4, 3], mb.obs.clone())?;
                    let mut bound = ens.bind(tape);
                    bound.subs[k].vars_mut()[layer] = v;
                    let subs = ens.sub_forward(tape, &bound, obs)?;
                    Ok(total_loss(tape, &subs, &c, &hp, 1.3)?.0)
                };
                let err = finite_diff_check(f, &x, 1e-5).unwrap();
                assert!(err < 1e-4, "trial {trial} sub {k} layer {layer}: {err}");
            }
        }
    }

    #[test]
    fn ppo_reference_matches_sub_policy_loss_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mb = random_batch(&mut rng, 6, 1, 4);
        let probs = random_probs(&mut rng, 6, 4);
        let mut tape = Tape::new();
        let c = BatchConstants::new(&mut tape, &mb).unwrap();
        let v = tape.leaf(&Tensor::new(&[6, 4], probs).unwrap().with_grad());
        let a = sub_policy_loss(&mut tape, &[v], 0, &c, 0.4).unwrap();
        let b = ppo_penalty_loss(&mut tape, v, &mb, 0.4).unwrap();
        assert_eq!(tape.item(a).unwrap().to_bits(), tape.item(b).unwrap().to_bits());
        let ga = tape.backward(a).unwrap().wrt(v).unwrap().to_vec();
        let gb = tape.backward(b).unwrap().wrt(v).unwrap().to_vec();
        assert_eq!(ga, gb);
    }

    #[test]
    fn mean_kl_is_zero_on_identical_rows() {
        let d = ActionDistribution::new(vec![0.2, 0.8]).unwrap();
        let p = [d.probs(), d.probs()].concat();
        assert_eq!(mean_kl(&p, &p, 2), 0.0);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        assert!(Hyperparams {
            k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            beta: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            mu: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
