use rand::seq::SliceRandom;
use rand::Rng;

use crate::advantage::{value_loss, AdvantageBuffer, Minibatch};
use crate::autodiff::Tape;
use crate::error::{contract, Result};
use crate::losses::{adapt_mu, mean_kl, ppo_penalty_loss, total_loss, BatchConstants, Hyperparams, LossBreakdown};
use crate::nn::{clip_grad_norm, Adam};
use crate::policy::PolicyEnsemble;

/// Which differentiable objective an update minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `Σ_k L_k + α·L_e + β·L_d`.
    Ensemble,
    /// Standalone KL-penalized single-policy loss; requires `K = 1`.
    SinglePolicy,
}

/// Parameters, optimizer state and penalty coefficient of one learner.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub adam: Adam,
    pub mu: f64,
}

impl Optimizer {
    pub fn new(hp: &Hyperparams) -> Self {
        Self {
            adam: Adam::new(hp.learning_rate),
            mu: hp.mu,
        }
    }
}

/// One gradient step on a minibatch. Returns the loss breakdown before the
/// step.
pub fn minibatch_step(
    ensemble: &mut PolicyEnsemble,
    opt: &mut Optimizer,
    mb: &Minibatch,
    hp: &Hyperparams,
    objective: Objective,
) -> Result<LossBreakdown> {
    let mut tape = Tape::new();
    let obs = tape.constant(&[mb.len(), mb.obs_dim], mb.obs.clone())?;
    let bound = ensemble.bind(&mut tape);
    let subs = ensemble.sub_forward(&mut tape, &bound, obs)?;
    let (policy_loss, breakdown) = match objective {
        Objective::Ensemble => {
            let c = BatchConstants::new(&mut tape, mb)?;
            total_loss(&mut tape, &subs, &c, hp, opt.mu)?
        }
        Objective::SinglePolicy => {
            contract!(subs.len() == 1, "single-policy objective with K = {}", subs.len());
            let l = ppo_penalty_loss(&mut tape, subs[0], mb, opt.mu)?;
            let v = tape.item(l)?;
            let b = LossBreakdown {
                per_subpolicy_losses: vec![v],
                ensemble_loss: v,
                diversity_loss: 0.0,
                total: v,
                mean_kl_to_behavior: mean_kl(&mb.behavior, tape.value(subs[0]), mb.num_actions),
            };
            (l, b)
        }
    };
    let critic = value_loss(&mut tape, ensemble.value_net(), &bound.value, obs, &mb.returns)?;
    let weighted = tape.scale(critic, hp.value_loss_weight);
    let loss = tape.add(policy_loss, weighted)?;
    let grads = tape.backward(loss)?;
    ensemble.zero_grad();
    ensemble.accumulate_grads(&grads, &bound)?;
    let mut params = ensemble.params_mut();
    clip_grad_norm(&mut params, hp.max_grad_norm);
    opt.adam.step(&mut params)?;
    Ok(breakdown)
}

/// `epochs_per_update` passes of shuffled minibatches over `buf`, then one
/// penalty adaptation on the measured `KL(π̂′ ‖ π̂)` over the whole buffer.
///
/// The returned breakdown averages the per-minibatch losses; its KL field
/// holds the post-update measurement used for adaptation.
pub fn update<R: Rng + ?Sized>(
    ensemble: &mut PolicyEnsemble,
    opt: &mut Optimizer,
    buf: &AdvantageBuffer,
    hp: &Hyperparams,
    objective: Objective,
    rng: &mut R,
) -> Result<LossBreakdown> {
    contract!(buf.is_computed(), "update before advantages were computed");
    contract!(!buf.is_empty(), "update on an empty buffer");
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut sum = LossBreakdown {
        per_subpolicy_losses: vec![0.0; ensemble.k()],
        ..LossBreakdown::default()
    };
    let mut batches = 0usize;
    for _ in 0..hp.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(hp.minibatch_size) {
            let mb = buf.minibatch(chunk)?;
            let b = minibatch_step(ensemble, opt, &mb, hp, objective)?;
            for (s, v) in sum.per_subpolicy_losses.iter_mut().zip(&b.per_subpolicy_losses) {
                *s += v;
            }
            sum.ensemble_loss += b.ensemble_loss;
            sum.diversity_loss += b.diversity_loss;
            sum.total += b.total;
            batches += 1;
        }
    }
    let n = batches as f64;
    sum.per_subpolicy_losses.iter_mut().for_each(|v| *v /= n);
    sum.ensemble_loss /= n;
    sum.diversity_loss /= n;
    sum.total /= n;

    let full = buf.full_batch()?;
    let now = ensemble.probs_batch(&full.obs, full.len())?;
    let kl = mean_kl(&full.behavior, &now, full.num_actions);
    sum.mean_kl_to_behavior = kl;
    opt.mu = adapt_mu(opt.mu, kl, hp.kl_target);
    Ok(sum)
}
