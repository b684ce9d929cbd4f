use std::cell::Cell;

use eppo_core::autodiff::Tensor;
use eppo_core::envs::{EnvSpec, Termination};
use eppo_core::losses::{evaluate_losses, Hyperparams};
use eppo_core::nn::{Activation, Mlp};
use eppo_core::policy::{ActionDistribution, Architecture, PolicyEnsemble, SubPolicy};
use eppo_core::seeding;
use eppo_core::trainer::{
    collect_rollout, evaluate, finish_rollout, train, update, AlgoConfig, Collector, Learner, Objective, Optimizer,
    Variant,
};
use eppo_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_arch(spec: &EnvSpec) -> Architecture {
    Architecture {
        hidden: vec![8],
        ..Architecture::new(spec.observation_len(), 3)
    }
}

fn tiny_config(variant: Variant, seed: u64) -> AlgoConfig {
    let mut cfg = AlgoConfig::new(variant, EnvSpec::empty_room(3), seed);
    cfg.hidden = vec![8];
    cfg.eval_interval = 200;
    cfg.eval_episodes = 2;
    cfg.hyperparams = Hyperparams {
        k: 3,
        rollout_length: 150,
        minibatch_size: 32,
        epochs_per_update: 2,
        total_env_steps: 500,
        ..Hyperparams::default()
    };
    cfg
}

/// Policy that moves forward with probability indistinguishable from one.
fn always_forward(obs_dim: usize) -> SubPolicy {
    let params = vec![
        Tensor::zeros(&[obs_dim, 3]).unwrap().with_grad(),
        Tensor::vector(&[-50.0, -50.0, 50.0]).unwrap().with_grad(),
    ];
    SubPolicy::from_net(Mlp::from_params(&[obs_dim, 3], Activation::Tanh, params).unwrap())
}

fn zero_critic(obs_dim: usize) -> Mlp {
    let params = vec![
        Tensor::zeros(&[obs_dim, 1]).unwrap().with_grad(),
        Tensor::zeros(&[1]).unwrap().with_grad(),
    ];
    Mlp::from_params(&[obs_dim, 1], Activation::Tanh, params).unwrap()
}

#[test]
fn rollout_length_and_done_flags_follow_the_scripted_trace() {
    // Walking into the east wall forever times out every 40 steps.
    let spec = EnvSpec {
        max_steps: 40,
        ..EnvSpec::empty_room(3)
    };
    let d = spec.observation_len();
    let ens = PolicyEnsemble::from_parts(vec![always_forward(d); 2], zero_critic(d)).unwrap();
    let mut collector = Collector::new(&spec, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let buf = collect_rollout(&ens, &mut collector, 128, &mut rng).unwrap();
    assert_eq!(buf.len(), 128);
    let dones: Vec<usize> = buf
        .transitions()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.done)
        .map(|(i, _)| i)
        .collect();
    assert_eq!(dones, vec![39, 79, 119]);
    assert_eq!(collector.finished_episodes(), &[(0.0, Termination::Timeout); 3]);
    assert!(buf.transitions().iter().all(|t| t.action == 2));
}

#[test]
fn identical_sub_policies_collect_with_their_own_distribution() {
    let spec = EnvSpec::dist_shift();
    let arch = small_arch(&spec);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sub = SubPolicy::new(&arch, &mut rng).unwrap();
    let ens = PolicyEnsemble::from_parts(vec![sub.clone(); 4], zero_critic(arch.obs_dim)).unwrap();
    let mut collector = Collector::new(&spec, 1).unwrap();
    let buf = collect_rollout(&ens, &mut collector, 64, &mut rng).unwrap();
    for t in buf.transitions() {
        let own = sub.distribution(&t.observation).unwrap();
        for (a, b) in t.behavior_probs.probs().iter().zip(own.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn rollouts_are_reproducible() {
    let spec = EnvSpec::dist_shift();
    let ens = PolicyEnsemble::new(&small_arch(&spec), 4, 9).unwrap();
    let run = || {
        let mut collector = Collector::new(&spec, 2).unwrap();
        let mut rng = seeding::rng(2, 77);
        collect_rollout(&ens, &mut collector, 300, &mut rng).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn only_the_mean_policy_interacts_with_the_environment() {
    let spec = EnvSpec::dist_shift();
    let ens = PolicyEnsemble::new(&small_arch(&spec), 4, 4).unwrap();
    let mut collector = Collector::new(&spec, 4).unwrap();
    collector.enable_audit();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    collect_rollout(&ens, &mut collector, 250, &mut rng).unwrap();
    let log = collector.audit_log().unwrap();
    assert_eq!(log.len() as u64, collector.env_steps());
    for rec in log {
        let mixture = ens.distribution(&rec.observation).unwrap();
        assert_eq!(rec.sampling_probs, mixture);
        for sub in ens.sub_distributions(&rec.observation).unwrap() {
            assert_ne!(rec.sampling_probs, sub);
        }
    }
}

fn prepared_learner(
    hp: &Hyperparams,
    objective: Objective,
    seed: u64,
) -> (Learner, eppo_core::advantage::AdvantageBuffer) {
    let spec = EnvSpec::dist_shift();
    let mut l = Learner::new(&small_arch(&spec), &spec, hp.clone(), objective, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = collect_rollout(&l.ensemble, &mut l.collector, 96, &mut rng).unwrap();
    finish_rollout(&mut buf, &l.ensemble, &l.collector, hp.gamma, hp.lambda, true).unwrap();
    (l, buf)
}

fn param_bits(e: &PolicyEnsemble) -> Vec<u64> {
    e.params()
        .iter()
        .flat_map(|t| t.values().iter().map(|v| v.to_bits()))
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let hp = Hyperparams {
        learning_rate: 0.0,
        minibatch_size: 32,
        ..Hyperparams::default()
    };
    let (mut l, buf) = prepared_learner(&hp, Objective::Ensemble, 1);
    let before = param_bits(&l.ensemble);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    update(
        &mut l.ensemble,
        &mut l.optimizer,
        &buf,
        &hp,
        Objective::Ensemble,
        &mut rng,
    )
    .unwrap();
    assert_eq!(before, param_bits(&l.ensemble));
}

#[test]
fn single_member_update_matches_the_reference_objective_bitwise() {
    let hp = Hyperparams {
        k: 1,
        alpha: 0.0,
        beta: 0.0,
        minibatch_size: 32,
        ..Hyperparams::default()
    };
    let (l, buf) = prepared_learner(&hp, Objective::Ensemble, 2);
    let mut a = l.ensemble.clone();
    let mut b = l.ensemble.clone();
    let mut oa = Optimizer::new(&hp);
    let mut ob = Optimizer::new(&hp);
    let ba = update(&mut a, &mut oa, &buf, &hp, Objective::Ensemble, &mut seeding::rng(2, 1)).unwrap();
    let bb = update(
        &mut b,
        &mut ob,
        &buf,
        &hp,
        Objective::SinglePolicy,
        &mut seeding::rng(2, 1),
    )
    .unwrap();
    assert_ne!(param_bits(&a), param_bits(&l.ensemble));
    assert_eq!(param_bits(&a), param_bits(&b));
    assert_eq!(oa.mu.to_bits(), ob.mu.to_bits());
    assert_eq!(ba.total.to_bits(), bb.total.to_bits());
}

#[test]
fn one_update_lowers_the_loss_on_its_own_buffer() {
    let mut improved = 0;
    for seed in 0..100 {
        let hp = Hyperparams {
            k: 3,
            epochs_per_update: 1,
            minibatch_size: 96,
            ..Hyperparams::default()
        };
        let (mut l, buf) = prepared_learner(&hp, Objective::Ensemble, seed);
        let full = buf.full_batch().unwrap();
        let mu = l.optimizer.mu;
        let before = evaluate_losses(&l.ensemble, &full, &hp, mu).unwrap().total;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        update(
            &mut l.ensemble,
            &mut l.optimizer,
            &buf,
            &hp,
            Objective::Ensemble,
            &mut rng,
        )
        .unwrap();
        let after = evaluate_losses(&l.ensemble, &full, &hp, mu).unwrap().total;
        improved += usize::from(after < before);
    }
    assert!(improved >= 95, "loss decreased on {improved} of 100 seeds");
}

#[test]
fn zero_budget_yields_only_the_initial_row() {
    let mut cfg = tiny_config(Variant::Eppo, 0);
    cfg.hyperparams.total_env_steps = 0;
    let rec = train(&cfg).unwrap();
    assert_eq!(rec.rows.len(), 1);
    assert_eq!(rec.rows[0].env_steps, 0);
    assert_eq!(rec.total_env_steps(), 0);
}

#[test]
fn every_variant_spends_exactly_its_budget() {
    for v in Variant::ALL {
        let rec = train(&tiny_config(v, 1)).unwrap();
        assert_eq!(rec.total_env_steps(), 500, "{v}");
        let expected_learners = if v.independent_learners() { 3 } else { 1 };
        assert_eq!(rec.learner_steps.len(), expected_learners, "{v}");
        let steps: Vec<usize> = rec.rows.iter().map(|r| r.env_steps).collect();
        assert_eq!(steps, vec![0, 300, 450, 500], "{v}");
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = tiny_config(Variant::Eppo, 7);
    assert_eq!(train(&cfg).unwrap(), train(&cfg).unwrap());
}

#[test]
fn invalid_configs_fail_before_training() {
    let mut cfg = tiny_config(Variant::Eppo, 0);
    cfg.eval_episodes = 0;
    assert!(matches!(train(&cfg), Err(Error::Config(_))));
    let mut cfg = tiny_config(Variant::Eppo, 0);
    cfg.hyperparams.mu = -1.0;
    assert!(matches!(train(&cfg), Err(Error::Config(_))));
    let mut cfg = tiny_config(Variant::Eppo, 0);
    cfg.env.width = 2;
    assert!(matches!(train(&cfg), Err(Error::Config(_))));
}

#[test]
fn ensembles_carry_k_times_the_single_policy_parameters() {
    let cfg = tiny_config(Variant::Ppo, 0);
    let single = PolicyEnsemble::new(&cfg.architecture(), 1, 0)
        .unwrap()
        .policy_param_count();
    for v in [
        Variant::Pemv,
        Variant::Pema,
        Variant::Eppo,
        Variant::EppoNoDiv,
        Variant::EppoNoEns,
    ] {
        let mut cfg = tiny_config(v, 0);
        cfg.hyperparams.total_env_steps = 0;
        let rec = train(&cfg).unwrap();
        assert_eq!(rec.final_policy.policy_param_count(), 3 * single, "{v}");
    }
}

#[test]
fn mean_policy_starts_at_least_as_uncertain_as_a_single_policy() {
    for seed in 0..5 {
        let mut eppo = AlgoConfig::new(Variant::Eppo, EnvSpec::dist_shift(), seed);
        eppo.hyperparams.total_env_steps = 0;
        eppo.eval_episodes = 3;
        let ppo = AlgoConfig {
            variant: Variant::Ppo,
            ..eppo.clone()
        };
        let he = train(&eppo).unwrap().rows[0].entropy;
        let hp = train(&ppo).unwrap().rows[0].entropy;
        assert!(he >= hp, "seed {seed}: {he} < {hp}");
    }
}

#[test]
fn scripted_policy_reaches_the_goal_every_episode() {
    // From the top-left corner facing east: two steps, turn south, two steps.
    let script = [2usize, 2, 1, 2, 2];
    let t = Cell::new(0usize);
    let policy = |_: &[f64]| {
        let a = script[t.get() % script.len()];
        t.set(t.get() + 1);
        Ok(ActionDistribution::point_mass(3, a))
    };
    let spec = EnvSpec::empty_room(3);
    let ret = evaluate(policy, &spec, 6, 0, true).unwrap();
    let expected = 1.0 - 0.9 * 5.0 / spec.max_steps as f64;
    assert!((ret - expected).abs() < 1e-12);
}

#[test]
fn uniform_policy_stays_far_below_a_planner_on_multi_room() {
    let spec = EnvSpec::multi_room();
    let uniform = evaluate(|_| Ok(ActionDistribution::uniform(3)), &spec, 50, 3, false).unwrap();
    // Follow breadth-first plans on an identically seeded mirror environment.
    let mirror = std::cell::RefCell::new((spec.build().unwrap(), Vec::<usize>::new(), 0u64));
    let layouts = seeding::derive(3, seeding::streams::EVAL_LAYOUTS);
    let planner = |_: &[f64]| {
        let mut m = mirror.borrow_mut();
        if m.1.is_empty() {
            let ep = m.2;
            m.0.reset(seeding::derive(layouts, ep)).unwrap();
            let plan = m.0.plan_to_goal().unwrap();
            m.1 = plan.iter().rev().map(|a| a.index()).collect();
            m.2 += 1;
        }
        let a = m.1.pop().unwrap();
        Ok(ActionDistribution::point_mass(3, a))
    };
    let planned = evaluate(planner, &spec, 50, 3, true).unwrap();
    assert!(planned > 0.85, "planner return {planned}");
    assert!(uniform < 0.3 * planned, "uniform {uniform} vs planner {planned}");
}

#[test]
fn voting_over_identical_policies_matches_averaging_point_masses() {
    let spec = EnvSpec::dist_shift();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sub = SubPolicy::new(&small_arch(&spec), &mut rng).unwrap();
    let vote = |o: &[f64]| ActionDistribution::vote(&vec![sub.distribution(o)?; 4]);
    let mean = |o: &[f64]| {
        let a = sub.distribution(o)?.argmax();
        ActionDistribution::mean(&vec![ActionDistribution::point_mass(3, a); 4])
    };
    let seed = rng.random();
    assert_eq!(
        evaluate(vote, &spec, 5, seed, false).unwrap(),
        evaluate(mean, &spec, 5, seed, false).unwrap()
    );
}
