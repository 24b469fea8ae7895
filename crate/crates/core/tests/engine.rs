use proptest::prelude::*;
use vsmc_policy::engine::sweep::{coupling_violations, determinism_violations};
use vsmc_policy::engine::{
    assemble_gradient, sweep, sweep_with, Baseline, Resampler, SweepOptions, VariantConfig,
};
use vsmc_policy::env::gridworld::builtin_layout;
use vsmc_policy::env::{fixtures, AdvisingSpec, EnvSpec, FixtureKind, GridWorldSpec, TireworldSpec};
use vsmc_policy::eval::brute_force_evidence;
use vsmc_policy::mdp::Environment;
use vsmc_policy::policy::{GradAccumulator, Proposal, Tabular};
use vsmc_policy::{EnvHandle, RngStream, State};

fn variants() -> Vec<(String, VariantConfig)> {
    let mut v = Vec::new();
    for name in ["vsmc", "vis", "vsa"] {
        for r in [Resampler::Systematic, Resampler::Multinomial] {
            let mut c = VariantConfig::preset(name).unwrap();
            c.resampler = r;
            v.push((format!("{name}/{r:?}"), c));
        }
    }
    v
}

/// A tabular proposal with fixed, uneven logits on every live model state.
fn skewed(env: &dyn Environment, seed: u64) -> Proposal {
    let m = env.model().unwrap();
    let mut t = Tabular::new(env.action_count());
    let mut r = RngStream::new(seed);
    for i in (0..m.len()).filter(|&i| !m.is_absorbing(i)) {
        let l = (0..env.action_count()).map(|_| 2.0 * r.uniform() - 1.0).collect();
        t.set_logits(m.states()[i].clone(), l).unwrap();
    }
    Proposal::Tabular(t)
}

#[test]
fn evidence_estimate_is_unbiased() {
    let sweeps = 20_000u64;
    for kind in ["bandit", "tree", "chain", "identity", "loop"] {
        let env = fixtures::build(&kind.parse().unwrap()).unwrap();
        let q = skewed(&env, 3);
        let exact = brute_force_evidence(&env, &q, 1.0).unwrap().z_sweep();
        for (name, cfg) in variants() {
            let rng = RngStream::new(17);
            let z: Vec<f64> = (0..sweeps)
                .map(|k| sweep(&env, &q, &cfg, 1.0, &rng.fork(k)).unwrap().log_z.exp())
                .collect();
            let mean = z.iter().sum::<f64>() / sweeps as f64;
            let var = z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (sweeps - 1) as f64;
            let se = (var / sweeps as f64).sqrt();
            assert!(
                (mean - exact).abs() <= 4.0 * se + 1e-12,
                "{kind} {name}: mean {mean} exact {exact} se {se}"
            );
        }
    }
}

#[test]
fn deterministic_fixture_evidence_equals_policy_evidence() {
    let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
    let bf = brute_force_evidence(&env, &skewed(&env, 1), 1.0).unwrap();
    assert!((bf.log_z - bf.log_z_sweep).abs() < 1e-12);
    let mass: f64 = bf.policies.iter().map(|p| p.posterior).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

/// `E[log Z_hat]` on the bandit with `n` particles: the number of particles
/// on the paying arm is binomial, and the estimate depends only on it.
fn bandit_expected_log_z(n: usize, q: f64, scale: f64) -> f64 {
    let w_good = scale + (0.5f64).ln() - q.ln();
    let w_bad = (0.5f64).ln() - (1.0 - q).ln();
    let mut choose = 1.0;
    let mut total = 0.0;
    for k in 0..=n {
        if k > 0 {
            choose = choose * (n - k + 1) as f64 / k as f64;
        }
        let p = choose * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
        let z = (k as f64 * w_good.exp() + (n - k) as f64 * w_bad.exp()) / n as f64;
        total += p * z.ln();
    }
    total
}

fn mean_root_gradient(env: &dyn Environment, q: &Proposal, cfg: &VariantConfig, sweeps: u64) -> (f64, f64) {
    let rng = RngStream::new(5);
    let s = env.initial_state();
    let g: Vec<f64> = (0..sweeps)
        .map(|k| {
            let sr = sweep(env, q, cfg, 1.0, &rng.fork(k)).unwrap();
            let mut acc = q.new_accumulator();
            q.backprop_weighted_logq(&assemble_gradient(&sr, cfg), &mut acc).unwrap();
            let GradAccumulator::Rows(rows) = acc else { unreachable!() };
            rows.get(&s).map_or(0.0, |r| r[0])
        })
        .collect();
    let m = g.iter().sum::<f64>() / sweeps as f64;
    let var = g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (sweeps - 1) as f64;
    (m, (var / sweeps as f64).sqrt())
}

#[test]
fn bandit_gradient_matches_closed_form() {
    let env = fixtures::build(&FixtureKind::bandit()).unwrap();
    let s = env.initial_state();
    for (logit, baseline) in [(-1.4, Baseline::Mean), (0.8, Baseline::Mean), (-1.4, Baseline::None)] {
        let mut t = Tabular::new(2);
        t.set_logits(s.clone(), vec![logit / 2.0, -logit / 2.0]).unwrap();
        let q = Proposal::Tabular(t);
        let cfg = VariantConfig { baseline, ..VariantConfig::vsmc() };
        let (g, se) = mean_root_gradient(&env, &q, &cfg, 40_000);
        let p = 1.0 / (1.0 + (-logit).exp());
        let h = 1e-5;
        // d/d logit_0 with logit_1 fixed: dp = p (1 - p)
        let exact = (bandit_expected_log_z(10, p + h, 1.0) - bandit_expected_log_z(10, p - h, 1.0)) / (2.0 * h)
            * p
            * (1.0 - p);
        assert!((g - exact).abs() < 4.0 * se + 1e-4, "logit {logit}: {g} ± {se} vs {exact}");
    }
}

#[test]
fn mean_baseline_reduces_variance() {
    let env = fixtures::build(&FixtureKind::bandit()).unwrap();
    let q = skewed(&env, 2);
    let plain = mean_root_gradient(&env, &q, &VariantConfig::vsmc(), 5_000).1;
    let cfg = VariantConfig { baseline: Baseline::Mean, ..VariantConfig::vsmc() };
    let reduced = mean_root_gradient(&env, &q, &cfg, 5_000).1;
    assert!(reduced < 0.5 * plain, "{reduced} vs {plain}");
}

/// Without resampling the estimator is unbiased on multi-step problems too;
/// compare against a common-random-numbers central difference.
#[test]
fn importance_sampling_gradient_matches_finite_differences_on_the_tree() {
    let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
    let s = env.initial_state();
    let mut t = Tabular::new(2);
    t.set_logits(s.clone(), vec![-0.7, 0.7]).unwrap();
    let cfg = VariantConfig { baseline: Baseline::Mean, ..VariantConfig::vis() };
    let q = Proposal::Tabular(t.clone());
    let (g, se) = mean_root_gradient(&env, &q, &cfg, 40_000);
    let h = 0.1;
    let shifted = |d: f64| {
        let mut u = t.clone();
        u.set_logits(s.clone(), vec![-0.7 + d, 0.7]).unwrap();
        Proposal::Tabular(u)
    };
    let (plus, minus) = (shifted(h), shifted(-h));
    let rng = RngStream::new(6);
    let n = 200_000u64;
    let fd: Vec<f64> = (0..n)
        .map(|k| {
            let a = sweep(&env, &plus, &cfg, 1.0, &rng.fork(k)).unwrap().log_z;
            let b = sweep(&env, &minus, &cfg, 1.0, &rng.fork(k)).unwrap().log_z;
            (a - b) / (2.0 * h)
        })
        .collect();
    let m = fd.iter().sum::<f64>() / n as f64;
    let fd_se = (fd.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt();
    let tol = 4.0 * (se * se + fd_se * fd_se).sqrt();
    assert!((g - m).abs() < tol, "assembled {g} ± {se}, finite difference {m} ± {fd_se}");
}

fn sweep_envs() -> Vec<EnvHandle> {
    let mut v: Vec<EnvHandle> = ["flat", "multimodal", "shared_dynamics"]
        .into_iter()
        .map(|n| EnvSpec::GridWorld(GridWorldSpec::parse(builtin_layout(n).unwrap()).unwrap()).build().unwrap())
        .collect();
    v.push(EnvSpec::Blackjack.build().unwrap());
    v.push(EnvSpec::Tireworld(TireworldSpec::instance(1).unwrap()).build().unwrap());
    v.push(EnvSpec::Advising(AdvisingSpec::instance(1).unwrap()).build().unwrap());
    v.push(EnvSpec::Fixture(FixtureKind::StochasticLoop).build().unwrap());
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweeps_are_consistent_coupled_and_replayable(
        seed in any::<u64>(),
        which in 0usize..7,
        particles in 1usize..12,
        multinomial in any::<bool>(),
    ) {
        let envs = sweep_envs();
        let env = envs[which % envs.len()].as_ref();
        let q = Proposal::perceptron(env, 8, &RngStream::new(seed).fork("init")).unwrap();
        let cfg = VariantConfig {
            particles,
            resampler: if multinomial { Resampler::Multinomial } else { Resampler::Systematic },
            ..VariantConfig::vsmc()
        };
        let opts = SweepOptions { record_transitions: true };
        let rng = RngStream::new(seed).fork("sweep");
        let a = sweep_with(env, &q, &cfg, 1.0, &rng, opts).unwrap();
        prop_assert_eq!(determinism_violations(&a), 0);
        prop_assert_eq!(coupling_violations(&a), 0);
        let b = sweep_with(env, &q, &cfg, 1.0, &rng, opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn log_weights_stay_normalised(seed in any::<u64>(), which in 0usize..7) {
        let envs = sweep_envs();
        let env = envs[which % envs.len()].as_ref();
        let q = Proposal::perceptron(env, 8, &RngStream::new(seed).fork("init")).unwrap();
        let sr = sweep(env, &q, &VariantConfig::vis(), 1.0, &RngStream::new(seed)).unwrap();
        let total: f64 = sr.final_weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let sum: f64 = sr.increments.iter().sum();
        prop_assert!((sum - sr.log_z).abs() < 1e-9);
    }
}

#[test]
fn revisited_states_reuse_actions_across_the_loop() {
    let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
    let q = Proposal::tabular(env.action_count());
    let opts = SweepOptions { record_transitions: true };
    let mut revisits = 0;
    for k in 0..200u64 {
        let sr = sweep_with(&env, &q, &VariantConfig::vsmc(), 1.0, &RngStream::new(k), opts).unwrap();
        assert_eq!(determinism_violations(&sr), 0);
        revisits += sr
            .trajectories
            .iter()
            .map(|t| {
                let mut seen: Vec<&State> = Vec::new();
                t.steps
                    .iter()
                    .filter(|s| {
                        let again = seen.contains(&&s.state);
                        seen.push(&s.state);
                        again
                    })
                    .count()
            })
            .sum::<usize>();
    }
    assert!(revisits > 0, "the loop fixture must exercise revisits");
}
