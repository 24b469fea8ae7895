//! One SMC sweep over lazily drawn deterministic policies.
//!
//! Every particle carries its own action memory, so the actions it takes
//! form one deterministic policy over the states it visits. Transitions are
//! drawn once per `(state, action, occurrence)` and shared by all particles,
//! so particles differ only through their policies.
//!
//! The sweep keeps normalized log-weights. At step `t` particle `i` adds
//! `w = r + T (log p - log q)`; the step's evidence increment is
//! `log sum_i exp(logW_i + w_i)` and the weights are renormalized by it. With
//! resampling after every step the increment is the log-mean-exp of the step
//! weights. Without resampling the increments telescope to the log-mean-exp
//! of the cumulative weights.

use std::collections::HashMap;
use std::sync::Arc;

use super::config::{Baseline, VariantConfig};
use super::resample::{effective_sample_size, resample};
use crate::error::{Error, Result};
use crate::mdp::{simulate_step, ActionId, Environment, State, Step, Trajectory};
use crate::policy::{prior_logp, sample_from, Proposal};
use crate::rng::RngStream;

type Counts = HashMap<(State, ActionId), u32>;

struct HistoryNode {
    step: Step,
    parent: Option<Arc<HistoryNode>>,
}

#[derive(Clone)]
pub struct ParticleState {
    pub current: State,
    action_memory: Arc<HashMap<State, ActionId>>,
    count_memory: Arc<Counts>,
    /// Log of the normalized importance weight.
    pub log_weight: f64,
    pub total_return: f64,
    history: Option<Arc<HistoryNode>>,
}

impl ParticleState {
    pub fn new(initial: State, log_weight: f64) -> Self {
        ParticleState {
            current: initial,
            action_memory: Arc::default(),
            count_memory: Arc::default(),
            log_weight,
            total_return: 0.0,
            history: None,
        }
    }

    pub fn memoized_action(&self, s: &State) -> Option<ActionId> {
        self.action_memory.get(s).copied()
    }

    /// How often this particle has taken `a` in `s`.
    pub fn count(&self, s: &State, a: ActionId) -> u32 {
        self.count_memory.get(&(s.clone(), a)).copied().unwrap_or(0)
    }

    /// Records `a` as the action of `s`. Shared memories are copied first,
    /// so particles duplicated by resampling stay independent.
    pub fn memoize(&mut self, s: State, a: ActionId) {
        Arc::make_mut(&mut self.action_memory).insert(s, a);
    }

    fn bump_count(&mut self, s: &State, a: ActionId) -> u32 {
        let c = Arc::make_mut(&mut self.count_memory)
            .entry((s.clone(), a))
            .or_insert(0);
        *c += 1;
        *c
    }
}

/// The outcome of [`select_action`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub action: ActionId,
    pub log_p: f64,
    pub log_q: f64,
    /// The action was drawn from the proposal (always true in mixture mode).
    pub sampled: bool,
    /// The particle had not decided an action for this state before.
    pub first_visit: bool,
    /// Occurrence index of `(state, action)` for this particle, from 1.
    pub count: u32,
}

/// Reuses the memoized action of a revisited state, otherwise samples from
/// `probs`. Always increments the particle's count for the chosen action.
pub fn select_action_from(
    particle: &mut ParticleState,
    probs: &[f64],
    rng: &mut RngStream,
    cfg: &VariantConfig,
) -> Selection {
    let s = particle.current.clone();
    let memo = particle.memoized_action(&s);
    let first_visit = memo.is_none();
    let sel = match memo {
        Some(a) if cfg.enforce_deterministic => (a, 0.0, 0.0, false),
        _ => {
            let (a, log_q) = sample_from(probs, rng);
            if first_visit {
                particle.memoize(s.clone(), a);
            }
            (a, prior_logp(probs.len()), log_q, true)
        }
    };
    let count = particle.bump_count(&s, sel.0);
    Selection {
        action: sel.0,
        log_p: sel.1,
        log_q: sel.2,
        sampled: sel.3,
        first_visit,
        count,
    }
}

pub fn select_action(
    particle: &mut ParticleState,
    proposal: &Proposal,
    rng: &mut RngStream,
    cfg: &VariantConfig,
) -> Result<Selection> {
    let probs = proposal.action_probs(&particle.current)?;
    Ok(select_action_from(particle, &probs, rng, cfg))
}

/// The lazily sampled transition memory of one sweep.
pub struct SharedDynamics {
    memory: HashMap<(State, ActionId, u32), (State, f64)>,
    rng: RngStream,
}

impl SharedDynamics {
    pub fn new(rng: RngStream) -> Self {
        SharedDynamics {
            memory: HashMap::new(),
            rng,
        }
    }

    /// The `c`-th transition of `(s, a)`. Its randomness is keyed by
    /// `(s, a, c)`, so the draw does not depend on which particle asks first.
    pub fn transition(
        &mut self,
        env: &dyn Environment,
        s: &State,
        a: ActionId,
        c: u32,
    ) -> Result<(State, f64)> {
        let key = (s.clone(), a, c);
        if let Some(hit) = self.memory.get(&key) {
            return Ok(hit.clone());
        }
        let mut r = self.rng.fork(s.digest()).fork(a).fork(c);
        let out = simulate_step(env, s, a, &mut r)?;
        self.memory.insert(key, out.clone());
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }
}

/// A first-visit (or, in mixture mode, every) sampled action.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub state: State,
    pub action: ActionId,
    pub step: usize,
    pub particle: usize,
    pub first_visit: bool,
    pub log_q: f64,
    /// Normalized weight of the particle when its weights next meet the
    /// evidence: after this step when resampling every step, at the end of
    /// the sweep without resampling. This is the derivative of the evidence
    /// estimate with respect to the particle's step weight.
    pub weight: f64,
    /// Leave-one-out value of the step's evidence increment, with this
    /// particle's step weight replaced by the mean of the others'. Zero
    /// unless the variant uses the mean baseline.
    pub baseline: f64,
}

/// One transition taken by one particle, for coupling checks.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub step: usize,
    pub particle: usize,
    pub state: State,
    pub action: ActionId,
    pub count: u32,
    pub next: State,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub log_z: f64,
    /// Evidence increment of every action step; zero once all particles are
    /// absorbed.
    pub increments: Vec<f64>,
    /// `log_z_suffix[t] = sum_{t' >= t} increments[t']`.
    pub log_z_suffix: Vec<f64>,
    pub ledger: Vec<LedgerEntry>,
    /// Effective sample size after each step, before resampling.
    pub ess: Vec<f64>,
    /// Normalized weights after each step, before resampling.
    pub step_weights: Vec<Vec<f64>>,
    pub temperature: f64,
    /// Final particles' trajectories, following their ancestry.
    pub trajectories: Vec<Trajectory>,
    pub final_weights: Vec<f64>,
    /// Every transition taken, when requested.
    pub transitions: Vec<TransitionRecord>,
}

impl SweepResult {
    pub fn mean_ess(&self) -> f64 {
        if self.ess.is_empty() {
            return self.final_weights.len() as f64;
        }
        self.ess.iter().sum::<f64>() / self.ess.len() as f64
    }

    pub fn mean_return(&self) -> f64 {
        self.trajectories.iter().map(|t| t.total_return).sum::<f64>() / self.trajectories.len() as f64
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepOptions {
    pub record_transitions: bool,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn sweep(
    env: &dyn Environment,
    proposal: &Proposal,
    cfg: &VariantConfig,
    temperature: f64,
    rng: &RngStream,
) -> Result<SweepResult> {
    sweep_with(env, proposal, cfg, temperature, rng, SweepOptions::default())
}

pub fn sweep_with(
    env: &dyn Environment,
    proposal: &Proposal,
    cfg: &VariantConfig,
    temperature: f64,
    rng: &RngStream,
    opts: SweepOptions,
) -> Result<SweepResult> {
    cfg.validate()?;
    if proposal.action_count() != env.action_count() {
        return Err(Error::ShapeMismatch(format!(
            "proposal has {} actions, environment {}",
            proposal.action_count(),
            env.action_count()
        )));
    }
    let n = cfg.particles;
    let steps = env.horizon().saturating_sub(1);
    let uniform = -(n as f64).ln();
    let mut particles: Vec<ParticleState> = (0..n)
        .map(|_| ParticleState::new(env.initial_state(), uniform))
        .collect();
    let mut shared = SharedDynamics::new(rng.fork("dynamics"));
    let mut probs_cache: HashMap<State, Vec<f64>> = HashMap::new();
    let mut ledger = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut increments = Vec::with_capacity(steps);
    let mut ess = Vec::with_capacity(steps);
    let mut step_weights = Vec::with_capacity(steps);
    let mut transitions = Vec::new();
    let mut weights: Vec<f64> = vec![1.0 / n as f64; n];

    for t in 0..steps {
        if particles.iter().all(|p| env.is_absorbing(&p.current)) {
            break;
        }
        let mut lw = Vec::with_capacity(n);
        for (i, p) in particles.iter_mut().enumerate() {
            if env.is_absorbing(&p.current) {
                lw.push(p.log_weight);
                continue;
            }
            let s = p.current.clone();
            if !probs_cache.contains_key(&s) {
                probs_cache.insert(s.clone(), proposal.action_probs(&s)?);
            }
            let mut act_rng = rng.fork("act").fork(t).fork(i);
            let sel = select_action_from(p, &probs_cache[&s], &mut act_rng, cfg);
            let (next, r) = if cfg.share_dynamics {
                shared.transition(env, &s, sel.action, sel.count)?
            } else {
                simulate_step(env, &s, sel.action, &mut rng.fork("independent").fork(t).fork(i))?
            };
            let w = r + temperature * (sel.log_p - sel.log_q);
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight {
                    step: t,
                    particle: i,
                    state: s,
                    action: sel.action,
                    weight: w,
                });
            }
            if sel.sampled {
                open.push(ledger.len());
                ledger.push(LedgerEntry {
                    state: s.clone(),
                    action: sel.action,
                    step: t,
                    particle: i,
                    first_visit: sel.first_visit,
                    log_q: sel.log_q,
                    weight: f64::NAN,
                    baseline: 0.0,
                });
            }
            if opts.record_transitions {
                transitions.push(TransitionRecord {
                    step: t,
                    particle: i,
                    state: s.clone(),
                    action: sel.action,
                    count: sel.count,
                    next: next.clone(),
                    reward: r,
                });
            }
            p.history = Some(Arc::new(HistoryNode {
                step: Step {
                    state: s,
                    action: sel.action,
                    reward: r,
                    next_state: next.clone(),
                },
                parent: p.history.take(),
            }));
            p.current = next;
            p.total_return += r;
            lw.push(p.log_weight + w);
        }
        let inc = log_sum_exp(&lw);
        increments.push(inc);
        if cfg.baseline == Baseline::Mean && n > 1 {
            let prev: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
            for &k in &open {
                if ledger[k].step == t {
                    ledger[k].baseline = leave_one_out(&prev, &lw, ledger[k].particle);
                }
            }
        }
        for (p, l) in particles.iter_mut().zip(&lw) {
            p.log_weight = l - inc;
        }
        weights = particles.iter().map(|p| p.log_weight.exp()).collect();
        let e = effective_sample_size(&weights);
        ess.push(e);
        step_weights.push(weights.clone());

        let last = t + 1 == steps;
        let resample_now = cfg.resample
            && n > 1
            && !last
            && cfg.ess_threshold.is_none_or(|f| e < f * n as f64);
        if resample_now || last {
            for &k in &open {
                ledger[k].weight = weights[ledger[k].particle];
            }
            open.clear();
        }
        if resample_now {
            let ancestors = resample(cfg.resampler, &weights, &mut rng.fork("resample").fork(t));
            particles = ancestors
                .into_iter()
                .map(|a| {
                    let mut p = particles[a].clone();
                    p.log_weight = uniform;
                    p
                })
                .collect();
            weights = vec![1.0 / n as f64; n];
        }
    }
    for &k in &open {
        ledger[k].weight = weights[ledger[k].particle];
    }
    increments.resize(steps, 0.0);
    let mut log_z_suffix = vec![0.0; steps];
    let mut acc = 0.0;
    for t in (0..steps).rev() {
        acc += increments[t];
        log_z_suffix[t] = acc;
    }
    let trajectories = particles
        .iter()
        .map(|p| materialize(env, p, steps))
        .collect();
    Ok(SweepResult {
        log_z: log_z_suffix.first().copied().unwrap_or(0.0),
        increments,
        log_z_suffix,
        ledger,
        ess,
        step_weights,
        temperature,
        trajectories,
        final_weights: weights,
        transitions,
    })
}

/// `log sum_j exp(lw_j)` with particle `i`'s step weight `lw_i - prev_i`
/// replaced by the mean step weight of the other particles.
fn leave_one_out(prev: &[f64], lw: &[f64], i: usize) -> f64 {
    let others = prev.len() - 1;
    let mean = (0..prev.len())
        .filter(|&j| j != i)
        .map(|j| lw[j] - prev[j])
        .sum::<f64>()
        / others as f64;
    let mut v = lw.to_vec();
    v[i] = prev[i] + mean;
    log_sum_exp(&v)
}

fn materialize(env: &dyn Environment, p: &ParticleState, actions: usize) -> Trajectory {
    let mut steps = Vec::new();
    let mut node = p.history.as_deref();
    while let Some(h) = node {
        steps.push(h.step.clone());
        node = h.parent.as_deref();
    }
    steps.reverse();
    Trajectory {
        outcome: env.outcome(&p.current),
        initial: env.initial_state(),
        total_return: steps.iter().map(|s| s.reward).sum(),
        steps,
        actions,
    }
}

/// Counts violations of per-particle determinism: a particle trajectory
/// that takes two different actions in one state.
pub fn determinism_violations(sr: &SweepResult) -> usize {
    sr.trajectories
        .iter()
        .map(|t| {
            let mut seen: HashMap<&State, ActionId> = HashMap::new();
            t.steps
                .iter()
                .filter(|s| *seen.entry(&s.state).or_insert(s.action) != s.action)
                .count()
        })
        .sum()
}

/// Counts `(state, action, count)` keys that led to more than one distinct
/// successor or reward across particles. Needs recorded transitions.
pub fn coupling_violations(sr: &SweepResult) -> usize {
    let mut seen: HashMap<(&State, ActionId, u32), (&State, u64)> = HashMap::new();
    sr.transitions
        .iter()
        .filter(|tr| {
            let v = (&tr.next, tr.reward.to_bits());
            *seen.entry((&tr.state, tr.action, tr.count)).or_insert(v) != v
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{fixtures, FixtureKind};
    use crate::policy::Tabular;

    fn bandit() -> fixtures::TableEnv {
        fixtures::build(&FixtureKind::bandit()).unwrap()
    }

    #[test]
    fn revisit_reuses_action_with_zero_logs() {
        let cfg = VariantConfig::vsmc();
        let mut p = ParticleState::new(State::new(vec![0]), 0.0);
        let mut rng = RngStream::new(1);
        let first = select_action_from(&mut p, &[0.25; 4], &mut rng, &cfg);
        assert!(first.sampled && first.first_visit);
        assert!((first.log_p + 1.38629).abs() < 1e-5);
        let second = select_action_from(&mut p, &[0.25; 4], &mut rng, &cfg);
        assert_eq!(second.action, first.action);
        assert_eq!((second.log_p, second.log_q), (0.0, 0.0));
        assert!(!second.sampled);
        assert_eq!((first.count, second.count), (1, 2));
    }

    #[test]
    fn mixture_mode_resamples_on_revisit() {
        let cfg = VariantConfig::mixture();
        let mut p = ParticleState::new(State::new(vec![0]), 0.0);
        let mut rng = RngStream::new(1);
        let mut actions = Vec::new();
        for _ in 0..50 {
            let s = select_action_from(&mut p, &[0.5, 0.5], &mut rng, &cfg);
            assert!(s.sampled);
            assert!((s.log_p + 2f64.ln()).abs() < 1e-12);
            actions.push(s.action);
        }
        assert!(actions.contains(&0) && actions.contains(&1));
    }

    #[test]
    fn duplicated_particles_have_independent_memories() {
        let mut a = ParticleState::new(State::new(vec![0]), 0.0);
        a.memoize(State::new(vec![0]), 1);
        let mut b = a.clone();
        b.memoize(State::new(vec![5]), 0);
        assert_eq!(a.memoized_action(&State::new(vec![5])), None);
        assert_eq!(b.memoized_action(&State::new(vec![0])), Some(1));
    }

    #[test]
    fn shared_transitions_are_keyed_by_count() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let s = fixtures::TableEnv::state(0);
        let mut sd = SharedDynamics::new(RngStream::new(3));
        let first = sd.transition(&env, &s, 1, 1).unwrap();
        assert_eq!(sd.transition(&env, &s, 1, 1).unwrap(), first);
        // a fresh memory with the same stream reproduces the draw
        let mut other = SharedDynamics::new(RngStream::new(3));
        assert_eq!(other.transition(&env, &s, 1, 1).unwrap(), first);
        let mut distinct = 0;
        for c in 2..200 {
            if sd.transition(&env, &s, 1, c).unwrap().0 != first.0 {
                distinct += 1;
            }
        }
        assert!(distinct > 20, "later occurrences are fresh draws");
        assert_eq!(sd.len(), 199);
    }

    #[test]
    fn single_particle_closed_form() {
        let env = bandit();
        let mut t = Tabular::new(2);
        t.set_logits(State::new(vec![0]), vec![0.4, -0.1]).unwrap();
        let p = Proposal::Tabular(t);
        let q = p.action_probs(&State::new(vec![0])).unwrap();
        for temp in [1.0, 0.3] {
            let sr = sweep(&env, &p, &VariantConfig::vsa(), temp, &RngStream::new(7)).unwrap();
            let a = sr.ledger[0].action;
            let r = if a == 0 { 1.0 } else { 0.0 };
            let expected = r + temp * (-(2f64.ln()) - q[a].ln());
            assert!((sr.log_z - expected).abs() < 1e-12);
            assert_eq!(sr.ledger[0].weight, 1.0);
        }
    }

    #[test]
    fn vis_and_vsmc_agree_for_one_particle() {
        let env = fixtures::build(&FixtureKind::binary_tree()).unwrap();
        let p = Proposal::tabular(2);
        let rng = RngStream::new(11);
        let a = sweep(&env, &p, &VariantConfig::vsa(), 1.0, &rng).unwrap();
        let b = sweep(
            &env,
            &p,
            &VariantConfig {
                resample: false,
                ..VariantConfig::vsa()
            },
            1.0,
            &rng,
        )
        .unwrap();
        assert_eq!(a.log_z, b.log_z);
    }

    #[test]
    fn suffix_and_weights_are_consistent() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let p = Proposal::tabular(2);
        for cfg in [VariantConfig::vsmc(), VariantConfig::vis(), VariantConfig::mixture()] {
            for seed in 0..50 {
                let sr = sweep(&env, &p, &cfg, 1.0, &RngStream::new(seed)).unwrap();
                assert_eq!(sr.log_z, sr.log_z_suffix[0]);
                assert_eq!(sr.log_z_suffix.len(), 3);
                for w in &sr.step_weights {
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
                assert!(sr.ledger.iter().all(|e| e.weight.is_finite()));
            }
        }
    }

    #[test]
    fn vis_evidence_is_log_mean_exp_of_cumulative_weights() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let mut t = Tabular::new(2);
        t.set_logits(State::new(vec![0]), vec![0.3, -0.3]).unwrap();
        let p = Proposal::Tabular(t);
        let cfg = VariantConfig::vis();
        for seed in 0..20 {
            let sr = sweep_with(
                &env,
                &p,
                &cfg,
                1.0,
                &RngStream::new(seed),
                SweepOptions {
                    record_transitions: true,
                },
            )
            .unwrap();
            let n = cfg.particles;
            let mut cum = vec![0.0; n];
            for tr in &sr.transitions {
                cum[tr.particle] += tr.reward;
            }
            for e in &sr.ledger {
                cum[e.particle] += -(2f64.ln()) - e.log_q;
            }
            let expected = log_sum_exp(&cum) - (n as f64).ln();
            assert!((sr.log_z - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let env = fixtures::build(&FixtureKind::StochasticLoop).unwrap();
        let p = Proposal::tabular(2);
        let cfg = VariantConfig::vsmc();
        let a = sweep(&env, &p, &cfg, 1.0, &RngStream::new(5)).unwrap();
        let b = sweep(&env, &p, &cfg, 1.0, &RngStream::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_proposal_is_rejected() {
        let env = bandit();
        assert!(sweep(&env, &Proposal::tabular(3), &VariantConfig::vsmc(), 1.0, &RngStream::new(0)).is_err());
    }
}
