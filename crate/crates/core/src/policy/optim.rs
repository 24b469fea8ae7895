//! Adam ascent with a cosine learning-rate decay.

use std::collections::BTreeMap;

use super::{GradAccumulator, Proposal};
use crate::error::{Error, Result};

/// `lr(k) = base * (f + (1 - f) * (1 + cos(pi * k / (K - 1))) / 2)` for
/// `k` in `0..K`, so the first step uses `base` and the last `f * base`.
/// Steps past `K - 1` stay at `f * base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub final_fraction: f64,
    pub total_iters: u64,
}

impl CosineSchedule {
    pub fn new(base_lr: f64, total_iters: u64) -> Self {
        CosineSchedule {
            base_lr,
            final_fraction: 0.1,
            total_iters,
        }
    }

    pub fn lr(&self, k: u64) -> f64 {
        if self.total_iters <= 1 {
            return self.base_lr;
        }
        let last = self.total_iters - 1;
        let progress = k.min(last) as f64 / last as f64;
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.base_lr * (self.final_fraction + (1.0 - self.final_fraction) * cos)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub schedule: CosineSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: GradAccumulator,
    v: GradAccumulator,
}

impl Adam {
    pub fn new(schedule: CosineSchedule, proposal: &Proposal) -> Self {
        Adam {
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: proposal.new_accumulator(),
            v: proposal.new_accumulator(),
        }
    }

    pub fn from_parts(
        schedule: CosineSchedule,
        betas: (f64, f64),
        eps: f64,
        step: u64,
        m: GradAccumulator,
        v: GradAccumulator,
    ) -> Self {
        Adam {
            schedule,
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step,
            m,
            v,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&GradAccumulator, &GradAccumulator) {
        (&self.m, &self.v)
    }

    /// Learning rate the next step will use.
    pub fn current_lr(&self) -> f64 {
        self.schedule.lr(self.step)
    }

    /// One ascent step along `acc`, which is zeroed afterwards.
    pub fn step(&mut self, proposal: &mut Proposal, acc: &mut GradAccumulator) -> Result<()> {
        check_finite(acc)?;
        let lr = self.current_lr();
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..theta.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                theta[i] += lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        match (proposal, &*acc, &mut self.m, &mut self.v) {
            (
                Proposal::Perceptron(net),
                GradAccumulator::Dense(g),
                GradAccumulator::Dense(m),
                GradAccumulator::Dense(v),
            ) => {
                if g.len() != net.params().len() || m.len() != g.len() || v.len() != g.len() {
                    return Err(Error::ShapeMismatch("optimizer state does not match network".into()));
                }
                update(net.params_mut(), g, m, v);
            }
            (
                Proposal::Tabular(tab),
                GradAccumulator::Rows(g),
                GradAccumulator::Rows(m),
                GradAccumulator::Rows(v),
            ) => {
                let a = tab.action_count();
                for s in g.keys() {
                    tab.rows_mut().entry(s.clone()).or_insert_with(|| vec![0.0; a]);
                }
                let zeros = vec![0.0; a];
                for (s, theta) in tab.rows_mut().iter_mut() {
                    let gs = g.get(s).unwrap_or(&zeros);
                    let ms = m.entry(s.clone()).or_insert_with(|| vec![0.0; a]);
                    let vs = v.entry(s.clone()).or_insert_with(|| vec![0.0; a]);
                    update(theta, gs, ms, vs);
                }
            }
            _ => return Err(Error::ShapeMismatch("optimizer state does not match proposal".into())),
        }
        acc.zero();
        Ok(())
    }
}

fn check_finite(acc: &GradAccumulator) -> Result<()> {
    let bad = match acc {
        GradAccumulator::Dense(g) => g.iter().copied().enumerate().find(|(_, v)| !v.is_finite()),
        GradAccumulator::Rows(rows) => rows
            .values()
            .flatten()
            .copied()
            .enumerate()
            .find(|(_, v)| !v.is_finite()),
    };
    match bad {
        Some((index, value)) => Err(Error::NonFiniteGradient { index, value }),
        None => Ok(()),
    }
}

/// Rows of a tabular accumulator, for callers that build gradients by hand.
pub fn rows(acc: &mut GradAccumulator) -> Option<&mut BTreeMap<crate::mdp::State, Vec<f64>>> {
    match acc {
        GradAccumulator::Rows(r) => Some(r),
        GradAccumulator::Dense(_) => None,
    }
}
