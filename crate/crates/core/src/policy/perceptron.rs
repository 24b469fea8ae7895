//! Two-hidden-layer tanh perceptron with a linear output layer.
//!
//! Parameters live in one flat array in the order `W1, b1, W2, b2, W3, b3`,
//! weight matrices row-major with one row per output unit:
//! `W1` is `hidden x feature_dim`, `W2` is `hidden x hidden`, `W3` is
//! `action_count x hidden`.

use crate::error::{Error, Result};
use crate::mdp::State;
use crate::rng::RngStream;

pub const DEFAULT_HIDDEN: usize = 64;

/// Multiplier on the Glorot bound of the output layer, so that a fresh
/// network starts close to the uniform policy.
const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Perceptron {
    feature_dim: usize,
    hidden: usize,
    action_count: usize,
    input_scale: Vec<f64>,
    params: Vec<f64>,
}

/// Forward-pass intermediates kept for the backward pass.
pub struct Activations {
    x: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub logits: Vec<f64>,
}

pub fn param_count(feature_dim: usize, hidden: usize, action_count: usize) -> usize {
    hidden * feature_dim + hidden + hidden * hidden + hidden + action_count * hidden + action_count
}

impl Perceptron {
    /// Glorot-uniform weights, zero biases.
    pub fn new(
        feature_dim: usize,
        hidden: usize,
        action_count: usize,
        input_scale: Vec<f64>,
        rng: &RngStream,
    ) -> Result<Self> {
        if input_scale.len() != feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "input scale has {} entries for {feature_dim} features",
                input_scale.len()
            )));
        }
        let mut p = Perceptron {
            feature_dim,
            hidden,
            action_count,
            input_scale,
            params: vec![0.0; param_count(feature_dim, hidden, action_count)],
        };
        let layers = [
            (0, feature_dim, hidden, 1.0),
            (p.w2(), hidden, hidden, 1.0),
            (p.w3(), hidden, action_count, OUTPUT_INIT_SCALE),
        ];
        for (layer, (offset, fan_in, fan_out, scale)) in layers.into_iter().enumerate() {
            let bound = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut r = rng.fork("init").fork(layer);
            for w in &mut p.params[offset..offset + fan_in * fan_out] {
                *w = bound * (2.0 * r.uniform() - 1.0);
            }
        }
        Ok(p)
    }

    pub fn from_parts(
        feature_dim: usize,
        hidden: usize,
        action_count: usize,
        input_scale: Vec<f64>,
        params: Vec<f64>,
    ) -> Result<Self> {
        let expected = param_count(feature_dim, hidden, action_count);
        if params.len() != expected || input_scale.len() != feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "perceptron {feature_dim}->{hidden}->{hidden}->{action_count} needs {expected} parameters and {feature_dim} scales, got {} and {}",
                params.len(),
                input_scale.len()
            )));
        }
        Ok(Perceptron {
            feature_dim,
            hidden,
            action_count,
            input_scale,
            params,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn b1(&self) -> usize {
        self.hidden * self.feature_dim
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.hidden
    }
    fn w3(&self) -> usize {
        self.b2() + self.hidden
    }
    fn b3(&self) -> usize {
        self.w3() + self.action_count * self.hidden
    }

    pub fn forward(&self, s: &State) -> Result<Activations> {
        let f = s.features();
        if f.len() != self.feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "state has {} features, network expects {}",
                f.len(),
                self.feature_dim
            )));
        }
        let x: Vec<f64> = f
            .iter()
            .zip(&self.input_scale)
            .map(|(&v, &sc)| if sc != 0.0 { f64::from(v) / sc } else { f64::from(v) })
            .collect();
        let h1 = dense(&self.params[..self.b1()], &self.params[self.b1()..self.w2()], &x, true);
        let h2 = dense(
            &self.params[self.w2()..self.b2()],
            &self.params[self.b2()..self.w3()],
            &h1,
            true,
        );
        let logits = dense(
            &self.params[self.w3()..self.b3()],
            &self.params[self.b3()..],
            &h2,
            false,
        );
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFiniteParameters);
        }
        Ok(Activations { x, h1, h2, logits })
    }

    /// Adds `J^T g` to `grad`, where `J` is the Jacobian of the logits with
    /// respect to the parameters at the forward pass `act`.
    pub fn backward(&self, act: &Activations, g: &[f64], grad: &mut [f64]) {
        let (d, h) = (self.feature_dim, self.hidden);
        let (w3, b3) = (self.w3(), self.b3());
        let mut dh2 = vec![0.0; h];
        for (k, &gk) in g.iter().enumerate() {
            if gk == 0.0 {
                continue;
            }
            grad[b3 + k] += gk;
            let row = w3 + k * h;
            for j in 0..h {
                grad[row + j] += gk * act.h2[j];
                dh2[j] += gk * self.params[row + j];
            }
        }
        let dz2: Vec<f64> = dh2
            .iter()
            .zip(&act.h2)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect();
        let (w2, b2) = (self.w2(), self.b2());
        let mut dh1 = vec![0.0; h];
        for (k, &gk) in dz2.iter().enumerate() {
            grad[b2 + k] += gk;
            let row = w2 + k * h;
            for j in 0..h {
                grad[row + j] += gk * act.h1[j];
                dh1[j] += gk * self.params[row + j];
            }
        }
        let b1 = self.b1();
        for k in 0..h {
            let gk = dh1[k] * (1.0 - act.h1[k] * act.h1[k]);
            grad[b1 + k] += gk;
            let row = k * d;
            for j in 0..d {
                grad[row + j] += gk * act.x[j];
            }
        }
    }
}

fn dense(w: &[f64], b: &[f64], x: &[f64], tanh: bool) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(k, &bk)| {
            let row = &w[k * x.len()..(k + 1) * x.len()];
            let z = bk + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if tanh {
                z.tanh()
            } else {
                z
            }
        })
        .collect()
}
