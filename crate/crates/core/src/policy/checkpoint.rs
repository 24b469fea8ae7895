//! Binary checkpoint files.
//!
//! All integers and floats are little-endian. Layout:
//!
//! ```text
//! magic            8 bytes  "VSMCCKPT"
//! version          u32      = 1
//! kind             u8       0 tabular, 1 perceptron
//! action_count     u32
//! feature_dim      u32      0 for tabular
//! hidden           u32      0 for tabular
//! env_id           u32 length + UTF-8 bytes
//! iteration        u64      completed training iterations
//! seed             u64
//! parameters       kind-specific, see below
//! has_optimizer    u8
//! optimizer        present when has_optimizer = 1, see below
//! ```
//!
//! Perceptron parameters: `feature_dim` f64 input scales, then u64 count and
//! that many f64 values in the order `W1, b1, W2, b2, W3, b3`.
//! Tabular parameters: u64 row count, then per row (sorted by state key)
//! the key as u32 length + bytes followed by `action_count` f64 logits.
//!
//! Optimizer: f64 base_lr, f64 final_fraction, u64 total_iters, u64 step,
//! f64 beta1, f64 beta2, f64 eps, then the first and second moments, each
//! encoded like the parameters of the same kind (without input scales).

use std::collections::BTreeMap;
use std::path::Path;

use super::{Adam, CosineSchedule, GradAccumulator, Perceptron, Proposal, Tabular};
use crate::error::{Error, Result};
use crate::mdp::{State, StateKey};

pub const MAGIC: &[u8; 8] = b"VSMCCKPT";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub env_id: String,
    pub iteration: u64,
    pub seed: u64,
    pub proposal: Proposal,
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        put_u32(&mut w, VERSION);
        let (kind, fd, hidden) = match &self.proposal {
            Proposal::Tabular(_) => (0u8, 0, 0),
            Proposal::Perceptron(p) => (1u8, p.feature_dim() as u32, p.hidden() as u32),
        };
        w.push(kind);
        put_u32(&mut w, self.proposal.action_count() as u32);
        put_u32(&mut w, fd);
        put_u32(&mut w, hidden);
        put_bytes(&mut w, self.env_id.as_bytes());
        put_u64(&mut w, self.iteration);
        put_u64(&mut w, self.seed);
        match &self.proposal {
            Proposal::Tabular(t) => put_rows(&mut w, t.rows()),
            Proposal::Perceptron(p) => {
                p.input_scale().iter().for_each(|&v| put_f64(&mut w, v));
                put_dense(&mut w, p.params());
            }
        }
        match &self.optimizer {
            None => w.push(0),
            Some(opt) => {
                w.push(1);
                put_f64(&mut w, opt.schedule.base_lr);
                put_f64(&mut w, opt.schedule.final_fraction);
                put_u64(&mut w, opt.schedule.total_iters);
                put_u64(&mut w, opt.steps());
                put_f64(&mut w, opt.beta1);
                put_f64(&mut w, opt.beta2);
                put_f64(&mut w, opt.eps);
                let (m, v) = opt.moments();
                for acc in [m, v] {
                    match acc {
                        GradAccumulator::Rows(r) => put_rows(&mut w, r),
                        GradAccumulator::Dense(d) => put_dense(&mut w, d),
                    }
                }
            }
        }
        w
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { b: bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (this build reads {VERSION})"
            )));
        }
        let kind = r.u8()?;
        let action_count = r.u32()? as usize;
        let feature_dim = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let env_id = String::from_utf8(r.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("env id is not UTF-8".into()))?;
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let dense_kind = match kind {
            0 => false,
            1 => true,
            k => return Err(Error::Checkpoint(format!("unknown proposal kind {k}"))),
        };
        let proposal = if dense_kind {
            let scale = (0..feature_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let params = r.dense()?;
            Proposal::Perceptron(
                Perceptron::from_parts(feature_dim, hidden, action_count, scale, params)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
            )
        } else {
            let mut t = Tabular::new(action_count);
            *t.rows_mut() = r.rows(action_count)?;
            Proposal::Tabular(t)
        };
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let schedule = CosineSchedule {
                    base_lr: r.f64()?,
                    final_fraction: r.f64()?,
                    total_iters: r.u64()?,
                };
                let step = r.u64()?;
                let betas = (r.f64()?, r.f64()?);
                let eps = r.f64()?;
                let mut moment = || -> Result<GradAccumulator> {
                    Ok(if dense_kind {
                        GradAccumulator::Dense(r.dense()?)
                    } else {
                        GradAccumulator::Rows(r.rows(action_count)?)
                    })
                };
                let m = moment()?;
                let v = moment()?;
                Some(Adam::from_parts(schedule, betas, eps, step, m, v))
            }
            f => return Err(Error::Checkpoint(format!("bad optimizer flag {f}"))),
        };
        if r.at != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes",
                bytes.len() - r.at
            )));
        }
        Ok(Checkpoint {
            env_id,
            iteration,
            seed,
            proposal,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(w: &mut Vec<u8>, b: &[u8]) {
    put_u32(w, b.len() as u32);
    w.extend_from_slice(b);
}

fn put_dense(w: &mut Vec<u8>, d: &[f64]) {
    put_u64(w, d.len() as u64);
    d.iter().for_each(|&v| put_f64(w, v));
}

fn put_rows(w: &mut Vec<u8>, rows: &BTreeMap<State, Vec<f64>>) {
    let mut keyed: Vec<(StateKey, &Vec<f64>)> = rows.iter().map(|(s, r)| (s.key(), r)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    put_u64(w, keyed.len() as u64);
    for (k, row) in keyed {
        put_bytes(w, k.as_bytes());
        row.iter().for_each(|&v| put_f64(w, v));
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.b.len() - self.at < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn count(&mut self, item_size: usize) -> Result<usize> {
        let n = self.u64()?;
        if n.saturating_mul(item_size as u64) > (self.b.len() - self.at) as u64 {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        Ok(n as usize)
    }

    fn dense(&mut self) -> Result<Vec<f64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn rows(&mut self, action_count: usize) -> Result<BTreeMap<State, Vec<f64>>> {
        let n = self.count(4 + 8 * action_count)?;
        let mut rows = BTreeMap::new();
        for _ in 0..n {
            let key = StateKey(self.bytes()?.to_vec());
            let s = State::from_key(&key).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let row = (0..action_count).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            rows.insert(s, row);
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn perceptron_checkpoint() -> Checkpoint {
        let net = Perceptron::new(4, 8, 2, vec![2.0, 21.0, 10.0, 1.0], &RngStream::new(5)).unwrap();
        let p = Proposal::Perceptron(net);
        let mut opt = Adam::new(CosineSchedule::new(1e-4, 100), &p);
        let mut p2 = p.clone();
        let mut acc = p.new_accumulator();
        if let GradAccumulator::Dense(g) = &mut acc {
            g.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
        }
        opt.step(&mut p2, &mut acc).unwrap();
        Checkpoint {
            env_id: "blackjack".into(),
            iteration: 1,
            seed: 42,
            proposal: p2,
            optimizer: Some(opt),
        }
    }

    #[test]
    fn perceptron_round_trip_is_byte_exact() {
        let c = perceptron_checkpoint();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn tabular_round_trip_is_byte_exact() {
        let mut t = Tabular::new(3);
        t.set_logits(State::new(vec![2, -1]), vec![0.5, f64::MIN_POSITIVE, -3.0]).unwrap();
        t.set_logits(State::new(vec![0]), vec![1.0, 2.0, 3.0]).unwrap();
        let c = Checkpoint {
            env_id: "fixture-tree".into(),
            iteration: 7,
            seed: u64::MAX,
            proposal: Proposal::Tabular(t),
            optimizer: None,
        };
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn version_mismatch_is_an_error() {
        let mut bytes = perceptron_checkpoint().to_bytes();
        bytes[8] = 2;
        let err = Checkpoint::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }

    #[test]
    fn truncation_is_an_error() {
        let bytes = perceptron_checkpoint().to_bytes();
        for cut in [0, 7, 20, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err());
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
    }
}
