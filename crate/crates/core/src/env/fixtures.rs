//! Tiny analytic MDPs with known evidence, used by tests and oracles.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, Outcome, State, TabularModel};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub enum FixtureKind {
    /// One decision, two arms paying `scale` and 0. `H = 2`.
    Bandit { scale: f64 },
    /// Two decisions on a depth-2 binary tree with the given leaf-edge
    /// rewards: `[root->L, root->R, L->LL, L->LR, R->RL, R->RR]`. `H = 3`.
    BinaryTree { rewards: [f64; 6] },
    /// A single action paying 0.5 per step for three steps. `H = 4`.
    Chain,
    /// One state, one action, a zero-reward self-loop. `H = 2`.
    Identity,
    /// Two live states with a stochastic transition and a revisitable loop.
    /// `H = 4`.
    StochasticLoop,
}

pub const DEFAULT_TREE_REWARDS: [f64; 6] = [0.0, 0.5, 1.0, 0.0, 0.0, 0.8];

impl FixtureKind {
    pub fn bandit() -> Self {
        FixtureKind::Bandit { scale: 1.0 }
    }

    pub fn binary_tree() -> Self {
        FixtureKind::BinaryTree {
            rewards: DEFAULT_TREE_REWARDS,
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureKind::Bandit { scale } if *scale == 1.0 => write!(f, "bandit"),
            FixtureKind::Bandit { scale } => write!(f, "bandit:{scale}"),
            FixtureKind::BinaryTree { rewards } if *rewards == DEFAULT_TREE_REWARDS => {
                write!(f, "tree")
            }
            FixtureKind::BinaryTree { rewards } => {
                let r: Vec<String> = rewards.iter().map(|r| r.to_string()).collect();
                write!(f, "tree:{}", r.join(","))
            }
            FixtureKind::Chain => write!(f, "chain"),
            FixtureKind::Identity => write!(f, "identity"),
            FixtureKind::StochasticLoop => write!(f, "loop"),
        }
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    /// Accepts `bandit`, `bandit:<scale>`, `tree`, `tree:<r1,..,r6>`, `chain`,
    /// `identity` and `loop`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = || Error::UnknownFixture(s.to_string());
        match (name, arg) {
            ("bandit", None) => Ok(FixtureKind::bandit()),
            ("bandit", Some(a)) => Ok(FixtureKind::Bandit {
                scale: a.parse().map_err(|_| bad())?,
            }),
            ("tree", None) => Ok(FixtureKind::binary_tree()),
            ("tree", Some(a)) => {
                let v: Vec<f64> = a
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad())?;
                let rewards: [f64; 6] = v.try_into().map_err(|_| bad())?;
                Ok(FixtureKind::BinaryTree { rewards })
            }
            ("chain", None) => Ok(FixtureKind::Chain),
            ("identity", None) => Ok(FixtureKind::Identity),
            ("loop", None) => Ok(FixtureKind::StochasticLoop),
            _ => Err(bad()),
        }
    }
}

/// A row of an explicit table: `(successor, probability, reward)`.
type Row = Vec<(usize, f64, f64)>;

/// An MDP given as explicit tables over numbered states. The state features
/// are the single state index.
#[derive(Debug)]
pub struct TableEnv {
    id: String,
    horizon: usize,
    names: Vec<&'static str>,
    rows: Vec<Vec<Row>>,
    absorbing: Vec<bool>,
    model: TabularModel,
}

impl TableEnv {
    pub fn new(
        id: String,
        horizon: usize,
        names: Vec<&'static str>,
        rows: Vec<Vec<Row>>,
        absorbing: Vec<bool>,
    ) -> Result<Self> {
        let action_count = rows.first().map_or(0, |r| r.len());
        if action_count == 0 || rows.iter().any(|r| r.len() != action_count) {
            return Err(Error::InvalidEnvironment(format!("{id}: ragged action table")));
        }
        let n = rows.len();
        if names.len() != n || absorbing.len() != n {
            return Err(Error::InvalidEnvironment(format!("{id}: table sizes differ")));
        }
        if rows.iter().flatten().flatten().any(|&(j, _, _)| j >= n) {
            return Err(Error::InvalidEnvironment(format!("{id}: successor out of range")));
        }
        let model = TabularModel::explore(
            &State::new(vec![0]),
            action_count,
            |s| absorbing[s.features()[0] as usize],
            |s, a| {
                rows[s.features()[0] as usize][a]
                    .iter()
                    .map(|&(j, p, r)| (State::new(vec![j as i32]), p, r))
                    .collect()
            },
        )?;
        Ok(TableEnv {
            id,
            horizon,
            names,
            rows,
            absorbing,
            model,
        })
    }

    pub fn state(i: usize) -> State {
        State::new(vec![i as i32])
    }

    pub fn name_of(&self, s: &State) -> &'static str {
        self.names[s.features()[0] as usize]
    }
}

impl Environment for TableEnv {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn action_count(&self) -> usize {
        self.rows[0].len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self) -> State {
        TableEnv::state(0)
    }

    fn feature_dim(&self) -> usize {
        1
    }

    fn feature_scale(&self) -> Vec<f64> {
        vec![self.rows.len().max(1) as f64]
    }

    fn is_absorbing(&self, s: &State) -> bool {
        self.absorbing[s.features()[0] as usize]
    }

    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64) {
        let row = &self.rows[s.features()[0] as usize][a];
        let (last, init) = row.split_last().expect("rows are non-empty");
        if init.is_empty() {
            return (TableEnv::state(last.0), last.2);
        }
        let u = rng.uniform();
        let mut acc = 0.0;
        for &(j, p, r) in init {
            acc += p;
            if u < acc {
                return (TableEnv::state(j), r);
            }
        }
        (TableEnv::state(last.0), last.2)
    }

    fn outcome(&self, last: &State) -> Outcome {
        if self.is_absorbing(last) {
            "end"
        } else {
            "timeout"
        }
    }

    fn outcome_labels(&self) -> &'static [Outcome] {
        &["end", "timeout"]
    }

    fn model(&self) -> Option<&TabularModel> {
        Some(&self.model)
    }

    fn describe(&self, s: &State) -> String {
        self.name_of(s).to_string()
    }
}

pub fn build(kind: &FixtureKind) -> Result<TableEnv> {
    let id = format!("fixture-{kind}");
    match kind {
        FixtureKind::Bandit { scale } => TableEnv::new(
            id,
            2,
            vec!["s1", "high", "low"],
            vec![
                vec![vec![(1, 1.0, *scale)], vec![(2, 1.0, 0.0)]],
                vec![vec![(1, 1.0, 0.0)], vec![(1, 1.0, 0.0)]],
                vec![vec![(2, 1.0, 0.0)], vec![(2, 1.0, 0.0)]],
            ],
            vec![false, true, true],
        ),
        FixtureKind::BinaryTree { rewards: r } => {
            let leaf = |i: usize| vec![vec![(i, 1.0, 0.0)], vec![(i, 1.0, 0.0)]];
            TableEnv::new(
                id,
                3,
                vec!["root", "L", "R", "LL", "LR", "RL", "RR"],
                vec![
                    vec![vec![(1, 1.0, r[0])], vec![(2, 1.0, r[1])]],
                    vec![vec![(3, 1.0, r[2])], vec![(4, 1.0, r[3])]],
                    vec![vec![(5, 1.0, r[4])], vec![(6, 1.0, r[5])]],
                    leaf(3),
                    leaf(4),
                    leaf(5),
                    leaf(6),
                ],
                vec![false, false, false, true, true, true, true],
            )
        }
        FixtureKind::Chain => TableEnv::new(
            id,
            4,
            vec!["c0", "c1", "c2", "c3"],
            vec![
                vec![vec![(1, 1.0, 0.5)]],
                vec![vec![(2, 1.0, 0.5)]],
                vec![vec![(3, 1.0, 0.5)]],
                vec![vec![(3, 1.0, 0.0)]],
            ],
            vec![false, false, false, true],
        ),
        FixtureKind::Identity => TableEnv::new(
            id,
            2,
            vec!["only"],
            vec![vec![vec![(0, 1.0, 0.0)]]],
            vec![false],
        ),
        FixtureKind::StochasticLoop => TableEnv::new(
            id,
            4,
            vec!["A", "B", "End"],
            vec![
                vec![vec![(0, 1.0, 0.3)], vec![(1, 0.6, 0.0), (0, 0.4, 0.0)]],
                vec![vec![(2, 1.0, 1.0)], vec![(0, 1.0, 0.5)]],
                vec![vec![(2, 1.0, 0.0)], vec![(2, 1.0, 0.0)]],
            ],
            vec![false, false, true],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::simulate_step;

    #[test]
    fn kinds_round_trip_through_text() {
        for k in [
            FixtureKind::bandit(),
            FixtureKind::Bandit { scale: 4.0 },
            FixtureKind::binary_tree(),
            FixtureKind::BinaryTree { rewards: [0.0; 6] },
            FixtureKind::Chain,
            FixtureKind::Identity,
            FixtureKind::StochasticLoop,
        ] {
            assert_eq!(k.to_string().parse::<FixtureKind>().unwrap(), k);
        }
        assert!("maze".parse::<FixtureKind>().is_err());
        assert!("tree:1,2".parse::<FixtureKind>().is_err());
    }

    #[test]
    fn identity_fixture_stays_put() {
        let env = build(&FixtureKind::Identity).unwrap();
        let s = env.initial_state();
        let (next, r) = simulate_step(&env, &s, 0, &mut RngStream::new(0)).unwrap();
        assert_eq!(next, s);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn loop_fixture_frequencies() {
        let env = build(&FixtureKind::StochasticLoop).unwrap();
        let mut rng = RngStream::new(4);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| simulate_step(&env, &TableEnv::state(0), 1, &mut rng).unwrap().0 == TableEnv::state(1))
            .count();
        let se = (0.6f64 * 0.4 / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - 0.6).abs() < 4.0 * se);
    }
}
