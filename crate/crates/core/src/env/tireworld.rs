//! Triangle Tireworld.
//!
//! Locations form a triangle of directed roads. Every move may give the car a
//! flat tyre. A flat is repaired by changing to a loaded spare; spares are
//! picked up at the locations that carry one. A flat with no spare in the
//! boot and none at the current location leaves the agent stuck.
//!
//! Rewards: -0.1 per step, +10 on reaching the goal, -10 on getting stuck.
//! Goal and stuck are absorbing.
//!
//! Actions: `0..L` move to location `j` (a no-op unless a road leads there
//! and the tyre is intact), `L` load a spare, `L + 1` change the tyre.
//!
//! State features: `[x, y, status, flat, has_spare, spare_0, .., spare_{L-1}]`
//! where status is 0 running, 1 goal, 2 stuck.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, Outcome, State};
use crate::rng::{stable_hash, RngStream};

pub const STEP_REWARD: f64 = -0.1;
pub const GOAL_REWARD: f64 = 10.0;
pub const STUCK_REWARD: f64 = -10.0;
pub const DEFAULT_FLAT_PROBABILITY: f64 = 0.5;
pub const DEFAULT_HORIZON: usize = 40;

const STATUS_RUNNING: i32 = 0;
const STATUS_GOAL: i32 = 1;
const STATUS_STUCK: i32 = 2;
const HEADER: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TireworldSpec {
    /// Triangle side parameter `n`; the triangle has `2n + 1` locations per
    /// side.
    pub size: usize,
    /// Location coordinates `(x, y)`, both starting at 1.
    pub locations: Vec<(i32, i32)>,
    pub roads: Vec<(usize, usize)>,
    pub spares: Vec<usize>,
    pub start: usize,
    pub goal: usize,
    pub flat_probability: f64,
    pub horizon: usize,
}

impl TireworldSpec {
    /// Triangle of side `2n + 1`: locations `(x, y)` with `x + y <= 2n + 2`.
    /// Roads run along every odd row, up every column and along every
    /// diagonal towards the goal side. The start is `(1, 1)`, the goal `(1, 2n + 1)`; spares sit
    /// everywhere off the bottom row, so the short bottom route has none.
    pub fn triangle(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidEnvironment("tireworld size must be >= 1".into()));
        }
        let m = 2 * size as i32 + 1;
        let mut locations = Vec::new();
        for x in 1..=m {
            for y in 1..=(m + 1 - x) {
                locations.push((x, y));
            }
        }
        let idx = |x: i32, y: i32| locations.iter().position(|&p| p == (x, y));
        let mut roads = Vec::new();
        for (i, &(x, y)) in locations.iter().enumerate() {
            if x % 2 == 1 {
                if let Some(j) = idx(x, y + 1) {
                    roads.push((i, j));
                }
            }
            if let Some(j) = idx(x + 1, y) {
                roads.push((i, j));
            }
            if x > 1 {
                if let Some(j) = idx(x - 1, y + 1) {
                    roads.push((i, j));
                }
            }
        }
        roads.sort_unstable();
        let spares = locations
            .iter()
            .enumerate()
            .filter(|(_, &(x, _))| x > 1)
            .map(|(i, _)| i)
            .collect();
        Ok(TireworldSpec {
            size,
            start: idx(1, 1).unwrap(),
            goal: idx(1, m).unwrap(),
            locations,
            roads,
            spares,
            flat_probability: DEFAULT_FLAT_PROBABILITY,
            horizon: DEFAULT_HORIZON,
        })
    }

    /// Instances 1..=10 pair up on triangle sizes 1..=5 (6 to 66 locations);
    /// even instances use a higher flat probability.
    pub fn instance(index: usize) -> Result<Self> {
        if !(1..=10).contains(&index) {
            return Err(Error::InvalidEnvironment(format!(
                "tireworld instance {index} outside 1..=10"
            )));
        }
        let mut spec = Self::triangle(index.div_ceil(2))?;
        if index.is_multiple_of(2) {
            spec.flat_probability = 0.6;
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.locations.len();
        let bad = |m: String| Err(Error::InvalidEnvironment(format!("tireworld: {m}")));
        if n == 0 {
            return bad("no locations".into());
        }
        if self.start >= n || self.goal >= n || self.start == self.goal {
            return bad("start/goal invalid".into());
        }
        if self.roads.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return bad("road endpoint out of range".into());
        }
        if self.spares.iter().any(|&s| s >= n) {
            return bad("spare location out of range".into());
        }
        if !(0.0..=1.0).contains(&self.flat_probability) {
            return bad("flat_probability outside [0, 1]".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        Ok(())
    }

    /// Key-value instance format with explicit edge lists.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# triangle tireworld").unwrap();
        writeln!(out, "size={}", self.size).unwrap();
        writeln!(out, "flat_probability={}", self.flat_probability).unwrap();
        writeln!(out, "horizon={}", self.horizon).unwrap();
        writeln!(out, "start={}", self.start).unwrap();
        writeln!(out, "goal={}", self.goal).unwrap();
        for (i, (x, y)) in self.locations.iter().enumerate() {
            writeln!(out, "location={i} {x} {y}").unwrap();
        }
        for (a, b) in &self.roads {
            writeln!(out, "road={a} {b}").unwrap();
        }
        let spares: Vec<String> = self.spares.iter().map(|s| s.to_string()).collect();
        writeln!(out, "spares={}", spares.join(" ")).unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidEnvironment(format!("tireworld instance: {m}"));
        let mut spec = TireworldSpec {
            size: 0,
            locations: Vec::new(),
            roads: Vec::new(),
            spares: Vec::new(),
            start: usize::MAX,
            goal: usize::MAX,
            flat_probability: DEFAULT_FLAT_PROBABILITY,
            horizon: DEFAULT_HORIZON,
        };
        let mut located: Vec<(usize, (i32, i32))> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", n + 1)))?;
            let ints = |v: &str| -> Result<Vec<i64>> {
                v.split_whitespace()
                    .map(|t| t.parse::<i64>().map_err(|e| bad(format!("line {}: {e}", n + 1))))
                    .collect()
            };
            let one = |v: &str| -> Result<usize> {
                v.trim().parse::<usize>().map_err(|e| bad(format!("line {}: {e}", n + 1)))
            };
            match k.trim() {
                "size" => spec.size = one(v)?,
                "flat_probability" => {
                    spec.flat_probability = v
                        .trim()
                        .parse()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?
                }
                "horizon" => spec.horizon = one(v)?,
                "start" => spec.start = one(v)?,
                "goal" => spec.goal = one(v)?,
                "location" => match ints(v)?.as_slice() {
                    &[i, x, y] => located.push((i as usize, (x as i32, y as i32))),
                    _ => return Err(bad(format!("line {}: location=<index> <x> <y>", n + 1))),
                },
                "road" => match ints(v)?.as_slice() {
                    &[a, b] => spec.roads.push((a as usize, b as usize)),
                    _ => return Err(bad(format!("line {}: road=<from> <to>", n + 1))),
                },
                "spares" => spec.spares = ints(v)?.into_iter().map(|s| s as usize).collect(),
                other => return Err(bad(format!("line {}: unknown key `{other}`", n + 1))),
            }
        }
        located.sort_by_key(|(i, _)| *i);
        for (expected, (i, p)) in located.into_iter().enumerate() {
            if i != expected {
                return Err(bad(format!("location indices must be 0..n, missing {expected}")));
            }
            spec.locations.push(p);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug)]
pub struct Tireworld {
    spec: TireworldSpec,
    /// `adjacent[i][j]`: a road leads from `i` to `j`.
    adjacent: Vec<Vec<bool>>,
    id: String,
}

impl Tireworld {
    pub fn new(spec: TireworldSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.locations.len();
        let mut adjacent = vec![vec![false; n]; n];
        for &(a, b) in &spec.roads {
            adjacent[a][b] = true;
        }
        let id = format!(
            "tireworld-{}-{:016x}",
            n,
            stable_hash(spec.to_text().as_bytes())
        );
        Ok(Tireworld { spec, adjacent, id })
    }

    pub fn spec(&self) -> &TireworldSpec {
        &self.spec
    }

    pub fn location_count(&self) -> usize {
        self.spec.locations.len()
    }

    pub fn load_action(&self) -> ActionId {
        self.location_count()
    }

    pub fn change_action(&self) -> ActionId {
        self.location_count() + 1
    }

    fn encode(&self, loc: usize, status: i32, flat: bool, has_spare: bool, spares: &[i32]) -> State {
        let (x, y) = self.spec.locations[loc];
        let mut f = Vec::with_capacity(HEADER + spares.len());
        f.extend_from_slice(&[x, y, status, flat as i32, has_spare as i32]);
        f.extend_from_slice(spares);
        State::new(f)
    }

    /// Location index of a state.
    pub fn location_of(&self, s: &State) -> usize {
        let f = s.features();
        self.spec
            .locations
            .iter()
            .position(|&p| p == (f[0], f[1]))
            .expect("state location belongs to the instance")
    }
}

impl Environment for Tireworld {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn action_count(&self) -> usize {
        self.location_count() + 2
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn initial_state(&self) -> State {
        let mut spares = vec![0; self.location_count()];
        for &s in &self.spec.spares {
            spares[s] = 1;
        }
        self.encode(self.spec.start, STATUS_RUNNING, false, false, &spares)
    }

    fn feature_dim(&self) -> usize {
        HEADER + self.location_count()
    }

    fn feature_scale(&self) -> Vec<f64> {
        let side = (2 * self.spec.size + 1) as f64;
        let mut v = vec![side, side, 2.0, 1.0, 1.0];
        v.extend(std::iter::repeat_n(1.0, self.location_count()));
        v
    }

    fn is_absorbing(&self, s: &State) -> bool {
        s.features()[2] != STATUS_RUNNING
    }

    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64) {
        let f = s.features();
        let loc = self.location_of(s);
        let mut flat = f[3] != 0;
        let mut has_spare = f[4] != 0;
        let mut spares = f[HEADER..].to_vec();
        if a < self.location_count() {
            if flat || !self.adjacent[loc][a] {
                return (s.clone(), STEP_REWARD);
            }
            if a == self.spec.goal {
                let next = self.encode(a, STATUS_GOAL, false, has_spare, &spares);
                return (next, STEP_REWARD + GOAL_REWARD);
            }
            flat = rng.bernoulli(self.spec.flat_probability);
            if flat && !has_spare && spares[a] == 0 {
                let next = self.encode(a, STATUS_STUCK, true, false, &spares);
                return (next, STEP_REWARD + STUCK_REWARD);
            }
            (self.encode(a, STATUS_RUNNING, flat, has_spare, &spares), STEP_REWARD)
        } else if a == self.load_action() {
            if spares[loc] == 1 && !has_spare {
                spares[loc] = 0;
                has_spare = true;
            }
            (self.encode(loc, STATUS_RUNNING, flat, has_spare, &spares), STEP_REWARD)
        } else {
            if flat && has_spare {
                flat = false;
                has_spare = false;
            }
            (self.encode(loc, STATUS_RUNNING, flat, has_spare, &spares), STEP_REWARD)
        }
    }

    fn outcome(&self, last: &State) -> Outcome {
        match last.features()[2] {
            STATUS_GOAL => "goal",
            STATUS_STUCK => "stuck",
            _ => "timeout",
        }
    }

    fn outcome_labels(&self) -> &'static [Outcome] {
        &["stuck", "timeout", "goal"]
    }

    fn loss_draw_win(&self) -> Option<[Outcome; 3]> {
        Some(["stuck", "timeout", "goal"])
    }

    fn describe(&self, s: &State) -> String {
        let f = s.features();
        format!(
            "at ({}, {}) {} flat={} spare={}",
            f[0],
            f[1],
            self.outcome(s),
            f[3] != 0,
            f[4] != 0
        )
    }
}

pub fn builtin_instance_text(index: usize) -> Option<&'static str> {
    Some(match index {
        1 => include_str!("../../assets/tireworld/instance01.txt"),
        2 => include_str!("../../assets/tireworld/instance02.txt"),
        3 => include_str!("../../assets/tireworld/instance03.txt"),
        4 => include_str!("../../assets/tireworld/instance04.txt"),
        5 => include_str!("../../assets/tireworld/instance05.txt"),
        6 => include_str!("../../assets/tireworld/instance06.txt"),
        7 => include_str!("../../assets/tireworld/instance07.txt"),
        8 => include_str!("../../assets/tireworld/instance08.txt"),
        9 => include_str!("../../assets/tireworld/instance09.txt"),
        10 => include_str!("../../assets/tireworld/instance10.txt"),
        _ => return None,
    })
}
