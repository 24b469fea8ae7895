//! Slippery rectangular grid worlds.
//!
//! Actions are Right, Up, Down, Left. The intended move succeeds with
//! probability `p_succ`; otherwise the agent moves in one of the two
//! perpendicular directions, each with probability `(1 - p_succ) / 2`. Moves
//! off the grid leave the agent in place. The reward is read from the colour
//! of the cell the agent ends up in; goal and swamp cells are absorbing.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, Outcome, State, TabularModel};
use crate::rng::{stable_hash, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    /// Pavement, reward 0.
    Grey,
    /// Gravel, reward -1.
    Red,
    /// Goal, reward +5, absorbing.
    Yellow,
    /// Swamp, reward -5, absorbing.
    Green,
}

impl Cell {
    pub fn reward(self) -> f64 {
        match self {
            Cell::Grey => 0.0,
            Cell::Red => -1.0,
            Cell::Yellow => 5.0,
            Cell::Green => -5.0,
        }
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, Cell::Yellow | Cell::Green)
    }

    fn symbol(self) -> char {
        match self {
            Cell::Grey => '.',
            Cell::Red => 'r',
            Cell::Yellow => 'y',
            Cell::Green => 'g',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Right = 0,
    Up = 1,
    Down = 2,
    Left = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Right, Move::Up, Move::Down, Move::Left];

    pub fn from_action(a: ActionId) -> Move {
        Move::ALL[a]
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Move::Right => (1, 0),
            Move::Up => (0, 1),
            Move::Down => (0, -1),
            Move::Left => (-1, 0),
        }
    }

    fn perpendicular(self) -> [Move; 2] {
        match self {
            Move::Right | Move::Left => [Move::Up, Move::Down],
            Move::Up | Move::Down => [Move::Right, Move::Left],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, `cells[y * width + x]`, with `y = 0` the bottom row.
    pub cells: Vec<Cell>,
    pub start: (usize, usize),
    pub p_succ: f64,
    pub horizon: usize,
}

impl GridWorldSpec {
    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Cell) {
        let w = self.width;
        self.cells[y * w + x] = c;
    }

    /// An all-grey world.
    pub fn uniform(width: usize, height: usize, p_succ: f64, horizon: usize) -> Self {
        GridWorldSpec {
            width,
            height,
            cells: vec![Cell::Grey; width * height],
            start: (0, 0),
            p_succ,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidEnvironment(m));
        if self.width == 0 || self.height == 0 {
            return bad("grid must be non-empty".into());
        }
        if self.cells.len() != self.width * self.height {
            return bad(format!(
                "{} cells for a {}x{} grid",
                self.cells.len(),
                self.width,
                self.height
            ));
        }
        if !(self.p_succ > 0.0 && self.p_succ <= 1.0) {
            return bad(format!("p_succ={} outside (0, 1]", self.p_succ));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        let (sx, sy) = self.start;
        if sx >= self.width || sy >= self.height {
            return bad("start outside the grid".into());
        }
        if self.cell(sx, sy) != Cell::Grey {
            return bad("start cell must be grey".into());
        }
        Ok(())
    }

    /// Parses the layout format: header lines `p_succ=<real>` and
    /// `horizon=<int>`, then one line per row from the top, using `.` grey,
    /// `r` red, `y` goal, `g` swamp and `S` the (grey) start. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidEnvironment(format!("grid layout: {m}"));
        let mut p_succ = None;
        let mut horizon = None;
        let mut rows: Vec<Vec<char>> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = line.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "p_succ" => {
                        p_succ = Some(v.parse::<f64>().map_err(|e| {
                            bad(format!("line {}: p_succ: {e}", lineno + 1))
                        })?)
                    }
                    "horizon" => {
                        horizon = Some(v.parse::<usize>().map_err(|e| {
                            bad(format!("line {}: horizon: {e}", lineno + 1))
                        })?)
                    }
                    other => return Err(bad(format!("line {}: unknown key `{other}`", lineno + 1))),
                }
                continue;
            }
            rows.push(line.chars().collect());
        }
        let p_succ = p_succ.ok_or_else(|| bad("missing p_succ".into()))?;
        let horizon = horizon.ok_or_else(|| bad("missing horizon".into()))?;
        if rows.is_empty() {
            return Err(bad("no grid rows".into()));
        }
        let width = rows[0].len();
        let height = rows.len();
        let mut cells = vec![Cell::Grey; width * height];
        let mut start = None;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(bad(format!("row {} has {} cells, expected {width}", r + 1, row.len())));
            }
            let y = height - 1 - r;
            for (x, &ch) in row.iter().enumerate() {
                cells[y * width + x] = match ch {
                    '.' => Cell::Grey,
                    'r' => Cell::Red,
                    'y' => Cell::Yellow,
                    'g' => Cell::Green,
                    'S' => {
                        if start.replace((x, y)).is_some() {
                            return Err(bad("more than one start cell".into()));
                        }
                        Cell::Grey
                    }
                    other => return Err(bad(format!("unknown cell character `{other}`"))),
                };
            }
        }
        let spec = GridWorldSpec {
            width,
            height,
            cells,
            start: start.ok_or_else(|| bad("missing start cell `S`".into()))?,
            p_succ,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_layout(&self) -> String {
        let mut out = String::new();
        writeln!(out, "p_succ={}", self.p_succ).unwrap();
        writeln!(out, "horizon={}", self.horizon).unwrap();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                let ch = if (x, y) == self.start {
                    'S'
                } else {
                    self.cell(x, y).symbol()
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
pub struct GridWorld {
    spec: GridWorldSpec,
    model: TabularModel,
    id: String,
}

impl GridWorld {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        spec.validate()?;
        let id = format!(
            "gridworld-{}x{}-{:016x}",
            spec.width,
            spec.height,
            stable_hash(spec.to_layout().as_bytes())
        );
        let initial = cell_state(spec.start.0, spec.start.1);
        let model = TabularModel::explore(
            &initial,
            4,
            |s| spec.cell(s.features()[0] as usize, s.features()[1] as usize).is_absorbing(),
            |s, a| outcomes(&spec, s, a),
        )?;
        Ok(GridWorld { spec, model, id })
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    fn target(&self, x: usize, y: usize, m: Move) -> (usize, usize) {
        target(&self.spec, x, y, m)
    }
}

pub fn cell_state(x: usize, y: usize) -> State {
    State::new(vec![x as i32, y as i32])
}

/// Cell coordinates of a grid-world state.
pub fn cell_of(s: &State) -> (usize, usize) {
    (s.features()[0] as usize, s.features()[1] as usize)
}

fn target(spec: &GridWorldSpec, x: usize, y: usize, m: Move) -> (usize, usize) {
    let (dx, dy) = m.delta();
    let nx = x as i32 + dx;
    let ny = y as i32 + dy;
    if nx < 0 || ny < 0 || nx >= spec.width as i32 || ny >= spec.height as i32 {
        (x, y)
    } else {
        (nx as usize, ny as usize)
    }
}

fn outcomes(spec: &GridWorldSpec, s: &State, a: ActionId) -> Vec<(State, f64, f64)> {
    let (x, y) = cell_of(s);
    let m = Move::from_action(a);
    let slip = (1.0 - spec.p_succ) / 2.0;
    let mut out = Vec::with_capacity(3);
    let (tx, ty) = target(spec, x, y, m);
    out.push((cell_state(tx, ty), spec.p_succ, spec.cell(tx, ty).reward()));
    if slip > 0.0 {
        for p in m.perpendicular() {
            let (tx, ty) = target(spec, x, y, p);
            out.push((cell_state(tx, ty), slip, spec.cell(tx, ty).reward()));
        }
    }
    out
}

impl Environment for GridWorld {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn action_count(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn initial_state(&self) -> State {
        cell_state(self.spec.start.0, self.spec.start.1)
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn feature_scale(&self) -> Vec<f64> {
        vec![
            (self.spec.width.max(2) - 1) as f64,
            (self.spec.height.max(2) - 1) as f64,
        ]
    }

    fn is_absorbing(&self, s: &State) -> bool {
        let (x, y) = cell_of(s);
        self.spec.cell(x, y).is_absorbing()
    }

    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64) {
        let (x, y) = cell_of(s);
        let m = Move::from_action(a);
        let u = rng.uniform();
        let slip = (1.0 - self.spec.p_succ) / 2.0;
        let dir = if u < self.spec.p_succ {
            m
        } else if u < self.spec.p_succ + slip {
            m.perpendicular()[0]
        } else {
            m.perpendicular()[1]
        };
        let (tx, ty) = self.target(x, y, dir);
        (cell_state(tx, ty), self.spec.cell(tx, ty).reward())
    }

    fn outcome(&self, last: &State) -> Outcome {
        let (x, y) = cell_of(last);
        match self.spec.cell(x, y) {
            Cell::Yellow => "goal",
            Cell::Green => "swamp",
            _ => "timeout",
        }
    }

    fn outcome_labels(&self) -> &'static [Outcome] {
        &["goal", "swamp", "timeout"]
    }

    fn model(&self) -> Option<&TabularModel> {
        Some(&self.model)
    }

    fn describe(&self, s: &State) -> String {
        let (x, y) = cell_of(s);
        format!("({x}, {y})")
    }
}

pub const FLAT_LAYOUT: &str = include_str!("../../assets/grids/flat.grid");
pub const UNIMODAL_LAYOUT: &str = include_str!("../../assets/grids/unimodal.grid");
pub const MULTIMODAL_LAYOUT: &str = include_str!("../../assets/grids/multimodal.grid");
pub const SHARED_DYNAMICS_LAYOUT: &str = include_str!("../../assets/grids/shared_dynamics.grid");

/// Looks up one of the shipped layouts by name.
pub fn builtin_layout(name: &str) -> Option<&'static str> {
    match name {
        "flat" => Some(FLAT_LAYOUT),
        "unimodal" => Some(UNIMODAL_LAYOUT),
        "multimodal" => Some(MULTIMODAL_LAYOUT),
        "shared_dynamics" | "shared-dynamics" => Some(SHARED_DYNAMICS_LAYOUT),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::simulate_step;

    fn flat(p: f64) -> GridWorld {
        GridWorld::new(GridWorldSpec::uniform(4, 4, p, 20)).unwrap()
    }

    fn row(env: &GridWorld, s: &State, a: ActionId) -> Vec<((usize, usize), f64)> {
        let m = env.model().unwrap();
        let i = m.index_of(s).unwrap();
        let mut v: Vec<_> = m
            .transitions(i, a)
            .iter()
            .map(|t| (cell_of(&m.states()[t.next]), t.prob))
            .collect();
        v.sort_by_key(|t| t.0);
        v
    }

    #[test]
    fn slip_split_at_interior_cell() {
        let env = flat(0.8);
        let r = row(&env, &cell_state(1, 1), Move::Right as usize);
        assert_eq!(r.len(), 3);
        let p = |c| r.iter().find(|(cell, _)| *cell == c).unwrap().1;
        assert!((p((2, 1)) - 0.8).abs() < 1e-15);
        assert!((p((1, 2)) - 0.1).abs() < 1e-15);
        assert!((p((1, 0)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn deterministic_limit_is_one_hot() {
        let env = flat(1.0);
        let m = env.model().unwrap();
        for i in 0..m.len() {
            for a in 0..4 {
                let t = m.transitions(i, a);
                assert_eq!(t.len(), 1);
                assert_eq!(t[0].prob, 1.0);
            }
        }
    }

    #[test]
    fn success_branch_moves_up_with_zero_reward() {
        let env = flat(0.8);
        // find an rng whose first uniform lands in the success branch
        let mut seed = 0;
        loop {
            let mut probe = RngStream::new(seed);
            if probe.uniform() < 0.8 {
                break;
            }
            seed += 1;
        }
        let mut rng = RngStream::new(seed);
        let (s, r) = simulate_step(&env, &cell_state(0, 0), Move::Up as usize, &mut rng).unwrap();
        assert_eq!(cell_of(&s), (0, 1));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn absorbing_goal_stays_put() {
        let mut spec = GridWorldSpec::uniform(3, 3, 0.8, 10);
        spec.set(2, 2, Cell::Yellow);
        let env = GridWorld::new(spec).unwrap();
        let mut rng = RngStream::new(1);
        for a in 0..4 {
            let (s, r) = simulate_step(&env, &cell_state(2, 2), a, &mut rng).unwrap();
            assert_eq!(cell_of(&s), (2, 2));
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn out_of_range_action_is_an_error() {
        let env = flat(0.8);
        let mut rng = RngStream::new(1);
        assert!(matches!(
            simulate_step(&env, &cell_state(0, 0), 4, &mut rng),
            Err(Error::InvalidAction { action: 4, .. })
        ));
    }

    #[test]
    fn colour_rewards_match_table() {
        let mut spec = GridWorldSpec::uniform(2, 2, 1.0, 5);
        spec.set(1, 0, Cell::Red);
        spec.set(0, 1, Cell::Yellow);
        spec.set(1, 1, Cell::Green);
        for (c, r) in [(Cell::Grey, 0.0), (Cell::Red, -1.0), (Cell::Yellow, 5.0), (Cell::Green, -5.0)] {
            assert_eq!(c.reward(), r);
        }
        let env = GridWorld::new(spec).unwrap();
        let mut rng = RngStream::new(0);
        let (_, r) = simulate_step(&env, &cell_state(0, 0), Move::Right as usize, &mut rng).unwrap();
        assert_eq!(r, -1.0);
        let (_, r) = simulate_step(&env, &cell_state(0, 0), Move::Up as usize, &mut rng).unwrap();
        assert_eq!(r, 5.0);
    }

    #[test]
    fn layout_round_trip_and_errors() {
        for text in [FLAT_LAYOUT, UNIMODAL_LAYOUT, MULTIMODAL_LAYOUT, SHARED_DYNAMICS_LAYOUT] {
            let spec = GridWorldSpec::parse(text).unwrap();
            assert_eq!(GridWorldSpec::parse(&spec.to_layout()).unwrap(), spec);
        }
        assert!(GridWorldSpec::parse("horizon=3\n..\nS.\n").is_err());
        assert!(GridWorldSpec::parse("p_succ=0.8\nhorizon=3\n..\n..\n").is_err());
        assert!(GridWorldSpec::parse("p_succ=0.8\nhorizon=3\n..\nS\n").is_err());
        assert!(GridWorldSpec::parse("p_succ=0.8\nhorizon=3\nx.\nS.\n").is_err());
    }

    #[test]
    fn shared_dynamics_instance_layout() {
        let spec = GridWorldSpec::parse(SHARED_DYNAMICS_LAYOUT).unwrap();
        assert_eq!((spec.width, spec.height), (4, 4));
        assert_eq!(spec.cell(1, 3), Cell::Green);
        assert_eq!(spec.cell(2, 3), Cell::Yellow);
        assert_eq!(spec.start, (1, 2));
        assert_eq!(spec.p_succ, 0.5);
        assert_eq!(spec.horizon, 10);
    }
}
