//! Academic Advising.
//!
//! A student takes up to `max_load` courses per semester. A course can be
//! taken once all of its prerequisites are passed, and each attempt passes
//! with probability `pass_prob`. The episode ends once every required course
//! is passed.
//!
//! Rewards per semester: -1 for each course taken for the first time, -2 for
//! each retake, and -5 while the program is still incomplete. Courses in the
//! chosen subset that are already passed or not yet eligible are skipped at no
//! cost.
//!
//! Actions are the non-empty course subsets of size at most `max_load`, in
//! lexicographic order. State features are the passed bits followed by the
//! attempted bits.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionId, Environment, Outcome, State};
use crate::rng::{stable_hash, RngStream};

pub const TAKE_COST: f64 = -1.0;
pub const RETAKE_COST: f64 = -2.0;
pub const INCOMPLETE_PENALTY: f64 = -5.0;
pub const DEFAULT_PASS_PROB: f64 = 0.75;
pub const DEFAULT_HORIZON: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct AdvisingSpec {
    pub course_count: usize,
    /// `(before, after)`: `before` must be passed to take `after`.
    pub prerequisites: Vec<(usize, usize)>,
    pub required: Vec<usize>,
    pub pass_prob: f64,
    pub max_load: usize,
    pub horizon: usize,
}

impl AdvisingSpec {
    /// Instances 1..=10: 10, 10, 15, 15, .., 30, 30 courses; odd instances
    /// allow one course per semester, even instances two. Course `i >= 5`
    /// requires course `i - 5`; the program is courses 0, 1 and every fifth
    /// course after 1.
    pub fn instance(index: usize) -> Result<Self> {
        if !(1..=10).contains(&index) {
            return Err(Error::InvalidEnvironment(format!(
                "advising instance {index} outside 1..=10"
            )));
        }
        let n = 5 * (index.div_ceil(2) + 1);
        let prerequisites = (5..n).map(|i| (i - 5, i)).collect();
        let mut required = vec![0];
        required.extend((1..n).step_by(5));
        Ok(AdvisingSpec {
            course_count: n,
            prerequisites,
            required,
            pass_prob: DEFAULT_PASS_PROB,
            max_load: if index % 2 == 1 { 1 } else { 2 },
            horizon: DEFAULT_HORIZON,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidEnvironment(format!("advising: {m}")));
        let n = self.course_count;
        if n == 0 || n > 31 {
            return bad("course_count must be in 1..=31");
        }
        if self.max_load == 0 || self.max_load > n {
            return bad("max_load must be in 1..=course_count");
        }
        if !(0.0..=1.0).contains(&self.pass_prob) {
            return bad("pass_prob outside [0, 1]");
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if self.required.is_empty() || self.required.iter().any(|&c| c >= n) {
            return bad("required courses must be a non-empty subset of the courses");
        }
        if self.prerequisites.iter().any(|&(a, b)| a >= n || b >= n || a == b) {
            return bad("prerequisite out of range");
        }
        // Kahn's algorithm: the prerequisite graph must be acyclic.
        let mut indegree = vec![0usize; n];
        for &(_, b) in &self.prerequisites {
            indegree[b] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&c| indegree[c] == 0).collect();
        let mut seen = 0;
        while let Some(c) = ready.pop() {
            seen += 1;
            for &(a, b) in &self.prerequisites {
                if a == c {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        if seen != n {
            return bad("prerequisites contain a cycle");
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# academic advising").unwrap();
        writeln!(out, "courses={}", self.course_count).unwrap();
        writeln!(out, "max_load={}", self.max_load).unwrap();
        writeln!(out, "pass_prob={}", self.pass_prob).unwrap();
        writeln!(out, "horizon={}", self.horizon).unwrap();
        let req: Vec<String> = self.required.iter().map(|c| c.to_string()).collect();
        writeln!(out, "required={}", req.join(" ")).unwrap();
        for (a, b) in &self.prerequisites {
            writeln!(out, "prereq={a} {b}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidEnvironment(format!("advising instance: {m}"));
        let mut spec = AdvisingSpec {
            course_count: 0,
            prerequisites: Vec::new(),
            required: Vec::new(),
            pass_prob: DEFAULT_PASS_PROB,
            max_load: 1,
            horizon: DEFAULT_HORIZON,
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", n + 1)))?;
            let ints = |v: &str| -> Result<Vec<usize>> {
                v.split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|e| bad(format!("line {}: {e}", n + 1))))
                    .collect()
            };
            let one = |v: &str| -> Result<usize> {
                match ints(v)?.as_slice() {
                    &[x] => Ok(x),
                    _ => Err(bad(format!("line {}: expected one integer", n + 1))),
                }
            };
            match k.trim() {
                "courses" => spec.course_count = one(v)?,
                "max_load" => spec.max_load = one(v)?,
                "horizon" => spec.horizon = one(v)?,
                "pass_prob" => {
                    spec.pass_prob = v
                        .trim()
                        .parse()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?
                }
                "required" => spec.required = ints(v)?,
                "prereq" => match ints(v)?.as_slice() {
                    &[a, b] => spec.prerequisites.push((a, b)),
                    _ => return Err(bad(format!("line {}: prereq=<before> <after>", n + 1))),
                },
                other => return Err(bad(format!("line {}: unknown key `{other}`", n + 1))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Number of non-empty subsets of `n` courses with at most `k` members.
pub fn subset_count(n: usize, k: usize) -> usize {
    let mut total = 0;
    let mut binom = 1usize;
    for j in 1..=k.min(n) {
        binom = binom * (n + 1 - j) / j;
        total += binom;
    }
    total
}

#[derive(Debug)]
pub struct Advising {
    spec: AdvisingSpec,
    /// Course subsets as bitmasks, one per action.
    actions: Vec<u32>,
    prereq_mask: Vec<u32>,
    required_mask: u32,
    id: String,
}

impl Advising {
    pub fn new(spec: AdvisingSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.course_count;
        let mut subsets: BTreeSet<Vec<usize>> = BTreeSet::new();
        fn extend(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
            if !cur.is_empty() {
                out.insert(cur.clone());
            }
            if cur.len() == k {
                return;
            }
            for c in start..n {
                cur.push(c);
                extend(c + 1, n, k, cur, out);
                cur.pop();
            }
        }
        extend(0, n, spec.max_load, &mut Vec::new(), &mut subsets);
        let actions = subsets
            .iter()
            .map(|s| s.iter().fold(0u32, |m, &c| m | 1 << c))
            .collect();
        let mut prereq_mask = vec![0u32; n];
        for &(a, b) in &spec.prerequisites {
            prereq_mask[b] |= 1 << a;
        }
        let required_mask = spec.required.iter().fold(0u32, |m, &c| m | 1 << c);
        let id = format!(
            "advising-{}-{:016x}",
            n,
            stable_hash(spec.to_text().as_bytes())
        );
        Ok(Advising {
            spec,
            actions,
            prereq_mask,
            required_mask,
            id,
        })
    }

    pub fn spec(&self) -> &AdvisingSpec {
        &self.spec
    }

    /// Courses taken by an action.
    pub fn courses_of(&self, a: ActionId) -> Vec<usize> {
        (0..self.spec.course_count)
            .filter(|c| self.actions[a] & (1 << c) != 0)
            .collect()
    }

    fn masks(&self, s: &State) -> (u32, u32) {
        let f = s.features();
        let n = self.spec.course_count;
        let pack = |bits: &[i32]| {
            bits.iter()
                .enumerate()
                .fold(0u32, |m, (i, &b)| if b != 0 { m | 1 << i } else { m })
        };
        (pack(&f[..n]), pack(&f[n..]))
    }

    fn encode(&self, passed: u32, attempted: u32) -> State {
        let n = self.spec.course_count;
        let bits = (0..n)
            .map(|i| (passed >> i & 1) as i32)
            .chain((0..n).map(|i| (attempted >> i & 1) as i32))
            .collect::<Vec<_>>();
        State::new(bits)
    }

    pub fn state(&self, passed: &[usize], attempted: &[usize]) -> State {
        let p = passed.iter().fold(0u32, |m, &c| m | 1 << c);
        let a = attempted.iter().fold(p, |m, &c| m | 1 << c);
        self.encode(p, a)
    }
}

impl Environment for Advising {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn initial_state(&self) -> State {
        self.encode(0, 0)
    }

    fn feature_dim(&self) -> usize {
        2 * self.spec.course_count
    }

    fn is_absorbing(&self, s: &State) -> bool {
        let (passed, _) = self.masks(s);
        passed & self.required_mask == self.required_mask
    }

    fn transition(&self, s: &State, a: ActionId, rng: &mut RngStream) -> (State, f64) {
        let (mut passed, mut attempted) = self.masks(s);
        let before = passed;
        let mut reward = INCOMPLETE_PENALTY;
        for c in 0..self.spec.course_count {
            if self.actions[a] & (1 << c) == 0 || before & (1 << c) != 0 {
                continue;
            }
            if before & self.prereq_mask[c] != self.prereq_mask[c] {
                continue;
            }
            reward += if attempted & (1 << c) != 0 {
                RETAKE_COST
            } else {
                TAKE_COST
            };
            attempted |= 1 << c;
            if rng.bernoulli(self.spec.pass_prob) {
                passed |= 1 << c;
            }
        }
        (self.encode(passed, attempted), reward)
    }

    fn outcome(&self, last: &State) -> Outcome {
        if self.is_absorbing(last) {
            "complete"
        } else {
            "incomplete"
        }
    }

    fn outcome_labels(&self) -> &'static [Outcome] {
        &["complete", "incomplete"]
    }

    fn describe(&self, s: &State) -> String {
        let (passed, attempted) = self.masks(s);
        let list = |m: u32| {
            (0..self.spec.course_count)
                .filter(|c| m & (1 << c) != 0)
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("passed {{{}}} attempted {{{}}}", list(passed), list(attempted))
    }
}

pub fn builtin_instance_text(index: usize) -> Option<&'static str> {
    Some(match index {
        1 => include_str!("../../assets/advising/instance01.txt"),
        2 => include_str!("../../assets/advising/instance02.txt"),
        3 => include_str!("../../assets/advising/instance03.txt"),
        4 => include_str!("../../assets/advising/instance04.txt"),
        5 => include_str!("../../assets/advising/instance05.txt"),
        6 => include_str!("../../assets/advising/instance06.txt"),
        7 => include_str!("../../assets/advising/instance07.txt"),
        8 => include_str!("../../assets/advising/instance08.txt"),
        9 => include_str!("../../assets/advising/instance09.txt"),
        10 => include_str!("../../assets/advising/instance10.txt"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::simulate_step;

    #[test]
    fn action_counts_match_closed_form() {
        let counts: Vec<usize> = (1..=3)
            .map(|i| Advising::new(AdvisingSpec::instance(i).unwrap()).unwrap().action_count())
            .collect();
        assert_eq!(counts, vec![10, 55, 15]);
        for i in 1..=10 {
            let spec = AdvisingSpec::instance(i).unwrap();
            let env = Advising::new(spec.clone()).unwrap();
            assert_eq!(env.action_count(), subset_count(spec.course_count, spec.max_load));
        }
    }

    #[test]
    fn shipped_instances_match_generator() {
        for i in 1..=10 {
            let shipped = AdvisingSpec::parse(builtin_instance_text(i).unwrap()).unwrap();
            assert_eq!(shipped, AdvisingSpec::instance(i).unwrap(), "instance {i}");
        }
    }

    #[test]
    fn costs_and_prerequisites() {
        let mut spec = AdvisingSpec::instance(1).unwrap();
        spec.pass_prob = 0.0;
        let env = Advising::new(spec).unwrap();
        let mut rng = RngStream::new(1);
        let s0 = env.initial_state();
        let (s1, r1) = simulate_step(&env, &s0, 0, &mut rng).unwrap();
        assert_eq!(r1, INCOMPLETE_PENALTY + TAKE_COST);
        let (_, r2) = simulate_step(&env, &s1, 0, &mut rng).unwrap();
        assert_eq!(r2, INCOMPLETE_PENALTY + RETAKE_COST);
        // course 6 needs course 1
        let (s3, r3) = simulate_step(&env, &s0, 6, &mut rng).unwrap();
        assert_eq!(s3, s0);
        assert_eq!(r3, INCOMPLETE_PENALTY);
    }

    #[test]
    fn completing_the_program_is_absorbing() {
        let env = Advising::new(AdvisingSpec::instance(1).unwrap()).unwrap();
        let done = env.state(&[0, 1, 6], &[]);
        assert!(env.is_absorbing(&done));
        assert_eq!(env.outcome(&done), "complete");
        assert!(!env.is_absorbing(&env.state(&[0, 1], &[6])));
    }

    #[test]
    fn cyclic_prerequisites_rejected() {
        let mut spec = AdvisingSpec::instance(1).unwrap();
        spec.prerequisites.push((6, 1));
        assert!(Advising::new(spec).is_err());
    }

    #[test]
    fn two_course_load_enumerates_pairs_in_order() {
        let env = Advising::new(AdvisingSpec::instance(2).unwrap()).unwrap();
        assert_eq!(env.courses_of(0), vec![0]);
        assert_eq!(env.courses_of(1), vec![0, 1]);
        assert_eq!(env.courses_of(54), vec![9]);
    }
}
