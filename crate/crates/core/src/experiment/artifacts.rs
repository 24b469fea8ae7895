//! Grid-world occupancy/policy maps and return-distribution CCDFs, as CSV
//! and self-contained SVG.
//!
//! Map CSV columns: `x,y,cell,visits,right,up,down,left`, one row per cell
//! from the bottom-left, where `visits` is the mean number of visits per
//! evaluation episode and the last four columns are `q(a | cell)`, all
//! averaged over runs. In the SVG each cell is drawn in its colour, its
//! centre shaded by occupancy and crossed by four beams whose lengths are
//! proportional to the action probabilities; the start cell has a black
//! border.
//!
//! CCDF CSV columns: `series,return,mean,low,high`, giving for each series at
//! each distinct return value `r` the fraction of episodes with return `>= r`
//! averaged over runs, and its minimum and maximum across runs.

use std::fmt::Write as _;

use crate::env::gridworld::{cell_state, Cell, GridWorldSpec};
use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::policy::Proposal;

/// Per-cell visit counts and action probabilities of one or more runs.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    pub spec: GridWorldSpec,
    /// Mean visits per episode, row-major from the bottom row.
    pub visits: Vec<f64>,
    pub probs: Vec<[f64; 4]>,
}

impl GridMap {
    /// Map of a single run from its evaluation trajectories.
    pub fn from_run(spec: &GridWorldSpec, proposal: &Proposal, trajectories: &[Trajectory]) -> Result<Self> {
        let (w, h) = (spec.width, spec.height);
        let mut visits = vec![0.0; w * h];
        for t in trajectories {
            let mut add = |s: &crate::mdp::State| {
                let f = s.features();
                visits[f[1] as usize * w + f[0] as usize] += 1.0;
            };
            add(&t.initial);
            for st in &t.steps {
                add(&st.next_state);
            }
        }
        let n = trajectories.len().max(1) as f64;
        visits.iter_mut().for_each(|v| *v /= n);
        let mut probs = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let q = proposal.action_probs(&cell_state(x, y))?;
                if q.len() != 4 {
                    return Err(Error::ShapeMismatch(format!("{} actions in a grid world", q.len())));
                }
                probs.push([q[0], q[1], q[2], q[3]]);
            }
        }
        Ok(GridMap {
            spec: spec.clone(),
            visits,
            probs,
        })
    }

    /// Cell-wise mean of several maps over the same world.
    pub fn mean(maps: &[GridMap]) -> Result<Self> {
        let first = maps.first().ok_or_else(|| Error::Usage("no maps to average".into()))?;
        let n = maps.len() as f64;
        let mut out = first.clone();
        for (i, v) in out.visits.iter_mut().enumerate() {
            *v = maps.iter().map(|m| m.visits[i]).sum::<f64>() / n;
        }
        for (i, p) in out.probs.iter_mut().enumerate() {
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = maps.iter().map(|m| m.probs[i][a]).sum::<f64>() / n;
            }
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,cell,visits,right,up,down,left\n");
        let w = self.spec.width;
        for y in 0..self.spec.height {
            for x in 0..w {
                let i = y * w + x;
                let p = self.probs[i];
                writeln!(
                    out,
                    "{x},{y},{},{},{},{},{},{}",
                    cell_name(self.spec.cell(x, y)),
                    self.visits[i],
                    p[0],
                    p[1],
                    p[2],
                    p[3]
                )
                .unwrap();
            }
        }
        out
    }

    pub fn to_svg(&self) -> String {
        const C: f64 = 80.0;
        let (w, h) = (self.spec.width, self.spec.height);
        let max_visits = self.visits.iter().copied().fold(0.0, f64::max);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            w as f64 * C,
            h as f64 * C,
            w as f64 * C,
            h as f64 * C
        )
        .unwrap();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let px = x as f64 * C;
                let py = (h - 1 - y) as f64 * C;
                writeln!(
                    out,
                    r##"<rect x="{px}" y="{py}" width="{C}" height="{C}" fill="{}" stroke="#ffffff" stroke-width="2"/>"##,
                    cell_colour(self.spec.cell(x, y))
                )
                .unwrap();
                let shade = if max_visits > 0.0 { self.visits[i] / max_visits } else { 0.0 };
                let grey = (255.0 * (1.0 - shade)).round() as u8;
                writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="rgb({grey},{grey},{grey})"/>"#,
                    px + C * 0.35,
                    py + C * 0.35,
                    C * 0.3,
                    C * 0.3
                )
                .unwrap();
                let (cx, cy) = (px + C / 2.0, py + C / 2.0);
                // right, up, down, left in screen coordinates
                let dirs = [(1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (-1.0, 0.0)];
                for (p, (dx, dy)) in self.probs[i].iter().zip(dirs) {
                    let len = p * C / 2.0;
                    writeln!(
                        out,
                        r##"<line x1="{cx}" y1="{cy}" x2="{:.3}" y2="{:.3}" stroke="#1f3b73" stroke-width="3"/>"##,
                        cx + dx * len,
                        cy + dy * len
                    )
                    .unwrap();
                }
                if (x, y) == self.spec.start {
                    writeln!(
                        out,
                        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#000000" stroke-width="4"/>"##,
                        px + 2.0,
                        py + 2.0,
                        C - 4.0,
                        C - 4.0
                    )
                    .unwrap();
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn cell_name(c: Cell) -> &'static str {
    match c {
        Cell::Grey => "grey",
        Cell::Red => "red",
        Cell::Yellow => "goal",
        Cell::Green => "swamp",
    }
}

fn cell_colour(c: Cell) -> &'static str {
    match c {
        Cell::Grey => "#c8c8c8",
        Cell::Red => "#e06666",
        Cell::Yellow => "#f1c232",
        Cell::Green => "#6aa84f",
    }
}

/// `P(return >= r)` at every `r` in `grid`, from ascending `returns`.
pub fn ccdf(returns: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = returns.len() as f64;
    grid.iter()
        .map(|&r| {
            let below = returns.partition_point(|&x| x < r);
            (returns.len() - below) as f64 / n
        })
        .collect()
}

/// One CCDF curve per labelled series, each from one or more runs given as
/// ascending returns.
#[derive(Clone, Debug)]
pub struct CcdfPlot {
    pub series: Vec<(String, Vec<Vec<f64>>)>,
}

impl CcdfPlot {
    fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .series
            .iter()
            .flat_map(|(_, runs)| runs.iter().flatten().copied())
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// `(grid, per-series (mean, low, high))`.
    fn curves(&self) -> (Vec<f64>, Vec<Vec<(f64, f64, f64)>>) {
        let grid = self.grid();
        let curves = self
            .series
            .iter()
            .map(|(_, runs)| {
                let per_run: Vec<Vec<f64>> = runs.iter().map(|r| ccdf(r, &grid)).collect();
                (0..grid.len())
                    .map(|i| {
                        let v: Vec<f64> = per_run.iter().map(|c| c[i]).collect();
                        let mean = v.iter().sum::<f64>() / v.len() as f64;
                        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (mean, lo, hi)
                    })
                    .collect()
            })
            .collect();
        (grid, curves)
    }

    pub fn to_csv(&self) -> String {
        let (grid, curves) = self.curves();
        let mut out = String::from("series,return,mean,low,high\n");
        for ((name, _), curve) in self.series.iter().zip(&curves) {
            for (r, (m, lo, hi)) in grid.iter().zip(curve) {
                writeln!(out, "{name},{r},{m},{lo},{hi}").unwrap();
            }
        }
        out
    }

    /// Step plot of each series' mean CCDF over a shaded min-max band.
    pub fn to_svg(&self) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const M: f64 = 50.0;
        const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
        let (grid, curves) = self.curves();
        let (lo, hi) = match (grid.first(), grid.last()) {
            (Some(&a), Some(&b)) if b > a => (a, b),
            (Some(&a), _) => (a - 1.0, a + 1.0),
            _ => (0.0, 1.0),
        };
        let sx = |r: f64| M + (r - lo) / (hi - lo) * (W - 2.0 * M);
        let sy = |p: f64| H - M - p * (H - 2.0 * M);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(out, r##"<rect width="{W}" height="{H}" fill="#ffffff"/>"##).unwrap();
        writeln!(
            out,
            r##"<polyline points="{M},{} {M},{} {},{}" fill="none" stroke="#000000"/>"##,
            M,
            H - M,
            W - M,
            H - M
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">return</text>"#, W / 2.0, H - 10.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{lo}</text>"#, M, H - M + 16.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{hi}</text>"#, W - M, H - M + 16.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">1</text>"#, M - 6.0, sy(1.0) + 4.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, M - 6.0, sy(0.0) + 4.0).unwrap();
        for (k, ((name, _), curve)) in self.series.iter().zip(&curves).enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            // a CCDF is right-continuous: it holds its value at r until the next grid point
            let step = |pick: &dyn Fn(&(f64, f64, f64)) -> f64| {
                let mut pts = vec![(sx(lo), sy(1.0))];
                for (i, (r, v)) in grid.iter().zip(curve).enumerate() {
                    pts.push((sx(*r), pts.last().unwrap().1));
                    pts.push((sx(*r), sy(pick(v))));
                    if i + 1 == grid.len() {
                        pts.push((sx(hi), sy(pick(v))));
                    }
                }
                pts
            };
            let upper = step(&|v| v.2);
            let mut lower = step(&|v| v.1);
            lower.reverse();
            let band: Vec<String> = upper.iter().chain(&lower).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            writeln!(out, r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#, band.join(" ")).unwrap();
            let mean: Vec<String> = step(&|v| v.0).iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, mean.join(" ")).unwrap();
            writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{colour}">{name}</text>"#,
                W - M - 100.0,
                M + 16.0 * k as f64
            )
            .unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_is_a_single_drop() {
        let s = vec![2.0; 10];
        assert_eq!(ccdf(&s, &[1.0, 2.0, 3.0]), vec![1.0, 1.0, 0.0]);
        let plot = CcdfPlot {
            series: vec![("a".into(), vec![s])],
        };
        assert_eq!(plot.to_csv(), "series,return,mean,low,high\na,2,1,1,1\n");
    }

    #[test]
    fn two_runs_give_a_band() {
        let plot = CcdfPlot {
            series: vec![("a".into(), vec![vec![0.0, 1.0], vec![1.0, 1.0]])],
        };
        let csv = plot.to_csv();
        assert!(csv.contains("a,1,0.75,0.5,1\n"), "{csv}");
        assert_eq!(plot.to_svg(), plot.to_svg());
    }

    #[test]
    fn uniform_proposal_has_equal_beams() {
        let spec = GridWorldSpec::uniform(3, 2, 0.8, 5);
        let t = Trajectory {
            steps: vec![],
            actions: 4,
            initial: cell_state(0, 0),
            total_return: 0.0,
            outcome: "timeout",
        };
        let m = GridMap::from_run(&spec, &Proposal::tabular(4), &[t]).unwrap();
        assert!(m.probs.iter().flatten().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(m.visits.iter().filter(|&&v| v > 0.0).count(), 1);
        assert!(m.to_svg().contains(r##"stroke="#000000" stroke-width="4""##));
        assert_eq!(m.to_csv().lines().count(), 7);
    }
}
