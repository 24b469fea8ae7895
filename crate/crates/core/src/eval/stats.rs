//! Return statistics and cross-run summaries.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::Outcome;

/// Pairwise (cascade) summation: the result depends only on the order of
/// `xs`, never on how the work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Nearest-rank quantile of ascending `sorted`: the `ceil(p n)`-th smallest
/// sample (the smallest sample for `p = 0`).
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Summary of the returns of a batch of episodes.
///
/// Quantiles are nearest-rank. The lower tail mean averages every sample at
/// or below the 0.05 quantile, the upper one every sample at or above the
/// 0.95 quantile, so ties with the quantile sample are always included.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnStats {
    pub episodes: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`, 0 for one episode).
    pub std: f64,
    pub std_err: f64,
    pub q05: f64,
    pub q95: f64,
    pub lower_tail_mean: f64,
    pub upper_tail_mean: f64,
    /// Probability of each outcome label, in the environment's label order.
    pub outcome_probs: Vec<(Outcome, f64)>,
    /// All returns, ascending.
    pub returns: Vec<f64>,
}

impl ReturnStats {
    /// Builds the summary from per-episode returns and outcome labels.
    /// Every outcome must be one of `labels`.
    pub fn from_episodes(returns: &[f64], outcomes: &[Outcome], labels: &[Outcome]) -> Result<Self> {
        if returns.is_empty() || returns.len() != outcomes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} returns and {} outcomes",
                returns.len(),
                outcomes.len()
            )));
        }
        let n = returns.len();
        let mean = pairwise_sum(returns) / n as f64;
        let dev: Vec<f64> = returns.iter().map(|r| (r - mean) * (r - mean)).collect();
        let std = if n > 1 {
            (pairwise_sum(&dev) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = returns.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q05 = nearest_rank(&sorted, 0.05);
        let q95 = nearest_rank(&sorted, 0.95);
        let tail_mean = |pred: &dyn Fn(f64) -> bool| {
            let t: Vec<f64> = sorted.iter().copied().filter(|&r| pred(r)).collect();
            pairwise_sum(&t) / t.len() as f64
        };
        let lower_tail_mean = tail_mean(&|r| r <= q05);
        let upper_tail_mean = tail_mean(&|r| r >= q95);
        let mut counts = vec![0usize; labels.len()];
        for o in outcomes {
            let i = labels
                .iter()
                .position(|l| l == o)
                .ok_or_else(|| Error::ShapeMismatch(format!("outcome `{o}` is not a known label")))?;
            counts[i] += 1;
        }
        Ok(ReturnStats {
            episodes: n,
            mean,
            std,
            std_err: std / (n as f64).sqrt(),
            q05,
            q95,
            lower_tail_mean,
            upper_tail_mean,
            outcome_probs: labels
                .iter()
                .zip(counts)
                .map(|(&l, c)| (l, c as f64 / n as f64))
                .collect(),
            returns: sorted,
        })
    }

    pub fn outcome_prob(&self, label: &str) -> f64 {
        self.outcome_probs
            .iter()
            .find(|(l, _)| *l == label)
            .map_or(0.0, |&(_, p)| p)
    }

    /// Distinct returns with their counts, ascending.
    pub fn histogram(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &r in &self.returns {
            match out.last_mut() {
                Some((v, c)) if *v == r => *c += 1,
                _ => out.push((r, 1)),
            }
        }
        out
    }

    /// Named scalar metrics in report order: the return summary followed by
    /// one entry per outcome label.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut m = vec![
            ("expected return".to_string(), self.mean),
            ("std err".to_string(), self.std_err),
            ("0.05 quantile".to_string(), self.q05),
            ("0.05 tail mean".to_string(), self.lower_tail_mean),
            ("0.95 quantile".to_string(), self.q95),
            ("0.95 tail mean".to_string(), self.upper_tail_mean),
        ];
        m.extend(self.outcome_probs.iter().map(|&(l, p)| (l.to_string(), p)));
        m
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        writeln!(out, "episodes,{}", self.episodes).unwrap();
        for (k, v) in self.metrics() {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    /// One return per line, ascending.
    pub fn returns_csv(&self) -> String {
        let mut out = String::from("return\n");
        for r in &self.returns {
            writeln!(out, "{r}").unwrap();
        }
        out
    }
}

/// Mean and sample standard deviation of one metric across runs.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub runs: usize,
    pub metrics: Vec<MetricSummary>,
}

impl RunSummary {
    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// A table with one `mean ± std` cell per column, restricted to
    /// `columns` (all metrics when empty).
    pub fn table(&self, row_label: &str, columns: &[&str]) -> String {
        let chosen: Vec<&MetricSummary> = if columns.is_empty() {
            self.metrics.iter().collect()
        } else {
            columns.iter().filter_map(|c| self.get(c)).collect()
        };
        let cells: Vec<String> = chosen
            .iter()
            .map(|m| format!("{:.2} ± {:.2}", m.mean, m.std))
            .collect();
        let widths: Vec<usize> = chosen
            .iter()
            .zip(&cells)
            .map(|(m, c)| m.name.chars().count().max(c.chars().count()))
            .collect();
        let lw = row_label.chars().count().max(6);
        let mut out = format!("{:lw$}", "");
        for (m, w) in chosen.iter().zip(&widths) {
            write!(out, " | {:>w$}", m.name).unwrap();
        }
        out.push('\n');
        write!(out, "{row_label:lw$}").unwrap();
        for (c, w) in cells.iter().zip(&widths) {
            write!(out, " | {c:>w$}").unwrap();
        }
        out.push('\n');
        out
    }
}

/// Mean and sample standard deviation of every metric across runs.
pub fn compare_runs(stats: &[ReturnStats]) -> Result<RunSummary> {
    if stats.len() < 2 {
        return Err(Error::NotEnoughRuns {
            needed: 2,
            got: stats.len(),
        });
    }
    let per_run: Vec<Vec<(String, f64)>> = stats.iter().map(ReturnStats::metrics).collect();
    let names: Vec<String> = per_run[0].iter().map(|(k, _)| k.clone()).collect();
    let n = stats.len() as f64;
    let metrics = names
        .into_iter()
        .map(|name| {
            let xs: Vec<f64> = per_run
                .iter()
                .map(|m| m.iter().find(|(k, _)| *k == name).map_or(0.0, |&(_, v)| v))
                .collect();
            let mean = pairwise_sum(&xs) / n;
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            MetricSummary {
                name,
                mean,
                std: (pairwise_sum(&dev) / (n - 1.0)).sqrt(),
            }
        })
        .collect();
    Ok(RunSummary {
        runs: stats.len(),
        metrics,
    })
}
