//! Regret traces, CSV serialization, and cross-seed aggregation.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Per-run regret record: one entry per round (bandits) or episode (MDPs).
/// Cumulative values are exact prefix sums of the instantaneous ones.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub seed: u64,
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Per-episode counts of `Q^2 < Q_*` entries (invariant-checked MDP runs).
    pub optimism_violations: Option<Vec<u64>>,
    /// Per-episode counts of `Q^1 < max_b Q^2` entries (same runs).
    pub dominance_violations: Option<Vec<u64>>,
    /// Total entries that ever increased across episodes (exact comparison).
    pub q2_monotonicity_violations: Option<u64>,
    /// Resolved configuration this trace was produced from.
    pub config: Value,
    /// Optional Q-table snapshots (MDP runs with a snapshot cadence set).
    pub snapshots: Vec<QSnapshot>,
}

/// Q tables after a given episode's updates, flattened row-major per step
/// index `h`.
#[derive(Debug, Clone, Serialize)]
pub struct QSnapshot {
    pub episode: u64,
    pub q1: Vec<Vec<f64>>,
    pub q2: Vec<Vec<f64>>,
}

impl RegretTrace {
    pub(crate) fn new(seed: u64, config: Value, with_violation_counters: bool) -> Self {
        Self {
            seed,
            instantaneous: Vec::new(),
            cumulative: Vec::new(),
            optimism_violations: with_violation_counters.then(Vec::new),
            dominance_violations: with_violation_counters.then(Vec::new),
            q2_monotonicity_violations: with_violation_counters.then_some(0),
            config,
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, instantaneous: f64) {
        let cum = self.cumulative.last().copied().unwrap_or(0.0) + instantaneous;
        self.instantaneous.push(instantaneous);
        self.cumulative.push(cum);
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Cumulative regret after `t` rounds (1-based).
    pub fn cumulative_at(&self, t: u64) -> f64 {
        assert!(t >= 1 && (t as usize) <= self.len(), "t out of range");
        self.cumulative[t as usize - 1]
    }

    pub fn total_optimism_violations(&self) -> u64 {
        self.optimism_violations.as_ref().map_or(0, |v| v.iter().sum())
    }

    pub fn total_dominance_violations(&self) -> u64 {
        self.dominance_violations.as_ref().map_or(0, |v| v.iter().sum())
    }

    /// CSV with header `t,instantaneous_regret,cumulative_regret` plus the
    /// violation columns when the run checked invariants.
    pub fn to_csv(&self) -> String {
        let with_violations =
            self.optimism_violations.is_some() && self.dominance_violations.is_some();
        let mut out = String::new();
        if with_violations {
            out.push_str("t,instantaneous_regret,cumulative_regret,optimism_violations,dominance_violations\n");
        } else {
            out.push_str("t,instantaneous_regret,cumulative_regret\n");
        }
        for i in 0..self.len() {
            if with_violations {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    i + 1,
                    self.instantaneous[i],
                    self.cumulative[i],
                    self.optimism_violations.as_ref().unwrap()[i],
                    self.dominance_violations.as_ref().unwrap()[i],
                ));
            } else {
                out.push_str(&format!(
                    "{},{},{}\n",
                    i + 1,
                    self.instantaneous[i],
                    self.cumulative[i],
                ));
            }
        }
        out
    }
}

/// Cross-seed statistics of cumulative regret at one checkpoint.
#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    pub mean: f64,
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFinal {
    pub seed: u64,
    pub cumulative_regret: f64,
}

/// Aggregated view over equal-length traces.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: Value,
    pub checkpoints: Vec<Checkpoint>,
    /// Least-squares slope of `log(mean cumulative regret)` against `log t`
    /// over the last half-decade of `t`; `null` when undefined (e.g. zero
    /// regret throughout).
    pub exponent: Option<f64>,
    pub per_seed_final: Vec<SeedFinal>,
}

/// Mean cumulative-regret curve across traces (all must share a length).
pub fn mean_cumulative(traces: &[RegretTrace]) -> Result<Vec<f64>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Aggregation("no traces to aggregate".into()))?;
    let len = first.len();
    if traces.iter().any(|tr| tr.len() != len) {
        return Err(Error::Aggregation(
            "traces have differing lengths; aggregate equal-T runs only".into(),
        ));
    }
    let mut mean = vec![0.0; len];
    for tr in traces {
        for (m, &c) in mean.iter_mut().zip(&tr.cumulative) {
            *m += c;
        }
    }
    let n = traces.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}

/// Fitted growth exponent of a cumulative-regret curve over `t` in
/// `[t_lo, t_hi]` (1-based, inclusive): the least-squares slope of
/// `ln curve[t]` against `ln t`, skipping nonpositive values. `None` when
/// fewer than two usable points remain.
pub fn growth_exponent(curve: &[f64], t_lo: u64, t_hi: u64) -> Option<f64> {
    let t_hi = t_hi.min(curve.len() as u64);
    if t_lo < 1 || t_lo >= t_hi {
        return None;
    }
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for t in t_lo..=t_hi {
        let y = curve[t as usize - 1];
        if y <= 0.0 {
            continue;
        }
        let (lx, ly) = ((t as f64).ln(), y.ln());
        n += 1.0;
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    if n < 2.0 {
        return None;
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Checkpoint grid: powers of two up to `t_max`, plus `t_max` itself.
pub fn checkpoint_times(t_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 1u64;
    while t <= t_max {
        out.push(t);
        match t.checked_mul(2) {
            Some(next) => t = next,
            None => break,
        }
    }
    if out.last() != Some(&t_max) && t_max >= 1 {
        out.push(t_max);
    }
    out
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    // Linear interpolation between closest ranks.
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Aggregates equal-length traces into checkpoint statistics and a growth
/// exponent fitted over the last half-decade of `t`.
pub fn aggregate(traces: &[RegretTrace]) -> Result<Summary> {
    let mean = mean_cumulative(traces)?;
    let t_max = mean.len() as u64;
    let mut checkpoints = Vec::new();
    for t in checkpoint_times(t_max) {
        let mut values: Vec<f64> = traces.iter().map(|tr| tr.cumulative_at(t)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("regret values are finite"));
        let mean_v = values.iter().sum::<f64>() / values.len() as f64;
        checkpoints.push(Checkpoint {
            t,
            mean: mean_v,
            median: quantile(&values, 0.5),
            iqr: quantile(&values, 0.75) - quantile(&values, 0.25),
        });
    }
    // Last half-decade: early rounds are bonus-dominated transients.
    let t_lo = ((t_max as f64 / 10.0f64.sqrt()).ceil() as u64).max(1);
    let exponent = growth_exponent(&mean, t_lo, t_max);
    Ok(Summary {
        config: traces[0].config.clone(),
        checkpoints,
        exponent,
        per_seed_final: traces
            .iter()
            .map(|tr| SeedFinal {
                seed: tr.seed,
                cumulative_regret: tr.final_cumulative(),
            })
            .collect(),
    })
}
