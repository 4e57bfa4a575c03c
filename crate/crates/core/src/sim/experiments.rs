use std::fmt::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_with, Scenario, SimError, TrialOverrides};

pub const SWEEP_HEADER: &str = "margin_m,count,trials,successes,probability,wilson_low,wilson_high,mean_min_separation_m";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub margin_m: f64,
    pub count: usize,
    pub trials: usize,
    pub successes: usize,
    pub probability: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub mean_min_separation_m: Option<f64>,
}

impl SweepRow {
    pub fn wilson_mid(&self) -> f64 {
        0.5 * (self.wilson_low + self.wilson_high)
    }
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Avoidance probability over a margin × count grid. Trial `k` of cell `c`
/// runs with seed `seed + c·trials + k`; trials execute in parallel and are
/// aggregated by index.
pub fn sweep_envelope(
    scenario: &Scenario,
    margins: &[f64],
    counts: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, SimError> {
    if trials == 0 {
        return Err(SimError::Runtime("trials per cell must be at least 1".into()));
    }
    let cells: Vec<(f64, usize)> = margins.iter().flat_map(|m| counts.iter().map(move |c| (*m, *c))).collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..trials).map(move |k| (c, k))).collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let (margin, count) = cells[c];
            let overrides = TrialOverrides {
                seed: Some(seed.wrapping_add((c * trials + k) as u64)),
                count: Some(count),
                safety_margin_m: Some(margin),
            };
            run_with(scenario, overrides)
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    for (c, &(margin_m, count)) in cells.iter().enumerate() {
        let mut successes = 0;
        let mut separations = Vec::new();
        for r in &outcomes[c * trials..(c + 1) * trials] {
            let r = r.as_ref().map_err(|e| SimError::Runtime(e.to_string()))?;
            successes += usize::from(r.success);
            separations.extend(r.min_separation_m);
        }
        let (wilson_low, wilson_high) = wilson_interval(successes, trials);
        rows.push(SweepRow {
            margin_m,
            count,
            trials,
            successes,
            probability: successes as f64 / trials as f64,
            wilson_low,
            wilson_high,
            mean_min_separation_m: (!separations.is_empty())
                .then(|| separations.iter().sum::<f64>() / separations.len() as f64),
        });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let sep = r.mean_min_separation_m.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.margin_m, r.count, r.trials, r.successes, r.probability, r.wilson_low, r.wilson_high, sep
        )
        .expect("writing to a string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // Closed form for 0 of n: upper bound z²/(n + z²).
        let z2 = 1.959_963_984_540_054_f64.powi(2);
        let (lo, hi) = wilson_interval(0, 20);
        assert_eq!(lo, 0.0);
        assert!((hi - z2 / (20.0 + z2)).abs() < 1e-12);
        let (lo, hi) = wilson_interval(20, 20);
        assert!((lo - 20.0 / (20.0 + z2)).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert!((hi - 0.596_168).abs() < 1e-5);
    }
}
