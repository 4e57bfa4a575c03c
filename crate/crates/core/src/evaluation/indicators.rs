use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::envelope::AircraftId;
use crate::grid::CellIndex;
use crate::sim::{EventLog, Record};

use super::EvalError;

/// Min-max bounds applied to each raw aggregate before clamping to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationBounds {
    pub corridor_utilization: [f64; 2],
    pub intersection_load: [f64; 2],
    pub speed_conformity: [f64; 2],
    /// Mean acceleration magnitude, m/s².
    pub control_effort_mps2: [f64; 2],
    pub violations_per_aircraft_hour: [f64; 2],
    pub min_separation_ratio: [f64; 2],
    /// Anomalies per aircraft-tick.
    pub anomaly_rate: [f64; 2],
}

impl Default for NormalizationBounds {
    fn default() -> Self {
        Self {
            corridor_utilization: [0.0, 1.0],
            intersection_load: [0.0, 1.0],
            speed_conformity: [0.0, 1.0],
            control_effort_mps2: [0.0, 5.0],
            violations_per_aircraft_hour: [0.0, 3600.0],
            min_separation_ratio: [1.0, 10.0],
            anomaly_rate: [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub raw: f64,
    /// Normalized score, oriented so that larger is better.
    pub value: f64,
    pub bounds: [f64; 2],
    pub higher_is_better: bool,
}

impl Indicator {
    fn new(name: &str, raw: f64, bounds: [f64; 2], higher_is_better: bool) -> Self {
        let [lo, hi] = bounds;
        let x = if hi > lo { ((raw - lo) / (hi - lo)).clamp(0.0, 1.0) } else { f64::from(u8::from(raw >= hi)) };
        Self { name: name.into(), raw, value: if higher_is_better { x } else { 1.0 - x }, bounds, higher_is_better }
    }
}

/// Leaf indicators in three groups; group and leaf order match the weight matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub airspace_structure: Vec<Indicator>,
    pub aircraft_performance: Vec<Indicator>,
    pub operational_safety: Vec<Indicator>,
}

impl IndicatorSet {
    pub fn groups(&self) -> [&[Indicator]; 3] {
        [&self.airspace_structure, &self.aircraft_performance, &self.operational_safety]
    }

    pub fn get(&self, name: &str) -> Option<&Indicator> {
        self.groups().into_iter().flatten().find(|i| i.name == name)
    }
}

/// Aircraft, position and cell of one state record.
type Sample = (AircraftId, [f64; 3], Option<CellIndex>);

/// Aggregates a finished event log into normalized indicators.
pub fn build_indicators(log: &EventLog, bounds: &NormalizationBounds) -> Result<IndicatorSet, EvalError> {
    let dt = log.dt().ok_or(EvalError::EmptyLog)?;
    let mut corridor_cells = BTreeSet::new();
    let mut intersection_cells = BTreeSet::new();
    let mut radius: BTreeMap<AircraftId, f64> = BTreeMap::new();
    let mut ticks: BTreeMap<u64, Vec<Sample>> = BTreeMap::new();
    let mut velocities: BTreeMap<AircraftId, Vec<[f64; 3]>> = BTreeMap::new();
    let (mut conform_sum, mut conform_n) = (0.0, 0usize);
    let (mut violations, mut anomalies) = (0usize, 0usize);

    for r in log.records() {
        match r {
            Record::Layout { corridor_cells: c, intersection_cells: i, aircraft, .. } => {
                corridor_cells.extend(c.iter().copied());
                intersection_cells.extend(i.iter().copied());
                radius.extend(aircraft.iter().map(|a| (a.id, a.r_phys)));
            }
            Record::State { tick, aircraft, position, velocity, cell, reference_speed, .. } => {
                ticks.entry(*tick).or_default().push((*aircraft, *position, *cell));
                velocities.entry(*aircraft).or_default().push(*velocity);
                if let Some(v_ref) = reference_speed.filter(|v| *v > 0.0) {
                    let speed = velocity.iter().map(|x| x * x).sum::<f64>().sqrt();
                    conform_sum += (1.0 - (speed - v_ref).abs() / v_ref).max(0.0);
                    conform_n += 1;
                }
            }
            Record::Violation { violation, .. } => violations += violation.aircraft.len().max(1),
            Record::Anomaly(_) => anomalies += 1,
            _ => {}
        }
    }
    let aircraft_ticks: usize = ticks.values().map(Vec::len).sum();
    if aircraft_ticks == 0 {
        return Err(EvalError::EmptyLog);
    }
    let n_ticks = ticks.len() as f64;

    let occupancy = |cells: &BTreeSet<CellIndex>| -> f64 {
        if cells.is_empty() {
            return 0.0;
        }
        let occupied: usize = ticks
            .values()
            .map(|states| states.iter().filter_map(|s| s.2).filter(|c| cells.contains(c)).collect::<BTreeSet<_>>().len())
            .sum();
        occupied as f64 / (cells.len() as f64 * n_ticks)
    };

    let mut effort_sum = 0.0;
    let mut effort_n = 0usize;
    for vs in velocities.values() {
        for w in vs.windows(2) {
            let dv = (0..3).map(|k| (w[1][k] - w[0][k]).powi(2)).sum::<f64>().sqrt();
            effort_sum += dv / dt;
            effort_n += 1;
        }
    }

    let mut min_ratio: Option<f64> = None;
    for states in ticks.values() {
        for (i, (a, pa, _)) in states.iter().enumerate() {
            for (b, pb, _) in &states[i + 1..] {
                let d = (0..3).map(|k| (pa[k] - pb[k]).powi(2)).sum::<f64>().sqrt();
                let reach = radius.get(a).copied().unwrap_or(0.0) + radius.get(b).copied().unwrap_or(0.0);
                if reach > 0.0 {
                    min_ratio = Some(min_ratio.map_or(d / reach, |m| m.min(d / reach)));
                }
            }
        }
    }

    let b = bounds;
    Ok(IndicatorSet {
        airspace_structure: vec![
            Indicator::new("corridor_utilization", occupancy(&corridor_cells), b.corridor_utilization, true),
            Indicator::new("intersection_load", occupancy(&intersection_cells), b.intersection_load, false),
        ],
        aircraft_performance: vec![
            Indicator::new(
                "speed_conformity",
                if conform_n > 0 { conform_sum / conform_n as f64 } else { 1.0 },
                b.speed_conformity,
                true,
            ),
            Indicator::new(
                "control_effort",
                if effort_n > 0 { effort_sum / effort_n as f64 } else { 0.0 },
                b.control_effort_mps2,
                false,
            ),
        ],
        operational_safety: vec![
            Indicator::new(
                "violations_per_aircraft_hour",
                violations as f64 * 3600.0 / (aircraft_ticks as f64 * dt),
                b.violations_per_aircraft_hour,
                false,
            ),
            Indicator::new(
                "min_separation_ratio",
                min_ratio.unwrap_or(b.min_separation_ratio[1]),
                b.min_separation_ratio,
                true,
            ),
            Indicator::new("anomaly_rate", anomalies as f64 / aircraft_ticks as f64, b.anomaly_rate, false),
        ],
    })
}
