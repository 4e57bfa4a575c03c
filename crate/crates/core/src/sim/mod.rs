//! Discrete-time simulation: scenarios, the tick engine, event logs and the
//! Monte Carlo experiment runners.

mod engine;
mod experiments;
pub mod log;
mod scenario;

pub use engine::Engine;
pub use experiments::{sweep_csv, sweep_envelope, wilson_interval, SweepRow, SWEEP_HEADER};
pub use log::{EventLog, LogError, Record};
pub use scenario::{
    corridor_waypoints, AircraftConfig, AircraftSetup, ConvergingConfig, CorridorConfig, Issue, MissionConfig,
    MonitoringConfig, Prepared, RingConfig, Scenario, ScenarioError, TrialOverrides, WaypointConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::AircraftId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("simulation failed: {0}")]
    Runtime(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub aircraft: AircraftId,
    pub t: Option<f64>,
}

/// Outcome of one run. `success` holds exactly when no two physical
/// envelopes (bounding spheres) overlapped at any tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub success: bool,
    /// Smallest center distance between any two aircraft; absent with fewer than two.
    pub min_separation_m: Option<f64>,
    /// The same distance divided by the pair's summed physical radii.
    pub min_separation_ratio: Option<f64>,
    pub first_overlap_tick: Option<u64>,
    /// Activations of tiers 1 to 4.
    pub tier_activations: [u64; 4],
    pub completion_times: Vec<Completion>,
    pub ticks: u64,
}

pub fn run_trial(scenario: &Scenario, seed_override: Option<u64>) -> Result<TrialResult, SimError> {
    run_with(scenario, TrialOverrides { seed: seed_override, ..Default::default() })
}

pub fn run_with(scenario: &Scenario, overrides: TrialOverrides) -> Result<TrialResult, SimError> {
    Engine::new(scenario, overrides, false)?.run().map(|(r, _)| r)
}

/// Runs the scenario and returns the full event log, ending with the result record.
pub fn run_logged(scenario: &Scenario, overrides: TrialOverrides) -> Result<(TrialResult, EventLog), SimError> {
    let (r, log) = Engine::new(scenario, overrides, true)?.run()?;
    Ok((r, log.expect("recording engine keeps a log")))
}

/// Overlap verdict recomputed from the state records of a log alone.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapScan {
    pub success: bool,
    pub min_separation_m: Option<f64>,
    pub first_overlap_tick: Option<u64>,
}

pub fn scan_overlaps(log: &EventLog) -> OverlapScan {
    let mut radius = std::collections::BTreeMap::new();
    for r in log.records() {
        if let Record::Layout { aircraft, .. } = r {
            radius.extend(aircraft.iter().map(|a| (a.id, a.r_phys)));
        }
    }
    let mut by_tick: std::collections::BTreeMap<u64, Vec<(AircraftId, [f64; 3])>> = Default::default();
    for r in log.records() {
        if let Record::State { tick, aircraft, position, .. } = r {
            by_tick.entry(*tick).or_default().push((*aircraft, *position));
        }
    }
    let mut scan = OverlapScan { success: true, min_separation_m: None, first_overlap_tick: None };
    for (tick, states) in by_tick {
        for (i, (a, pa)) in states.iter().enumerate() {
            for (b, pb) in &states[i + 1..] {
                let d = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt();
                scan.min_separation_m = Some(scan.min_separation_m.map_or(d, |m: f64| m.min(d)));
                let reach = radius.get(a).copied().unwrap_or(0.0) + radius.get(b).copied().unwrap_or(0.0);
                if d <= reach && scan.success {
                    scan.success = false;
                    scan.first_overlap_tick = Some(tick);
                }
            }
        }
    }
    scan
}
