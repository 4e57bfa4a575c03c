//! Conflict prediction, the conflict matrix and the four-tier avoidance
//! hierarchy: individual maneuvers, cluster coordination, corridor switching
//! and global planning.

mod plan;
mod probability;
mod switch;
mod tiers;

pub use plan::{double_bookings, tier4_plan, AircraftPlan, CostBreakdown, GlobalPlan, Mission, TimedWaypoint};
pub use probability::{estimate_collision_probability, Trajectory};
pub use switch::{find_deadlocks, tier3_switch, wait_for_graph, SwitchTrigger};
pub use tiers::{tier1_maneuver, tier2_coordinate, ManeuverContext, Tier1Branch, Tier1Outcome, Tier2Outcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{breach_time, closest_approach, AircraftId, AircraftState, ClassLimits};
use crate::geometry::{heading_of, rotate_horizontal, wrap_pi, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AvoidanceError {
    #[error("no bounded maneuver clears the conflict for aircraft {0}")]
    NoFeasibleManeuver(AircraftId),
    #[error("cluster coordination did not converge in {iterations} iterations (max severity {max_severity:.3})")]
    NonConvergence { iterations: usize, max_severity: f64 },
    #[error("aircraft {0} has no conflict-free plan within the delay budget")]
    Unplannable(AircraftId),
    #[error("trajectories are not time-aligned")]
    MisalignedTrajectories,
    #[error("invalid avoidance input: {0}")]
    InvalidInput(String),
}

/// Every avoidance threshold and weight in one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AvoidanceConfig {
    /// Tiers 1 to 4 on/off.
    pub tiers: [bool; 4],
    pub horizon_s: f64,
    pub alert_factor: f64,
    pub cluster_threshold: f64,
    pub switch_threshold: f64,
    /// Angle, altitude and speed weights of the conflict matrix.
    pub matrix_weights: [f64; 3],
    pub h0_m: f64,
    pub v0_mps: f64,
    pub tier2_max_iters: usize,
    /// Per-iteration repulsion step of tier 2 at severity 1.
    pub tier2_step_mps: f64,
    /// Largest heading offset tier 1 may target.
    pub max_heading_offset_rad: f64,
    /// Half-widths of the channel reserved around each aircraft's timed plan.
    /// The outer envelope must stay inside it, so a larger safety margin leaves
    /// less room to maneuver.
    pub lateral_budget_m: f64,
    pub vertical_budget_m: f64,
    /// Time, collision probability, relative velocity, inverse separation and
    /// transfer weights of the global planner.
    pub tier4_weights: [f64; 5],
    pub delay_step_s: f64,
    pub max_delay_steps: u32,
    /// Occupancy-table time resolution of the global planner.
    pub plan_tick_s: f64,
    /// Position uncertainty used by the planner's collision probability term.
    pub plan_sigma_m: f64,
    pub plan_samples: usize,
    pub transfer_penalty_s: f64,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self {
            tiers: [true; 4],
            horizon_s: 20.0,
            alert_factor: 2.0,
            cluster_threshold: 0.2,
            switch_threshold: 0.8,
            matrix_weights: [0.4, 0.3, 0.3],
            h0_m: 50.0,
            v0_mps: 10.0,
            tier2_max_iters: 50,
            tier2_step_mps: 1.0,
            max_heading_offset_rad: std::f64::consts::FRAC_PI_2,
            lateral_budget_m: 40.0,
            vertical_budget_m: 15.0,
            tier4_weights: [1.0, 100.0, 1.0, 10.0, 2.0],
            delay_step_s: 5.0,
            max_delay_steps: 24,
            plan_tick_s: 1.0,
            plan_sigma_m: 5.0,
            plan_samples: 256,
            transfer_penalty_s: 5.0,
        }
    }
}

impl AvoidanceConfig {
    pub fn disabled() -> Self {
        Self { tiers: [false; 4], ..Self::default() }
    }

    pub fn tier_enabled(&self, tier: u8) -> bool {
        (1..=4).contains(&tier) && self.tiers[usize::from(tier - 1)]
    }

    pub fn validate(&self) -> Result<(), AvoidanceError> {
        let bad = |m: &str| Err(AvoidanceError::InvalidInput(m.into()));
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.horizon_s) || !pos(self.alert_factor) || !pos(self.h0_m) || !pos(self.v0_mps) {
            return bad("horizon, alert factor, H0 and V0 must be positive");
        }
        if !(0.0..=1.0).contains(&self.cluster_threshold) || !(0.0..=1.0).contains(&self.switch_threshold) {
            return bad("severity thresholds must lie in [0, 1]");
        }
        if self.matrix_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (self.matrix_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("matrix weights must be non-negative and sum to 1");
        }
        if self.tier4_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("planner weights must be non-negative");
        }
        if !pos(self.delay_step_s) || !pos(self.plan_tick_s) || self.plan_samples == 0 {
            return bad("delay step, plan tick and sample count must be positive");
        }
        if [self.lateral_budget_m, self.vertical_budget_m, self.tier2_step_mps, self.max_heading_offset_rad, self.plan_sigma_m]
            .iter()
            .any(|x| !(x.is_finite() && *x >= 0.0))
        {
            return bad("budgets, steps and sigma must be non-negative");
        }
        if !(self.transfer_penalty_s.is_finite() && self.transfer_penalty_s >= 0.0) {
            return bad("transfer penalty must be non-negative");
        }
        Ok(())
    }
}

/// Predicted pairwise conflict, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub a: AircraftId,
    pub b: AircraftId,
    pub t_cpa: f64,
    pub d_cpa: f64,
    pub t_breach: Option<f64>,
    pub severity: f64,
}

impl ConflictRecord {
    pub fn involves(&self, id: AircraftId) -> bool {
        self.a == id || self.b == id
    }

    pub fn other(&self, id: AircraftId) -> AircraftId {
        if self.a == id {
            self.b
        } else {
            self.a
        }
    }
}

/// `clamp(1 − d/(alert·R)) · clamp(1 − t/H)`.
pub fn severity(d_cpa: f64, t_cpa: f64, combined_outer: f64, alert_factor: f64, horizon_s: f64) -> f64 {
    (1.0 - d_cpa / (alert_factor * combined_outer)).clamp(0.0, 1.0) * (1.0 - t_cpa / horizon_s).clamp(0.0, 1.0)
}

/// Conflict between two aircraft, if the CPA falls inside the alert radius.
pub fn pair_conflict(a: &AircraftState, b: &AircraftState, horizon_s: f64, alert_factor: f64) -> Option<ConflictRecord> {
    let (a, b) = if a.id <= b.id { (a, b) } else { (b, a) };
    let dp = b.position - a.position;
    let dv = b.velocity - a.velocity;
    let r = a.envelope.r_outer() + b.envelope.r_outer();
    let cpa = closest_approach(&dp, &dv, horizon_s);
    (cpa.d_cpa < alert_factor * r).then(|| ConflictRecord {
        a: a.id,
        b: b.id,
        t_cpa: cpa.t_cpa,
        d_cpa: cpa.d_cpa,
        t_breach: breach_time(&dp, &dv, r, horizon_s),
        severity: severity(cpa.d_cpa, cpa.t_cpa, r, alert_factor, horizon_s),
    })
}

/// All pairwise conflicts, ordered by id pair.
pub fn predict_conflicts(states: &[AircraftState], horizon_s: f64, alert_factor: f64) -> Vec<ConflictRecord> {
    let mut sorted: Vec<&AircraftState> = states.iter().collect();
    sorted.sort_by_key(|s| s.id);
    let mut out = Vec::new();
    for (n, a) in sorted.iter().enumerate() {
        for b in &sorted[n + 1..] {
            out.extend(pair_conflict(a, b, horizon_s, alert_factor));
        }
    }
    out
}

/// Symmetric severity matrix over aircraft sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConflictMatrix {
    pub ids: Vec<AircraftId>,
    pub entries: Vec<Vec<f64>>,
}

impl ConflictMatrix {
    pub fn get(&self, a: AircraftId, b: AircraftId) -> f64 {
        match (self.ids.binary_search(&a), self.ids.binary_search(&b)) {
            (Ok(i), Ok(j)) => self.entries[i][j],
            _ => 0.0,
        }
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Angle/altitude/speed similarity weight of a pair.
pub fn pair_weight(a: &AircraftState, b: &AircraftState, cfg: &AvoidanceConfig) -> f64 {
    let [wa, wh, wv] = cfg.matrix_weights;
    let dpsi = wrap_pi(a.heading - b.heading).abs();
    let dz = (a.position.z - b.position.z).abs();
    let ds = (a.speed() - b.speed()).abs();
    wa * (1.0 - dpsi / std::f64::consts::PI) + wh * (-dz / cfg.h0_m).exp() + wv * (-ds / cfg.v0_mps).exp()
}

pub fn conflict_matrix(states: &[AircraftState], cfg: &AvoidanceConfig) -> ConflictMatrix {
    let mut sorted: Vec<&AircraftState> = states.iter().collect();
    sorted.sort_by_key(|s| s.id);
    let n = sorted.len();
    let mut entries = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            if let Some(r) = pair_conflict(sorted[i], sorted[j], cfg.horizon_s, cfg.alert_factor) {
                let e = (r.severity * pair_weight(sorted[i], sorted[j], cfg)).clamp(0.0, 1.0);
                entries[i][j] = e;
                entries[j][i] = e;
            }
        }
    }
    ConflictMatrix { ids: sorted.iter().map(|s| s.id).collect(), entries }
}

/// Per-tick avoidance action. Positive heading change is a right
/// (clockwise) turn; speed change acts on horizontal speed; altitude change
/// is the height gained over one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Maneuver {
    HeadingChange(f64),
    SpeedChange(f64),
    AltitudeChange(f64),
    Composite(Vec<Maneuver>),
}

impl Maneuver {
    /// Clamps every component to the per-tick limits of `limits`.
    pub fn clamped(&self, limits: &ClassLimits, dt: f64) -> Maneuver {
        let clamp = |x: f64, m: f64| x.clamp(-m.abs(), m.abs());
        match self {
            Maneuver::HeadingChange(x) => Maneuver::HeadingChange(clamp(*x, limits.max_turn_rate_rps * dt)),
            Maneuver::SpeedChange(x) => Maneuver::SpeedChange(clamp(*x, limits.max_accel_mps2 * dt)),
            Maneuver::AltitudeChange(x) => Maneuver::AltitudeChange(clamp(*x, limits.max_climb_rate_mps * dt)),
            Maneuver::Composite(v) => Maneuver::Composite(v.iter().map(|m| m.clamped(limits, dt)).collect()),
        }
    }

    pub fn within_limits(&self, limits: &ClassLimits, dt: f64) -> bool {
        let ok = |x: f64, m: f64| x.abs() <= m.abs() * dt * (1.0 + 1e-12) + 1e-15;
        match self {
            Maneuver::HeadingChange(x) => ok(*x, limits.max_turn_rate_rps),
            Maneuver::SpeedChange(x) => ok(*x, limits.max_accel_mps2),
            Maneuver::AltitudeChange(x) => ok(*x, limits.max_climb_rate_mps),
            Maneuver::Composite(v) => v.iter().all(|m| m.within_limits(limits, dt)),
        }
    }

    /// Velocity after applying the maneuver for one tick of length `dt`.
    pub fn apply(&self, v: &Vec3, dt: f64) -> Vec3 {
        match self {
            Maneuver::HeadingChange(x) => rotate_horizontal(v, -x),
            Maneuver::SpeedChange(x) => {
                let h = v.xy().norm();
                let target = (h + x).max(0.0);
                if h > 1e-12 {
                    Vec3::new(v.x * target / h, v.y * target / h, v.z)
                } else {
                    *v
                }
            }
            Maneuver::AltitudeChange(x) => Vec3::new(v.x, v.y, x / dt),
            Maneuver::Composite(ms) => ms.iter().fold(*v, |acc, m| m.apply(&acc, dt)),
        }
    }

    /// The per-tick maneuver moving velocity `v` toward `target`, clamped to
    /// `limits`. Speed change is taken before the turn.
    pub fn toward(v: &Vec3, target: &Vec3, limits: &ClassLimits, dt: f64) -> Maneuver {
        let mut parts = Vec::new();
        let (h0, h1) = (v.xy().norm(), target.xy().norm());
        if (h1 - h0).abs() > 1e-12 {
            parts.push(Maneuver::SpeedChange(h1 - h0));
        }
        if h0 > 1e-9 && h1 > 1e-9 {
            let right = -wrap_pi(heading_of(target) - heading_of(v));
            if right.abs() > 1e-12 {
                parts.push(Maneuver::HeadingChange(right));
            }
        }
        if (target.z - v.z).abs() > 1e-12 || v.z != 0.0 {
            parts.push(Maneuver::AltitudeChange(target.z * dt));
        }
        Maneuver::Composite(parts).clamped(limits, dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{AircraftClass, DualEnvelope};

    pub(crate) fn craft(id: u32, p: [f64; 3], v: [f64; 3], r: f64, margin: f64) -> AircraftState {
        AircraftState::new(
            AircraftId(id),
            AircraftClass::RotaryWing,
            Vec3::from(p),
            Vec3::from(v),
            DualEnvelope::sphere(r, margin).unwrap(),
        )
    }

    #[test]
    fn diverging_pair_is_quiet() {
        let s = [craft(1, [0.0, 0.0, 100.0], [-10.0, 0.0, 0.0], 2.0, 3.0), craft(2, [50.0, 0.0, 100.0], [10.0, 0.0, 0.0], 2.0, 3.0)];
        assert!(predict_conflicts(&s, 20.0, 2.0).is_empty());
        let m = conflict_matrix(&s, &AvoidanceConfig::default());
        assert_eq!(m.max_entry(), 0.0);
    }

    #[test]
    fn colocation_severity_near_one() {
        let s = [craft(1, [0.0, 0.0, 100.0], [1.0, 0.0, 0.0], 2.0, 3.0), craft(2, [1e-6, 0.0, 100.0], [-1.0, 0.0, 0.0], 2.0, 3.0)];
        let r = predict_conflicts(&s, 20.0, 2.0);
        assert_eq!(r.len(), 1);
        assert!(r[0].severity > 0.999);
    }

    #[test]
    fn three_converging() {
        let s = [
            craft(1, [-100.0, 0.0, 100.0], [10.0, 0.0, 0.0], 2.0, 3.0),
            craft(2, [100.0, 0.0, 100.0], [-10.0, 0.0, 0.0], 2.0, 3.0),
            craft(3, [0.0, 100.0, 100.0], [0.0, -10.0, 0.0], 2.0, 3.0),
        ];
        let r = predict_conflicts(&s, 20.0, 2.0);
        assert_eq!(r.len(), 3);
        assert_eq!((r[0].a, r[0].b), (AircraftId(1), AircraftId(2)));
    }

    #[test]
    fn matrix_for_parallel_collision_course() {
        // Same heading, altitude and speed, one about to catch the other: the
        // similarity weight is exactly 1.
        let s = [craft(1, [0.0, 0.0, 100.0], [10.0, 0.0, 0.0], 2.0, 3.0), craft(2, [0.5, 0.0, 100.0], [10.0, 0.0, 0.0], 2.0, 3.0)];
        let cfg = AvoidanceConfig::default();
        assert!((pair_weight(&s[0], &s[1], &cfg) - 1.0).abs() < 1e-12);
        let m = conflict_matrix(&s, &cfg);
        let expected = 1.0 - 0.5 / 20.0;
        assert!((m.get(AircraftId(1), AircraftId(2)) - expected).abs() < 1e-12);
        assert_eq!(m.entries[0][0], 0.0);
        assert_eq!(m.entries[0][1], m.entries[1][0]);
    }

    #[test]
    fn maneuver_application() {
        let v = Vec3::new(10.0, 0.0, 0.0);
        let turned = Maneuver::HeadingChange(std::f64::consts::FRAC_PI_2).apply(&v, 0.1);
        assert!((turned - Vec3::new(0.0, -10.0, 0.0)).norm() < 1e-12, "right turn from east heads south");
        let lim = AircraftClass::RotaryWing.default_limits();
        let m = Maneuver::toward(&v, &Vec3::new(0.0, 10.0, 2.0), &lim, 0.1);
        assert!(m.within_limits(&lim, 0.1));
        let next = m.apply(&v, 0.1);
        assert!(next.y > 0.0 && next.z > 0.0);
    }
}
