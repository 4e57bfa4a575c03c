use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::avoidance::{tier4_plan, AvoidanceConfig, Mission};
use crate::corridor::{
    build_corridor, build_high_speed_ring, expand_waypoints, find_intersections, route, Corridor, CorridorGraph,
    CorridorId, CorridorKind, Intersection, RouteWeights,
};
use crate::envelope::{AircraftClass, AircraftId, ClassLimits, DualEnvelope, EnvelopeShape};
use crate::geometry::{Point3, Vec3};
use crate::grid::{CellIndex, Cylinder, GridSpec, Zone, ZoneSet};
use crate::link::{default_modes, AnomalyThresholds, LinkMode, ModeTable, Station, TrackerConfig};
use crate::rules::RuleParams;

fn default_dt() -> f64 {
    0.1
}

fn default_duration() -> f64 {
    120.0
}

fn default_true() -> bool {
    true
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    pub id: CorridorId,
    pub kind: CorridorKind,
    pub speed_mps: f64,
    /// Cell waypoints `[layer, i, j, k]`, expanded into a contiguous path.
    pub waypoints: Vec<[u32; 4]>,
    #[serde(default = "default_one")]
    pub width_cells: u32,
    #[serde(default = "default_one")]
    pub height_cells: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub first_id: CorridorId,
    pub center: [f64; 2],
    pub radii: [f64; 4],
    pub band: [f64; 2],
    pub speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaypointConfig {
    pub position: [f64; 3],
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub start: CorridorId,
    pub goal: CorridorId,
    #[serde(default)]
    pub departure_s: f64,
    #[serde(default)]
    pub emergency: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftConfig {
    pub id: AircraftId,
    pub class: AircraftClass,
    /// Overrides the class defaults.
    #[serde(default)]
    pub limits: Option<ClassLimits>,
    pub envelope: EnvelopeShape,
    pub safety_margin_m: f64,
    /// Flight plan with arrival times; exclusive with `mission`.
    #[serde(default)]
    pub waypoints: Vec<WaypointConfig>,
    #[serde(default)]
    pub mission: Option<MissionConfig>,
    /// Corridor the aircraft is assigned to while flying `waypoints`.
    #[serde(default)]
    pub corridor: Option<CorridorId>,
}

/// Aircraft spread evenly on a circle, all crossing `center` at `arrival_s`
/// and leaving through the opposite point at `exit_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergingConfig {
    pub center: [f64; 3],
    pub radius_m: f64,
    pub arrival_s: f64,
    pub exit_s: f64,
    pub count: usize,
    pub class: AircraftClass,
    #[serde(default)]
    pub limits: Option<ClassLimits>,
    pub envelope: EnvelopeShape,
    pub safety_margin_m: f64,
    /// Horizontal Gaussian jitter of start and end waypoints.
    #[serde(default)]
    pub jitter_sigma_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitoringConfig {
    /// With monitoring off, avoidance sees true states.
    pub enabled: bool,
}

impl Default for MonitoringConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub grid: GridSpec,
    #[serde(default)]
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub landing_fields: Vec<Cylinder>,
    #[serde(default)]
    pub corridors: Vec<CorridorConfig>,
    #[serde(default)]
    pub ring: Option<RingConfig>,
    #[serde(default)]
    pub stations: Vec<Station>,
    #[serde(default = "default_modes")]
    pub modes: Vec<LinkMode>,
    #[serde(default)]
    pub monitoring: MonitoringConfig,
    #[serde(default)]
    pub aircraft: Vec<AircraftConfig>,
    #[serde(default)]
    pub converging: Option<ConvergingConfig>,
    #[serde(default)]
    pub rules: RuleParams,
    #[serde(default)]
    pub avoidance: AvoidanceConfig,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub anomaly: AnomalyThresholds,
    #[serde(default = "default_true")]
    pub stop_when_complete: bool,
}

/// One problem found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub issues: Vec<Issue>,
}

impl ScenarioError {
    fn single(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { issues: vec![Issue { field: field.into(), message: message.into() }] }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid scenario")?;
        for i in &self.issues {
            write!(f, "\n  {i}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

/// Per-trial changes applied on top of a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialOverrides {
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub safety_margin_m: Option<f64>,
}

/// Fully resolved aircraft ready for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct AircraftSetup {
    pub id: AircraftId,
    pub class: AircraftClass,
    pub limits: ClassLimits,
    pub envelope: DualEnvelope,
    /// Timed waypoints, times strictly increasing.
    pub waypoints: Vec<(Point3, f64)>,
    pub corridor: Option<CorridorId>,
    /// Remaining corridor sequence for corridor-bound missions.
    pub route: Vec<CorridorId>,
    pub emergency: bool,
}

/// Validated world built from a scenario for one trial.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: GridSpec,
    pub zones: ZoneSet,
    pub graph: CorridorGraph,
    pub intersections: Vec<Intersection>,
    pub modes: Vec<LinkMode>,
    pub stations: Vec<Station>,
    pub aircraft: Vec<AircraftSetup>,
    pub seed: u64,
    pub scenario_sha256: String,
}

/// Seeds of the independent random streams of one trial.
pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const JITTER_STREAM: u64 = 1;
pub(crate) const NOISE_STREAM: u64 = 2;

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| format!("bytes {}..{}", s.start, s.end)).unwrap_or_else(|| "scenario".into());
            ScenarioError::single(field, e.message().to_string())
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::single(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks everything that does not depend on a trial seed.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.prepare(TrialOverrides::default()).map(|_| ())
    }

    pub fn prepare(&self, overrides: TrialOverrides) -> Result<Prepared, ScenarioError> {
        let mut issues = Vec::new();
        macro_rules! issue {
            ($field:expr, $message:expr) => {
                issues.push(Issue { field: $field, message: $message })
            };
        }

        if !(self.dt.is_finite() && self.dt > 0.0) {
            issue!("dt".into(), "must be positive".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            issue!("duration_s".into(), "must be positive".into());
        }
        if let Err(e) = self.rules.validate() {
            issue!("rules".into(), e.to_string());
        }
        if let Err(e) = self.avoidance.validate() {
            issue!("avoidance".into(), e.to_string());
        }
        if let Err(e) = (ModeTable { modes: self.modes.clone() }).validate() {
            issue!("modes".into(), e.to_string());
        }
        for (n, s) in self.stations.iter().enumerate() {
            for m in &s.modes {
                if !self.modes.iter().any(|x| x.name == *m) {
                    issue!(format!("stations[{n}].modes"), format!("mode {m} is not configured"));
                }
            }
        }
        let spec = self.grid.clone();
        let zones = ZoneSet::new(self.zones.clone(), self.landing_fields.clone());
        let zones = match zones {
            Ok(z) => z,
            Err(e) => {
                issue!("zones".into(), e.to_string());
                ZoneSet::default()
            }
        };

        let mut corridors: Vec<Corridor> = Vec::new();
        for (n, c) in self.corridors.iter().enumerate() {
            let cells: Vec<CellIndex> = c.waypoints.iter().map(|w| CellIndex::new(w[0], w[1], w[2], w[3])).collect();
            let built = expand_waypoints(&cells, &spec)
                .map_err(|e| e.to_string())
                .and_then(|path| build_corridor(c.id, path, c.kind, c.speed_mps, &spec, &zones).map_err(|e| e.to_string()));
            match built {
                Ok(k) => corridors.push(k.with_cross_section(c.width_cells, c.height_cells)),
                Err(e) => issue!(format!("corridors[{n}]"), e),
            }
        }
        if let Some(r) = &self.ring {
            let center = Vec3::new(r.center[0], r.center[1], 0.5 * (r.band[0] + r.band[1]));
            match build_high_speed_ring(r.first_id, center, r.radii, r.band, r.speed_mps, &spec, &zones) {
                Ok(b) => {
                    corridors.extend(b.loops);
                    corridors.push(b.emergency);
                }
                Err(e) => issue!("ring".into(), e.to_string()),
            }
        }
        let graph = match CorridorGraph::build(corridors.clone(), &spec) {
            Ok(g) => g,
            Err(e) => {
                issue!("corridors".into(), e.to_string());
                CorridorGraph::build(Vec::new(), &spec).expect("empty graph")
            }
        };
        let intersections = find_intersections(&corridors, &spec);

        let seed = overrides.seed.unwrap_or(self.seed);
        let mut roster: Vec<AircraftConfig> = self.aircraft.clone();
        if let Some(c) = &self.converging {
            match converging_roster(c, overrides.count.unwrap_or(c.count), seed, roster.len()) {
                Ok(extra) => roster.extend(extra),
                Err(m) => issue!("converging".into(), m),
            }
        } else if let Some(n) = overrides.count {
            if n > roster.len() {
                issue!("aircraft".into(), format!("{n} aircraft requested but only {} configured", roster.len()));
            }
            roster.truncate(n);
        }
        if let Some(m) = overrides.safety_margin_m {
            for a in &mut roster {
                a.safety_margin_m = m;
            }
        }

        let mut ids = BTreeSet::new();
        let mut setups = Vec::new();
        let mut missions = Vec::new();
        for (n, a) in roster.iter().enumerate() {
            let field = |f: &str| format!("aircraft[{n}].{f}");
            if !ids.insert(a.id) {
                issue!(field("id"), format!("duplicate aircraft id {}", a.id));
            }
            let envelope = match DualEnvelope::new(a.envelope, a.safety_margin_m) {
                Ok(e) => e,
                Err(e) => {
                    issue!(field("envelope"), e.to_string());
                    continue;
                }
            };
            let limits = a.limits.unwrap_or_else(|| a.class.default_limits());
            if let Some(c) = a.corridor {
                if graph.corridor(c).is_none() {
                    issue!(field("corridor"), format!("unknown corridor {c}"));
                }
            }
            let mut setup = AircraftSetup {
                id: a.id,
                class: a.class,
                limits,
                envelope,
                waypoints: Vec::new(),
                corridor: a.corridor,
                route: Vec::new(),
                emergency: false,
            };
            match (&a.mission, a.waypoints.len()) {
                (Some(_), w) if w > 0 => issue!(field("mission"), "waypoints and mission are exclusive".into()),
                (Some(m), _) => {
                    for (what, id) in [("start", m.start), ("goal", m.goal)] {
                        if graph.corridor(id).is_none() {
                            issue!(field(&format!("mission.{what}")), format!("unknown corridor {id}"));
                        }
                    }
                    setup.emergency = m.emergency;
                    missions.push(Mission {
                        aircraft: a.id,
                        start: m.start,
                        goal: m.goal,
                        departure_s: m.departure_s,
                        emergency: m.emergency,
                        r_phys: envelope.r_phys(),
                    });
                }
                (None, w) if w < 2 => issue!(field("waypoints"), "at least two timed waypoints are required".into()),
                (None, _) => {
                    for (k, w) in a.waypoints.iter().enumerate() {
                        let p = Vec3::new(w.position[0], w.position[1], w.position[2]);
                        if !p.iter().all(|x| x.is_finite()) || !w.t.is_finite() {
                            issue!(field(&format!("waypoints[{k}]")), "non-finite value".into());
                        }
                        if k > 0 && w.t <= a.waypoints[k - 1].t {
                            issue!(field(&format!("waypoints[{k}].t")), "times must be strictly increasing".into());
                        }
                        setup.waypoints.push((p, w.t));
                    }
                }
            }
            setups.push(setup);
        }

        if !missions.is_empty() && issues.is_empty() {
            if self.avoidance.tier_enabled(4) {
                match tier4_plan(&missions, &graph, &spec, &self.avoidance) {
                    Ok(plan) => {
                        for s in &mut setups {
                            if let Some(p) = plan.plan(s.id) {
                                s.waypoints = p.waypoints.iter().map(|w| (w.position, w.t)).collect();
                                s.route = p.corridors.clone();
                            }
                        }
                    }
                    Err(e) => issue!("aircraft".into(), e.to_string()),
                }
            } else {
                let weights = RouteWeights { transfer_penalty_s: self.avoidance.transfer_penalty_s };
                for m in &missions {
                    match route(&graph, m.start, m.goal, &weights) {
                        Ok(r) => {
                            let s = setups.iter_mut().find(|s| s.id == m.aircraft).expect("mission has setup");
                            s.waypoints = corridor_waypoints(&r.corridors, 0, &graph, &spec, m.departure_s);
                            s.route = r.corridors;
                        }
                        Err(e) => issue!(format!("aircraft {}", m.aircraft), e.to_string()),
                    }
                }
            }
            for s in &mut setups {
                if let Some(first) = s.route.first() {
                    s.corridor = Some(*first);
                }
            }
        }
        if !issues.is_empty() {
            return Err(ScenarioError { issues });
        }
        setups.sort_by_key(|s| s.id);
        Ok(Prepared {
            spec,
            zones,
            graph,
            intersections,
            modes: self.modes.clone(),
            stations: self.stations.clone(),
            aircraft: setups,
            seed,
            scenario_sha256: self.sha256(),
        })
    }
}

/// Cell-center waypoints along a corridor sequence at corridor speed, the
/// first corridor entered at `first_index` and every later one at its
/// transfer cell. An open corridor left behind the entry point contributes no
/// cells.
pub fn corridor_waypoints(
    path: &[CorridorId],
    first_index: usize,
    graph: &CorridorGraph,
    spec: &GridSpec,
    departure_s: f64,
) -> Vec<(Point3, f64)> {
    let mut out: Vec<(Point3, f64)> = Vec::new();
    let mut t = departure_s;
    for (k, id) in path.iter().enumerate() {
        let Some(c) = graph.corridor(*id) else { break };
        let from = if k == 0 {
            first_index
        } else {
            graph.transfer(path[k - 1], *id).and_then(|x| c.position_of(&x.to_cell)).unwrap_or(0)
        };
        let to = if k + 1 == path.len() {
            c.len() - 1
        } else {
            graph.transfer(*id, path[k + 1]).and_then(|x| c.position_of(&x.from_cell)).unwrap_or(c.len() - 1)
        };
        let idx: Vec<usize> = if to >= from {
            (from..=to).collect()
        } else if c.is_closed(spec) {
            (from..c.len()).chain(0..=to).collect()
        } else {
            Vec::new()
        };
        for n in idx {
            let p = spec.cell_center(c.cells()[n]).expect("corridor cells are valid");
            if let Some((q, _)) = out.last() {
                t += (p - q).norm() / c.speed_mps();
            }
            out.push((p, t));
        }
    }
    out
}

fn converging_roster(c: &ConvergingConfig, count: usize, seed: u64, first: usize) -> Result<Vec<AircraftConfig>, String> {
    if !(c.radius_m > 0.0 && c.arrival_s > 0.0 && c.exit_s > c.arrival_s && c.jitter_sigma_m >= 0.0) {
        return Err("need radius_m > 0, 0 < arrival_s < exit_s and jitter_sigma_m ≥ 0".into());
    }
    let normal = Normal::new(0.0, c.jitter_sigma_m).map_err(|e| e.to_string())?;
    let mut rng = stream(seed, JITTER_STREAM);
    let center = Vec3::new(c.center[0], c.center[1], c.center[2]);
    let mut out = Vec::with_capacity(count);
    for n in 0..count {
        let angle = std::f64::consts::TAU * n as f64 / count as f64;
        let dir = Vec3::new(angle.cos(), angle.sin(), 0.0);
        let mut jitter = || Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), 0.0);
        let start = center + dir * c.radius_m + jitter();
        let end = center - dir * c.radius_m + jitter();
        let wp = |p: Point3, t| WaypointConfig { position: [p.x, p.y, p.z], t };
        out.push(AircraftConfig {
            id: AircraftId((first + n + 1) as u32),
            class: c.class,
            limits: c.limits,
            envelope: c.envelope,
            safety_margin_m: c.safety_margin_m,
            waypoints: vec![wp(start, 0.0), wp(center, c.arrival_s), wp(end, c.exit_s)],
            mission: None,
            corridor: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [grid]
        min = [0.0, 0.0, 0.0]
        max = [1000.0, 1000.0, 400.0]
        layer_boundaries = [0.0, 120.0, 300.0, 400.0]

        [[aircraft]]
        id = 1
        class = "hybrid"
        envelope = { shape = "sphere", radius = 2.0 }
        safety_margin_m = 10.0
        waypoints = [{ position = [100.0, 500.0, 300.0], t = 0.0 }, { position = [400.0, 500.0, 300.0], t = 20.0 }]
    "#;

    #[test]
    fn minimal_scenario_prepares() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.dt, 0.1);
        assert_eq!(s.duration_s, 120.0);
        let p = s.prepare(TrialOverrides::default()).unwrap();
        assert_eq!(p.aircraft.len(), 1);
        assert_eq!(p.aircraft[0].envelope.r_outer(), 12.0);
        assert_eq!(p.modes.len(), 4);
        assert_eq!(s.sha256(), Scenario::from_toml_str(MINIMAL).unwrap().sha256());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn field_level_diagnostics() {
        let text = MINIMAL.replace("t = 20.0", "t = 0.0").replace("safety_margin_m = 10.0", "safety_margin_m = -1.0");
        let err = Scenario::from_toml_str(&text).unwrap().validate().unwrap_err();
        let fields: Vec<&str> = err.issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["aircraft[0].envelope"]);
        let text = MINIMAL.replace("t = 20.0", "t = 0.0");
        let err = Scenario::from_toml_str(&text).unwrap().validate().unwrap_err();
        assert_eq!(err.issues[0].field, "aircraft[0].waypoints[1].t");
    }

    #[test]
    fn converging_roster_keeps_collision_waypoint_exact() {
        let c = ConvergingConfig {
            center: [500.0, 500.0, 300.0],
            radius_m: 400.0,
            arrival_s: 30.0,
            exit_s: 60.0,
            count: 4,
            class: AircraftClass::Hybrid,
            limits: None,
            envelope: EnvelopeShape::Sphere { radius: 2.0 },
            safety_margin_m: 10.0,
            jitter_sigma_m: 20.0,
        };
        let r = converging_roster(&c, 4, 9, 0).unwrap();
        assert_eq!(r.len(), 4);
        for a in &r {
            assert_eq!(a.waypoints[1], WaypointConfig { position: [500.0, 500.0, 300.0], t: 30.0 });
            assert_eq!(a.waypoints[0].position[2], 300.0);
        }
        assert_eq!(r, converging_roster(&c, 4, 9, 0).unwrap());
        assert_ne!(r, converging_roster(&c, 4, 10, 0).unwrap());
    }
}
