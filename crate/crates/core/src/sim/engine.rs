use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use super::log::{EventLog, LayoutAircraft, LayoutCorridor, Record, LOG_FORMAT};
use super::scenario::{corridor_waypoints, stream, AircraftSetup, Prepared, Scenario, TrialOverrides, NOISE_STREAM};
use super::{Completion, SimError, TrialResult};
use crate::avoidance::{
    conflict_matrix, find_deadlocks, predict_conflicts, tier1_maneuver, tier2_coordinate, tier3_switch, AvoidanceConfig,
    ConflictRecord, Maneuver, ManeuverContext, SwitchTrigger,
};
use crate::corridor::CorridorId;
use crate::envelope::{AircraftId, AircraftState};
use crate::geometry::{Point3, Vec3};
use crate::link::{detect_anomalies, kalman_step, link_distance_km, measure, select_mode, Measurement, Track};
use crate::rules::check_all;

/// Seconds a resolution stays in force past the predicted closest approach.
const HOLD_EXTRA_S: f64 = 1.0;

#[derive(Debug, Clone, Copy)]
struct Hold {
    target: Vec3,
    until: f64,
}

#[derive(Debug, Clone)]
struct Agent {
    setup: AircraftSetup,
    state: AircraftState,
    track: Track,
    /// Index of the waypoint being flown to.
    next: usize,
    hold: Option<Hold>,
    spawned: bool,
    done: Option<f64>,
}

impl Agent {
    fn active(&self) -> bool {
        self.spawned && self.done.is_none()
    }

    /// Skips waypoints already passed along their leg and returns the velocity
    /// that reaches the next one on time, or `None` once the plan is flown.
    fn guidance(&mut self, t: f64, dt: f64) -> Option<Vec3> {
        let wps = &self.setup.waypoints;
        let p = self.state.position;
        while self.next < wps.len() {
            let (w, _) = wps[self.next];
            let leg = w - wps[self.next - 1].0;
            if (p - w).norm() < 1e-6 || (p - w).dot(&leg) >= 0.0 {
                self.next += 1;
            } else {
                break;
            }
        }
        let (w, arrival) = *wps.get(self.next)?;
        let d = w - p;
        let lim = &self.setup.limits;
        let speed = (d.norm() / (arrival - t).max(dt)).clamp(lim.min_speed_mps, lim.max_speed_mps);
        Some(d.normalize() * speed)
    }

    fn reference_speed(&self, graph: &crate::corridor::CorridorGraph) -> Option<f64> {
        if let Some(c) = self.state.corridor.and_then(|id| graph.corridor(id)) {
            return Some(c.speed_mps());
        }
        let wps = &self.setup.waypoints;
        let k = self.next.min(wps.len() - 1).max(1);
        let (a, b) = (wps[k - 1], wps[k]);
        Some((b.0 - a.0).norm() / (b.1 - a.1))
    }
}

pub struct Engine {
    world: Prepared,
    cfg: AvoidanceConfig,
    scenario: Scenario,
    agents: Vec<Agent>,
    tick: u64,
    rng: ChaCha8Rng,
    log: Option<EventLog>,
    min_separation: Option<f64>,
    min_ratio: Option<f64>,
    first_overlap: Option<u64>,
    tier_activations: [u64; 4],
}

impl Engine {
    pub fn new(scenario: &Scenario, overrides: TrialOverrides, record: bool) -> Result<Self, SimError> {
        let world = scenario.prepare(overrides)?;
        let agents = world
            .aircraft
            .iter()
            .map(|s| {
                let (p0, _) = s.waypoints[0];
                let state = AircraftState::new(s.id, s.class, p0, Vec3::zeros(), s.envelope);
                Agent {
                    track: Track::new(s.id, p0, Vec3::zeros(), 0.0, 0.0, 0.0),
                    setup: s.clone(),
                    state,
                    next: 1,
                    hold: None,
                    spawned: false,
                    done: None,
                }
            })
            .collect();
        let mut tier_activations = [0; 4];
        if scenario.avoidance.tier_enabled(4) {
            tier_activations[3] = world.aircraft.iter().filter(|a| !a.route.is_empty()).count() as u64;
        }
        let mut engine = Self {
            rng: stream(world.seed, NOISE_STREAM),
            cfg: scenario.avoidance.clone(),
            scenario: scenario.clone(),
            world,
            agents,
            tick: 0,
            log: record.then(EventLog::new),
            min_separation: None,
            min_ratio: None,
            first_overlap: None,
            tier_activations,
        };
        engine.write_preamble();
        engine.spawn(0.0);
        engine.observe()?;
        Ok(engine)
    }

    fn dt(&self) -> f64 {
        self.scenario.dt
    }

    fn t(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    fn emit(&mut self, r: Record) {
        if let Some(log) = &mut self.log {
            log.push(r);
        }
    }

    fn write_preamble(&mut self) {
        if self.log.is_none() {
            return;
        }
        let w = &self.world;
        let corridors: Vec<LayoutCorridor> = w
            .graph
            .corridors()
            .map(|c| LayoutCorridor { id: c.id(), kind: c.kind(), speed_mps: c.speed_mps(), length_cells: c.len() })
            .collect();
        let corridor_cells: BTreeSet<_> = w.graph.corridors().flat_map(|c| c.cells().iter().copied()).collect();
        let intersection_cells: BTreeSet<_> = w.intersections.iter().flat_map(|i| i.shared_cells.iter().copied()).collect();
        let aircraft = w
            .aircraft
            .iter()
            .map(|a| LayoutAircraft { id: a.id, class: a.class, r_phys: a.envelope.r_phys(), r_outer: a.envelope.r_outer() })
            .collect();
        let header = Record::Header {
            format: LOG_FORMAT.into(),
            scenario_sha256: w.scenario_sha256.clone(),
            seed: w.seed,
            dt: self.scenario.dt,
            duration_s: self.scenario.duration_s,
        };
        let layout = Record::Layout {
            cell_size: w.spec.cell_size(),
            corridors,
            corridor_cells: corridor_cells.into_iter().collect(),
            intersection_cells: intersection_cells.into_iter().collect(),
            aircraft,
        };
        self.emit(header);
        self.emit(layout);
    }

    /// Aircraft whose first waypoint time has come enter at that waypoint.
    fn spawn(&mut self, t: f64) {
        let dt = self.dt();
        let sigma = self.world.modes.iter().map(|m| m.noise_sigma()).fold(0.0, f64::max);
        for a in &mut self.agents {
            if a.spawned || a.setup.waypoints[0].1 > t + 1e-9 {
                continue;
            }
            a.spawned = true;
            let v = a.guidance(t, dt).unwrap_or_else(Vec3::zeros);
            a.state.set_velocity(v);
            a.state.corridor = a.setup.route.first().copied().or(a.setup.corridor);
            let p_prev = a.state.position - v * dt;
            a.track = Track::new(a.setup.id, p_prev, v, sigma.max(1.0), 1.0, t - dt);
        }
    }

    pub fn finished(&self) -> bool {
        let t = self.t();
        t >= self.scenario.duration_s - 1e-9
            || (self.scenario.stop_when_complete && self.agents.iter().all(|a| a.spawned && a.done.is_some()))
    }

    /// Runs ticks until the scenario ends.
    pub fn run(mut self) -> Result<(TrialResult, Option<EventLog>), SimError> {
        while !self.finished() {
            self.step()?;
        }
        let result = self.result();
        if let Some(log) = &mut self.log {
            log.push(Record::Result(result.clone()));
        }
        Ok((result, self.log))
    }

    pub fn result(&self) -> TrialResult {
        TrialResult {
            success: self.first_overlap.is_none(),
            min_separation_m: self.min_separation,
            min_separation_ratio: self.min_ratio,
            first_overlap_tick: self.first_overlap,
            tier_activations: self.tier_activations,
            completion_times: self.agents.iter().map(|a| Completion { aircraft: a.setup.id, t: a.done }).collect(),
            ticks: self.tick,
        }
    }

    pub fn states(&self) -> Vec<AircraftState> {
        self.agents.iter().filter(|a| a.active()).map(|a| a.state.clone()).collect()
    }

    fn estimated(&self, a: &Agent) -> AircraftState {
        let mut s = a.state.clone();
        if self.scenario.monitoring.enabled {
            s.position = a.track.position();
            s.set_velocity(a.track.velocity());
        }
        s
    }

    /// One tick: monitoring, anomaly detection, conflict prediction, tier
    /// escalation, integration, rule checks and logging.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.dt();
        let t = self.t();
        let tick = self.tick;
        self.monitor(tick)?;

        let est: Vec<AircraftState> = self.agents.iter().filter(|a| a.active()).map(|a| self.estimated(a)).collect();
        let records = predict_conflicts(&est, self.cfg.horizon_s, self.cfg.alert_factor);
        let breaches: Vec<ConflictRecord> = records.iter().filter(|r| r.t_breach.is_some()).copied().collect();
        for r in &breaches {
            self.emit(Record::Conflict { tick, record: *r });
        }
        self.resolve(t, tick, &est, &records, &breaches);

        for n in 0..self.agents.len() {
            if !self.agents[n].active() {
                continue;
            }
            let a = &mut self.agents[n];
            if a.hold.is_some_and(|h| t >= h.until) {
                a.hold = None;
            }
            let guided = a.guidance(t, dt);
            let target = match (a.hold, guided) {
                (Some(h), _) => h.target,
                (None, Some(v)) => v,
                (None, None) => {
                    a.done = Some(t);
                    let id = a.setup.id;
                    self.emit(Record::Completed { tick, aircraft: id, t });
                    continue;
                }
            };
            let m = Maneuver::toward(&a.state.velocity, &target, &a.setup.limits, dt);
            let v = m.apply(&a.state.velocity, dt);
            a.state.set_velocity(v);
            a.state.position += v * dt;
        }
        self.tick += 1;
        let t = self.t();
        self.spawn(t);
        self.advance_corridors();
        self.observe()
    }

    fn monitor(&mut self, tick: u64) -> Result<(), SimError> {
        let dt = self.dt();
        let enabled = self.scenario.monitoring.enabled;
        for n in 0..self.agents.len() {
            if !self.agents[n].active() {
                continue;
            }
            let p = self.agents[n].state.position;
            let (fix, mode) = if enabled {
                let name = select_mode(&p, &self.world.stations, &self.world.modes).map_err(runtime)?;
                let mode = self.world.modes.iter().find(|m| m.name == name).expect("selected mode is configured");
                let fix = link_distance_km(&p, mode, &self.world.stations)
                    .and_then(|d| measure(&p, mode, d, &mut self.rng))
                    .map(|position| Measurement { position, sigma_m: mode.noise_sigma(), mode: name });
                (fix, Some(name))
            } else {
                (None, None)
            };
            let a = &mut self.agents[n];
            if enabled {
                let (track, outcome) = kalman_step(&a.track, fix, dt, &self.scenario.tracker).map_err(runtime)?;
                a.track = track;
                let id = a.setup.id;
                self.emit(Record::Measurement { tick, aircraft: id, mode: fix.and(mode), outcome });
            }
            let a = &self.agents[n];
            if enabled {
                let plan: Vec<Point3> = a.setup.waypoints.iter().map(|w| w.0).collect();
                let found = detect_anomalies(&a.track, &plan, &self.world.zones, &self.scenario.anomaly, tick);
                for x in found {
                    self.emit(Record::Anomaly(x));
                }
            }
        }
        Ok(())
    }

    fn context(&self, a: &Agent) -> ManeuverContext {
        let b = self.world.spec.bounds();
        let floor = (b.min.z + self.scenario.rules.min_altitude_m).min(a.state.position.z);
        let mut ctx = ManeuverContext::new(a.setup.limits, &self.cfg, self.dt(), [floor, b.max.z]);
        let off = schedule_offset(&a.state.position, self.t(), &a.setup.waypoints);
        let reach = a.state.envelope.r_outer();
        ctx.lateral_budget_m = (ctx.lateral_budget_m - reach - off.xy().norm()).max(0.0);
        ctx.vertical_budget_m = (ctx.vertical_budget_m - reach - off.z.abs()).max(0.0);
        ctx
    }

    /// Right-of-way order: higher corridor priority first, then lower id.
    fn priority(&self, id: AircraftId) -> (std::cmp::Reverse<u8>, AircraftId) {
        let rank = self
            .agent(id)
            .and_then(|a| a.state.corridor)
            .and_then(|c| self.world.graph.corridor(c))
            .map_or(0, |c| c.kind().priority_rank());
        (std::cmp::Reverse(rank), id)
    }

    fn agent(&self, id: AircraftId) -> Option<&Agent> {
        self.agents.iter().find(|a| a.setup.id == id)
    }

    fn agent_index(&self, id: AircraftId) -> usize {
        self.agents.iter().position(|a| a.setup.id == id).expect("known aircraft")
    }

    fn resolve(&mut self, t: f64, tick: u64, est: &[AircraftState], records: &[ConflictRecord], breaches: &[ConflictRecord]) {
        let cfg = self.cfg.clone();
        let any_tier = (1..=3).any(|k| cfg.tier_enabled(k));
        if !any_tier {
            return;
        }
        let by_id: BTreeMap<AircraftId, &AircraftState> = est.iter().map(|s| (s.id, s)).collect();
        let mut actions: BTreeMap<AircraftId, (Hold, u8, Maneuver)> = BTreeMap::new();
        let mut failed: BTreeSet<(AircraftId, AircraftId)> = BTreeSet::new();

        for r in breaches {
            if !cfg.tier_enabled(1) {
                failed.insert((r.a, r.b));
                continue;
            }
            let mut solved = false;
            for (id, other) in [(r.a, r.b), (r.b, r.a)] {
                if actions.contains_key(&id) {
                    solved = true;
                    continue;
                }
                let agent = &self.agents[self.agent_index(id)];
                let mut ctx = self.context(agent);
                ctx.yields = self.priority(id) > self.priority(other);
                if let Ok(o) = tier1_maneuver(by_id[&id], r, est, &ctx, &cfg) {
                    actions.insert(id, (Hold { target: o.target_velocity, until: t + r.t_cpa + HOLD_EXTRA_S }, 1, o.maneuver));
                    solved = true;
                }
            }
            if !solved {
                failed.insert((r.a, r.b));
            }
        }

        if cfg.tier_enabled(2) || cfg.tier_enabled(3) {
            let matrix = conflict_matrix(est, &cfg);
            let mut parent: BTreeMap<AircraftId, AircraftId> = est.iter().map(|s| (s.id, s.id)).collect();
            fn root(parent: &BTreeMap<AircraftId, AircraftId>, mut x: AircraftId) -> AircraftId {
                while parent[&x] != x {
                    x = parent[&x];
                }
                x
            }
            for r in breaches {
                if matrix.get(r.a, r.b) > cfg.cluster_threshold || failed.contains(&(r.a, r.b)) {
                    let (x, y) = (root(&parent, r.a), root(&parent, r.b));
                    if x != y {
                        parent.insert(x.max(y), x.min(y));
                    }
                }
            }
            let mut clusters: BTreeMap<AircraftId, Vec<AircraftId>> = BTreeMap::new();
            for s in est {
                clusters.entry(root(&parent, s.id)).or_default().push(s.id);
            }
            for members in clusters.into_values().filter(|m| m.len() >= 2) {
                let has_failed = failed.iter().any(|(a, b)| members.contains(a) && members.contains(b));
                if members.len() < 3 && !has_failed {
                    continue;
                }
                let horizon = breaches
                    .iter()
                    .filter(|r| members.contains(&r.a) && members.contains(&r.b))
                    .map(|r| r.t_cpa)
                    .fold(0.0, f64::max);
                let until = t + horizon + HOLD_EXTRA_S;
                if cfg.tier_enabled(2) {
                    let cluster: Vec<AircraftState> = members.iter().map(|id| by_id[id].clone()).collect();
                    let contexts: BTreeMap<AircraftId, ManeuverContext> =
                        members.iter().map(|id| (*id, self.context(&self.agents[self.agent_index(*id)]))).collect();
                    if let Ok(o) = tier2_coordinate(&cluster, &contexts, &cfg) {
                        for id in &members {
                            if (o.targets[id] - by_id[id].velocity).norm() > 1e-9 {
                                actions.insert(*id, (Hold { target: o.targets[id], until }, 2, o.maneuvers[id].clone()));
                            }
                        }
                        continue;
                    }
                }
                let mut ordered = members.clone();
                ordered.sort_by_key(|id| self.priority(*id));
                let fallback_tier = if cfg.tier_enabled(3) { 3 } else { 2 };
                for (rank, id) in ordered.iter().enumerate() {
                    if cfg.tier_enabled(3) && self.try_switch(*id, tick, by_id[id], records, false) {
                        actions.remove(id);
                        continue;
                    }
                    if rank == 0 {
                        continue;
                    }
                    let a = &self.agents[self.agent_index(*id)];
                    let v = by_id[id].velocity;
                    let h = v.xy().norm();
                    let room = self.context(a).lateral_budget_m / (until - t).max(self.dt());
                    let slow = a.setup.limits.min_speed_mps.min(h).max(h - room);
                    if h - slow < 1e-9 {
                        continue;
                    }
                    let target = if h > 1e-9 { Vec3::new(v.x * slow / h, v.y * slow / h, v.z) } else { v };
                    let m = Maneuver::toward(&v, &target, &a.setup.limits, self.dt());
                    actions.insert(*id, (Hold { target, until }, fallback_tier, m));
                }
            }
        }

        if cfg.tier_enabled(3) && self.agents.iter().any(|a| !a.setup.route.is_empty()) {
            let truth = self.states();
            for cycle in find_deadlocks(&truth, &self.world.graph, &self.world.spec) {
                let Some(&yielder) = cycle.iter().max() else { continue };
                if let Some(s) = by_id.get(&yielder) {
                    self.try_switch(yielder, tick, s, records, true);
                }
            }
        }

        for (id, (hold, tier, maneuver)) in actions {
            let n = self.agent_index(id);
            self.agents[n].hold = Some(hold);
            self.tier_activations[usize::from(tier) - 1] += 1;
            self.emit(Record::Maneuver { tick, aircraft: id, tier, maneuver });
        }
    }

    /// Corridor switch for a corridor-bound aircraft. On success the flight
    /// plan is rebuilt from the current position along the new sequence.
    fn try_switch(&mut self, id: AircraftId, tick: u64, est: &AircraftState, records: &[ConflictRecord], deadlock: bool) -> bool {
        let n = self.agent_index(id);
        let Some(&goal) = self.agents[n].setup.route.last() else { return false };
        let Some((trigger, seq)) = tier3_switch(est, goal, &self.world.graph, records, deadlock, &self.cfg) else {
            return false;
        };
        self.reroute(n, seq.clone(), tick, trigger)
    }

    fn reroute(&mut self, n: usize, seq: Vec<CorridorId>, tick: u64, trigger: SwitchTrigger) -> bool {
        let t = self.t();
        let a = &self.agents[n];
        let Some(current) = a.state.corridor else { return false };
        let Some(c) = self.world.graph.corridor(current) else { return false };
        let here = c.nearest_index(&a.state.position, &self.world.spec);
        let mut path = vec![current];
        path.extend(seq.iter().copied());
        let rest = corridor_waypoints(&path, here + 1, &self.world.graph, &self.world.spec, 0.0);
        let Some(first) = rest.first() else { return false };
        let speed = c.speed_mps();
        let start = t + (first.0 - a.state.position).norm() / speed;
        let mut waypoints = vec![(a.state.position, t)];
        waypoints.extend(rest.iter().map(|(p, s)| (*p, start + s)));
        if waypoints.windows(2).any(|w| w[1].1 <= w[0].1) {
            return false;
        }
        let a = &mut self.agents[n];
        let id = a.setup.id;
        a.setup.waypoints = waypoints;
        a.setup.route = path;
        a.next = 1;
        a.hold = None;
        self.tier_activations[2] += 1;
        self.emit(Record::CorridorSwitch { tick, aircraft: id, from: Some(current), to: seq, trigger });
        true
    }

    /// Moves corridor-bound aircraft on to the next corridor of their route
    /// once they enter one of its cells.
    fn advance_corridors(&mut self) {
        let spec = &self.world.spec;
        for a in self.agents.iter_mut().filter(|a| a.spawned && a.done.is_none()) {
            if a.setup.route.len() < 2 {
                continue;
            }
            let Ok(cell) = spec.point_to_cell(&a.state.position) else { continue };
            if self.world.graph.corridor(a.setup.route[1]).is_some_and(|c| c.contains(&cell)) {
                a.setup.route.remove(0);
                a.state.corridor = Some(a.setup.route[0]);
            }
        }
    }

    /// Separation bookkeeping, rule checks and state records for the current tick.
    fn observe(&mut self) -> Result<(), SimError> {
        let tick = self.tick;
        let t = self.t();
        let states = self.states();
        for (i, a) in states.iter().enumerate() {
            for b in &states[i + 1..] {
                let d = (a.position - b.position).norm();
                let reach = a.envelope.r_phys() + b.envelope.r_phys();
                self.min_separation = Some(self.min_separation.map_or(d, |m| m.min(d)));
                let ratio = d / reach;
                self.min_ratio = Some(self.min_ratio.map_or(ratio, |m| m.min(ratio)));
                if d <= reach && self.first_overlap.is_none() {
                    self.first_overlap = Some(tick);
                }
            }
        }
        if self.log.is_none() {
            return Ok(());
        }
        let w = &self.world;
        let violations =
            check_all(&states, &w.spec, &w.graph, &w.intersections, &w.zones, &self.scenario.rules).map_err(runtime)?;
        let mut out = Vec::with_capacity(states.len() + violations.len());
        for a in self.agents.iter().filter(|a| a.active()) {
            let est = self.estimated(a);
            let p = a.state.position;
            out.push(Record::State {
                tick,
                t,
                aircraft: a.setup.id,
                position: [p.x, p.y, p.z],
                velocity: [a.state.velocity.x, a.state.velocity.y, a.state.velocity.z],
                estimated: [est.position.x, est.position.y, est.position.z],
                corridor: a.state.corridor,
                cell: w.spec.point_to_cell(&p).ok(),
                reference_speed: a.reference_speed(&w.graph),
            });
        }
        out.extend(violations.into_iter().map(|violation| Record::Violation { tick, violation }));
        for r in out {
            self.emit(r);
        }
        Ok(())
    }
}

/// Offset of `p` from where the timed plan puts the aircraft at `t`. The
/// outer envelope must stay inside a channel of the budget half-widths around
/// that point, so maneuver room shrinks by this offset.
fn schedule_offset(p: &Point3, t: f64, waypoints: &[(Point3, f64)]) -> Vec3 {
    let (Some(first), Some(last)) = (waypoints.first(), waypoints.last()) else {
        return Vec3::zeros();
    };
    if t <= first.1 {
        return p - first.0;
    }
    let k = waypoints.partition_point(|w| w.1 <= t);
    let Some(&(b, tb)) = waypoints.get(k) else {
        return p - last.0;
    };
    let (a, ta) = waypoints[k - 1];
    let s = if tb > ta { (t - ta) / (tb - ta) } else { 1.0 };
    p - (a + (b - a) * s)
}

fn runtime(e: impl std::fmt::Display) -> SimError {
    SimError::Runtime(e.to_string())
}
