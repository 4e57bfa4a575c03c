use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::probability::{estimate_collision_probability, Trajectory};
use super::{AvoidanceConfig, AvoidanceError};
use crate::corridor::{better, route, CorridorGraph, CorridorId, RouteWeights};
use crate::envelope::AircraftId;
use crate::geometry::{Point3, Vec3};
use crate::grid::{CellIndex, GridSpec};

const MAX_CANDIDATES: usize = 16;
const MAX_EXPANSIONS: usize = 20_000;

/// Origin/destination request for the global planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mission {
    pub aircraft: AircraftId,
    pub start: CorridorId,
    pub goal: CorridorId,
    #[serde(default)]
    pub departure_s: f64,
    #[serde(default)]
    pub emergency: bool,
    pub r_phys: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostBreakdown {
    pub time_s: f64,
    pub collision_probability: f64,
    pub relative_velocity_mps: f64,
    pub inverse_min_separation: f64,
    /// Transfers beyond those of the unconstrained shortest route.
    pub extra_transfers: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimedWaypoint {
    pub t: f64,
    pub cell: CellIndex,
    pub position: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AircraftPlan {
    pub aircraft: AircraftId,
    pub corridors: Vec<CorridorId>,
    pub departure_s: f64,
    pub delay_s: f64,
    pub waypoints: Vec<TimedWaypoint>,
    pub cost: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalPlan {
    /// In planning order.
    pub plans: Vec<AircraftPlan>,
    #[serde(skip)]
    pub occupancy: BTreeMap<(CellIndex, i64), AircraftId>,
}

impl GlobalPlan {
    pub fn plan(&self, id: AircraftId) -> Option<&AircraftPlan> {
        self.plans.iter().find(|p| p.aircraft == id)
    }

    pub fn total_cost(&self) -> f64 {
        self.plans.iter().map(|p| p.cost.total).sum()
    }
}

#[derive(Debug, Clone)]
struct Dwell {
    cell: CellIndex,
    t_in: f64,
    t_out: f64,
    center: Point3,
    velocity: Vec3,
}

struct Timed {
    dwells: Vec<Dwell>,
    r_phys: f64,
}

impl Timed {
    fn ticks(&self, tick: f64) -> Vec<(CellIndex, i64)> {
        let mut out = Vec::new();
        for d in &self.dwells {
            let first = (d.t_in / tick).floor() as i64;
            let last = ((d.t_out / tick).ceil() as i64 - 1).max(first);
            out.extend((first..=last).map(|k| (d.cell, k)));
        }
        out
    }

    fn position_at(&self, t: f64) -> Option<Point3> {
        let first = self.dwells.first()?;
        let last = self.dwells.last()?;
        if t < first.t_in || t >= last.t_out {
            return None;
        }
        let k = self.dwells.partition_point(|d| d.t_out <= t);
        self.dwells.get(k).map(|d| d.center)
    }

    fn span(&self) -> (f64, f64) {
        (self.dwells.first().map_or(0.0, |d| d.t_in), self.dwells.last().map_or(0.0, |d| d.t_out))
    }
}

/// Cell-by-cell schedule along `path` starting at the entrance of the first
/// corridor. Transfers leave at the transfer cell; closed loops may wrap.
fn schedule(path: &[CorridorId], graph: &CorridorGraph, spec: &GridSpec, departure: f64, r_phys: f64) -> Option<Timed> {
    let mut cells: Vec<(CellIndex, f64)> = Vec::new();
    for (k, id) in path.iter().enumerate() {
        let c = graph.corridor(*id)?;
        let from = if k == 0 { 0 } else { c.position_of(&graph.transfer(path[k - 1], *id)?.to_cell)? };
        let to = if k + 1 == path.len() {
            c.len() - 1
        } else {
            c.position_of(&graph.transfer(*id, path[k + 1])?.from_cell)?
        };
        let idx: Vec<usize> = if to >= from {
            (from..=to).collect()
        } else if c.is_closed(spec) {
            (from..c.len()).chain(0..=to).collect()
        } else {
            return None;
        };
        let dwell = spec.cell_size() / c.speed_mps();
        for n in idx {
            // A crossing transfer enters the next corridor in the cell it left.
            if cells.last().is_none_or(|(last, _)| *last != c.cells()[n]) {
                cells.push((c.cells()[n], dwell));
            }
        }
    }
    let centers: Vec<Point3> = cells.iter().map(|(c, _)| spec.cell_center(*c).ok()).collect::<Option<_>>()?;
    let mut t = departure;
    let mut dwells = Vec::with_capacity(cells.len());
    for (n, (cell, dwell)) in cells.iter().enumerate() {
        let velocity = if n + 1 < centers.len() {
            (centers[n + 1] - centers[n]) / *dwell
        } else if n > 0 {
            (centers[n] - centers[n - 1]) / cells[n - 1].1
        } else {
            Vec3::zeros()
        };
        dwells.push(Dwell { cell: *cell, t_in: t, t_out: t + dwell, center: centers[n], velocity });
        t += dwell;
    }
    Some(Timed { dwells, r_phys })
}

fn candidate_paths(graph: &CorridorGraph, start: CorridorId, goal: CorridorId, penalty: f64) -> Vec<(f64, Vec<CorridorId>)> {
    let cs = graph.cell_size();
    let mut found: Vec<(f64, Vec<CorridorId>)> = Vec::new();
    let mut stack = vec![(graph.traversal_time_s(start).unwrap_or(0.0), vec![start])];
    let mut expansions = 0;
    while let Some((cost, path)) = stack.pop() {
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            break;
        }
        let last = *path.last().expect("non-empty path");
        if last == goal {
            found.push((cost, path));
            continue;
        }
        for t in graph.transfers_from(last).iter().rev() {
            if path.contains(&t.to) {
                continue;
            }
            let Some(c) = graph.corridor(t.to) else { continue };
            let mut next = path.clone();
            next.push(t.to);
            stack.push((cost + penalty + c.traversal_time_s(cs), next));
        }
    }
    if let Ok(r) = route(graph, start, goal, &RouteWeights { transfer_penalty_s: penalty }) {
        if !found.iter().any(|(_, p)| *p == r.corridors) {
            found.push((r.cost_s, r.corridors));
        }
    }
    found.sort_by(|a, b| {
        if better(a.0, &a.1, b.0, &b.1) {
            std::cmp::Ordering::Less
        } else if better(b.0, &b.1, a.0, &a.1) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    found.truncate(MAX_CANDIDATES);
    found
}

fn pair_seed(a: AircraftId, b: AircraftId, candidate: usize, delay: u32) -> u64 {
    ((a.0 as u64) << 40) ^ ((b.0 as u64) << 16) ^ ((candidate as u64) << 8) ^ delay as u64
}

struct Interaction {
    probability: f64,
    relative_velocity: f64,
    inverse_min_separation: f64,
}

fn interact(
    own: &Timed,
    ids: (AircraftId, AircraftId),
    other: &Timed,
    cfg: &AvoidanceConfig,
    candidate: usize,
    delay: u32,
) -> Result<Interaction, AvoidanceError> {
    let mut shared = Vec::new();
    let other_cells: BTreeMap<CellIndex, Vec3> = other.dwells.iter().map(|d| (d.cell, d.velocity)).collect();
    for d in &own.dwells {
        if let Some(v) = other_cells.get(&d.cell) {
            shared.push((d.velocity - v).norm());
        }
    }
    let relative_velocity = if shared.is_empty() { 0.0 } else { shared.iter().sum::<f64>() / shared.len() as f64 };

    let (a0, a1) = own.span();
    let (b0, b1) = other.span();
    let tick = cfg.plan_tick_s;
    let k0 = (a0.max(b0) / tick).ceil() as i64;
    let k1 = (a1.min(b1) / tick).ceil() as i64;
    let mut pa = Vec::new();
    let mut pb = Vec::new();
    for k in k0..k1 {
        let t = k as f64 * tick;
        if let (Some(x), Some(y)) = (own.position_at(t), other.position_at(t)) {
            pa.push(x);
            pb.push(y);
        }
    }
    if pa.is_empty() {
        return Ok(Interaction { probability: 0.0, relative_velocity, inverse_min_separation: 0.0 });
    }
    let min_sep = pa.iter().zip(&pb).map(|(x, y)| (x - y).norm()).fold(f64::INFINITY, f64::min);
    let reach = own.r_phys + other.r_phys + 8.0 * std::f64::consts::SQRT_2 * cfg.plan_sigma_m;
    let probability = if min_sep > reach {
        0.0
    } else {
        let t0 = k0 as f64 * tick;
        let ta = Trajectory { t0, dt: tick, positions: pa, r_phys: own.r_phys };
        let tb = Trajectory { t0, dt: tick, positions: pb, r_phys: other.r_phys };
        estimate_collision_probability(&ta, &tb, cfg.plan_sigma_m, cfg.plan_samples, pair_seed(ids.0, ids.1, candidate, delay))?
    };
    Ok(Interaction { probability, relative_velocity, inverse_min_separation: 1.0 / min_sep.max(1.0) })
}

/// Sequential global planning: emergencies first, then by departure time and
/// id. Each aircraft takes the cheapest candidate route whose timed cells are
/// free in the shared occupancy table, delaying departure in fixed steps when
/// none is.
pub fn tier4_plan(
    missions: &[Mission],
    graph: &CorridorGraph,
    spec: &GridSpec,
    cfg: &AvoidanceConfig,
) -> Result<GlobalPlan, AvoidanceError> {
    cfg.validate()?;
    let mut order: Vec<&Mission> = missions.iter().collect();
    order.sort_by(|a, b| {
        b.emergency
            .cmp(&a.emergency)
            .then(a.departure_s.total_cmp(&b.departure_s))
            .then(a.aircraft.cmp(&b.aircraft))
    });
    let mut seen = BTreeSet::new();
    for m in &order {
        if !seen.insert(m.aircraft) {
            return Err(AvoidanceError::InvalidInput(format!("duplicate mission for {}", m.aircraft)));
        }
        for id in [m.start, m.goal] {
            if graph.corridor(id).is_none() {
                return Err(AvoidanceError::InvalidInput(format!("unknown corridor {id}")));
            }
        }
        if !(m.departure_s.is_finite() && m.r_phys.is_finite() && m.r_phys > 0.0) {
            return Err(AvoidanceError::InvalidInput(format!("invalid mission for {}", m.aircraft)));
        }
    }

    let w = cfg.tier4_weights;
    let mut occupancy: BTreeMap<(CellIndex, i64), AircraftId> = BTreeMap::new();
    let mut planned: Vec<(AircraftId, Timed)> = Vec::new();
    let mut plans = Vec::new();
    for m in order {
        let candidates = candidate_paths(graph, m.start, m.goal, cfg.transfer_penalty_s);
        let Some(baseline) = route(graph, m.start, m.goal, &RouteWeights { transfer_penalty_s: cfg.transfer_penalty_s }).ok() else {
            return Err(AvoidanceError::Unplannable(m.aircraft));
        };
        let mut chosen: Option<(CostBreakdown, Vec<CorridorId>, Timed, f64)> = None;
        for step in 0..=cfg.max_delay_steps {
            let delay = step as f64 * cfg.delay_step_s;
            for (n, (base_cost, path)) in candidates.iter().enumerate() {
                let Some(timed) = schedule(path, graph, spec, m.departure_s + delay, m.r_phys) else { continue };
                if timed.ticks(cfg.plan_tick_s).iter().any(|key| occupancy.contains_key(key)) {
                    continue;
                }
                let mut cost = CostBreakdown {
                    time_s: base_cost + delay,
                    extra_transfers: (path.len() as f64 - baseline.corridors.len() as f64).max(0.0),
                    ..Default::default()
                };
                for (other_id, other) in &planned {
                    let i = interact(&timed, (m.aircraft, *other_id), other, cfg, n, step)?;
                    cost.collision_probability += i.probability;
                    cost.relative_velocity_mps += i.relative_velocity;
                    cost.inverse_min_separation = cost.inverse_min_separation.max(i.inverse_min_separation);
                }
                cost.total = w[0] * cost.time_s
                    + w[1] * cost.collision_probability
                    + w[2] * cost.relative_velocity_mps
                    + w[3] * cost.inverse_min_separation
                    + w[4] * cost.extra_transfers;
                let replace = match &chosen {
                    None => true,
                    Some((best, best_path, _, _)) => better(cost.total, path, best.total, best_path),
                };
                if replace {
                    chosen = Some((cost, path.clone(), timed, delay));
                }
            }
            if chosen.is_some() {
                break;
            }
        }
        let Some((cost, corridors, timed, delay)) = chosen else {
            return Err(AvoidanceError::Unplannable(m.aircraft));
        };
        for key in timed.ticks(cfg.plan_tick_s) {
            occupancy.insert(key, m.aircraft);
        }
        let waypoints = timed
            .dwells
            .iter()
            .map(|d| TimedWaypoint { t: 0.5 * (d.t_in + d.t_out), cell: d.cell, position: d.center })
            .collect();
        plans.push(AircraftPlan {
            aircraft: m.aircraft,
            corridors,
            departure_s: m.departure_s + delay,
            delay_s: delay,
            waypoints,
            cost,
        });
        planned.push((m.aircraft, timed));
    }
    Ok(GlobalPlan { plans, occupancy })
}

/// Every `(cell, tick)` slot claimed by more than one plan.
pub fn double_bookings(plan: &GlobalPlan, graph: &CorridorGraph, spec: &GridSpec, cfg: &AvoidanceConfig) -> Vec<(CellIndex, i64)> {
    let mut seen: BTreeMap<(CellIndex, i64), usize> = BTreeMap::new();
    for p in &plan.plans {
        if let Some(t) = schedule(&p.corridors, graph, spec, p.departure_s, 1.0) {
            for key in t.ticks(cfg.plan_tick_s).into_iter().collect::<BTreeSet<_>>() {
                *seen.entry(key).or_default() += 1;
            }
        }
    }
    seen.into_iter().filter(|(_, n)| *n > 1).map(|(k, _)| k).collect()
}
