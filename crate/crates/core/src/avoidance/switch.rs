use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AvoidanceConfig, ConflictRecord};
use crate::corridor::{better, route_with, CorridorGraph, CorridorId};
use crate::envelope::{AircraftId, AircraftState};
use crate::grid::GridSpec;
use crate::rules::CorridorLookup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SwitchTrigger {
    HighSeverity { severity: f64 },
    Deadlock,
}

/// `i → j` when the next cell of `i` along its corridor holds `j`. With
/// several occupants the smallest id is taken.
pub fn wait_for_graph<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    corridors: &L,
    spec: &GridSpec,
) -> BTreeMap<AircraftId, AircraftId> {
    let mut occupant: BTreeMap<_, AircraftId> = BTreeMap::new();
    for s in states {
        if let Ok(c) = spec.point_to_cell(&s.position) {
            occupant.entry(c).and_modify(|o| *o = (*o).min(s.id)).or_insert(s.id);
        }
    }
    let mut edges = BTreeMap::new();
    for s in states {
        let Some(c) = s.corridor.and_then(|id| corridors.lookup(id)) else { continue };
        let Some(n) = spec.point_to_cell(&s.position).ok().and_then(|cell| c.position_of(&cell)) else { continue };
        let next = if n + 1 < c.len() {
            c.cells()[n + 1]
        } else if c.is_closed(spec) {
            c.cells()[0]
        } else {
            continue;
        };
        if let Some(&j) = occupant.get(&next) {
            if j != s.id {
                edges.insert(s.id, j);
            }
        }
    }
    edges
}

/// Cycles of the wait-for graph, each rotated to start at its smallest id.
pub fn find_deadlocks<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    corridors: &L,
    spec: &GridSpec,
) -> Vec<Vec<AircraftId>> {
    let edges = wait_for_graph(states, corridors, spec);
    let mut cycles = BTreeSet::new();
    for &start in edges.keys() {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(&next) = edges.get(&cur) {
            if let Some(pos) = path.iter().position(|x| *x == next) {
                let mut cycle = path[pos..].to_vec();
                let min_at = cycle.iter().enumerate().min_by_key(|(_, id)| **id).map(|(k, _)| k).unwrap_or(0);
                cycle.rotate_left(min_at);
                cycles.insert(cycle);
                break;
            }
            path.push(next);
            cur = next;
        }
    }
    cycles.into_iter().collect()
}

/// Corridor switching for an aircraft in high-severity conflict or deadlock:
/// a new corridor sequence toward `goal` that leaves the current corridor at
/// one of its transfers and never re-enters it. `None` when not triggered or
/// when no alternative exists.
pub fn tier3_switch(
    aircraft: &AircraftState,
    goal: CorridorId,
    graph: &CorridorGraph,
    records: &[ConflictRecord],
    in_deadlock: bool,
    cfg: &AvoidanceConfig,
) -> Option<(SwitchTrigger, Vec<CorridorId>)> {
    let worst = records.iter().filter(|r| r.involves(aircraft.id)).map(|r| r.severity).fold(0.0, f64::max);
    let trigger = if worst > cfg.switch_threshold {
        SwitchTrigger::HighSeverity { severity: worst }
    } else if in_deadlock {
        SwitchTrigger::Deadlock
    } else {
        return None;
    };
    let current = aircraft.corridor?;
    let cs = graph.cell_size();
    let mut best: Option<(f64, Vec<CorridorId>)> = None;
    for t in graph.transfers_from(current) {
        let Ok(r) = route_with(graph, t.to, goal, cfg.transfer_penalty_s, |c| {
            (c.id() != current).then(|| c.traversal_time_s(cs))
        }) else {
            continue;
        };
        let cost = r.cost_s + cfg.transfer_penalty_s;
        let replace = match &best {
            None => true,
            Some((bc, bp)) => better(cost, &r.corridors, *bc, bp),
        };
        if replace {
            best = Some((cost, r.corridors));
        }
    }
    best.map(|(_, seq)| (trigger, seq))
}
