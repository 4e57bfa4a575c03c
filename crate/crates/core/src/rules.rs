//! Stateless flight-rule checks over a snapshot of aircraft states.
//!
//! Every check returns its violations sorted by rule, aircraft ids and cell,
//! so permuting the input states never changes the output.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::{Corridor, CorridorGraph, CorridorId, Intersection};
use crate::envelope::{AircraftId, AircraftState};
use crate::geometry::Point3;
use crate::grid::{CellIndex, GridSpec, ZoneKind, ZoneSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    MultiOccupancy,
    SpeedMismatch,
    WrongDirection,
    SeparationShortfall,
    GeofenceIntrusion,
    BelowMinAltitude,
    PriorityIgnored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Threshold {
    Value(f64),
    Band([f64; 2]),
}

/// One rule breach. For `PriorityIgnored`, the offender is listed first and
/// the right-of-way aircraft second; otherwise ids are ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub aircraft: Vec<AircraftId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
}

impl Violation {
    fn new(rule: Rule, aircraft: Vec<AircraftId>) -> Self {
        Self { rule, aircraft, cell: None, position: None, measured: None, threshold: None }
    }

    fn at_cell(mut self, c: CellIndex) -> Self {
        self.cell = Some(c);
        self
    }

    fn at(mut self, p: &Point3) -> Self {
        self.position = Some([p.x, p.y, p.z]);
        self
    }

    fn measured(mut self, m: f64, t: Threshold) -> Self {
        self.measured = Some(m);
        self.threshold = Some(t);
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("aircraft {0} is outside the grid")]
    OutOfBounds(AircraftId),
    #[error("aircraft {aircraft} is assigned to unknown corridor {corridor}")]
    UnknownCorridor { aircraft: AircraftId, corridor: CorridorId },
    #[error("invalid rule parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleParams {
    pub speed_tolerance_frac: f64,
    pub min_gap_cells: usize,
    pub min_altitude_m: f64,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self { speed_tolerance_frac: 0.1, min_gap_cells: 2, min_altitude_m: 30.0 }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<(), RuleError> {
        if !(0.0..1.0).contains(&self.speed_tolerance_frac) {
            return Err(RuleError::InvalidParameter("speed_tolerance_frac must lie in [0, 1)".into()));
        }
        if self.min_gap_cells < 1 {
            return Err(RuleError::InvalidParameter("min_gap_cells must be at least 1".into()));
        }
        if !self.min_altitude_m.is_finite() {
            return Err(RuleError::InvalidParameter("min_altitude_m must be finite".into()));
        }
        Ok(())
    }
}

/// Anything that resolves corridor ids.
pub trait CorridorLookup {
    fn lookup(&self, id: CorridorId) -> Option<&Corridor>;
}

impl CorridorLookup for CorridorGraph {
    fn lookup(&self, id: CorridorId) -> Option<&Corridor> {
        self.corridor(id)
    }
}

impl CorridorLookup for BTreeMap<CorridorId, Corridor> {
    fn lookup(&self, id: CorridorId) -> Option<&Corridor> {
        self.get(&id)
    }
}

impl CorridorLookup for [Corridor] {
    fn lookup(&self, id: CorridorId) -> Option<&Corridor> {
        self.iter().find(|c| c.id() == id)
    }
}

fn sorted(mut v: Vec<Violation>) -> Vec<Violation> {
    v.sort_by(|a, b| (a.rule, &a.aircraft, a.cell).cmp(&(b.rule, &b.aircraft, b.cell)));
    v
}

fn assigned<'a, L: CorridorLookup + ?Sized>(
    s: &AircraftState,
    corridors: &'a L,
) -> Result<Option<&'a Corridor>, RuleError> {
    match s.corridor {
        None => Ok(None),
        Some(id) => corridors
            .lookup(id)
            .map(Some)
            .ok_or(RuleError::UnknownCorridor { aircraft: s.id, corridor: id }),
    }
}

/// One `MultiOccupancy` violation per pair of aircraft sharing a cell.
pub fn check_occupancy(states: &[AircraftState], spec: &GridSpec) -> Result<Vec<Violation>, RuleError> {
    let mut by_cell: BTreeMap<CellIndex, Vec<AircraftId>> = BTreeMap::new();
    for s in states {
        let c = spec.point_to_cell(&s.position).map_err(|_| RuleError::OutOfBounds(s.id))?;
        by_cell.entry(c).or_default().push(s.id);
    }
    let mut out = Vec::new();
    for (c, mut ids) in by_cell {
        ids.sort();
        for (n, a) in ids.iter().enumerate() {
            for b in &ids[n + 1..] {
                out.push(Violation::new(Rule::MultiOccupancy, vec![*a, *b]).at_cell(c));
            }
        }
    }
    Ok(sorted(out))
}

/// `SpeedMismatch` when an assigned aircraft's speed leaves the corridor band.
pub fn check_speed<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    corridors: &L,
    tolerance_frac: f64,
) -> Result<Vec<Violation>, RuleError> {
    let mut out = Vec::new();
    for s in states {
        let Some(c) = assigned(s, corridors)? else { continue };
        let v = c.speed_mps();
        let speed = s.speed();
        if (speed - v).abs() > tolerance_frac * v {
            let band = [v * (1.0 - tolerance_frac), v * (1.0 + tolerance_frac)];
            out.push(Violation::new(Rule::SpeedMismatch, vec![s.id]).at(&s.position).measured(speed, Threshold::Band(band)));
        }
    }
    Ok(sorted(out))
}

/// `WrongDirection` when velocity points strictly against the local corridor tangent.
pub fn check_direction<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    corridors: &L,
    spec: &GridSpec,
) -> Result<Vec<Violation>, RuleError> {
    let mut out = Vec::new();
    for s in states {
        let Some(c) = assigned(s, corridors)? else { continue };
        let n = c.nearest_index(&s.position, spec);
        let Some(t) = c.tangent_at(n, spec) else { continue };
        let dot = s.velocity.dot(&t);
        if dot < 0.0 {
            out.push(
                Violation::new(Rule::WrongDirection, vec![s.id])
                    .at_cell(c.cells()[n])
                    .measured(dot, Threshold::Value(0.0)),
            );
        }
    }
    Ok(sorted(out))
}

/// `SeparationShortfall` for same-corridor pairs closer than `min_gap_cells`
/// along the corridor order.
pub fn check_separation<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    corridors: &L,
    spec: &GridSpec,
    min_gap_cells: usize,
) -> Result<Vec<Violation>, RuleError> {
    let mut groups: BTreeMap<CorridorId, Vec<(AircraftId, usize)>> = BTreeMap::new();
    for s in states {
        if let Some(c) = assigned(s, corridors)? {
            groups.entry(c.id()).or_default().push((s.id, c.nearest_index(&s.position, spec)));
        }
    }
    let mut out = Vec::new();
    for (id, mut members) in groups {
        let c = corridors.lookup(id).expect("resolved above");
        members.sort();
        for (n, (a, ia)) in members.iter().enumerate() {
            for (b, ib) in &members[n + 1..] {
                let gap = c.cell_gap(*ia, *ib, spec);
                if gap < min_gap_cells {
                    out.push(
                        Violation::new(Rule::SeparationShortfall, vec![*a, *b])
                            .at_cell(c.cells()[*ia.min(ib)])
                            .measured(gap as f64, Threshold::Value(min_gap_cells as f64)),
                    );
                }
            }
        }
    }
    Ok(sorted(out))
}

/// `GeofenceIntrusion` inside no-fly zones; `BelowMinAltitude` outside landing fields.
pub fn check_geofence(states: &[AircraftState], zones: &ZoneSet, min_altitude_m: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in states {
        if zones.is_restricted(&s.position) == Some(ZoneKind::NoFly) {
            out.push(Violation::new(Rule::GeofenceIntrusion, vec![s.id]).at(&s.position));
        }
        if s.position.z < min_altitude_m && !zones.in_landing_field(&s.position) {
            out.push(
                Violation::new(Rule::BelowMinAltitude, vec![s.id])
                    .at(&s.position)
                    .measured(s.position.z, Threshold::Value(min_altitude_m)),
            );
        }
    }
    sorted(out)
}

/// `PriorityIgnored` against an aircraft outside the priority corridor that
/// occupies a shared or buffer cell while a priority-corridor aircraft holds
/// a shared cell or sits one cell before entering one.
pub fn check_intersection_priority<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    intersections: &[Intersection],
    corridors: &L,
    spec: &GridSpec,
) -> Result<Vec<Violation>, RuleError> {
    let cells: HashMap<AircraftId, CellIndex> =
        states.iter().filter_map(|s| spec.point_to_cell(&s.position).ok().map(|c| (s.id, c))).collect();
    let mut out = Vec::new();
    for x in intersections {
        let Some(pc) = corridors.lookup(x.priority) else {
            continue;
        };
        let holders: Vec<AircraftId> = states
            .iter()
            .filter(|s| s.corridor == Some(x.priority))
            .filter(|s| {
                let Some(c) = cells.get(&s.id) else { return false };
                x.shared_cells.contains(c)
                    || pc
                        .position_of(c)
                        .and_then(|n| pc.cells().get(n + 1))
                        .is_some_and(|next| x.shared_cells.contains(next))
            })
            .map(|s| s.id)
            .collect();
        if holders.is_empty() {
            continue;
        }
        for s in states.iter().filter(|s| s.corridor != Some(x.priority)) {
            let Some(c) = cells.get(&s.id) else { continue };
            if x.shared_cells.contains(c) || x.buffer_cells.contains(c) {
                for h in &holders {
                    out.push(Violation::new(Rule::PriorityIgnored, vec![s.id, *h]).at_cell(*c));
                }
            }
        }
    }
    let mut out = sorted(out);
    out.dedup_by(|a, b| a.aircraft == b.aircraft && a.cell == b.cell);
    Ok(out)
}

/// Runs every check. Aircraft outside the grid skip the cell-based rules.
pub fn check_all<L: CorridorLookup + ?Sized>(
    states: &[AircraftState],
    spec: &GridSpec,
    corridors: &L,
    intersections: &[Intersection],
    zones: &ZoneSet,
    params: &RuleParams,
) -> Result<Vec<Violation>, RuleError> {
    let inside: Vec<AircraftState> = states.iter().filter(|s| spec.bounds().contains(&s.position)).cloned().collect();
    let mut out = check_occupancy(&inside, spec)?;
    out.extend(check_speed(states, corridors, params.speed_tolerance_frac)?);
    out.extend(check_direction(states, corridors, spec)?);
    out.extend(check_separation(states, corridors, spec, params.min_gap_cells)?);
    out.extend(check_geofence(states, zones, params.min_altitude_m));
    out.extend(check_intersection_priority(&inside, intersections, corridors, spec)?);
    Ok(sorted(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corridor::{build_corridor, find_intersections, CorridorKind};
    use crate::envelope::{AircraftClass, DualEnvelope};
    use crate::geometry::{Aabb, Vec3};
    use crate::grid::{Cylinder, Zone, ZoneShape};

    fn grid() -> GridSpec {
        GridSpec::new(
            Aabb::new(Vec3::zeros(), Vec3::new(1000.0, 1000.0, 400.0)),
            vec![0.0, 120.0, 300.0, 400.0],
            10.0,
        )
        .unwrap()
    }

    fn ac(id: u32, p: Vec3, v: Vec3, corridor: Option<u32>) -> AircraftState {
        let mut s = AircraftState::new(AircraftId(id), AircraftClass::RotaryWing, p, v, DualEnvelope::sphere(1.0, 2.0).unwrap());
        s.corridor = corridor.map(CorridorId);
        s
    }

    fn east(id: u32, len: u32, j: u32) -> Corridor {
        let cells = (0..len).map(|i| CellIndex::new(1, i, j, 3)).collect();
        build_corridor(CorridorId(id), cells, CorridorKind::Horizontal, 15.0, &grid(), &ZoneSet::default()).unwrap()
    }

    fn cell_center(i: u32, j: u32) -> Vec3 {
        grid().cell_center(CellIndex::new(1, i, j, 3)).unwrap()
    }

    #[test]
    fn occupancy_pairs() {
        let g = grid();
        let p = Vec3::new(5.0, 5.0, 150.0);
        let two = [ac(1, p, Vec3::zeros(), None), ac(2, p + Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), None)];
        let v = check_occupancy(&two, &g).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].aircraft, vec![AircraftId(1), AircraftId(2)]);
        let three = [two[0].clone(), two[1].clone(), ac(3, p, Vec3::zeros(), None)];
        assert_eq!(check_occupancy(&three, &g).unwrap().len(), 3);
        let apart = [two[0].clone(), ac(2, p + Vec3::new(10.0, 0.0, 0.0), Vec3::zeros(), None)];
        assert!(check_occupancy(&apart, &g).unwrap().is_empty());
        let out = [ac(4, Vec3::new(-1.0, 0.0, 0.0), Vec3::zeros(), None)];
        assert_eq!(check_occupancy(&out, &g), Err(RuleError::OutOfBounds(AircraftId(4))));
    }

    #[test]
    fn speed_band() {
        let cs = [east(1, 10, 0)];
        let at = |speed| [ac(1, cell_center(2, 0), Vec3::new(speed, 0.0, 0.0), Some(1))];
        assert!(check_speed(&at(15.0), &cs[..], 0.1).unwrap().is_empty());
        let v = check_speed(&at(18.0), &cs[..], 0.1).unwrap();
        assert_eq!(v[0].measured, Some(18.0));
        match v[0].threshold {
            Some(Threshold::Band([lo, hi])) => {
                assert!((lo - 13.5).abs() < 1e-12 && (hi - 16.5).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        let free = [ac(1, cell_center(2, 0), Vec3::new(40.0, 0.0, 0.0), None)];
        assert!(check_speed(&free, &cs[..], 0.1).unwrap().is_empty());
        let lost = [ac(1, cell_center(2, 0), Vec3::zeros(), Some(9))];
        assert!(matches!(check_speed(&lost, &cs[..], 0.1), Err(RuleError::UnknownCorridor { .. })));
    }

    #[test]
    fn direction_sign() {
        let g = grid();
        let cs = [east(1, 10, 0)];
        let at = |v: Vec3| [ac(1, cell_center(4, 0), v, Some(1))];
        assert!(check_direction(&at(Vec3::new(15.0, 0.0, 0.0)), &cs[..], &g).unwrap().is_empty());
        assert_eq!(check_direction(&at(Vec3::new(-15.0, 0.0, 0.0)), &cs[..], &g).unwrap().len(), 1);
        assert!(check_direction(&at(Vec3::new(0.0, 15.0, 0.0)), &cs[..], &g).unwrap().is_empty());
    }

    #[test]
    fn separation_gap() {
        let g = grid();
        let cs = [east(1, 10, 0), east(2, 10, 1)];
        let v = Vec3::new(15.0, 0.0, 0.0);
        let three_apart = [ac(1, cell_center(2, 0), v, Some(1)), ac(2, cell_center(5, 0), v, Some(1))];
        assert!(check_separation(&three_apart, &cs[..], &g, 2).unwrap().is_empty());
        let adjacent = [ac(1, cell_center(2, 0), v, Some(1)), ac(2, cell_center(3, 0), v, Some(1))];
        let out = check_separation(&adjacent, &cs[..], &g, 2).unwrap();
        assert_eq!(out[0].measured, Some(1.0));
        assert_eq!(out[0].threshold, Some(Threshold::Value(2.0)));
        let split = [ac(1, cell_center(2, 0), v, Some(1)), ac(2, cell_center(3, 1), v, Some(2))];
        assert!(check_separation(&split, &cs[..], &g, 2).unwrap().is_empty());
    }

    #[test]
    fn geofence_and_landing() {
        let zones = ZoneSet::new(
            vec![Zone {
                kind: ZoneKind::NoFly,
                shape: ZoneShape::Cylinder(Cylinder { center: [0.0, 0.0], radius_m: 5000.0, z_range: [0.0, 3000.0] }),
            }],
            vec![Cylinder { center: [9000.0, 0.0], radius_m: 50.0, z_range: [0.0, 30.0] }],
        )
        .unwrap();
        let low = [ac(1, Vec3::new(8000.0, 0.0, 29.0), Vec3::zeros(), None)];
        assert_eq!(check_geofence(&low, &zones, 30.0)[0].rule, Rule::BelowMinAltitude);
        let airport = [ac(1, Vec3::new(4000.0, 0.0, 2500.0), Vec3::zeros(), None)];
        let v = check_geofence(&airport, &zones, 30.0);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::GeofenceIntrusion);
        let landed = [ac(1, Vec3::new(9000.0, 0.0, 0.0), Vec3::zeros(), None)];
        assert!(check_geofence(&landed, &zones, 30.0).is_empty());
    }

    fn crossing() -> (Vec<Corridor>, Vec<Intersection>) {
        let g = grid();
        let z = ZoneSet::default();
        let h = build_corridor(
            CorridorId(1),
            (0..9).map(|i| CellIndex::new(1, i, 4, 3)).collect(),
            CorridorKind::Horizontal,
            15.0,
            &g,
            &z,
        )
        .unwrap();
        let v = build_corridor(
            CorridorId(2),
            (0..7).map(|k| CellIndex::new(1, 4, 4, k)).collect(),
            CorridorKind::Vertical,
            5.0,
            &g,
            &z,
        )
        .unwrap();
        let e = build_corridor(
            CorridorId(3),
            (0..7).rev().map(|k| CellIndex::new(1, 4, 4, k)).collect(),
            CorridorKind::Emergency,
            20.0,
            &g,
            &z,
        )
        .unwrap();
        let cs = vec![h, v, e];
        let xs = find_intersections(&cs, &g);
        (cs, xs)
    }

    fn at_cell(id: u32, c: CellIndex, corridor: u32) -> AircraftState {
        ac(id, grid().cell_center(c).unwrap(), Vec3::zeros(), Some(corridor))
    }

    #[test]
    fn vertical_priority() {
        let g = grid();
        let (cs, xs) = crossing();
        let xs: Vec<_> = xs.into_iter().filter(|x| (x.corridor_a, x.corridor_b) == (CorridorId(1), CorridorId(2))).collect();
        let states = [at_cell(1, CellIndex::new(1, 3, 4, 3), 1), at_cell(2, CellIndex::new(1, 4, 4, 3), 2)];
        let v = check_intersection_priority(&states, &xs, &cs[..], &g).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].aircraft, vec![AircraftId(1), AircraftId(2)]);
        // Both in buffer cells, the vertical aircraft past the crossing.
        let states = [at_cell(1, CellIndex::new(1, 3, 4, 3), 1), at_cell(2, CellIndex::new(1, 4, 4, 4), 2)];
        assert!(check_intersection_priority(&states, &xs, &cs[..], &g).unwrap().is_empty());
    }

    #[test]
    fn emergency_over_vertical() {
        let g = grid();
        let (cs, xs) = crossing();
        let xs: Vec<_> = xs.into_iter().filter(|x| (x.corridor_a, x.corridor_b) == (CorridorId(2), CorridorId(3))).collect();
        assert_eq!(xs[0].priority, CorridorId(3));
        let states = [at_cell(7, CellIndex::new(1, 4, 4, 2), 2), at_cell(8, CellIndex::new(1, 4, 4, 3), 3)];
        let v = check_intersection_priority(&states, &xs, &cs[..], &g).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].aircraft[0], AircraftId(7));
    }

    #[test]
    fn empty_snapshot() {
        let g = grid();
        let (cs, xs) = crossing();
        let v = check_all(&[], &g, &cs[..], &xs, &ZoneSet::default(), &RuleParams::default()).unwrap();
        assert!(v.is_empty());
    }
}
