//! One-way corridors over grid cells, the four-loop high-speed ring,
//! corridor intersections and the corridor transition graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{horizontal_distance, wrap_pi, Point3, Vec3};
use crate::grid::{CellIndex, GridError, GridSpec, ZoneKind, ZoneSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CorridorId(pub u32);

impl std::fmt::Display for CorridorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorridorKind {
    Horizontal,
    Vertical,
    HighSpeed,
    Emergency,
}

impl CorridorKind {
    /// Right-of-way rank: Emergency > Vertical > Horizontal = HighSpeed.
    pub fn priority_rank(self) -> u8 {
        match self {
            CorridorKind::Emergency => 2,
            CorridorKind::Vertical => 1,
            CorridorKind::Horizontal | CorridorKind::HighSpeed => 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorridorError {
    #[error("corridor {0} has no cells")]
    EmptyPath(CorridorId),
    #[error("corridor {id}: cells {at} and {next} are not face neighbors", next = at + 1)]
    Discontiguous { id: CorridorId, at: usize },
    #[error("corridor {id}: cell {cell} repeats")]
    RepeatedCell { id: CorridorId, cell: CellIndex },
    #[error("corridor {id}: cell {cell} overlaps a no-fly zone")]
    RestrictedOverlap { id: CorridorId, cell: CellIndex },
    #[error("corridor {id}: speed must be positive, got {speed}")]
    InvalidSpeed { id: CorridorId, speed: f64 },
    #[error("corridor {id}: {source}")]
    Grid { id: CorridorId, source: GridError },
    #[error("ring radii must be four strictly ascending values each above the cell size")]
    RadiiNotAscending,
    #[error("ring geometry does not fit inside the grid bounds")]
    OutOfBounds,
    #[error("ring loops at radii {0} and {1} share cells")]
    RingOverlap(f64, f64),
    #[error("duplicate corridor id {0}")]
    DuplicateId(CorridorId),
    #[error("unknown corridor {0}")]
    UnknownCorridor(CorridorId),
    #[error("no route from {from} to {to}")]
    NoRoute { from: CorridorId, to: CorridorId },
}

/// An ordered, one-way run of cells from entrance to exit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corridor {
    id: CorridorId,
    kind: CorridorKind,
    cells: Vec<CellIndex>,
    speed_mps: f64,
    width_cells: u32,
    height_cells: u32,
    #[serde(skip)]
    index: HashMap<CellIndex, usize>,
}

/// Validates `cells` and builds a corridor with a 1×1 cross-section.
pub fn build_corridor(
    id: CorridorId,
    cells: Vec<CellIndex>,
    kind: CorridorKind,
    speed_mps: f64,
    spec: &GridSpec,
    zones: &ZoneSet,
) -> Result<Corridor, CorridorError> {
    if cells.is_empty() {
        return Err(CorridorError::EmptyPath(id));
    }
    if !(speed_mps.is_finite() && speed_mps > 0.0) {
        return Err(CorridorError::InvalidSpeed { id, speed: speed_mps });
    }
    let mut index = HashMap::with_capacity(cells.len());
    for (n, &c) in cells.iter().enumerate() {
        let center = spec.cell_center(c).map_err(|source| CorridorError::Grid { id, source })?;
        if index.insert(c, n).is_some() {
            return Err(CorridorError::RepeatedCell { id, cell: c });
        }
        if n > 0 && !spec.are_neighbors(cells[n - 1], c) {
            return Err(CorridorError::Discontiguous { id, at: n - 1 });
        }
        if zones.is_restricted(&center) == Some(ZoneKind::NoFly) {
            return Err(CorridorError::RestrictedOverlap { id, cell: c });
        }
    }
    Ok(Corridor { id, kind, cells, speed_mps, width_cells: 1, height_cells: 1, index })
}

impl Corridor {
    pub fn with_cross_section(mut self, width_cells: u32, height_cells: u32) -> Self {
        self.width_cells = width_cells.max(1);
        self.height_cells = height_cells.max(1);
        self
    }

    pub fn id(&self) -> CorridorId {
        self.id
    }

    pub fn kind(&self) -> CorridorKind {
        self.kind
    }

    pub fn cells(&self) -> &[CellIndex] {
        &self.cells
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn width_cells(&self) -> u32 {
        self.width_cells
    }

    pub fn height_cells(&self) -> u32 {
        self.height_cells
    }

    pub fn entrance(&self) -> CellIndex {
        self.cells[0]
    }

    pub fn exit(&self) -> CellIndex {
        *self.cells.last().expect("corridor is non-empty")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: &CellIndex) -> bool {
        self.index.contains_key(c)
    }

    pub fn position_of(&self, c: &CellIndex) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Closed loops (rings) have their exit adjacent to their entrance.
    pub fn is_closed(&self, spec: &GridSpec) -> bool {
        self.cells.len() >= 4 && spec.are_neighbors(self.exit(), self.entrance())
    }

    pub fn traversal_time_s(&self, cell_size: f64) -> f64 {
        self.cells.len() as f64 * cell_size / self.speed_mps
    }

    /// Same cells in the opposite order. The result is a different corridor.
    pub fn reversed(&self, id: CorridorId) -> Corridor {
        let cells: Vec<_> = self.cells.iter().rev().copied().collect();
        let index = cells.iter().enumerate().map(|(n, c)| (*c, n)).collect();
        Corridor { id, cells, index, ..self.clone() }
    }

    /// Index of the corridor cell containing `p`, or of the nearest cell
    /// center when `p` is off the corridor.
    pub fn nearest_index(&self, p: &Point3, spec: &GridSpec) -> usize {
        if let Some(n) = spec.point_to_cell(p).ok().and_then(|c| self.position_of(&c)) {
            return n;
        }
        let mut best = (f64::INFINITY, 0);
        for (n, c) in self.cells.iter().enumerate() {
            let d = (spec.cell_center(*c).expect("validated cell") - p).norm_squared();
            if d < best.0 {
                best = (d, n);
            }
        }
        best.1
    }

    /// Unit direction of travel at cell `n`: toward the next cell, or from the
    /// previous one at the exit. Single-cell corridors have no tangent.
    pub fn tangent_at(&self, n: usize, spec: &GridSpec) -> Option<Vec3> {
        let center = |c: CellIndex| spec.cell_center(c).expect("validated cell");
        let (a, b) = if n + 1 < self.cells.len() {
            (self.cells[n], self.cells[n + 1])
        } else if self.is_closed(spec) {
            (self.cells[n], self.cells[0])
        } else if n > 0 {
            (self.cells[n - 1], self.cells[n])
        } else {
            return None;
        };
        (center(b) - center(a)).try_normalize(1e-12)
    }

    /// Along-corridor distance in cells, wrapping around closed loops.
    pub fn cell_gap(&self, a: usize, b: usize, spec: &GridSpec) -> usize {
        let d = a.abs_diff(b);
        if self.is_closed(spec) {
            d.min(self.cells.len() - d)
        } else {
            d
        }
    }
}

/// Expands cell waypoints into a contiguous face-connected path, stepping
/// along east, then north, then vertically between consecutive waypoints.
pub fn expand_waypoints(waypoints: &[CellIndex], spec: &GridSpec) -> Result<Vec<CellIndex>, GridError> {
    let mut out: Vec<CellIndex> = Vec::new();
    for &w in waypoints {
        if !spec.is_valid(w) {
            return Err(GridError::InvalidIndex(w));
        }
        let Some(&start) = out.last() else {
            out.push(w);
            continue;
        };
        let mut cur = start;
        while cur != w {
            cur = if cur.i != w.i {
                CellIndex { i: if cur.i < w.i { cur.i + 1 } else { cur.i - 1 }, ..cur }
            } else if cur.j != w.j {
                CellIndex { j: if cur.j < w.j { cur.j + 1 } else { cur.j - 1 }, ..cur }
            } else if (cur.layer, cur.k) < (w.layer, w.k) {
                step_up(cur, spec)
            } else {
                step_down(cur, spec)
            };
            out.push(cur);
        }
    }
    Ok(out)
}

fn step_up(c: CellIndex, spec: &GridSpec) -> CellIndex {
    let nk = spec.layer_height_cells(c.layer).expect("valid layer");
    if c.k + 1 < nk {
        CellIndex { k: c.k + 1, ..c }
    } else {
        CellIndex { layer: c.layer + 1, k: 0, ..c }
    }
}

fn step_down(c: CellIndex, spec: &GridSpec) -> CellIndex {
    if c.k > 0 {
        CellIndex { k: c.k - 1, ..c }
    } else {
        let below = c.layer - 1;
        CellIndex { layer: below, k: spec.layer_height_cells(below).expect("valid layer") - 1, ..c }
    }
}

/// Four concentric one-way loops around a central vertical emergency corridor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighSpeedRing {
    pub center: Point3,
    pub loop_radii: [f64; 4],
    pub band: [f64; 2],
    pub loop_ids: [CorridorId; 4],
    pub emergency_corridor_id: CorridorId,
}

#[derive(Debug, Clone)]
pub struct RingBuild {
    pub loops: Vec<Corridor>,
    pub emergency: Corridor,
    pub ring: HighSpeedRing,
}

/// Builds the high-speed ring. Loops take ids `first_id..first_id+4` (innermost
/// first) and the emergency corridor takes `first_id+4`. Loops lie on the cell
/// level containing the middle of `band`; the innermost loop runs
/// counter-clockwise and rotation alternates outward.
pub fn build_high_speed_ring(
    first_id: CorridorId,
    center: Point3,
    radii: [f64; 4],
    band: [f64; 2],
    speed_mps: f64,
    spec: &GridSpec,
    zones: &ZoneSet,
) -> Result<RingBuild, CorridorError> {
    let cs = spec.cell_size();
    if radii[0] <= cs || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CorridorError::RadiiNotAscending);
    }
    let b = spec.bounds();
    let reach = radii[3] + cs;
    let fits = center.x - reach >= b.min.x
        && center.x + reach <= b.max.x
        && center.y - reach >= b.min.y
        && center.y + reach <= b.max.y
        && band[0] >= b.min.z
        && band[1] <= b.max.z
        && band[0] < band[1];
    if !fits {
        return Err(CorridorError::OutOfBounds);
    }
    let mid = Vec3::new(center.x, center.y, 0.5 * (band[0] + band[1]));
    let level = spec.point_to_cell(&mid).map_err(|_| CorridorError::OutOfBounds)?;
    let band_levels = {
        let lo = spec.point_to_cell(&Vec3::new(center.x, center.y, band[0])).map_err(|_| CorridorError::OutOfBounds)?;
        let hi = spec.point_to_cell(&Vec3::new(center.x, center.y, band[1])).map_err(|_| CorridorError::OutOfBounds)?;
        expand_waypoints(&[lo, hi], spec).map_err(|_| CorridorError::OutOfBounds)?
    };

    let mut loops = Vec::with_capacity(4);
    let mut seen: HashMap<CellIndex, usize> = HashMap::new();
    for (n, &r) in radii.iter().enumerate() {
        let mut cells = trace_ring(spec, level, &center, r).ok_or(CorridorError::OutOfBounds)?;
        if n % 2 == 1 {
            cells[1..].reverse();
        }
        for c in &cells {
            if let Some(prev) = seen.insert(*c, n) {
                return Err(CorridorError::RingOverlap(radii[prev], r));
            }
        }
        let id = CorridorId(first_id.0 + n as u32);
        let corridor = build_corridor(id, cells, CorridorKind::HighSpeed, speed_mps, spec, zones)?
            .with_cross_section(1, band_levels.len() as u32);
        loops.push(corridor);
    }

    let emergency_id = CorridorId(first_id.0 + 4);
    for c in &band_levels {
        let cc = spec.cell_center(*c).expect("valid");
        if horizontal_distance(&cc, &center) >= radii[0] {
            return Err(CorridorError::OutOfBounds);
        }
    }
    let emergency = build_corridor(emergency_id, band_levels, CorridorKind::Emergency, speed_mps, spec, zones)?;
    let ring = HighSpeedRing {
        center,
        loop_radii: radii,
        band,
        loop_ids: [0, 1, 2, 3].map(|n| CorridorId(first_id.0 + n)),
        emergency_corridor_id: emergency_id,
    };
    Ok(RingBuild { loops, emergency, ring })
}

/// Traces a face-connected counter-clockwise ring of cells hugging the circle
/// of radius `r` on the level of `level`.
fn trace_ring(spec: &GridSpec, level: CellIndex, center: &Point3, r: f64) -> Option<Vec<CellIndex>> {
    let start = spec.point_to_cell(&Vec3::new(center.x + r, center.y, spec.cell_center(level).ok()?.z)).ok()?;
    let start = CellIndex { layer: level.layer, k: level.k, ..start };
    let cc = |c: CellIndex| spec.cell_center(c).expect("valid");
    let angle = |p: Point3| (p.y - center.y).atan2(p.x - center.x);
    let deviation = |c: CellIndex| (horizontal_distance(&cc(c), center) - r).abs();

    let mut path = vec![start];
    let mut visited: BTreeSet<CellIndex> = [start].into();
    let mut travelled = 0.0;
    let mut cur = start;
    let limit = 16 * (spec.nx() + spec.ny()) as usize + 64;
    for _ in 0..limit {
        let p = cc(cur);
        let theta = angle(p);
        let tangent = Vec3::new(-theta.sin(), theta.cos(), 0.0);
        let horizontal: Vec<CellIndex> = spec
            .cell_neighbors(cur)
            .ok()?
            .into_iter()
            .filter(|n| n.layer == cur.layer && n.k == cur.k)
            .collect();
        if travelled > 1.5 * std::f64::consts::PI && horizontal.contains(&start) {
            return Some(path);
        }
        let next = horizontal
            .into_iter()
            .filter(|n| !visited.contains(n))
            .map(|n| (n, (cc(n) - p).dot(&tangent)))
            .filter(|(_, along)| *along > 1e-9)
            .min_by(|a, b| deviation(a.0).total_cmp(&deviation(b.0)).then(b.1.total_cmp(&a.1)))?
            .0;
        travelled += wrap_pi(angle(cc(next)) - theta);
        visited.insert(next);
        path.push(next);
        cur = next;
    }
    None
}

/// Cells shared by two corridors, the buffer cells around them, and which
/// corridor has right of way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Intersection {
    pub corridor_a: CorridorId,
    pub corridor_b: CorridorId,
    pub shared_cells: BTreeSet<CellIndex>,
    pub buffer_cells: BTreeSet<CellIndex>,
    pub priority: CorridorId,
}

/// One intersection per unordered corridor pair with shared cells, ordered by id pair.
pub fn find_intersections(corridors: &[Corridor], spec: &GridSpec) -> Vec<Intersection> {
    let mut sorted: Vec<&Corridor> = corridors.iter().collect();
    sorted.sort_by_key(|c| c.id);
    let mut out = Vec::new();
    for (n, a) in sorted.iter().enumerate() {
        for b in &sorted[n + 1..] {
            let shared: BTreeSet<CellIndex> = a.cells.iter().filter(|c| b.contains(c)).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let buffer = shared
                .iter()
                .flat_map(|c| spec.cell_neighbors(*c).unwrap_or_default())
                .filter(|c| !shared.contains(c) && (a.contains(c) || b.contains(c)))
                .collect();
            let priority = match a.kind.priority_rank().cmp(&b.kind.priority_rank()) {
                std::cmp::Ordering::Less => b.id,
                _ => a.id,
            };
            out.push(Intersection {
                corridor_a: a.id,
                corridor_b: b.id,
                shared_cells: shared,
                buffer_cells: buffer,
                priority,
            });
        }
    }
    out
}

/// Directed transfer from one corridor to another through a pair of
/// face-neighbor cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Transfer {
    pub from: CorridorId,
    pub to: CorridorId,
    pub from_cell: CellIndex,
    pub to_cell: CellIndex,
}

/// Corridors as nodes and legal transfers as edges.
#[derive(Debug, Clone)]
pub struct CorridorGraph {
    corridors: BTreeMap<CorridorId, Corridor>,
    edges: BTreeMap<CorridorId, Vec<Transfer>>,
    cell_size: f64,
}

impl CorridorGraph {
    /// A transfer `A → B` exists when some cell of `A` is a face neighbor of a
    /// cell of `B`; the transfer uses the latest such cell of `A` and the
    /// earliest matching cell of `B`.
    pub fn build(corridors: Vec<Corridor>, spec: &GridSpec) -> Result<Self, CorridorError> {
        let mut map = BTreeMap::new();
        for c in corridors {
            let id = c.id;
            if map.insert(id, c).is_some() {
                return Err(CorridorError::DuplicateId(id));
            }
        }
        let mut edges: BTreeMap<CorridorId, Vec<Transfer>> = BTreeMap::new();
        for a in map.values() {
            let neighbor_lists: Vec<Vec<CellIndex>> =
                a.cells.iter().map(|c| spec.cell_neighbors(*c).unwrap_or_default()).collect();
            let mut out = Vec::new();
            for b in map.values().filter(|b| b.id != a.id) {
                let found = (0..a.cells.len()).rev().find_map(|n| {
                    neighbor_lists[n]
                        .iter()
                        .filter_map(|x| b.position_of(x).map(|m| (m, *x)))
                        .min_by_key(|(m, _)| *m)
                        .map(|(_, to_cell)| Transfer { from: a.id, to: b.id, from_cell: a.cells[n], to_cell })
                });
                out.extend(found);
            }
            edges.insert(a.id, out);
        }
        Ok(Self { corridors: map, edges, cell_size: spec.cell_size() })
    }

    pub fn corridor(&self, id: CorridorId) -> Option<&Corridor> {
        self.corridors.get(&id)
    }

    pub fn corridors(&self) -> impl Iterator<Item = &Corridor> {
        self.corridors.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = CorridorId> + '_ {
        self.corridors.keys().copied()
    }

    pub fn transfers_from(&self, id: CorridorId) -> &[Transfer] {
        self.edges.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn transfer(&self, from: CorridorId, to: CorridorId) -> Option<&Transfer> {
        self.transfers_from(from).iter().find(|t| t.to == to)
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn traversal_time_s(&self, id: CorridorId) -> Option<f64> {
        self.corridor(id).map(|c| c.traversal_time_s(self.cell_size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteWeights {
    #[serde(default = "default_transfer_penalty")]
    pub transfer_penalty_s: f64,
}

fn default_transfer_penalty() -> f64 {
    5.0
}

impl Default for RouteWeights {
    fn default() -> Self {
        Self { transfer_penalty_s: default_transfer_penalty() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    pub corridors: Vec<CorridorId>,
    pub cost_s: f64,
}

impl Route {
    pub fn transfers(&self) -> usize {
        self.corridors.len().saturating_sub(1)
    }
}

/// Cost comparison with a relative tolerance, falling back to the
/// lexicographic order of the id sequences on ties.
pub(crate) fn better(cost: f64, path: &[CorridorId], best_cost: f64, best_path: &[CorridorId]) -> bool {
    let tol = 1e-9 * cost.abs().max(best_cost.abs()).max(1.0);
    if cost < best_cost - tol {
        true
    } else if cost > best_cost + tol {
        false
    } else {
        path < best_path
    }
}

/// Minimum-cost corridor sequence where each corridor costs its full traversal
/// time and each transfer adds the fixed penalty.
pub fn route(
    graph: &CorridorGraph,
    start: CorridorId,
    goal: CorridorId,
    weights: &RouteWeights,
) -> Result<Route, CorridorError> {
    route_with(graph, start, goal, weights.transfer_penalty_s, |c| Some(c.traversal_time_s(graph.cell_size)))
}

/// Like [`route`], but with a caller-supplied node cost; `None` excludes the
/// corridor. The start corridor's cost is always paid.
pub fn route_with<F>(
    graph: &CorridorGraph,
    start: CorridorId,
    goal: CorridorId,
    transfer_penalty_s: f64,
    node_cost: F,
) -> Result<Route, CorridorError>
where
    F: Fn(&Corridor) -> Option<f64>,
{
    let start_c = graph.corridor(start).ok_or(CorridorError::UnknownCorridor(start))?;
    if graph.corridor(goal).is_none() {
        return Err(CorridorError::UnknownCorridor(goal));
    }
    let no_route = CorridorError::NoRoute { from: start, to: goal };
    let start_cost = node_cost(start_c).ok_or(no_route.clone())?;

    let mut labels: BTreeMap<CorridorId, (f64, Vec<CorridorId>)> = BTreeMap::new();
    let mut settled: BTreeSet<CorridorId> = BTreeSet::new();
    labels.insert(start, (start_cost, vec![start]));
    loop {
        let next = labels
            .iter()
            .filter(|(id, _)| !settled.contains(id))
            .min_by(|a, b| {
                if better(a.1 .0, &a.1 .1, b.1 .0, &b.1 .1) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
            .map(|(id, l)| (*id, l.clone()));
        let Some((id, (cost, path))) = next else {
            return Err(no_route);
        };
        if id == goal {
            return Ok(Route { corridors: path, cost_s: cost });
        }
        settled.insert(id);
        for t in graph.transfers_from(id) {
            if settled.contains(&t.to) || path.contains(&t.to) {
                continue;
            }
            let Some(c) = graph.corridor(t.to).and_then(&node_cost) else {
                continue;
            };
            let cand_cost = cost + transfer_penalty_s + c;
            let mut cand_path = path.clone();
            cand_path.push(t.to);
            let replace = match labels.get(&t.to) {
                Some((bc, bp)) => better(cand_cost, &cand_path, *bc, bp),
                None => true,
            };
            if replace {
                labels.insert(t.to, (cand_cost, cand_path));
            }
        }
    }
}
