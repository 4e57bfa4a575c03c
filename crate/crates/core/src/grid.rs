//! Hierarchical airspace grid: coarse vertical layers split into fine cubic cells,
//! plus restricted volumes (geofenced zones and landing fields).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Point3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("point ({x}, {y}, {z}) lies outside the grid bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },
    #[error("cell {0} is not valid for this grid")]
    InvalidIndex(CellIndex),
    #[error("invalid grid: {0}")]
    InvalidSpec(String),
    #[error("invalid zone #{index}: {reason}")]
    InvalidZone { index: usize, reason: String },
}

/// Address of a fine cell. `k` counts cells upward from the bottom of `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct CellIndex {
    pub layer: u32,
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl CellIndex {
    pub const fn new(layer: u32, i: u32, j: u32, k: u32) -> Self {
        Self { layer, i, j, k }
    }
}

impl From<[u32; 4]> for CellIndex {
    fn from(a: [u32; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<CellIndex> for [u32; 4] {
    fn from(c: CellIndex) -> Self {
        [c.layer, c.i, c.j, c.k]
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}({},{},{})", self.layer, self.i, self.j, self.k)
    }
}

/// Raw, unvalidated grid description as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub layer_boundaries: Vec<f64>,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
}

fn default_cell_size() -> f64 {
    10.0
}

/// Validated grid geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct GridSpec {
    bounds: Aabb,
    layer_boundaries: Vec<f64>,
    cell_size: f64,
    nx: u32,
    ny: u32,
    layer_heights: Vec<u32>,
}

const EXTENT_TOL: f64 = 1e-9;

impl GridSpec {
    pub fn new(bounds: Aabb, layer_boundaries: Vec<f64>, cell_size: f64) -> Result<Self, GridError> {
        let bad = |msg: &str| Err(GridError::InvalidSpec(msg.to_string()));
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return bad("cell_size must be positive");
        }
        let ext = bounds.extent();
        if !(0..3).all(|a| ext[a].is_finite() && ext[a] > 0.0) {
            return bad("bounds must have positive finite extent on every axis");
        }
        if layer_boundaries.len() < 2 {
            return bad("at least two layer boundaries are required");
        }
        if layer_boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return bad("layer boundaries must be strictly ascending");
        }
        let first = layer_boundaries[0];
        let last = *layer_boundaries.last().unwrap();
        if (first - bounds.min.z).abs() > EXTENT_TOL || (last - bounds.max.z).abs() > EXTENT_TOL {
            return bad("first/last layer boundary must equal the bounds z-min/z-max");
        }
        let count = |len: f64| -> Option<u32> {
            let n = len / cell_size;
            let r = n.round();
            ((n - r).abs() <= 1e-6 * n.max(1.0) && r >= 1.0).then_some(r as u32)
        };
        let (Some(nx), Some(ny)) = (count(ext.x), count(ext.y)) else {
            return bad("horizontal extents must be exact multiples of cell_size");
        };
        let layer_heights = layer_boundaries
            .windows(2)
            .map(|w| (((w[1] - w[0]) / cell_size) - 1e-9).ceil().max(1.0) as u32)
            .collect();
        Ok(Self { bounds, layer_boundaries, cell_size, nx, ny, layer_heights })
    }

    /// Default layering: 0–120 m small UAVs, 120–300 m eVTOL, 300 m to the top as buffer.
    pub fn with_default_layers(bounds: Aabb, cell_size: f64) -> Result<Self, GridError> {
        let top = bounds.max.z;
        let mut layers = vec![bounds.min.z];
        for b in [120.0, 300.0] {
            if b > bounds.min.z && b < top {
                layers.push(b);
            }
        }
        layers.push(top);
        Self::new(bounds, layers, cell_size)
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn layer_boundaries(&self) -> &[f64] {
        &self.layer_boundaries
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn layer_count(&self) -> u32 {
        self.layer_heights.len() as u32
    }

    pub fn nx(&self) -> u32 {
        self.nx
    }

    pub fn ny(&self) -> u32 {
        self.ny
    }

    /// Number of fine cells stacked in `layer`, or `None` for a bad layer.
    pub fn layer_height_cells(&self, layer: u32) -> Option<u32> {
        self.layer_heights.get(layer as usize).copied()
    }

    pub fn is_valid(&self, c: CellIndex) -> bool {
        c.i < self.nx && c.j < self.ny && self.layer_height_cells(c.layer).is_some_and(|nk| c.k < nk)
    }

    pub fn total_cells(&self) -> u64 {
        let column: u64 = self.layer_heights.iter().map(|&h| h as u64).sum();
        column * self.nx as u64 * self.ny as u64
    }

    /// Maps a point to the unique cell whose half-open box contains it; the
    /// upper faces of the volume belong to the last cell on each axis.
    pub fn point_to_cell(&self, p: &Point3) -> Result<CellIndex, GridError> {
        if !(p.iter().all(|v| v.is_finite()) && self.bounds.contains(p)) {
            return Err(GridError::OutOfBounds { x: p.x, y: p.y, z: p.z });
        }
        let last_layer = self.layer_count() - 1;
        let layer = (0..last_layer)
            .find(|&l| p.z < self.layer_boundaries[l as usize + 1])
            .unwrap_or(last_layer);
        let axis = |v: f64, lo: f64, n: u32| (((v - lo) / self.cell_size).floor().max(0.0) as u32).min(n - 1);
        let bottom = self.layer_boundaries[layer as usize];
        Ok(CellIndex {
            layer,
            i: axis(p.x, self.bounds.min.x, self.nx),
            j: axis(p.y, self.bounds.min.y, self.ny),
            k: axis(p.z, bottom, self.layer_heights[layer as usize]),
        })
    }

    /// Closed box of a cell. The topmost cell of a layer is truncated at the
    /// layer boundary when the layer height is not a multiple of the cell size.
    pub fn cell_to_box(&self, c: CellIndex) -> Result<Aabb, GridError> {
        if !self.is_valid(c) {
            return Err(GridError::InvalidIndex(c));
        }
        let cs = self.cell_size;
        let bottom = self.layer_boundaries[c.layer as usize];
        let top = self.layer_boundaries[c.layer as usize + 1];
        let min = Vec3::new(
            self.bounds.min.x + c.i as f64 * cs,
            self.bounds.min.y + c.j as f64 * cs,
            bottom + c.k as f64 * cs,
        );
        let max = Vec3::new(min.x + cs, min.y + cs, (min.z + cs).min(top));
        Ok(Aabb::new(min, max))
    }

    pub fn cell_center(&self, c: CellIndex) -> Result<Point3, GridError> {
        self.cell_to_box(c).map(|b| b.center())
    }

    /// Face neighbors: up to four horizontal neighbors and one vertical
    /// neighbor on each side, crossing into the adjacent layer at layer edges.
    pub fn cell_neighbors(&self, c: CellIndex) -> Result<Vec<CellIndex>, GridError> {
        if !self.is_valid(c) {
            return Err(GridError::InvalidIndex(c));
        }
        let mut out = Vec::with_capacity(6);
        if c.i > 0 {
            out.push(CellIndex { i: c.i - 1, ..c });
        }
        if c.i + 1 < self.nx {
            out.push(CellIndex { i: c.i + 1, ..c });
        }
        if c.j > 0 {
            out.push(CellIndex { j: c.j - 1, ..c });
        }
        if c.j + 1 < self.ny {
            out.push(CellIndex { j: c.j + 1, ..c });
        }
        if c.k > 0 {
            out.push(CellIndex { k: c.k - 1, ..c });
        } else if c.layer > 0 {
            let below = c.layer - 1;
            out.push(CellIndex { layer: below, k: self.layer_heights[below as usize] - 1, ..c });
        }
        if c.k + 1 < self.layer_heights[c.layer as usize] {
            out.push(CellIndex { k: c.k + 1, ..c });
        } else if c.layer + 1 < self.layer_count() {
            out.push(CellIndex { layer: c.layer + 1, k: 0, ..c });
        }
        Ok(out)
    }

    pub fn are_neighbors(&self, a: CellIndex, b: CellIndex) -> bool {
        self.cell_neighbors(a).map(|n| n.contains(&b)).unwrap_or(false)
    }

    /// Iterates over every valid cell in (layer, k, j, i) order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.layer_count()).flat_map(move |layer| {
            let nk = self.layer_heights[layer as usize];
            (0..nk).flat_map(move |k| {
                (0..self.ny).flat_map(move |j| (0..self.nx).map(move |i| CellIndex { layer, i, j, k }))
            })
        })
    }
}

impl TryFrom<GridConfig> for GridSpec {
    type Error = GridError;

    fn try_from(c: GridConfig) -> Result<Self, Self::Error> {
        GridSpec::new(Aabb::new(c.min.into(), c.max.into()), c.layer_boundaries, c.cell_size_m)
    }
}

impl From<GridSpec> for GridConfig {
    fn from(s: GridSpec) -> Self {
        GridConfig {
            min: s.bounds.min.into(),
            max: s.bounds.max.into(),
            layer_boundaries: s.layer_boundaries,
            cell_size_m: s.cell_size,
        }
    }
}

/// Restriction class of a zone. Declaration order is severity order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneKind {
    Buffer,
    Sensitive,
    NoFly,
}

/// Vertical cylinder. Containment is closed on radius and z range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius_m: f64,
    pub z_range: [f64; 2],
}

impl Cylinder {
    pub fn contains(&self, p: &Point3) -> bool {
        let d = (p.x - self.center[0]).hypot(p.y - self.center[1]);
        d <= self.radius_m && p.z >= self.z_range[0] && p.z <= self.z_range[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ZoneShape {
    Cylinder(Cylinder),
    Polygon(Polygon),
}

/// Vertical extrusion of a simple polygon loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
    pub z_range: [f64; 2],
}

impl ZoneShape {
    pub fn contains(&self, p: &Point3) -> bool {
        match self {
            ZoneShape::Cylinder(c) => c.contains(p),
            ZoneShape::Polygon(Polygon { vertices, z_range }) => {
                p.z >= z_range[0] && p.z <= z_range[1] && polygon_contains(vertices, p.x, p.y)
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        let z_range = match self {
            ZoneShape::Cylinder(c) => {
                if !(c.radius_m.is_finite() && c.radius_m > 0.0) {
                    return Err("cylinder radius must be positive".into());
                }
                c.z_range
            }
            ZoneShape::Polygon(Polygon { vertices, z_range }) => {
                if vertices.len() < 3 {
                    return Err("polygon needs at least three vertices".into());
                }
                if polygon_self_intersects(vertices) {
                    return Err("polygon loop intersects itself".into());
                }
                *z_range
            }
        };
        if !(z_range[0].is_finite() && z_range[1].is_finite() && z_range[0] < z_range[1]) {
            return Err("z range must be non-empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub kind: ZoneKind,
    #[serde(flatten)]
    pub shape: ZoneShape,
}

/// All restricted volumes of a scenario plus the designated landing fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawZoneSet", into = "RawZoneSet")]
pub struct ZoneSet {
    zones: Vec<Zone>,
    landing_fields: Vec<Cylinder>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawZoneSet {
    #[serde(default)]
    zones: Vec<Zone>,
    #[serde(default)]
    landing_fields: Vec<Cylinder>,
}

impl TryFrom<RawZoneSet> for ZoneSet {
    type Error = GridError;

    fn try_from(r: RawZoneSet) -> Result<Self, Self::Error> {
        ZoneSet::new(r.zones, r.landing_fields)
    }
}

impl From<ZoneSet> for RawZoneSet {
    fn from(z: ZoneSet) -> Self {
        RawZoneSet { zones: z.zones, landing_fields: z.landing_fields }
    }
}

impl ZoneSet {
    pub fn new(zones: Vec<Zone>, landing_fields: Vec<Cylinder>) -> Result<Self, GridError> {
        for (index, z) in zones.iter().enumerate() {
            z.shape.validate().map_err(|reason| GridError::InvalidZone { index, reason })?;
        }
        for (i, c) in landing_fields.iter().enumerate() {
            ZoneShape::Cylinder(c.clone())
                .validate()
                .map_err(|reason| GridError::InvalidZone { index: zones.len() + i, reason })?;
        }
        Ok(Self { zones, landing_fields })
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn landing_fields(&self) -> &[Cylinder] {
        &self.landing_fields
    }

    /// Highest-severity zone kind containing `p`, or `None` when clear.
    pub fn is_restricted(&self, p: &Point3) -> Option<ZoneKind> {
        self.zones.iter().filter(|z| z.shape.contains(p)).map(|z| z.kind).max()
    }

    pub fn in_landing_field(&self, p: &Point3) -> bool {
        self.landing_fields.iter().any(|c| c.contains(p))
    }
}

fn on_segment(px: f64, py: f64, a: [f64; 2], b: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
    let scale = (b[0] - a[0]).abs() + (b[1] - a[1]).abs();
    cross.abs() <= 1e-9 * scale.max(1.0)
        && px >= a[0].min(b[0]) - 1e-12
        && px <= a[0].max(b[0]) + 1e-12
        && py >= a[1].min(b[1]) - 1e-12
        && py <= a[1].max(b[1]) + 1e-12
}

/// Even-odd ray casting; points on an edge count as inside.
fn polygon_contains(v: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = v.len();
    let mut inside = false;
    for idx in 0..n {
        let a = v[idx];
        let b = v[(idx + 1) % n];
        if on_segment(x, y, a, b) {
            return true;
        }
        if (a[1] > y) != (b[1] > y) {
            let xc = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x < xc {
                inside = !inside;
            }
        }
    }
    inside
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(p1[0], p1[1], q1, q2))
        || (d2 == 0.0 && on_segment(p2[0], p2[1], q1, q2))
        || (d3 == 0.0 && on_segment(q1[0], q1[1], p1, p2))
        || (d4 == 0.0 && on_segment(q2[0], q2[1], p1, p2))
}

fn polygon_self_intersects(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for a in 0..n {
        for b in (a + 1)..n {
            let adjacent = b == a + 1 || (a == 0 && b == n - 1);
            if adjacent {
                continue;
            }
            if segments_intersect(v[a], v[(a + 1) % n], v[b], v[(b + 1) % n]) {
                return true;
            }
        }
    }
    // Repeated vertices also make the loop degenerate.
    (0..n).any(|a| ((a + 1)..n).any(|b| v[a] == v[b]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_grid() -> GridSpec {
        GridSpec::new(
            Aabb::new(Vec3::zeros(), Vec3::new(1000.0, 1000.0, 400.0)),
            vec![0.0, 120.0, 300.0, 400.0],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn origin_maps_to_first_cell() {
        let g = case_grid();
        assert_eq!(g.point_to_cell(&Vec3::zeros()).unwrap(), CellIndex::new(0, 0, 0, 0));
    }

    #[test]
    fn layer_boundary_is_inclusive_below() {
        let g = case_grid();
        let c = g.point_to_cell(&Vec3::new(500.0, 500.0, 300.0)).unwrap();
        assert_eq!(c, CellIndex::new(2, 50, 50, 0));
    }

    #[test]
    fn cell_center_round_trip() {
        let g = case_grid();
        let c = CellIndex::new(1, 3, 4, 0);
        assert_eq!(g.point_to_cell(&g.cell_center(c).unwrap()).unwrap(), c);
    }

    #[test]
    fn upper_faces_belong_to_last_cell() {
        let g = case_grid();
        let c = g.point_to_cell(&Vec3::new(1000.0, 1000.0, 400.0)).unwrap();
        assert_eq!(c, CellIndex::new(2, 99, 99, 9));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let g = case_grid();
        assert!(matches!(g.point_to_cell(&Vec3::new(-0.1, 0.0, 0.0)), Err(GridError::OutOfBounds { .. })));
        assert!(g.point_to_cell(&Vec3::new(1.0, 1.0, 400.5)).is_err());
    }

    #[test]
    fn first_cell_box() {
        let g = case_grid();
        let b = g.cell_to_box(CellIndex::new(0, 0, 0, 0)).unwrap();
        assert_eq!(b.min, Vec3::zeros());
        assert_eq!(b.max, Vec3::new(10.0, 10.0, 10.0));
    }

    #[test]
    fn truncated_top_cell() {
        let g = GridSpec::new(
            Aabb::new(Vec3::zeros(), Vec3::new(100.0, 100.0, 400.0)),
            vec![0.0, 120.0, 400.0],
            50.0,
        )
        .unwrap();
        assert_eq!(g.layer_height_cells(0), Some(3));
        let b = g.cell_to_box(CellIndex::new(0, 0, 0, 2)).unwrap();
        assert_eq!((b.min.z, b.max.z), (100.0, 120.0));
        assert!(matches!(g.cell_to_box(CellIndex::new(0, 0, 0, 3)), Err(GridError::InvalidIndex(_))));
    }

    #[test]
    fn neighbor_counts() {
        let g = case_grid();
        assert_eq!(g.cell_neighbors(CellIndex::new(1, 5, 5, 5)).unwrap().len(), 6);
        assert_eq!(g.cell_neighbors(CellIndex::new(0, 0, 0, 0)).unwrap().len(), 3);
        let top_of_l0 = CellIndex::new(0, 7, 8, 11);
        let n = g.cell_neighbors(top_of_l0).unwrap();
        assert!(n.contains(&CellIndex::new(1, 7, 8, 0)));
        assert!(g.cell_neighbors(CellIndex::new(1, 7, 8, 0)).unwrap().contains(&top_of_l0));
        assert!(!n.contains(&top_of_l0));
    }

    #[test]
    fn spec_validation() {
        let b = Aabb::new(Vec3::zeros(), Vec3::new(1000.0, 1000.0, 400.0));
        assert!(GridSpec::new(b, vec![0.0, 300.0, 120.0, 400.0], 10.0).is_err());
        assert!(GridSpec::new(b, vec![0.0, 120.0, 390.0], 10.0).is_err());
        assert!(GridSpec::new(b, vec![0.0, 400.0], 30.0).is_err());
        assert!(GridSpec::new(b, vec![0.0, 400.0], 0.0).is_err());
        let d = GridSpec::with_default_layers(b, 10.0).unwrap();
        assert_eq!(d.layer_boundaries(), &[0.0, 120.0, 300.0, 400.0]);
    }

    fn cyl(kind: ZoneKind, r: f64) -> Zone {
        Zone {
            kind,
            shape: ZoneShape::Cylinder(Cylinder { center: [0.0, 0.0], radius_m: r, z_range: [0.0, 100.0] }),
        }
    }

    #[test]
    fn restriction_severity() {
        let zones = ZoneSet::new(vec![cyl(ZoneKind::NoFly, 50.0)], vec![]).unwrap();
        assert_eq!(zones.is_restricted(&Vec3::new(0.0, 0.0, 50.0)), Some(ZoneKind::NoFly));
        assert_eq!(zones.is_restricted(&Vec3::new(50.0, 0.0, 50.0)), Some(ZoneKind::NoFly));
        assert_eq!(zones.is_restricted(&Vec3::new(50.0 + 1e-9, 0.0, 50.0)), None);

        let both = ZoneSet::new(vec![cyl(ZoneKind::Buffer, 200.0), cyl(ZoneKind::NoFly, 50.0)], vec![]).unwrap();
        assert_eq!(both.is_restricted(&Vec3::new(10.0, 0.0, 50.0)), Some(ZoneKind::NoFly));
        assert_eq!(both.is_restricted(&Vec3::new(100.0, 0.0, 50.0)), Some(ZoneKind::Buffer));
    }

    #[test]
    fn polygon_zones() {
        let square = Zone {
            kind: ZoneKind::Sensitive,
            shape: ZoneShape::Polygon(Polygon {
                vertices: vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]],
                z_range: [0.0, 50.0],
            }),
        };
        let zs = ZoneSet::new(vec![square], vec![]).unwrap();
        assert_eq!(zs.is_restricted(&Vec3::new(5.0, 5.0, 10.0)), Some(ZoneKind::Sensitive));
        assert_eq!(zs.is_restricted(&Vec3::new(10.0, 5.0, 10.0)), Some(ZoneKind::Sensitive));
        assert_eq!(zs.is_restricted(&Vec3::new(15.0, 5.0, 10.0)), None);

        let bowtie = Zone {
            kind: ZoneKind::Buffer,
            shape: ZoneShape::Polygon(Polygon {
                vertices: vec![[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]],
                z_range: [0.0, 50.0],
            }),
        };
        assert!(matches!(ZoneSet::new(vec![bowtie], vec![]), Err(GridError::InvalidZone { .. })));
        assert!(ZoneSet::new(vec![cyl(ZoneKind::NoFly, 0.0)], vec![]).is_err());
    }

    #[test]
    fn zone_toml_round_trip() {
        let text = r#"
            zones = [
              { kind = "no-fly", shape = "cylinder", center = [0.0, 0.0], radius_m = 5000.0, z_range = [0.0, 400.0] },
              { kind = "buffer", shape = "polygon", vertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], z_range = [0.0, 10.0] },
            ]
        "#;
        let zs: ZoneSet = toml::from_str(text).unwrap();
        assert_eq!(zs.zones().len(), 2);
        assert_eq!(zs.zones()[0].kind, ZoneKind::NoFly);
        let bad = r#"zones = [{ kind = "no-fly", shape = "cylinder", center = [0.0, 0.0], radius_m = 5.0, z_range = [0.0, 1.0], color = "red" }]"#;
        assert!(toml::from_str::<ZoneSet>(bad).is_err());
    }
}
