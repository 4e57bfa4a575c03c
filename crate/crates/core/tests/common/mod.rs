#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use skyway_core::avoidance::Trajectory;
use skyway_core::corridor::{build_corridor, Corridor, CorridorGraph, CorridorId, CorridorKind};
use skyway_core::envelope::{AircraftClass, AircraftId, AircraftState, DualEnvelope, EnvelopeShape};
use skyway_core::geometry::{Aabb, Vec3};
use skyway_core::grid::{CellIndex, GridSpec, ZoneSet};
use skyway_core::link::LinkMode;

pub fn vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

/// `|dp + t·dv|` minimized by sampling 10⁴ + 1 instants, then narrowing the
/// best bracket by ternary search on the squared distance.
pub fn sampled_cpa(dp: &Vec3, dv: &Vec3, horizon: f64) -> (f64, f64) {
    let f = |t: f64| (dp + dv * t).norm_squared();
    let steps = 10_000;
    let h = horizon / steps as f64;
    let k = (0..=steps).min_by(|a, b| f(*a as f64 * h).total_cmp(&f(*b as f64 * h))).unwrap();
    let (mut lo, mut hi) = (((k as f64) - 1.0).max(0.0) * h, ((k as f64) + 1.0).min(steps as f64) * h);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    (t, f(t).sqrt())
}

pub fn arb_shape(rng: &mut ChaCha8Rng) -> EnvelopeShape {
    match rng.random_range(0..3) {
        0 => EnvelopeShape::Sphere { radius: rng.random_range(0.5..4.0) },
        1 => EnvelopeShape::Ellipsoid { a: rng.random_range(0.5..4.0), b: rng.random_range(0.5..4.0), c: rng.random_range(0.3..2.0) },
        _ => EnvelopeShape::Cuboid { hx: rng.random_range(0.5..3.0), hy: rng.random_range(0.5..3.0), hz: rng.random_range(0.2..1.5) },
    }
}

pub fn aircraft(id: u32, p: Vec3, v: Vec3, shape: EnvelopeShape, margin: f64) -> AircraftState {
    AircraftState::new(AircraftId(id), AircraftClass::RotaryWing, p, v, DualEnvelope::new(shape, margin).unwrap())
}

/// Range and rate in linear units with the km/MHz path-loss constant.
pub fn spreadsheet(mode: &LinkMode, distance_km: f64) -> (f64, f64) {
    let p_tx_mw = mode.tx_power_w * 1000.0;
    let loss_const = 10f64.powf(32.44 / 10.0);
    let sens_mw = 10f64.powf(mode.sensitivity_dbm / 10.0);
    let range = (p_tx_mw / (sens_mw * loss_const * mode.frequency_mhz.powi(2))).sqrt();
    let p_rx_mw = p_tx_mw / (loss_const * mode.frequency_mhz.powi(2) * distance_km.powi(2));
    let noise_mw = 10f64.powf(-17.4) * mode.bandwidth_mhz * 1e6 * 10f64.powf(mode.noise_figure_db / 10.0);
    let rate = if p_rx_mw < sens_mw { 0.0 } else { mode.bandwidth_mhz * 1e6 * (1.0 + p_rx_mw / noise_mw).log2() };
    (range, rate)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || a == b
}

/// Probability that `N(m, s²I)` in the plane lands inside the disc of radius
/// `r` about the origin, by composite Simpson quadrature in polar coordinates.
pub fn disc_probability(miss: f64, s2: f64, r: f64) -> f64 {
    let simpson = |n: usize, a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let density = |x: f64, y: f64| (-((x - miss).powi(2) + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2);
    simpson(2000, 0.0, r, &|rho| {
        rho * simpson(2000, 0.0, 2.0 * std::f64::consts::PI, &|th| density(rho * th.cos(), rho * th.sin()))
    })
}

pub fn miss_pair(miss: f64) -> (Trajectory, Trajectory) {
    // Head-on along x at 10 m/s each, passing 10 m apart in y; 0.01 s steps
    // keep the per-step relative displacement at 0.2 m, and the 20 s track
    // puts the closest approach mid-track.
    let a = Trajectory::straight(Vec3::new(-100.0, 0.0, 300.0), Vec3::new(10.0, 0.0, 0.0), 0.0, 0.01, 2001, 2.0);
    let b = Trajectory::straight(Vec3::new(100.0, miss, 300.0), Vec3::new(-10.0, 0.0, 0.0), 0.0, 0.01, 2001, 2.0);
    (a, b)
}

pub fn case_grid() -> GridSpec {
    GridSpec::new(Aabb::new(Vec3::zeros(), Vec3::new(1000.0, 1000.0, 400.0)), vec![0.0, 120.0, 300.0, 400.0], 10.0).unwrap()
}

/// Straight runs on an 8×8 patch of one layer, so corridors cross and touch often.
pub fn random_corridors(rng: &mut ChaCha8Rng, g: &GridSpec, n: usize) -> Vec<Corridor> {
    let speeds = [5.0, 10.0, 15.0, 20.0];
    (0..n)
        .map(|id| {
            let len = rng.random_range(2..=6u32);
            let fixed = rng.random_range(0..8u32);
            let start = rng.random_range(0..=8 - len);
            let k = rng.random_range(0..2u32);
            let along_i = rng.random_bool(0.5);
            let mut cells: Vec<CellIndex> = (start..start + len)
                .map(|s| if along_i { CellIndex::new(1, s, fixed, k) } else { CellIndex::new(1, fixed, s, k) })
                .collect();
            if rng.random_bool(0.5) {
                cells.reverse();
            }
            let speed = speeds[rng.random_range(0..speeds.len())];
            build_corridor(CorridorId(id as u32 + 1), cells, CorridorKind::Horizontal, speed, g, &ZoneSet::default()).unwrap()
        })
        .collect()
}

/// Minimum cost over every simple path, found by exhaustive enumeration.
pub fn brute_force(graph: &CorridorGraph, start: CorridorId, goal: CorridorId, penalty: f64) -> Option<(f64, Vec<CorridorId>)> {
    fn walk(
        graph: &CorridorGraph,
        path: &mut Vec<CorridorId>,
        goal: CorridorId,
        penalty: f64,
        best: &mut Option<(f64, Vec<CorridorId>)>,
    ) {
        let here = *path.last().unwrap();
        if here == goal {
            let cost: f64 = path.iter().map(|c| graph.traversal_time_s(*c).unwrap()).sum::<f64>()
                + penalty * (path.len() - 1) as f64;
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        let next: Vec<CorridorId> = graph.transfers_from(here).iter().map(|t| t.to).collect();
        for n in next {
            if !path.contains(&n) {
                path.push(n);
                walk(graph, path, goal, penalty, best);
                path.pop();
            }
        }
    }
    let mut best = None;
    walk(graph, &mut vec![start], goal, penalty, &mut best);
    best
}
