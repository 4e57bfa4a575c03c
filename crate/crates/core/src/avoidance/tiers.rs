use std::collections::BTreeMap;

use serde::Serialize;

use super::{pair_conflict, predict_conflicts, AvoidanceConfig, AvoidanceError, ConflictRecord, Maneuver};
use crate::envelope::{closest_approach, AircraftId, AircraftState, ClassLimits};
use crate::geometry::{rotate_horizontal, Vec3};

/// Limits and remaining maneuver space of one aircraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManeuverContext {
    pub limits: ClassLimits,
    /// Horizontal deviation, along or across track, still available.
    pub lateral_budget_m: f64,
    pub vertical_budget_m: f64,
    /// Allowed altitude range.
    pub z_range: [f64; 2],
    /// Whether this aircraft gives way in the pair (slows down).
    pub yields: bool,
    pub dt: f64,
    pub max_heading_offset_rad: f64,
}

impl ManeuverContext {
    pub fn new(limits: ClassLimits, cfg: &AvoidanceConfig, dt: f64, z_range: [f64; 2]) -> Self {
        Self {
            limits,
            lateral_budget_m: cfg.lateral_budget_m,
            vertical_budget_m: cfg.vertical_budget_m,
            z_range,
            yields: false,
            dt,
            max_heading_offset_rad: cfg.max_heading_offset_rad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier1Branch {
    Altitude,
    Speed,
    Heading,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tier1Outcome {
    /// First tick of the maneuver, within per-tick bounds.
    pub maneuver: Maneuver,
    /// Velocity the maneuver steers toward.
    pub target_velocity: Vec3,
    pub branch: Tier1Branch,
    pub d_cpa_after: f64,
}

fn max_severity_with(own: &AircraftState, peers: &[AircraftState], cfg: &AvoidanceConfig) -> f64 {
    peers
        .iter()
        .filter(|p| p.id != own.id)
        .filter_map(|p| pair_conflict(own, p, cfg.horizon_s, cfg.alert_factor))
        .map(|r| r.severity)
        .fold(0.0, f64::max)
}

/// Smallest `p ∈ (0, max]` accepted by `ok`, assuming `ok(max)`. The result
/// always satisfies `ok`.
fn bisect_min(max: f64, tol: f64, ok: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (0.0, max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Individual resolution for `aircraft` against the other aircraft of
/// `conflict`: altitude away from the intruder when they are at different
/// heights, then slowing down when this aircraft yields, then the smallest
/// right turn that lifts the predicted miss distance above the combined outer
/// radius. A candidate must also lower this aircraft's worst severity against
/// every peer and stay within its maneuver budget.
pub fn tier1_maneuver(
    aircraft: &AircraftState,
    conflict: &ConflictRecord,
    peers: &[AircraftState],
    ctx: &ManeuverContext,
    cfg: &AvoidanceConfig,
) -> Result<Tier1Outcome, AvoidanceError> {
    if !conflict.involves(aircraft.id) {
        return Err(AvoidanceError::InvalidInput(format!("conflict does not involve {}", aircraft.id)));
    }
    let other = conflict.other(aircraft.id);
    let intruder = peers
        .iter()
        .find(|p| p.id == other)
        .ok_or_else(|| AvoidanceError::InvalidInput(format!("intruder {other} missing from peers")))?;
    let radius = aircraft.envelope.r_outer() + intruder.envelope.r_outer();
    let before = max_severity_with(aircraft, peers, cfg);
    let t_ref = conflict.t_cpa.max(ctx.dt);
    let v0 = aircraft.velocity;
    let lim = &ctx.limits;

    let d_after = |v: &Vec3| {
        closest_approach(&(intruder.position - aircraft.position), &(intruder.velocity - v), cfg.horizon_s).d_cpa
    };
    let accept = |v: &Vec3| {
        let mut moved = aircraft.clone();
        moved.set_velocity(*v);
        let after = max_severity_with(&moved, peers, cfg);
        d_after(v) > radius && (after < before || after == 0.0)
    };
    let done = |v: Vec3, branch| {
        Ok(Tier1Outcome {
            maneuver: Maneuver::toward(&v0, &v, lim, ctx.dt),
            target_velocity: v,
            branch,
            d_cpa_after: d_after(&v),
        })
    };

    let dz = intruder.position.z - aircraft.position.z;
    if dz.abs() > 1.0 && lim.max_climb_rate_mps > 0.0 {
        let dir = -dz.signum();
        let room = if dir > 0.0 { ctx.z_range[1] - aircraft.position.z } else { aircraft.position.z - ctx.z_range[0] };
        let rate_max = lim.max_climb_rate_mps.min(ctx.vertical_budget_m.min(room.max(0.0)) / t_ref);
        let with_rate = |r: f64| Vec3::new(v0.x, v0.y, dir * r);
        if rate_max > 0.0 && accept(&with_rate(rate_max)) {
            let r = bisect_min(rate_max, 1e-3 * rate_max, |r| accept(&with_rate(r)));
            return done(with_rate(r), Tier1Branch::Altitude);
        }
    }

    let h = v0.xy().norm();
    let dp = intruder.position - aircraft.position;
    let closing = -(dp.dot(&(intruder.velocity - v0))) / dp.norm().max(1e-9);
    if ctx.yields && closing > 0.0 && h > 1e-9 {
        let cut_max = (lim.max_accel_mps2 * t_ref).min(h - lim.min_speed_mps.min(h)).min(ctx.lateral_budget_m / t_ref);
        let slowed = |c: f64| Vec3::new(v0.x * (h - c) / h, v0.y * (h - c) / h, v0.z);
        if cut_max > 0.0 && accept(&slowed(cut_max)) {
            let c = bisect_min(cut_max, 1e-3 * cut_max, |c| accept(&slowed(c)));
            return done(slowed(c), Tier1Branch::Speed);
        }
    }

    if h > 1e-9 {
        let lateral_cap = (ctx.lateral_budget_m / (h * t_ref)).min(1.0).asin();
        let theta_max = ctx.max_heading_offset_rad.min(lim.max_turn_rate_rps * t_ref).min(lateral_cap);
        let turned = |a: f64| rotate_horizontal(&v0, -a);
        if theta_max > 0.0 && accept(&turned(theta_max)) {
            let a = bisect_min(theta_max, 1e-3, |a| accept(&turned(a)));
            return done(turned(a), Tier1Branch::Heading);
        }
    }
    Err(AvoidanceError::NoFeasibleManeuver(aircraft.id))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tier2Outcome {
    pub maneuvers: BTreeMap<AircraftId, Maneuver>,
    pub targets: BTreeMap<AircraftId, Vec3>,
    pub iterations: usize,
    pub max_severity: f64,
}

/// Keeps `v` inside the maneuver space of an aircraft flying `v0`, given
/// `t_ref` seconds until the conflict.
fn project(v0: &Vec3, v: &Vec3, z: f64, ctx: &ManeuverContext, t_ref: f64) -> Vec3 {
    let lim = &ctx.limits;
    let h0 = v0.xy().norm();
    let e = if h0 > 1e-9 { Vec3::new(v0.x / h0, v0.y / h0, 0.0) } else { Vec3::x() };
    let n = Vec3::new(-e.y, e.x, 0.0);
    let lat = ctx.lateral_budget_m / t_ref;
    let swing = (lim.max_accel_mps2 * t_ref).min(ctx.lateral_budget_m / t_ref);
    let mut along = v.dot(&e).clamp(h0 - swing, h0 + swing);
    let mut perp = v.dot(&n).clamp(-lat, lat);
    let theta_max = ctx.max_heading_offset_rad.min(lim.max_turn_rate_rps * t_ref);
    let speed = along.hypot(perp);
    let angle = perp.atan2(along);
    if angle.abs() > theta_max {
        let a = theta_max.copysign(angle);
        along = speed * a.cos();
        perp = speed * a.sin();
    }
    let speed = along.hypot(perp);
    let capped = speed.clamp(lim.min_speed_mps.min(h0), lim.max_speed_mps.max(h0));
    if speed > 1e-12 {
        along *= capped / speed;
        perp *= capped / speed;
    }
    let up = ctx.vertical_budget_m.min((ctx.z_range[1] - z).max(0.0)) / t_ref;
    let down = ctx.vertical_budget_m.min((z - ctx.z_range[0]).max(0.0)) / t_ref;
    let c = lim.max_climb_rate_mps;
    let vz = v.z.max((v0.z - down).max(-c)).min((v0.z + up).min(c));
    e * along + n * perp + Vec3::new(0.0, 0.0, vz)
}

/// Unit direction pushing `i` away from `j` at their closest approach. An
/// exact hit falls back to the right-hand perpendicular of the relative
/// velocity, which makes symmetric encounters resolve antisymmetrically.
fn repulsion(i: &AircraftState, j: &AircraftState, t: f64) -> Vec3 {
    let miss = (i.position + i.velocity * t) - (j.position + j.velocity * t);
    if miss.norm() > 1e-6 {
        return miss.normalize();
    }
    let rel = (i.velocity - j.velocity).xy();
    if rel.norm() > 1e-9 {
        return Vec3::new(rel.y, -rel.x, 0.0).normalize();
    }
    let sep = i.position - j.position;
    if sep.norm() > 1e-9 {
        sep.normalize()
    } else if i.id < j.id {
        Vec3::x()
    } else {
        -Vec3::x()
    }
}

/// Synchronized severity-weighted repulsion over a conflict cluster. Each
/// round every aircraft adds `Σ severity · step · direction` over its
/// conflicting peers (in id order), clipped to its maneuver space. Stops once
/// every pair in the cluster is below the cluster threshold.
pub fn tier2_coordinate(
    cluster: &[AircraftState],
    contexts: &BTreeMap<AircraftId, ManeuverContext>,
    cfg: &AvoidanceConfig,
) -> Result<Tier2Outcome, AvoidanceError> {
    let mut working: Vec<AircraftState> = cluster.to_vec();
    working.sort_by_key(|s| s.id);
    for s in &working {
        if !contexts.contains_key(&s.id) {
            return Err(AvoidanceError::InvalidInput(format!("no maneuver context for {}", s.id)));
        }
    }
    let max_sev = |records: &[ConflictRecord]| records.iter().map(|r| r.severity).fold(0.0, f64::max);
    let records = predict_conflicts(&working, cfg.horizon_s, cfg.alert_factor);
    let mut max_severity = max_sev(&records);
    let zero = |working: &[AircraftState], iterations, max_severity| {
        Ok(Tier2Outcome {
            maneuvers: working.iter().map(|s| (s.id, Maneuver::Composite(vec![]))).collect(),
            targets: working.iter().map(|s| (s.id, s.velocity)).collect(),
            iterations,
            max_severity,
        })
    };
    if max_severity < cfg.cluster_threshold {
        return zero(&working, 0, max_severity);
    }
    let originals: Vec<Vec3> = working.iter().map(|s| s.velocity).collect();
    let t_refs: Vec<f64> = working
        .iter()
        .map(|s| {
            let dt = contexts[&s.id].dt;
            records.iter().filter(|r| r.involves(s.id)).map(|r| r.t_cpa).fold(dt, f64::max)
        })
        .collect();

    for iteration in 1..=cfg.tier2_max_iters {
        let records = predict_conflicts(&working, cfg.horizon_s, cfg.alert_factor);
        let updates: Vec<Vec3> = working
            .iter()
            .enumerate()
            .map(|(n, s)| {
                let mut adj = Vec3::zeros();
                for r in records.iter().filter(|r| r.involves(s.id)) {
                    let peer = working.iter().find(|p| p.id == r.other(s.id)).expect("cluster member");
                    adj += repulsion(s, peer, r.t_cpa) * (r.severity * cfg.tier2_step_mps);
                }
                let ctx = &contexts[&s.id];
                project(&originals[n], &(s.velocity + adj), s.position.z, ctx, t_refs[n])
            })
            .collect();
        for (s, v) in working.iter_mut().zip(updates) {
            s.set_velocity(v);
        }
        max_severity = max_sev(&predict_conflicts(&working, cfg.horizon_s, cfg.alert_factor));
        if max_severity < cfg.cluster_threshold {
            let maneuvers = working
                .iter()
                .zip(&originals)
                .map(|(s, v0)| {
                    let ctx = &contexts[&s.id];
                    (s.id, Maneuver::toward(v0, &s.velocity, &ctx.limits, ctx.dt))
                })
                .collect();
            return Ok(Tier2Outcome {
                maneuvers,
                targets: working.iter().map(|s| (s.id, s.velocity)).collect(),
                iterations: iteration,
                max_severity,
            });
        }
    }
    Err(AvoidanceError::NonConvergence { iterations: cfg.tier2_max_iters, max_severity })
}
