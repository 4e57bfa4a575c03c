//! Dual physical/safety envelopes, aircraft state and pairwise conflict geometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corridor::CorridorId;
use crate::geometry::{heading_of, rotate_horizontal, Point3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvelopeError {
    #[error("aircraft {0} cannot conflict with itself")]
    SameAircraft(AircraftId),
    #[error("invalid envelope: {0}")]
    InvalidShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AircraftId(pub u32);

impl std::fmt::Display for AircraftId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "A{}", self.0)
    }
}

/// Body-frame envelope geometry: `x` forward, `y` left, `z` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeShape {
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    Cuboid { hx: f64, hy: f64, hz: f64 },
}

impl EnvelopeShape {
    pub fn validate(&self) -> Result<(), EnvelopeError> {
        let dims: &[f64] = match self {
            EnvelopeShape::Sphere { radius } => &[*radius],
            EnvelopeShape::Ellipsoid { a, b, c } => &[*a, *b, *c],
            EnvelopeShape::Cuboid { hx, hy, hz } => &[*hx, *hy, *hz],
        };
        if dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            Ok(())
        } else {
            Err(EnvelopeError::InvalidShape(format!("dimensions must be positive: {self:?}")))
        }
    }

    /// Radius of the smallest origin-centered sphere containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            EnvelopeShape::Sphere { radius } => radius,
            EnvelopeShape::Ellipsoid { a, b, c } => a.max(b).max(c),
            EnvelopeShape::Cuboid { hx, hy, hz } => (hx * hx + hy * hy + hz * hz).sqrt(),
        }
    }

    /// Exact containment of a body-frame point.
    pub fn contains_local(&self, p: &Vec3) -> bool {
        match *self {
            EnvelopeShape::Sphere { radius } => p.norm() <= radius,
            EnvelopeShape::Ellipsoid { a, b, c } => (p.x / a).powi(2) + (p.y / b).powi(2) + (p.z / c).powi(2) <= 1.0,
            EnvelopeShape::Cuboid { hx, hy, hz } => p.x.abs() <= hx && p.y.abs() <= hy && p.z.abs() <= hz,
        }
    }
}

/// Physical shape plus an isotropic safety margin forming the outer envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualEnvelope {
    pub physical: EnvelopeShape,
    pub safety_margin_m: f64,
}

impl DualEnvelope {
    pub fn new(physical: EnvelopeShape, safety_margin_m: f64) -> Result<Self, EnvelopeError> {
        let e = Self { physical, safety_margin_m };
        e.validate()?;
        Ok(e)
    }

    pub fn sphere(radius: f64, safety_margin_m: f64) -> Result<Self, EnvelopeError> {
        Self::new(EnvelopeShape::Sphere { radius }, safety_margin_m)
    }

    pub fn validate(&self) -> Result<(), EnvelopeError> {
        self.physical.validate()?;
        if !(self.safety_margin_m.is_finite() && self.safety_margin_m >= 0.0) {
            return Err(EnvelopeError::InvalidShape(format!(
                "safety margin must be non-negative, got {}",
                self.safety_margin_m
            )));
        }
        Ok(())
    }

    pub fn r_phys(&self) -> f64 {
        self.physical.bounding_radius()
    }

    pub fn r_outer(&self) -> f64 {
        self.r_phys() + self.safety_margin_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AircraftClass {
    FixedWing,
    RotaryWing,
    Hybrid,
    #[serde(rename = "evtol")]
    EVTOL,
    Manned,
}

/// Kinematic limits of an aircraft class. Rates are per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassLimits {
    pub max_speed_mps: f64,
    pub min_speed_mps: f64,
    pub max_accel_mps2: f64,
    pub max_turn_rate_rps: f64,
    pub max_climb_rate_mps: f64,
}

impl ClassLimits {
    /// All maxima zero: the aircraft can neither maneuver nor move.
    pub fn frozen() -> Self {
        Self { max_speed_mps: 0.0, min_speed_mps: 0.0, max_accel_mps2: 0.0, max_turn_rate_rps: 0.0, max_climb_rate_mps: 0.0 }
    }
}

impl AircraftClass {
    pub fn default_limits(self) -> ClassLimits {
        let (max_speed_mps, min_speed_mps, max_accel_mps2, max_turn_rate_rps, max_climb_rate_mps) = match self {
            AircraftClass::FixedWing => (25.0, 10.0, 2.0, 0.35, 3.0),
            AircraftClass::RotaryWing => (15.0, 0.0, 3.0, 1.0, 4.0),
            AircraftClass::Hybrid => (20.0, 5.0, 2.5, 0.6, 3.0),
            AircraftClass::EVTOL => (30.0, 0.0, 2.5, 0.5, 4.0),
            AircraftClass::Manned => (60.0, 25.0, 1.5, 0.2, 5.0),
        };
        ClassLimits { max_speed_mps, min_speed_mps, max_accel_mps2, max_turn_rate_rps, max_climb_rate_mps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftState {
    pub id: AircraftId,
    pub class: AircraftClass,
    pub position: Point3,
    pub velocity: Vec3,
    /// Radians from east, counter-clockwise, in `[0, 2π)`.
    pub heading: f64,
    pub envelope: DualEnvelope,
    pub corridor: Option<CorridorId>,
}

impl AircraftState {
    /// Heading follows the horizontal velocity; it is zero for a hovering aircraft.
    pub fn new(id: AircraftId, class: AircraftClass, position: Point3, velocity: Vec3, envelope: DualEnvelope) -> Self {
        let heading = if velocity.xy().norm() > 0.0 { heading_of(&velocity) } else { 0.0 };
        Self { id, class, position, velocity, heading, envelope, corridor: None }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Sets velocity and, when moving horizontally, the heading with it.
    pub fn set_velocity(&mut self, v: Vec3) {
        self.velocity = v;
        if v.xy().norm() > 1e-9 {
            self.heading = heading_of(&v);
        }
    }

    /// Exact physical-shape containment of a world point, with the body
    /// frame rotated by the heading about the vertical axis.
    pub fn physical_contains(&self, p: &Point3) -> bool {
        let local = rotate_horizontal(&(p - self.position), -self.heading);
        self.envelope.physical.contains_local(&local)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictClass {
    Clear,
    SafetyBreach,
    PhysicalCollision,
}

/// Classifies a pair with conservative bounding spheres.
pub fn classify_conflict(a: &AircraftState, b: &AircraftState) -> Result<ConflictClass, EnvelopeError> {
    if a.id == b.id {
        return Err(EnvelopeError::SameAircraft(a.id));
    }
    let d = (a.position - b.position).norm();
    Ok(if d <= a.envelope.r_phys() + b.envelope.r_phys() {
        ConflictClass::PhysicalCollision
    } else if d <= a.envelope.r_outer() + b.envelope.r_outer() {
        ConflictClass::SafetyBreach
    } else {
        ConflictClass::Clear
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Approach {
    pub t_cpa: f64,
    pub d_cpa: f64,
}

/// Closest approach of relative motion `dp + t·dv` over `t ∈ [0, horizon]`.
pub fn closest_approach(dp: &Vec3, dv: &Vec3, horizon: f64) -> Approach {
    let vv = dv.norm_squared();
    let t_cpa = if vv > 0.0 { (-dp.dot(dv) / vv).clamp(0.0, horizon) } else { 0.0 };
    Approach { t_cpa, d_cpa: (dp + dv * t_cpa).norm() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breach {
    pub t_breach: f64,
    pub t_cpa: f64,
    pub d_cpa: f64,
}

/// First time within `[0, horizon]` that `|dp + t·dv|` reaches `radius`, if any.
pub fn breach_time(dp: &Vec3, dv: &Vec3, radius: f64, horizon: f64) -> Option<f64> {
    let c = dp.norm_squared() - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let a = dv.norm_squared();
    let b = dp.dot(dv);
    if a == 0.0 || b >= 0.0 {
        return None;
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    // Numerically stable smaller root of a t² + 2b t + c = 0 with b < 0.
    let t = c / (-b + disc.sqrt());
    (t <= horizon).then_some(t)
}

/// Constant-velocity breach prediction of the combined outer envelopes.
pub fn time_to_breach(a: &AircraftState, b: &AircraftState, horizon_s: f64) -> Option<Breach> {
    let dp = b.position - a.position;
    let dv = b.velocity - a.velocity;
    let r = a.envelope.r_outer() + b.envelope.r_outer();
    let t_breach = breach_time(&dp, &dv, r, horizon_s)?;
    let cpa = closest_approach(&dp, &dv, horizon_s);
    Some(Breach { t_breach, t_cpa: cpa.t_cpa, d_cpa: cpa.d_cpa })
}
