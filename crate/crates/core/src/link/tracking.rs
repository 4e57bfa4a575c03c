use nalgebra::{Matrix3, Matrix3x6, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::{LinkError, ModeName};
use crate::envelope::AircraftId;
use crate::geometry::{Point3, Vec3};

/// Constant-velocity track: state `[px, py, pz, vx, vy, vz]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Track {
    pub aircraft: AircraftId,
    pub state: Vector6<f64>,
    pub covariance: Matrix6<f64>,
    pub last_update_s: f64,
    /// Consecutive steps without any measurement.
    pub missed_ticks: u32,
    /// Consecutive measurements rejected by the innovation gate.
    pub gated_ticks: u32,
    /// Rate of change of estimated speed over the last step.
    pub speed_rate_mps2: f64,
    pub mode: Option<ModeName>,
}

impl Track {
    pub fn new(aircraft: AircraftId, position: Point3, velocity: Vec3, pos_sigma: f64, vel_sigma: f64, t: f64) -> Self {
        let mut state = Vector6::zeros();
        state.fixed_rows_mut::<3>(0).copy_from(&position);
        state.fixed_rows_mut::<3>(3).copy_from(&velocity);
        let mut covariance = Matrix6::zeros();
        for a in 0..3 {
            covariance[(a, a)] = pos_sigma * pos_sigma;
            covariance[(a + 3, a + 3)] = vel_sigma * vel_sigma;
        }
        Self {
            aircraft,
            state,
            covariance,
            last_update_s: t,
            missed_ticks: 0,
            gated_ticks: 0,
            speed_rate_mps2: 0.0,
            mode: None,
        }
    }

    pub fn position(&self) -> Point3 {
        self.state.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vec3 {
        self.state.fixed_rows::<3>(3).into_owned()
    }

    /// Symmetric and Cholesky-factorizable after a tiny diagonal loading.
    pub fn covariance_is_psd(&self) -> bool {
        let p = &self.covariance;
        if p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let scale = p.trace().abs().max(1.0);
        if (p - p.transpose()).abs().max() > 1e-9 * scale {
            return false;
        }
        let loaded = 0.5 * (p + p.transpose()) + Matrix6::identity() * (1e-9 * scale);
        loaded.cholesky().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// White-acceleration process noise, per axis.
    pub accel_sigma_mps2: f64,
    /// Mahalanobis gate for measurement cleaning.
    pub gate: f64,
    /// Re-initialize from the measurement after this many consecutive gated fixes.
    pub reset_after_gated: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self { accel_sigma_mps2: 2.0, gate: 3.0, reset_after_gated: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepOutcome {
    Updated,
    Predicted,
    Gated,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub position: Point3,
    pub sigma_m: f64,
    pub mode: ModeName,
}

fn observation() -> Matrix3x6<f64> {
    let mut h = Matrix3x6::zeros();
    for a in 0..3 {
        h[(a, a)] = 1.0;
    }
    h
}

/// One predict/update cycle. Measurements whose innovation lies beyond the
/// gate are dropped; after `reset_after_gated` consecutive drops the track
/// restarts at the measurement.
pub fn kalman_step(
    track: &Track,
    measurement: Option<Measurement>,
    dt: f64,
    cfg: &TrackerConfig,
) -> Result<(Track, StepOutcome), LinkError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LinkError::NonPositiveInput { what: "dt", value: dt });
    }
    if !track.covariance_is_psd() {
        return Err(LinkError::NonPsdCovariance);
    }
    let mut f = Matrix6::identity();
    let mut q = Matrix6::zeros();
    let s2 = cfg.accel_sigma_mps2 * cfg.accel_sigma_mps2;
    for a in 0..3 {
        f[(a, a + 3)] = dt;
        q[(a, a)] = s2 * dt.powi(4) / 4.0;
        q[(a, a + 3)] = s2 * dt.powi(3) / 2.0;
        q[(a + 3, a)] = s2 * dt.powi(3) / 2.0;
        q[(a + 3, a + 3)] = s2 * dt * dt;
    }
    let x_pred = f * track.state;
    let p_pred = f * track.covariance * f.transpose() + q;

    let mut next = track.clone();
    next.state = x_pred;
    next.covariance = p_pred;
    next.last_update_s = track.last_update_s + dt;

    let outcome = match measurement {
        None => {
            next.missed_ticks += 1;
            StepOutcome::Predicted
        }
        Some(m) => {
            next.missed_ticks = 0;
            next.mode = Some(m.mode);
            let h = observation();
            let r = Matrix3::identity() * (m.sigma_m * m.sigma_m);
            let z: Vector3<f64> = m.position;
            let y = z - h * x_pred;
            let s = h * p_pred * h.transpose() + r;
            match s.try_inverse() {
                None if y.norm() <= 1e-12 => {
                    next.gated_ticks = 0;
                    StepOutcome::Updated
                }
                None => gate_or_reset(&mut next, &m, cfg),
                Some(s_inv) => {
                    let d2 = (y.transpose() * s_inv * y)[(0, 0)];
                    if d2.sqrt() > cfg.gate {
                        gate_or_reset(&mut next, &m, cfg)
                    } else {
                        let k = p_pred * h.transpose() * s_inv;
                        let ikh = Matrix6::identity() - k * h;
                        next.state = x_pred + k * y;
                        let p = ikh * p_pred * ikh.transpose() + k * r * k.transpose();
                        next.covariance = 0.5 * (p + p.transpose());
                        next.gated_ticks = 0;
                        StepOutcome::Updated
                    }
                }
            }
        }
    };
    next.speed_rate_mps2 = (next.velocity().norm() - track.velocity().norm()) / dt;
    Ok((next, outcome))
}

fn gate_or_reset(track: &mut Track, m: &Measurement, cfg: &TrackerConfig) -> StepOutcome {
    track.gated_ticks += 1;
    if track.gated_ticks < cfg.reset_after_gated {
        return StepOutcome::Gated;
    }
    let velocity = track.velocity();
    let vel_var = (0..3).map(|a| track.covariance[(a + 3, a + 3)]).fold(0.0, f64::max);
    let mut fresh = Track::new(track.aircraft, m.position, velocity, m.sigma_m, vel_var.sqrt(), track.last_update_s);
    fresh.mode = track.mode;
    *track = fresh;
    StepOutcome::Reset
}
