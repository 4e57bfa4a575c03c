use serde::{Deserialize, Serialize};

use super::Track;
use crate::envelope::AircraftId;
use crate::geometry::Point3;
use crate::grid::{ZoneKind, ZoneSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    TrajectoryDeviation,
    SpeedFluctuation,
    SignalLoss,
    NoFlyIntrusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub kind: AnomalyKind,
    pub aircraft: AircraftId,
    pub tick: u64,
    pub magnitude: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnomalyThresholds {
    pub cross_track_m: f64,
    pub speed_rate_mps2: f64,
    /// Signal loss fires once more than this many consecutive ticks lack a fix.
    pub signal_loss_ticks: u32,
}

impl Default for AnomalyThresholds {
    fn default() -> Self {
        Self { cross_track_m: 30.0, speed_rate_mps2: 8.0, signal_loss_ticks: 3 }
    }
}

/// Distance from `p` to the nearest point of the polyline `plan`.
pub fn cross_track_distance(p: &Point3, plan: &[Point3]) -> f64 {
    match plan {
        [] => 0.0,
        [only] => (p - only).norm(),
        _ => plan
            .windows(2)
            .map(|w| {
                let ab = w[1] - w[0];
                let len2 = ab.norm_squared();
                let t = if len2 > 0.0 { ((p - w[0]).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (p - (w[0] + ab * t)).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Anomalies for one track at `tick`, in [`AnomalyKind`] order.
pub fn detect_anomalies(
    track: &Track,
    plan: &[Point3],
    zones: &ZoneSet,
    thresholds: &AnomalyThresholds,
    tick: u64,
) -> Vec<Anomaly> {
    let mut out = Vec::new();
    let mut emit = |kind, magnitude, threshold| {
        out.push(Anomaly { kind, aircraft: track.aircraft, tick, magnitude, threshold });
    };
    let p = track.position();
    let dev = cross_track_distance(&p, plan);
    if dev > thresholds.cross_track_m {
        emit(AnomalyKind::TrajectoryDeviation, dev, thresholds.cross_track_m);
    }
    let rate = track.speed_rate_mps2.abs();
    if rate > thresholds.speed_rate_mps2 {
        emit(AnomalyKind::SpeedFluctuation, rate, thresholds.speed_rate_mps2);
    }
    if track.missed_ticks > thresholds.signal_loss_ticks {
        emit(AnomalyKind::SignalLoss, f64::from(track.missed_ticks), f64::from(thresholds.signal_loss_ticks));
    }
    if zones.is_restricted(&p) == Some(ZoneKind::NoFly) {
        emit(AnomalyKind::NoFlyIntrusion, 1.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::grid::{Cylinder, Zone, ZoneShape};
    use crate::link::{kalman_step, TrackerConfig};

    fn plan() -> Vec<Point3> {
        vec![Vec3::new(0.0, 0.0, 100.0), Vec3::new(1000.0, 0.0, 100.0)]
    }

    #[test]
    fn smooth_track_is_quiet() {
        let t = Track::new(AircraftId(1), Vec3::new(200.0, 5.0, 100.0), Vec3::new(15.0, 0.0, 0.0), 3.0, 1.0, 0.0);
        assert!(detect_anomalies(&t, &plan(), &ZoneSet::default(), &AnomalyThresholds::default(), 3).is_empty());
    }

    #[test]
    fn no_fly_intrusion() {
        let zones = ZoneSet::new(
            vec![Zone {
                kind: ZoneKind::NoFly,
                shape: ZoneShape::Cylinder(Cylinder { center: [200.0, 0.0], radius_m: 50.0, z_range: [0.0, 200.0] }),
            }],
            vec![],
        )
        .unwrap();
        let t = Track::new(AircraftId(1), Vec3::new(200.0, 5.0, 100.0), Vec3::new(15.0, 0.0, 0.0), 3.0, 1.0, 0.0);
        let a = detect_anomalies(&t, &plan(), &zones, &AnomalyThresholds::default(), 3);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, AnomalyKind::NoFlyIntrusion);
    }

    #[test]
    fn signal_loss_after_counter() {
        let th = AnomalyThresholds { signal_loss_ticks: 3, ..Default::default() };
        let mut t = Track::new(AircraftId(1), Vec3::new(200.0, 0.0, 100.0), Vec3::zeros(), 3.0, 1.0, 0.0);
        for n in 1..=4 {
            t = kalman_step(&t, None, 0.1, &TrackerConfig::default()).unwrap().0;
            let a = detect_anomalies(&t, &plan(), &ZoneSet::default(), &th, n);
            assert_eq!(a.iter().any(|x| x.kind == AnomalyKind::SignalLoss), n == 4);
        }
    }

    #[test]
    fn deviation_and_fluctuation() {
        let mut t = Track::new(AircraftId(1), Vec3::new(200.0, 80.0, 100.0), Vec3::zeros(), 3.0, 1.0, 0.0);
        t.speed_rate_mps2 = -20.0;
        let a = detect_anomalies(&t, &plan(), &ZoneSet::default(), &AnomalyThresholds::default(), 0);
        let kinds: Vec<_> = a.iter().map(|x| x.kind).collect();
        assert_eq!(kinds, vec![AnomalyKind::TrajectoryDeviation, AnomalyKind::SpeedFluctuation]);
        assert!(a.iter().all(|x| x.magnitude >= x.threshold));
    }
}
