//! Monitoring links: free-space budgets, measurement noise, tracking and
//! anomaly detection.

mod anomaly;
mod tracking;

pub use anomaly::{cross_track_distance, detect_anomalies, Anomaly, AnomalyKind, AnomalyThresholds};
pub use tracking::{kalman_step, Measurement, StepOutcome, Track, TrackerConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("{what} must be positive, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },
    #[error("no monitoring modes configured")]
    NoModesConfigured,
    #[error("invalid mode {name}: {reason}")]
    InvalidMode { name: ModeName, reason: String },
    #[error("mode {0} configured twice")]
    DuplicateMode(ModeName),
    #[error("covariance is not symmetric positive semi-definite")]
    NonPsdCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeName {
    #[serde(rename = "RID")]
    Rid,
    #[serde(rename = "FiveG_A")]
    FiveGA,
    #[serde(rename = "ADSB")]
    Adsb,
    #[serde(rename = "SAT")]
    Sat,
}

impl ModeName {
    pub const ALL: [ModeName; 4] = [ModeName::Rid, ModeName::FiveGA, ModeName::Adsb, ModeName::Sat];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Rid => "RID",
            ModeName::FiveGA => "FiveG_A",
            ModeName::Adsb => "ADSB",
            ModeName::Sat => "SAT",
        }
    }

    /// Tie-break order for mode selection; lower is preferred.
    pub fn preference(self) -> u8 {
        match self {
            ModeName::FiveGA => 0,
            ModeName::Adsb => 1,
            ModeName::Rid => 2,
            ModeName::Sat => 3,
        }
    }

    pub fn default_noise_sigma_m(self) -> f64 {
        match self {
            ModeName::Rid => 10.0,
            ModeName::FiveGA => 3.0,
            ModeName::Adsb => 15.0,
            ModeName::Sat => 10.0,
        }
    }
}

impl std::fmt::Display for ModeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_sensitivity() -> f64 {
    -85.0
}

fn default_noise_figure() -> f64 {
    7.0
}

/// Default satellite standoff distance.
pub const SAT_STANDOFF_M: f64 = 600_000.0;

/// Radio parameters of one monitoring mode. Antenna gains are 0 dBi.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkMode {
    pub name: ModeName,
    pub frequency_mhz: f64,
    pub tx_power_w: f64,
    pub bandwidth_mhz: f64,
    #[serde(default = "default_sensitivity")]
    pub sensitivity_dbm: f64,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
    /// Transmitter height for ground stations, standoff distance for SAT.
    /// Defaults to 0 m on the ground and 600 km for SAT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_altitude_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma_m: Option<f64>,
}

impl LinkMode {
    pub fn new(name: ModeName, frequency_mhz: f64, tx_power_w: f64, bandwidth_mhz: f64) -> Self {
        Self {
            name,
            frequency_mhz,
            tx_power_w,
            bandwidth_mhz,
            sensitivity_dbm: default_sensitivity(),
            noise_figure_db: default_noise_figure(),
            reference_altitude_m: None,
            noise_sigma_m: None,
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let bad = |reason: &str| Err(LinkError::InvalidMode { name: self.name, reason: reason.into() });
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.frequency_mhz) || !positive(self.tx_power_w) || !positive(self.bandwidth_mhz) {
            return bad("frequency, power and bandwidth must be positive");
        }
        if !(self.sensitivity_dbm.is_finite() && self.sensitivity_dbm < 0.0) {
            return bad("sensitivity must be below 0 dBm");
        }
        if !self.noise_figure_db.is_finite() {
            return bad("noise figure must be finite");
        }
        if self.reference_altitude_m.is_some_and(|h| !(h.is_finite() && h >= 0.0)) {
            return bad("reference altitude must be non-negative");
        }
        if self.noise_sigma_m.is_some_and(|s| !(s.is_finite() && s >= 0.0)) {
            return bad("noise sigma must be non-negative");
        }
        Ok(())
    }

    pub fn reference_altitude(&self) -> f64 {
        self.reference_altitude_m.unwrap_or(if self.name == ModeName::Sat { SAT_STANDOFF_M } else { 0.0 })
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma_m.unwrap_or(self.name.default_noise_sigma_m())
    }

    pub fn tx_power_dbm(&self) -> f64 {
        10.0 * (self.tx_power_w * 1000.0).log10()
    }

    /// Distance used for tabulated metrics: 1 km on the ground, the standoff for SAT.
    pub fn reference_distance_km(&self) -> f64 {
        if self.name == ModeName::Sat {
            self.reference_altitude() / 1000.0
        } else {
            1.0
        }
    }
}

/// Reference mode table: RID, 5G-A, ADS-B and SAT.
pub fn default_modes() -> Vec<LinkMode> {
    vec![
        LinkMode::new(ModeName::Rid, 2400.0, 0.1, 2.0),
        LinkMode::new(ModeName::FiveGA, 3500.0, 4.0, 100.0),
        LinkMode::new(ModeName::Adsb, 1090.0, 5.0, 2.0),
        LinkMode::new(ModeName::Sat, 1600.0, 3000.0, 8.0),
    ]
}

/// Mode table as loaded from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTable {
    pub modes: Vec<LinkMode>,
}

impl ModeTable {
    pub fn validate(&self) -> Result<(), LinkError> {
        if self.modes.is_empty() {
            return Err(LinkError::NoModesConfigured);
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.modes {
            m.validate()?;
            if !seen.insert(m.name) {
                return Err(LinkError::DuplicateMode(m.name));
            }
        }
        Ok(())
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64, LinkError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(LinkError::NonPositiveInput { what, value })
    }
}

/// Free-space path loss with distance in km and frequency in MHz.
pub fn fspl_db(frequency_mhz: f64, distance_km: f64) -> Result<f64, LinkError> {
    let f = positive("frequency", frequency_mhz)?;
    let d = positive("distance", distance_km)?;
    Ok(20.0 * d.log10() + 20.0 * f.log10() + 32.44)
}

pub fn received_power_dbm(mode: &LinkMode, distance_km: f64) -> Result<f64, LinkError> {
    Ok(mode.tx_power_dbm() - fspl_db(mode.frequency_mhz, distance_km)?)
}

/// Largest distance at which the received power still meets the sensitivity.
pub fn effective_range_km(mode: &LinkMode) -> f64 {
    let exponent = (mode.tx_power_dbm() - mode.sensitivity_dbm - 20.0 * mode.frequency_mhz.log10() - 32.44) / 20.0;
    10f64.powf(exponent)
}

/// Thermal noise floor over the mode bandwidth plus the receiver noise figure.
pub fn noise_power_dbm(mode: &LinkMode) -> f64 {
    -174.0 + 10.0 * (mode.bandwidth_mhz * 1e6).log10() + mode.noise_figure_db
}

/// Shannon capacity at `distance_km`, zero below sensitivity.
pub fn data_rate_bps(mode: &LinkMode, distance_km: f64) -> Result<f64, LinkError> {
    let rx = received_power_dbm(mode, distance_km)?;
    if rx < mode.sensitivity_dbm {
        return Ok(0.0);
    }
    let snr = 10f64.powf((rx - noise_power_dbm(mode)) / 10.0);
    Ok(mode.bandwidth_mhz * 1e6 * (1.0 + snr).log2())
}

/// Ground station serving a set of modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    pub position: [f64; 3],
    pub modes: Vec<ModeName>,
}

impl Station {
    pub fn point(&self) -> Point3 {
        Vec3::new(self.position[0], self.position[1], self.position[2])
    }
}

/// Closest distances below this are evaluated at this distance.
const MIN_LINK_KM: f64 = 1e-3;

/// Link distance for `mode` at `p`: the satellite standoff, or the distance to
/// the nearest station carrying the mode (`None` when no station does).
pub fn link_distance_km(p: &Point3, mode: &LinkMode, stations: &[Station]) -> Option<f64> {
    if mode.name == ModeName::Sat {
        return Some(mode.reference_altitude() / 1000.0);
    }
    stations
        .iter()
        .filter(|s| s.modes.contains(&mode.name))
        .map(|s| ((p - s.point()).norm() / 1000.0).max(MIN_LINK_KM))
        .min_by(f64::total_cmp)
}

/// Mode with the highest current data rate among those in range, ties going
/// to the fixed preference order; SAT when nothing is in range.
pub fn select_mode(p: &Point3, stations: &[Station], modes: &[LinkMode]) -> Result<ModeName, LinkError> {
    if modes.is_empty() {
        return Err(LinkError::NoModesConfigured);
    }
    let mut best: Option<(f64, ModeName)> = None;
    for m in modes {
        let Some(d) = link_distance_km(p, m, stations) else { continue };
        if d > effective_range_km(m) {
            continue;
        }
        let rate = data_rate_bps(m, d)?;
        let replace = match best {
            None => true,
            Some((r, name)) => {
                let tol = 1e-12 * r.abs().max(rate.abs());
                rate > r + tol || ((rate - r).abs() <= tol && m.name.preference() < name.preference())
            }
        };
        if replace {
            best = Some((rate, m.name));
        }
    }
    Ok(best.map_or(ModeName::Sat, |(_, n)| n))
}

/// Noisy position fix, absent beyond effective range.
pub fn measure<R: Rng + ?Sized>(position: &Point3, mode: &LinkMode, distance_km: f64, rng: &mut R) -> Option<Point3> {
    if distance_km > effective_range_km(mode) {
        return None;
    }
    let sigma = mode.noise_sigma();
    if sigma == 0.0 {
        return Some(*position);
    }
    let n = Normal::new(0.0, sigma).expect("sigma validated");
    Some(position + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
}

/// [`measure`] with a dedicated generator seeded from `seed`.
pub fn measure_seeded(position: &Point3, mode: &LinkMode, distance_km: f64, seed: u64) -> Option<Point3> {
    measure(position, mode, distance_km, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// One row of the link-metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkMetrics {
    pub mode: ModeName,
    pub frequency_mhz: f64,
    pub tx_power_w: f64,
    pub bandwidth_mhz: f64,
    pub effective_range_km: f64,
    pub data_rate_bps: f64,
}

pub fn link_metrics(modes: &[LinkMode]) -> Result<Vec<LinkMetrics>, LinkError> {
    modes
        .iter()
        .map(|m| {
            m.validate()?;
            Ok(LinkMetrics {
                mode: m.name,
                frequency_mhz: m.frequency_mhz,
                tx_power_w: m.tx_power_w,
                bandwidth_mhz: m.bandwidth_mhz,
                effective_range_km: effective_range_km(m),
                data_rate_bps: data_rate_bps(m, m.reference_distance_km())?,
            })
        })
        .collect()
}

pub const LINK_METRICS_HEADER: &str = "mode,frequency_MHz,tx_power_W,bandwidth_MHz,effective_range_km,data_rate_bps";

/// CSV rendering with full round-trip float precision.
pub fn link_metrics_csv(rows: &[LinkMetrics]) -> String {
    let mut out = String::from(LINK_METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.mode, r.frequency_mhz, r.tx_power_w, r.bandwidth_mhz, r.effective_range_km, r.data_rate_bps
        ));
    }
    out
}
