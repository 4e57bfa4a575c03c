use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::AvoidanceError;
use crate::geometry::{Point3, Vec3};

/// Positions sampled every `dt` seconds from `t0`, carried by an aircraft
/// with the given physical radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub positions: Vec<Point3>,
    pub r_phys: f64,
}

impl Trajectory {
    /// Straight line from `start` with constant velocity.
    pub fn straight(start: Point3, velocity: Vec3, t0: f64, dt: f64, steps: usize, r_phys: f64) -> Self {
        let positions = (0..steps).map(|k| start + velocity * (k as f64 * dt)).collect();
        Self { t0, dt, positions, r_phys }
    }

    fn aligned_with(&self, other: &Trajectory) -> bool {
        let tol = 1e-9 * self.dt.abs().max(1.0);
        !self.positions.is_empty()
            && self.positions.len() == other.positions.len()
            && (self.t0 - other.t0).abs() <= tol
            && (self.dt - other.dt).abs() <= tol
    }
}

/// Monte Carlo probability that the physical envelopes touch at some common
/// time step when each trajectory is shifted by its own constant Gaussian
/// offset (std `sigma_m` per axis).
pub fn estimate_collision_probability(
    a: &Trajectory,
    b: &Trajectory,
    sigma_m: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, AvoidanceError> {
    if !a.aligned_with(b) {
        return Err(AvoidanceError::MisalignedTrajectories);
    }
    if !(sigma_m.is_finite() && sigma_m >= 0.0) || n_samples == 0 {
        return Err(AvoidanceError::InvalidInput("sigma must be non-negative and samples positive".into()));
    }
    let reach = a.r_phys + b.r_phys;
    let mut gaps: Vec<(f64, Vec3)> = a.positions.iter().zip(&b.positions).map(|(pa, pb)| pa - pb).map(|d| (d.norm(), d)).collect();
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma_m).expect("sigma validated");
    let mut hits = 0usize;
    for _ in 0..n_samples {
        let oa = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        let ob = Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        let shift = oa - ob;
        // |d + shift| ≥ |d| − |shift|: only steps with |d| ≤ reach + |shift| can touch.
        let cutoff = reach + shift.norm();
        let hit = gaps.iter().take_while(|(n, _)| *n <= cutoff).any(|(_, d)| (d + shift).norm() <= reach);
        hits += usize::from(hit);
    }
    Ok(hits as f64 / n_samples as f64)
}
