//! Deterministic simulator of grid-discretized low-altitude airspace.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`]: layered 3D cell grid and restricted zones.
//! * [`corridor`]: one-way corridors, the high-speed ring, intersections and routing.
//! * [`envelope`]: dual physical/safety envelopes and pairwise conflict geometry.
//! * [`rules`]: stateless flight-rule checks over a snapshot.
//! * [`link`]: link budgets, measurement noise, Kalman tracking, anomaly detection.
//! * [`evaluation`]: indicator construction and hierarchical weighting.
//! * [`avoidance`]: conflict prediction and the four-tier avoidance hierarchy.
//! * [`sim`]: scenarios, the tick engine, event logs and Monte Carlo experiments.

pub mod avoidance;
pub mod corridor;
pub mod envelope;
pub mod evaluation;
pub mod geometry;
pub mod grid;
pub mod link;
pub mod rules;
pub mod sim;

pub use corridor::{Corridor, CorridorGraph, CorridorId, CorridorKind, Intersection};
pub use envelope::{AircraftClass, AircraftId, AircraftState, DualEnvelope, EnvelopeShape};
pub use geometry::{Aabb, Point3, Vec3};
pub use grid::{CellIndex, GridSpec, ZoneKind, ZoneSet};
