//! Mobility-aware task recruitment and scheduling for air-ground unmanned
//! systems.
//!
//! The crate covers the full pipeline: GeoLife trajectory ingestion and grid
//! discretization ([`ingest`], [`grid`]), mover-type classification
//! ([`behavior`]), behavior-adaptive Markov location prediction
//! ([`prediction`]), recruitment expectation estimation ([`recruitment`]),
//! composite-priority scheduling with an independent constraint validator
//! ([`scheduler`]), the Greedy/HSF/EDF/LSF reference schedulers
//! ([`baselines`]), and a deterministic discrete-time simulator with its
//! evaluation metrics ([`sim`], [`metrics`]).

pub mod baselines;
pub mod behavior;
pub mod config;
pub mod error;
pub mod grid;
pub mod ingest;
pub mod metrics;
pub mod prediction;
pub mod recruitment;
pub mod scheduler;
pub mod sim;
pub mod types;

pub use baselines::Algorithm;
pub use config::SimConfig;
pub use error::{Error, Result};
pub use grid::{GridSpec, RegionId};
pub use types::{DeviceId, Slot, StationId, TaskId};
