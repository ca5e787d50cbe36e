//! Hammersley's process on a finite box through sources, sinks and clocks.

mod environment;
mod exit;
mod field;
mod history;
mod lis;

pub(crate) use environment::{check_lambda, sample_boundary, sample_clocks};
pub use environment::{sample_box_environment, BoxEnvironment};
pub use exit::{exit_point, exit_point_with, ExitPointRecord};
pub use field::{measure_query, CountingMeasure, LppField};
pub use history::{
    evolve_particles, induced_environment, Configuration, EventKind, HistoryCursor, ParticleEvent,
    ParticleHistory,
};
pub use lis::lis_count;
