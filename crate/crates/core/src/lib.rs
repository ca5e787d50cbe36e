pub mod acceptance;
pub mod coupling;
pub mod detection;
pub mod error;
pub mod exp_lpp;
pub mod experiments;
pub mod geometry;
pub mod hammersley;
pub mod harness;
pub mod oracle;
pub mod points;
pub mod rng;
pub mod rwre;
pub mod stats;

pub use error::{Error, Result};
