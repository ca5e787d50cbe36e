//! Reusable check drivers shared by the command line and the self-test.
//! Each returns a serializable report; none of them writes files.

pub mod bounds;
pub mod coupling;
pub mod detection;
pub mod hammersley;
pub mod lattice;
pub mod walk;

use serde::{Deserialize, Serialize};

/// Set on an experiment id to get a disjoint family of replicate streams
/// for a second, independent sample.
pub const STREAM_RERUN: u32 = 1 << 31;

/// Number of pathwise checks performed and how many of them failed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCount {
    pub checks: u64,
    pub failures: u64,
}

impl CheckCount {
    pub fn new(checks: u64, failures: u64) -> Self {
        Self { checks, failures }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn merge(self, other: CheckCount) -> CheckCount {
        CheckCount::new(self.checks + other.checks, self.failures + other.failures)
    }
}
