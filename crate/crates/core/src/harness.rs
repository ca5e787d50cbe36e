//! Replicate-parallel execution with order-independent results.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{invalid, Result};
use crate::rng::RandomStream;

/// Runs replicate jobs on a fixed-size thread pool. Replicate `r` of
/// experiment `e` always draws from `RandomStream::for_replicate(seed, e, r)`
/// and results come back in replicate order, so outputs do not depend on
/// the number of workers.
#[derive(Clone)]
pub struct Runner {
    pool: Arc<ThreadPool>,
    workers: usize,
}

impl std::fmt::Debug for Runner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runner").field("workers", &self.workers).finish()
    }
}

impl Runner {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("worker count must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
        Ok(Self { pool: Arc::new(pool), workers })
    }

    /// One worker per available core.
    pub fn with_available_parallelism() -> Result<Self> {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn run<T, F>(&self, seed: u64, experiment: u32, reps: u32, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(RandomStream) -> Result<T> + Sync + Send,
    {
        self.pool.install(|| {
            (0..reps)
                .into_par_iter()
                .map(|r| job(RandomStream::for_replicate(seed, experiment, r)))
                .collect()
        })
    }

    /// Parallel map over arbitrary items, in order.
    pub fn map<I, T, F>(&self, items: &[I], job: F) -> Result<Vec<T>>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> Result<T> + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(&job).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let job = |mut s: RandomStream| Ok(s.uniform());
        let one = Runner::new(1).unwrap().run(5, 2, 200, job).unwrap();
        let four = Runner::new(4).unwrap().run(5, 2, 200, job).unwrap();
        assert_eq!(one, four);
        assert_eq!(one[7], RandomStream::for_replicate(5, 2, 7).uniform());
        assert!(Runner::new(0).is_err());
    }

    #[test]
    fn errors_propagate() {
        let r = Runner::new(2).unwrap();
        let out: Result<Vec<()>> = r.run(0, 0, 10, |s| {
            if s.stream_id() == 3 {
                Err(invalid("boom"))
            } else {
                Ok(())
            }
        });
        assert!(out.is_err());
    }
}
