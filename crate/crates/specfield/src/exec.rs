//! Rayon-backed executor for the core's data-parallel loops.
//!
//! Worker count only affects scheduling: chunk boundaries and reduction
//! order are fixed by the call sites, so results match the serial executor
//! bit for bit.

use rayon::prelude::*;
use specfield_core::exec::Executor;

pub struct RayonExec {
    pool: Option<rayon::ThreadPool>,
}

impl RayonExec {
    /// Uses the global rayon pool (machine parallelism).
    pub fn default_pool() -> Self {
        RayonExec { pool: None }
    }

    /// Dedicated pool with an explicit worker count.
    pub fn with_threads(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(RayonExec {
            pool: Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads.max(1))
                    .build()?,
            ),
        })
    }
}

impl Executor for RayonExec {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let run = || (0..n).into_par_iter().map(&f).collect();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}
