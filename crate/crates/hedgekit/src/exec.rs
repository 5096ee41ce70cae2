//! Scenario-level parallelism on a rayon pool.

use hedgekit_core::pha::ScenarioMap;
use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HEDGEKIT_THREADS";

/// Runs scenario subproblems on a dedicated rayon pool.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `threads = 0` lets rayon pick (one per core).
    pub fn new(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("hedgekit-{i}"))
            .build()
            .expect("thread pool starts");
        Self { pool }
    }

    /// Sized by `HEDGEKIT_THREADS` when it holds a positive integer.
    pub fn from_env() -> Self {
        Self::new(threads_from_env())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

/// The `HEDGEKIT_THREADS` cap, or 0 when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

impl ScenarioMap for Parallel {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
