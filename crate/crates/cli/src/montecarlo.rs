//! Replica-parallel Monte Carlo driver.
//!
//! Replica `i` always draws from stream `i` of the master seed and results
//! are collected in replica order, so estimates do not depend on the number
//! of threads.

use fbm_chaos_core::RngStreamSpec;
use rayon::prelude::*;

pub fn replicate<T, F>(seed: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStreamSpec) -> T + Sync + Send,
{
    (0..n as u64).into_par_iter().map(|i| f(RngStreamSpec::new(seed, i))).collect()
}

/// Runs `job` on a pool with `threads` workers, or on the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> anyhow::Result<R> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(job)),
        None => Ok(job()),
    }
}
