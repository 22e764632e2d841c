//! Per-case worker pool.

use craniotk_core::atlas::CaseMap;
use rayon::prelude::*;

use crate::{Error, Result};

pub const THREADS_ENV: &str = "CRANIOTK_THREADS";

/// Worker count: explicit setting, then `CRANIOTK_THREADS`, then the
/// available parallelism.
pub fn thread_count(explicit: Option<usize>) -> Result<usize> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| Error::Usage(format!("{THREADS_ENV}=`{v}` is not a count")))?,
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(Error::Usage("thread count must be >= 1".into()));
    }
    Ok(n)
}

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
        Ok(Pool { pool })
    }
}

impl CaseMap for Pool {
    fn map<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }
}
