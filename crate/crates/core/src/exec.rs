//! Order-preserving map over slices, sequential or on a rayon pool.
//!
//! Every data-parallel stage in the crate goes through [`Execution::map`], so
//! output order (and therefore output bytes) never depends on the worker
//! count. Without the `parallel` feature every mode runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool.
    #[default]
    Parallel,
    /// A dedicated pool with this many threads.
    Workers(usize),
}

impl Execution {
    /// `--workers N` style selection: `0` means the global pool, `1` sequential.
    pub fn from_workers(n: usize) -> Self {
        match n {
            0 => Execution::Parallel,
            1 => Execution::Sequential,
            n => Execution::Workers(n),
        }
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Workers(n) => self.install(*n, || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
            #[cfg(not(feature = "parallel"))]
            _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    #[cfg(feature = "parallel")]
    fn install<R: Send>(&self, threads: usize, op: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(op),
            // Could not spawn threads; the global pool gives the same result.
            Err(_) => op(),
        }
    }

    /// Whether this build can actually run work in parallel.
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }
}
