//! Data-parallel execution of independent index-addressed jobs.
//!
//! Every batch workload in the crate (Monte Carlo trials, sample-space
//! enumeration, per-atom tail computations) goes through [`Executor::map`].
//! Results are always returned in index order, so any reduction done by the
//! caller is independent of the executor and of the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Executor {
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

#[cfg(not(feature = "parallel"))]
impl Default for Executor {
    fn default() -> Self {
        Executor::Sequential
    }
}

impl Executor {
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Like [`Executor::map`] over a slice.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Fallible map; the first error in index order wins.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Executor::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Executor::Parallel => "parallel",
        }
    }
}

/// Seed for shard `index` of a run seeded with `seed`.
pub fn shard_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Run `f` inside a pool with `workers` threads (parallel builds only).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(w) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_index_order() {
        let out = Executor::default().map(100, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        let seq = Executor::Sequential.map(100, |i| i * i);
        assert_eq!(out, seq);
    }

    #[test]
    fn try_map_reports_first_error() {
        let r: Result<Vec<usize>, usize> =
            Executor::default().try_map(10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
