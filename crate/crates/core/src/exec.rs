//! Execution strategy for data-parallel loops.
//!
//! Every parallel map returns results in input order, so reductions that
//! follow run in a fixed order and produce bit-identical floats regardless of
//! thread count. Without the `parallel` feature all strategies run
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Global rayon pool.
    #[default]
    Parallel,
    /// Dedicated pool with a fixed thread count.
    Threads(usize),
}

impl Exec {
    /// `None` or `Some(0)` means the global pool, `Some(1)` means sequential.
    pub fn from_threads(threads: Option<usize>) -> Self {
        match threads {
            None | Some(0) => Exec::Parallel,
            Some(1) => Exec::Sequential,
            Some(n) => Exec::Threads(n),
        }
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Threads(n) => match rayon::ThreadPoolBuilder::new().num_threads(*n).build() {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("thread pool unavailable ({e}), running sequentially");
                    items.iter().map(f).collect()
                }
            },
            #[cfg(not(feature = "parallel"))]
            _ => items.iter().map(f).collect(),
        }
    }
}
