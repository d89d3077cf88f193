//! Injected parallelism.
//!
//! Core code never spawns threads. Work that may run in parallel is expressed
//! as an indexed map; results are always returned in index order so that the
//! outcome does not depend on the executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0), …, f(n−1)` and return the results in order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Collect `Result`s produced by an executor, stopping at the first error in
/// index order.
pub fn try_map<E, T, F>(exec: &E, n: usize, f: F) -> crate::Result<Vec<T>>
where
    E: Executor + ?Sized,
    T: Send,
    F: Fn(usize) -> crate::Result<T> + Sync + Send,
{
    exec.map(n, f).into_iter().collect()
}
