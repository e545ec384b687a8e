//! Task execution strategy.
//!
//! Algorithms split their work into independent indexed tasks and merge
//! the results in index order, so any executor that preserves the output
//! order gives bitwise identical results.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Runs `f(0..tasks)` and returns the results in task order.
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every task on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..tasks).map(f).collect()
    }
}
