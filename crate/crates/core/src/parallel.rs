//! Data-parallel dispatch with a sequential fallback.
//!
//! Every sweep in the crate funnels through [`map_indexed`]: results are
//! collected by index, so the output is independent of scheduling and of the
//! worker count. Without the `parallel` feature all work runs on the caller's
//! thread.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Execution {
    Sequential,
    /// `workers == 0` lets the pool pick the machine's thread count.
    Parallel { workers: usize },
    #[default]
    Auto,
}

impl Execution {
    pub fn with_workers(workers: usize) -> Self {
        if workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Sequential)
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match exec {
            Execution::Sequential => (0..n).map(f).collect(),
            Execution::Auto => (0..n).into_par_iter().map(f).collect(),
            Execution::Parallel { workers } => {
                match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                    Err(_) => (0..n).map(f).collect(),
                }
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = exec;
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for exec in [
            Execution::Sequential,
            Execution::Auto,
            Execution::Parallel { workers: 3 },
        ] {
            let v = map_indexed(100, exec, |i| i * i);
            assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
        }
    }
}
