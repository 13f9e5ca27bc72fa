//! Per-sequence data parallelism. Results always come back in input order,
//! so any reduction over them is independent of the thread count.

use crate::error::{HpnetError, Result};

/// Environment variable selecting the worker count; `0` or `1` runs
/// sequentially.
pub const THREADS_ENV: &str = "HPNET_THREADS";

#[derive(Debug)]
pub struct Executor {
    threads: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Self {
        Executor {
            threads: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// A pool of `threads` workers. Without the `parallel` feature every
    /// request degrades to sequential execution.
    pub fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| HpnetError::config(THREADS_ENV, e.to_string()))?;
            Ok(Executor {
                threads,
                pool: Some(pool),
            })
        }
        #[cfg(not(feature = "parallel"))]
        Ok(Self::sequential())
    }

    /// Reads [`THREADS_ENV`]; unset means one worker per available core.
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| HpnetError::config(THREADS_ENV, format!("`{v}` is not a thread count")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// `f` applied to every item, results in item order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_input_order() {
        let items: Vec<u64> = (0..100).collect();
        for threads in [0, 1, 3] {
            let ex = Executor::new(threads).unwrap();
            assert_eq!(
                ex.map(&items, |&x| x * x),
                items.iter().map(|x| x * x).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn zero_threads_is_sequential() {
        assert_eq!(Executor::new(0).unwrap().threads(), 1);
    }
}
