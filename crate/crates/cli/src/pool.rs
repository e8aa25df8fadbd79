use rayon::prelude::*;

use crate::error::{Result, RunError};

/// Fixed-size worker pool. Results always come back in input order.
pub struct Pool {
    inner: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(RunError::config("--workers must be >= 1"));
        }
        let inner = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| RunError::config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { inner })
    }

    pub fn workers(&self) -> usize {
        self.inner.current_num_threads()
    }

    /// Maps `f` over `items` in parallel. On failure, reports the error of
    /// the lowest-index item so diagnostics do not depend on scheduling.
    pub fn map<T, R, E, F>(&self, items: &[T], f: F) -> std::result::Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> std::result::Result<R, E> + Sync + Send,
    {
        let results: Vec<_> = self.inner.install(|| items.par_iter().map(&f).collect());
        results.into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_first_error() {
        let pool = Pool::new(4).unwrap();
        let xs: Vec<u64> = (0..1000).collect();
        let ys: Vec<u64> = pool.map(&xs, |&x| Ok::<_, ()>(x * x)).unwrap();
        assert_eq!(ys, xs.iter().map(|x| x * x).collect::<Vec<_>>());
        let err = pool
            .map(&xs, |&x| if x % 100 == 37 { Err(x) } else { Ok(x) })
            .unwrap_err();
        assert_eq!(err, 37);
        assert!(Pool::new(0).is_err());
    }
}
