//! Worker pool with ordered merges: results never depend on the number of
//! workers or on scheduling.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::CliError;

/// Paths per work unit. Fixed, so the split of streams is the same for
/// every pool size.
pub const CHUNK: u64 = 2048;

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self, CliError> {
        if workers == 0 {
            return Err(CliError::Pool("at least one worker is required".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Pool(e.to_string()))?;
        Ok(Self { pool })
    }

    /// `f` applied to every item, results in item order.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }

    /// Runs `f` on consecutive stream ranges of [`CHUNK`] paths and
    /// concatenates the results in stream order.
    pub fn streams<R: Send, E: Send>(
        &self,
        paths: u64,
        f: impl Fn(Range<u64>) -> Result<Vec<R>, E> + Sync,
    ) -> Result<Vec<R>, E> {
        let ranges: Vec<Range<u64>> = (0..paths.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(paths)).collect();
        let parts: Vec<Result<Vec<R>, E>> = self.map(&ranges, |r| f(r.clone()));
        let mut out = Vec::with_capacity(paths as usize);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_pool_size() {
        let f = |r: Range<u64>| Ok::<_, ()>(r.map(|i| i * i).collect::<Vec<_>>());
        let a = Pool::new(1).unwrap().streams(10_000, f).unwrap();
        let b = Pool::new(4).unwrap().streams(10_000, f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10_000);
        assert_eq!(a[9_999], 9_999 * 9_999);
    }

    #[test]
    fn zero_workers_rejected() {
        assert!(Pool::new(0).is_err());
    }
}
