//! Thread-pool selection for the parallel kernels.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::ThreadPool;

fn pool_cache() -> &'static Mutex<HashMap<usize, Arc<ThreadPool>>> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    POOLS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Worker threads of the pool the caller currently runs in.
pub fn current_threads() -> usize {
    rayon::current_num_threads()
}

/// Runs `op` inside a pool with exactly `threads` worker threads.
///
/// Pools are cached per thread count, so repeated calls are cheap.
/// `threads == 0` runs `op` in the caller's current pool (the rayon global
/// pool by default).
///
/// Every parallel kernel in this crate partitions work by row index and keeps
/// reductions sequential, so results are bit-identical for any thread count.
pub fn with_threads<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return op();
    }
    let pool = {
        let mut cache = pool_cache().lock().unwrap();
        cache
            .entry(threads)
            .or_insert_with(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(threads)
                        .build()
                        .expect("thread pool construction"),
                )
            })
            .clone()
    };
    pool.install(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn installs_requested_thread_count() {
        for t in [1, 2, 4] {
            let seen = with_threads(t, rayon::current_num_threads);
            assert_eq!(seen, t);
        }
    }

    #[test]
    fn zero_uses_current_pool() {
        let outer = rayon::current_num_threads();
        assert_eq!(with_threads(0, rayon::current_num_threads), outer);
    }
}
