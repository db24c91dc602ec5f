//! Thin layer over rayon so the rest of the crate builds with or without the
//! `parallel` feature. Without it every helper runs on the calling thread.

/// Number of hardware threads, at least 1.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Whether the crate was built with the rayon backend.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
mod imp {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    use rayon::prelude::*;

    fn pool(workers: usize) -> Arc<rayon::ThreadPool> {
        static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
        let mut pools = POOLS.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        pools
            .entry(workers)
            .or_insert_with(|| {
                Arc::new(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .thread_name(move |i| format!("dgnn-worker-{workers}-{i}"))
                        .build()
                        .expect("failed to build worker pool"),
                )
            })
            .clone()
    }

    /// Runs `f(worker_index)` on `workers` pool threads at once and waits
    /// for all of them.
    pub fn run_workers<F>(workers: usize, f: F)
    where
        F: Fn(usize) + Sync,
    {
        if workers <= 1 {
            f(0);
            return;
        }
        let f = &f;
        pool(workers).scope(|s| {
            for i in 0..workers {
                s.spawn(move |_| f(i));
            }
        });
    }

    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn run_workers<F>(_workers: usize, f: F)
    where
        F: Fn(usize) + Sync,
    {
        f(0);
    }

    pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

pub use imp::{map_indexed, run_workers};
