//! Parallel execution on worker threads with large stacks, needed because
//! the interpreter recurses once per MiniLang call frame.

use std::sync::OnceLock;

use rayon::prelude::*;

fn worker_pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .stack_size(64 * 1024 * 1024)
            .thread_name(|i| format!("forgespark-exec-{i}"))
            .build()
            .expect("execution thread pool")
    })
}

/// Maps `f` over `items` in parallel, preserving order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    worker_pool().install(|| items.par_iter().map(f).collect())
}
