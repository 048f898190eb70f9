//! Execution strategy for data-parallel loops.
//!
//! The core crate never spawns threads. Parallelizable loops (ray batches,
//! image tiles, gradient chunks) are expressed as an indexed map through
//! this trait; the std companion crate provides a rayon-backed executor.
//! Call sites fix the chunk count independently of worker count and reduce
//! chunk outputs in index order, so results do not depend on which executor
//! runs them or on how many threads it uses.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0..n)` and returns the outputs in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs every job on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct SerialExec;

impl Executor for SerialExec {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n).map(f).collect()
    }
}

/// Splits `len` items into at most `chunks` contiguous ranges of near-equal
/// size. The split depends only on (`len`, `chunks`), never on thread count.
pub fn chunk_ranges(len: usize, chunks: usize) -> Vec<core::ops::Range<usize>> {
    let chunks = chunks.max(1).min(len.max(1));
    let base = len / chunks;
    let extra = len % chunks;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0;
    for i in 0..chunks {
        let size = base + usize::from(i < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}
