//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the `Parallel` mode runs on the rayon pool;
//! without it both modes run on the calling thread. Results are always
//! returned in index order, so callers that reduce in that order are
//! bit-reproducible regardless of thread count.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Whether the crate was built with rayon support.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Number of workers `Exec::Parallel` will use.
pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Caps the global worker pool. Only the first call has an effect.
pub fn set_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(())
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible variant of [`map`]; the first error by index wins.
pub fn try_map<T, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map(exec, n, f).into_iter().collect()
}

/// Runs `f` over `0..n` in chunks and hands each result to `sink` in index
/// order. Keeps at most one chunk of results alive, which bounds memory when
/// each result is a full gradient buffer.
pub fn for_each_ordered<T, F, S>(exec: Exec, n: usize, f: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
    S: FnMut(usize, T) -> Result<()>,
{
    let chunk = if exec.is_parallel() { num_threads().max(1) } else { 1 };
    let mut start = 0;
    while start < n {
        let len = chunk.min(n - start);
        let results = map(exec, len, |i| f(start + i));
        for (i, r) in results.into_iter().enumerate() {
            sink(start + i, r?)?;
        }
        start += len;
    }
    Ok(())
}
