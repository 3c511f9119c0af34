//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run on the calling thread. Each output element is computed by one
//! closure call with a fixed internal summation order, so results do not
//! depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

// Rows per rayon task; smaller chunks cost more in scheduling than they save.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 64;

/// Fills `out[i] = row(i)` for every index.
pub fn fill_rows<F>(out: &mut [f64], row: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut()
            .with_min_len(MIN_CHUNK)
            .enumerate()
            .for_each(|(i, o)| *o = row(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        fill_rows_sequential(out, row);
    }
}

/// Sequential counterpart of [`fill_rows`], always available.
pub fn fill_rows_sequential<F>(out: &mut [f64], row: F)
where
    F: Fn(usize) -> f64,
{
    for (i, o) in out.iter_mut().enumerate() {
        *o = row(i);
    }
}

/// Maps every item, preserving input order in the output.
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Caps the global worker pool. Only the first call has any effect.
pub fn init_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}
