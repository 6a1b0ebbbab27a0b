//! Execution policy for the data-parallel kernels.
//!
//! Every hot loop in the crate (FFT rows, pointwise field products, quadtree
//! levels, experiment sweeps) goes through the helpers here. With the
//! `parallel` feature they dispatch to rayon; without it, or when
//! [`Exec::Sequential`] is requested, they run on the calling thread.
//! Work is always split along fixed boundaries and reduced in a fixed order,
//! so results are bit-identical for every thread count.

/// Chooses between the rayon path and the plain sequential path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// True when this policy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Applies `f(row_index, row)` to each `width`-sized chunk of `data`.
    pub fn for_each_row<T, F>(self, data: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
        for (i, row) in data.chunks_mut(width).enumerate() {
            f(i, row);
        }
    }

    /// Like [`Exec::for_each_row`] but with per-worker scratch state.
    pub fn for_each_row_init<T, S, I, F>(self, data: &mut [T], width: usize, init: I, f: F)
    where
        T: Send,
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(width)
                .enumerate()
                .for_each_init(&init, |s, (i, row)| f(s, i, row));
            return;
        }
        let mut s = init();
        for (i, row) in data.chunks_mut(width).enumerate() {
            f(&mut s, i, row);
        }
    }

    /// Order-preserving map over a slice.
    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Order-preserving map over `0..len`.
    pub fn map_range<U, F>(self, len: usize, f: F) -> Vec<U>
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Sum of `f(i)` over `0..len`, computed as per-block partial sums that
    /// are then added in block order. The block size is fixed, so the
    /// rounding does not depend on the thread count.
    pub fn sum_range<F>(self, len: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        const BLOCK: usize = 4096;
        let blocks = len.div_ceil(BLOCK);
        let partial = self.map_range(blocks, |b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        });
        partial.into_iter().sum()
    }
}
