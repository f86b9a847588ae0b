//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction maps work items to an index-ordered `Vec` first and folds
//! sequentially afterwards, so results are bit-identical regardless of the
//! worker count or whether the `parallel` feature is enabled.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sums `f(i)` for `i in 0..n` in fixed index order.
///
/// The per-item values are materialized and folded sequentially; only the
/// evaluation of `f` runs on the pool.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).iter().sum()
}

/// Fills each row of a row-major `n x m` matrix from `f(row)`.
pub fn fill_rows<F>(n: usize, m: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let rows = map_indexed(n, |i| {
        let mut row = vec![0.0; m];
        f(i, &mut row);
        row
    });
    let mut out = Vec::with_capacity(n * m);
    for row in rows {
        out.extend_from_slice(&row);
    }
    out
}
