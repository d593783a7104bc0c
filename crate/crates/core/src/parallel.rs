//! Index-range loops that run on rayon when the `parallel` feature is
//! enabled (the default) and serially otherwise.
//!
//! Every helper is deterministic regardless of thread count: `map_indexed`
//! preserves index order, the integer sums fold with an exact associative
//! operation, and the f64 maximum is order-insensitive. Monte-Carlo callers
//! pair these with one derived RNG stream per index.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f)` collected in index order.
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

/// Number of indices satisfying `pred`.
pub fn count_indexed<F>(n: usize, pred: F) -> u64
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().filter(|&i| pred(i)).count() as u64
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).filter(|&i| pred(i)).count() as u64
    }
}

/// Exact integer sum of `f` over the index range.
pub fn sum_indexed_u64<F>(n: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).sum()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).sum()
    }
}

/// Maximum of `f` over the index range; `NEG_INFINITY` when `n == 0`.
pub fn max_indexed_f64<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_totals() {
        let v = map_indexed(100, |i| i * i);
        assert_eq!(v[7], 49);
        assert_eq!(v.len(), 100);
        assert_eq!(sum_indexed_u64(10, |i| i as u64), 45);
        assert_eq!(count_indexed(10, |i| i % 3 == 0), 4);
        assert_eq!(max_indexed_f64(5, |i| -(i as f64)), 0.0);
        assert_eq!(max_indexed_f64(0, |_| 1.0), f64::NEG_INFINITY);
    }
}
