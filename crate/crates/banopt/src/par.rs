//! Data-parallel primitives with a sequential fallback.
//!
//! Everything routed through here preserves input order, so builds with and
//! without the `parallel` feature produce identical results.

/// Maps `f` over `items`, returning results in input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

/// Maps `f` over `items`, returning results in input order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Caps the global thread pool. `None` leaves the default. Calling this after
/// the pool exists is a silent no-op; without the `parallel` feature it does
/// nothing at all.
pub fn configure_threads(cap: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
}
