//! Data-parallel map helpers.
//!
//! Independent work items (oracle frontier expansion, threshold sweeps,
//! seeded baseline runs) go through [`map_ordered`], which fans out over
//! rayon when the `parallel` feature is enabled and otherwise degrades to
//! a plain sequential loop. Output order always matches input order, so
//! results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order. Runs on the rayon pool when the
/// `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Always-sequential variant, kept for benchmarking the two paths against
/// each other.
pub fn map_ordered_seq<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
