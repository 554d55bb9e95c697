//! Helpers that dispatch to rayon when the `parallel` feature is on.
//!
//! Every helper here is order-preserving, so callers get the same result
//! regardless of the thread count or the feature flag.

/// Maps `f` over `items`, in parallel when the feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Fallible variant of [`map_collect`]; the first error in input order wins.
pub fn try_map_collect<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map_collect(items, f).into_iter().collect()
}

/// Applies `f` to every element in place.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter_mut().for_each(f);
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    F: Fn(&mut T),
{
    items.iter_mut().for_each(f);
}

/// Folds chunks of `items` into partial accumulators and merges them.
///
/// `merge` must be associative and commutative with `init()` as identity;
/// hash-table unions of counts are the intended use.
#[cfg(feature = "parallel")]
pub fn fold_reduce<T, A, I, F, M>(items: &[T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    use rayon::prelude::*;
    let threads = rayon::current_num_threads();
    if threads == 1 {
        return items.iter().fold(init(), fold);
    }
    // A few large chunks per thread keep the number of partial tables, and
    // so the merge work, bounded.
    let chunk = items.len().div_ceil(threads * 4).max(1);
    items
        .par_chunks(chunk)
        .map(|c| c.iter().fold(init(), &fold))
        .reduce(&init, merge)
}

#[cfg(not(feature = "parallel"))]
pub fn fold_reduce<T, A, I, F, M>(items: &[T], init: I, fold: F, _merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(A, &T) -> A,
    M: Fn(A, A) -> A,
{
    items.iter().fold(init(), fold)
}

/// Whether this build dispatches to rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
