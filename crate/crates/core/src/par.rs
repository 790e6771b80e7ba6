//! Switch between rayon and plain iterators.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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

pub(crate) fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
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

/// Ordered associative reduction.
pub(crate) fn reduce_ordered<T, F>(items: Vec<T>, identity: T, op: F) -> T
where
    T: Send + Sync + Clone,
    F: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .into_par_iter()
            .reduce(|| identity.clone(), op)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().fold(identity, op)
    }
}
