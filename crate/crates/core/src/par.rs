//! Ordered map over an index range, parallel when the `parallel` feature is on.
//!
//! Results are always collected in index order so reductions downstream see
//! the same sequence regardless of scheduling.

/// Below this many items the work is done inline; spawning costs more than it saves.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_LEN: usize = 512;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if len < PARALLEL_MIN_LEN {
        return (0..len).map(f).collect();
    }
    (0..len).into_par_iter().with_min_len(64).map(f).collect()
}

/// Like [`map_range`] but always fans out; for coarse-grained tasks.
#[cfg(feature = "parallel")]
pub(crate) fn map_tasks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_tasks<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn preserves_order() {
        let v = super::map_range(5000, |i| i * 2);
        assert_eq!(v, (0..5000).map(|i| i * 2).collect::<Vec<_>>());
        let t = super::map_tasks(10, |i| i + 1);
        assert_eq!(t, (1..11).collect::<Vec<_>>());
    }
}
