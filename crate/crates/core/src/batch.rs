//! Order-preserving map over independent work items: seeds, corpus files,
//! mutants. Runs on the rayon pool with the `parallel` feature and on the
//! calling thread otherwise; results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every item, keeping input order.
#[cfg(feature = "parallel")]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Apply `f` to every item, keeping input order.
#[cfg(not(feature = "parallel"))]
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Sequential reference version of [`map`], used by benchmarks and tests.
pub fn map_sequential<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn keeps_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = super::map(&xs, |x| x * x);
        assert_eq!(ys, super::map_sequential(&xs, |x| x * x));
    }
}
