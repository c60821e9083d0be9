//! Data-parallel helpers.
//!
//! Everything that fans out over independent work items (probe lists,
//! convolution rows, independent solves) goes through [`Execution`], so the
//! same code path runs on rayon when the `parallel` feature is enabled and
//! sequentially otherwise. Results are always returned in input order and
//! each item is computed with the same arithmetic either way, so output is
//! bit-identical across policies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run a batch of independent work items.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    /// Uses the rayon global pool. Without the `parallel` feature this is the
    /// same as `Sequential`.
    Parallel,
}

impl Execution {
    /// `Parallel` when the crate was built with rayon, else `Sequential`.
    pub fn best() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn map<T, U, F>(self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    /// Fills `out[i] = f(i)`.
    pub fn fill<U, F>(self, out: &mut [U], f: F)
    where
        U: Send,
        F: Fn(usize) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => out
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, slot)| *slot = f(i)),
            _ => out
                .iter_mut()
                .enumerate()
                .for_each(|(i, slot)| *slot = f(i)),
        }
    }

    /// Maps a fallible function, returning the first error in input order.
    pub fn try_map<T, U, E, F>(self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let xs: Vec<f64> = (0..5000).map(|i| i as f64 * 0.37).collect();
        let a = Execution::Sequential.map(&xs, |x| x.sin() * x.exp().ln_1p());
        let b = Execution::best().map(&xs, |x| x.sin() * x.exp().ln_1p());
        assert_eq!(a, b);

        let mut fa = vec![0.0; 300];
        let mut fb = vec![0.0; 300];
        Execution::Sequential.fill(&mut fa, |i| (i as f64).sqrt());
        Execution::Parallel.fill(&mut fb, |i| (i as f64).sqrt());
        assert_eq!(fa, fb);
    }

    #[test]
    fn try_map_reports_first_error() {
        let xs = [1, 2, -3, -4];
        let r: Result<Vec<i32>, i32> =
            Execution::best().try_map(&xs, |&x| if x < 0 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(-3));
    }
}
