//! Execution strategy for the data-parallel inner loops.

/// How a hot loop is executed.
///
/// `Parallel` is only available with the `parallel` feature; without it every
/// loop runs sequentially and results are identical either way, since all
/// parallel maps preserve input order and reductions are performed
/// sequentially afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Exec {
    /// Parallel when compiled with the `parallel` feature, sequential otherwise.
    pub fn auto() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }

    /// Order-preserving map over a slice.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
        }
    }

    /// Order-preserving flat map over a slice.
    pub fn flat_map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Vec<R> + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().flat_map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().flat_map_iter(f).collect()
            }
        }
    }
}

impl Default for Exec {
    fn default() -> Self {
        Exec::auto()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u32> = (0..1000).collect();
        let out = Exec::auto().map(&xs, |x| x * 2);
        assert_eq!(out, Exec::Sequential.map(&xs, |x| x * 2));
        assert_eq!(out[999], 1998);
    }

    #[test]
    fn flat_map_preserves_order() {
        let xs: Vec<u32> = (0..50).collect();
        let f = |x: &u32| vec![*x; (*x % 3) as usize];
        assert_eq!(
            Exec::auto().flat_map(&xs, f),
            Exec::Sequential.flat_map(&xs, f)
        );
    }
}
