//! Execution policy for the data-parallel loops (assembly rows, property
//! runs, parameter scans).
//!
//! Every parallel map collects into an ordered `Vec`, and any floating-point
//! reduction is done afterwards in index order. Results are therefore
//! bit-identical between `Sequential` and `Parallel` and across thread counts.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs sequentially.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..len` and returns the results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_policies_preserve_order() {
        let seq = Execution::Sequential.map(1000, |i| (i as f64).sqrt());
        let par = Execution::Parallel.map(1000, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        assert_eq!(seq[81], 9.0);
    }
}
