//! Data-parallel map with a sequential fallback.

use crate::mcmc::Execution;

/// Maps `f` over `0..n`, in parallel when requested and the `parallel`
/// feature is compiled in. Output order always follows the index.
pub fn map_indices<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// True when `Execution::Parallel` actually runs on the rayon pool.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
