//! Replication driver.
//!
//! Every ensemble in the crate is produced by `replicate`, which evaluates a
//! closure for indices `0..reps` and returns the results in index order.
//! With the `parallel` feature the indices are spread over the current rayon
//! pool; without it (or with [`Execution::Sequential`]) they run in a plain
//! loop. Because each replication derives its own stream from its index, the
//! output is identical under both policies and any thread count.

/// How replications are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy actually fans out to threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub fn replicate<T, F>(exec: Execution, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if exec == Execution::Parallel {
            use rayon::prelude::*;
            return (0..reps).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..reps).map(f).collect()
}

/// Like [`replicate`] but stops at the first error (by index).
pub fn try_replicate<T, E, F>(exec: Execution, reps: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    replicate(exec, reps, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = replicate(Execution::Sequential, 1000, f);
        let b = replicate(Execution::Parallel, 1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_wins() {
        let r: Result<Vec<usize>, usize> =
            try_replicate(Execution::Parallel, 100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}
