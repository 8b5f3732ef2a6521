//! Run-level parallelism. Each run owns all of its state, so a batch of runs
//! maps cleanly onto a rayon pool; without the `parallel` feature every
//! batch runs sequentially.

/// How a batch of independent runs is executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    /// Rayon pool, optionally capped at `threads` workers.
    Parallel { threads: Option<usize> },
}

impl Execution {
    pub fn parallel() -> Self {
        Execution::Parallel { threads: None }
    }

    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Applies `f` to every item, preserving input order in the output.
pub fn map_runs<T, R, F>(items: Vec<T>, exec: Execution, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => items.into_iter().map(f).collect(),
        Execution::Parallel { threads } => par_map(items, threads, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: Vec<T>, threads: Option<usize>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(|| items.into_par_iter().map(&f).collect()),
            Err(_) => items.into_iter().map(f).collect(),
        },
        None => items.into_par_iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: Vec<T>, _threads: Option<usize>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let items: Vec<u64> = (0..64).collect();
        let seq = map_runs(items.clone(), Execution::Sequential, |x| x * x);
        let par = map_runs(items.clone(), Execution::parallel(), |x| x * x);
        let capped = map_runs(items, Execution::Parallel { threads: Some(2) }, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq, capped);
    }
}
