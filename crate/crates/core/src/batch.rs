//! Independent runs over many configurations (typically one per seed).
//!
//! With the `parallel` feature (on by default) the batch functions fan out
//! over a rayon thread pool; without it they run one after another. Results
//! come back in input order either way, and each run depends only on its own
//! configuration, so the two paths produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::engine::{run_with, RunOptions, RunOutput, SimError};

/// Copies of `config`, one per seed.
pub fn with_seeds<I: IntoIterator<Item = u64>>(config: &SimConfig, seeds: I) -> Vec<SimConfig> {
    seeds.into_iter().map(|seed| SimConfig { seed, ..config.clone() }).collect()
}

/// Applies `f` to every configuration, one after another.
pub fn map_sequential<T, F>(configs: &[SimConfig], f: F) -> Vec<T>
where
    F: Fn(&SimConfig) -> T,
{
    configs.iter().map(f).collect()
}

/// Applies `f` to every configuration on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(configs: &[SimConfig], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&SimConfig) -> T + Sync + Send,
{
    configs.par_iter().map(f).collect()
}

/// Applies `f` to every configuration, in parallel when the feature is on.
pub fn map_batch<T, F>(configs: &[SimConfig], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&SimConfig) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(configs, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(configs, f)
    }
}

pub fn run_batch_sequential(configs: &[SimConfig], options: RunOptions) -> Vec<Result<RunOutput, SimError>> {
    map_sequential(configs, |c| run_with(c, options))
}

#[cfg(feature = "parallel")]
pub fn run_batch_parallel(configs: &[SimConfig], options: RunOptions) -> Vec<Result<RunOutput, SimError>> {
    map_parallel(configs, |c| run_with(c, options))
}

/// Runs every configuration.
pub fn run_batch(configs: &[SimConfig], options: RunOptions) -> Vec<Result<RunOutput, SimError>> {
    map_batch(configs, |c| run_with(c, options))
}
