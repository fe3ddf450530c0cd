//! Subcommand implementations. Each reads its settings from flags, then the
//! config file, then defaults, records them in the manifest and writes its
//! outputs in a fixed order.

mod cascade;
mod fields;
mod loops;
mod maps;

use std::path::PathBuf;

use rayon::prelude::*;
use sclqg_core::disk::DEFAULT_EPSILON;
use sclqg_core::rng::Streams;

use crate::cli::{Cli, Command, MapsCommand};
use crate::config::Config;
use crate::error::{CliError, Result};
use crate::output::Run;
pub use crate::output::Status;

/// Settings shared by every command.
pub struct Context {
    pub config: Config,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    /// The stream family of `command`, independent of every other command's.
    pub fn streams(&self, command: &str) -> Streams {
        Streams::new(self.seed).child(command, 0)
    }

    pub fn run(&self, command: &str) -> Result<Run> {
        let mut run = Run::create(&self.out, command, self.seed)?;
        run.set("seed", self.seed);
        Ok(run)
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    let config = Config::load(cli.config.as_deref())?;
    let seed = config.pick(cli.seed, "seed", 0u64)?;
    let threads = config.pick_opt(cli.threads, "threads")?;
    if threads == Some(0) {
        return Err(CliError::validation("`threads` must be at least 1"));
    }
    let ctx = Context {
        config,
        seed,
        out: cli.out.clone(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::validation(format!("`threads`: {e}")))?;
    pool.install(|| match &cli.command {
        Command::SampleGff(a) => fields::sample_gff(a, &ctx),
        Command::SampleDisk(a) => fields::sample_disk(a, &ctx),
        Command::MeasureBoundary(a) => fields::measure_boundary(a, &ctx),
        Command::Rotate(a) => fields::rotate(a, &ctx),
        Command::Couple(a) => loops::couple(a, &ctx),
        Command::MarkovTest(a) => loops::markov_test(a, &ctx),
        Command::Cascade(a) => cascade::cascade(a, &ctx),
        Command::Maps(MapsCommand::Enumerate(a)) => maps::enumerate(a, &ctx),
        Command::Maps(MapsCommand::Sample(a)) => maps::sample(a, &ctx),
        Command::Survival(a) => maps::survival(a, &ctx),
    })
}

/// Runs `f(0..n)` on the pool and returns the results in index order.
pub fn batch<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// The mollification scale used when none is given: the default, or twice
/// the grid spacing on coarse grids.
pub fn default_epsilon(n: usize) -> f64 {
    let h = 2.0 / (n.max(2) - 1) as f64;
    DEFAULT_EPSILON.max(2.0 * h)
}

pub fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::validation(format!(
            "`{key}` must be positive, got {v}"
        )))
    }
}

pub fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::validation(format!(
            "`{key}` must be at least {min}, got {v}"
        )))
    }
}
