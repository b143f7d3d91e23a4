//! Multi-seed execution.
//!
//! A single run is strictly sequential; throughput comes from running many
//! seeds at once. Each worker builds its own oracle, so results are
//! bit-identical regardless of the worker count, and the returned order
//! always follows the input seed order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oracle::Problem;
use crate::solver::{run, SolverConfig};
use crate::trace::RunTrace;

/// Runs one configuration across `seeds`, in parallel, preserving order.
pub fn run_seeds(
    problem: &dyn Problem,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Vec<(u64, Result<RunTrace>)> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            (seed, run(problem, &cfg))
        })
        .collect()
}

/// Like [`run_seeds`], but failing fast: the first per-seed error (by seed
/// order) is returned and annotated with the offending seed.
pub fn run_seeds_collect(
    problem: &dyn Problem,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<Vec<RunTrace>> {
    let mut traces = Vec::with_capacity(seeds.len());
    for (seed, result) in run_seeds(problem, cfg, seeds) {
        match result {
            Ok(t) => traces.push(t),
            Err(Error::Diverged { k, partial }) => {
                return Err(Error::InvalidArgument(format!(
                    "seed {seed} diverged at iteration {k} ({} records retained)",
                    partial.map(|p| p.records.len()).unwrap_or(0)
                )))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(traces)
}

/// Runs a closure inside a dedicated thread pool of `workers` threads
/// (`None` keeps the global pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool construction")
            .install(f),
    }
}

/// Seed list `start, start+1, …` of length `count`.
pub fn seed_range(start: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| start + i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::LinearProblem;
    use crate::prox::Regularizer;
    use crate::schedules::{Regime, Schedule};
    use crate::solver::Method;

    fn small_cfg() -> SolverConfig {
        SolverConfig::new(
            Method::AscPg,
            Schedule::for_regime(Regime::StronglyConvexLinear),
            Regularizer::zero(),
            50,
        )
    }

    #[test]
    fn parallel_and_serial_execution_agree_bitwise() {
        let problem = LinearProblem::synthetic(3, 4, 0.2, 11).unwrap();
        let cfg = small_cfg();
        let seeds = seed_range(1, 12);
        let serial = with_workers(Some(1), || run_seeds_collect(&problem, &cfg, &seeds)).unwrap();
        let parallel = with_workers(Some(4), || run_seeds_collect(&problem, &cfg, &seeds)).unwrap();
        assert_eq!(serial.len(), parallel.len());
        for (a, b) in serial.iter().zip(&parallel) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn seed_order_is_preserved() {
        let problem = LinearProblem::synthetic(2, 2, 0.1, 3).unwrap();
        let cfg = small_cfg();
        let seeds = vec![9, 3, 7];
        let out = run_seeds(&problem, &cfg, &seeds);
        let got: Vec<u64> = out.iter().map(|(s, _)| *s).collect();
        assert_eq!(got, seeds);
    }
}
