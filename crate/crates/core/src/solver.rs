//! The ASC-PG main loop and the SCGD baseline.
//!
//! One ASC-PG iteration, given `(x_k, y_k)` and step sizes `(α_k, β_k)`:
//!
//! 1. draw `∇g_{w_k}(x_k)` (inner query at `x_k`) and `∇f_{v_k}(y_k)`
//!    (outer query at `y_k`);
//! 2. `x_{k+1} = prox_{α_k R}( x_k − α_k ∇g_{w_k}(x_k)ᵀ ∇f_{v_k}(y_k) )`;
//! 3. extrapolate `z_{k+1} = (1 − 1/β_k) x_k + (1/β_k) x_{k+1}`;
//! 4. draw `g_{w_{k+1}}(z_{k+1})` (inner query at `z_{k+1}`) and smooth
//!    `y_{k+1} = (1 − β_k) y_k + β_k g_{w_{k+1}}(z_{k+1})`.
//!
//! The extrapolation in step 3 places the value query ahead of the iterate
//! so the smoothed tracker `y_k` stays a nearly unbiased estimate of
//! `g(x_k)`. SCGD is the same loop without the extrapolation: the value
//! query lands at `x_{k+1}` itself (`z_{k+1} = x_{k+1}`). Both methods issue
//! exactly 3 oracle queries per iteration.

use crate::error::{Error, Result};
use crate::oracle::{CompositionOracle, Problem};
use crate::prox::Regularizer;
use crate::schedules::Schedule;
use crate::trace::{RunTrace, TraceRecord};
use crate::Vector;

/// Any iterate coordinate beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    AscPg,
    Scgd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AscPg => "ascpg",
            Method::Scgd => "scgd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ascpg" => Ok(Method::AscPg),
            "scgd" => Ok(Method::Scgd),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected ascpg or scgd)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    pub schedule: Schedule,
    pub regularizer: Regularizer,
    /// Iteration budget `K`.
    pub max_iters: u64,
    /// Seed for the oracle built by [`run`].
    pub seed: u64,
    /// Record every s-th iteration (the final one is always recorded).
    pub trace_stride: u64,
    /// Spend one extra inner query so the tracker starts at `g_{w}(x_1)`
    /// instead of a supplied `y_0`.
    pub warm_start_y: bool,
    /// Initial iterate; zero vector when absent.
    pub x0: Option<Vector>,
    /// Initial tracker when `warm_start_y` is off; zero vector when absent.
    pub y0: Option<Vector>,
}

impl SolverConfig {
    pub fn new(method: Method, schedule: Schedule, regularizer: Regularizer, max_iters: u64) -> Self {
        Self {
            method,
            schedule,
            regularizer,
            max_iters,
            seed: 0,
            trace_stride: 1,
            warm_start_y: true,
            x0: None,
            y0: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.trace_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.trace_stride < 1 {
            return Err(Error::invalid("trace_stride must be at least 1"));
        }
        Ok(())
    }
}

/// The live iterates of one run.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Main iterate `x_k`.
    pub x: Vector,
    /// Inner-value tracker `y_k`.
    pub y: Vector,
    /// Last extrapolation point; starts at `x_1`.
    pub z: Vector,
    /// Iteration counter, `k ≥ 1`.
    pub k: u64,
    /// Sampling-oracle queries issued so far.
    pub oracle_queries: u64,
}

/// What one call to [`Solver::step`] produced, for callers that replay or
/// audit the update (the run loop only keeps `step_len`).
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub alpha: f64,
    pub beta: f64,
    /// `‖x_{k+1} − x_k‖`.
    pub step_len: f64,
    /// The inner-value sample consumed by the smoothing update.
    pub inner_value: Vector,
}

/// Step-by-step driver for one run. [`run_oracle`] wraps it; tests drive it
/// directly to check per-iteration identities.
pub struct Solver<'a, O: CompositionOracle + ?Sized> {
    oracle: &'a mut O,
    cfg: &'a SolverConfig,
    state: SolverState,
}

impl<'a, O: CompositionOracle + ?Sized> Solver<'a, O> {
    /// Sets up `x_1`, `z_1 = x_1` and `y_1` (one warm-start query when
    /// configured).
    pub fn new(oracle: &'a mut O, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let n = oracle.x_dim();
        let m = oracle.y_dim();
        let x = match &cfg.x0 {
            Some(x0) => {
                crate::oracle::check_dim("x0", n, x0)?;
                x0.clone()
            }
            None => Vector::zeros(n),
        };
        let mut queries = 0;
        let y = if cfg.warm_start_y {
            queries += 1;
            oracle.query_inner(&x)?.value
        } else {
            match &cfg.y0 {
                Some(y0) => {
                    crate::oracle::check_dim("y0", m, y0)?;
                    y0.clone()
                }
                None => Vector::zeros(m),
            }
        };
        let z = x.clone();
        Ok(Self {
            oracle,
            cfg,
            state: SolverState {
                x,
                y,
                z,
                k: 1,
                oracle_queries: queries,
            },
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn oracle(&self) -> &O {
        self.oracle
    }

    /// Executes iteration `k` and advances the state to `k + 1`.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let k = self.state.k;
        let alpha = self.cfg.schedule.alpha(k);
        let beta = self.cfg.schedule.beta(k);

        let jac_sample = self.oracle.query_inner(&self.state.x)?;
        let outer_sample = self.oracle.query_outer(&self.state.y)?;
        let direction = jac_sample.jacobian.tr_mul(&outer_sample.grad);

        let mut shifted = self.state.x.clone();
        shifted.axpy(-alpha, &direction, 1.0);
        let x_next = self.cfg.regularizer.prox(alpha, &shifted)?;

        let z_next = match self.cfg.method {
            Method::AscPg => {
                let inv = 1.0 / beta;
                let mut z = x_next.clone();
                z.axpy(1.0 - inv, &self.state.x, inv);
                z
            }
            Method::Scgd => x_next.clone(),
        };

        let value_sample = self.oracle.query_inner(&z_next)?;
        let mut y_next = value_sample.value.clone();
        y_next.axpy(1.0 - beta, &self.state.y, beta);

        self.state.oracle_queries += 3;
        let step_len = (&x_next - &self.state.x).norm();

        if !within_limits(&x_next) || !within_limits(&y_next) || !within_limits(&z_next) {
            return Err(Error::Diverged { k, partial: None });
        }

        self.state.x = x_next;
        self.state.y = y_next;
        self.state.z = z_next;
        self.state.k = k + 1;

        Ok(StepOutcome {
            alpha,
            beta,
            step_len,
            inner_value: value_sample.value,
        })
    }
}

fn within_limits(v: &Vector) -> bool {
    v.iter().all(|c| c.is_finite() && c.abs() <= DIVERGENCE_LIMIT)
}

/// Builds a seeded oracle from the problem and runs the configured method
/// for `max_iters` iterations.
pub fn run(problem: &dyn Problem, cfg: &SolverConfig) -> Result<RunTrace> {
    let mut oracle = problem.oracle(cfg.seed);
    run_oracle(oracle.as_mut(), cfg)
}

/// Runs on an existing oracle. Identical oracles and configs yield
/// bit-identical traces.
pub fn run_oracle(oracle: &mut dyn CompositionOracle, cfg: &SolverConfig) -> Result<RunTrace> {
    let mut solver = Solver::new(oracle, cfg)?;
    let total = cfg.max_iters;
    let mut records: Vec<TraceRecord> =
        Vec::with_capacity((total / cfg.trace_stride + 2) as usize);

    for k in 1..=total {
        let record = (k - 1) % cfg.trace_stride == 0 || k == total;
        let pending = if record {
            Some(observe(&solver, cfg))
        } else {
            None
        };
        match solver.step() {
            Ok(outcome) => {
                if let Some(mut rec) = pending {
                    rec.step_len = outcome.step_len;
                    records.push(rec);
                }
            }
            Err(Error::Diverged { k, .. }) => {
                let partial = RunTrace {
                    records,
                    final_x: solver.state.x.clone(),
                    final_y: solver.state.y.clone(),
                    iters: k,
                    oracle_queries: solver.state.oracle_queries,
                };
                return Err(Error::Diverged {
                    k,
                    partial: Some(Box::new(partial)),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let state = solver.state();
    Ok(RunTrace {
        records,
        final_x: state.x.clone(),
        final_y: state.y.clone(),
        iters: total,
        oracle_queries: state.oracle_queries,
    })
}

/// Metrics at the current iterate; `step_len` is filled in after the step.
fn observe<O: CompositionOracle + ?Sized>(solver: &Solver<'_, O>, cfg: &SolverConfig) -> TraceRecord {
    let state = solver.state();
    let x = &state.x;
    let (dist, dist_sq, grad_norm_sq, tracking_err_sq, objective) = match solver.oracle.truth() {
        Some(truth) => {
            let dist = truth.project_solution(x).map(|p| (x - p).norm());
            let grad_sq = truth.gradient(x).norm_squared();
            let track = (&state.y - truth.inner_value(x)).norm_squared();
            let obj = truth.objective(x) + cfg.regularizer.value(x);
            (
                dist,
                dist.map(|d| d * d),
                Some(grad_sq),
                Some(track),
                Some(obj),
            )
        }
        None => (None, None, None, None, None),
    };
    TraceRecord {
        k: state.k,
        // queries issued once this iteration completes
        queries: state.oracle_queries + 3,
        dist,
        dist_sq,
        grad_norm_sq,
        tracking_err_sq,
        step_len: 0.0,
        objective,
    }
}
