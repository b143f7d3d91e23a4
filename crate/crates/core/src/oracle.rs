//! The sampling-oracle interface.
//!
//! Solvers never see a problem directly; they interact with a
//! [`CompositionOracle`] that answers two kinds of queries:
//!
//! - given `x`, one coupled random draw of the inner value `g_w(x)` together
//!   with the Jacobian `∇g_w(x)` of the same realization,
//! - given `y`, one random draw of the outer gradient `∇f_v(y)`.
//!
//! Problems that admit closed-form expectations additionally expose a
//! [`Truth`] accessor used for trace metrics (distance to the solution set,
//! tracking error, exact objective) and for independent consistency checks.

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// One coupled draw `(g_w(x), ∇g_w(x))`: value and Jacobian come from the
/// same realization of `w`.
#[derive(Debug, Clone)]
pub struct InnerSample {
    /// `g_w(x)`, length `y_dim`.
    pub value: Vector,
    /// `∇g_w(x)`, shape `y_dim × x_dim`.
    pub jacobian: Matrix,
    /// Index of the draw that produced this sample.
    pub seed_tag: u64,
}

/// One draw `∇f_v(y)`.
#[derive(Debug, Clone)]
pub struct OuterGradSample {
    /// `∇f_v(y)`, length `y_dim`.
    pub grad: Vector,
    /// Index of the draw that produced this sample.
    pub seed_tag: u64,
}

/// A stochastic first-order oracle for one composition problem instance.
///
/// An oracle owns its RNG state, so a `&mut self` query advances the sample
/// stream; two oracles built from the same problem with the same seed return
/// bit-identical streams. Run many seeds in parallel by building one oracle
/// per worker, never by sharing one.
pub trait CompositionOracle {
    /// Decision dimension `n` (length of `x` and `z`).
    fn x_dim(&self) -> usize;
    /// Inner-value dimension `m` (length of `y = g(x)`).
    fn y_dim(&self) -> usize;

    /// One coupled draw of inner value and Jacobian at `x`.
    fn query_inner(&mut self, x: &Vector) -> Result<InnerSample>;

    /// One draw of the outer gradient at `y`.
    fn query_outer(&mut self, y: &Vector) -> Result<OuterGradSample>;

    /// Exact accessors, when the problem admits them.
    fn truth(&self) -> Option<&dyn Truth>;
}

/// Exact (expectation-level) problem data for families where it is computable.
pub trait Truth {
    /// `g(x) = E_w[g_w(x)]`.
    fn inner_value(&self, x: &Vector) -> Vector;
    /// `∇g(x)`, shape `m × n`.
    fn inner_jacobian(&self, x: &Vector) -> Matrix;
    /// `f(y)`.
    fn outer_value(&self, y: &Vector) -> f64;
    /// `∇f(y)`.
    fn outer_gradient(&self, y: &Vector) -> Vector;

    /// `F(x) = f(g(x))`.
    fn objective(&self, x: &Vector) -> f64 {
        self.outer_value(&self.inner_value(x))
    }

    /// `∇F(x) = ∇g(x)ᵀ ∇f(g(x))`.
    fn gradient(&self, x: &Vector) -> Vector {
        self.inner_jacobian(x)
            .tr_mul(&self.outer_gradient(&self.inner_value(x)))
    }

    /// Euclidean projection of `x` onto the solution set of `min F + R`,
    /// when the family knows it (`None` otherwise).
    fn project_solution(&self, x: &Vector) -> Option<Vector>;
}

/// Exact `∇F(x)` through the oracle's truth accessor.
pub fn true_gradient(x: &Vector, oracle: &dyn CompositionOracle) -> Result<Vector> {
    let truth = oracle.truth().ok_or(Error::TruthUnavailable)?;
    check_dim("x", oracle.x_dim(), x)?;
    Ok(truth.gradient(x))
}

/// A problem instance: dimensions, a seeded-oracle factory and optional truth.
///
/// `Sync` is required so a harness can fan one instance out to many workers,
/// each drawing its own oracle.
pub trait Problem: Sync {
    fn x_dim(&self) -> usize;
    fn y_dim(&self) -> usize;
    /// A fresh stochastic oracle over this instance.
    fn oracle(&self, seed: u64) -> Box<dyn CompositionOracle + '_>;
    /// Exact accessors for this instance, when available.
    fn truth(&self) -> Option<&dyn Truth>;
}

/// A zero-noise oracle: every query returns the exact expectation.
///
/// Useful for deterministic-limit tests where the solver should behave like
/// plain (proximal) gradient descent on `F`.
pub struct ExactOracle<'a> {
    truth: &'a dyn Truth,
    x_dim: usize,
    y_dim: usize,
    draws: u64,
}

impl<'a> ExactOracle<'a> {
    pub fn new(truth: &'a dyn Truth, x_dim: usize, y_dim: usize) -> Self {
        Self {
            truth,
            x_dim,
            y_dim,
            draws: 0,
        }
    }

    /// Zero-noise oracle over a problem's truth accessor.
    pub fn for_problem(problem: &'a dyn Problem) -> Result<Self> {
        let truth = problem.truth().ok_or(Error::TruthUnavailable)?;
        Ok(Self::new(truth, problem.x_dim(), problem.y_dim()))
    }
}

impl CompositionOracle for ExactOracle<'_> {
    fn x_dim(&self) -> usize {
        self.x_dim
    }

    fn y_dim(&self) -> usize {
        self.y_dim
    }

    fn query_inner(&mut self, x: &Vector) -> Result<InnerSample> {
        check_dim("x", self.x_dim, x)?;
        self.draws += 1;
        Ok(InnerSample {
            value: self.truth.inner_value(x),
            jacobian: self.truth.inner_jacobian(x),
            seed_tag: self.draws,
        })
    }

    fn query_outer(&mut self, y: &Vector) -> Result<OuterGradSample> {
        check_dim("y", self.y_dim, y)?;
        self.draws += 1;
        Ok(OuterGradSample {
            grad: self.truth.outer_gradient(y),
            seed_tag: self.draws,
        })
    }

    fn truth(&self) -> Option<&dyn Truth> {
        Some(self.truth)
    }
}

/// Central finite differences of a scalar function: an implementation-free
/// route to `∇F` used by gradient-consistency checks.
pub fn central_difference_gradient<F>(f: F, x: &Vector, step: f64) -> Vector
where
    F: Fn(&Vector) -> f64,
{
    let mut grad = Vector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let hi = f(&probe);
        probe[i] = x[i] - step;
        let lo = f(&probe);
        probe[i] = x[i];
        grad[i] = (hi - lo) / (2.0 * step);
    }
    grad
}

pub(crate) fn check_dim(what: &'static str, expected: usize, v: &Vector) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}
