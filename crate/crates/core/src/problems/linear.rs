//! Synthetic linear-inner compositions with closed-form solutions.
//!
//! `g_w(x) = (A + Ξ_w) x + b + ε_w` with Gaussian perturbations and
//! deterministic quadratic outer `f(u) = ½‖u − c‖²`, so
//! `F(x) = ½‖A x + b − c‖²` is a plain least-squares objective with a known
//! minimum-norm solution and solution-set projection. Because the inner map
//! is linear in expectation and per sample, this family sits in the
//! linear-inner regime; the sampling noise keeps the tracker error alive so
//! its decay rate is measurable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::{check_dim, CompositionOracle, InnerSample, OuterGradSample, Problem, Truth};
use crate::problems::LeastSquares;
use crate::{Matrix, Vector};

pub struct LinearProblem {
    /// Expected inner matrix, `m × n`.
    a_mat: Matrix,
    /// Expected inner offset, length `m`.
    offset: Vector,
    /// Outer target `c`.
    target: Vector,
    /// Scale of the Gaussian matrix perturbation.
    noise_a: f64,
    /// Scale of the Gaussian offset perturbation.
    noise_b: f64,
    ls: LeastSquares,
}

impl LinearProblem {
    pub fn new(
        a_mat: Matrix,
        offset: Vector,
        target: Vector,
        noise_a: f64,
        noise_b: f64,
    ) -> Result<Self> {
        let m = a_mat.nrows();
        if offset.len() != m || target.len() != m {
            return Err(Error::Construction(
                "offset/target length must match the matrix row count".into(),
            ));
        }
        if !(noise_a.is_finite() && noise_a >= 0.0 && noise_b.is_finite() && noise_b >= 0.0) {
            return Err(Error::Construction("noise scales must be nonnegative".into()));
        }
        let rhs = &target - &offset;
        let ls = LeastSquares::solve(&a_mat, &rhs);
        Ok(Self {
            a_mat,
            offset,
            target,
            noise_a,
            noise_b,
            ls,
        })
    }

    /// The noiseless identity composition: `g(x) = x`, `f = ½‖·‖²`.
    pub fn identity(dim: usize) -> Self {
        Self::new(
            Matrix::identity(dim, dim),
            Vector::zeros(dim),
            Vector::zeros(dim),
            0.0,
            0.0,
        )
        .expect("identity construction is always valid")
    }

    /// Random well-conditioned instance with equal value/offset noise.
    pub fn synthetic(n: usize, m: usize, noise: f64, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Construction("dimensions must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (m as f64).sqrt();
        let a_mat = Matrix::from_fn(m, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * scale
        });
        let target = Vector::from_fn(m, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        Self::new(a_mat, Vector::zeros(m), target, noise, noise)
    }

    pub fn solution(&self) -> &Vector {
        &self.ls.solution
    }

    /// Smallest nonzero eigenvalue of `AᵀA`; the objective `½‖Ax − c̃‖²` is
    /// optimally strongly convex with constant half of it.
    pub fn smallest_gram_eigenvalue(&self) -> f64 {
        self.ls.smallest_gram_eigenvalue
    }
}

impl Truth for LinearProblem {
    fn inner_value(&self, x: &Vector) -> Vector {
        &self.a_mat * x + &self.offset
    }

    fn inner_jacobian(&self, _x: &Vector) -> Matrix {
        self.a_mat.clone()
    }

    fn outer_value(&self, y: &Vector) -> f64 {
        0.5 * (y - &self.target).norm_squared()
    }

    fn outer_gradient(&self, y: &Vector) -> Vector {
        y - &self.target
    }

    fn project_solution(&self, x: &Vector) -> Option<Vector> {
        Some(self.ls.project(x))
    }
}

impl Problem for LinearProblem {
    fn x_dim(&self) -> usize {
        self.a_mat.ncols()
    }

    fn y_dim(&self) -> usize {
        self.a_mat.nrows()
    }

    fn oracle(&self, seed: u64) -> Box<dyn CompositionOracle + '_> {
        Box::new(LinearOracle {
            problem: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
        })
    }

    fn truth(&self) -> Option<&dyn Truth> {
        Some(self)
    }
}

pub struct LinearOracle<'p> {
    problem: &'p LinearProblem,
    rng: ChaCha8Rng,
    draws: u64,
}

impl CompositionOracle for LinearOracle<'_> {
    fn x_dim(&self) -> usize {
        self.problem.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.problem.y_dim()
    }

    fn query_inner(&mut self, x: &Vector) -> Result<InnerSample> {
        let p = self.problem;
        check_dim("x", p.x_dim(), x)?;
        self.draws += 1;
        // one realization perturbs matrix and offset together; the value is
        // evaluated with the same perturbed matrix
        let mut jac = p.a_mat.clone();
        if p.noise_a > 0.0 {
            for v in jac.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                *v += p.noise_a * e;
            }
        }
        let mut value = &jac * x + &p.offset;
        if p.noise_b > 0.0 {
            for v in value.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut self.rng);
                *v += p.noise_b * e;
            }
        }
        Ok(InnerSample {
            value,
            jacobian: jac,
            seed_tag: self.draws,
        })
    }

    fn query_outer(&mut self, y: &Vector) -> Result<OuterGradSample> {
        check_dim("y", self.problem.y_dim(), y)?;
        self.draws += 1;
        Ok(OuterGradSample {
            grad: self.problem.outer_gradient(y),
            seed_tag: self.draws,
        })
    }

    fn truth(&self) -> Option<&dyn Truth> {
        Some(self.problem)
    }
}
