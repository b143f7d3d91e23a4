//! Benchmark problem families.
//!
//! Every family implements [`crate::oracle::Problem`]: it owns the instance
//! data, hands out seeded sampling oracles, and (where expectations are
//! computable) exposes exact accessors used for trace metrics and
//! verification.

pub mod bellman;
pub mod linear;
pub mod mdp;
pub mod mean_variance;

pub use bellman::{bellman_residual_objective, exact_solution, BellmanProblem};
pub use linear::LinearProblem;
pub use mdp::{build_baird, build_consistent_mdp, build_random_mdp, MdpSpec};
pub use mean_variance::MeanVarianceProblem;

use crate::{Matrix, Vector};

/// Minimum-norm least-squares data for `min_x ‖A x − b‖²`, with enough
/// structure to project onto the full solution set when `A` is
/// rank-deficient.
pub(crate) struct LeastSquares {
    /// Minimum-norm minimizer.
    pub solution: Vector,
    /// Orthonormal basis of the row space of `A` (columns), dimension
    /// `n × rank`.
    pub row_basis: Matrix,
    /// Smallest nonzero eigenvalue of `AᵀA`; the optimal strong convexity
    /// constant of `‖Ax − b‖²` up to the objective's own scaling.
    pub smallest_gram_eigenvalue: f64,
    pub rank: usize,
}

impl LeastSquares {
    pub fn solve(a: &Matrix, b: &Vector) -> Self {
        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().expect("SVD with U requested");
        let v_t = svd.v_t.as_ref().expect("SVD with Vᵀ requested");
        let sigma = &svd.singular_values;
        let tol = sigma.max() * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
        let rank = sigma.iter().filter(|&&s| s > tol).count();

        // x = V Σ⁺ Uᵀ b over the nonzero spectrum
        let ut_b = u.tr_mul(b);
        let mut solution = Vector::zeros(a.ncols());
        let mut smallest = f64::INFINITY;
        for i in 0..rank {
            let coeff = ut_b[i] / sigma[i];
            solution.axpy(coeff, &v_t.row(i).transpose(), 1.0);
            smallest = smallest.min(sigma[i] * sigma[i]);
        }
        if rank == 0 {
            smallest = 0.0;
        }

        let mut row_basis = Matrix::zeros(a.ncols(), rank);
        for i in 0..rank {
            row_basis.set_column(i, &v_t.row(i).transpose());
        }

        LeastSquares {
            solution,
            row_basis,
            smallest_gram_eigenvalue: smallest,
            rank,
        }
    }

    /// Projection of `x` onto the affine solution set
    /// `solution + null(A)`: subtract the row-space component of the offset.
    pub fn project(&self, x: &Vector) -> Vector {
        let offset = x - &self.solution;
        let coords = self.row_basis.tr_mul(&offset);
        x - self.row_basis.clone() * coords
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn full_rank_least_squares_matches_normal_equations() {
        let a = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let b = Vector::from_vec(vec![1.0, 2.0, 2.0]);
        let ls = LeastSquares::solve(&a, &b);
        assert_eq!(ls.rank, 2);
        // normal equations solved independently: (AᵀA) x = Aᵀ b
        let ata = a.tr_mul(&a);
        let atb = a.tr_mul(&b);
        let x = ata.lu().solve(&atb).unwrap();
        assert_relative_eq!(ls.solution, x, max_relative = 1e-12);
        // unique solution: projection is constant
        let p = ls.project(&Vector::from_vec(vec![10.0, -3.0]));
        assert_relative_eq!(p, ls.solution, max_relative = 1e-10);
    }

    #[test]
    fn rank_deficient_projection_is_idempotent() {
        // duplicate columns: null space is the (1, -1) direction
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = Vector::from_vec(vec![1.0, 2.0]);
        let ls = LeastSquares::solve(&a, &b);
        assert_eq!(ls.rank, 1);
        let x = Vector::from_vec(vec![3.0, -0.5]);
        let p = ls.project(&x);
        let pp = ls.project(&p);
        assert_relative_eq!(p, pp, epsilon = 1e-12);
        // projected point solves the problem as well as the minimum-norm one
        let res_p = (&a * &p - &b).norm_squared();
        let res_s = (&a * &ls.solution - &b).norm_squared();
        assert_relative_eq!(res_p, res_s, max_relative = 1e-12);
    }
}
