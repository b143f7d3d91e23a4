//! Policy evaluation as a composition problem.
//!
//! For a fixed-policy chain with features `Φ`, the evaluation objective is
//! the residual least squares `min_w Σ_s (φ_sᵀw − q_s(w))²` with
//! `q_s(w) = Σ_{s'} P_{ss'}(r_{s,s'} + γ φ_{s'}ᵀw)`. The inner map stacks
//! `(φ_sᵀw, q_s(w))` for every state into a `2S`-vector — affine in `w` —
//! and the outer function sums the squared gaps of consecutive pairs. One
//! inner query samples one successor state per state, which gives an
//! unbiased draw of the whole stacked vector and its Jacobian from a single
//! realization.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::oracle::{check_dim, CompositionOracle, InnerSample, OuterGradSample, Problem, Truth};
use crate::problems::mdp::MdpSpec;
use crate::problems::LeastSquares;
use crate::{Matrix, Vector};

/// Cumulative distribution over the nonzero successors of one state.
struct CumRow {
    cum: Vec<f64>,
    state: Vec<usize>,
}

impl CumRow {
    fn build(transition: &Matrix, s: usize) -> CumRow {
        let mut cum = Vec::new();
        let mut state = Vec::new();
        let mut acc = 0.0;
        for (j, &p) in transition.row(s).iter().enumerate() {
            if p > 0.0 {
                acc += p;
                cum.push(acc);
                state.push(j);
            }
        }
        CumRow { cum, state }
    }

    fn sample(&self, u: f64) -> usize {
        let idx = self.cum.partition_point(|&c| c <= u);
        self.state[idx.min(self.state.len() - 1)]
    }
}

/// One policy-evaluation instance with exact accessors.
pub struct BellmanProblem {
    spec: MdpSpec,
    /// `P Φ`, precomputed.
    p_phi: Matrix,
    /// Residual map `M = Φ − γ P Φ`.
    m_mat: Matrix,
    /// Expected one-step rewards `r̄`.
    rbar: Vector,
    ls: LeastSquares,
    cum_rows: Vec<CumRow>,
}

impl BellmanProblem {
    pub fn new(spec: MdpSpec) -> Result<Self> {
        spec.validate()?;
        let p_phi = &spec.transition * &spec.features;
        let m_mat = &spec.features - &p_phi * spec.gamma;
        let rbar = spec.expected_rewards();
        let ls = LeastSquares::solve(&m_mat, &rbar);
        let cum_rows = (0..spec.n_states)
            .map(|s| CumRow::build(&spec.transition, s))
            .collect();
        Ok(Self {
            spec,
            p_phi,
            m_mat,
            rbar,
            ls,
            cum_rows,
        })
    }

    pub fn spec(&self) -> &MdpSpec {
        &self.spec
    }

    /// Minimum-norm solution of the residual least squares.
    pub fn solution(&self) -> &Vector {
        &self.ls.solution
    }

    /// Smallest nonzero eigenvalue of `MᵀM`: the optimal strong convexity
    /// constant of the (unpenalized) objective.
    pub fn strong_convexity(&self) -> f64 {
        self.ls.smallest_gram_eigenvalue
    }

    pub fn rank(&self) -> usize {
        self.ls.rank
    }
}

impl Truth for BellmanProblem {
    fn inner_value(&self, w: &Vector) -> Vector {
        let s_count = self.spec.n_states;
        let phi_w = &self.spec.features * w;
        let p_phi_w = &self.p_phi * w;
        let mut value = Vector::zeros(2 * s_count);
        for s in 0..s_count {
            value[2 * s] = phi_w[s];
            value[2 * s + 1] = self.rbar[s] + self.spec.gamma * p_phi_w[s];
        }
        value
    }

    fn inner_jacobian(&self, _w: &Vector) -> Matrix {
        let s_count = self.spec.n_states;
        let d = self.spec.feature_dim;
        let mut jac = Matrix::zeros(2 * s_count, d);
        for j in 0..d {
            let phi_col = self.spec.features.column(j);
            let p_phi_col = self.p_phi.column(j);
            let mut out = jac.column_mut(j);
            for s in 0..s_count {
                out[2 * s] = phi_col[s];
                out[2 * s + 1] = self.spec.gamma * p_phi_col[s];
            }
        }
        jac
    }

    fn outer_value(&self, u: &Vector) -> f64 {
        let s_count = u.len() / 2;
        (0..s_count)
            .map(|s| {
                let gap = u[2 * s] - u[2 * s + 1];
                gap * gap
            })
            .sum()
    }

    fn outer_gradient(&self, u: &Vector) -> Vector {
        let s_count = u.len() / 2;
        let mut grad = Vector::zeros(2 * s_count);
        for s in 0..s_count {
            let gap = u[2 * s] - u[2 * s + 1];
            grad[2 * s] = 2.0 * gap;
            grad[2 * s + 1] = -2.0 * gap;
        }
        grad
    }

    fn gradient(&self, w: &Vector) -> Vector {
        // 2 Mᵀ (M w − r̄); identical to the composed route
        let residual = &self.m_mat * w - &self.rbar;
        self.m_mat.tr_mul(&residual) * 2.0
    }

    fn project_solution(&self, x: &Vector) -> Option<Vector> {
        Some(self.ls.project(x))
    }
}

impl Problem for BellmanProblem {
    fn x_dim(&self) -> usize {
        self.spec.feature_dim
    }

    fn y_dim(&self) -> usize {
        2 * self.spec.n_states
    }

    fn oracle(&self, seed: u64) -> Box<dyn CompositionOracle + '_> {
        Box::new(BellmanOracle {
            problem: self,
            rng: ChaCha8Rng::seed_from_u64(seed),
            draws: 0,
            next_scratch: vec![0; self.spec.n_states],
        })
    }

    fn truth(&self) -> Option<&dyn Truth> {
        Some(self)
    }
}

/// Sampling oracle over a [`BellmanProblem`]: each inner query draws one
/// successor per state and reports the stacked value and Jacobian of that
/// realization. The outer function is deterministic, so outer queries
/// consume no randomness.
pub struct BellmanOracle<'p> {
    problem: &'p BellmanProblem,
    rng: ChaCha8Rng,
    draws: u64,
    next_scratch: Vec<usize>,
}

impl CompositionOracle for BellmanOracle<'_> {
    fn x_dim(&self) -> usize {
        self.problem.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.problem.y_dim()
    }

    fn query_inner(&mut self, w: &Vector) -> Result<InnerSample> {
        let spec = &self.problem.spec;
        check_dim("x", spec.feature_dim, w)?;
        self.draws += 1;
        let s_count = spec.n_states;
        let gamma = spec.gamma;

        for s in 0..s_count {
            let u = self.rng.random::<f64>();
            self.next_scratch[s] = self.problem.cum_rows[s].sample(u);
        }
        let next = &self.next_scratch;

        let phi_w = &spec.features * w;
        let mut value = Vector::zeros(2 * s_count);
        for s in 0..s_count {
            value[2 * s] = phi_w[s];
            value[2 * s + 1] = spec.rewards[(s, next[s])] + gamma * phi_w[next[s]];
        }

        let mut jac = Matrix::zeros(2 * s_count, spec.feature_dim);
        for j in 0..spec.feature_dim {
            let phi_col = spec.features.column(j);
            let mut out = jac.column_mut(j);
            for s in 0..s_count {
                out[2 * s] = phi_col[s];
                out[2 * s + 1] = gamma * phi_col[next[s]];
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

/// Exact evaluation objective `Σ_s (φ_sᵀw − q_s(w))²` computed statewise
/// from the stored transition and reward tables (no sampling, no matrix
/// shortcut).
pub fn bellman_residual_objective(spec: &MdpSpec, w: &Vector) -> f64 {
    let mut total = 0.0;
    for s in 0..spec.n_states {
        let phi_s_w = spec.features.row(s).transpose().dot(w);
        let mut q = 0.0;
        for t in 0..spec.n_states {
            let p = spec.transition[(s, t)];
            if p > 0.0 {
                q += p * (spec.rewards[(s, t)] + spec.gamma * spec.features.row(t).transpose().dot(w));
            }
        }
        let gap = phi_s_w - q;
        total += gap * gap;
    }
    total
}

/// Minimum-norm minimizer of the evaluation residual.
pub fn exact_solution(spec: &MdpSpec) -> Vector {
    LeastSquares::solve(&spec.residual_matrix(), &spec.expected_rewards()).solution
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::mdp::{build_consistent_mdp, build_random_mdp};
    use approx::assert_relative_eq;

    fn one_state_spec() -> MdpSpec {
        // φ = 1, P = [1], r = 1, γ = 0.5
        MdpSpec {
            n_states: 1,
            feature_dim: 1,
            gamma: 0.5,
            transition: Matrix::from_row_slice(1, 1, &[1.0]),
            rewards: Matrix::from_row_slice(1, 1, &[1.0]),
            features: Matrix::from_row_slice(1, 1, &[1.0]),
            planted: None,
        }
    }

    #[test]
    fn one_state_chain_by_hand() {
        let spec = one_state_spec();
        // q(0) = 1 + 0.5·0, so the residual at w = 0 is (0 − 1)² = 1
        assert_relative_eq!(
            bellman_residual_objective(&spec, &Vector::from_vec(vec![0.0])),
            1.0,
            epsilon = 1e-15
        );
        // w* = r / (φ(1−γ)φ) = 1 / 0.5 = 2, residual 0
        let w_star = exact_solution(&spec);
        assert_relative_eq!(w_star[0], 2.0, epsilon = 1e-12);
        assert!(bellman_residual_objective(&spec, &w_star) <= 1e-20);
    }

    #[test]
    fn outer_gradient_of_gap_quadratic() {
        let problem = BellmanProblem::new(one_state_spec()).unwrap();
        // stationary point of the quadratic
        let g0 = problem.outer_gradient(&Vector::from_vec(vec![0.0, 0.0]));
        assert_eq!(g0, Vector::from_vec(vec![0.0, 0.0]));
        // hand differentiation at u = (1, 0)
        let g1 = problem.outer_gradient(&Vector::from_vec(vec![1.0, 0.0]));
        assert_eq!(g1, Vector::from_vec(vec![2.0, -2.0]));
    }

    #[test]
    fn zero_weight_samples_reduce_to_rewards() {
        let spec = build_random_mdp(8, 3, 3, 4, 0.9, 21).unwrap();
        let problem = BellmanProblem::new(spec).unwrap();
        let mut oracle = problem.oracle(5);
        let sample = oracle.query_inner(&Vector::zeros(3)).unwrap();
        for s in 0..8 {
            assert_eq!(sample.value[2 * s], 0.0);
            // γ·φᵀ0 vanishes, so each sampled q̂ is exactly one reward entry
            let q_hat = sample.value[2 * s + 1];
            let row = problem.spec().rewards.row(s);
            let p_row = problem.spec().transition.row(s);
            let matches = (0..8).any(|t| p_row[t] > 0.0 && row[t] == q_hat);
            assert!(matches, "q̂_{s} = {q_hat} is not a reachable reward");
        }
    }

    #[test]
    fn sampled_value_and_jacobian_come_from_one_draw() {
        let spec = build_random_mdp(6, 4, 3, 3, 0.9, 2).unwrap();
        let problem = BellmanProblem::new(spec).unwrap();
        let mut oracle = problem.oracle(9);
        let w = Vector::from_vec(vec![0.3, -1.0, 0.7, 0.2]);
        let sample = oracle.query_inner(&w).unwrap();
        let spec = problem.spec();
        for s in 0..6 {
            // recover the drawn successor from the Jacobian row and check the
            // value entry used the same one
            let jac_row = sample.jacobian.row(2 * s + 1) / spec.gamma;
            let drawn = (0..6)
                .find(|&t| (jac_row.transpose() - spec.features.row(t).transpose()).norm() < 1e-12)
                .expect("jacobian row matches a feature row");
            let expected =
                spec.rewards[(s, drawn)] + spec.gamma * spec.features.row(drawn).transpose().dot(&w);
            assert_relative_eq!(sample.value[2 * s + 1], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn inner_map_is_affine_exactly_on_dyadic_data() {
        // dyadic transition weights, power-of-two discount and integer
        // features/rewards make every arithmetic operation exact, so the
        // affine identity holds bitwise
        let spec = MdpSpec {
            n_states: 2,
            feature_dim: 2,
            gamma: 0.5,
            transition: Matrix::from_row_slice(2, 2, &[0.25, 0.75, 0.5, 0.5]),
            rewards: Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 4.0]),
            features: Matrix::from_row_slice(2, 2, &[2.0, 1.0, 3.0, 5.0]),
            planted: None,
        };
        let problem = BellmanProblem::new(spec).unwrap();
        let w1 = Vector::from_vec(vec![2.0, -3.0]);
        let w2 = Vector::from_vec(vec![-1.0, 4.0]);
        let g0 = problem.inner_value(&Vector::zeros(2));
        let lhs = problem.inner_value(&(&w1 + &w2)) - &g0;
        let rhs = (problem.inner_value(&w1) - &g0) + (problem.inner_value(&w2) - &g0);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn sampled_q_hat_is_unbiased() {
        let spec = build_random_mdp(6, 3, 3, 4, 0.9, 33).unwrap();
        let problem = BellmanProblem::new(spec).unwrap();
        let mut oracle = problem.oracle(17);
        let w = Vector::from_vec(vec![0.5, -0.25, 1.0]);
        let exact = problem.inner_value(&w);
        let m = problem.y_dim();
        let n_draws = 20_000;
        let mut mean = Vector::zeros(m);
        let mut m2 = Vector::zeros(m);
        for i in 0..n_draws {
            let v = oracle.query_inner(&w).unwrap().value;
            // running mean/variance
            let count = (i + 1) as f64;
            let delta = &v - &mean;
            mean.axpy(1.0 / count, &delta, 1.0);
            let delta2 = &v - &mean;
            m2 += delta.component_mul(&delta2);
        }
        let var = m2 / (n_draws as f64 - 1.0);
        for c in 0..m {
            let se = (var[c] / n_draws as f64).sqrt();
            let dev = (mean[c] - exact[c]).abs();
            assert!(
                dev <= 4.0 * se.max(1e-12),
                "component {c}: deviation {dev} exceeds 4 standard errors ({se})"
            );
        }
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let spec = build_random_mdp(5, 2, 2, 3, 0.9, 4).unwrap();
        let problem = BellmanProblem::new(spec).unwrap();
        let w = Vector::from_vec(vec![1.0, -1.0]);
        let mut a = problem.oracle(123);
        let mut b = problem.oracle(123);
        for _ in 0..50 {
            let sa = a.query_inner(&w).unwrap();
            let sb = b.query_inner(&w).unwrap();
            assert_eq!(sa.value, sb.value);
            assert_eq!(sa.jacobian, sb.jacobian);
        }
        let mut c = problem.oracle(124);
        let sc = c.query_inner(&w).unwrap();
        let sa = a.query_inner(&w).unwrap();
        assert_ne!(sa.value, sc.value);
    }

    #[test]
    fn consistent_instance_recovers_planted_solution() {
        let planted = Vector::from_vec(vec![1.0, -0.5, 2.0, 0.25]);
        let spec = build_consistent_mdp(15, 4, 3, 4, 0.9, &planted, 8).unwrap();
        let w_star = exact_solution(&spec);
        assert_relative_eq!(w_star, planted, epsilon = 1e-8);
        let problem = BellmanProblem::new(spec).unwrap();
        assert!(problem.gradient(&w_star).norm() <= 1e-10);
    }

    #[test]
    fn rank_deficient_features_project_consistently() {
        // duplicate feature columns: the solution set is an affine line
        let mut spec = build_random_mdp(8, 3, 3, 4, 0.9, 14).unwrap();
        let dup = Matrix::from_columns(&[
            spec.features.column(0).into_owned(),
            spec.features.column(1).into_owned(),
            spec.features.column(0).into_owned(),
        ]);
        spec.features = dup;
        let problem = BellmanProblem::new(spec).unwrap();
        assert_eq!(problem.rank(), 2);
        let x = Vector::from_vec(vec![3.0, -1.0, 0.5]);
        let p = problem.project_solution(&x).unwrap();
        let pp = problem.project_solution(&p).unwrap();
        assert_relative_eq!(p, pp, epsilon = 1e-10);
        // the projection target is a stationary point
        assert!(problem.gradient(&p).norm() <= 1e-9);
    }

    #[test]
    fn objective_routes_agree_and_strong_convexity_holds() {
        let spec = build_random_mdp(10, 4, 3, 4, 0.9, 19).unwrap();
        let problem = BellmanProblem::new(spec).unwrap();
        let lambda_hat = problem.strong_convexity();
        assert!(lambda_hat > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let x = Vector::from_fn(4, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let statewise = bellman_residual_objective(problem.spec(), &x);
            let composed = problem.objective(&x);
            assert_relative_eq!(statewise, composed, max_relative = 1e-12);
            // optimal strong convexity with the exact constant
            let p = problem.project_solution(&x).unwrap();
            let gap = problem.objective(&x) - problem.objective(&p);
            let dist_sq = (&x - &p).norm_squared();
            assert!(
                gap >= lambda_hat * dist_sq - 1e-9,
                "gap {gap} < λ̂ d² = {}",
                lambda_hat * dist_sq
            );
        }
    }
}
