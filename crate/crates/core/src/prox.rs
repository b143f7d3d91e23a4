//! Penalties `R(x)` with exact proximal mappings.
//!
//! Only closed-form proximal operators are shipped: the zero penalty, the
//! `ℓ1` norm (componentwise soft thresholding) and box indicator functions
//! (Euclidean projection). `prox_{αR}(u) = argmin_x ½‖x − u‖² + α R(x)`.

use crate::error::{Error, Result};
use crate::Vector;

#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    /// `R ≡ 0`; prox is the identity.
    Zero,
    /// `R(x) = λ‖x‖₁`; prox is soft thresholding at level `αλ`.
    L1 { lambda: f64 },
    /// Indicator of `[lo, hi]` componentwise; prox is the clamp.
    BoxConstraint { lo: Vector, hi: Vector },
}

impl Regularizer {
    pub fn zero() -> Self {
        Regularizer::Zero
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "l1 weight must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(Regularizer::L1 { lambda })
    }

    pub fn box_constraint(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                what: "box bounds",
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::invalid("box constraint with lo > hi"));
        }
        Ok(Regularizer::BoxConstraint { lo, hi })
    }

    /// `R(x)`, possibly `+∞` (box indicator outside its domain).
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::BoxConstraint { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| v >= l && v <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `prox_{step·R}(u)`.
    ///
    /// Ties `|u_i| = step·λ` in the soft threshold map to exactly 0.
    pub fn prox(&self, step: f64, u: &Vector) -> Result<Vector> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::invalid(format!(
                "prox step must be positive, got {step}"
            )));
        }
        match self {
            Regularizer::Zero => Ok(u.clone()),
            Regularizer::L1 { lambda } => {
                let level = step * lambda;
                Ok(u.map(|v| soft_threshold(v, level)))
            }
            Regularizer::BoxConstraint { lo, hi } => {
                if u.len() != lo.len() {
                    return Err(Error::DimensionMismatch {
                        what: "prox input",
                        expected: lo.len(),
                        actual: u.len(),
                    });
                }
                Ok(Vector::from_iterator(
                    u.len(),
                    u.iter()
                        .zip(lo.iter().zip(hi.iter()))
                        .map(|(v, (l, h))| v.clamp(*l, *h)),
                ))
            }
        }
    }
}

/// `sign(v) · max(|v| − level, 0)`.
pub fn soft_threshold(v: f64, level: f64) -> f64 {
    if v > level {
        v - level
    } else if v < -level {
        v + level
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vector {
        Vector::from_iterator(n, (0..n).map(|_| (rng.random::<f64>() - 0.5) * 2.0 * scale))
    }

    /// Largest violation of `u − prox(u) ∈ α ∂R(prox(u))`, checked
    /// componentwise from the exact subdifferential of each penalty.
    fn optimality_residual(reg: &Regularizer, step: f64, u: &Vector, p: &Vector) -> f64 {
        let r = u - p;
        let mut worst = 0.0f64;
        for i in 0..u.len() {
            let viol = match reg {
                Regularizer::Zero => r[i].abs(),
                Regularizer::L1 { lambda } => {
                    let level = step * lambda;
                    if p[i] > 0.0 {
                        (r[i] - level).abs()
                    } else if p[i] < 0.0 {
                        (r[i] + level).abs()
                    } else {
                        (r[i].abs() - level).max(0.0)
                    }
                }
                Regularizer::BoxConstraint { lo, hi } => {
                    if p[i] <= lo[i] {
                        // normal cone points down: residual must be <= 0
                        r[i].max(0.0)
                    } else if p[i] >= hi[i] {
                        (-r[i]).max(0.0)
                    } else {
                        r[i].abs()
                    }
                }
            };
            worst = worst.max(viol);
        }
        worst
    }

    #[test]
    fn zero_prox_is_identity() {
        let u = Vector::from_vec(vec![3.0, -1.0, 0.25]);
        for step in [1e-6, 0.5, 10.0] {
            assert_eq!(Regularizer::zero().prox(step, &u).unwrap(), u);
        }
    }

    #[test]
    fn l1_prox_matches_soft_threshold_example() {
        let reg = Regularizer::l1(1.0).unwrap();
        let u = Vector::from_vec(vec![1.0, -0.2, 0.5]);
        let p = reg.prox(0.5, &u).unwrap();
        assert_eq!(p, Vector::from_vec(vec![0.5, 0.0, 0.0]));
    }

    /// Scalar grid minimization of ½(x−u)² + αλ|x|: an implementation-free
    /// check of the soft-threshold formula.
    #[test]
    fn l1_prox_agrees_with_grid_minimization() {
        let lambda = 1.0;
        let alpha = 0.5;
        let reg = Regularizer::l1(lambda).unwrap();
        for u in [-1.7, -0.5, -0.2, 0.0, 0.3, 0.5, 1.0, 1.9] {
            let p = reg.prox(alpha, &Vector::from_vec(vec![u])).unwrap()[0];
            let mut best_x = -2.0;
            let mut best_val = f64::INFINITY;
            let mut x = -2.0;
            while x <= 2.0 {
                let val = 0.5 * (x - u) * (x - u) + alpha * lambda * x.abs();
                if val < best_val {
                    best_val = val;
                    best_x = x;
                }
                x += 1e-4;
            }
            assert!(
                (p - best_x).abs() < 2e-4,
                "u={u}: prox {p} vs grid argmin {best_x}"
            );
        }
    }

    #[test]
    fn box_prox_clamps() {
        let reg = Regularizer::box_constraint(Vector::zeros(3), Vector::repeat(3, 1.0)).unwrap();
        let u = Vector::from_vec(vec![-1.0, 0.5, 2.0]);
        assert_eq!(
            reg.prox(1.0, &u).unwrap(),
            Vector::from_vec(vec![0.0, 0.5, 1.0])
        );
    }

    #[test]
    fn values() {
        let l1 = Regularizer::l1(3.0).unwrap();
        assert_eq!(l1.value(&Vector::from_vec(vec![1.0, -2.0])), 9.0);

        // 4-sparse vector of ones at weight 0.01
        let l1b = Regularizer::l1(0.01).unwrap();
        let mut x = Vector::zeros(100);
        for i in 0..4 {
            x[i] = 1.0;
        }
        assert!((l1b.value(&x) - 0.04).abs() < 1e-15);

        let zero = Regularizer::zero();
        assert_eq!(zero.value(&x), 0.0);

        let boxr = Regularizer::box_constraint(Vector::zeros(2), Vector::repeat(2, 1.0)).unwrap();
        assert_eq!(boxr.value(&Vector::from_vec(vec![0.5, 0.5])), 0.0);
        assert_eq!(boxr.value(&Vector::from_vec(vec![0.5, 1.5])), f64::INFINITY);
    }

    #[test]
    fn invalid_arguments_are_rejected() {
        assert!(Regularizer::l1(-1.0).is_err());
        assert!(Regularizer::box_constraint(
            Vector::from_vec(vec![1.0]),
            Vector::from_vec(vec![0.0])
        )
        .is_err());
        let reg = Regularizer::zero();
        let u = Vector::zeros(2);
        assert!(reg.prox(0.0, &u).is_err());
        assert!(reg.prox(-1.0, &u).is_err());
        assert!(reg.prox(f64::NAN, &u).is_err());
    }

    #[test]
    fn optimality_residual_below_1e12_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 8;
        let lo = random_vec(&mut rng, n, 1.0).map(|v| v - 1.5);
        let hi = &lo + Vector::repeat(n, 2.0);
        let regs = vec![
            Regularizer::zero(),
            Regularizer::l1(0.3).unwrap(),
            Regularizer::box_constraint(lo, hi).unwrap(),
        ];
        for reg in &regs {
            for _ in 0..1000 {
                let step = rng.random::<f64>() * 2.0 + 1e-3;
                let u = random_vec(&mut rng, n, 3.0);
                let p = reg.prox(step, &u).unwrap();
                let res = optimality_residual(reg, step, &u, &p);
                assert!(res <= 1e-12, "residual {res} for {reg:?}");
            }
        }
    }

    #[test]
    fn nonexpansive_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let regs = vec![
            Regularizer::zero(),
            Regularizer::l1(0.7).unwrap(),
            Regularizer::box_constraint(Vector::repeat(n, -1.0), Vector::repeat(n, 1.0)).unwrap(),
        ];
        for reg in &regs {
            for _ in 0..500 {
                let step = rng.random::<f64>() + 1e-3;
                let u = random_vec(&mut rng, n, 4.0);
                let v = random_vec(&mut rng, n, 4.0);
                let pu = reg.prox(step, &u).unwrap();
                let pv = reg.prox(step, &v).unwrap();
                assert!((&pu - &pv).norm() <= (&u - &v).norm() + 1e-12);
                // firm nonexpansiveness for the soft threshold map
                if matches!(reg, Regularizer::L1 { .. }) {
                    let lhs = (&pu - &pv).norm_squared();
                    let rhs = (&pu - &pv).dot(&(&u - &v));
                    assert!(lhs <= rhs + 1e-12);
                }
            }
        }
    }
}
