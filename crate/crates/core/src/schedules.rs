//! Two-timescale step-size laws and the smoothing weights they induce.
//!
//! A [`Schedule`] carries the polynomial laws `α_k = c_a·k^{−a}` (main
//! iterate) and `β_k = c_b·k^{−b}` (inner-value tracker). The four named
//! [`Regime`]s pin the exponent pairs under which the solver's convergence
//! rate is characterized.
//!
//! By default the tracker weight is clamped to `β_k ≤ 1` so the smoothing
//! update stays a convex combination from the first iteration; the raw law
//! starts above 1 for `c_b > 1` and the clamp leaves every `k > c_b^{1/b}`
//! unchanged. Unclamped mode is retained for literal over-relaxed runs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    c_a: f64,
    a: f64,
    c_b: f64,
    b: f64,
    clamp_beta: bool,
}

impl Schedule {
    /// Validates `c_a, c_b > 0` and `a, b ∈ (0, 1]`.
    pub fn new(c_a: f64, a: f64, c_b: f64, b: f64, clamp_beta: bool) -> Result<Self> {
        for (name, v) in [("c_a", c_a), ("c_b", c_b)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("a", a), ("b", b)] {
            if !v.is_finite() || v <= 0.0 || v > 1.0 {
                return Err(Error::invalid(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(Self {
            c_a,
            a,
            c_b,
            b,
            clamp_beta,
        })
    }

    /// Regime exponents with the default coefficients `c_a = 1`, `c_b = 2`
    /// and clamping on.
    pub fn for_regime(regime: Regime) -> Self {
        let (a, b) = regime.exponents();
        Self {
            c_a: 1.0,
            a,
            c_b: 2.0,
            b,
            clamp_beta: true,
        }
    }

    /// Same exponents, different coefficients: the knob a tuning sweep turns.
    pub fn with_coefficients(self, c_a: f64, c_b: f64) -> Result<Self> {
        Self::new(c_a, self.a, c_b, self.b, self.clamp_beta)
    }

    pub fn c_a(&self) -> f64 {
        self.c_a
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn c_b(&self) -> f64 {
        self.c_b
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn clamp_beta(&self) -> bool {
        self.clamp_beta
    }

    /// `α_k = c_a·k^{−a}` for `k ≥ 1`.
    pub fn alpha(&self, k: u64) -> f64 {
        assert!(k >= 1, "step-size law is defined for k >= 1");
        self.c_a * (k as f64).powf(-self.a)
    }

    /// `β_k = c_b·k^{−b}` for `k ≥ 1`, clamped to 1 unless disabled.
    pub fn beta(&self, k: u64) -> f64 {
        assert!(k >= 1, "step-size law is defined for k >= 1");
        let raw = self.c_b * (k as f64).powf(-self.b);
        if self.clamp_beta {
            raw.min(1.0)
        } else {
            raw
        }
    }

    /// Weights of past inner-value samples in the smoothing average after
    /// `k` solver iterations, for a warm-started tracker.
    ///
    /// Entry `t` weighs the sample consumed at iteration `t` (index 0 being
    /// the warm-start sample, which enters with weight coefficient 1).
    pub fn weights(&self, k: u64) -> Vec<f64> {
        let betas: Vec<f64> = std::iter::once(1.0)
            .chain((1..=k).map(|i| self.beta(i)))
            .collect();
        smoothing_weights(&betas)
    }
}

/// Named exponent regimes for the step-size laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Smooth nonconvex objective, nonlinear inner map: `(a, b) = (5/9, 4/9)`.
    NonconvexGeneral,
    /// Smooth nonconvex, linear inner (or linear outer): `(1/2, 1/2)`.
    NonconvexLinear,
    /// Optimally strongly convex, nonlinear inner: `(1, 4/5)`.
    StronglyConvexGeneral,
    /// Optimally strongly convex, linear inner: `(1, 1)`.
    StronglyConvexLinear,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::NonconvexGeneral,
        Regime::NonconvexLinear,
        Regime::StronglyConvexGeneral,
        Regime::StronglyConvexLinear,
    ];

    pub fn exponents(self) -> (f64, f64) {
        match self {
            Regime::NonconvexGeneral => (5.0 / 9.0, 4.0 / 9.0),
            Regime::NonconvexLinear => (0.5, 0.5),
            Regime::StronglyConvexGeneral => (1.0, 4.0 / 5.0),
            Regime::StronglyConvexLinear => (1.0, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::NonconvexGeneral => "nonconvex_general",
            Regime::NonconvexLinear => "nonconvex_linear",
            Regime::StronglyConvexGeneral => "stronglyconvex_general",
            Regime::StronglyConvexLinear => "stronglyconvex_linear",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown regime '{s}' (expected one of {})",
                    Regime::ALL.map(|r| r.name()).join(", ")
                ))
            })
    }
}

/// Weights `ξ_t^{(k)}` of an exponential-smoothing recursion with weight
/// sequence `β_0, …, β_k`:
///
/// ```text
///     ξ_t^{(k)} = β_t · ∏_{i=t+1}^{k} (1 − β_i),      ξ_k^{(k)} = β_k,
/// ```
///
/// so that `u_{k+1} = (1−β_k)u_k + β_k s_{k+1}` unrolls to
/// `u_{k+1} = Σ_t ξ_t^{(k)} s_{t+1}` whenever `β_0 = 1`.
/// Computed with a backward running product in O(k).
pub fn smoothing_weights(betas: &[f64]) -> Vec<f64> {
    let mut weights = vec![0.0; betas.len()];
    let mut tail_product = 1.0;
    for t in (0..betas.len()).rev() {
        weights[t] = betas[t] * tail_product;
        tail_product *= 1.0 - betas[t];
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn alpha_values() {
        let s = Schedule::new(1.0, 5.0 / 9.0, 2.0, 4.0 / 9.0, true).unwrap();
        assert_eq!(s.alpha(1), 1.0);
        let s = Schedule::new(1.0, 1.0, 1.0, 1.0, true).unwrap();
        assert_relative_eq!(s.alpha(10), 0.1, max_relative = 1e-15);
        let s = Schedule::new(2.0, 0.5, 1.0, 1.0, true).unwrap();
        assert_relative_eq!(s.alpha(4), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn beta_values_clamped_and_raw() {
        let clamped = Schedule::new(1.0, 1.0, 2.0, 4.0 / 9.0, true).unwrap();
        assert_eq!(clamped.beta(1), 1.0);
        let raw = Schedule::new(1.0, 1.0, 2.0, 4.0 / 9.0, false).unwrap();
        assert_eq!(raw.beta(1), 2.0);
        let harmonic = Schedule::new(1.0, 1.0, 1.0, 1.0, true).unwrap();
        for k in [1u64, 2, 5, 100] {
            assert_relative_eq!(harmonic.beta(k), 1.0 / k as f64, max_relative = 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "k >= 1")]
    fn alpha_rejects_k_zero() {
        Schedule::for_regime(Regime::StronglyConvexLinear).alpha(0);
    }

    #[test]
    #[should_panic(expected = "k >= 1")]
    fn beta_rejects_k_zero() {
        Schedule::for_regime(Regime::StronglyConvexLinear).beta(0);
    }

    #[test]
    fn invalid_schedules_are_rejected() {
        assert!(Schedule::new(0.0, 0.5, 1.0, 0.5, true).is_err());
        assert!(Schedule::new(1.0, 0.0, 1.0, 0.5, true).is_err());
        assert!(Schedule::new(1.0, 1.1, 1.0, 0.5, true).is_err());
        assert!(Schedule::new(1.0, 0.5, -1.0, 0.5, true).is_err());
        assert!(Schedule::new(1.0, 0.5, 1.0, f64::NAN, true).is_err());
    }

    #[test]
    fn regime_exponents_and_names_round_trip() {
        let expected = [
            (Regime::NonconvexGeneral, (5.0 / 9.0, 4.0 / 9.0)),
            (Regime::NonconvexLinear, (0.5, 0.5)),
            (Regime::StronglyConvexGeneral, (1.0, 0.8)),
            (Regime::StronglyConvexLinear, (1.0, 1.0)),
        ];
        for (regime, exps) in expected {
            assert_eq!(regime.exponents(), exps);
            assert_eq!(regime.name().parse::<Regime>().unwrap(), regime);
        }
        assert!("sgd".parse::<Regime>().is_err());
    }

    #[test]
    fn uniform_weights_for_harmonic_betas() {
        // β_t = 1/(t+1) for t = 0..k makes every sample weigh 1/(k+1)
        for k in [0usize, 1, 3, 10, 50] {
            let betas: Vec<f64> = (0..=k).map(|t| 1.0 / (t as f64 + 1.0)).collect();
            let w = smoothing_weights(&betas);
            for &wi in &w {
                assert_relative_eq!(wi, 1.0 / (k as f64 + 1.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn beta_one_keeps_only_latest_sample() {
        let w = smoothing_weights(&[1.0; 6]);
        assert_eq!(w[5], 1.0);
        assert_eq!(&w[..5], &[0.0; 5]);
    }

    /// Direct O(k²) evaluation of the product formula.
    fn weights_by_definition(betas: &[f64]) -> Vec<f64> {
        let k = betas.len() - 1;
        (0..=k)
            .map(|t| betas[t] * (t + 1..=k).map(|i| 1.0 - betas[i]).product::<f64>())
            .collect()
    }

    proptest! {
        #[test]
        fn weights_match_direct_products_and_sum_to_one(
            betas in proptest::collection::vec(1e-6f64..=1.0, 1..50)
        ) {
            let mut betas = betas;
            betas[0] = 1.0;
            let fast = smoothing_weights(&betas);
            let slow = weights_by_definition(&betas);
            for (f, s) in fast.iter().zip(slow.iter()) {
                prop_assert!((f - s).abs() <= 1e-12 * s.abs().max(1.0));
                prop_assert!(*f >= 0.0);
            }
            // telescoping: Σξ = 1 − ∏(1−β_i) = 1 when β_0 = 1
            let sum: f64 = fast.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn recursion_matches_weighted_sum(
            betas in proptest::collection::vec(1e-6f64..=1.0, 1..100),
            samples in proptest::collection::vec(-10.0f64..10.0, 100),
        ) {
            let mut betas = betas;
            betas[0] = 1.0;
            let k = betas.len() - 1;
            // u_{t+1} = (1-β_t) u_t + β_t s_{t+1}, u_0 arbitrary (killed by β_0 = 1)
            let mut u = 123.456;
            for t in 0..=k {
                u = (1.0 - betas[t]) * u + betas[t] * samples[t];
            }
            let w = smoothing_weights(&betas);
            let weighted: f64 = w.iter().zip(&samples).map(|(wi, si)| wi * si).sum();
            prop_assert!((u - weighted).abs() <= 1e-12 * weighted.abs().max(1.0));
        }

        #[test]
        fn laws_are_monotone_nonincreasing(
            c_a in 0.1f64..10.0, a in 0.01f64..=1.0,
            c_b in 0.1f64..10.0, b in 0.01f64..=1.0,
            clamp in proptest::bool::ANY,
        ) {
            let s = Schedule::new(c_a, a, c_b, b, clamp).unwrap();
            for k in 1u64..200 {
                prop_assert!(s.alpha(k + 1) <= s.alpha(k));
                prop_assert!(s.beta(k + 1) <= s.beta(k));
                prop_assert!(s.alpha(k) > 0.0);
                prop_assert!(s.beta(k) > 0.0);
                if clamp {
                    prop_assert!(s.beta(k) <= 1.0);
                }
            }
        }
    }

    #[test]
    fn schedule_weights_align_with_warm_started_tracker() {
        let s = Schedule::new(1.0, 1.0, 1.0, 1.0, true).unwrap();
        // effective sequence [1, β(1)=1, β(2)=1/2, ...]: uniform over the
        // k real samples, warm-start sample displaced by the β(1)=1 step
        let k = 7;
        let w = s.weights(k);
        assert_eq!(w.len(), k as usize + 1);
        assert_eq!(w[0], 0.0);
        for t in 1..=k as usize {
            assert_relative_eq!(w[t], 1.0 / k as f64, max_relative = 1e-12);
        }
    }
}
