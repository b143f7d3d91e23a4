//! Markov decision process instances for policy evaluation, and their
//! plain-text fixture format.
//!
//! An [`MdpSpec`] holds the policy-collapsed data of a fixed-policy chain:
//! row-stochastic transitions `P`, per-transition rewards, a discount and a
//! linear feature map. Generators cover the benchmark setups: uniformly
//! random sparse-transition MDPs, instances with a planted weight vector
//! (rewards synthesized so the planted vector solves the evaluation problem
//! exactly), and the star counterexample.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    /// State count `S`.
    pub n_states: usize,
    /// Feature dimension `d`.
    pub feature_dim: usize,
    /// Discount in `(0, 1)`.
    pub gamma: f64,
    /// `S × S` row-stochastic transition matrix under the evaluated policy.
    pub transition: Matrix,
    /// `S × S` per-transition rewards `r_{s,s'}`.
    pub rewards: Matrix,
    /// `S × d` feature matrix (row `s` is the feature vector of state `s`).
    pub features: Matrix,
    /// Planted weight vector, for consistently generated instances.
    pub planted: Option<Vector>,
}

impl MdpSpec {
    /// Structural validation: shapes, discount range, finite entries and
    /// row-stochastic transitions.
    pub fn validate(&self) -> Result<()> {
        let s = self.n_states;
        let d = self.feature_dim;
        if s < 1 || d < 1 {
            return Err(Error::Construction("need at least 1 state and 1 feature".into()));
        }
        if self.transition.shape() != (s, s) {
            return Err(Error::Construction("transition matrix shape mismatch".into()));
        }
        if self.rewards.shape() != (s, s) {
            return Err(Error::Construction("reward matrix shape mismatch".into()));
        }
        if self.features.shape() != (s, d) {
            return Err(Error::Construction("feature matrix shape mismatch".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Construction(format!(
                "discount must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        for m in [&self.transition, &self.rewards, &self.features] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Construction("nonfinite entry in problem data".into()));
            }
        }
        if let Some(w) = &self.planted {
            if w.len() != d {
                return Err(Error::Construction("planted vector length mismatch".into()));
            }
        }
        for s_idx in 0..s {
            let row = self.transition.row(s_idx);
            if row.iter().any(|&p| p < 0.0) {
                return Err(Error::Construction(format!(
                    "negative transition probability in row {s_idx}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Construction(format!(
                    "transition row {s_idx} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Expected one-step rewards `r̄_s = Σ_{s'} P_{ss'} r_{s,s'}`.
    pub fn expected_rewards(&self) -> Vector {
        Vector::from_iterator(
            self.n_states,
            (0..self.n_states).map(|s| self.transition.row(s).dot(&self.rewards.row(s))),
        )
    }

    /// Residual map `M = Φ − γ P Φ`: the evaluation problem is
    /// `min_w ‖M w − r̄‖²`.
    pub fn residual_matrix(&self) -> Matrix {
        &self.features - (&self.transition * &self.features) * self.gamma
    }

    /// Plain-text fixture form; see [`MdpSpec::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("mdp v1\n");
        out.push_str(&format!("states {}\n", self.n_states));
        out.push_str(&format!("features {}\n", self.feature_dim));
        out.push_str(&format!("gamma {}\n", self.gamma));
        let matrix = |out: &mut String, name: &str, m: &Matrix| {
            out.push_str(name);
            out.push('\n');
            for r in 0..m.nrows() {
                let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        };
        matrix(&mut out, "P", &self.transition);
        matrix(&mut out, "R", &self.rewards);
        matrix(&mut out, "Phi", &self.features);
        if let Some(w) = &self.planted {
            out.push_str("planted\n");
            let row: Vec<String> = w.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    /// Parses the fixture format:
    ///
    /// ```text
    /// mdp v1
    /// states S
    /// features d
    /// gamma g
    /// P            <- S rows of S space-separated floats
    /// R            <- S rows of S floats
    /// Phi          <- S rows of d floats
    /// planted      <- optional, one row of d floats
    /// end
    /// ```
    ///
    /// Parsing is structural only; call [`MdpSpec::validate`] to check the
    /// stochasticity and range invariants.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut next_line = |expect: &str| -> Result<(usize, String)> {
            for (no, line) in lines.by_ref() {
                if line.is_empty() {
                    continue;
                }
                return Ok((no, line.to_string()));
            }
            Err(Error::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {expect}"),
            })
        };

        let (no, header) = next_line("header")?;
        if header != "mdp v1" {
            return Err(Error::Parse {
                line: no,
                message: format!("expected 'mdp v1', got '{header}'"),
            });
        }
        let mut scalar = |key: &str| -> Result<(usize, String)> {
            let (no, line) = next_line(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((no, v.trim().to_string())),
                _ => Err(Error::Parse {
                    line: no,
                    message: format!("expected '{key} <value>', got '{line}'"),
                }),
            }
        };
        let (no, s_str) = scalar("states")?;
        let n_states: usize = s_str.parse().map_err(|_| Error::Parse {
            line: no,
            message: format!("bad state count '{s_str}'"),
        })?;
        let (no, d_str) = scalar("features")?;
        let feature_dim: usize = d_str.parse().map_err(|_| Error::Parse {
            line: no,
            message: format!("bad feature count '{d_str}'"),
        })?;
        let (no, g_str) = scalar("gamma")?;
        let gamma: f64 = g_str.parse().map_err(|_| Error::Parse {
            line: no,
            message: format!("bad gamma '{g_str}'"),
        })?;

        let mut read_matrix = |name: &str, rows: usize, cols: usize| -> Result<Matrix> {
            let (no, tag) = next_line(name)?;
            if tag != name {
                return Err(Error::Parse {
                    line: no,
                    message: format!("expected section '{name}', got '{tag}'"),
                });
            }
            let mut m = Matrix::zeros(rows, cols);
            for r in 0..rows {
                let (no, line) = next_line("matrix row")?;
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() != cols {
                    return Err(Error::Parse {
                        line: no,
                        message: format!("expected {cols} values, got {}", vals.len()),
                    });
                }
                for (c, v) in vals.iter().enumerate() {
                    m[(r, c)] = v.parse().map_err(|_| Error::Parse {
                        line: no,
                        message: format!("bad number '{v}'"),
                    })?;
                }
            }
            Ok(m)
        };

        let transition = read_matrix("P", n_states, n_states)?;
        let rewards = read_matrix("R", n_states, n_states)?;
        let features = read_matrix("Phi", n_states, feature_dim)?;

        let (no, tag) = next_line("'planted' or 'end'")?;
        let planted = if tag == "planted" {
            let (no, line) = next_line("planted row")?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != feature_dim {
                return Err(Error::Parse {
                    line: no,
                    message: format!("expected {feature_dim} values, got {}", vals.len()),
                });
            }
            let mut w = Vector::zeros(feature_dim);
            for (i, v) in vals.iter().enumerate() {
                w[i] = v.parse().map_err(|_| Error::Parse {
                    line: no,
                    message: format!("bad number '{v}'"),
                })?;
            }
            let (no, tag) = next_line("'end'")?;
            if tag != "end" {
                return Err(Error::Parse {
                    line: no,
                    message: format!("expected 'end', got '{tag}'"),
                });
            }
            Some(w)
        } else if tag == "end" {
            None
        } else {
            return Err(Error::Parse {
                line: no,
                message: format!("expected 'planted' or 'end', got '{tag}'"),
            });
        };

        Ok(MdpSpec {
            n_states,
            feature_dim,
            gamma,
            transition,
            rewards,
            features,
            planted,
        })
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }
}

/// One per-action transition kernel: each row has exactly `next_states`
/// reachable successors with uniform-[0,1] weights, normalized to sum 1.
fn action_kernel(n_states: usize, next_states: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut kernel = Matrix::zeros(n_states, n_states);
    for s in 0..n_states {
        let succ = index_sample(rng, n_states, next_states);
        let mut weights: Vec<f64> = (0..next_states).map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        for (j, idx) in succ.into_iter().enumerate() {
            kernel[(s, idx)] = weights[j];
        }
    }
    kernel
}

fn random_features(
    n_states: usize,
    feature_dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Matrix> {
    for _ in 0..100 {
        let phi = Matrix::from_fn(n_states, feature_dim, |_, _| {
            StandardNormal.sample(rng)
        });
        let rank = phi.clone().svd(false, false).rank(1e-9);
        if rank == feature_dim.min(n_states) {
            return Ok(phi);
        }
    }
    Err(Error::Construction(
        "could not draw a full-rank feature matrix in 100 attempts".into(),
    ))
}

/// Uniformly random policy-evaluation instance: `actions_per_state` kernels
/// with `next_states` reachable successors each, mixed by a uniform policy;
/// rewards uniform in [0,1]; standard-normal features redrawn until full
/// column rank. Deterministic given `seed`.
pub fn build_random_mdp(
    n_states: usize,
    feature_dim: usize,
    actions_per_state: usize,
    next_states: usize,
    gamma: f64,
    seed: u64,
) -> Result<MdpSpec> {
    if n_states < 2 {
        return Err(Error::Construction("need at least 2 states".into()));
    }
    if feature_dim < 1 || actions_per_state < 1 {
        return Err(Error::Construction("need at least 1 feature and 1 action".into()));
    }
    if next_states < 1 || next_states > n_states {
        return Err(Error::Construction(format!(
            "next_states must lie in [1, {n_states}], got {next_states}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Construction(format!(
            "discount must lie in (0, 1), got {gamma}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Matrix::zeros(n_states, n_states);
    for _ in 0..actions_per_state {
        transition += action_kernel(n_states, next_states, &mut rng);
    }
    transition /= actions_per_state as f64;

    let rewards = Matrix::from_fn(n_states, n_states, |_, _| rng.random::<f64>());
    let features = random_features(n_states, feature_dim, &mut rng)?;

    let spec = MdpSpec {
        n_states,
        feature_dim,
        gamma,
        transition,
        rewards,
        features,
        planted: None,
    };
    spec.validate()?;
    Ok(spec)
}

/// Random instance whose rewards are synthesized as `r̄ = (I − γP) Φ w*`
/// (constant across successor states), so the planted `w*` solves the
/// evaluation problem with zero residual. Rewards are therefore not
/// confined to [0,1] here.
pub fn build_consistent_mdp(
    n_states: usize,
    feature_dim: usize,
    actions_per_state: usize,
    next_states: usize,
    gamma: f64,
    planted: &Vector,
    seed: u64,
) -> Result<MdpSpec> {
    if planted.len() != feature_dim {
        return Err(Error::Construction(format!(
            "planted vector has length {}, expected {feature_dim}",
            planted.len()
        )));
    }
    let mut spec = build_random_mdp(
        n_states,
        feature_dim,
        actions_per_state,
        next_states,
        gamma,
        seed,
    )?;
    let phi_w = &spec.features * planted;
    let rbar = &phi_w - (&spec.transition * &phi_w) * gamma;
    for s in 0..n_states {
        for t in 0..n_states {
            spec.rewards[(s, t)] = rbar[s];
        }
    }
    spec.planted = Some(planted.clone());
    spec.validate()?;
    Ok(spec)
}

/// The 6-state star counterexample: five spoke states and one hub, every
/// state moving to the hub with probability one, zero rewards, discount
/// 0.99. Spoke `i` has feature vector `2·e_i + e_6`; the hub has
/// `e_5 + 2·e_6` (7 features for 6 states, so the representation is
/// overparameterized). With zero rewards the true value function is zero
/// and any weight vector in the null space of the features solves the
/// evaluation problem exactly.
pub fn build_baird() -> MdpSpec {
    let n_states = 6;
    let feature_dim = 7;
    let mut transition = Matrix::zeros(n_states, n_states);
    for s in 0..n_states {
        transition[(s, n_states - 1)] = 1.0;
    }
    let rewards = Matrix::zeros(n_states, n_states);
    let mut features = Matrix::zeros(n_states, feature_dim);
    for s in 0..n_states - 1 {
        features[(s, s)] = 2.0;
        features[(s, feature_dim - 1)] = 1.0;
    }
    features[(n_states - 1, feature_dim - 2)] = 1.0;
    features[(n_states - 1, feature_dim - 1)] = 2.0;
    MdpSpec {
        n_states,
        feature_dim,
        gamma: 0.99,
        transition,
        rewards,
        features,
        planted: None,
    }
}
