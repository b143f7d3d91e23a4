//! Cross-seed aggregation and empirical convergence-rate estimation.
//!
//! Traces from many seeds are averaged pointwise on their shared recording
//! grid, then a power-law exponent is read off by ordinary least squares on
//! `(log₁₀ axis, log₁₀ mean)` over a fit window. The default window is the
//! geometric upper half of the grid, `[√(axis_min·axis_max), axis_max]`,
//! which skips the transient where clamped tracker weights and warm starts
//! distort the constants.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::RunTrace;

/// Which trace column to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceField {
    Dist,
    DistSq,
    GradNormSq,
    TrackingErrSq,
    StepLen,
    Objective,
}

impl TraceField {
    pub const ALL: [TraceField; 6] = [
        TraceField::Dist,
        TraceField::DistSq,
        TraceField::GradNormSq,
        TraceField::TrackingErrSq,
        TraceField::StepLen,
        TraceField::Objective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceField::Dist => "dist",
            TraceField::DistSq => "dist_sq",
            TraceField::GradNormSq => "grad_norm_sq",
            TraceField::TrackingErrSq => "tracking_err_sq",
            TraceField::StepLen => "step_len",
            TraceField::Objective => "objective",
        }
    }
}

impl std::str::FromStr for TraceField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TraceField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown trace field '{s}'")))
    }
}

/// Horizontal axis for rate fitting: iteration index or cumulative oracle
/// queries. Rate statements count oracle queries, so that is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Iterations,
    #[default]
    Queries,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Iterations => "iters",
            Axis::Queries => "queries",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iters" => Ok(Axis::Iterations),
            "queries" => Ok(Axis::Queries),
            other => Err(Error::invalid(format!(
                "unknown axis '{other}' (expected iters or queries)"
            ))),
        }
    }
}

/// Pointwise mean and standard error of one traced quantity over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    /// Iteration grid shared by all merged traces.
    pub iters: Vec<u64>,
    /// Cumulative-query grid shared by all merged traces.
    pub queries: Vec<u64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_seeds: usize,
}

impl AggregateSeries {
    pub fn axis_values(&self, axis: Axis) -> &[u64] {
        match axis {
            Axis::Iterations => &self.iters,
            Axis::Queries => &self.queries,
        }
    }

    /// Running average `(1/j) Σ_{i ≤ j} mean_i` over the recorded grid; the
    /// form in which averaged gradient-norm bounds are stated. Exact when
    /// the grid has stride 1, a uniform-grid approximation otherwise.
    pub fn prefix_mean(&self) -> AggregateSeries {
        let mut mean = Vec::with_capacity(self.mean.len());
        let mut se = Vec::with_capacity(self.stderr.len());
        let mut acc = 0.0;
        let mut acc_se = 0.0;
        for (i, (m, s)) in self.mean.iter().zip(&self.stderr).enumerate() {
            acc += m;
            acc_se += s;
            let n = (i + 1) as f64;
            mean.push(acc / n);
            se.push(acc_se / n);
        }
        AggregateSeries {
            iters: self.iters.clone(),
            queries: self.queries.clone(),
            mean,
            stderr: se,
            n_seeds: self.n_seeds,
        }
    }

    /// `axis,mean,stderr` rows for the chosen axis.
    pub fn to_csv(&self, axis: Axis) -> String {
        let mut out = String::from("axis,mean,stderr\n");
        for ((ax, m), s) in self
            .axis_values(axis)
            .iter()
            .zip(&self.mean)
            .zip(&self.stderr)
        {
            out.push_str(&format!("{ax},{m},{s}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path, axis: Axis) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv(axis).as_bytes())?;
        Ok(())
    }
}

/// Pointwise mean/standard error of `field` over traces recorded on
/// identical grids. Fields that a trace could not provide (no truth) are
/// rejected rather than silently skipped.
pub fn aggregate(traces: &[RunTrace], field: TraceField) -> Result<AggregateSeries> {
    if traces.is_empty() {
        return Err(Error::invalid("aggregate needs at least one trace"));
    }
    let first = &traces[0];
    let iters: Vec<u64> = first.records.iter().map(|r| r.k).collect();
    let queries: Vec<u64> = first.records.iter().map(|r| r.queries).collect();
    for (i, t) in traces.iter().enumerate() {
        if t.records.len() != first.records.len()
            || t.records
                .iter()
                .zip(&first.records)
                .any(|(a, b)| a.k != b.k || a.queries != b.queries)
        {
            return Err(Error::invalid(format!(
                "trace {i} is recorded on a different grid; all traces must share (K, stride)"
            )));
        }
    }

    let take = |t: &RunTrace, idx: usize| -> Result<f64> {
        let r = &t.records[idx];
        let v = match field {
            TraceField::Dist => r.dist,
            TraceField::DistSq => r.dist_sq,
            TraceField::GradNormSq => r.grad_norm_sq,
            TraceField::TrackingErrSq => r.tracking_err_sq,
            TraceField::StepLen => Some(r.step_len),
            TraceField::Objective => r.objective,
        };
        v.ok_or_else(|| {
            Error::invalid(format!(
                "field '{}' is unavailable in a trace (no exact problem data)",
                field.name()
            ))
        })
    };

    let n = traces.len();
    let mut mean = Vec::with_capacity(iters.len());
    let mut stderr = Vec::with_capacity(iters.len());
    for idx in 0..iters.len() {
        let mut sum = 0.0;
        for t in traces {
            sum += take(t, idx)?;
        }
        let m = sum / n as f64;
        let var = if n > 1 {
            let mut ss = 0.0;
            for t in traces {
                let d = take(t, idx)? - m;
                ss += d * d;
            }
            ss / (n as f64 - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        stderr.push((var / n as f64).sqrt());
    }
    Ok(AggregateSeries {
        iters,
        queries,
        mean,
        stderr,
        n_seeds: n,
    })
}

/// Inclusive fit window on the chosen axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::invalid(format!(
                "window requires lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Geometric upper half `[√(lo·hi), hi]` of an axis range.
    pub fn tail_of(axis_values: &[u64]) -> Result<Self> {
        let lo = *axis_values.first().ok_or_else(|| Error::invalid("empty series"))? as f64;
        let hi = *axis_values.last().unwrap() as f64;
        Self::new((lo.max(1.0) * hi).sqrt(), hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// A fitted power law `mean ≈ 10^intercept · axis^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Goodness of fit of the log-log regression, in `[0, 1]`.
    pub r2: f64,
    pub window: Window,
    pub n_points: usize,
}

/// Ordinary least squares on `(log₁₀ x, log₁₀ y)` over the window. Demands
/// strictly positive values inside the window (logs must exist).
pub fn fit_loglog(xs: &[f64], ys: &[f64], window: Window) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("axis and value lengths differ"));
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&x, &y) in xs.iter().zip(ys) {
        if !window.contains(x) {
            continue;
        }
        if !(x > 0.0) || !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!(
                "log-log fit needs positive finite values in the window; got ({x}, {y})"
            )));
        }
        lx.push(x.log10());
        ly.push(y.log10());
    }
    let n = lx.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "window [{}, {}] covers {n} point(s); need at least 2",
            window.lo, window.hi
        )));
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("all window points share one axis value"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = syy - slope * sxy;
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0 // constant series fitted exactly by slope 0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        window,
        n_points: n,
    })
}

/// Fits the aggregated mean against the chosen axis.
pub fn fit_slope(series: &AggregateSeries, axis: Axis, window: Window) -> Result<SlopeFit> {
    let xs: Vec<f64> = series.axis_values(axis).iter().map(|&v| v as f64).collect();
    fit_loglog(&xs, &series.mean, window)
}

/// [`fit_slope`] over the default tail window.
pub fn fit_slope_tail(series: &AggregateSeries, axis: Axis) -> Result<SlopeFit> {
    let window = Window::tail_of(series.axis_values(axis))?;
    fit_slope(series, axis, window)
}

/// Reads an `axis,mean,stderr` CSV back as columns.
pub fn read_aggregate_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut axis = Vec::new();
    let mut mean = Vec::new();
    let mut stderr = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if lineno == 1 {
            if line.trim() != "axis,mean,stderr" {
                return Err(Error::Parse {
                    line: 1,
                    message: "expected header 'axis,mean,stderr'".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 columns, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad number '{s}'"),
            })
        };
        axis.push(parse(fields[0])?);
        mean.push(parse(fields[1])?);
        stderr.push(parse(fields[2])?);
    }
    Ok((axis, mean, stderr))
}
