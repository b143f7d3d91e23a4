//! Per-iteration run traces and their CSV form.
//!
//! A record is written every `trace_stride` iterations (plus the final one).
//! Metric cells that need exact problem data stay empty when the oracle has
//! no truth accessor. The CSV layout is
//!
//! ```text
//! k,queries,dist,dist_sq,grad_norm_sq,tracking_err_sq,step_len,objective
//! ```
//!
//! with floats printed in shortest round-trip form, so traces from equal
//! seeds compare byte-for-byte.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Vector;

/// Metrics at iterate `x_k` plus the length of the step taken from it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Iteration index (1-based).
    pub k: u64,
    /// Cumulative sampling-oracle queries issued up to and including
    /// iteration `k`.
    pub queries: u64,
    /// `‖x_k − P_{X*}(x_k)‖` when the solution set is known.
    pub dist: Option<f64>,
    /// Squared distance to the solution set.
    pub dist_sq: Option<f64>,
    /// `‖∇F(x_k)‖²` when truth is available.
    pub grad_norm_sq: Option<f64>,
    /// `‖y_k − g(x_k)‖²` when truth is available.
    pub tracking_err_sq: Option<f64>,
    /// `‖x_{k+1} − x_k‖`.
    pub step_len: f64,
    /// `H(x_k) = F(x_k) + R(x_k)` when truth is available.
    pub objective: Option<f64>,
}

/// The recorded history of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    /// Final iterate `x_{K+1}`.
    pub final_x: Vector,
    /// Final tracker value `y_{K+1}`.
    pub final_y: Vector,
    /// Iterations executed.
    pub iters: u64,
    /// Total sampling-oracle queries (including a warm-start query).
    pub oracle_queries: u64,
}

pub const TRACE_HEADER: &str = "k,queries,dist,dist_sq,grad_norm_sq,tracking_err_sq,step_len,objective";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                r.queries,
                cell(r.dist),
                cell(r.dist_sq),
                cell(r.grad_norm_sq),
                cell(r.tracking_err_sq),
                r.step_len,
                cell(r.objective),
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    /// Reads records back from a trace CSV. Final iterates are not stored in
    /// the CSV, so they come back empty.
    pub fn read_csv(path: &Path) -> Result<RunTrace> {
        let f = std::fs::File::open(path)?;
        let reader = BufReader::new(f);
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if lineno == 1 {
                if line.trim() != TRACE_HEADER {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("expected trace header '{TRACE_HEADER}'"),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 8 columns, got {}", fields.len()),
                });
            }
            let int = |s: &str, what: &str| -> Result<u64> {
                s.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad {what} '{s}'"),
                })
            };
            let opt = |s: &str, what: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad {what} '{s}'"),
                })
            };
            records.push(TraceRecord {
                k: int(fields[0], "k")?,
                queries: int(fields[1], "queries")?,
                dist: opt(fields[2], "dist")?,
                dist_sq: opt(fields[3], "dist_sq")?,
                grad_norm_sq: opt(fields[4], "grad_norm_sq")?,
                tracking_err_sq: opt(fields[5], "tracking_err_sq")?,
                step_len: opt(fields[6], "step_len")?.ok_or(Error::Parse {
                    line: lineno,
                    message: "missing step_len".into(),
                })?,
                objective: opt(fields[7], "objective")?,
            });
        }
        let iters = records.last().map(|r| r.k).unwrap_or(0);
        let queries = records.last().map(|r| r.queries).unwrap_or(0);
        Ok(RunTrace {
            records,
            final_x: Vector::zeros(0),
            final_y: Vector::zeros(0),
            iters,
            oracle_queries: queries,
        })
    }
}
