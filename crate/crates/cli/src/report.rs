//! JSON run reports and CSV side outputs.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use zerocert_core::{
    Ball, Certificate, DescentStatus, GradientCheckReport, SweepEntry, TraceRecord,
    TransformSearchResult,
};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub name: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub analytic_jacobian: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchSummary {
    pub best_parameter: f64,
    pub any_passed: bool,
    pub excluded_radius: Option<f64>,
    /// Certificate of `G = F o B_mu^-1` at the best `mu`.
    pub certificate: Certificate,
    /// Sweep rows on the original residual scale (`mu^2 G`).
    pub sweep: Vec<SweepEntry>,
}

impl From<&TransformSearchResult> for SearchSummary {
    fn from(r: &TransformSearchResult) -> Self {
        Self {
            best_parameter: r.best_parameter,
            any_passed: r.any_passed,
            excluded_radius: r.excluded_radius,
            certificate: r.certificate.clone(),
            sweep: r.sweep.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentSummary {
    /// `"original"` or `"transformed"`.
    pub problem: &'static str,
    pub mu: Option<f64>,
    pub status: DescentStatus,
    pub iterations: usize,
    pub residual_norm: f64,
    pub in_ball: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub verified: bool,
    pub tolerance: f64,
    /// Ball the solution was checked against, in original coordinates.
    pub ball: Ball,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub problem: ProblemSummary,
    pub certificate: Option<Certificate>,
    pub search: Option<SearchSummary>,
    pub selected_mu: Option<f64>,
    pub descent: Option<DescentSummary>,
    pub solution: Option<SolutionSummary>,
    pub gradient_check: Option<GradientCheckReport>,
    pub verdict: &'static str,
    pub timings_ms: BTreeMap<&'static str, f64>,
}

impl RunReport {
    pub fn new(
        command: &'static str,
        seed: u64,
        config: RunConfig,
        problem: ProblemSummary,
    ) -> Self {
        Self {
            command,
            seed,
            config,
            problem,
            certificate: None,
            search: None,
            selected_mu: None,
            descent: None,
            solution: None,
            gradient_check: None,
            verdict: "FAIL",
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits::default());
        self.serialize(&mut ser)
            .map_err(|e| CliError::Runtime(format!("cannot serialize report: {e}")))?;
        out.push(b'\n');
        Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = self.to_json()?;
        std::fs::write(path, json).map_err(|e| write_error(path, e))
    }
}

/// Pretty JSON with every float written with 17 significant digits.
#[derive(Default)]
pub struct FixedDigits {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_sweep_csv(path: &Path, sweep: &[SweepEntry]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_error(path, e))?;
    w.write_record(["mu", "c", "lhs", "rhs", "slack", "passed"])
        .map_err(|e| write_error(path, e))?;
    for e in sweep {
        w.write_record([
            float(e.mu),
            float(e.c),
            float(e.lhs),
            float(e.rhs),
            float(e.slack),
            e.passed.to_string(),
        ])
        .map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_error(path, e))?;
    w.write_record(["k", "phi", "grad_norm", "step"])
        .map_err(|e| write_error(path, e))?;
    for t in trace {
        w.write_record([
            t.iteration.to_string(),
            float(t.phi),
            float(t.gradient_norm),
            float(t.step),
        ])
        .map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Vec<f64>,
        n: usize,
        bad: f64,
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedDigits::default());
        Sample {
            a: 0.1,
            b: vec![1.0, -2.5e-300],
            n: 3,
            bad: f64::NAN,
        }
        .serialize(&mut ser)
        .unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"), "{s}");
        assert!(s.contains("\"n\": 3"), "{s}");
        assert!(s.contains("\"bad\": null"), "{s}");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"].as_f64(), Some(0.1));
    }
}
