//! The `certify`, `search` and `solve` commands.

use std::path::PathBuf;
use std::time::Instant;

use zerocert_core::certificate::certify;
use zerocert_core::descent::{solve, verify_solution};
use zerocert_core::functional::check_gradient;
use zerocert_core::transforms::{
    pull_back_ball, pull_back_zero, recover_problem_independent, search_mu,
};
use zerocert_core::{Ball, IndependentTransform, ResidualProblem};

use crate::config::RunConfig;
use crate::report::{
    write_sweep_csv, write_trace_csv, DescentSummary, ProblemSummary, RunReport, SearchSummary,
    SolutionSummary,
};
use crate::CliError;

/// A verified solution may miss the descent tolerance by this factor after
/// being mapped back to original coordinates.
pub const VERIFY_FACTOR: f64 = 10.0;

/// Paths given on the command line; they take precedence over `[output]`.
#[derive(Debug, Clone, Default)]
pub struct OutputOverrides {
    pub report: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Search,
    Solve,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Search => "search",
            Self::Solve => "solve",
        }
    }
}

/// Outcome of a command: the report plus the lines printed to stdout.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub lines: Vec<String>,
}

struct Paths {
    report: Option<PathBuf>,
    sweep_csv: Option<PathBuf>,
    trace_csv: Option<PathBuf>,
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

pub fn run(
    command: Command,
    mut config: RunConfig,
    seed: Option<u64>,
    overrides: OutputOverrides,
) -> Result<Outcome, CliError> {
    if let Some(seed) = seed {
        config.certificate.sampling.seed = seed;
    }
    let paths = Paths {
        report: overrides.report.or_else(|| config.output.report.clone()),
        sweep_csv: overrides
            .sweep_csv
            .or_else(|| config.output.sweep_csv.clone()),
        trace_csv: overrides
            .trace_csv
            .or_else(|| config.output.trace_csv.clone()),
    };
    if command == Command::Search && config.transform.is_none() {
        return Err(CliError::Config(
            "`search` needs a [transform] table".into(),
        ));
    }
    config.descent.record_trace = paths.trace_csv.is_some();

    let problem = config.problem.build()?;
    let ball = config.ball.build()?;
    let mut report = RunReport::new(
        command.name(),
        config.certificate.sampling.seed,
        config.clone(),
        ProblemSummary {
            name: problem.name().to_string(),
            input_dim: problem.input_dim(),
            output_dim: problem.output_dim(),
            analytic_jacobian: problem.has_analytic_jacobian(),
        },
    );
    let mut lines = Vec::new();
    let total = Instant::now();

    match command {
        Command::Certify => {
            let start = Instant::now();
            let cert = certify(
                &problem,
                &ball,
                config.certificate.method,
                &config.certificate.sampling,
            )?;
            report.timings_ms.insert("certify", ms(start));
            gradient_check(&problem, &ball, &mut report)?;
            lines.push(cert.verdict_line());
            report.verdict = cert.verdict();
            report.certificate = Some(cert);
        }
        Command::Search => {
            let grid = config.transform.expect("checked above");
            let start = Instant::now();
            let result = search_mu(&problem, &ball, &grid, &config.certificate)?;
            report.timings_ms.insert("search", ms(start));
            if let Some(path) = &paths.sweep_csv {
                write_sweep_csv(path, &result.sweep)?;
            }
            let passing = result.sweep.iter().filter(|e| e.passed).count();
            lines.push(format!(
                "sweep: {} values, {passing} passing, excluded_radius={}",
                result.sweep.len(),
                result
                    .excluded_radius
                    .map_or("none".into(), |r| r.to_string())
            ));
            lines.push(format!("selected_mu={}", result.best_parameter));
            lines.push(result.certificate.verdict_line());
            report.verdict = result.certificate.verdict();
            report.selected_mu = Some(result.best_parameter);
            report.search = Some(SearchSummary::from(&result));
        }
        Command::Solve => run_solve(&config, &problem, &ball, &paths, &mut report, &mut lines)?,
    }

    report.timings_ms.insert("total", ms(total));
    if let Some(path) = &paths.report {
        report.write(path)?;
    }
    Ok(Outcome { report, lines })
}

fn gradient_check(
    problem: &ResidualProblem,
    ball: &Ball,
    report: &mut RunReport,
) -> Result<(), CliError> {
    let start = Instant::now();
    report.gradient_check = Some(check_gradient(problem, ball.center())?);
    report.timings_ms.insert("gradient_check", ms(start));
    Ok(())
}

fn run_solve(
    config: &RunConfig,
    problem: &ResidualProblem,
    ball: &Ball,
    paths: &Paths,
    report: &mut RunReport,
    lines: &mut Vec<String>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let cert = certify(
        problem,
        ball,
        config.certificate.method,
        &config.certificate.sampling,
    )?;
    report.timings_ms.insert("certify", ms(start));
    gradient_check(problem, ball, report)?;
    lines.push(cert.verdict_line());

    let mut selected = None;
    if let Some(grid) = &config.transform {
        if !cert.passed {
            let start = Instant::now();
            let result = search_mu(problem, ball, grid, &config.certificate)?;
            report.timings_ms.insert("search", ms(start));
            if let Some(path) = &paths.sweep_csv {
                write_sweep_csv(path, &result.sweep)?;
            }
            if result.any_passed {
                selected = Some(result.best_parameter);
                lines.push(format!("selected_mu={}", result.best_parameter));
                lines.push(result.certificate.verdict_line());
            } else {
                lines.push("no transformed certificate passed".into());
            }
            report.search = Some(SearchSummary::from(&result));
        }
    }
    report.certificate = Some(cert);
    report.selected_mu = selected;

    let start = Instant::now();
    let (u, check_ball, descent) = match selected {
        Some(mu) => {
            let t = IndependentTransform::scale(mu)?;
            let g = recover_problem_independent(t, problem);
            let res = solve(&g, ball, &config.descent)?;
            let u = pull_back_zero(t, &res.u);
            (u, pull_back_ball(t, ball)?, res)
        }
        None => {
            let res = solve(problem, ball, &config.descent)?;
            (res.u.clone(), ball.clone(), res)
        }
    };
    report.timings_ms.insert("descent", ms(start));
    if let Some(path) = &paths.trace_csv {
        write_trace_csv(path, &descent.trace)?;
    }

    let residual = problem.residual_norm(&problem.eval_residual(&u)?);
    let tolerance = VERIFY_FACTOR * config.descent.residual_tolerance;
    let verified = verify_solution(problem, &u, &check_ball, tolerance);
    let u: Vec<f64> = u.iter().copied().collect();
    lines.push(format!(
        "{} status={:?} iterations={} residual={} u={}",
        if verified { "SOLVED" } else { "UNSOLVED" },
        descent.status,
        descent.iterations,
        residual,
        if u.len() <= 8 {
            fmt_vec(&u)
        } else {
            format!("<{} values>", u.len())
        },
    ));
    report.descent = Some(DescentSummary {
        problem: if selected.is_some() {
            "transformed"
        } else {
            "original"
        },
        mu: selected,
        status: descent.status,
        iterations: descent.iterations,
        residual_norm: descent.residual_norm,
        in_ball: descent.in_ball,
    });
    report.solution = Some(SolutionSummary {
        u,
        residual_norm: residual,
        verified,
        tolerance,
        ball: check_ball,
    });
    report.verdict = if verified { "PASS" } else { "FAIL" };
    Ok(())
}
