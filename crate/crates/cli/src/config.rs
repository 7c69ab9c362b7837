//! Run configuration: one TOML file per run.
//!
//! ```toml
//! [problem]
//! name = "quadratic"        # or "bvp"
//! lambda = 1.0              # quadratic only
//! # grid_points = 64        # bvp only
//! # gamma = 1.0             # bvp only
//! # forcing = "manufactured" | "zero" | "constant"
//! # forcing_value = 1.0     # with forcing = "constant"
//! # quadrature_weights = false
//!
//! [ball]
//! center = [2.0]
//! radius = 0.5
//!
//! [certificate]             # optional
//! method = "closed_form_quadratic"   # or "sampled"
//! samples_per_axis = 1001
//! residual_floor = 1e-12
//! safety = 0.9
//! max_samples = 1000000
//! seed = 42
//!
//! [transform]               # optional; required by `search`
//! family = "scale"
//! mu_min = 0.5
//! mu_max = 3.0
//! grid_size = 26
//! spacing = "geometric"     # or "linear"
//! mirror_negative = false
//!
//! [descent]                 # optional, every key defaults
//! residual_tolerance = 1e-10
//! max_iterations = 10000
//! initial_step = 1.0
//! backtrack_factor = 0.5
//! sufficient_decrease = 1e-4
//! ball_policy = "clip_to_ball"       # or "reject_outside"
//! direction = "steepest_descent"     # or "gauss_newton"
//!
//! [output]                  # optional
//! report = "report.json"
//! sweep_csv = "sweep.csv"
//! trace_csv = "trace.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use zerocert_core::problems::{
    make_bvp, make_bvp_weighted, make_quadratic, manufactured_forcing, QuadraticParams,
};
use zerocert_core::{
    Ball, BallPolicy, CertificateMethod, CertifyConfig, DescentConfig, DescentDirection,
    GridSpacing, MuGrid, ResidualProblem, SamplingConfig,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Forcing {
    Manufactured,
    Zero,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ProblemConfig {
    Quadratic {
        lambda: f64,
    },
    Bvp {
        grid_points: usize,
        gamma: f64,
        forcing: Forcing,
        quadrature_weights: bool,
    },
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ResidualProblem, CliError> {
        match *self {
            Self::Quadratic { lambda } => Ok(make_quadratic(QuadraticParams { lambda })),
            Self::Bvp {
                grid_points,
                gamma,
                forcing,
                quadrature_weights,
            } => {
                let rule: Box<dyn Fn(f64) -> f64> = match forcing {
                    Forcing::Manufactured => Box::new(manufactured_forcing(gamma)),
                    Forcing::Zero => Box::new(|_| 0.0),
                    Forcing::Constant(c) => Box::new(move |_| c),
                };
                let built = if quadrature_weights {
                    make_bvp_weighted(grid_points, gamma, rule)
                } else {
                    make_bvp(grid_points, gamma, rule)
                };
                built.map_err(|e| CliError::Config(format!("problem: {e}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallConfig {
    pub fn build(&self) -> Result<Ball, CliError> {
        Ball::from_slice(&self.center, self.radius)
            .map_err(|e| CliError::Config(format!("ball: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub sweep_csv: Option<PathBuf>,
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub ball: BallConfig,
    pub certificate: CertifyConfig,
    pub transform: Option<MuGrid>,
    pub descent: DescentConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<RawProblem>,
    ball: Option<RawBall>,
    certificate: Option<RawCertificate>,
    transform: Option<RawTransform>,
    descent: Option<RawDescent>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: Option<String>,
    lambda: Option<f64>,
    grid_points: Option<usize>,
    gamma: Option<f64>,
    forcing: Option<String>,
    forcing_value: Option<f64>,
    quadrature_weights: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBall {
    center: Option<Vec<f64>>,
    radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    method: Option<CertificateMethod>,
    samples_per_axis: Option<usize>,
    residual_floor: Option<f64>,
    safety: Option<f64>,
    max_samples: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransform {
    family: Option<String>,
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    grid_size: Option<usize>,
    spacing: Option<GridSpacing>,
    mirror_negative: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescent {
    residual_tolerance: Option<f64>,
    max_iterations: Option<usize>,
    initial_step: Option<f64>,
    backtrack_factor: Option<f64>,
    sufficient_decrease: Option<f64>,
    ball_policy: Option<BallPolicy>,
    direction: Option<DescentDirection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    report: Option<PathBuf>,
    sweep_csv: Option<PathBuf>,
    trace_csv: Option<PathBuf>,
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key `{key}`"))
}

fn invalid(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("invalid value for `{key}`: {why}"))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Config(format!("malformed config: {}", e.message()))
        })?;
        let raw: RawConfig = serde_path_to_error::deserialize(table).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("`{path}`: {}", e.into_inner().message()))
        })?;
        raw.validate()
    }
}

impl RawConfig {
    fn validate(self) -> Result<RunConfig, CliError> {
        let problem = self.problem.ok_or_else(|| missing("problem"))?;
        let name = problem.name.ok_or_else(|| missing("problem.name"))?;
        let problem = match name.as_str() {
            "quadratic" => {
                let lambda = problem.lambda.ok_or_else(|| missing("problem.lambda"))?;
                if !lambda.is_finite() {
                    return Err(invalid("problem.lambda", "must be finite"));
                }
                ProblemConfig::Quadratic { lambda }
            }
            "bvp" => {
                let grid_points = problem
                    .grid_points
                    .ok_or_else(|| missing("problem.grid_points"))?;
                if grid_points < 2 {
                    return Err(invalid("problem.grid_points", "must be at least 2"));
                }
                let gamma = problem.gamma.unwrap_or(0.0);
                let forcing = match problem.forcing.as_deref().unwrap_or("manufactured") {
                    "manufactured" => Forcing::Manufactured,
                    "zero" => Forcing::Zero,
                    "constant" => Forcing::Constant(
                        problem
                            .forcing_value
                            .ok_or_else(|| missing("problem.forcing_value"))?,
                    ),
                    other => {
                        return Err(invalid(
                            "problem.forcing",
                            format!("unknown forcing `{other}`"),
                        ))
                    }
                };
                ProblemConfig::Bvp {
                    grid_points,
                    gamma,
                    forcing,
                    quadrature_weights: problem.quadrature_weights.unwrap_or(false),
                }
            }
            other => {
                return Err(invalid(
                    "problem.name",
                    format!("unknown problem `{other}`"),
                ))
            }
        };
        let dim = match problem {
            ProblemConfig::Quadratic { .. } => 1,
            ProblemConfig::Bvp { grid_points, .. } => grid_points,
        };

        let ball = self.ball.ok_or_else(|| missing("ball"))?;
        let center = ball.center.ok_or_else(|| missing("ball.center"))?;
        let radius = ball.radius.ok_or_else(|| missing("ball.radius"))?;
        if center.len() != dim {
            return Err(invalid(
                "ball.center",
                format!("expected {dim} coordinates, got {}", center.len()),
            ));
        }
        let ball = BallConfig { center, radius };
        ball.build().map_err(|e| invalid("ball.radius", e))?;

        let defaults = SamplingConfig::default();
        let certificate = match self.certificate {
            None => CertifyConfig {
                method: default_method(&problem),
                sampling: defaults,
            },
            Some(c) => CertifyConfig {
                method: c.method.unwrap_or_else(|| default_method(&problem)),
                sampling: SamplingConfig {
                    samples_per_axis: c.samples_per_axis.unwrap_or(defaults.samples_per_axis),
                    residual_floor: c.residual_floor.unwrap_or(defaults.residual_floor),
                    safety: c.safety.unwrap_or(defaults.safety),
                    max_samples: c.max_samples.unwrap_or(defaults.max_samples),
                    seed: c.seed.unwrap_or(defaults.seed),
                },
            },
        };
        if certificate.method == CertificateMethod::ClosedFormQuadratic
            && !matches!(problem, ProblemConfig::Quadratic { .. })
        {
            return Err(invalid(
                "certificate.method",
                "closed_form_quadratic only applies to the quadratic problem",
            ));
        }
        certificate
            .sampling
            .validate()
            .map_err(|e| invalid("certificate", e))?;

        let transform = match self.transform {
            None => None,
            Some(t) => {
                let family = t.family.unwrap_or_else(|| "scale".into());
                if family != "scale" {
                    return Err(invalid(
                        "transform.family",
                        format!("only `scale` can be searched, got `{family}`"),
                    ));
                }
                let grid = MuGrid {
                    min: t.mu_min.ok_or_else(|| missing("transform.mu_min"))?,
                    max: t.mu_max.ok_or_else(|| missing("transform.mu_max"))?,
                    grid_size: t.grid_size.ok_or_else(|| missing("transform.grid_size"))?,
                    spacing: t.spacing.unwrap_or_default(),
                    mirror_negative: t.mirror_negative.unwrap_or(false),
                };
                grid.points().map_err(|e| invalid("transform", e))?;
                Some(grid)
            }
        };

        let mut descent = DescentConfig::default();
        if let Some(d) = self.descent {
            descent.residual_tolerance = d.residual_tolerance.unwrap_or(descent.residual_tolerance);
            descent.max_iterations = d.max_iterations.unwrap_or(descent.max_iterations);
            descent.initial_step = d.initial_step.unwrap_or(descent.initial_step);
            descent.backtrack_factor = d.backtrack_factor.unwrap_or(descent.backtrack_factor);
            descent.sufficient_decrease =
                d.sufficient_decrease.unwrap_or(descent.sufficient_decrease);
            descent.ball_policy = d.ball_policy.unwrap_or(descent.ball_policy);
            descent.direction = d.direction.unwrap_or(descent.direction);
        }
        descent.validate().map_err(|e| invalid("descent", e))?;

        let output = self
            .output
            .map(|o| OutputConfig {
                report: o.report,
                sweep_csv: o.sweep_csv,
                trace_csv: o.trace_csv,
            })
            .unwrap_or_default();

        Ok(RunConfig {
            problem,
            ball,
            certificate,
            transform,
            descent,
            output,
        })
    }
}

fn default_method(problem: &ProblemConfig) -> CertificateMethod {
    match problem {
        ProblemConfig::Quadratic { .. } => CertificateMethod::ClosedFormQuadratic,
        ProblemConfig::Bvp { .. } => CertificateMethod::Sampled,
    }
}
