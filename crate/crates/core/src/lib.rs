//! Existence certificates for zeros of residual maps.
//!
//! Given `F: R^n -> R^m`, the least-squares functional `phi = |F|^2 / 2` is
//! used to certify that `F` has a zero in a closed ball `B_r(x)`: if
//! `|grad phi(v)| >= c |F(v)|` on the ball and `|F(x)| <= r c`, a zero exists.
//! When the raw certificate fails, rewriting the equation through a
//! transformation of the dependent or independent variable can make it pass;
//! [`transforms::search_mu`] sweeps the scaling `v -> mu v`. The zero is then
//! located by [`descent::solve`] and, for transformed problems, mapped back
//! with [`transforms::pull_back_zero`].
//!
//! ```
//! use zerocert_core::{certificate, descent, problems, transforms};
//! use zerocert_core::{Ball, CertifyConfig, GridSpacing, MuGrid};
//!
//! let f = problems::make_quadratic(problems::QuadraticParams { lambda: 1.0 });
//! let ball = Ball::scalar(2.0, 0.5).unwrap();
//! let raw = certificate::certify(&f, &ball, certificate::CertificateMethod::ClosedFormQuadratic,
//!     &Default::default()).unwrap();
//! assert!(!raw.passed);
//!
//! let grid = MuGrid::new(0.5, 3.0, 26, GridSpacing::Linear);
//! let search = transforms::search_mu(&f, &ball, &grid, &CertifyConfig::closed_form()).unwrap();
//! assert_eq!(search.best_parameter, 2.0);
//! ```

pub mod certificate;
pub mod descent;
pub mod error;
pub mod functional;
pub mod problems;
pub mod sampling;
pub mod transforms;

pub use certificate::{Ball, Certificate, CertificateMethod, CertifyConfig, SamplingConfig};
pub use descent::{
    BallPolicy, DescentConfig, DescentDirection, DescentResult, DescentStatus, TraceRecord,
};
pub use error::{Error, Result};
pub use functional::GradientCheckReport;
pub use problems::{QuadraticParams, ResidualMap, ResidualProblem};
pub use transforms::{
    DependentTransform, GridSpacing, IndependentTransform, MuGrid, SweepEntry,
    TransformSearchResult, TransformSpec,
};

pub(crate) fn serialize_dvector<S: serde::Serializer>(
    v: &nalgebra::DVector<f64>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter())
}
