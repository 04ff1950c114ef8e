//! Numerical tensor calculus for pairs of complementary orthogonal distributions.
//!
//! The crate evaluates Christoffel symbols, the Riemann tensor, partial Ricci
//! curvatures and the mixed scalar curvature of a split `TM = D1 + D2`,
//! builds explicit conformal metrics with prescribed partial Ricci curvature,
//! and checks variational formulas for the total mixed scalar curvature on tori.

pub mod chart;
pub mod conformal;
pub mod curvature;
pub mod diffops;
pub mod error;
pub mod expr;
pub mod extrinsic;
pub mod field;
pub mod frame;
pub mod jet;
pub mod metric;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod solutions;
pub mod stats;
pub mod variational;

pub use chart::{Chart, ChartDomain};
pub use conformal::ConformalChange;
pub use curvature::{curvature_pack, sectional, CurvaturePack};
pub use diffops::{hessian, partial_laplacians, PartialLaplacians};
pub use error::{Error, Result};
pub use expr::Expr;
pub use extrinsic::{extrinsic_pack, sigma2_sum, ExtrinsicPack};
pub use field::{Guard, ScalarField};
pub use frame::{adapted_frame, Frame, SplitDistribution};
pub use jet::Jet;
pub use metric::{Christoffel, DerivativeMode, MetricField, MetricJet};
pub use solutions::{Case, PrescribedTensor, Solution, SolutionFamily};
pub use variational::{Bump, PhiForm, Quadrature, VariationScenario};
pub use report::{run_scenario, Report, RunOptions};
pub use scenario::Scenario;
