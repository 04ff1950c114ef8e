//! Scenario files: one task over a chart, a metric and a split, or over a solution family.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chart::{Chart, ChartDomain};
use crate::conformal::gamma;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::frame::SplitDistribution;
use crate::metric::{DerivativeMode, MetricField};
use crate::solutions::{pde_problem, SolutionFamily};
use crate::variational::{Bump, Quadrature, VariationScenario};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub domain: ChartDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean,
    /// Half-space model on the last coordinate.
    Hyperbolic,
    /// Unit sphere in stereographic coordinates.
    Sphere,
    /// `g = delta / scale^2`.
    Conformal { scale: Expr },
    /// Symmetric matrix of entry expressions.
    General { entries: Vec<Vec<Expr>> },
}

/// Explicit evaluation points, or a seeded uniform sample of a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Explicit(Vec<Vec<f64>>),
    Random {
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<Vec<f64>>,
    },
}

impl Default for PointSpec {
    fn default() -> Self {
        PointSpec::Random {
            samples: 50,
            lo: None,
            hi: None,
        }
    }
}

fn d_fd_tolerance() -> f64 {
    1e-5
}
fn d_samples() -> usize {
    50
}
fn d_pde_samples() -> usize {
    100
}
fn d_margin() -> f64 {
    0.05
}
fn d_cells() -> usize {
    64
}
fn d_half_width() -> f64 {
    6.0
}
fn d_pde_checks() -> Vec<String> {
    PDE_CHECKS.iter().map(|s| s.to_string()).collect()
}
fn d_step() -> f64 {
    1e-2
}
fn d_rotations() -> usize {
    16
}
fn d_one() -> f64 {
    1.0
}
fn d_critical_tol() -> f64 {
    1e-8
}
fn d_identity_tolerance() -> f64 {
    1e-5
}

pub const PDE_CHECKS: [&str; 3] = ["flat", "gamma_form", "direct"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Curvature {
        #[serde(default)]
        points: PointSpec,
        #[serde(default)]
        mode: DerivativeMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_k12: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_sectional: Option<f64>,
    },
    ConformalCheck {
        phi: Expr,
        #[serde(default)]
        points: PointSpec,
        #[serde(default = "d_fd_tolerance")]
        fd_tolerance: f64,
    },
    VerifySolution {
        family: SolutionFamily,
        #[serde(default = "d_samples")]
        samples: usize,
        #[serde(default = "d_margin")]
        margin: f64,
    },
    ClassifySingularity {
        family: SolutionFamily,
        #[serde(default = "d_cells")]
        cells: usize,
        #[serde(default = "d_half_width")]
        half_width: f64,
    },
    PdeResidual {
        family: SolutionFamily,
        #[serde(default = "d_pde_samples")]
        samples: usize,
        #[serde(default = "d_pde_checks")]
        checks: Vec<String>,
    },
    Variation {
        omega: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bump: Option<Bump>,
        #[serde(default = "d_step")]
        step: f64,
        #[serde(default)]
        quadrature: Quadrature,
        #[serde(default = "d_rotations")]
        rotations: usize,
        #[serde(default = "d_one")]
        c_n: f64,
        #[serde(default = "d_critical_tol")]
        critical_tol: f64,
        #[serde(default = "d_identity_tolerance")]
        identity_tolerance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_critical: Option<bool>,
    },
    IdentityCheck {
        #[serde(default)]
        quadrature: Quadrature,
    },
    Bending {
        #[serde(default)]
        quadrature: Quadrature,
        #[serde(default = "d_one")]
        c_n: f64,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Curvature { .. } => "curvature",
            Task::ConformalCheck { .. } => "conformal-check",
            Task::VerifySolution { .. } => "verify-solution",
            Task::ClassifySingularity { .. } => "classify-singularity",
            Task::PdeResidual { .. } => "pde-residual",
            Task::Variation { .. } => "variation",
            Task::IdentityCheck { .. } => "identity-check",
            Task::Bending { .. } => "bending",
        }
    }

    fn family(&self) -> Option<&SolutionFamily> {
        match self {
            Task::VerifySolution { family, .. }
            | Task::ClassifySingularity { family, .. }
            | Task::PdeResidual { family, .. } => Some(family),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    /// Row-major `p2 x p1` graph matrix tilting D1 over D2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub task: Task,
}

/// Chart, metric and split resolved from a scenario.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub chart: Chart,
    pub metric: MetricField,
    pub dist: SplitDistribution,
}

fn at(pointer: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parse { .. } => e,
        other => Error::Parse {
            pointer: pointer.to_string(),
            message: other.to_string(),
        },
    }
}

fn invalid(pointer: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

/// Parses every expression node (any object with an `op` key) in place, so that
/// failures carry the full pointer.
fn check_expressions(v: &Value, pointer: &str) -> Result<()> {
    match v {
        Value::Object(map) if map.contains_key("op") => Expr::from_json(v, pointer).map(|_| ()),
        Value::Object(map) => map
            .iter()
            .try_for_each(|(k, c)| check_expressions(c, &format!("{pointer}/{}", escape(k)))),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, c)| check_expressions(c, &format!("{pointer}/{i}"))),
        _ => Ok(()),
    }
}

fn path_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { .. } => {}
            Segment::Unknown => break,
        }
    }
    out
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Parse { pointer, message } if !prefix.is_empty() => Error::Parse {
            pointer: if pointer == "/" { prefix.to_string() } else { format!("{prefix}{pointer}") },
            message,
        },
        other => other,
    }
}

fn check_coords(e: &Expr, n: usize, pointer: &str) -> Result<()> {
    match e.max_coord() {
        Some(k) if k >= n => Err(invalid(pointer, format!("expression uses x_{k} but the chart has dimension {n}"))),
        _ => Ok(()),
    }
}

impl Scenario {
    /// Parses a scenario file: one scenario object or an array of them.
    pub fn parse_many(text: &str) -> Result<Vec<Scenario>> {
        let v: Value = serde_json::from_str(text).map_err(|e| invalid("/", e.to_string()))?;
        match &v {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(i, item)| Scenario::from_value(item, &format!("/{i}")))
                .collect(),
            _ => Ok(vec![Scenario::from_value(&v, "")?]),
        }
    }

    /// Deserializes and validates one scenario; error pointers are prefixed with `prefix`.
    pub fn from_value(v: &Value, prefix: &str) -> Result<Scenario> {
        check_expressions(v, "").map_err(|e| prefixed(prefix, e))?;
        let sc: Scenario = serde_path_to_error::deserialize(v).map_err(|e| {
            let pointer = path_pointer(e.path());
            prefixed(
                prefix,
                invalid(if pointer.is_empty() { "/" } else { &pointer }, e.into_inner().to_string()),
            )
        })?;
        sc.validate().map_err(|e| prefixed(prefix, e))?;
        Ok(sc)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    /// Checks the scenario against everything the task needs; errors carry a pointer.
    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid("/version", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(invalid("/tolerance", "tolerance must be positive"));
            }
        }
        if let Some(family) = self.task.family() {
            for (field, present) in [
                ("/chart", self.chart.is_some()),
                ("/metric", self.metric.is_some()),
                ("/graph", self.graph.is_some()),
            ] {
                if present {
                    return Err(invalid(field, "solution-family tasks take their geometry from the family"));
                }
            }
            family.build().map_err(at("/task/family"))?;
            return self.validate_family_task();
        }
        let geo = self.geometry()?;
        let n = geo.chart.dim;
        match &self.task {
            Task::Curvature { points, .. } => check_points(points, n, "/task/points"),
            Task::ConformalCheck { phi, points, fd_tolerance } => {
                check_coords(phi, n, "/task/phi")?;
                if !(*fd_tolerance > 0.0) {
                    return Err(invalid("/task/fd_tolerance", "tolerance must be positive"));
                }
                check_points(points, n, "/task/points")
            }
            Task::Variation { omega, rotations, .. } => {
                if geo.chart.periods().is_none() {
                    return Err(invalid("/chart/domain", "variations need a torus chart"));
                }
                if omega.len() != geo.dist.p1 {
                    return Err(invalid("/task/omega", format!("expected {} weights, got {}", geo.dist.p1, omega.len())));
                }
                if let Some(i) = omega.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err(invalid(&format!("/task/omega/{i}"), "weights must be finite and nonnegative"));
                }
                if *rotations == 0 {
                    return Err(invalid("/task/rotations", "need at least one rotation"));
                }
                self.variation_scenario(&geo, true).map(|_| ())
            }
            Task::IdentityCheck { quadrature } => {
                if geo.chart.periods().is_none() {
                    return Err(invalid("/chart/domain", "integrals need a torus chart"));
                }
                quadrature.counts(n).map(|_| ()).map_err(at("/task/quadrature"))
            }
            Task::Bending { quadrature, c_n } => {
                if geo.chart.periods().is_none() {
                    return Err(invalid("/chart/domain", "integrals need a torus chart"));
                }
                if geo.dist.p1 < 2 || geo.dist.p2 < 2 {
                    return Err(invalid("/chart", "the bending bound needs p1 >= 2 and p2 >= 2"));
                }
                if !(*c_n > 0.0) {
                    return Err(invalid("/task/c_n", "c_n must be positive"));
                }
                quadrature.counts(n).map(|_| ()).map_err(at("/task/quadrature"))
            }
            _ => unreachable!("family tasks handled above"),
        }
    }

    fn validate_family_task(&self) -> Result<()> {
        match &self.task {
            Task::VerifySolution { samples, margin, .. } => {
                if *samples == 0 {
                    return Err(invalid("/task/samples", "need at least one sample"));
                }
                if !(*margin >= 0.0) {
                    return Err(invalid("/task/margin", "margin must be nonnegative"));
                }
            }
            Task::ClassifySingularity { family, cells, half_width } => {
                if !matches!(family, SolutionFamily::Theorem1(_)) {
                    return Err(invalid("/task/family/family", "only theorem1 members have a quadric singular set"));
                }
                let n = family.split().0 + family.split().1;
                if *cells < 2 || (*cells as f64).powi(n as i32) > 1e8 {
                    return Err(invalid("/task/cells", format!("{cells}^{n} cells is outside [2^n, 1e8]")));
                }
                if !(*half_width > 0.0) {
                    return Err(invalid("/task/half_width", "half width must be positive"));
                }
            }
            Task::PdeResidual { family, samples, checks } => {
                let problem = pde_problem(family).map_err(at("/task/family"))?;
                gamma(&problem.dist).map_err(at("/task/family"))?;
                if *samples == 0 {
                    return Err(invalid("/task/samples", "need at least one sample"));
                }
                for (i, c) in checks.iter().enumerate() {
                    if !PDE_CHECKS.contains(&c.as_str()) {
                        return Err(invalid(&format!("/task/checks/{i}"), format!("unknown residual {c:?}, expected one of {PDE_CHECKS:?}")));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Chart, metric (Euclidean when absent) and split of a geometry task.
    pub fn geometry(&self) -> Result<Geometry> {
        let spec = self
            .chart
            .as_ref()
            .ok_or_else(|| invalid("/chart", format!("task {} needs a chart", self.task.name())))?;
        let chart = Chart::new(spec.p1, spec.p2, spec.domain.clone()).map_err(at("/chart"))?;
        let n = chart.dim;
        let dist = match &self.graph {
            Some(g) => SplitDistribution::tilted(spec.p1, spec.p2, g.clone()).map_err(at("/graph"))?,
            None => SplitDistribution::coordinate(spec.p1, spec.p2),
        };
        let metric = match self.metric.as_ref().unwrap_or(&MetricSpec::Euclidean) {
            MetricSpec::Euclidean => MetricField::euclidean(chart.clone()),
            MetricSpec::Hyperbolic => {
                if chart.domain != (ChartDomain::HalfSpace { axis: n - 1 }) {
                    return Err(invalid("/chart/domain", format!("the hyperbolic metric needs the half-space x_{} > 0", n - 1)));
                }
                MetricField::hyperbolic(chart.clone())
            }
            MetricSpec::Sphere => MetricField::sphere(chart.clone()),
            MetricSpec::Conformal { scale } => {
                check_coords(scale, n, "/metric/scale")?;
                MetricField::conformally_flat(chart.clone(), ScalarField::from_expr(scale.clone()))
            }
            MetricSpec::General { entries } => {
                if entries.len() != n {
                    return Err(invalid("/metric/entries", format!("expected {n} rows, got {}", entries.len())));
                }
                let mut fields = Vec::with_capacity(n * n);
                for (i, row) in entries.iter().enumerate() {
                    if row.len() != n {
                        return Err(invalid(&format!("/metric/entries/{i}"), format!("expected {n} entries, got {}", row.len())));
                    }
                    for (j, e) in row.iter().enumerate() {
                        let p = format!("/metric/entries/{i}/{j}");
                        check_coords(e, n, &p)?;
                        if *e != entries[j][i] {
                            return Err(invalid(&p, format!("entry ({i}, {j}) differs from entry ({j}, {i})")));
                        }
                        fields.push(ScalarField::from_expr(e.clone()));
                    }
                }
                MetricField::general(chart.clone(), fields).map_err(at("/metric"))?
            }
        };
        Ok(Geometry { chart, metric, dist })
    }

    /// The rotation family of a variation task.
    pub fn variation_scenario(&self, geo: &Geometry, parallel: bool) -> Result<VariationScenario> {
        let Task::Variation {
            omega,
            bump,
            step,
            quadrature,
            ..
        } = &self.task
        else {
            return Err(invalid("/task/kind", "not a variation task"));
        };
        let periods = geo
            .chart
            .periods()
            .ok_or_else(|| invalid("/chart/domain", "variations need a torus chart"))?
            .to_vec();
        let bump = match bump {
            Some(b) => b.clone(),
            None => Bump::centered(periods.iter().map(|l| l / 2.0).collect(), &periods),
        };
        let mut q = quadrature.clone();
        q.parallel = quadrature.parallel && parallel;
        let mut sc = VariationScenario::new(geo.metric.clone(), geo.dist.clone(), omega.clone(), bump);
        sc.step = *step;
        sc.quadrature = q;
        sc.quadrature.counts(periods.len()).map_err(at("/task/quadrature"))?;
        sc.validate().map_err(|e| match e {
            Error::StepSize(_) => at("/task/step")(e),
            other => at("/task/bump")(other),
        })?;
        Ok(sc)
    }
}

fn check_points(points: &PointSpec, n: usize, pointer: &str) -> Result<()> {
    match points {
        PointSpec::Explicit(list) => {
            if list.is_empty() {
                return Err(invalid(pointer, "need at least one point"));
            }
            for (i, x) in list.iter().enumerate() {
                if x.len() != n {
                    return Err(invalid(&format!("{pointer}/{i}"), format!("expected {n} coordinates, got {}", x.len())));
                }
            }
        }
        PointSpec::Random { samples, lo, hi } => {
            if *samples == 0 {
                return Err(invalid(&format!("{pointer}/samples"), "need at least one sample"));
            }
            for (name, b) in [("lo", lo), ("hi", hi)] {
                if let Some(b) = b {
                    if b.len() != n {
                        return Err(invalid(&format!("{pointer}/{name}"), format!("expected {n} bounds, got {}", b.len())));
                    }
                }
            }
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if let Some(a) = (0..n).find(|&a| !(lo[a] < hi[a])) {
                    return Err(invalid(&format!("{pointer}/hi/{a}"), "upper bound must exceed lower bound"));
                }
            }
        }
    }
    Ok(())
}
