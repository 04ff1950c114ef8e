//! Explicit conformal metrics with prescribed partial Ricci curvature.
//!
//! Every family produces `varphi = phi F` on an ambient `delta / F^2`, the
//! factor `phi`, and the prescribed tensor `T` as coordinate components for
//! `g~ = delta / varphi^2`. Coordinate indices are 0-based: D1 is `0..p1`.

pub mod catalog;
pub mod pde;
pub mod pointwise;
pub mod singularity;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::conformal::{transformed_curvature, ConformalChange};
use crate::curvature::curvature_pack_with;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::frame::SplitDistribution;
use crate::jet::Jet;
use crate::metric::{field_map, DerivativeMode, MetricField};

pub use catalog::{family_by_tag, list_families, FamilyEntry};
pub use pde::{pde_problem, pde_residuals, PdeCheck, PdeProblem};
pub use pointwise::{pointwise_metric, PointwiseMetric};
pub use singularity::{classify_singularity, grid_zero_search, ray_radius, GridSearch, SingularityKind, SingularityReport};

/// Which system is solved: `Ric~_i|D_i = T|D_i` (a) or `[Ric~_i - K~ g~/2]|D_i = T|D_i` (b).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    #[default]
    A,
    B,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "a",
            Case::B => "b",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambient {
    #[default]
    Euclidean,
    HyperbolicHalfSpace,
}

impl Ambient {
    pub fn chart(self, p1: usize, p2: usize) -> Result<Chart> {
        match self {
            Ambient::Euclidean => Chart::euclidean(p1, p2),
            Ambient::HyperbolicHalfSpace => Chart::half_space(p1, p2),
        }
    }

    pub fn base_metric(self, p1: usize, p2: usize) -> Result<MetricField> {
        let chart = self.chart(p1, p2)?;
        Ok(match self {
            Ambient::Euclidean => MetricField::euclidean(chart),
            Ambient::HyperbolicHalfSpace => MetricField::hyperbolic(chart),
        })
    }

    /// The scale `F` of the ambient metric `delta / F^2`.
    pub fn scale(self, n: usize) -> Expr {
        match self {
            Ambient::Euclidean => Expr::constant(1.0),
            Ambient::HyperbolicHalfSpace => Expr::coord(n - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Params {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub case: Case,
    #[serde(default)]
    pub ambient: Ambient,
    pub a1: f64,
    pub a2: f64,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Theorem1Params {
    pub fn a(&self, k: usize) -> f64 {
        if k < self.p1 {
            self.a1
        } else {
            self.a2
        }
    }

    /// `lambda = sum b_k^2 - 2 (a1 + a2) c`.
    pub fn lambda(&self) -> f64 {
        self.b.iter().map(|v| v * v).sum::<f64>() - 2.0 * (self.a1 + self.a2) * self.c
    }

    /// `mu = sum_i (a1 x_i^2 + b_i x_i) - sum_alpha (a2 x_alpha^2 + b_alpha x_alpha)`.
    pub fn mu(&self, x: &[f64]) -> f64 {
        (0..self.p1 + self.p2)
            .map(|k| {
                let q = self.a(k) * x[k] * x[k] + self.b[k] * x[k];
                if k < self.p1 {
                    q
                } else {
                    -q
                }
            })
            .sum()
    }

    /// `lambda - 2 (a2 - a1) mu`.
    pub fn q(&self, x: &[f64]) -> f64 {
        self.lambda() - 2.0 * (self.a2 - self.a1) * self.mu(x)
    }

    pub fn varphi_expr(&self) -> Expr {
        let n = self.p1 + self.p2;
        let mut terms = vec![Expr::constant(self.c)];
        for k in 0..n {
            terms.push(Expr::constant(self.a(k)) * Expr::coord(k).pow(2.0));
            terms.push(Expr::constant(self.b[k]) * Expr::coord(k));
        }
        Expr::sum(terms)
    }

    pub fn varphi(&self, x: &[f64]) -> f64 {
        self.c + (0..self.p1 + self.p2).map(|k| self.a(k) * x[k] * x[k] + self.b[k] * x[k]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Params {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub case: Case,
    #[serde(default)]
    pub ambient: Ambient,
    /// D1 coordinate the profile depends on.
    pub k: usize,
    /// `U(x_k)`.
    pub u: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Params {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub case: Case,
    #[serde(default)]
    pub ambient: Ambient,
    pub k: usize,
    pub delta: usize,
    /// `v(x_k)`.
    pub v: Expr,
    /// `w(x_delta)`.
    pub w: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4iParams {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub case: Case,
    #[serde(default)]
    pub ambient: Ambient,
    /// `varphi(x_0, x_1)`, non-vanishing.
    pub varphi: Expr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4iiParams {
    pub p1: usize,
    pub p2: usize,
    #[serde(default)]
    pub case: Case,
    #[serde(default)]
    pub ambient: Ambient,
    pub p: usize,
    pub epsilon: i32,
    pub a: f64,
    pub b: f64,
    /// `U_j(x_j)` for `j < p`.
    pub u: Vec<Expr>,
}

/// Tagged parameters of one explicit family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SolutionFamily {
    #[serde(rename = "theorem1")]
    Theorem1(Theorem1Params),
    #[serde(rename = "theorem2")]
    Theorem2(Theorem2Params),
    #[serde(rename = "theorem3")]
    Theorem3(Theorem3Params),
    #[serde(rename = "theorem4-i")]
    Theorem4i(Theorem4iParams),
    #[serde(rename = "theorem4-ii")]
    Theorem4ii(Theorem4iiParams),
}

impl SolutionFamily {
    pub fn split(&self) -> (usize, usize) {
        match self {
            SolutionFamily::Theorem1(p) => (p.p1, p.p2),
            SolutionFamily::Theorem2(p) => (p.p1, p.p2),
            SolutionFamily::Theorem3(p) => (p.p1, p.p2),
            SolutionFamily::Theorem4i(p) => (p.p1, p.p2),
            SolutionFamily::Theorem4ii(p) => (p.p1, p.p2),
        }
    }

    pub fn case(&self) -> Case {
        match self {
            SolutionFamily::Theorem1(p) => p.case,
            SolutionFamily::Theorem2(p) => p.case,
            SolutionFamily::Theorem3(p) => p.case,
            SolutionFamily::Theorem4i(p) => p.case,
            SolutionFamily::Theorem4ii(p) => p.case,
        }
    }

    pub fn ambient(&self) -> Ambient {
        match self {
            SolutionFamily::Theorem1(p) => p.ambient,
            SolutionFamily::Theorem2(p) => p.ambient,
            SolutionFamily::Theorem3(p) => p.ambient,
            SolutionFamily::Theorem4i(p) => p.ambient,
            SolutionFamily::Theorem4ii(p) => p.ambient,
        }
    }

    /// Catalog tag such as `theorem2/b` or `theorem4-ii`.
    pub fn tag(&self) -> String {
        match self {
            SolutionFamily::Theorem1(p) => format!("theorem1/{}", p.case),
            SolutionFamily::Theorem2(p) => format!("theorem2/{}", p.case),
            SolutionFamily::Theorem3(p) => format!("theorem3/{}", p.case),
            SolutionFamily::Theorem4i(_) => "theorem4-i".into(),
            SolutionFamily::Theorem4ii(_) => "theorem4-ii".into(),
        }
    }

    pub fn build(&self) -> Result<Solution> {
        match self {
            SolutionFamily::Theorem1(p) => build_theorem1(p),
            SolutionFamily::Theorem2(p) => build_theorem2(p),
            SolutionFamily::Theorem3(p) => build_theorem3(p),
            SolutionFamily::Theorem4i(p) => build_theorem4_i(p),
            SolutionFamily::Theorem4ii(p) => build_theorem4_ii(p),
        }
    }
}

type TensorFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync>;

/// A symmetric tensor with vanishing mixed block, as coordinate components.
#[derive(Clone)]
pub struct PrescribedTensor {
    pub p1: usize,
    pub p2: usize,
    pub case: Case,
    eval: TensorFn,
    metric: Option<MetricField>,
}

impl fmt::Debug for PrescribedTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrescribedTensor")
            .field("p1", &self.p1)
            .field("p2", &self.p2)
            .field("case", &self.case)
            .finish_non_exhaustive()
    }
}

impl PrescribedTensor {
    pub fn new(
        p1: usize,
        p2: usize,
        case: Case,
        eval: impl Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    ) -> Self {
        PrescribedTensor {
            p1,
            p2,
            case,
            eval: Arc::new(eval),
            metric: None,
        }
    }

    pub fn constant(p1: usize, p2: usize, case: Case, value: DMatrix<f64>) -> Self {
        PrescribedTensor::new(p1, p2, case, move |_| Ok(value.clone()))
    }

    /// Metric used for traces; coordinate traces when absent.
    pub fn with_metric(mut self, metric: MetricField) -> Self {
        self.metric = Some(metric);
        self
    }

    pub fn at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        (self.eval)(x)
    }

    /// `(Tr_g T|D1, Tr_g T|D2)` at `x`.
    pub fn traces(&self, x: &[f64]) -> Result<(f64, f64)> {
        let t = self.at(x)?;
        let n = self.p1 + self.p2;
        let g = match &self.metric {
            Some(m) => m.matrix(x)?,
            None => DMatrix::identity(n, n),
        };
        let block_trace = |r: std::ops::Range<usize>| -> Result<f64> {
            let m = r.len();
            let gb = g.view((r.start, r.start), (m, m)).clone_owned();
            let tb = t.view((r.start, r.start), (m, m)).clone_owned();
            let inv = gb.try_inverse().ok_or_else(|| Error::Definiteness { point: x.to_vec() })?;
            Ok((inv * tb).trace())
        };
        Ok((block_trace(0..self.p1)?, block_trace(self.p1..n)?))
    }
}

/// One constructed member of a family.
#[derive(Clone, Debug)]
pub struct Solution {
    pub family: SolutionFamily,
    pub base: MetricField,
    /// `phi F`.
    pub varphi: ScalarField,
    pub phi: ScalarField,
    pub tensor: PrescribedTensor,
    pub warnings: Vec<String>,
}

impl Solution {
    pub fn p1(&self) -> usize {
        self.tensor.p1
    }

    pub fn p2(&self) -> usize {
        self.tensor.p2
    }

    pub fn dist(&self) -> SplitDistribution {
        SplitDistribution::coordinate(self.p1(), self.p2())
    }

    pub fn change(&self) -> ConformalChange {
        ConformalChange::new(self.base.clone(), self.phi.clone())
    }

    /// `g~ = delta / varphi^2`.
    pub fn metric(&self) -> MetricField {
        MetricField::conformally_flat(self.base.chart().clone(), self.varphi.clone())
    }
}

fn check_dims(p1: usize, p2: usize, min: usize) -> Result<()> {
    if p1 < min || p2 < min {
        return Err(Error::InvalidParameter(format!(
            "this family needs p1, p2 >= {min}, got ({p1}, {p2})"
        )));
    }
    if p1 + p2 > crate::jet::MAX_DIM {
        return Err(Error::DimensionMismatch {
            expected: crate::jet::MAX_DIM,
            got: p1 + p2,
        });
    }
    Ok(())
}

fn one_variable(e: &Expr, axis: usize, name: &str) -> Result<()> {
    match e.coords_used().iter().find(|&&c| c != axis) {
        Some(c) => Err(Error::InvalidParameter(format!(
            "{name} must depend on x_{axis} only, but uses x_{c}"
        ))),
        None => Ok(()),
    }
}

/// `(f, f', f'')` of a one-variable expression along `axis`.
fn profile(e: &Expr, axis: usize, x: &[f64]) -> Result<(f64, f64, f64)> {
    let j = e.eval_jet(x)?;
    Ok((j.value, j.grad[axis], j.hess[axis][axis]))
}

fn phi_of(varphi: &Expr, ambient: Ambient, n: usize) -> Expr {
    match ambient {
        Ambient::Euclidean => varphi.clone(),
        Ambient::HyperbolicHalfSpace => varphi.clone() * ambient.scale(n).recip(),
    }
}

fn diagonal(n: usize, f: impl Fn(usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |a, b| if a == b { f(a) } else { 0.0 })
}

/// `T_b = T_a - (K~/2) g~` with `K~ = Tr_g~ T_a|D1` and `g~ = delta / varphi^2`.
fn einstein_shift(t: &mut DMatrix<f64>, p1: usize) {
    let n = t.nrows();
    let half_trace = 0.5 * (0..p1).map(|i| t[(i, i)]).sum::<f64>();
    for a in 0..n {
        t[(a, a)] -= half_trace;
    }
}

fn finish(family: SolutionFamily, varphi: Expr, tensor: PrescribedTensor, warnings: Vec<String>) -> Result<Solution> {
    let (p1, p2) = family.split();
    let ambient = family.ambient();
    let base = ambient.base_metric(p1, p2)?;
    let phi = ScalarField::from_expr(phi_of(&varphi, ambient, p1 + p2));
    let varphi = ScalarField::from_expr(varphi);
    let metric = MetricField::conformally_flat(base.chart().clone(), varphi.clone());
    Ok(Solution {
        family,
        base,
        varphi,
        phi,
        tensor: tensor.with_metric(metric),
        warnings,
    })
}

pub fn build_theorem1(params: &Theorem1Params) -> Result<Solution> {
    let (p1, p2) = (params.p1, params.p2);
    check_dims(p1, p2, 2)?;
    let n = p1 + p2;
    if params.b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: params.b.len(),
        });
    }
    if params.a1 == 0.0 && params.a2 == 0.0 && params.b.iter().all(|v| *v == 0.0) && params.c == 0.0 {
        return Err(Error::InvalidParameter("varphi vanishes identically".into()));
    }
    let pr = params.clone();
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let tensor = PrescribedTensor::new(p1, p2, params.case, move |x| {
        let v = pr.varphi(x);
        if v == 0.0 {
            return Err(Error::SingularFactor {
                point: x.to_vec(),
                value: v,
            });
        }
        let q = pr.q(x) / (v * v);
        let (f1, f2) = match pr.case {
            Case::A => (-fp2 * q, -fp1 * q),
            Case::B => (0.5 * fp2 * (fp1 - 2.0) * q, 0.5 * fp1 * (fp2 - 2.0) * q),
        };
        Ok(diagonal(n, |a| if a < p1 { f1 } else { f2 }))
    });
    finish(SolutionFamily::Theorem1(params.clone()), params.varphi_expr(), tensor, Vec::new())
}

pub fn build_theorem2(params: &Theorem2Params) -> Result<Solution> {
    let (p1, p2, k) = (params.p1, params.p2, params.k);
    check_dims(p1, p2, 3)?;
    if k >= p1 {
        return Err(Error::InvalidParameter(format!("k = {k} must index a D1 coordinate (< {p1})")));
    }
    one_variable(&params.u, k, "U")?;
    let n = p1 + p2;
    let u = params.u.clone();
    let case = params.case;
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let tensor = PrescribedTensor::new(p1, p2, case, move |x| {
        let (_, u1, u2) = profile(&u, k, x)?;
        let s = u1 * u1;
        let (fk, fi, fa) = match case {
            Case::A => (fp2 * u2, -fp2 * s, u2 - (fp1 - 1.0) * s),
            Case::B => (
                0.5 * fp2 * (u2 + (fp1 - 1.0) * s),
                -0.5 * fp2 * (u2 - (fp1 - 3.0) * s),
                0.5 * (fp2 - 2.0) * ((fp1 - 1.0) * s - u2),
            ),
        };
        Ok(diagonal(n, |a| match a {
            _ if a == k => fk,
            _ if a < p1 => fi,
            _ => fa,
        }))
    });
    let varphi = params.u.clone().exp();
    let sol = finish(SolutionFamily::Theorem2(params.clone()), varphi, tensor, Vec::new())?;
    degeneracy_warnings(sol)
}

pub fn build_theorem3(params: &Theorem3Params) -> Result<Solution> {
    let (p1, p2, k, d) = (params.p1, params.p2, params.k, params.delta);
    check_dims(p1, p2, 3)?;
    let n = p1 + p2;
    if k >= p1 || d < p1 || d >= n {
        return Err(Error::InvalidParameter(format!(
            "need k < {p1} <= delta < {n}, got k = {k}, delta = {d}"
        )));
    }
    one_variable(&params.v, k, "v")?;
    one_variable(&params.w, d, "w")?;
    let (v, w) = (params.v.clone(), params.w.clone());
    let case = params.case;
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let tensor = PrescribedTensor::new(p1, p2, case, move |x| {
        let (v0, v1, v2) = profile(&v, k, x)?;
        let (w0, w1, w2) = profile(&w, d, x)?;
        let s = v0 + w0;
        if s == 0.0 {
            return Err(Error::SingularFactor {
                point: x.to_vec(),
                value: s,
            });
        }
        let g = v1 * v1 + w1 * w1;
        let fk = ((fp2 * v2 + w2) * s - fp2 * g) / (s * s);
        let fd = ((v2 + fp1 * w2) * s - fp1 * g) / (s * s);
        let fi = fk - fp2 * v2 / s;
        let fa = fd - fp1 * w2 / s;
        let mut t = diagonal(n, |a| match a {
            _ if a == k => fk,
            _ if a == d => fd,
            _ if a < p1 => fi,
            _ => fa,
        });
        if case == Case::B {
            einstein_shift(&mut t, p1);
        }
        Ok(t)
    });
    let varphi = params.v.clone() + params.w.clone();
    let sol = finish(SolutionFamily::Theorem3(params.clone()), varphi, tensor, Vec::new())?;
    degeneracy_warnings(sol)
}

/// Tensor of the theorem4 families read off `varphi`: `f_ij = p2 varphi_ij / varphi` off the
/// diagonal, diagonal entries from the same system, and `f_alpha` on D2.
fn theorem4_tensor(j: &Jet, p1: usize, p2: usize) -> DMatrix<f64> {
    let n = p1 + p2;
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let v = j.value;
    let grad_sq: f64 = (0..n).map(|a| j.grad[a] * j.grad[a]).sum();
    let lap1: f64 = (0..p1).map(|i| j.hess[i][i]).sum();
    let lap2: f64 = (p1..n).map(|a| j.hess[a][a]).sum();
    DMatrix::from_fn(n, n, |a, b| match (a < p1, b < p1) {
        (true, true) if a == b => (fp2 * j.hess[a][a] + lap2 - fp2 * grad_sq / v) / v,
        (true, true) => fp2 * j.hess[a][b] / v,
        (false, false) if a == b => lap1 / v - fp1 * grad_sq / (v * v),
        (false, false) => fp1 * j.hess[a][b] / v,
        _ => 0.0,
    })
}

pub fn build_theorem4_i(params: &Theorem4iParams) -> Result<Solution> {
    let (p1, p2) = (params.p1, params.p2);
    check_dims(p1, p2, 3)?;
    if let Some(c) = params.varphi.coords_used().into_iter().find(|&c| c > 1) {
        return Err(Error::InvalidParameter(format!("varphi must depend on x_0, x_1 only, but uses x_{c}")));
    }
    let e = params.varphi.clone();
    let case = params.case;
    let tensor = PrescribedTensor::new(p1, p2, case, move |x| {
        let j = e.eval_jet(x)?;
        if j.value == 0.0 {
            return Err(Error::SingularFactor {
                point: x.to_vec(),
                value: 0.0,
            });
        }
        let mut t = theorem4_tensor(&j, p1, p2);
        if case == Case::B {
            einstein_shift(&mut t, p1);
        }
        Ok(t)
    });
    finish(SolutionFamily::Theorem4i(params.clone()), params.varphi.clone(), tensor, Vec::new())
}

pub fn build_theorem4_ii(params: &Theorem4iiParams) -> Result<Solution> {
    let (p1, p2, p) = (params.p1, params.p2, params.p);
    check_dims(p1, p2, 3)?;
    if p < 3 || p > p1 {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [3, p1 = {p1}]")));
    }
    if params.u.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: params.u.len(),
        });
    }
    if params.epsilon != 1 && params.epsilon != -1 {
        return Err(Error::InvalidParameter("epsilon must be +1 or -1".into()));
    }
    if params.a == 0.0 && params.b == 0.0 {
        return Err(Error::InvalidParameter("a and b must not both vanish".into()));
    }
    for (j, u) in params.u.iter().enumerate() {
        one_variable(u, j, &format!("U_{j}"))?;
        if u.coords_used().is_empty() {
            return Err(Error::Degeneracy(format!("U_{j} is constant")));
        }
    }
    let s = Expr::sum(params.u.clone());
    let (a, b) = (Expr::constant(params.a), Expr::constant(params.b));
    let varphi = if params.epsilon == 1 {
        a * s.clone().exp() + b * (-s).exp()
    } else {
        a * s.clone().cos() + b * s.sin()
    };
    let e = varphi.clone();
    let case = params.case;
    let tensor = PrescribedTensor::new(p1, p2, case, move |x| {
        let j = e.eval_jet(x)?;
        if j.value == 0.0 {
            return Err(Error::SingularFactor {
                point: x.to_vec(),
                value: 0.0,
            });
        }
        let mut t = theorem4_tensor(&j, p1, p2);
        if case == Case::B {
            einstein_shift(&mut t, p1);
        }
        Ok(t)
    });
    finish(SolutionFamily::Theorem4ii(params.clone()), varphi, tensor, Vec::new())
}

/// Off-diagonal entries `+-p2 U_i' U_j'` of the theorem4-ii tensor.
pub fn theorem4_ii_offdiagonal(params: &Theorem4iiParams, x: &[f64], i: usize, j: usize) -> Result<f64> {
    let (_, ui, _) = profile(&params.u[i], i, x)?;
    let (_, uj, _) = profile(&params.u[j], j, x)?;
    Ok(params.epsilon as f64 * params.p2 as f64 * ui * uj)
}

/// Largest residual of the second-order rows of the Theorem 4 system at `x`:
/// `p2 varphi_ij - f_ij varphi` (D1, `i != j`), `p1 varphi_ab - f_ab varphi` (D2, `a != b`)
/// and `varphi_i alpha`.
pub fn theorem4_system_residual(sol: &Solution, x: &[f64]) -> Result<f64> {
    let (p1, p2) = (sol.p1(), sol.p2());
    let n = p1 + p2;
    let j = sol.varphi.jet(x)?;
    let t = sol.tensor.at(x)?;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let r = match (a < p1, b < p1) {
                (true, true) => p2 as f64 * j.hess[a][b] - t[(a, b)] * j.value,
                (false, false) => p1 as f64 * j.hess[a][b] - t[(a, b)] * j.value,
                _ => j.hess[a][b],
            };
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// `p2 (p1 - 1) v'' - p1 (p2 - 1) w'' - (p1 f_k - p2 f_delta)(v + w)` for Theorem 3, case a.
pub fn theorem3_compatibility_residual(params: &Theorem3Params, x: &[f64]) -> Result<f64> {
    let a = Theorem3Params {
        case: Case::A,
        ..params.clone()
    };
    let sol = build_theorem3(&a)?;
    let t = sol.tensor.at(x)?;
    let (v0, _, v2) = profile(&params.v, params.k, x)?;
    let (w0, _, w2) = profile(&params.w, params.delta, x)?;
    let (p1, p2) = (params.p1 as f64, params.p2 as f64);
    Ok(p2 * (p1 - 1.0) * v2 - p1 * (p2 - 1.0) * w2 - (p1 * t[(params.k, params.k)] - p2 * t[(params.delta, params.delta)]) * (v0 + w0))
}

const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Flags members violating "not all constant and not all equal" with a grid variance test.
fn degeneracy_warnings(mut sol: Solution) -> Result<Solution> {
    let n = sol.p1() + sol.p2();
    let ambient = sol.family.ambient();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for step in 0..9 {
        let t = -1.0 + 0.25 * step as f64;
        let mut x: Vec<f64> = (0..n).map(|a| t + 0.01 * a as f64).collect();
        if ambient == Ambient::HyperbolicHalfSpace {
            x[n - 1] = 1.0 + 0.1 * step as f64;
        }
        if let Ok(d) = sol.tensor.at(&x) {
            samples.push((0..n).map(|a| d[(a, a)]).collect());
        }
    }
    if samples.len() < 2 {
        return Ok(sol);
    }
    let variance = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
    };
    let all_constant = (0..n).all(|a| variance(&samples.iter().map(|s| s[a]).collect::<Vec<_>>()) <= DEGENERACY_THRESHOLD);
    let all_equal = samples.iter().all(|s| variance(s) <= DEGENERACY_THRESHOLD);
    if all_constant {
        sol.warnings.push("prescribed functions are all constant (degenerate member)".into());
    }
    if all_equal {
        sol.warnings.push("prescribed functions are all equal (degenerate member)".into());
    }
    Ok(sol)
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    pub compatible: bool,
    pub max_violation: f64,
    /// Points where the violation exceeds the tolerance.
    pub witnesses: Vec<Vec<f64>>,
}

/// Checks the trace condition of system (a) or (b) at the given points.
pub fn compatibility_check(t: &PrescribedTensor, mode: Case, points: &[Vec<f64>], tol: f64) -> Result<CompatibilityReport> {
    let (p1, p2) = (t.p1 as f64, t.p2 as f64);
    let mut max_violation: f64 = 0.0;
    let mut witnesses = Vec::new();
    for x in points {
        let (t1, t2) = t.traces(x)?;
        let (l, r) = match mode {
            Case::A => (t1, t2),
            Case::B => ((1.0 - p2 / 2.0) * t1, (1.0 - p1 / 2.0) * t2),
        };
        let v = (l - r).abs() / 1f64.max(l.abs()).max(r.abs());
        max_violation = max_violation.max(v);
        if v > tol {
            witnesses.push(x.clone());
        }
    }
    Ok(CompatibilityReport {
        compatible: witnesses.is_empty(),
        max_violation,
        witnesses,
    })
}

/// Residuals of one solution at one point.
#[derive(Clone, Debug, Serialize)]
pub struct PointCheck {
    pub point: Vec<f64>,
    /// Max block residual against direct curvature of `g~`, relative to `max(1, |T|)`.
    pub direct: f64,
    /// The same residual with `Ric~_i` from the transformation law.
    pub law: f64,
    /// `K~` from direct curvature.
    pub k12: f64,
}

fn block_residual(computed: &DMatrix<f64>, t: &DMatrix<f64>, p1: usize, d1: bool) -> f64 {
    let n = t.nrows();
    let r = if d1 { 0..p1 } else { p1..n };
    let scale = 1f64.max(t.amax());
    let mut worst: f64 = 0.0;
    for a in r.clone() {
        for b in r.clone() {
            worst = worst.max((computed[(a, b)] - t[(a, b)]).abs());
        }
    }
    worst / scale
}

pub fn check_point(sol: &Solution, x: &[f64]) -> Result<PointCheck> {
    check_point_with(sol, x, DerivativeMode::Analytic)
}

/// As [`check_point`], with the direct curvature of `g~` taken in `mode`.
pub fn check_point_with(sol: &Solution, x: &[f64], mode: DerivativeMode) -> Result<PointCheck> {
    let p1 = sol.p1();
    let dist = sol.dist();
    let t = sol.tensor.at(x)?;
    let gt = sol.metric().matrix(x)?;
    let case_b = sol.tensor.case == Case::B;

    let pack = curvature_pack_with(&sol.metric(), &dist, x, mode)?;
    let (mut r1, mut r2) = (pack.ric1_coordinates(), pack.ric2_coordinates());
    if case_b {
        r1 -= &gt * (0.5 * pack.k12);
        r2 -= &gt * (0.5 * pack.k12);
    }
    let direct = block_residual(&r1, &t, p1, true).max(block_residual(&r2, &t, p1, false));

    // the transformation law is even in phi, so a negative branch is evaluated as -phi
    let mut change = sol.change();
    if change.phi.value(x)? < 0.0 {
        change.phi = field_map(&change.phi, |e| -e, |v| -v);
    }
    let law = transformed_curvature(&change, &dist, x)?;
    let (mut l1, mut l2) = (law.ric1, law.ric2);
    if case_b {
        l1 -= &gt * (0.5 * law.k12);
        l2 -= &gt * (0.5 * law.k12);
    }
    let law = block_residual(&l1, &t, p1, true).max(block_residual(&l2, &t, p1, false));
    Ok(PointCheck {
        point: x.to_vec(),
        direct,
        law,
        k12: pack.k12,
    })
}

/// Draws points from the verification box whose first-order distance to `{varphi = 0}`
/// is at least `margin`. The box is `[-1.5, 1.5]^n`, with `x_n` in `[0.3, 2]` on the half-space.
pub fn sample_points(sol: &Solution, count: usize, margin: f64, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let n = sol.p1() + sol.p2();
    let hyperbolic = sol.family.ambient() == Ambient::HyperbolicHalfSpace;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 2000 * count.max(1) {
            return Err(Error::Degeneracy(format!(
                "could not find {count} points at distance {margin} from the singular set"
            )));
        }
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        if hyperbolic {
            x[n - 1] = rng.gen_range(0.3..2.0);
        }
        let j = match sol.varphi.jet(&x) {
            Ok(j) => j,
            Err(_) => continue,
        };
        let g = (0..n).map(|a| j.grad[a] * j.grad[a]).sum::<f64>().sqrt();
        if j.value.abs() >= margin * g && j.value.abs() > 1e-6 && sol.tensor.at(&x).is_ok() {
            out.push(x);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationSummary {
    pub tag: String,
    pub points: Vec<PointCheck>,
    pub max_direct: f64,
    pub max_law: f64,
    pub compatibility: CompatibilityReport,
    /// `varphi` stays bounded as the sampling box grows: a sufficient condition for completeness.
    pub complete_sufficient: bool,
    pub warnings: Vec<String>,
}

pub fn verify_solution(sol: &Solution, points: &[Vec<f64>], parallel: bool) -> Result<VerificationSummary> {
    let checks: Vec<PointCheck> = if parallel {
        points.par_iter().map(|x| check_point(sol, x)).collect::<Result<_>>()?
    } else {
        points.iter().map(|x| check_point(sol, x)).collect::<Result<_>>()?
    };
    let max_direct = checks.iter().map(|c| c.direct).fold(0.0, f64::max);
    let max_law = checks.iter().map(|c| c.law).fold(0.0, f64::max);
    let compatibility = compatibility_check(&sol.tensor, sol.tensor.case, points, 1e-8)?;
    Ok(VerificationSummary {
        tag: sol.family.tag(),
        points: checks,
        max_direct,
        max_law,
        compatibility,
        complete_sufficient: completeness_sufficient(sol),
        warnings: sol.warnings.clone(),
    })
}

/// Sup of `|varphi|` on nested grids of radius 2, 4, 8 stays put and `varphi` never vanishes.
pub fn completeness_sufficient(sol: &Solution) -> bool {
    let n = sol.p1() + sol.p2();
    let hyperbolic = sol.family.ambient() == Ambient::HyperbolicHalfSpace;
    let per_axis = 9usize;
    let sup = |radius: f64| -> Option<f64> {
        let mut best: f64 = 0.0;
        let mut sign = 0.0;
        let total = per_axis.pow(n as u32);
        for idx in 0..total {
            let mut r = idx;
            let mut x = vec![0.0; n];
            for (a, xa) in x.iter_mut().enumerate() {
                let t = (r % per_axis) as f64 / (per_axis - 1) as f64;
                r /= per_axis;
                *xa = if hyperbolic && a == n - 1 {
                    radius.recip() + t * (radius - radius.recip())
                } else {
                    -radius + 2.0 * radius * t
                };
            }
            let v = sol.varphi.value(&x).ok()?;
            if v == 0.0 || (sign != 0.0 && v.signum() != sign) {
                return None;
            }
            sign = v.signum();
            best = best.max(v.abs());
        }
        Some(best)
    };
    match (sup(2.0), sup(4.0), sup(8.0)) {
        (Some(a), Some(b), Some(c)) => c <= a * (1.0 + 1e-9) && b <= a * (1.0 + 1e-9),
        _ => false,
    }
}
