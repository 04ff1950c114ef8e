//! Conformal changes `g~ = g / phi^2` and Yamabe-type residuals.

use nalgebra::DMatrix;

use crate::curvature::{curvature_pack_from_parts, curvature_pack_with};
use crate::diffops::{hessian_from_parts, partial_laplacians_from_parts};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::frame::{adapted_frame_from_jet, SplitDistribution};
use crate::jet::Jet;
use crate::metric::{field_map, DerivativeMode, MetricField};

#[derive(Clone, Debug)]
pub struct ConformalChange {
    pub base: MetricField,
    pub phi: ScalarField,
}

/// Transformed partial Ricci forms (coordinate components) and mixed scalar curvature.
#[derive(Clone, Debug)]
pub struct TransformedCurvature {
    pub ric1: DMatrix<f64>,
    pub ric2: DMatrix<f64>,
    pub k12: f64,
}

/// `p1 p2 / n`.
pub fn split_ratio(dist: &SplitDistribution) -> f64 {
    (dist.p1 * dist.p2) as f64 / dist.dim() as f64
}

/// `gamma = (p1 p2 / n - 1)^-1`, undefined for `p1 = p2 = 2`.
pub fn gamma(dist: &SplitDistribution) -> Result<f64> {
    if dist.p1 * dist.p2 == dist.dim() {
        return Err(Error::Configuration(format!(
            "gamma = (p1 p2 / n - 1)^-1 is undefined for p1 = {}, p2 = {} (p1 p2 = n); use the phi form instead",
            dist.p1, dist.p2
        )));
    }
    Ok(1.0 / (split_ratio(dist) - 1.0))
}

impl ConformalChange {
    pub fn new(base: MetricField, phi: ScalarField) -> Self {
        ConformalChange { base, phi }
    }

    /// The metric `g / phi^2`.
    pub fn metric(&self) -> MetricField {
        self.base.conformal_change(&self.phi)
    }

    /// `phi` at `x` with its derivatives, rejecting non-positive values.
    pub fn phi_jet(&self, x: &[f64]) -> Result<Jet> {
        let j = self.phi.jet(x)?;
        if !(j.value > 0.0) {
            return Err(Error::SingularFactor {
                point: x.to_vec(),
                value: j.value,
            });
        }
        Ok(j)
    }

    /// `psi = -2 log phi`.
    pub fn psi(&self, x: &[f64]) -> Result<f64> {
        Ok(-2.0 * self.phi_jet(x)?.value.ln())
    }

    /// `u = phi^(1 - p1 p2 / n)`.
    pub fn u_field(&self, dist: &SplitDistribution) -> Result<ScalarField> {
        gamma(dist)?;
        let e = 1.0 - split_ratio(dist);
        Ok(field_map(&self.phi, move |x: Expr| x.pow(e), move |v| v.powf(e)))
    }
}

/// Evaluates the transformation laws for `Ric~1`, `Ric~2` and `K~12` at `x`.
pub fn transformed_curvature(change: &ConformalChange, dist: &SplitDistribution, x: &[f64]) -> Result<TransformedCurvature> {
    let phi = change.phi_jet(x)?;
    let (jet, chr) = change.base.christoffel(x, DerivativeMode::Analytic)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    let pl = partial_laplacians_from_parts(&phi, &jet, &chr, &frame);
    let h = hessian_from_parts(&phi, &chr);
    let g = jet.matrix();
    let base = curvature_pack_from_parts(jet, chr, frame);
    let (p1, p2) = (dist.p1 as f64, dist.p2 as f64);
    let f = phi.value;
    let f2 = f * f;
    let ric1 = base.ric1_coordinates() + (&h * (p2 * f) + &g * (f * pl.lap2 - p2 * pl.grad_norm_sq)) / f2;
    let ric2 = base.ric2_coordinates() + (&h * (p1 * f) + &g * (f * pl.lap1 - p1 * pl.grad_norm_sq)) / f2;
    let k12 = f2 * base.k12 + f * (p1 * pl.lap2 + p2 * pl.lap1) - p1 * p2 * pl.grad_norm_sq;
    Ok(TransformedCurvature { ric1, ric2, k12 })
}

/// The transformation laws next to the direct curvature of `g / phi^2`.
#[derive(Clone, Copy, Debug)]
pub struct LawComparison {
    pub k12_law: f64,
    pub k12_direct: f64,
    /// Largest gap over `K~12` and the `D1` and `D2` blocks of `Ric~1` and `Ric~2`,
    /// relative to `max(1, |direct|)`.
    pub gap: f64,
}

pub fn compare_law(change: &ConformalChange, dist: &SplitDistribution, x: &[f64], mode: DerivativeMode) -> Result<LawComparison> {
    let law = transformed_curvature(change, dist, x)?;
    let direct = curvature_pack_with(&change.metric(), dist, x, mode)?;
    let (r1, r2) = (direct.ric1_coordinates(), direct.ric2_coordinates());
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    let (p1, n) = (dist.p1, dist.dim());
    let mut gap = rel(law.k12, direct.k12);
    for a in 0..n {
        for b in 0..n {
            if a < p1 && b < p1 {
                gap = gap.max(rel(law.ric1[(a, b)], r1[(a, b)]));
            } else if a >= p1 && b >= p1 {
                gap = gap.max(rel(law.ric2[(a, b)], r2[(a, b)]));
            }
        }
    }
    Ok(LawComparison {
        k12_law: law.k12,
        k12_direct: direct.k12,
        gap,
    })
}

pub fn transformed_partial_ricci(
    change: &ConformalChange,
    dist: &SplitDistribution,
    x: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let t = transformed_curvature(change, dist, x)?;
    Ok((t.ric1, t.ric2))
}

pub fn transformed_k12(change: &ConformalChange, dist: &SplitDistribution, x: &[f64]) -> Result<f64> {
    Ok(transformed_curvature(change, dist, x)?.k12)
}

fn positive_u(u: &ScalarField, x: &[f64]) -> Result<Jet> {
    let j = u.jet(x)?;
    if !(j.value > 0.0) {
        return Err(Error::domain(x, format!("u = {} must be positive", j.value)));
    }
    Ok(j)
}

/// `u^e` through logarithms.
fn pow_log(u: f64, e: f64) -> f64 {
    (e * u.ln()).exp()
}

/// `-gamma (p1 D2 u + p2 D1 u) + K u - Kbar u^(2 gamma - 1)`.
pub fn yamabe_residual(
    metric: &MetricField,
    dist: &SplitDistribution,
    u: &ScalarField,
    kbar: &ScalarField,
    x: &[f64],
) -> Result<f64> {
    let gm = gamma(dist)?;
    let uj = positive_u(u, x)?;
    let (jet, chr) = metric.christoffel(x, DerivativeMode::Analytic)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    let pl = partial_laplacians_from_parts(&uj, &jet, &chr, &frame);
    let k = curvature_pack_from_parts(jet, chr, frame).k12;
    let (p1, p2) = (dist.p1 as f64, dist.p2 as f64);
    Ok(-gm * (p1 * pl.lap2 + p2 * pl.lap1) + k * uj.value - kbar.value(x)? * pow_log(uj.value, 2.0 * gm - 1.0))
}

/// `(p1 D2 + p2 D1) u + (1 - k) K~ u^(-(1 + k)/(1 - k))` on flat space, `k = p1 p2 / n`.
pub fn flat_pde_residual(dist: &SplitDistribution, u: &ScalarField, ktilde: &ScalarField, x: &[f64]) -> Result<f64> {
    gamma(dist)?;
    let uj = positive_u(u, x)?;
    let n = dist.dim();
    let mut lap1 = 0.0;
    let mut lap2 = 0.0;
    for a in 0..n {
        if a < dist.p1 {
            lap1 += uj.hess[a][a];
        } else {
            lap2 += uj.hess[a][a];
        }
    }
    if dist.graph.is_some() {
        return Err(Error::InvalidParameter("the flat residual uses the coordinate split".into()));
    }
    let k = split_ratio(dist);
    let (p1, p2) = (dist.p1 as f64, dist.p2 as f64);
    Ok(p1 * lap2 + p2 * lap1 + (1.0 - k) * ktilde.value(x)? * pow_log(uj.value, -(1.0 + k) / (1.0 - k)))
}

/// `K~ - [phi^2 K + phi (p1 D2 phi + p2 D1 phi) - p1 p2 |grad phi|^2]`, the residual in terms of `phi`.
pub fn direct_pde_residual(change: &ConformalChange, dist: &SplitDistribution, ktilde: &ScalarField, x: &[f64]) -> Result<f64> {
    Ok(ktilde.value(x)? - transformed_k12(change, dist, x)?)
}
