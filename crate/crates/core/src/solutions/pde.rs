//! Mixed scalar curvature PDE cases built from the explicit families on flat space.

use serde::Serialize;

use super::{profile, Ambient, Case, SolutionFamily};
use crate::chart::Chart;
use crate::conformal::{direct_pde_residual, flat_pde_residual, split_ratio, transformed_k12, yamabe_residual, ConformalChange};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::frame::SplitDistribution;
use crate::metric::MetricField;

/// One PDE case: `u`, the stated `K~`, and the conformal factor `phi` it comes from.
#[derive(Clone, Debug)]
pub struct PdeProblem {
    pub label: &'static str,
    pub dist: SplitDistribution,
    pub change: ConformalChange,
    pub u: ScalarField,
    pub ktilde: ScalarField,
}

#[derive(Clone, Debug, Serialize)]
pub struct PdeCheck {
    pub case: &'static str,
    pub point: Vec<f64>,
    /// Residual of the flat equation in `u` with the stated `K~`.
    pub flat: f64,
    /// Residual of the gamma-form equation with `K~` from the transformation law.
    pub gamma_form: f64,
    /// `K~` stated minus `K~` from the transformation law applied to `phi`.
    pub direct: f64,
}

fn closure_field(f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static) -> ScalarField {
    ScalarField::from_fn(move |x| f(x).unwrap_or(f64::NAN))
}

/// Maps a flat, case (a) family member onto its PDE case (i)-(iv).
pub fn pde_problem(family: &SolutionFamily) -> Result<PdeProblem> {
    if family.ambient() != Ambient::Euclidean || family.case() != Case::A {
        return Err(Error::InvalidParameter("the PDE cases use case (a) on Euclidean space".into()));
    }
    let (p1, p2) = family.split();
    let dist = SplitDistribution::coordinate(p1, p2);
    let e = 1.0 - split_ratio(&dist);
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let (label, varphi, ktilde): (&'static str, Expr, ScalarField) = match family {
        SolutionFamily::Theorem1(p) => {
            let pr = p.clone();
            let k = closure_field(move |x| {
                Ok(-fp1 * fp2 * (pr.lambda() + 2.0 * (pr.a2 - pr.a1) * pr.mu(x)))
            });
            ("i", p.varphi_expr(), k)
        }
        SolutionFamily::Theorem2(p) => {
            let (u, k) = (p.u.clone(), p.k);
            let kt = closure_field(move |x| {
                let (u0, u1, u2) = profile(&u, k, x)?;
                Ok(fp2 * (2.0 * u0).exp() * (u2 - (fp1 - 1.0) * u1 * u1))
            });
            ("ii", p.u.clone().exp(), kt)
        }
        SolutionFamily::Theorem3(p) => {
            let (v, w, k, d) = (p.v.clone(), p.w.clone(), p.k, p.delta);
            let kt = closure_field(move |x| {
                let (v0, v1, v2) = profile(&v, k, x)?;
                let (w0, w1, w2) = profile(&w, d, x)?;
                Ok((v0 + w0) * (fp2 * v2 + fp1 * w2) - fp1 * fp2 * (v1 * v1 + w1 * w1))
            });
            ("iii", p.v.clone() + p.w.clone(), kt)
        }
        SolutionFamily::Theorem4ii(p) if p.epsilon == 1 => {
            let pr = p.clone();
            let kt = closure_field(move |x| {
                let mut s = 0.0;
                let mut sq = 0.0;
                let mut second = 0.0;
                for (j, u) in pr.u.iter().enumerate() {
                    let (u0, u1, u2) = profile(u, j, x)?;
                    s += u0;
                    sq += u1 * u1;
                    second += u2;
                }
                let f = s.exp();
                let minus = pr.a * f - pr.b / f;
                let plus = pr.a * f + pr.b / f;
                Ok(fp2 * minus * (sq + second + fp1 * minus / plus * sq))
            });
            let s = Expr::sum(p.u.clone());
            let varphi = Expr::constant(p.a) * s.clone().exp() + Expr::constant(p.b) * (-s).exp();
            ("iv", varphi, kt)
        }
        other => {
            return Err(Error::NotImplemented(format!("no PDE case for {}", other.tag())));
        }
    };
    let chart = Chart::euclidean(p1, p2)?;
    let change = ConformalChange::new(MetricField::euclidean(chart), ScalarField::from_expr(varphi.clone()));
    Ok(PdeProblem {
        label,
        dist,
        change,
        u: ScalarField::from_expr(varphi.pow(e)),
        ktilde,
    })
}

/// All three residuals of a PDE case at `x`.
pub fn pde_residuals(problem: &PdeProblem, x: &[f64]) -> Result<PdeCheck> {
    let flat = flat_pde_residual(&problem.dist, &problem.u, &problem.ktilde, x)?;
    let change = problem.change.clone();
    let dist = problem.dist.clone();
    let kbar = closure_field(move |y| transformed_k12(&change, &dist, y));
    let gamma_form = yamabe_residual(&problem.change.base, &problem.dist, &problem.u, &kbar, x)?;
    let direct = direct_pde_residual(&problem.change, &problem.dist, &problem.ktilde, x)?;
    Ok(PdeCheck {
        case: problem.label,
        point: x.to_vec(),
        flat,
        gamma_form,
        direct,
    })
}
