//! Covariant Hessian, gradients and partial Laplacians.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Result;
use crate::field::ScalarField;
use crate::frame::{adapted_frame_from_jet, Frame, SplitDistribution};
use crate::jet::Jet;
use crate::metric::{Christoffel, DerivativeMode, MetricField, MetricJet};

/// `h_ab = d_a d_b f - Gamma^c_ab d_c f` from a jet of `f` and Christoffels.
pub fn hessian_from_parts(f: &Jet, chr: &Christoffel) -> DMatrix<f64> {
    let n = chr.n;
    DMatrix::from_fn(n, n, |a, b| {
        let mut s = f.hess[a][b];
        for c in 0..n {
            s -= chr.get(c, a, b) * f.grad[c];
        }
        s
    })
}

/// Covariant Hessian of `f` in coordinate components.
pub fn hessian(f: &ScalarField, metric: &MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    hessian_with(f, metric, x, DerivativeMode::Analytic)
}

pub fn hessian_with(f: &ScalarField, metric: &MetricField, x: &[f64], mode: DerivativeMode) -> Result<DMatrix<f64>> {
    let (_, chr) = metric.christoffel(x, mode)?;
    let fj = match mode {
        DerivativeMode::Analytic => f.jet(x)?,
        DerivativeMode::FiniteDifference => f.fd_jet(x)?,
    };
    Ok(hessian_from_parts(&fj, &chr))
}

/// Gradients and partial Laplacians of a function at a point.
#[derive(Clone, Debug, Serialize)]
pub struct PartialLaplacians {
    pub lap1: f64,
    pub lap2: f64,
    pub lap: f64,
    /// Coordinate components of the gradient.
    pub grad: Vec<f64>,
    pub grad_norm_sq: f64,
    /// Coordinate components of the D1 and D2 projections of the gradient.
    pub grad1: Vec<f64>,
    pub grad2: Vec<f64>,
    pub grad1_norm_sq: f64,
    pub grad2_norm_sq: f64,
}

/// Partial Laplacians from precomputed pieces, traced over the given frame.
pub fn partial_laplacians_from_parts(f: &Jet, jet: &MetricJet, chr: &Christoffel, frame: &Frame) -> PartialLaplacians {
    let n = jet.n;
    let h = hessian_from_parts(f, chr);
    let trace = |vs: &[Vec<f64>]| -> f64 {
        vs.iter()
            .map(|e| {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s += e[a] * h[(a, b)] * e[b];
                    }
                }
                s
            })
            .sum()
    };
    let lap1 = trace(frame.d1());
    let lap2 = trace(frame.d2());
    let mut lap = 0.0;
    for a in 0..n {
        for b in 0..n {
            lap += jet.ginv(a, b) * h[(a, b)];
        }
    }
    let grad: Vec<f64> = (0..n)
        .map(|a| (0..n).map(|b| jet.ginv(a, b) * f.grad[b]).sum())
        .collect();
    let grad_norm_sq = (0..n).map(|a| grad[a] * f.grad[a]).sum();
    let project = |vs: &[Vec<f64>]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; n];
        let mut norm = 0.0;
        for e in vs {
            let d: f64 = (0..n).map(|a| e[a] * f.grad[a]).sum();
            norm += d * d;
            for (o, ea) in out.iter_mut().zip(e) {
                *o += d * ea;
            }
        }
        (out, norm)
    };
    let (grad1, grad1_norm_sq) = project(frame.d1());
    let (grad2, grad2_norm_sq) = project(frame.d2());
    PartialLaplacians {
        lap1,
        lap2,
        lap,
        grad,
        grad_norm_sq,
        grad1,
        grad2,
        grad1_norm_sq,
        grad2_norm_sq,
    }
}

pub fn partial_laplacians(
    f: &ScalarField,
    metric: &MetricField,
    dist: &SplitDistribution,
    x: &[f64],
) -> Result<PartialLaplacians> {
    let (jet, chr) = metric.christoffel(x, DerivativeMode::Analytic)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    Ok(partial_laplacians_from_parts(&f.jet(x)?, &jet, &chr, &frame))
}
