//! Finite-difference oracles that share no derivative code with the analytic path.

use nalgebra::DMatrix;

use crate::curvature::{curvature_pack_with, CurvaturePack};
use crate::diffops::hessian_with;
use crate::error::Result;
use crate::extrinsic::ExtrinsicPack;
use crate::field::{fd_first, ScalarField};
use crate::frame::{adapted_frame_from_jet, SplitDistribution};
use crate::metric::{DerivativeMode, MetricField};

/// Covariant Hessian from FD partials of `f` and FD metric Christoffels.
pub fn fd_covariant_hessian(f: &ScalarField, metric: &MetricField, x: &[f64]) -> Result<DMatrix<f64>> {
    hessian_with(f, metric, x, DerivativeMode::FiniteDifference)
}

/// Curvature pack computed from FD metric derivatives and coordinate Christoffels.
pub fn fd_curvature_pack(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<CurvaturePack> {
    curvature_pack_with(metric, dist, x, DerivativeMode::FiniteDifference)
}

/// Connection coefficients `omega[(a*n+b)*n+c] = g(nabla_{E_a} E_b, E_c)` of the adapted
/// frame, with frame derivatives taken by central differences of the frame field.
pub struct FdConnection {
    pub n: usize,
    pub p1: usize,
    pub omega: Vec<f64>,
}

impl FdConnection {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.omega[(a * self.n + b) * self.n + c]
    }

    /// Co-nullity operators read off the connection coefficients.
    pub fn extrinsic(&self) -> ExtrinsicPack {
        let (n, p1) = (self.n, self.p1);
        let p2 = n - p1;
        let c1 = (0..p2)
            .map(|al| DMatrix::from_fn(p1, p1, |i, j| self.get(i, p1 + al, j)))
            .collect();
        let c2 = (0..p1)
            .map(|i| DMatrix::from_fn(p2, p2, |al, be| self.get(p1 + al, i, p1 + be)))
            .collect();
        ExtrinsicPack::from_operators(c1, c2)
    }

    /// `sum_a sum_{k in D1, alpha in D2} g(nabla_{E_a} e_k, xi_alpha)^2`.
    pub fn bending_d1(&self) -> f64 {
        let (n, p1) = (self.n, self.p1);
        let mut s = 0.0;
        for a in 0..n {
            for k in 0..p1 {
                for al in p1..n {
                    s += self.get(a, k, al).powi(2);
                }
            }
        }
        s
    }

    /// The same sum with the roles of D1 and D2 exchanged.
    pub fn bending_d2(&self) -> f64 {
        let (n, p1) = (self.n, self.p1);
        let mut s = 0.0;
        for a in 0..n {
            for al in p1..n {
                for k in 0..p1 {
                    s += self.get(a, al, k).powi(2);
                }
            }
        }
        s
    }
}

pub fn fd_connection(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<FdConnection> {
    let (jet, chr) = metric.christoffel(x, DerivativeMode::FiniteDifference)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    let n = jet.n;
    let flat_frame = |y: &[f64]| -> Result<Vec<f64>> {
        let j = metric.jet(y, DerivativeMode::FiniteDifference)?;
        Ok(adapted_frame_from_jet(&j, dist)?.vectors.concat())
    };
    // dframe[c][b*n + k] = d_c (E_b)^k
    let dframe = (0..n).map(|c| fd_first(&flat_frame, x, c)).collect::<Result<Vec<_>>>()?;
    let mut omega = vec![0.0; n * n * n];
    for a in 0..n {
        let ea = &frame.vectors[a];
        for b in 0..n {
            let eb = &frame.vectors[b];
            let mut nab = chr.covariant_of_constant(ea, eb);
            for (c, dc) in dframe.iter().enumerate() {
                for k in 0..n {
                    nab[k] += ea[c] * dc[b * n + k];
                }
            }
            for c in 0..n {
                omega[(a * n + b) * n + c] = jet.inner(&nab, &frame.vectors[c]);
            }
        }
    }
    Ok(FdConnection { n, p1: frame.p1, omega })
}
