//! Co-nullity operators and the extrinsic invariants of a split.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::curvature::matrix_rows;
use crate::error::Result;
use crate::frame::{adapted_frame_from_jet, Frame, SplitDistribution};
use crate::metric::{Christoffel, DerivativeMode, MetricField, MetricJet};

/// First elementary symmetric function (the trace).
pub fn sigma1(c: &DMatrix<f64>) -> f64 {
    c.trace()
}

/// Second elementary symmetric function, as the sum of principal 2x2 minors.
pub fn sigma2(c: &DMatrix<f64>) -> f64 {
    let p = c.nrows();
    let mut s = 0.0;
    for i in 0..p {
        for j in (i + 1)..p {
            s += c[(i, i)] * c[(j, j)] - c[(i, j)] * c[(j, i)];
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct ExtrinsicPack {
    pub p1: usize,
    pub p2: usize,
    /// `c1[alpha][(i, j)] = g(nabla_{e_i} xi_alpha, e_j)`.
    pub c1: Vec<DMatrix<f64>>,
    /// `c2[i][(alpha, beta)] = g(nabla_{xi_alpha} e_i, xi_beta)`.
    pub c2: Vec<DMatrix<f64>>,
    /// Mean curvature of D1 in the D2 frame, `h1[alpha] = -tr(C1^alpha)/p1`.
    pub h1: Vec<f64>,
    /// Mean curvature of D2 in the D1 frame.
    pub h2: Vec<f64>,
    pub b1_sq: f64,
    pub b2_sq: f64,
    pub t1_sq: f64,
    pub t2_sq: f64,
}

impl ExtrinsicPack {
    /// Builds the pack from co-nullity operators.
    pub fn from_operators(c1: Vec<DMatrix<f64>>, c2: Vec<DMatrix<f64>>) -> Self {
        let p1 = c2.len();
        let p2 = c1.len();
        let h1 = c1.iter().map(|c| -c.trace() / p1 as f64).collect();
        let h2 = c2.iter().map(|c| -c.trace() / p2 as f64).collect();
        let split = |ops: &[DMatrix<f64>]| {
            let mut sym = 0.0;
            let mut anti = 0.0;
            for c in ops {
                let ct = c.transpose();
                sym += ((c + &ct) * 0.5).norm_squared();
                anti += ((c - &ct) * 0.5).norm_squared();
            }
            (sym, anti)
        };
        let (b1_sq, t1_sq) = split(&c1);
        let (b2_sq, t2_sq) = split(&c2);
        ExtrinsicPack {
            p1,
            p2,
            c1,
            c2,
            h1,
            h2,
            b1_sq,
            b2_sq,
            t1_sq,
            t2_sq,
        }
    }

    pub fn h1_sq(&self) -> f64 {
        self.h1.iter().map(|v| v * v).sum()
    }

    pub fn h2_sq(&self) -> f64 {
        self.h2.iter().map(|v| v * v).sum()
    }

    /// `sum_i sigma2(C2^i) + sum_alpha sigma2(C1^alpha)`.
    pub fn sigma2_sum(&self) -> f64 {
        self.c2.iter().chain(&self.c1).map(sigma2).sum()
    }

    /// `(p1^2|H1|^2 + |T1|^2 - |B1|^2 + p2^2|H2|^2 + |T2|^2 - |B2|^2) / 2`.
    pub fn sigma2_from_norms(&self) -> f64 {
        let (p1, p2) = (self.p1 as f64, self.p2 as f64);
        0.5 * (p1 * p1 * self.h1_sq() + self.t1_sq - self.b1_sq + p2 * p2 * self.h2_sq() + self.t2_sq - self.b2_sq)
    }

    /// `|nabla D1|^2 = sum (C1)^2 + sum (C2)^2`; the same number for D2.
    pub fn bending_density(&self) -> f64 {
        self.c1.iter().chain(&self.c2).map(|c| c.norm_squared()).sum()
    }

    /// `K12 + |B1|^2 - p1^2|H1|^2 - |T1|^2 + |B2|^2 - p2^2|H2|^2 - |T2|^2`, given `K12`.
    pub fn energy_integrand(&self, k12: f64) -> f64 {
        let (p1, p2) = (self.p1 as f64, self.p2 as f64);
        k12 + self.b1_sq - p1 * p1 * self.h1_sq() - self.t1_sq + self.b2_sq - p2 * p2 * self.h2_sq() - self.t2_sq
    }

    pub fn to_json(&self) -> Value {
        json!({
            "c1": self.c1.iter().map(matrix_rows).collect::<Vec<_>>(),
            "c2": self.c2.iter().map(matrix_rows).collect::<Vec<_>>(),
            "h1": self.h1,
            "h2": self.h2,
            "b1_sq": self.b1_sq,
            "b2_sq": self.b2_sq,
            "t1_sq": self.t1_sq,
            "t2_sq": self.t2_sq,
            "sigma2_sum": self.sigma2_sum(),
        })
    }
}

/// Co-nullity operators from Christoffels only.
///
/// D1 is spanned by chart-constant fields `v_k` and `e_i = sum_k L_ik v_k`, so
/// `g(nabla_X e_i, xi) = sum_k L_ik g(nabla_X v_k, xi)` for every `xi` in D2.
pub fn extrinsic_from_parts(jet: &MetricJet, chr: &Christoffel, frame: &Frame, dist: &SplitDistribution) -> ExtrinsicPack {
    let p1 = frame.p1;
    let p2 = frame.p2();
    let spanning = dist.d1_spanning_fields();
    let l = &frame.d1_coeffs;
    // w[a][k][beta] = g(nabla_{E_a} v_k, xi_beta)
    let w: Vec<Vec<Vec<f64>>> = frame
        .vectors
        .iter()
        .map(|ea| {
            spanning
                .iter()
                .map(|vk| {
                    let nv = chr.covariant_of_constant(ea, vk);
                    frame.d2().iter().map(|xb| jet.inner(&nv, xb)).collect()
                })
                .collect()
        })
        .collect();
    let c1 = (0..p2)
        .map(|al| {
            DMatrix::from_fn(p1, p1, |i, j| -(0..p1).map(|k| l[j][k] * w[i][k][al]).sum::<f64>())
        })
        .collect();
    let c2 = (0..p1)
        .map(|i| {
            DMatrix::from_fn(p2, p2, |al, be| (0..p1).map(|k| l[i][k] * w[p1 + al][k][be]).sum::<f64>())
        })
        .collect();
    ExtrinsicPack::from_operators(c1, c2)
}

pub fn extrinsic_pack(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<ExtrinsicPack> {
    let (jet, chr) = metric.christoffel(x, DerivativeMode::Analytic)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    Ok(extrinsic_from_parts(&jet, &chr, &frame, dist))
}

pub fn sigma2_sum(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<f64> {
    Ok(extrinsic_pack(metric, dist, x)?.sigma2_sum())
}
