//! Riemann tensor, partial Ricci curvatures and the mixed scalar curvature.
//!
//! Convention: `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z` and
//! `R(a,b,c,d) = g(R(a,b)c, d)`, so the round sphere has `g(R(X,Y)Y,X) > 0`.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::frame::{adapted_frame_from_jet, Frame, SplitDistribution};
use crate::metric::{Christoffel, DerivativeMode, MetricField, MetricJet};

/// Fully covariant 4-tensor stored as `comps[((a*n+b)*n+c)*n+d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Riemann {
    pub n: usize,
    pub comps: Vec<f64>,
}

impl Riemann {
    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.n;
        self.comps[((a * n + b) * n + c) * n + d]
    }

    /// `R(X,Y,Z,W)` for vectors given in the basis of this tensor.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if y[b] == 0.0 {
                    continue;
                }
                let xy = x[a] * y[b];
                for c in 0..n {
                    if z[c] == 0.0 {
                        continue;
                    }
                    let base = ((a * n + b) * n + c) * n;
                    let mut t = 0.0;
                    for d in 0..n {
                        t += self.comps[base + d] * w[d];
                    }
                    s += xy * z[c] * t;
                }
            }
        }
        s
    }

    /// Components in a new basis whose vectors have the given coordinates.
    pub fn in_basis(&self, basis: &[Vec<f64>]) -> Riemann {
        let n = self.n;
        let mut cur = self.comps.clone();
        // contract one slot per pass; after four passes every slot is in the new basis
        for _ in 0..4 {
            let mut next = vec![0.0; n * n * n * n];
            for rest in 0..n * n * n {
                for (k, e) in basis.iter().enumerate() {
                    let mut s = 0.0;
                    for (a, ea) in e.iter().enumerate() {
                        if *ea != 0.0 {
                            s += ea * cur[a * n * n * n + rest];
                        }
                    }
                    // rotate: the contracted slot moves to the back
                    next[rest * n + k] = s;
                }
            }
            cur = next;
        }
        Riemann { n, comps: cur }
    }
}

/// Lowered coordinate components `R_abcd = g(R(d_a, d_b) d_c, d_d)`.
pub fn riemann_coordinates(jet: &MetricJet, chr: &Christoffel) -> Riemann {
    let n = jet.n;
    let mut up = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            for c in 0..n {
                for d in 0..n {
                    let mut s = chr.deriv(a, d, b, c) - chr.deriv(b, d, a, c);
                    for e in 0..n {
                        s += chr.get(d, a, e) * chr.get(e, b, c) - chr.get(d, b, e) * chr.get(e, a, c);
                    }
                    up[((a * n + b) * n + c) * n + d] = s;
                }
            }
        }
    }
    let mut comps = vec![0.0; n * n * n * n];
    for abc in 0..n * n * n {
        for d in 0..n {
            let mut s = 0.0;
            for e in 0..n {
                s += up[abc * n + e] * jet.g(e, d);
            }
            comps[abc * n + d] = s;
        }
    }
    Riemann { n, comps }
}

/// Curvature data at one point, in an adapted orthonormal frame.
#[derive(Clone, Debug)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub p1: usize,
    pub jet: MetricJet,
    pub christoffel: Christoffel,
    pub frame: Frame,
    /// Coordinate components.
    pub riemann_coord: Riemann,
    /// Frame components.
    pub riemann: Riemann,
    /// `Ric1(E_a, E_b) = sum_alpha R(xi_alpha, E_a, E_b, xi_alpha)` over the whole frame.
    pub ric1: DMatrix<f64>,
    /// `Ric2(E_a, E_b) = sum_i R(e_i, E_a, E_b, e_i)`.
    pub ric2: DMatrix<f64>,
    pub k12: f64,
}

impl CurvaturePack {
    pub fn n(&self) -> usize {
        self.jet.n
    }

    pub fn p2(&self) -> usize {
        self.n() - self.p1
    }

    /// Full Ricci form in frame components.
    pub fn ricci(&self) -> DMatrix<f64> {
        &self.ric1 + &self.ric2
    }

    /// Converts frame components of a bilinear form to coordinate components.
    pub fn to_coordinates(&self, frame_form: &DMatrix<f64>) -> DMatrix<f64> {
        // coframe row A is g(E_A, .)
        let n = self.n();
        let coframe = DMatrix::from_fn(n, n, |a, c| (0..n).map(|b| self.frame.vectors[a][b] * self.jet.g(b, c)).sum());
        coframe.transpose() * frame_form * coframe
    }

    pub fn ric1_coordinates(&self) -> DMatrix<f64> {
        self.to_coordinates(&self.ric1)
    }

    pub fn ric2_coordinates(&self) -> DMatrix<f64> {
        self.to_coordinates(&self.ric2)
    }

    /// Sectional curvature of the plane spanned by two coordinate vectors.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        sectional_from(&self.jet, &self.riemann_coord, x, y)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "point": self.point,
            "ric1": matrix_rows(&self.ric1),
            "ric2": matrix_rows(&self.ric2),
            "k12": self.k12,
        })
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

/// Contracts coordinate curvature into the frame and forms the partial traces.
pub fn curvature_pack_from_parts(jet: MetricJet, chr: Christoffel, frame: Frame) -> CurvaturePack {
    let n = jet.n;
    let p1 = frame.p1;
    let riemann_coord = riemann_coordinates(&jet, &chr);
    let riemann = riemann_coord.in_basis(&frame.vectors);
    let ric1 = DMatrix::from_fn(n, n, |a, b| (p1..n).map(|al| riemann.get(al, a, b, al)).sum());
    let ric2 = DMatrix::from_fn(n, n, |a, b| (0..p1).map(|i| riemann.get(i, a, b, i)).sum());
    let mut k12 = 0.0;
    for i in 0..p1 {
        for al in p1..n {
            k12 += riemann.get(i, al, al, i);
        }
    }
    CurvaturePack {
        point: jet.point.clone(),
        p1,
        jet,
        christoffel: chr,
        frame,
        riemann_coord,
        riemann,
        ric1,
        ric2,
        k12,
    }
}

pub fn curvature_pack(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<CurvaturePack> {
    curvature_pack_with(metric, dist, x, DerivativeMode::Analytic)
}

pub fn curvature_pack_with(
    metric: &MetricField,
    dist: &SplitDistribution,
    x: &[f64],
    mode: DerivativeMode,
) -> Result<CurvaturePack> {
    let (jet, chr) = metric.christoffel(x, mode)?;
    let frame = adapted_frame_from_jet(&jet, dist)?;
    Ok(curvature_pack_from_parts(jet, chr, frame))
}

fn sectional_from(jet: &MetricJet, r: &Riemann, x: &[f64], y: &[f64]) -> Result<f64> {
    let xx = jet.inner(x, x);
    let yy = jet.inner(y, y);
    let xy = jet.inner(x, y);
    let area = xx * yy - xy * xy;
    if !(area > 1e-14 * xx * yy) {
        return Err(Error::Degeneracy("sectional curvature needs linearly independent vectors".into()));
    }
    Ok(r.eval(x, y, y, x) / area)
}

/// `g(R(X,Y)Y,X) / (|X|^2 |Y|^2 - g(X,Y)^2)` for coordinate vectors `X`, `Y`.
pub fn sectional(metric: &MetricField, x: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let (jet, chr) = metric.christoffel(x, DerivativeMode::Analytic)?;
    let r = riemann_coordinates(&jet, &chr);
    sectional_from(&jet, &r, v, w)
}
