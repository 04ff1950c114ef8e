//! Split distributions and adapted orthonormal frames.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{DerivativeMode, MetricField, MetricJet};

/// The pair (D1, D2) on a chart.
///
/// D1 is spanned by the constant fields `v_i = d_i + sum_j a_ji d_(p1+j)`, i.e. the
/// plane `x_(p1+j) = sum_i a_ji x_i`; with no graph matrix it is the first `p1`
/// coordinate directions. D2 is always the metric-orthogonal complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDistribution {
    pub p1: usize,
    pub p2: usize,
    /// Row-major `p2 x p1` graph matrix `a_ji`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<Vec<f64>>,
}

impl SplitDistribution {
    pub fn coordinate(p1: usize, p2: usize) -> Self {
        SplitDistribution { p1, p2, graph: None }
    }

    pub fn tilted(p1: usize, p2: usize, graph: Vec<f64>) -> Result<Self> {
        let d = SplitDistribution {
            p1,
            p2,
            graph: Some(graph),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dim(&self) -> usize {
        self.p1 + self.p2
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 == 0 || self.p2 == 0 {
            return Err(Error::InvalidParameter("distribution blocks must be non-empty".into()));
        }
        if let Some(a) = &self.graph {
            if a.len() != self.p1 * self.p2 {
                return Err(Error::DimensionMismatch {
                    expected: self.p1 * self.p2,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("graph matrix must be finite".into()));
            }
        }
        Ok(())
    }

    /// `a_ji`, zero without a graph matrix.
    pub fn graph_entry(&self, j: usize, i: usize) -> f64 {
        self.graph.as_ref().map_or(0.0, |a| a[j * self.p1 + i])
    }

    /// The constant coordinate fields spanning D1.
    pub fn d1_spanning_fields(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..self.p1)
            .map(|i| {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                for j in 0..self.p2 {
                    v[self.p1 + j] = self.graph_entry(j, i);
                }
                v
            })
            .collect()
    }
}

/// An adapted orthonormal frame: `vectors[..p1]` span D1, `vectors[p1..]` span D2.
#[derive(Clone, Debug)]
pub struct Frame {
    pub p1: usize,
    /// Coordinate components of each frame vector.
    pub vectors: Vec<Vec<f64>>,
    /// `e_i = sum_k coeffs[i][k] v_k` in terms of the constant D1 fields.
    pub d1_coeffs: Vec<Vec<f64>>,
}

impl Frame {
    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn p2(&self) -> usize {
        self.vectors.len() - self.p1
    }

    pub fn d1(&self) -> &[Vec<f64>] {
        &self.vectors[..self.p1]
    }

    pub fn d2(&self) -> &[Vec<f64>] {
        &self.vectors[self.p1..]
    }

    /// Frame vectors as matrix columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |r, c| self.vectors[c][r])
    }

    /// Replaces the D2 block by `xi'_b = sum_a q[(a, b)] xi_a` for an orthogonal `q`.
    pub fn rotate_d2(&self, q: &DMatrix<f64>) -> Frame {
        let mut out = self.clone();
        let p2 = self.p2();
        for b in 0..p2 {
            let mut v = vec![0.0; self.n()];
            for a in 0..p2 {
                for (vc, xc) in v.iter_mut().zip(&self.vectors[self.p1 + a]) {
                    *vc += q[(a, b)] * xc;
                }
            }
            out.vectors[self.p1 + b] = v;
        }
        out
    }

    /// Replaces the D1 block by `e'_b = sum_a q[(a, b)] e_a`.
    pub fn rotate_d1(&self, q: &DMatrix<f64>) -> Frame {
        let mut out = self.clone();
        let p1 = self.p1;
        for b in 0..p1 {
            let mut v = vec![0.0; self.n()];
            let mut c = vec![0.0; p1];
            for a in 0..p1 {
                for (vc, xc) in v.iter_mut().zip(&self.vectors[a]) {
                    *vc += q[(a, b)] * xc;
                }
                for (cc, lc) in c.iter_mut().zip(&self.d1_coeffs[a]) {
                    *cc += q[(a, b)] * lc;
                }
            }
            out.vectors[b] = v;
            out.d1_coeffs[b] = c;
        }
        out
    }

    /// Frame components `(w^a)` of a coordinate vector `v = sum_a w^a E_a`, given the metric.
    pub fn components(&self, jet: &MetricJet, v: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|e| jet.inner(e, v)).collect()
    }
}

/// Adapted orthonormal frame by block Gram-Schmidt in fixed coordinate order.
pub fn adapted_frame(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<Frame> {
    let jet = metric.jet(x, DerivativeMode::Analytic)?;
    adapted_frame_from_jet(&jet, dist)
}

pub fn adapted_frame_from_jet(jet: &MetricJet, dist: &SplitDistribution) -> Result<Frame> {
    let n = jet.n;
    if dist.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: dist.dim(),
        });
    }
    let rank_err = || Error::Rank {
        point: jet.point.clone(),
    };
    let spanning = dist.d1_spanning_fields();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(dist.p1);

    for (k, v) in spanning.iter().enumerate() {
        let mut w = v.clone();
        let mut c = vec![0.0; dist.p1];
        c[k] = 1.0;
        for (e, ce) in vectors.iter().zip(&coeffs) {
            let proj = jet.inner(e, &w);
            for (wi, ei) in w.iter_mut().zip(e) {
                *wi -= proj * ei;
            }
            for (ci, cei) in c.iter_mut().zip(ce) {
                *ci -= proj * cei;
            }
        }
        let norm_sq = jet.inner(&w, &w);
        if !(norm_sq > 1e-24 * jet.inner(v, v)) {
            return Err(rank_err());
        }
        let norm = norm_sq.sqrt();
        vectors.push(w.iter().map(|wi| wi / norm).collect());
        coeffs.push(c.iter().map(|ci| ci / norm).collect());
    }

    for alpha in dist.p1..n {
        let mut w = vec![0.0; n];
        w[alpha] = 1.0;
        let reference = jet.inner(&w, &w);
        // two passes keep the D2 block orthogonal to D1 at round-off level
        for _ in 0..2 {
            for e in vectors.iter() {
                let proj = jet.inner(e, &w);
                for (wi, ei) in w.iter_mut().zip(e) {
                    *wi -= proj * ei;
                }
            }
        }
        let norm_sq = jet.inner(&w, &w);
        if !(norm_sq > 1e-20 * reference) {
            return Err(rank_err());
        }
        let norm = norm_sq.sqrt();
        vectors.push(w.iter().map(|wi| wi / norm).collect());
    }

    Ok(Frame {
        p1: dist.p1,
        vectors,
        d1_coeffs: coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::Expr;
    use crate::field::ScalarField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euclidean_frame_is_standard_basis() {
        let m = MetricField::euclidean(Chart::euclidean(2, 3).unwrap());
        let f = adapted_frame(&m, &SplitDistribution::coordinate(2, 3), &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        for (a, v) in f.vectors.iter().enumerate() {
            for (b, c) in v.iter().enumerate() {
                assert_eq!(*c, if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn hyperbolic_frame_is_scaled_basis() {
        let m = MetricField::hyperbolic(Chart::half_space(2, 2).unwrap());
        let f = adapted_frame(&m, &SplitDistribution::coordinate(2, 2), &[0.3, -1.0, 0.7, 2.0]).unwrap();
        for (a, v) in f.vectors.iter().enumerate() {
            for (b, c) in v.iter().enumerate() {
                assert!((c - if a == b { 2.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    fn random_spd_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricField {
        // g = B B^T + I with constant entries plus a small smooth perturbation
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let mut s: f64 = (0..n).map(|k| b[r * n + k] * b[c * n + k]).sum();
                if r == c {
                    s += 1.0;
                }
                let bump = Expr::constant(0.05) * (Expr::coord(r) + Expr::coord(c)).sin();
                entries.push(ScalarField::from_expr(Expr::constant(s) + bump));
            }
        }
        MetricField::general(Chart::euclidean(2, n - 2).unwrap(), entries).unwrap()
    }

    #[test]
    fn random_spd_frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let m = random_spd_metric(&mut rng, n);
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d = SplitDistribution::tilted(2, 3, a).unwrap();
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jet = m.jet(&x, DerivativeMode::Analytic).unwrap();
            let f = adapted_frame_from_jet(&jet, &d).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let gij = jet.inner(&f.vectors[i], &f.vectors[j]);
                    assert!((gij - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
            // D1 vectors lie in the tilted plane
            for e in f.d1() {
                for j in 0..3 {
                    let predicted: f64 = (0..2).map(|i| d.graph_entry(j, i) * e[i]).sum();
                    assert!((e[2 + j] - predicted).abs() < 1e-12);
                }
            }
        }
    }
}
