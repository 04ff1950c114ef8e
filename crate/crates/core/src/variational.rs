//! Total mixed scalar curvature on flat-torus charts: quadrature, criticality,
//! the second-variation form, rotation families and the bending inequalities.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::curvature::{curvature_pack, matrix_rows, CurvaturePack, Riemann};
use crate::error::{Error, Result};
use crate::extrinsic::{extrinsic_from_parts, sigma2, ExtrinsicPack};
use crate::frame::SplitDistribution;
use crate::metric::MetricField;
use crate::stats::pairwise_sum;

/// Tensor-product trapezoidal rule on the fundamental domain of a torus chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub resolution: usize,
    /// Per-axis node counts overriding `resolution`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_resolution: Option<Vec<usize>>,
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::new(16)
    }
}

impl Quadrature {
    pub fn new(resolution: usize) -> Self {
        Quadrature {
            resolution,
            axis_resolution: None,
            parallel: true,
        }
    }

    pub fn per_axis(counts: Vec<usize>) -> Self {
        Quadrature {
            resolution: counts.iter().copied().min().unwrap_or(0),
            axis_resolution: Some(counts),
            parallel: true,
        }
    }

    pub fn serial(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn counts(&self, n: usize) -> Result<Vec<usize>> {
        let counts = match &self.axis_resolution {
            Some(c) if c.len() != n => return Err(Error::DimensionMismatch { expected: n, got: c.len() }),
            Some(c) => c.clone(),
            None => vec![self.resolution; n],
        };
        if let Some(bad) = counts.iter().find(|c| **c < 8) {
            return Err(Error::InvalidParameter(format!(
                "quadrature resolution {bad} is below 8 points per axis"
            )));
        }
        Ok(counts)
    }
}

fn torus_periods(chart: &Chart) -> Result<Vec<f64>> {
    chart
        .periods()
        .map(|p| p.to_vec())
        .ok_or_else(|| Error::Compactness("integrals need a torus chart".into()))
}

/// Quadrature nodes `x_a = k_a L_a / N`, in lexicographic order.
pub fn torus_points(chart: &Chart, resolution: usize) -> Result<Vec<Vec<f64>>> {
    let periods = torus_periods(chart)?;
    let counts = vec![resolution; periods.len()];
    let total = counts.iter().product();
    Ok((0..total).map(|k| node(&periods, &counts, k)).collect())
}

fn node(periods: &[f64], counts: &[usize], mut k: usize) -> Vec<f64> {
    let n = periods.len();
    let mut x = vec![0.0; n];
    for a in (0..n).rev() {
        x[a] = (k % counts[a]) as f64 * periods[a] / counts[a] as f64;
        k /= counts[a];
    }
    x
}

/// Evaluates `f` at every quadrature node, in node order, and returns the rows
/// with the cell volume.
pub fn evaluate_grid<F>(chart: &Chart, q: &Quadrature, width: usize, f: F) -> Result<(Vec<Vec<f64>>, f64)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let periods = torus_periods(chart)?;
    let counts = q.counts(periods.len())?;
    let total: usize = counts.iter().product();
    let eval = |k: usize| f(&node(&periods, &counts, k));
    let values: Vec<Result<Vec<f64>>> = if q.parallel {
        (0..total).into_par_iter().map(eval).collect()
    } else {
        (0..total).map(eval).collect()
    };
    let mut rows = Vec::with_capacity(total);
    for v in values {
        let v = v?;
        if v.len() != width {
            return Err(Error::DimensionMismatch { expected: width, got: v.len() });
        }
        rows.push(v);
    }
    let cell = periods.iter().zip(&counts).map(|(l, c)| l / *c as f64).product();
    Ok((rows, cell))
}

fn column_integrals(rows: &[Vec<f64>], cell: f64, cols: std::ops::Range<usize>) -> Vec<f64> {
    cols.map(|c| {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        cell * pairwise_sum(&col)
    })
    .collect()
}

fn column_max(rows: &[Vec<f64>], c: usize) -> f64 {
    rows.iter().fold(0.0, |m, r| m.max(r[c]))
}

/// Integrates a vector-valued density (already multiplied by the volume element).
pub fn integrate<F>(chart: &Chart, q: &Quadrature, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let (rows, cell) = evaluate_grid(chart, q, width, f)?;
    Ok(column_integrals(&rows, cell, 0..width))
}

fn packs(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<(CurvaturePack, ExtrinsicPack)> {
    let pack = curvature_pack(metric, dist, x)?;
    let ext = extrinsic_from_parts(&pack.jet, &pack.christoffel, &pack.frame, dist);
    Ok((pack, ext))
}

/// `I_K = int K12 dvol` over the torus.
pub fn total_k12(metric: &MetricField, dist: &SplitDistribution, q: &Quadrature) -> Result<f64> {
    let v = integrate(metric.chart(), q, 1, |x| {
        let pack = curvature_pack(metric, dist, x)?;
        Ok(vec![pack.k12 * pack.jet.volume_density()])
    })?;
    Ok(v[0])
}

/// `(Ric1 - Ric2)` in frame components, computed from the frame Riemann tensor.
pub fn ric_difference(r: &Riemann, p1: usize) -> DMatrix<f64> {
    let n = r.n;
    DMatrix::from_fn(n, n, |a, b| {
        let r1: f64 = (p1..n).map(|al| r.get(al, a, b, al)).sum();
        let r2: f64 = (0..p1).map(|i| r.get(i, a, b, i)).sum();
        r1 - r2
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Criticality {
    pub critical: bool,
    pub max_violation: f64,
    pub witness: Option<Vec<f64>>,
}

/// Largest mixed-block entry `|(Ric1 - Ric2)(e_i, xi_alpha)|` over the given points.
pub fn criticality(metric: &MetricField, dist: &SplitDistribution, points: &[Vec<f64>], tol: f64) -> Result<Criticality> {
    let p1 = dist.p1;
    let mut max_violation = 0.0;
    let mut witness = None;
    for x in points {
        let pack = curvature_pack(metric, dist, x)?;
        let d = &pack.ric1 - &pack.ric2;
        for i in 0..p1 {
            for al in p1..pack.n() {
                let v = d[(i, al)].abs();
                if v > max_violation {
                    max_violation = v;
                    witness = Some(x.clone());
                }
            }
        }
    }
    Ok(Criticality {
        critical: max_violation <= tol,
        max_violation,
        witness,
    })
}

/// The second-variation form at one point, in the pairing `e_i <-> xi_i` of the adapted frame.
#[derive(Clone, Debug)]
pub struct PhiForm {
    pub point: Vec<f64>,
    pub phi: DMatrix<f64>,
}

impl PhiForm {
    pub fn min_eigenvalue(&self) -> f64 {
        self.phi.clone().symmetric_eigenvalues().min()
    }

    pub fn quadratic(&self, omega: &[f64]) -> f64 {
        let w = nalgebra::DVector::from_column_slice(omega);
        (w.transpose() * &self.phi * &w)[(0, 0)]
    }
}

impl Serialize for PhiForm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PhiForm", 2)?;
        st.serialize_field("point", &self.point)?;
        st.serialize_field("phi", &matrix_rows(&self.phi))?;
        st.end()
    }
}

/// `Phi_ij` from frame components of the curvature tensor.
pub fn phi_from_riemann(r: &Riemann, p1: usize) -> Result<DMatrix<f64>> {
    if 2 * p1 > r.n {
        return Err(Error::InvalidParameter(format!(
            "the rotation pairing needs p1 <= p2, got p1 = {p1}, n = {}",
            r.n
        )));
    }
    let d = ric_difference(r, p1);
    let xi = |j: usize| p1 + j;
    Ok(DMatrix::from_fn(p1, p1, |i, j| {
        let diag = if i == j { d[(xi(j), xi(j))] - d[(i, i)] } else { 0.0 };
        diag + 2.0 * (r.get(i, j, xi(i), xi(j)) + r.get(i, xi(j), xi(i), j))
    }))
}

pub fn phi_form(metric: &MetricField, dist: &SplitDistribution, x: &[f64]) -> Result<PhiForm> {
    let pack = curvature_pack(metric, dist, x)?;
    Ok(PhiForm {
        point: x.to_vec(),
        phi: phi_from_riemann(&pack.riemann, dist.p1)?,
    })
}

/// Mixed scalar curvature of the rotated split `e_i cos t_i + xi_i sin t_i`.
pub fn rotated_k12(r: &Riemann, p1: usize, angles: &[f64]) -> f64 {
    let n = r.n;
    let mut basis: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut v = vec![0.0; n];
            v[a] = 1.0;
            v
        })
        .collect();
    for (i, t) in angles.iter().enumerate() {
        let (s, c) = t.sin_cos();
        basis[i] = vec![0.0; n];
        basis[i][i] = c;
        basis[i][p1 + i] = s;
        basis[p1 + i] = vec![0.0; n];
        basis[p1 + i][p1 + i] = c;
        basis[p1 + i][i] = -s;
    }
    let mut k = 0.0;
    for i in 0..p1 {
        for al in p1..n {
            k += r.eval(&basis[i], &basis[al], &basis[al], &basis[i]);
        }
    }
    k
}

/// Uniformly distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Clone, Debug, Serialize)]
pub struct QuasiPositivity {
    pub quasi_positive: bool,
    /// Fraction of sampled points where some tested adapted frame gives a non-positive form.
    pub failing_fraction: f64,
    pub min_eigenvalue: f64,
    pub witness: Option<Vec<f64>>,
}

/// Samples the adapted frame and `rotations` random rotations of it at each point.
pub fn quasi_positive(
    metric: &MetricField,
    dist: &SplitDistribution,
    points: &[Vec<f64>],
    rotations: usize,
    rng: &mut impl Rng,
) -> Result<QuasiPositivity> {
    let (p1, p2) = (dist.p1, dist.p2);
    let n = p1 + p2;
    let mut failing = 0usize;
    let mut min_eig = f64::INFINITY;
    let mut witness = None;
    for x in points {
        let pack = curvature_pack(metric, dist, x)?;
        let scale = 1.0 + pack.riemann.comps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut point_min = phi_from_riemann(&pack.riemann, p1)?.symmetric_eigenvalues().min();
        for _ in 0..rotations {
            let q1 = random_orthogonal(p1, rng);
            let q2 = random_orthogonal(p2, rng);
            let basis: Vec<Vec<f64>> = (0..n)
                .map(|a| {
                    let mut v = vec![0.0; n];
                    if a < p1 {
                        for k in 0..p1 {
                            v[k] = q1[(a, k)];
                        }
                    } else {
                        for k in 0..p2 {
                            v[p1 + k] = q2[(a - p1, k)];
                        }
                    }
                    v
                })
                .collect();
            let r = pack.riemann.in_basis(&basis);
            point_min = point_min.min(phi_from_riemann(&r, p1)?.symmetric_eigenvalues().min());
        }
        if point_min <= 1e-12 * scale {
            failing += 1;
            if witness.is_none() {
                witness = Some(x.clone());
            }
        }
        min_eig = min_eig.min(point_min);
    }
    let failing_fraction = if points.is_empty() { 0.0 } else { failing as f64 / points.len() as f64 };
    Ok(QuasiPositivity {
        quasi_positive: !points.is_empty() && failing == 0,
        failing_fraction,
        min_eigenvalue: min_eig,
        witness,
    })
}

/// Nonnegative periodic bump `prod_a max(0, cos(pi d_a / (2 w_a)))^4`, `d` the wrapped offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Bump {
    /// Support of half the period on every axis.
    pub fn centered(center: Vec<f64>, periods: &[f64]) -> Self {
        Bump {
            half_width: periods.iter().map(|l| l / 4.0).collect(),
            center,
        }
    }

    pub fn value(&self, x: &[f64], periods: &[f64]) -> f64 {
        let mut v = 1.0;
        for a in 0..x.len() {
            let l = periods[a];
            let mut d = x[a] - self.center[a];
            d -= l * (d / l).round();
            let c = (std::f64::consts::FRAC_PI_2 * d / self.half_width[a]).cos();
            if c <= 0.0 || d.abs() >= self.half_width[a] {
                return 0.0;
            }
            v *= c.powi(4);
        }
        v
    }

    fn validate(&self, periods: &[f64]) -> Result<()> {
        let n = periods.len();
        if self.center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.center.len() });
        }
        if self.half_width.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.half_width.len(),
            });
        }
        for (w, l) in self.half_width.iter().zip(periods) {
            if !(*w > 0.0) || *w > l / 2.0 {
                return Err(Error::InvalidParameter(format!(
                    "bump half width {w} must lie in (0, {}]",
                    l / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// A rotation family `e_i(s) = e_i cos(s w_i b) + xi_i sin(s w_i b)` with bump `b`.
#[derive(Clone, Debug)]
pub struct VariationScenario {
    pub metric: MetricField,
    pub dist: SplitDistribution,
    pub omega: Vec<f64>,
    pub bump: Bump,
    pub step: f64,
    pub quadrature: Quadrature,
}

impl VariationScenario {
    pub fn new(metric: MetricField, dist: SplitDistribution, omega: Vec<f64>, bump: Bump) -> Self {
        VariationScenario {
            metric,
            dist,
            omega,
            bump,
            step: 1e-2,
            quadrature: Quadrature::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let periods = torus_periods(self.metric.chart())?;
        let (p1, p2) = (self.dist.p1, self.dist.p2);
        if p1 > p2 {
            return Err(Error::InvalidParameter(format!("rotation families need p1 <= p2, got ({p1}, {p2})")));
        }
        if self.omega.len() != p1 {
            return Err(Error::DimensionMismatch {
                expected: p1,
                got: self.omega.len(),
            });
        }
        if self.omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("rotation weights must be finite and nonnegative".into()));
        }
        self.bump.validate(&periods)?;
        self.quadrature.counts(periods.len())?;
        let wmax = self.omega.iter().cloned().fold(0.0, f64::max);
        if !(self.step > 0.0) || 2.0 * self.step * wmax >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::StepSize(format!(
                "step {} with weight {wmax} rotates past a right angle on the s-grid",
                self.step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VariationDerivatives {
    pub i1_analytic: f64,
    pub i1_fd: f64,
    pub i2_analytic: f64,
    pub i2_fd: f64,
}

/// First and second variations of `I_K` along the rotation family, analytic and by
/// five-point differences of `I(s)` on `{0, +-h, +-2h}`.
pub fn variation_derivatives(sc: &VariationScenario) -> Result<VariationDerivatives> {
    sc.validate()?;
    let periods = torus_periods(sc.metric.chart())?;
    let p1 = sc.dist.p1;
    let h = sc.step;
    let v = integrate(sc.metric.chart(), &sc.quadrature, 4, |x| {
        let b = sc.bump.value(x, &periods);
        if b == 0.0 {
            return Ok(vec![0.0; 4]);
        }
        let pack = curvature_pack(&sc.metric, &sc.dist, x)?;
        let vol = pack.jet.volume_density();
        let r = &pack.riemann;
        let d = ric_difference(r, p1);
        let first: f64 = (0..p1).map(|i| sc.omega[i] * d[(i, p1 + i)]).sum();
        let phi = PhiForm {
            point: Vec::new(),
            phi: phi_from_riemann(r, p1)?,
        };
        let k = |s: f64| {
            let angles: Vec<f64> = sc.omega.iter().map(|w| s * w * b).collect();
            rotated_k12(r, p1, &angles)
        };
        let (km2, km1, k0, k1, k2) = (k(-2.0 * h), k(-h), k(0.0), k(h), k(2.0 * h));
        let d1 = (km2 - 8.0 * km1 + 8.0 * k1 - k2) / (12.0 * h);
        let d2 = (-km2 + 16.0 * km1 - 30.0 * k0 + 16.0 * k1 - k2) / (12.0 * h * h);
        Ok(vec![
            2.0 * b * first * vol,
            d1 * vol,
            2.0 * b * b * phi.quadratic(&sc.omega) * vol,
            d2 * vol,
        ])
    })?;
    Ok(VariationDerivatives {
        i1_analytic: v[0],
        i1_fd: v[1],
        i2_analytic: v[2],
        i2_fd: v[3],
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityCheck {
    pub ik: f64,
    /// `2 int (sigma2(D1) + sigma2(D2)) dvol`.
    pub sigma2_integral: f64,
    /// `I_K` minus `sigma2_integral`.
    pub sigma2_residual: f64,
    /// Integral of `K12 + |B1|^2 - p1^2|H1|^2 - |T1|^2 + |B2|^2 - p2^2|H2|^2 - |T2|^2`.
    pub energy_residual: f64,
    /// Largest pointwise gap between the operator and norm forms of the sigma2 sum.
    pub max_norm_identity_gap: f64,
    pub max_t1_sq: f64,
    pub max_t2_sq: f64,
}

pub fn integral_identity_check(metric: &MetricField, dist: &SplitDistribution, q: &Quadrature) -> Result<IdentityCheck> {
    let (rows, cell) = evaluate_grid(metric.chart(), q, 6, |x| {
        let (pack, ext) = packs(metric, dist, x)?;
        let vol = pack.jet.volume_density();
        let s2 = ext.sigma2_sum();
        Ok(vec![
            pack.k12 * vol,
            2.0 * s2 * vol,
            ext.energy_integrand(pack.k12) * vol,
            (s2 - ext.sigma2_from_norms()).abs(),
            ext.t1_sq,
            ext.t2_sq,
        ])
    })?;
    let v = column_integrals(&rows, cell, 0..3);
    Ok(IdentityCheck {
        ik: v[0],
        sigma2_integral: v[1],
        sigma2_residual: v[0] - v[1],
        energy_residual: v[2],
        max_norm_identity_gap: column_max(&rows, 3),
        max_t1_sq: column_max(&rows, 4),
        max_t2_sq: column_max(&rows, 5),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BendingReport {
    pub c_n: f64,
    pub bending: f64,
    pub bending_bound: f64,
    pub bound_slack: f64,
    pub corrected_energy: f64,
    pub ik: f64,
    /// `B(D1) - c_n I_K / (p - 1)` when `p1 = p2 = p`.
    pub equal_rank_slack: Option<f64>,
    pub d2_integrable: bool,
    /// `D(D2) - I_K` when D2 is integrable.
    pub energy_slack: Option<f64>,
}

/// Total bending, its lower bound, the corrected energy of D2 and `I_K`.
pub fn bending_and_energy(metric: &MetricField, dist: &SplitDistribution, q: &Quadrature, c_n: f64) -> Result<BendingReport> {
    let (p1, p2) = (dist.p1, dist.p2);
    if p1 < 2 || p2 < 2 {
        return Err(Error::BoundUndefined(format!(
            "the bound divides by p_i - 1, got (p1, p2) = ({p1}, {p2})"
        )));
    }
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let (rows, cell) = evaluate_grid(metric.chart(), q, 5, |x| {
        let (pack, ext) = packs(metric, dist, x)?;
        let vol = pack.jet.volume_density();
        let density = ext.bending_density();
        let s1: f64 = ext.c1.iter().map(sigma2).sum();
        let s2: f64 = ext.c2.iter().map(sigma2).sum();
        let bound = 2.0 / (fp1 - 1.0) * s1 + 2.0 / (fp2 - 1.0) * s2;
        let energy = density + fp1 * (fp1 - 2.0) * ext.h1_sq() + fp2 * fp2 * ext.h2_sq();
        Ok(vec![density * vol, bound * vol, energy * vol, pack.k12 * vol, ext.t2_sq])
    })?;
    let v = column_integrals(&rows, cell, 0..4);
    let bending = c_n * v[0];
    let bending_bound = c_n * v[1];
    let ik = v[3];
    let d2_integrable = column_max(&rows, 4) <= 1e-10;
    Ok(BendingReport {
        c_n,
        bending,
        bending_bound,
        bound_slack: bending - bending_bound,
        corrected_energy: v[2],
        ik,
        equal_rank_slack: (p1 == p2).then(|| bending - c_n / (fp1 - 1.0) * ik),
        d2_integrable,
        energy_slack: d2_integrable.then(|| v[2] - ik),
    })
}

/// Both sides of `(p-1) sum C_ij^2 = sum_{i<j} (C_ii - C_jj)^2 + sum_{i<j} (C_ij + C_ji)^2
/// + (p-2) sum_{i != j} C_ij^2 + 2 sigma2(C)`.
pub fn bending_matrix_identity(c: &DMatrix<f64>) -> (f64, f64) {
    let p = c.nrows();
    let lhs = (p as f64 - 1.0) * c.norm_squared();
    let mut rhs = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i < j {
                rhs += (c[(i, i)] - c[(j, j)]).powi(2) + (c[(i, j)] + c[(j, i)]).powi(2);
                rhs += 2.0 * (c[(i, i)] * c[(j, j)] - c[(i, j)] * c[(j, i)]);
            }
            if i != j {
                rhs += (p as f64 - 2.0) * c[(i, j)].powi(2);
            }
        }
    }
    (lhs, rhs)
}

/// `2 sigma2(C) - (sigma1(C)^2 - sigma1(C^2))`.
pub fn newton_identity_gap(c: &DMatrix<f64>) -> f64 {
    let t = c.trace();
    2.0 * sigma2(c) - (t * t - (c * c).trace())
}

/// Directional means of `sigma2` over unit normals, scaled by the codimension:
/// `(sigma2(D1), sigma2(D2))` estimated from `samples` uniform normals each.
pub fn sigma2_directional(ext: &ExtrinsicPack, samples: usize, rng: &mut impl Rng) -> (f64, f64) {
    let mean = |ops: &[DMatrix<f64>], rng: &mut dyn rand::RngCore| {
        let q = ops.len();
        let p = ops[0].nrows();
        let mut acc = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut xi: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            xi.iter_mut().for_each(|v| *v /= norm);
            let mut c = DMatrix::zeros(p, p);
            for (w, op) in xi.iter().zip(ops) {
                c += op * *w;
            }
            acc.push(sigma2(&c));
        }
        q as f64 * pairwise_sum(&acc) / samples as f64
    };
    let d1 = mean(&ext.c1, rng);
    let d2 = mean(&ext.c2, rng);
    (d1, d2)
}

/// Everything the variation task reports, in one pass over the scenario.
#[derive(Clone, Debug, Serialize)]
pub struct VariationReport {
    pub ik: f64,
    pub i1_analytic: f64,
    pub i1_fd: f64,
    pub i2_analytic: f64,
    pub i2_fd: f64,
    pub critical: bool,
    pub max_violation: f64,
    pub quasi_positive: bool,
    pub failing_fraction: f64,
    pub energy_residual: f64,
    pub sigma2_residual: f64,
    pub bending: Option<f64>,
    pub bending_bound: Option<f64>,
    pub corrected_energy: Option<f64>,
}

pub fn variation_report(
    sc: &VariationScenario,
    critical_tol: f64,
    rotations: usize,
    c_n: f64,
    rng: &mut impl Rng,
) -> Result<VariationReport> {
    let der = variation_derivatives(sc)?;
    let ids = integral_identity_check(&sc.metric, &sc.dist, &sc.quadrature)?;
    let coarse = torus_points(sc.metric.chart(), 8)?;
    let crit = criticality(&sc.metric, &sc.dist, &coarse, critical_tol)?;
    let qp = quasi_positive(&sc.metric, &sc.dist, &coarse, rotations, rng)?;
    let bend = match bending_and_energy(&sc.metric, &sc.dist, &sc.quadrature, c_n) {
        Ok(b) => Some(b),
        Err(Error::BoundUndefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(VariationReport {
        ik: ids.ik,
        i1_analytic: der.i1_analytic,
        i1_fd: der.i1_fd,
        i2_analytic: der.i2_analytic,
        i2_fd: der.i2_fd,
        critical: crit.critical,
        max_violation: crit.max_violation,
        quasi_positive: qp.quasi_positive,
        failing_fraction: qp.failing_fraction,
        energy_residual: ids.energy_residual,
        sigma2_residual: ids.sigma2_residual,
        bending: bend.as_ref().map(|b| b.bending),
        bending_bound: bend.as_ref().map(|b| b.bending_bound),
        corrected_energy: bend.as_ref().map(|b| b.corrected_energy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::field::ScalarField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(p1: usize, p2: usize) -> MetricField {
        MetricField::euclidean(Chart::torus(p1, p2, std::f64::consts::TAU).unwrap())
    }

    #[test]
    fn flat_torus_is_zero() {
        let m = flat(2, 2);
        let d = SplitDistribution::coordinate(2, 2);
        assert_eq!(total_k12(&m, &d, &Quadrature::new(8)).unwrap(), 0.0);
        let c = criticality(&m, &d, &torus_points(m.chart(), 8).unwrap(), 1e-12).unwrap();
        assert!(c.critical);
    }

    #[test]
    fn non_torus_is_compactness_error() {
        let m = MetricField::euclidean(Chart::euclidean(2, 2).unwrap());
        let d = SplitDistribution::coordinate(2, 2);
        assert!(matches!(total_k12(&m, &d, &Quadrature::new(8)), Err(Error::Compactness(_))));
    }

    #[test]
    fn bump_is_periodic_and_bounded() {
        let l = [std::f64::consts::TAU; 2];
        let b = Bump::centered(vec![0.0, 0.0], &l);
        assert_eq!(b.value(&[0.0, 0.0], &l), 1.0);
        assert!((b.value(&[0.3, 0.1], &l) - b.value(&[0.3 + l[0], 0.1 - l[1]], &l)).abs() < 1e-15);
        assert_eq!(b.value(&[3.0, 0.0], &l), 0.0);
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_orthogonal(4, &mut rng);
        assert!((q.transpose() * &q - DMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn step_leaving_right_angle_is_rejected() {
        let m = flat(1, 2);
        let l = m.chart().periods().unwrap().to_vec();
        let mut sc = VariationScenario::new(m, SplitDistribution::coordinate(1, 2), vec![100.0], Bump::centered(vec![0.0; 3], &l));
        sc.quadrature = Quadrature::new(8);
        assert!(matches!(variation_derivatives(&sc), Err(Error::StepSize(_))));
    }

    #[test]
    fn codimension_one_form() {
        // p1 = 1: Phi_11 = Ric(xi_1, xi_1) - Ric(e_1, e_1)
        let chart = Chart::torus(1, 2, std::f64::consts::TAU).unwrap();
        let scale = (Expr::coord(1).sin() + Expr::constant(0.5) * Expr::coord(0).cos()).exp();
        let m = MetricField::conformally_flat(chart, ScalarField::from_expr(scale));
        let d = SplitDistribution::coordinate(1, 2);
        let x = [0.4, 1.1, -0.3];
        let pack = curvature_pack(&m, &d, &x).unwrap();
        let ric = pack.ricci();
        let phi = phi_form(&m, &d, &x).unwrap();
        assert!((phi.phi[(0, 0)] - (ric[(1, 1)] - ric[(0, 0)])).abs() < 1e-10);
    }
}
