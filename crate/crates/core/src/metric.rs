//! Metric fields, their coordinate derivatives and Christoffel symbols.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{fd_step, ScalarField};

/// How metric derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Exact partials from expression jets (closures still fall back to FD).
    #[default]
    Analytic,
    /// Fourth-order central differences of metric values only.
    FiniteDifference,
}

#[derive(Clone, Debug)]
pub enum MetricRepr {
    /// `g_ab = delta_ab / F^2`.
    ConformallyFlat { scale: ScalarField },
    /// Row-major symmetric `n x n` matrix of entry fields.
    General { entries: Vec<ScalarField> },
}

#[derive(Clone, Debug)]
pub struct MetricField {
    chart: Chart,
    repr: MetricRepr,
    label: Option<String>,
}

/// Metric values and coordinate derivatives at one point.
///
/// Layout: `g[a*n+b]`, `dg[(c*n+a)*n+b] = d_c g_ab`,
/// `ddg[((d*n+c)*n+a)*n+b] = d_d d_c g_ab`.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub n: usize,
    pub point: Vec<f64>,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub dg: Vec<f64>,
    pub ddg: Vec<f64>,
}

/// Christoffel symbols `gamma[(c*n+a)*n+b] = Gamma^c_ab` and their partials
/// `dgamma[((d*n+c)*n+a)*n+b] = d_d Gamma^c_ab`.
#[derive(Clone, Debug)]
pub struct Christoffel {
    pub n: usize,
    pub gamma: Vec<f64>,
    pub dgamma: Vec<f64>,
}

impl Christoffel {
    #[inline]
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.gamma[(c * self.n + a) * self.n + b]
    }

    #[inline]
    pub fn deriv(&self, d: usize, c: usize, a: usize, b: usize) -> f64 {
        self.dgamma[((d * self.n + c) * self.n + a) * self.n + b]
    }

    /// Coordinates of `nabla_X Y` for a vector field `Y` that is constant in the chart.
    pub fn covariant_of_constant(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (c, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for a in 0..n {
                if x[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    s += x[a] * self.get(c, a, b) * y[b];
                }
            }
            *o = s;
        }
        out
    }
}

impl MetricJet {
    #[inline]
    pub fn g(&self, a: usize, b: usize) -> f64 {
        self.g[a * self.n + b]
    }

    #[inline]
    pub fn ginv(&self, a: usize, b: usize) -> f64 {
        self.ginv[a * self.n + b]
    }

    #[inline]
    pub fn dg(&self, c: usize, a: usize, b: usize) -> f64 {
        self.dg[(c * self.n + a) * self.n + b]
    }

    #[inline]
    pub fn ddg(&self, d: usize, c: usize, a: usize, b: usize) -> f64 {
        self.ddg[((d * self.n + c) * self.n + a) * self.n + b]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.g)
    }

    /// `g(u, v)` for coordinate vectors.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += u[a] * self.g[a * n + b] * v[b];
            }
        }
        s
    }

    /// Square root of the metric determinant (the volume density).
    pub fn volume_density(&self) -> f64 {
        self.matrix().determinant().sqrt()
    }
}

impl MetricField {
    pub fn conformally_flat(chart: Chart, scale: ScalarField) -> Self {
        MetricField {
            chart,
            repr: MetricRepr::ConformallyFlat { scale },
            label: None,
        }
    }

    pub fn general(chart: Chart, entries: Vec<ScalarField>) -> Result<Self> {
        let n = chart.dim;
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(MetricField {
            chart,
            repr: MetricRepr::General { entries },
            label: None,
        })
    }

    pub fn euclidean(chart: Chart) -> Self {
        MetricField::conformally_flat(chart, ScalarField::constant(1.0)).with_label("euclidean")
    }

    /// Half-space model `delta / x_n^2`, using the last coordinate.
    pub fn hyperbolic(chart: Chart) -> Self {
        let last = chart.dim - 1;
        MetricField::conformally_flat(chart, ScalarField::from_expr(Expr::coord(last)))
            .with_label("hyperbolic-half-space")
    }

    /// Unit round sphere in stereographic coordinates, `F = (1 + |x|^2)/2`.
    pub fn sphere(chart: Chart) -> Self {
        let n = chart.dim;
        let scale = Expr::constant(0.5) + Expr::constant(0.5) * Expr::sum_of_squares((0..n).collect());
        MetricField::conformally_flat(chart, ScalarField::from_expr(scale)).with_label("round-sphere")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim
    }

    pub fn repr(&self) -> &MetricRepr {
        &self.repr
    }

    /// The conformal scale `F` when the metric is `delta / F^2`.
    pub fn scale(&self) -> Option<&ScalarField> {
        match &self.repr {
            MetricRepr::ConformallyFlat { scale } => Some(scale),
            MetricRepr::General { .. } => None,
        }
    }

    /// The conformal metric `g / phi^2`.
    pub fn conformal_change(&self, phi: &ScalarField) -> MetricField {
        let repr = match &self.repr {
            MetricRepr::ConformallyFlat { scale } => MetricRepr::ConformallyFlat {
                scale: field_product(scale, phi),
            },
            MetricRepr::General { entries } => {
                let inv_sq = field_map(phi, |e| e.pow(-2.0), |v| 1.0 / (v * v));
                MetricRepr::General {
                    entries: entries.iter().map(|e| field_product(e, &inv_sq)).collect(),
                }
            }
        };
        MetricField {
            chart: self.chart.clone(),
            repr,
            label: self.label.as_ref().map(|l| format!("{l}/phi^2")),
        }
    }

    /// Metric matrix values (row-major), symmetry-checked.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        match &self.repr {
            MetricRepr::ConformallyFlat { scale } => {
                let f = scale.value(x)?;
                if f == 0.0 {
                    return Err(Error::domain(x, "conformal scale vanishes"));
                }
                let w = 1.0 / (f * f);
                let mut g = vec![0.0; n * n];
                for a in 0..n {
                    g[a * n + a] = w;
                }
                Ok(g)
            }
            MetricRepr::General { entries } => {
                let g = entries.iter().map(|e| e.value(x)).collect::<Result<Vec<_>>>()?;
                check_symmetric(&g, n, x)?;
                Ok(g)
            }
        }
    }

    pub fn matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        Ok(DMatrix::from_row_slice(n, n, &self.values(x)?))
    }

    /// Metric values with first and second partials, checked for definiteness.
    pub fn jet(&self, x: &[f64], mode: DerivativeMode) -> Result<MetricJet> {
        self.chart.contains(x)?;
        let n = self.dim();
        let (g, dg, ddg) = match mode {
            DerivativeMode::FiniteDifference => fd_matrix_derivatives(|y| self.values(y), x, n)?,
            DerivativeMode::Analytic => match &self.repr {
                MetricRepr::ConformallyFlat { scale } => {
                    let fj = scale.jet(x)?;
                    if fj.value == 0.0 {
                        return Err(Error::domain(x, "conformal scale vanishes"));
                    }
                    let f = fj.value;
                    let w = fj.chain(1.0 / (f * f), -2.0 / (f * f * f), 6.0 / (f * f * f * f));
                    let mut g = vec![0.0; n * n];
                    let mut dg = vec![0.0; n * n * n];
                    let mut ddg = vec![0.0; n * n * n * n];
                    for a in 0..n {
                        g[a * n + a] = w.value;
                        for c in 0..n {
                            dg[(c * n + a) * n + a] = w.grad[c];
                            for d in 0..n {
                                ddg[((d * n + c) * n + a) * n + a] = w.hess[d][c];
                            }
                        }
                    }
                    (g, dg, ddg)
                }
                MetricRepr::General { entries } => {
                    let mut g = vec![0.0; n * n];
                    let mut dg = vec![0.0; n * n * n];
                    let mut ddg = vec![0.0; n * n * n * n];
                    for a in 0..n {
                        for b in 0..n {
                            let j = entries[a * n + b].jet(x)?;
                            g[a * n + b] = j.value;
                            for c in 0..n {
                                dg[(c * n + a) * n + b] = j.grad[c];
                                for d in 0..n {
                                    ddg[((d * n + c) * n + a) * n + b] = j.hess[d][c];
                                }
                            }
                        }
                    }
                    check_symmetric(&g, n, x)?;
                    (g, dg, ddg)
                }
            },
        };
        let m = DMatrix::from_row_slice(n, n, &g);
        let chol = m.clone().cholesky().ok_or_else(|| Error::Definiteness { point: x.to_vec() })?;
        let inv = chol.inverse();
        let ginv = (0..n * n).map(|k| inv[(k / n, k % n)]).collect();
        Ok(MetricJet {
            n,
            point: x.to_vec(),
            g,
            ginv,
            dg,
            ddg,
        })
    }

    /// Christoffel symbols and their first partials.
    ///
    /// Conformally flat metrics in analytic mode use the closed form in terms
    /// of `sigma = -log F`; everything else goes through the coordinate formula.
    pub fn christoffel(&self, x: &[f64], mode: DerivativeMode) -> Result<(MetricJet, Christoffel)> {
        let jet = self.jet(x, mode)?;
        let chr = match (&self.repr, mode) {
            (MetricRepr::ConformallyFlat { scale }, DerivativeMode::Analytic) => {
                conformal_christoffel(&scale.jet(x)?)
            }
            _ => christoffel_from_jet(&jet),
        };
        Ok((jet, chr))
    }
}

fn check_symmetric(g: &[f64], n: usize, x: &[f64]) -> Result<()> {
    for a in 0..n {
        for b in (a + 1)..n {
            let (u, v) = (g[a * n + b], g[b * n + a]);
            if (u - v).abs() > 1e-12 * (1.0 + u.abs().max(v.abs())) {
                return Err(Error::domain(x, format!("metric entries ({a},{b}) and ({b},{a}) differ")));
            }
        }
    }
    Ok(())
}

/// Closed-form Christoffels of `delta / F^2`.
fn conformal_christoffel(fj: &crate::jet::Jet) -> Christoffel {
    let n = fj.dim();
    let f_hess = fj.hess;
    let f = fj.value;
    let sigma: Vec<f64> = (0..n).map(|a| -fj.grad[a] / f).collect();
    let dsigma: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| -f_hess[a][b] / f + fj.grad[a] * fj.grad[b] / (f * f))
                .collect()
        })
        .collect();
    let mut gamma = vec![0.0; n * n * n];
    let mut dgamma = vec![0.0; n * n * n * n];
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                gamma[(c * n + a) * n + b] =
                    delta(a, c) * sigma[b] + delta(b, c) * sigma[a] - delta(a, b) * sigma[c];
                for d in 0..n {
                    dgamma[((d * n + c) * n + a) * n + b] = delta(a, c) * dsigma[b][d]
                        + delta(b, c) * dsigma[a][d]
                        - delta(a, b) * dsigma[c][d];
                }
            }
        }
    }
    Christoffel { n, gamma, dgamma }
}

/// `Gamma^c_ab = 1/2 g^ce (d_a g_be + d_b g_ae - d_e g_ab)` and its partials.
pub fn christoffel_from_jet(j: &MetricJet) -> Christoffel {
    let n = j.n;
    // first kind: low[(e*n+a)*n+b]
    let mut low = vec![0.0; n * n * n];
    let mut dlow = vec![0.0; n * n * n * n];
    for e in 0..n {
        for a in 0..n {
            for b in 0..n {
                low[(e * n + a) * n + b] = 0.5 * (j.dg(a, b, e) + j.dg(b, a, e) - j.dg(e, a, b));
                for d in 0..n {
                    dlow[((d * n + e) * n + a) * n + b] =
                        0.5 * (j.ddg(d, a, b, e) + j.ddg(d, b, a, e) - j.ddg(d, e, a, b));
                }
            }
        }
    }
    // d_d g^ce = -g^cf (d_d g_fh) g^he
    let mut dginv = vec![0.0; n * n * n];
    for d in 0..n {
        for c in 0..n {
            for e in 0..n {
                let mut s = 0.0;
                for f in 0..n {
                    for h in 0..n {
                        s += j.ginv(c, f) * j.dg(d, f, h) * j.ginv(h, e);
                    }
                }
                dginv[(d * n + c) * n + e] = -s;
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    let mut dgamma = vec![0.0; n * n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for e in 0..n {
                    s += j.ginv(c, e) * low[(e * n + a) * n + b];
                }
                gamma[(c * n + a) * n + b] = s;
                for d in 0..n {
                    let mut t = 0.0;
                    for e in 0..n {
                        t += dginv[(d * n + c) * n + e] * low[(e * n + a) * n + b]
                            + j.ginv(c, e) * dlow[((d * n + e) * n + a) * n + b];
                    }
                    dgamma[((d * n + c) * n + a) * n + b] = t;
                }
            }
        }
    }
    Christoffel { n, gamma, dgamma }
}

/// FD first and second partials of a matrix-valued map.
fn fd_matrix_derivatives<F>(f: F, x: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let m = n * n;
    let g = f(x)?;
    let mut dg = vec![0.0; n * m];
    let mut ddg = vec![0.0; n * n * m];
    let first = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let second = [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)];
    let mut y = x.to_vec();
    for c in 0..n {
        let h = fd_step(x[c]);
        let mut d1 = vec![0.0; m];
        let mut d2: Vec<f64> = g.iter().map(|v| -30.0 * v).collect();
        for (k, (off, w)) in first.iter().enumerate() {
            y[c] = x[c] + off * h;
            let v = f(&y)?;
            let w2 = second[k].1;
            for i in 0..m {
                d1[i] += w * v[i];
                d2[i] += w2 * v[i];
            }
        }
        y[c] = x[c];
        for i in 0..m {
            dg[c * m + i] = d1[i] / (12.0 * h);
            ddg[(c * n + c) * m + i] = d2[i] / (12.0 * h * h);
        }
    }
    for c in 0..n {
        for d in (c + 1)..n {
            let (hc, hd) = (fd_step(x[c]), fd_step(x[d]));
            let mut s = vec![0.0; m];
            for (oc, wc) in first {
                for (od, wd) in first {
                    y[c] = x[c] + oc * hc;
                    y[d] = x[d] + od * hd;
                    let v = f(&y)?;
                    for i in 0..m {
                        s[i] += wc * wd * v[i];
                    }
                }
            }
            y[c] = x[c];
            y[d] = x[d];
            for i in 0..m {
                let val = s[i] / (144.0 * hc * hd);
                ddg[(c * n + d) * m + i] = val;
                ddg[(d * n + c) * m + i] = val;
            }
        }
    }
    Ok((g, dg, ddg))
}

/// Pointwise product of two fields, kept analytic when both are expressions.
pub fn field_product(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut out = match (a.expr(), b.expr()) {
        (Some(ea), Some(eb)) => ScalarField::from_expr(Expr::product(vec![ea.clone(), eb.clone()])),
        _ => {
            let (a2, b2) = (a.clone(), b.clone());
            ScalarField::from_fn(move |x| match (a2.value(x), b2.value(x)) {
                (Ok(u), Ok(v)) => u * v,
                _ => f64::NAN,
            })
        }
    };
    for g in a.guards().iter().chain(b.guards()) {
        if matches!(g, crate::field::Guard::Box { .. } | crate::field::Guard::HalfSpace { .. }) {
            out = out.with_guard(g.clone());
        }
    }
    out
}

/// Applies a unary map, kept analytic when `a` is an expression.
pub fn field_map(
    a: &ScalarField,
    expr_map: impl Fn(Expr) -> Expr,
    value_map: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> ScalarField {
    match a.expr() {
        Some(e) => ScalarField::from_expr(expr_map(e.clone())),
        None => {
            let a2 = a.clone();
            ScalarField::from_fn(move |x| a2.value(x).map(&value_map).unwrap_or(f64::NAN))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_and_coordinate_christoffels_agree() {
        let chart = Chart::euclidean(2, 2).unwrap();
        let f = Expr::constant(1.3) + Expr::coord(0).sin() * Expr::coord(3) * Expr::constant(0.4)
            + Expr::coord(1) * Expr::coord(2) * Expr::constant(0.2);
        let m = MetricField::conformally_flat(chart, ScalarField::from_expr(f));
        let x = [0.3, -0.2, 0.5, 0.7];
        let (jet, closed) = m.christoffel(&x, DerivativeMode::Analytic).unwrap();
        let generic = christoffel_from_jet(&jet);
        assert!(max_abs_diff(&closed.gamma, &generic.gamma) < 1e-12);
        assert!(max_abs_diff(&closed.dgamma, &generic.dgamma) < 1e-11);
    }

    #[test]
    fn fd_metric_derivatives_match_analytic() {
        let chart = Chart::half_space(2, 1).unwrap();
        let m = MetricField::hyperbolic(chart);
        let x = [0.1, 0.4, 1.3];
        let a = m.jet(&x, DerivativeMode::Analytic).unwrap();
        let f = m.jet(&x, DerivativeMode::FiniteDifference).unwrap();
        assert!(max_abs_diff(&a.dg, &f.dg) < 1e-9);
        assert!(max_abs_diff(&a.ddg, &f.ddg) < 1e-6);
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let chart = Chart::euclidean(1, 1).unwrap();
        let entries = vec![
            ScalarField::constant(1.0),
            ScalarField::constant(2.0),
            ScalarField::constant(2.0),
            ScalarField::constant(1.0),
        ];
        let m = MetricField::general(chart, entries).unwrap();
        assert!(matches!(m.jet(&[0.0, 0.0], DerivativeMode::Analytic), Err(Error::Definiteness { .. })));
    }

    #[test]
    fn asymmetric_metric_is_rejected() {
        let chart = Chart::euclidean(1, 1).unwrap();
        let entries = vec![
            ScalarField::constant(1.0),
            ScalarField::constant(0.1),
            ScalarField::constant(0.2),
            ScalarField::constant(1.0),
        ];
        let m = MetricField::general(chart, entries).unwrap();
        assert!(m.values(&[0.0, 0.0]).is_err());
    }
}
