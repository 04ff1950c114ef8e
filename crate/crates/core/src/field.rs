//! Scalar fields with analytic or finite-difference derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{Jet, MAX_DIM};

/// Validity predicate attached to a field. Evaluation outside it is a domain error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Guard {
    /// `lo[a] <= x_a <= hi[a]` for every axis.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `x_axis > bound`.
    HalfSpace { axis: usize, bound: f64 },
    /// `|f(x)| > min_abs`.
    Nonvanishing { min_abs: f64 },
    /// `f(x) > min`.
    Positive { min: f64 },
}

impl Guard {
    fn check_point(&self, x: &[f64]) -> Result<()> {
        match self {
            Guard::Box { lo, hi } => {
                for a in 0..x.len().min(lo.len()).min(hi.len()) {
                    if x[a] < lo[a] || x[a] > hi[a] {
                        return Err(Error::domain(x, format!("x_{a} outside [{}, {}]", lo[a], hi[a])));
                    }
                }
                Ok(())
            }
            Guard::HalfSpace { axis, bound } => match x.get(*axis) {
                Some(v) if *v > *bound => Ok(()),
                _ => Err(Error::domain(x, format!("requires x_{axis} > {bound}"))),
            },
            _ => Ok(()),
        }
    }

    fn check_value(&self, x: &[f64], v: f64) -> Result<()> {
        match self {
            Guard::Nonvanishing { min_abs } if v.abs() <= *min_abs => {
                Err(Error::domain(x, format!("field value {v} is within {min_abs} of zero")))
            }
            Guard::Positive { min } if v <= *min => {
                Err(Error::domain(x, format!("field value {v} is not above {min}")))
            }
            _ => Ok(()),
        }
    }
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    Expr(Expr),
    Function(PointFn),
}

/// A real-valued field on a chart.
///
/// Expression-backed fields differentiate analytically through [`Jet`]s;
/// closure-backed fields fall back to fourth-order central differences.
#[derive(Clone)]
pub struct ScalarField {
    source: Source,
    guards: Vec<Guard>,
    label: Option<String>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ScalarField");
        match &self.source {
            Source::Expr(e) => d.field("expr", e),
            Source::Function(_) => d.field("expr", &"<closure>"),
        };
        d.field("guards", &self.guards).field("label", &self.label).finish()
    }
}

impl From<Expr> for ScalarField {
    fn from(e: Expr) -> Self {
        ScalarField::from_expr(e)
    }
}

impl ScalarField {
    pub fn from_expr(expr: Expr) -> Self {
        ScalarField {
            source: Source::Expr(expr),
            guards: Vec::new(),
            label: None,
        }
    }

    pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            source: Source::Function(Arc::new(f)),
            guards: Vec::new(),
            label: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::from_expr(Expr::Const(value))
    }

    pub fn with_guard(mut self, guard: Guard) -> Self {
        self.guards.push(guard);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn guards(&self) -> &[Guard] {
        &self.guards
    }

    pub fn expr(&self) -> Option<&Expr> {
        match &self.source {
            Source::Expr(e) => Some(e),
            Source::Function(_) => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, Source::Expr(_))
    }

    fn raw_value(&self, x: &[f64]) -> Result<f64> {
        match &self.source {
            Source::Expr(e) => e.eval(x),
            Source::Function(f) => {
                let v = f(x);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::domain(x, "field evaluated to a non-finite value"))
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        for g in &self.guards {
            g.check_point(x)?;
        }
        let v = self.raw_value(x)?;
        for g in &self.guards {
            g.check_value(x, v)?;
        }
        Ok(v)
    }

    /// Value, gradient and Hessian; analytic when possible.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        match &self.source {
            Source::Expr(e) => {
                for g in &self.guards {
                    g.check_point(x)?;
                }
                let j = e.eval_jet(x)?;
                for g in &self.guards {
                    g.check_value(x, j.value)?;
                }
                Ok(j)
            }
            Source::Function(_) => self.fd_jet(x),
        }
    }

    /// Value, gradient and Hessian from fourth-order central differences only.
    pub fn fd_jet(&self, x: &[f64]) -> Result<Jet> {
        let value = self.value(x)?;
        let f = |y: &[f64]| self.raw_value(y);
        fd_jet_of(&f, x, value)
    }
}

/// Per-axis finite-difference step: `max(1e-3, 1e-3 |x_a|)`.
pub fn fd_step(xa: f64) -> f64 {
    (1e-3 * xa.abs()).max(1e-3)
}

const FIRST_OFFSETS: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Fourth-order central first derivative of a vector-valued map along `axis`.
pub fn fd_first<F>(f: &F, x: &[f64], axis: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let h = fd_step(x[axis]);
    let mut acc: Option<Vec<f64>> = None;
    let mut y = x.to_vec();
    for (off, w) in FIRST_OFFSETS {
        y[axis] = x[axis] + off * h;
        let v = f(&y)?;
        let acc = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (a, vi) in acc.iter_mut().zip(v) {
            *a += w * vi;
        }
    }
    Ok(acc
        .unwrap_or_default()
        .into_iter()
        .map(|a| a / (12.0 * h))
        .collect())
}

/// Jet of a scalar map from values alone, using the 4th-order stencils.
pub fn fd_jet_of<F>(f: &F, x: &[f64], value: f64) -> Result<Jet>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    if n > MAX_DIM {
        return Err(Error::DimensionMismatch {
            expected: MAX_DIM,
            got: n,
        });
    }
    let mut jet = Jet::constant(n, value);
    let mut y = x.to_vec();
    for a in 0..n {
        let h = fd_step(x[a]);
        let mut d1 = 0.0;
        for (off, w) in FIRST_OFFSETS {
            y[a] = x[a] + off * h;
            d1 += w * f(&y)?;
        }
        y[a] = x[a];
        jet.grad[a] = d1 / (12.0 * h);

        let mut d2 = -30.0 * value;
        for (off, w) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
            y[a] = x[a] + off * h;
            d2 += w * f(&y)?;
        }
        y[a] = x[a];
        jet.hess[a][a] = d2 / (12.0 * h * h);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (ha, hb) = (fd_step(x[a]), fd_step(x[b]));
            let mut s = 0.0;
            for (oa, wa) in FIRST_OFFSETS {
                for (ob, wb) in FIRST_OFFSETS {
                    y[a] = x[a] + oa * ha;
                    y[b] = x[b] + ob * hb;
                    s += wa * wb * f(&y)?;
                }
            }
            y[a] = x[a];
            y[b] = x[b];
            let m = s / (144.0 * ha * hb);
            jet.hess[a][b] = m;
            jet.hess[b][a] = m;
        }
    }
    Ok(jet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn library() -> Vec<Expr> {
        let x0 = Expr::coord(0);
        let x1 = Expr::coord(1);
        let x2 = Expr::coord(2);
        vec![
            x0.clone() * x1.clone() + x2.clone().pow(3.0),
            x0.clone().sin().exp(),
            (x1.clone() * x2.clone()).cos(),
            (Expr::constant(2.0) + Expr::sum_of_squares(vec![0, 1, 2])).recip(),
            (Expr::constant(1.5) + x0.clone().sin() * x2.clone().cos()).pow(-2.0),
            (Expr::constant(3.0) + x1.clone()).pow(0.7),
            (Expr::constant(4.0) + x0.clone() * x0).ln(),
            -(x1 * x2).exp(),
        ]
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn analytic_and_fd_derivatives_agree(
            x0 in -1.0f64..1.0, x1 in -1.0f64..1.0, x2 in -1.0f64..1.0
        ) {
            let x = [x0, x1, x2];
            for e in library() {
                let field = ScalarField::from_expr(e.clone());
                let a = field.jet(&x).unwrap();
                let f = field.fd_jet(&x).unwrap();
                for i in 0..3 {
                    prop_assert!(rel_close(a.grad[i], f.grad[i], 1e-6), "{e:?} grad {i}");
                    for j in 0..3 {
                        prop_assert!(rel_close(a.hess[i][j], f.hess[i][j], 1e-6), "{e:?} hess {i}{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn closure_fields_use_fd() {
        let f = ScalarField::from_fn(|x| x[0].sin() * x[1]);
        assert!(!f.is_analytic());
        let j = f.jet(&[0.3, 2.0]).unwrap();
        assert!((j.grad[0] - 2.0 * 0.3f64.cos()).abs() < 1e-9);
        assert!((j.hess[0][1] - 0.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn guards_reject_out_of_domain_points() {
        let f = ScalarField::from_expr(Expr::coord(1).recip())
            .with_guard(Guard::HalfSpace { axis: 1, bound: 0.0 });
        assert!(f.value(&[0.0, 1.0]).is_ok());
        assert!(matches!(f.value(&[0.0, -1.0]), Err(Error::Domain { .. })));

        let g = ScalarField::from_expr(Expr::coord(0)).with_guard(Guard::Nonvanishing { min_abs: 1e-3 });
        assert!(matches!(g.jet(&[1e-4]), Err(Error::Domain { .. })));
    }
}
