use serde::Serialize;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::metric::MetricField;

/// Polynomial metric `g = C (1 - sum c_bb x_b^2) delta` with `Ric_i|D_i = T|D_i` at the origin.
#[derive(Clone, Debug, Serialize)]
pub struct PointwiseMetric {
    pub coefficients: Vec<f64>,
    pub scale_constant: f64,
    /// Shared trace `K = sum_i T_ii = sum_alpha T_alpha alpha`.
    pub k: f64,
    #[serde(skip)]
    pub metric: MetricField,
}

/// Builds the metric for a diagonal `T` given as its diagonal, checking positivity on
/// `[-half_width, half_width]^n`.
pub fn pointwise_metric(t: &[f64], p1: usize, p2: usize, c: f64, half_width: f64) -> Result<PointwiseMetric> {
    let n = p1 + p2;
    if t.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t.len() });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
    }
    let k1: f64 = t[..p1].iter().sum();
    let k2: f64 = t[p1..].iter().sum();
    if (k1 - k2).abs() > 1e-12 * (1.0 + k1.abs().max(k2.abs())) {
        return Err(Error::Compatibility(format!(
            "trace over D1 ({k1}) differs from trace over D2 ({k2})"
        )));
    }
    let k = k1;
    let (fp1, fp2) = (p1 as f64, p2 as f64);
    let coefficients: Vec<f64> = (0..n)
        .map(|b| if b < p1 { t[b] / fp2 } else { (t[b] - k / fp2) / fp1 })
        .collect();
    let worst: f64 = coefficients.iter().map(|v| v.max(0.0)).sum::<f64>() * half_width * half_width;
    if worst >= 1.0 {
        let corner: Vec<f64> = coefficients
            .iter()
            .map(|v| if *v > 0.0 { half_width } else { 0.0 })
            .collect();
        return Err(Error::Definiteness { point: corner });
    }
    let conformal = Expr::sum(
        std::iter::once(Expr::constant(c))
            .chain(
                coefficients
                    .iter()
                    .enumerate()
                    .map(|(b, v)| Expr::constant(-c * v) * Expr::coord(b).pow(2.0)),
            )
            .collect(),
    );
    let chart = Chart::euclidean(p1, p2)?;
    let scale = ScalarField::from_expr(conformal.pow(-0.5));
    Ok(PointwiseMetric {
        coefficients,
        scale_constant: c,
        k,
        metric: MetricField::conformally_flat(chart, scale).with_label("pointwise"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_tensor_coefficients() {
        let m = pointwise_metric(&[1.0, 1.0, 1.0, 1.0], 2, 2, 3.0, 0.5).unwrap();
        assert_eq!(m.k, 2.0);
        assert_eq!(m.coefficients, vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn trace_mismatch_is_incompatible() {
        let r = pointwise_metric(&[1.0, 0.0, 0.0, 0.0], 2, 2, 1.0, 0.5);
        assert!(matches!(r, Err(Error::Compatibility(_))));
    }
}
