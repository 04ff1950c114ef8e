use serde::Serialize;

/// Pairwise (cascade) summation; the result depends only on the order of `v`.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Max, mean and root-mean-square of absolute residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub rms: f64,
}

impl ResidualSummary {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return ResidualSummary::default();
        }
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let sq: Vec<f64> = abs.iter().map(|v| v * v).collect();
        let n = values.len() as f64;
        ResidualSummary {
            count: values.len(),
            max: abs.iter().cloned().fold(0.0, f64::max),
            mean: pairwise_sum(&abs) / n,
            rms: (pairwise_sum(&sq) / n).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }

    #[test]
    fn summary_of_signed_values() {
        let s = ResidualSummary::from_values(&[3.0, -4.0]);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.mean, 3.5);
        assert!((s.rms - 12.5f64.sqrt()).abs() < 1e-15);
    }
}
