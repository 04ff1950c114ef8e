use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::MAX_DIM;

/// Coordinate domain of a chart.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChartDomain {
    /// All of R^n.
    #[default]
    Euclidean,
    /// Axis-aligned box `lo <= x <= hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open half-space `x_axis > 0`.
    HalfSpace { axis: usize },
    /// Flat torus `R^n / (periods Z^n)`, fundamental domain `[0, period)`.
    Torus { periods: Vec<f64> },
}

/// A coordinate chart split as `R^p1 x R^p2`; the first `p1` coordinates span D1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub dim: usize,
    pub p1: usize,
    pub p2: usize,
    pub domain: ChartDomain,
}

impl Chart {
    pub fn new(p1: usize, p2: usize, domain: ChartDomain) -> Result<Self> {
        let chart = Chart {
            dim: p1 + p2,
            p1,
            p2,
            domain,
        };
        chart.validate()?;
        Ok(chart)
    }

    pub fn euclidean(p1: usize, p2: usize) -> Result<Self> {
        Chart::new(p1, p2, ChartDomain::Euclidean)
    }

    /// Upper half-space `x_{n-1} > 0`, the hyperbolic chart.
    pub fn half_space(p1: usize, p2: usize) -> Result<Self> {
        Chart::new(p1, p2, ChartDomain::HalfSpace { axis: p1 + p2 - 1 })
    }

    pub fn torus(p1: usize, p2: usize, period: f64) -> Result<Self> {
        Chart::new(
            p1,
            p2,
            ChartDomain::Torus {
                periods: vec![period; p1 + p2],
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 < 1 || self.p2 < 1 {
            return Err(Error::InvalidParameter(format!(
                "split ({}, {}) must have p1 >= 1 and p2 >= 1",
                self.p1, self.p2
            )));
        }
        if self.p1 + self.p2 != self.dim {
            return Err(Error::InvalidParameter(format!(
                "p1 + p2 = {} does not equal dim {}",
                self.p1 + self.p2,
                self.dim
            )));
        }
        if self.dim > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: MAX_DIM,
                got: self.dim,
            });
        }
        match &self.domain {
            ChartDomain::Euclidean => {}
            ChartDomain::Box { lo, hi } => {
                if lo.len() != self.dim || hi.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: lo.len().min(hi.len()),
                    });
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return Err(Error::InvalidParameter("box requires lo < hi on every axis".into()));
                }
            }
            ChartDomain::HalfSpace { axis } => {
                if *axis >= self.dim {
                    return Err(Error::InvalidParameter(format!("half-space axis {axis} out of range")));
                }
            }
            ChartDomain::Torus { periods } => {
                if periods.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: periods.len(),
                    });
                }
                if periods.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                    return Err(Error::InvalidParameter("torus periods must be strictly positive".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.domain, ChartDomain::Torus { .. })
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match &self.domain {
            ChartDomain::Torus { periods } => Some(periods),
            _ => None,
        }
    }

    /// Checks that `x` lies in the chart domain (always true on a torus).
    pub fn contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let inside = match &self.domain {
            ChartDomain::Euclidean | ChartDomain::Torus { .. } => true,
            ChartDomain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h),
            ChartDomain::HalfSpace { axis } => x[*axis] > 0.0,
        };
        if inside {
            Ok(())
        } else {
            Err(Error::Domain {
                point: x.to_vec(),
                reason: "point lies outside the chart domain".into(),
            })
        }
    }

    /// Index ranges of the D1 and D2 coordinate blocks.
    pub fn blocks(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (0..self.p1, self.p1..self.dim)
    }
}
