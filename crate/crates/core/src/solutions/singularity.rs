//! Zero sets of the quadratic factor `varphi = phi F` of the first family.

use serde::{Deserialize, Serialize};

use super::{Ambient, SolutionFamily, Theorem1Params};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityKind {
    NowhereZero,
    SinglePoint,
    Hyperplane,
    Sphere,
    HyperplaneCap,
    SphereCap,
    Homothety,
    Quadric,
    QuadricCap,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularityReport {
    pub kind: SingularityKind,
    pub ambient: Ambient,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Unit normal `nu` of the hyperplane `nu . x + offset = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    /// A point of the zero set inside the ambient domain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    pub completeness: String,
}

#[derive(Clone, Copy, Debug)]
struct Bound {
    value: f64,
    attained: bool,
}

/// Infimum of `a t^2 + b t` over `R`, or over `t > 0` when `half`.
fn axis_inf(a: f64, b: f64, half: bool) -> Bound {
    let minus_inf = Bound {
        value: f64::NEG_INFINITY,
        attained: false,
    };
    if a > 0.0 {
        let vertex = -b / (2.0 * a);
        if !half || vertex > 0.0 {
            Bound {
                value: -b * b / (4.0 * a),
                attained: true,
            }
        } else {
            Bound {
                value: 0.0,
                attained: false,
            }
        }
    } else if a < 0.0 {
        minus_inf
    } else if b == 0.0 {
        Bound {
            value: 0.0,
            attained: true,
        }
    } else if half && b > 0.0 {
        Bound {
            value: 0.0,
            attained: false,
        }
    } else {
        minus_inf
    }
}

fn axis_sup(a: f64, b: f64, half: bool) -> Bound {
    let m = axis_inf(-a, -b, half);
    Bound {
        value: -m.value,
        attained: m.attained,
    }
}

fn total(params: &Theorem1Params, hyperbolic: bool, axis: fn(f64, f64, bool) -> Bound) -> Bound {
    let n = params.p1 + params.p2;
    let mut value = params.c;
    let mut attained = true;
    for k in 0..n {
        let b = axis(params.a(k), params.b[k], hyperbolic && k == n - 1);
        value += b.value;
        attained &= b.attained;
    }
    Bound { value, attained }
}

fn zero_tolerance(params: &Theorem1Params) -> f64 {
    let s = 1.0 + params.c.abs() + params.b.iter().map(|v| v * v).sum::<f64>();
    1e-12 * s
}

fn vanishes_nowhere(params: &Theorem1Params, hyperbolic: bool) -> bool {
    let tol = zero_tolerance(params);
    let inf = total(params, hyperbolic, axis_inf);
    let sup = total(params, hyperbolic, axis_sup);
    let clear = |b: Bound, sign: f64| sign * b.value > tol || (b.value.abs() <= tol && !b.attained);
    clear(inf, 1.0) || clear(sup, -1.0)
}

/// Minimiser of `sign * (a t^2 + b t)` over `[lo, hi]`.
fn axis_extreme(a: f64, b: f64, lo: f64, hi: f64, sign: f64) -> f64 {
    let q = |t: f64| sign * (a * t * t + b * t);
    let mut best = lo;
    let mut cands = vec![hi];
    if a != 0.0 {
        let v = -b / (2.0 * a);
        if v > lo && v < hi {
            cands.push(v);
        }
    }
    for t in cands {
        if q(t) < q(best) {
            best = t;
        }
    }
    best
}

/// A zero of `varphi` in the domain, by bisection between a non-positive and a non-negative point.
fn zero_witness(params: &Theorem1Params, hyperbolic: bool) -> Option<Vec<f64>> {
    let n = params.p1 + params.p2;
    let extreme = |sign: f64| -> Option<Vec<f64>> {
        let mut r: f64 = 1.0;
        for _ in 0..60 {
            let x: Vec<f64> = (0..n)
                .map(|k| {
                    let lo = if hyperbolic && k == n - 1 { r.recip() * 1e-3 } else { -r };
                    axis_extreme(params.a(k), params.b[k], lo, r, sign)
                })
                .collect();
            if sign * params.varphi(&x) <= 0.0 {
                return Some(x);
            }
            r *= 2.0;
        }
        None
    };
    let lo = extreme(1.0)?;
    let hi = extreme(-1.0)?;
    let at = |t: f64| -> Vec<f64> { lo.iter().zip(&hi).map(|(u, v)| u + t * (v - u)).collect() };
    if params.varphi(&lo) == 0.0 {
        return Some(lo);
    }
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if params.varphi(&at(m)) <= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(at(0.5 * (a + b)))
}

/// Classifies the zero set of `varphi` for a first-family member.
pub fn classify_singularity(family: &SolutionFamily) -> Result<SingularityReport> {
    let params = match family {
        SolutionFamily::Theorem1(p) => p,
        other => {
            return Err(Error::NotImplemented(format!(
                "singularity classification is available for the quadratic family only, not {}",
                other.tag()
            )))
        }
    };
    let n = params.p1 + params.p2;
    if params.b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: params.b.len(),
        });
    }
    let hyperbolic = params.ambient == Ambient::HyperbolicHalfSpace;
    let lambda = params.lambda();
    let (a1, a2) = (params.a1, params.a2);
    let mut report = SingularityReport {
        kind: SingularityKind::NowhereZero,
        ambient: params.ambient,
        lambda,
        center: None,
        radius: None,
        normal: None,
        offset: None,
        witness: None,
        completeness: String::new(),
    };
    if a1 == 0.0 && a2 == 0.0 && params.b.iter().all(|v| *v == 0.0) {
        if params.c == 0.0 {
            return Err(Error::InvalidParameter("varphi vanishes identically".into()));
        }
        report.kind = SingularityKind::Homothety;
        report.completeness = "homothety of the ambient metric".into();
        return Ok(report);
    }
    if vanishes_nowhere(params, hyperbolic) {
        report.completeness = "defined on the whole ambient space, not complete".into();
        return Ok(report);
    }
    report.completeness = "singular along the reported set".into();
    report.witness = zero_witness(params, hyperbolic);
    let b_norm = params.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = zero_tolerance(params);
    if a1 == 0.0 && a2 == 0.0 {
        let horizontal = params.b[..n - 1].iter().all(|v| *v == 0.0);
        report.kind = if hyperbolic && !horizontal {
            SingularityKind::HyperplaneCap
        } else {
            SingularityKind::Hyperplane
        };
        report.normal = Some(params.b.iter().map(|v| v / b_norm).collect());
        report.offset = Some(params.c / b_norm);
        return Ok(report);
    }
    let same_sign = a1 * a2 > 0.0;
    let center = (a1 != 0.0 && a2 != 0.0)
        .then(|| (0..n).map(|k| -params.b[k] / (2.0 * params.a(k))).collect::<Vec<f64>>());
    if same_sign {
        if let Some(ctr) = &center {
            if params.varphi(ctr).abs() <= tol {
                report.kind = SingularityKind::SinglePoint;
                report.witness = Some(ctr.clone());
                report.center = center;
                return Ok(report);
            }
        }
    }
    if a1 == a2 {
        let a = a1;
        let r = lambda.sqrt() / (2.0 * a.abs());
        let ctr = center.unwrap_or_default();
        report.kind = if hyperbolic && ctr[n - 1] - r <= 0.0 {
            SingularityKind::SphereCap
        } else {
            SingularityKind::Sphere
        };
        report.center = Some(ctr);
        report.radius = Some(r);
        return Ok(report);
    }
    report.kind = if hyperbolic {
        SingularityKind::QuadricCap
    } else {
        SingularityKind::Quadric
    };
    report.center = center;
    Ok(report)
}

/// Radius of a sphere kind measured by bisection of `varphi` along rays from the centre.
pub fn ray_radius(params: &Theorem1Params, center: &[f64], direction: &[f64]) -> f64 {
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let at = |t: f64| -> f64 {
        let x: Vec<f64> = center.iter().zip(direction).map(|(c, d)| c + t * d / norm).collect();
        params.varphi(&x)
    };
    let s0 = at(0.0).signum();
    let mut hi = 1.0;
    while at(hi).signum() == s0 && hi < 1e12 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if at(m).signum() == s0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Outcome of the cell-wise zero search of `varphi`.
#[derive(Clone, Debug, Serialize)]
pub struct GridSearch {
    pub cells_per_axis: usize,
    /// Cells whose exact range of `varphi` contains zero.
    pub flagged: usize,
    /// Largest distance from a flagged cell centre to the predicted set, in cell diagonals.
    pub max_distance_ratio: f64,
    /// Whether the cell containing the witness (if inside the grid) was flagged.
    pub witness_hit: Option<bool>,
    pub agrees: bool,
}

/// Exact range of `a t^2 + b t` on `[lo, hi]`.
fn axis_range(a: f64, b: f64, lo: f64, hi: f64) -> (f64, f64) {
    let q = |t: f64| a * t * t + b * t;
    let (mut mn, mut mx) = (q(lo).min(q(hi)), q(lo).max(q(hi)));
    if a != 0.0 {
        let v = -b / (2.0 * a);
        if v > lo && v < hi {
            mn = mn.min(q(v));
            mx = mx.max(q(v));
        }
    }
    (mn, mx)
}

/// Searches `cells^n` cells of `[-half, half]^n` (with `x_n` in `[1e-3, 2 half]` on the
/// half-space) for sign changes of `varphi`, and compares with the classifier's report.
pub fn grid_zero_search(params: &Theorem1Params, report: &SingularityReport, cells: usize, half: f64) -> GridSearch {
    let n = params.p1 + params.p2;
    let hyperbolic = params.ambient == Ambient::HyperbolicHalfSpace;
    let tol = 1e-12;
    let bounds: Vec<(f64, f64)> = (0..n)
        .map(|k| if hyperbolic && k == n - 1 { (1e-3, 2.0 * half) } else { (-half, half) })
        .collect();
    let widths: Vec<f64> = bounds.iter().map(|(l, h)| (h - l) / cells as f64).collect();
    let diag = widths.iter().map(|w| w * w).sum::<f64>().sqrt();
    let ranges: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|k| {
            (0..cells)
                .map(|i| {
                    let lo = bounds[k].0 + i as f64 * widths[k];
                    axis_range(params.a(k), params.b[k], lo, lo + widths[k])
                })
                .collect()
        })
        .collect();
    let distance = |x: &[f64]| -> Option<f64> {
        match report.kind {
            SingularityKind::SinglePoint => {
                let c = report.center.as_ref()?;
                Some(x.iter().zip(c).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
            }
            SingularityKind::Sphere | SingularityKind::SphereCap => {
                let c = report.center.as_ref()?;
                let d = x.iter().zip(c).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                Some((d - report.radius?).abs())
            }
            SingularityKind::Hyperplane | SingularityKind::HyperplaneCap => {
                let nu = report.normal.as_ref()?;
                Some((x.iter().zip(nu).map(|(u, v)| u * v).sum::<f64>() + report.offset?).abs())
            }
            _ => None,
        }
    };
    let total_cells = cells.pow(n as u32);
    let mut flagged = 0usize;
    let mut max_ratio: f64 = 0.0;
    let mut idx = vec![0usize; n];
    let mut centre = vec![0.0; n];
    for _ in 0..total_cells {
        let (mut mn, mut mx) = (params.c, params.c);
        for k in 0..n {
            let (l, h) = ranges[k][idx[k]];
            mn += l;
            mx += h;
        }
        if mn <= tol && mx >= -tol {
            flagged += 1;
            for k in 0..n {
                centre[k] = bounds[k].0 + (idx[k] as f64 + 0.5) * widths[k];
            }
            if let Some(d) = distance(&centre) {
                max_ratio = max_ratio.max(d / diag);
            }
        }
        for k in 0..n {
            idx[k] += 1;
            if idx[k] < cells {
                break;
            }
            idx[k] = 0;
        }
    }
    let witness_hit = report.witness.as_ref().and_then(|w| {
        let inside = w.iter().zip(&bounds).all(|(v, (l, h))| v >= l && v <= h);
        if !inside {
            return None;
        }
        let (mut mn, mut mx) = (params.c, params.c);
        for k in 0..n {
            let i = (((w[k] - bounds[k].0) / widths[k]).floor() as usize).min(cells - 1);
            let (l, h) = ranges[k][i];
            mn += l;
            mx += h;
        }
        Some(mn <= tol && mx >= -tol)
    });
    let agrees = match report.kind {
        SingularityKind::NowhereZero | SingularityKind::Homothety => flagged == 0,
        _ => witness_hit != Some(false) && max_ratio <= 1.0,
    };
    GridSearch {
        cells_per_axis: cells,
        flagged,
        max_distance_ratio: max_ratio,
        witness_hit,
        agrees,
    }
}
