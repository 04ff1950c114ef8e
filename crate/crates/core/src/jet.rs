//! Second-order forward-mode jets.
//!
//! A [`Jet`] carries a value together with its exact gradient and Hessian
//! with respect to the chart coordinates. Expression trees are evaluated
//! over jets, which is how every built-in field gets analytic first and
//! second partials without symbolic manipulation.

use std::ops::{Add, Mul, Neg, Sub};

/// Largest chart dimension supported by the fixed-size jet storage.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    n: usize,
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: [[f64; MAX_DIM]; MAX_DIM],
}

impl Jet {
    pub fn constant(n: usize, value: f64) -> Self {
        debug_assert!(n <= MAX_DIM);
        Jet {
            n,
            value,
            grad: [0.0; MAX_DIM],
            hess: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// The coordinate function `x_index`.
    pub fn coordinate(n: usize, index: usize, value: f64) -> Self {
        let mut jet = Jet::constant(n, value);
        jet.grad[index] = 1.0;
        jet
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.grad[..self.n].to_vec()
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|a| self.hess[a][..self.n].to_vec()).collect()
    }

    /// Composition `f(self)` given `f`, `f'` and `f''` evaluated at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.n;
        let mut out = Jet::constant(n, f0);
        for a in 0..n {
            out.grad[a] = f1 * self.grad[a];
        }
        for a in 0..n {
            for b in 0..n {
                out.hess[a][b] = f1 * self.hess[a][b] + f2 * self.grad[a] * self.grad[b];
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        self.chain(k * self.value, k, 0.0)
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn powi(&self, k: i32) -> Self {
        let v = self.value;
        let kf = k as f64;
        let f1 = if k == 0 { 0.0 } else { kf * v.powi(k - 1) };
        let f2 = if k == 0 || k == 1 {
            0.0
        } else {
            kf * (kf - 1.0) * v.powi(k - 2)
        };
        self.chain(v.powi(k), f1, f2)
    }

    /// Real power; callers guarantee `value > 0`.
    pub fn powf(&self, k: f64) -> Self {
        let v = self.value;
        let p = v.powf(k);
        self.chain(p, k * p / v, k * (k - 1.0) * p / (v * v))
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad[..self.n].iter().all(|g| g.is_finite())
            && self.hess[..self.n]
                .iter()
                .all(|row| row[..self.n].iter().all(|h| h.is_finite()))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.value += rhs.value;
        for a in 0..self.n {
            self.grad[a] += rhs.grad[a];
            for b in 0..self.n {
                self.hess[a][b] += rhs.hess[a][b];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.value = -self.value;
        for a in 0..self.n {
            self.grad[a] = -self.grad[a];
            for b in 0..self.n {
                self.hess[a][b] = -self.hess[a][b];
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.n;
        let mut out = Jet::constant(n, self.value * rhs.value);
        for a in 0..n {
            out.grad[a] = self.value * rhs.grad[a] + rhs.value * self.grad[a];
        }
        for a in 0..n {
            for b in 0..n {
                out.hess[a][b] = self.value * rhs.hess[a][b]
                    + rhs.value * self.hess[a][b]
                    + self.grad[a] * rhs.grad[b]
                    + rhs.grad[a] * self.grad[b];
            }
        }
        out
    }
}
