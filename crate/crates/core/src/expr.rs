//! Composable expression trees over chart coordinates.
//!
//! JSON grammar (one object per node, discriminated by `"op"`):
//!
//! | op               | fields                          | meaning                    |
//! |------------------|---------------------------------|----------------------------|
//! | `coord`          | `index`                         | `x_index` (0-based)        |
//! | `const`          | `value`                         | a real constant            |
//! | `add`            | `args: [..]`                    | sum of the arguments       |
//! | `mul`            | `args: [..]`                    | product of the arguments   |
//! | `neg`            | `arg`                           | `-arg`                     |
//! | `recip`          | `arg`                           | `1/arg`                    |
//! | `pow`            | `arg`, `exp`                    | `arg^exp`                  |
//! | `exp`            | `arg`                           | `e^arg`                    |
//! | `log`            | `arg`                           | natural logarithm          |
//! | `sin`, `cos`     | `arg`                           | trigonometric functions    |
//! | `sum-of-squares` | `indices: [..]`                 | `sum x_i^2` over indices   |
//!
//! Integer exponents are evaluated with `powi` and accept any base; other
//! exponents require a strictly positive base.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::jet::{Jet, MAX_DIM};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Coord(usize),
    Const(f64),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Recip(Box<Expr>),
    Pow(Box<Expr>, f64),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    SumOfSquares(Vec<usize>),
}

impl Expr {
    pub fn coord(index: usize) -> Self {
        Expr::Coord(index)
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn sum(args: Vec<Expr>) -> Self {
        Expr::Add(args)
    }

    pub fn product(args: Vec<Expr>) -> Self {
        Expr::Mul(args)
    }

    pub fn recip(self) -> Self {
        Expr::Recip(Box::new(self))
    }

    pub fn pow(self, exponent: f64) -> Self {
        Expr::Pow(Box::new(self), exponent)
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Log(Box::new(self))
    }

    pub fn sin(self) -> Self {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Cos(Box::new(self))
    }

    pub fn sum_of_squares(indices: Vec<usize>) -> Self {
        Expr::SumOfSquares(indices)
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        let mut used = Vec::new();
        self.collect_coords(&mut used);
        used.into_iter().max()
    }

    /// Sorted, deduplicated coordinate indices the expression depends on.
    pub fn coords_used(&self) -> Vec<usize> {
        let mut used = Vec::new();
        self.collect_coords(&mut used);
        used.sort_unstable();
        used.dedup();
        used
    }

    fn collect_coords(&self, out: &mut Vec<usize>) {
        match self {
            Expr::Coord(i) => out.push(*i),
            Expr::Const(_) => {}
            Expr::Add(args) | Expr::Mul(args) => args.iter().for_each(|a| a.collect_coords(out)),
            Expr::Neg(a)
            | Expr::Recip(a)
            | Expr::Pow(a, _)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sin(a)
            | Expr::Cos(a) => a.collect_coords(out),
            Expr::SumOfSquares(idx) => out.extend(idx.iter().copied()),
        }
    }

    /// Value-only evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = match self {
            Expr::Coord(i) => *x
                .get(*i)
                .ok_or_else(|| Error::domain(x, format!("coordinate x_{i} out of range")))?,
            Expr::Const(c) => *c,
            Expr::Add(args) => {
                let mut s = 0.0;
                for a in args {
                    s += a.eval(x)?;
                }
                s
            }
            Expr::Mul(args) => {
                let mut p = 1.0;
                for a in args {
                    p *= a.eval(x)?;
                }
                p
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Recip(a) => {
                let v = a.eval(x)?;
                if v == 0.0 {
                    return Err(Error::domain(x, "reciprocal of zero"));
                }
                1.0 / v
            }
            Expr::Pow(a, k) => {
                let v = a.eval(x)?;
                pow_value(x, v, *k)?
            }
            Expr::Exp(a) => a.eval(x)?.exp(),
            Expr::Log(a) => {
                let v = a.eval(x)?;
                if v <= 0.0 {
                    return Err(Error::domain(x, "logarithm of a non-positive value"));
                }
                v.ln()
            }
            Expr::Sin(a) => a.eval(x)?.sin(),
            Expr::Cos(a) => a.eval(x)?.cos(),
            Expr::SumOfSquares(idx) => {
                let mut s = 0.0;
                for &i in idx {
                    let xi = *x.get(i).ok_or_else(|| {
                        Error::domain(x, format!("coordinate x_{i} out of range"))
                    })?;
                    s += xi * xi;
                }
                s
            }
        };
        if !v.is_finite() {
            return Err(Error::domain(x, "expression evaluated to a non-finite value"));
        }
        Ok(v)
    }

    /// Evaluation with exact first and second partials.
    pub fn eval_jet(&self, x: &[f64]) -> Result<Jet> {
        let n = x.len();
        if n > MAX_DIM {
            return Err(Error::DimensionMismatch {
                expected: MAX_DIM,
                got: n,
            });
        }
        let j = self.jet_rec(x)?;
        if !j.is_finite() {
            return Err(Error::domain(x, "expression derivatives are not finite"));
        }
        Ok(j)
    }

    fn jet_rec(&self, x: &[f64]) -> Result<Jet> {
        let n = x.len();
        Ok(match self {
            Expr::Coord(i) => {
                if *i >= n {
                    return Err(Error::domain(x, format!("coordinate x_{i} out of range")));
                }
                Jet::coordinate(n, *i, x[*i])
            }
            Expr::Const(c) => Jet::constant(n, *c),
            Expr::Add(args) => {
                let mut acc = Jet::constant(n, 0.0);
                for a in args {
                    acc = acc + a.jet_rec(x)?;
                }
                acc
            }
            Expr::Mul(args) => {
                let mut acc = Jet::constant(n, 1.0);
                for a in args {
                    acc = acc * a.jet_rec(x)?;
                }
                acc
            }
            Expr::Neg(a) => -a.jet_rec(x)?,
            Expr::Recip(a) => {
                let j = a.jet_rec(x)?;
                if j.value == 0.0 {
                    return Err(Error::domain(x, "reciprocal of zero"));
                }
                j.recip()
            }
            Expr::Pow(a, k) => {
                let j = a.jet_rec(x)?;
                pow_value(x, j.value, *k)?;
                if k.fract() == 0.0 && k.abs() < i32::MAX as f64 {
                    j.powi(*k as i32)
                } else {
                    j.powf(*k)
                }
            }
            Expr::Exp(a) => a.jet_rec(x)?.exp(),
            Expr::Log(a) => {
                let j = a.jet_rec(x)?;
                if j.value <= 0.0 {
                    return Err(Error::domain(x, "logarithm of a non-positive value"));
                }
                j.ln()
            }
            Expr::Sin(a) => a.jet_rec(x)?.sin(),
            Expr::Cos(a) => a.jet_rec(x)?.cos(),
            Expr::SumOfSquares(idx) => {
                let mut acc = Jet::constant(n, 0.0);
                for &i in idx {
                    if i >= n {
                        return Err(Error::domain(x, format!("coordinate x_{i} out of range")));
                    }
                    acc.value += x[i] * x[i];
                    acc.grad[i] += 2.0 * x[i];
                    acc.hess[i][i] += 2.0;
                }
                acc
            }
        })
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Coord(i) => json!({"op": "coord", "index": i}),
            Expr::Const(c) => json!({"op": "const", "value": c}),
            Expr::Add(args) => {
                json!({"op": "add", "args": args.iter().map(Expr::to_json).collect::<Vec<_>>()})
            }
            Expr::Mul(args) => {
                json!({"op": "mul", "args": args.iter().map(Expr::to_json).collect::<Vec<_>>()})
            }
            Expr::Neg(a) => json!({"op": "neg", "arg": a.to_json()}),
            Expr::Recip(a) => json!({"op": "recip", "arg": a.to_json()}),
            Expr::Pow(a, k) => json!({"op": "pow", "arg": a.to_json(), "exp": k}),
            Expr::Exp(a) => json!({"op": "exp", "arg": a.to_json()}),
            Expr::Log(a) => json!({"op": "log", "arg": a.to_json()}),
            Expr::Sin(a) => json!({"op": "sin", "arg": a.to_json()}),
            Expr::Cos(a) => json!({"op": "cos", "arg": a.to_json()}),
            Expr::SumOfSquares(idx) => json!({"op": "sum-of-squares", "indices": idx}),
        }
    }

    /// Parses a node, reporting failures with a JSON pointer relative to `pointer`.
    pub fn from_json(value: &Value, pointer: &str) -> Result<Expr> {
        let err = |p: &str, m: &str| Error::Parse {
            pointer: if p.is_empty() { "/".into() } else { p.to_string() },
            message: m.to_string(),
        };
        let obj = value
            .as_object()
            .ok_or_else(|| err(pointer, "expression node must be an object"))?;
        let op = obj
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| err(pointer, "missing string field \"op\""))?;
        let child = |name: &str| -> Result<Expr> {
            let p = format!("{pointer}/{name}");
            let v = obj
                .get(name)
                .ok_or_else(|| err(pointer, &format!("op \"{op}\" requires field \"{name}\"")))?;
            Expr::from_json(v, &p)
        };
        let children = || -> Result<Vec<Expr>> {
            let arr = obj
                .get("args")
                .and_then(Value::as_array)
                .ok_or_else(|| err(pointer, &format!("op \"{op}\" requires array \"args\"")))?;
            arr.iter()
                .enumerate()
                .map(|(i, v)| Expr::from_json(v, &format!("{pointer}/args/{i}")))
                .collect()
        };
        let index = |v: &Value, p: &str| -> Result<usize> {
            v.as_u64()
                .map(|i| i as usize)
                .ok_or_else(|| err(p, "coordinate index must be a non-negative integer"))
        };
        Ok(match op {
            "coord" => {
                let v = obj
                    .get("index")
                    .ok_or_else(|| err(pointer, "op \"coord\" requires field \"index\""))?;
                Expr::Coord(index(v, &format!("{pointer}/index"))?)
            }
            "const" => Expr::Const(
                obj.get("value")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| err(pointer, "op \"const\" requires numeric \"value\""))?,
            ),
            "add" => Expr::Add(children()?),
            "mul" => Expr::Mul(children()?),
            "neg" => Expr::Neg(Box::new(child("arg")?)),
            "recip" => Expr::Recip(Box::new(child("arg")?)),
            "pow" => {
                let k = obj
                    .get("exp")
                    .and_then(Value::as_f64)
                    .ok_or_else(|| err(pointer, "op \"pow\" requires numeric \"exp\""))?;
                Expr::Pow(Box::new(child("arg")?), k)
            }
            "exp" => Expr::Exp(Box::new(child("arg")?)),
            "log" => Expr::Log(Box::new(child("arg")?)),
            "sin" => Expr::Sin(Box::new(child("arg")?)),
            "cos" => Expr::Cos(Box::new(child("arg")?)),
            "sum-of-squares" => {
                let arr = obj.get("indices").and_then(Value::as_array).ok_or_else(|| {
                    err(pointer, "op \"sum-of-squares\" requires array \"indices\"")
                })?;
                Expr::SumOfSquares(
                    arr.iter()
                        .enumerate()
                        .map(|(i, v)| index(v, &format!("{pointer}/indices/{i}")))
                        .collect::<Result<_>>()?,
                )
            }
            other => {
                return Err(err(
                    &format!("{pointer}/op"),
                    &format!("unknown op \"{other}\""),
                ))
            }
        })
    }
}

fn pow_value(x: &[f64], v: f64, k: f64) -> Result<f64> {
    if k.fract() == 0.0 && k.abs() < i32::MAX as f64 {
        if v == 0.0 && k < 0.0 {
            return Err(Error::domain(x, "negative power of zero"));
        }
        Ok(v.powi(k as i32))
    } else {
        if v <= 0.0 {
            return Err(Error::domain(x, "non-integer power of a non-positive value"));
        }
        Ok(v.powf(k))
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Expr::from_json(&v, "").map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match self {
            Expr::Add(mut args) => {
                args.push(rhs);
                Expr::Add(args)
            }
            lhs => Expr::Add(vec![lhs, rhs]),
        }
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        match self {
            Expr::Mul(mut args) => {
                args.push(rhs);
                Expr::Mul(args)
            }
            lhs => Expr::Mul(vec![lhs, rhs]),
        }
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
