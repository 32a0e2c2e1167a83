//! Independent numeric oracle: direct evaluation of an unnormalized [`Ast`]
//! with second-order forward-mode differentiation in `(t, x)`.

use std::collections::BTreeMap;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::ToPrimitive;
use thiserror::Error;

use super::parse::BinOp;
use super::{Ast, Head};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound symbol '{0}'")]
    Unbound(String),
    #[error("guard violated by {what}: value {value}")]
    Guard { what: String, value: f64 },
}

/// Value, gradient and Hessian with respect to `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet2 {
    pub fn constant(v: f64) -> Jet2 {
        Jet2 { v, d: [0.0; 2], h: [[0.0; 2]; 2] }
    }

    /// Independent variable number `k` (0 for `t`, 1 for `x`).
    pub fn var(k: usize, v: f64) -> Jet2 {
        let mut d = [0.0; 2];
        d[k] = 1.0;
        Jet2 { v, d, h: [[0.0; 2]; 2] }
    }

    /// Apply a scalar function given its value and first two derivatives.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let mut out = Jet2::constant(f0);
        for i in 0..2 {
            out.d[i] = f1 * self.d[i];
            for j in 0..2 {
                out.h[i][j] = f2 * self.d[i] * self.d[j] + f1 * self.h[i][j];
            }
        }
        out
    }

    pub fn recip(self) -> Jet2 {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn exp(self) -> Jet2 {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Jet2 {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn powi(self, n: u32) -> Jet2 {
        match n {
            0 => Jet2::constant(1.0),
            1 => self,
            _ => {
                let n = n as i32;
                let nf = n as f64;
                self.chain(
                    self.v.powi(n),
                    nf * self.v.powi(n - 1),
                    nf * (nf - 1.0) * self.v.powi(n - 2),
                )
            }
        }
    }

    pub fn dt(&self) -> f64 {
        self.d[0]
    }

    pub fn dx(&self) -> f64 {
        self.d[1]
    }

    pub fn dxx(&self) -> f64 {
        self.h[1][1]
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        let mut r = self;
        r.v += o.v;
        for i in 0..2 {
            r.d[i] += o.d[i];
            for j in 0..2 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        let mut r = self;
        r.v = -r.v;
        for i in 0..2 {
            r.d[i] = -r.d[i];
            for j in 0..2 {
                r.h[i][j] = -r.h[i][j];
            }
        }
        r
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        let mut r = Jet2::constant(self.v * o.v);
        for i in 0..2 {
            r.d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..2 {
                r.h[i][j] = self.h[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.h[i][j];
            }
        }
        r
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

/// Numeric bindings for the AST oracle. `t` and `x`, when bound, are the
/// differentiation variables.
#[derive(Debug, Clone, Default)]
pub struct AstEnv {
    pub values: BTreeMap<String, f64>,
}

impl AstEnv {
    pub fn new() -> AstEnv {
        AstEnv::default()
    }

    pub fn with(mut self, name: &str, v: f64) -> AstEnv {
        self.values.insert(name.to_string(), v);
        self
    }

    pub fn set(&mut self, name: &str, v: f64) {
        self.values.insert(name.to_string(), v);
    }

    fn lookup(&self, name: &str) -> Option<Jet2> {
        let v = match self.values.get(name) {
            Some(v) => *v,
            None if name == "pi" => std::f64::consts::PI,
            None => return None,
        };
        Some(match name {
            "t" => Jet2::var(0, v),
            "x" => Jet2::var(1, v),
            _ => Jet2::constant(v),
        })
    }
}

/// Evaluate with derivatives. Denominators must satisfy `|d| ≥ guard` and
/// radicands `r ≥ guard`.
pub fn eval_ast_jet(ast: &Ast, env: &AstEnv, guard: f64) -> Result<Jet2, EvalError> {
    eval_ast_jet_guarded(ast, env, guard, guard)
}

/// As [`eval_ast_jet`] with separate bounds for denominators and radicands.
pub fn eval_ast_jet_guarded(ast: &Ast, env: &AstEnv, den_guard: f64, rad_guard: f64) -> Result<Jet2, EvalError> {
    let rec = |a: &Ast| eval_ast_jet_guarded(a, env, den_guard, rad_guard);
    Ok(match ast {
        Ast::Num(n) => Jet2::constant(n.to_f64().unwrap_or(f64::NAN)),
        Ast::Ident { name, .. } => env.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone()))?,
        Ast::Neg(a) => -rec(a)?,
        Ast::Bin { op, lhs, rhs, .. } => {
            let l = rec(lhs)?;
            let r = rec(rhs)?;
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r.v.abs() < den_guard || r.v == 0.0 {
                        return Err(EvalError::Guard { what: format!("denominator {rhs}"), value: r.v });
                    }
                    l / r
                }
            }
        }
        Ast::Pow(a, n) => rec(a)?.powi(*n),
        Ast::Call(h, a) => {
            let x = rec(a)?;
            match h {
                Head::Exp => x.exp(),
                Head::Sin => x.sin(),
                Head::Cos => x.cos(),
                Head::Sqrt => {
                    if x.v < rad_guard {
                        return Err(EvalError::Guard { what: format!("radicand {a}"), value: x.v });
                    }
                    x.sqrt()
                }
            }
        }
    })
}

/// Plain value of an AST.
pub fn eval_ast(ast: &Ast, env: &AstEnv, guard: f64) -> Result<f64, EvalError> {
    eval_ast_jet(ast, env, guard).map(|j| j.v)
}
