//! The SKT system, restriction to the solution manifold and invariance
//! verdicts.

mod algebra;
mod determining;
mod transform;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{Bindings, Coord, Dependent, Expr, Monomial, Poly, Symbol};
use crate::jet::{apply_prolonged, prolong2, total_derivative_unbounded, VectorField};

pub use algebra::{closure_check, commutator, ClosureReport, StructureConstant};
pub use determining::{
    eq10_equations, generate_determining, generate_determining_with, golden_equations, golden_report,
    normalize_equation, DeterminingEquation, DeterminingSystem, GoldenMatch, GoldenReport, DETERMINING_FUNCTIONS,
};
pub use transform::{push_forward, transform_system, PointTransformation, TimeMap, Transformed};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InvarianceError {
    #[error("unknown system parameter '{0}'")]
    UnknownParameter(String),
    #[error("(u, v) block of the transformation is not invertible")]
    NotInvertible,
    #[error("unsupported transformation: {0}")]
    Unsupported(String),
    #[error("image leaves the SKT template: {0}")]
    NotTemplate(String),
}

/// Parameter order used throughout: diffusion, then reaction coefficients.
pub const PARAM_NAMES: [&str; 12] = ["d1", "d2", "d11", "d12", "d21", "d22", "a1", "a2", "b1", "b2", "c1", "c2"];

/// `(u,v) → (v,u)` permutation of [`PARAM_NAMES`].
const SWAP: [usize; 12] = [1, 0, 5, 4, 3, 2, 7, 6, 11, 10, 9, 8];

/// `u_t = [(d1 + d11 u + d12 v) u]_xx + u (a1 − b1 u − c1 v)` and
/// `v_t = [(d2 + d21 u + d22 v) v]_xx + v (a2 − b2 u − c2 v)`.
#[derive(Clone, PartialEq)]
pub struct SKTSystem {
    pub params: [Expr; 12],
}

fn index_of(name: &str) -> Option<usize> {
    PARAM_NAMES.iter().position(|p| *p == name)
}

impl SKTSystem {
    pub fn new(params: [Expr; 12]) -> SKTSystem {
        SKTSystem { params }
    }

    /// All twelve coefficients symbolic.
    pub fn generic() -> SKTSystem {
        SKTSystem::new(PARAM_NAMES.map(Expr::param))
    }

    pub fn zero() -> SKTSystem {
        SKTSystem::new(PARAM_NAMES.map(|_| Expr::zero()))
    }

    /// Unlisted coefficients are zero.
    pub fn from_bindings<'a>(
        values: impl IntoIterator<Item = (&'a str, Expr)>,
    ) -> Result<SKTSystem, InvarianceError> {
        let mut s = SKTSystem::zero();
        for (k, v) in values {
            s.set(k, v)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, name: &str, value: Expr) -> Result<(), InvarianceError> {
        let i = index_of(name).ok_or_else(|| InvarianceError::UnknownParameter(name.to_string()))?;
        self.params[i] = value;
        Ok(())
    }

    pub fn with(mut self, name: &str, value: Expr) -> Result<SKTSystem, InvarianceError> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Expr> {
        index_of(name).map(|i| &self.params[i])
    }

    fn p(&self, name: &str) -> &Expr {
        self.get(name).expect("known parameter")
    }

    /// Diffusion flux potential `(d1 + d11 u + d12 v) u` or its `v` analogue.
    pub fn potential(&self, dep: Dependent) -> Expr {
        let (u, v) = (Expr::u(), Expr::v());
        match dep {
            Dependent::U => (self.p("d1") + self.p("d11") * &u + self.p("d12") * &v) * u,
            Dependent::V => (self.p("d2") + self.p("d21") * &u + self.p("d22") * &v) * v,
        }
    }

    pub fn reaction(&self, dep: Dependent) -> Expr {
        let (u, v) = (Expr::u(), Expr::v());
        match dep {
            Dependent::U => &u * (self.p("a1") - self.p("b1") * &u - self.p("c1") * &v),
            Dependent::V => &v * (self.p("a2") - self.p("b2") * &u - self.p("c2") * &v),
        }
    }

    /// Right-hand side of the evolution equation for `dep`.
    pub fn rhs(&self, dep: Dependent) -> Expr {
        let p = self.potential(dep);
        let pxx = total_derivative_unbounded(&total_derivative_unbounded(&p, Coord::X), Coord::X);
        pxx + self.reaction(dep)
    }

    pub fn s1(&self) -> Expr {
        self.rhs(Dependent::U) - Expr::jet(Dependent::U, 1, 0)
    }

    pub fn s2(&self) -> Expr {
        self.rhs(Dependent::V) - Expr::jet(Dependent::V, 1, 0)
    }

    pub fn equations(&self) -> [Expr; 2] {
        [self.s1(), self.s2()]
    }

    /// Image under `u ↔ v`.
    pub fn swapped(&self) -> SKTSystem {
        SKTSystem::new(SWAP.map(|i| self.params[i].clone()))
    }

    pub fn substitute(&self, b: &Bindings) -> SKTSystem {
        SKTSystem::new(self.params.clone().map(|e| e.substitute(b)))
    }

    pub fn has_reaction(&self) -> bool {
        self.params[6..].iter().any(|e| !e.is_zero())
    }

    /// Parameters the coefficients depend on.
    pub fn free_parameters(&self) -> BTreeSet<Symbol> {
        self.params.iter().flat_map(|e| e.free_symbols()).collect()
    }

    /// True when one equation has no diffusion part at all.
    pub fn is_degenerate(&self) -> bool {
        self.params[0..1].iter().chain(&self.params[2..4]).all(|e| e.is_zero())
            || [1, 4, 5].iter().all(|&i| self.params[i].is_zero())
    }
}

fn paren(e: &Expr) -> String {
    let s = e.to_string();
    if e.as_rational().is_some() || e.as_symbol().is_some() {
        s
    } else {
        format!("({s})")
    }
}

fn linear(terms: &[(&Expr, &str)]) -> String {
    let parts: Vec<String> = terms
        .iter()
        .filter(|(e, _)| !e.is_zero())
        .map(|(e, s)| match (*s, e.is_one()) {
            ("", _) => paren(e),
            (s, true) => s.to_string(),
            (s, false) => format!("{}*{s}", paren(e)),
        })
        .collect();
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

impl fmt::Display for SKTSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, dep) in ["u", "v"].iter().enumerate() {
            let o = k;
            let (d, dd1, dd2) = (&self.params[o], &self.params[2 + 2 * o], &self.params[3 + 2 * o]);
            let (a, b, c) = (&self.params[6 + o], &self.params[8 + o], &self.params[10 + o]);
            let diff = linear(&[(d, ""), (dd1, "u"), (dd2, "v")]);
            write!(f, "{dep}_t = [({diff})*{dep}]_xx")?;
            let minus_b = -b;
            let minus_c = -c;
            let reac = linear(&[(a, ""), (&minus_b, "u"), (&minus_c, "v")]);
            if reac != "0" {
                write!(f, " + {dep}*({reac})")?;
            }
            if k == 0 {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SKTSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Replace jets carrying time derivatives by their values on the manifold
/// `u_t = rhs_u`, `v_t = rhs_v`. Mixed jets `u_tx…` are eliminated through
/// `D_x` of the evolution equations, `u_tt…` through `D_t`.
pub fn manifold_restrict(e: &Expr, sys: &SKTSystem) -> Expr {
    let mut r = Restrictor { sys, cache: BTreeMap::new() };
    r.restrict(e)
}

struct Restrictor<'a> {
    sys: &'a SKTSystem,
    cache: BTreeMap<(Dependent, u8, u8), Expr>,
}

impl Restrictor<'_> {
    fn restrict(&mut self, e: &Expr) -> Expr {
        let jets: Vec<Symbol> = e
            .free_symbols()
            .into_iter()
            .filter(|s| matches!(s.jet_order(), Some((_, t, _)) if t > 0))
            .collect();
        if jets.is_empty() {
            return e.clone();
        }
        let mut b = Bindings::new();
        for j in jets {
            let (dep, t, x) = j.jet_order().unwrap();
            b.insert(j, self.value(dep, t, x));
        }
        e.substitute(&b)
    }

    fn value(&mut self, dep: Dependent, t: u8, x: u8) -> Expr {
        if let Some(v) = self.cache.get(&(dep, t, x)) {
            return v.clone();
        }
        let v = if t == 0 {
            Expr::jet(dep, 0, x)
        } else if x > 0 {
            total_derivative_unbounded(&self.value(dep, t, x - 1), Coord::X)
        } else if t == 1 {
            self.sys.rhs(dep)
        } else {
            let prev = self.value(dep, t - 1, 0);
            let dt = total_derivative_unbounded(&prev, Coord::T);
            self.restrict(&dt)
        };
        self.cache.insert((dep, t, x), v.clone());
        v
    }
}

/// A non-vanishing coefficient of `X₂S_k|ℳ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    /// 1 or 2.
    pub equation: usize,
    pub monomial: Monomial,
    pub coefficient: Expr,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{} [{}]: {}", self.equation, monomial_name(&self.monomial), self.coefficient)
    }
}

/// Render a jet monomial, `1` for the empty one.
pub fn monomial_name(m: &Monomial) -> String {
    if m.is_one() {
        return "1".to_string();
    }
    m.factors()
        .iter()
        .map(|(s, e)| if *e == 1 { s.name().to_string() } else { format!("{}^{e}", s.name()) })
        .collect::<Vec<_>>()
        .join("*")
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub invariant: bool,
    pub witnesses: Vec<Witness>,
    /// Nonzeroness assumptions consumed while normalizing.
    pub assumptions: Vec<Poly>,
}

/// Restricted invariance condition split by jet monomials, one map per
/// equation.
pub fn invariance_conditions(sys: &SKTSystem, x: &VectorField) -> [BTreeMap<Monomial, Expr>; 2] {
    let p = prolong2(x);
    sys.equations().map(|s| {
        let r = manifold_restrict(&apply_prolonged(&p, &s), sys);
        match r.collect_jets() {
            Ok(m) => m.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            Err(_) => BTreeMap::from([(Monomial::one(), r)]),
        }
    })
}

/// Does `x` leave the system invariant on its solution manifold?
pub fn check_invariance(sys: &SKTSystem, x: &VectorField) -> Verdict {
    let mut witnesses = Vec::new();
    let mut assumptions: Vec<Poly> = Vec::new();
    for e in x.coefficients() {
        assumptions.extend(e.assumptions().iter().cloned());
    }
    for (k, coeffs) in invariance_conditions(sys, x).into_iter().enumerate() {
        for (monomial, coefficient) in coeffs {
            assumptions.extend(coefficient.assumptions().iter().cloned());
            witnesses.push(Witness { equation: k + 1, monomial, coefficient });
        }
    }
    assumptions.sort();
    assumptions.dedup();
    Verdict { invariant: witnesses.is_empty(), witnesses, assumptions }
}

/// Image of a vector field under `u ↔ v`.
pub fn swap_field(x: &VectorField) -> VectorField {
    let mut b = Bindings::new();
    b.insert(Symbol::u(), Expr::v());
    b.insert(Symbol::v(), Expr::u());
    let s = |e: &Expr| e.substitute(&b);
    VectorField { xi0: s(&x.xi0), xi1: s(&x.xi1), eta1: s(&x.eta2), eta2: s(&x.eta1), name: x.name.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Context;

    fn sys(pairs: &[(&str, &str)]) -> SKTSystem {
        let ctx = Context::new();
        SKTSystem::from_bindings(pairs.iter().map(|(k, v)| (*k, ctx.parse(v).unwrap()))).unwrap()
    }

    #[test]
    fn generic_rhs_expands() {
        let s = SKTSystem::generic();
        let expected = Context::new()
            .parse(
                "d1*u_xx + d11*(2*u_x^2 + 2*u*u_xx) + d12*(v*u_xx + 2*u_x*v_x + u*v_xx) \
                 + a1*u - b1*u^2 - c1*u*v",
            )
            .unwrap();
        assert_eq!(s.rhs(Dependent::U), expected);
        assert_eq!(s.swapped().swapped(), s);
    }

    #[test]
    fn dlv_restriction() {
        let s = SKTSystem::generic()
            .with("d11", Expr::zero())
            .unwrap()
            .with("d12", Expr::zero())
            .unwrap();
        let r = manifold_restrict(&Expr::jet(Dependent::U, 1, 0), &s);
        assert_eq!(r, Context::new().parse("d1*u_xx + u*(a1 - b1*u - c1*v)").unwrap());
        let x2 = Expr::x().pow(2);
        assert_eq!(manifold_restrict(&x2, &s), x2);
    }

    #[test]
    fn shared_cross_diffusion_cancels() {
        let s = sys(&[("d12", "1"), ("d21", "1"), ("b1", "-1"), ("c2", "-1")]);
        let e = Expr::jet(Dependent::U, 1, 0) - Expr::jet(Dependent::V, 1, 0);
        let r = manifold_restrict(&e, &s);
        assert_eq!(r, Context::new().parse("u^2 - v^2").unwrap());
    }

    #[test]
    fn mixed_jets_restricted() {
        let s = sys(&[("d1", "1")]);
        let r = manifold_restrict(&Expr::jet(Dependent::U, 2, 0), &s);
        assert_eq!(r, Expr::jet(Dependent::U, 0, 4));
        let r = manifold_restrict(&Expr::jet(Dependent::U, 1, 1), &s);
        assert_eq!(r, Expr::jet(Dependent::U, 0, 3));
    }

    #[test]
    fn translations_are_symmetries() {
        let s = SKTSystem::generic();
        assert!(check_invariance(&s, &VectorField::p_t()).invariant);
        assert!(check_invariance(&s, &VectorField::p_x()).invariant);
        let scale = VectorField::new(Expr::zero(), Expr::x(), Expr::zero(), Expr::zero());
        let v = check_invariance(&s, &scale);
        assert!(!v.invariant);
        assert!(!v.witnesses.is_empty());
    }

    #[test]
    fn display() {
        let s = sys(&[("d12", "1"), ("d21", "1"), ("c1", "1"), ("b2", "1")]);
        assert_eq!(s.to_string(), "u_t = [(v)*u]_xx + u*(-1*v)\nv_t = [(u)*v]_xx + v*(-1*u)");
    }
}
