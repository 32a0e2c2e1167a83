//! Symbolic kernel.
//!
//! An [`Expr`] is a canonical rational function `num/den` over interned
//! [`Symbol`]s with exact rational coefficients. Transcendental and algebraic
//! applications (`exp`, `sin`, `cos`, `sqrt`) enter as atom symbols whose
//! arguments are themselves canonical; algebraic atoms are reduced modulo
//! their defining relation (`w² = R` for `w = sqrt(R)`, `s² = 1 − c²` for
//! `s = sin A`) and rationalized out of denominators, so a normalized
//! expression is zero iff its numerator is the zero polynomial.

mod eval;
mod parse;
mod poly;
mod symbol;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use eval::{eval_ast, eval_ast_jet, eval_ast_jet_guarded, AstEnv, EvalError, Jet2};
pub use parse::{parse, parse_ast, Ast, BinOp, Context, ParseError};
pub use poly::{content_in, gcd, primitive_part_in, rat, Coeff, Monomial, Poly};
pub use symbol::{Coord, CoordSet, Dependent, Head, Symbol, SymbolKind};

/// Substitution map.
pub type Bindings = BTreeMap<Symbol, Expr>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("division by an identically zero expression")]
    DivisionByZero,
    #[error("expression is not polynomial in {0}")]
    NotPolynomial(String),
    #[error("denominator became a zero divisor while rationalizing {0}")]
    ZeroDivisor(String),
}

const MAX_RATIONALIZE: usize = 24;

struct Inner {
    num: Poly,
    den: Poly,
    assume: Vec<Poly>,
}

/// Canonical rational expression. Cheap to clone.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.num == other.0.num && self.0.den == other.0.den)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.num.hash(state);
        self.0.den.hash(state);
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.0.num, &self.0.den).cmp(&(&other.0.num, &other.0.den))
    }
}

fn merge_assumptions(a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    if b.is_empty() {
        return a.to_vec();
    }
    if a.is_empty() {
        return b.to_vec();
    }
    let mut out: Vec<Poly> = a.iter().chain(b.iter()).cloned().collect();
    out.sort();
    out.dedup();
    out
}

fn note(assume: &mut Vec<Poly>, p: &Poly) {
    if p.is_constant() {
        return;
    }
    let p = p.primitive_integer();
    if let Err(pos) = assume.binary_search(&p) {
        assume.insert(pos, p);
    }
}

/// The polynomial `R` with `w² = R` for an algebraic atom `w`.
fn relation(w: &Symbol) -> Poly {
    match w.atom_parts() {
        Some((Head::Sqrt, arg)) => arg.num().clone(),
        Some((Head::Sin, arg)) => {
            let c = Symbol::atom(Head::Cos, arg.clone());
            Poly::one().sub(&Poly::symbol(c).pow(2))
        }
        _ => unreachable!("relation of a non-algebraic symbol"),
    }
}

fn top_algebraic(p: &Poly, min_degree: u32) -> Option<Symbol> {
    p.symbols()
        .into_iter()
        .filter(|s| s.is_algebraic() && p.degree(s) >= min_degree)
        .max_by(|a, b| a.rank().cmp(&b.rank()).then_with(|| a.cmp(b)))
}

/// Inner monomial and denominator `d` of an atom `exp(m/d)` as produced by
/// splitting a polynomial argument.
fn exp_unit(s: &Symbol) -> Option<(Monomial, BigInt)> {
    let (Head::Exp, arg) = s.atom_parts()? else {
        return None;
    };
    if !arg.den().is_one() || !arg.num().is_monomial() {
        return None;
    }
    let (m, c) = arg.num().leading()?;
    (c.numer().is_one() && c.denom().is_positive()).then(|| (m.clone(), c.denom().clone()))
}

/// Exponent of each `exp(m/·)` group in one monomial, in units of `m`.
fn exp_values(m: &Monomial) -> BTreeMap<Monomial, BigRational> {
    let mut out: BTreeMap<Monomial, BigRational> = BTreeMap::new();
    for (s, e) in m.factors() {
        if let Some((inner, d)) = exp_unit(s) {
            *out.entry(inner).or_insert_with(BigRational::zero) += BigRational::new(BigInt::from(*e), d);
        }
    }
    out
}

/// Rewrite exponentials of a common monomial `m` to a single atom
/// `exp(m/L)`, `L` the least denominator making every power integral, so
/// that `exp(t/2)·exp(t)` and `exp(3t/2)` coincide.
fn unify_exp(polys: [&Poly; 2]) -> Option<[Poly; 2]> {
    let mut lcm: BTreeMap<Monomial, (BigInt, usize)> = BTreeMap::new();
    for p in polys {
        for (m, _) in p.terms() {
            for (s, _) in m.factors() {
                if let Some((inner, _)) = exp_unit(s) {
                    lcm.entry(inner).or_insert((BigInt::one(), 0)).1 += 1;
                }
            }
            for (inner, r) in exp_values(m) {
                let e = lcm.get_mut(&inner).expect("group seen");
                e.0 = num_integer::Integer::lcm(&e.0, r.denom());
            }
        }
    }
    let stale = |m: &Monomial| {
        m.factors().iter().any(|(s, _)| match exp_unit(s) {
            Some((inner, d)) => d != lcm[&inner].0,
            None => false,
        })
    };
    let needs = polys.iter().any(|p| {
        p.terms().any(|(m, _)| {
            stale(m) || {
                let mut seen = BTreeSet::new();
                m.factors().iter().filter_map(|(s, _)| exp_unit(s)).any(|(inner, _)| !seen.insert(inner))
            }
        })
    });
    if !needs {
        return None;
    }
    let rewrite = |m: &Monomial| -> Monomial {
        let mut pairs: Vec<(Symbol, u32)> = m.factors().iter().filter(|(s, _)| exp_unit(s).is_none()).cloned().collect();
        for (inner, r) in exp_values(m) {
            let l = &lcm[&inner].0;
            let k = (r * BigRational::from_integer(l.clone())).to_integer();
            if k.is_zero() {
                continue;
            }
            let arg = Expr::raw(Poly::term(inner.clone(), BigRational::new(BigInt::one(), l.clone())), Poly::one(), Vec::new());
            pairs.push((Symbol::atom(Head::Exp, arg), k.to_u32().expect("exponent fits")));
        }
        Monomial::from_pairs(pairs)
    };
    Some(polys.map(|p| p.map_monomials(|m| Poly::term(rewrite(m), BigRational::one()))))
}

/// Reduce every algebraic atom to degree at most one, highest rank first.
fn reduce_relations(mut p: Poly) -> Poly {
    while let Some(w) = top_algebraic(&p, 2) {
        let rel = relation(&w);
        let coeffs = p.coefficients_in(&w);
        let wp = Poly::symbol(w);
        let mut rpow = vec![Poly::one()];
        let mut out = Poly::zero();
        for (k, c) in coeffs.into_iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let half = k / 2;
            while rpow.len() <= half {
                let next = rpow.last().unwrap().mul(&rel);
                rpow.push(next);
            }
            let mut term = c.mul(&rpow[half]);
            if k % 2 == 1 {
                term = term.mul(&wp);
            }
            out = out.add(&term);
        }
        p = out;
    }
    p
}

/// Multiply through by conjugates until the denominator is free of algebraic
/// atoms.
fn rationalize(mut num: Poly, mut den: Poly) -> Result<(Poly, Poly), ExprError> {
    for _ in 0..MAX_RATIONALIZE {
        let Some(w) = top_algebraic(&den, 1) else {
            return Ok((num, den));
        };
        let c = den.coefficients_in(&w);
        debug_assert_eq!(c.len(), 2);
        let conj = c[0].sub(&c[1].mul(&Poly::symbol(w.clone())));
        num = reduce_relations(num.mul(&conj));
        den = reduce_relations(den.mul(&conj));
        if den.is_zero() {
            return Err(ExprError::ZeroDivisor(w.name().to_string()));
        }
    }
    Ok((num, den))
}

/// Largest `s` with `s² | n` found by trial division, and the cofactor.
fn square_part(n: &BigInt) -> (BigInt, BigInt) {
    let mut rest = n.clone();
    let mut s = BigInt::one();
    let r = rest.sqrt();
    if &r * &r == rest {
        return (r, BigInt::one());
    }
    let mut k = BigInt::from(2);
    let limit = BigInt::from(1000);
    while k <= limit {
        let k2 = &k * &k;
        if k2 > rest {
            break;
        }
        while (&rest % &k2).is_zero() {
            rest /= &k2;
            s *= &k;
        }
        k += 1;
    }
    let r = rest.sqrt();
    if &r * &r == rest {
        return (s * r, BigInt::one());
    }
    (s, rest)
}

/// Square root of a polynomial when it is a perfect square.
fn poly_sqrt(p: &Poly) -> Option<Poly> {
    let (lm, lc) = p.leading()?;
    if lc.is_negative() {
        return None;
    }
    let root_c = rational_sqrt(lc)?;
    let mut pairs = Vec::new();
    for (s, e) in lm.factors() {
        if e % 2 != 0 {
            return None;
        }
        pairs.push((s.clone(), e / 2));
    }
    let lead = Poly::term(Monomial::from_pairs(pairs), root_c);
    let two_lead = lead.scale(&rat(2));
    let mut q = lead.clone();
    let mut last = lead.leading().unwrap().0.clone();
    for _ in 0..=p.len() + 1 {
        let r = p.sub(&q.mul(&q));
        let Some((rm, _)) = r.leading() else { return Some(q) };
        let (tm, tc) = {
            let t = Poly::term(rm.clone(), r.leading_coeff()).div_exact(&Poly::term(
                two_lead.leading().unwrap().0.clone(),
                two_lead.leading_coeff(),
            ))?;
            let (m, c) = t.leading().unwrap();
            (m.clone(), c.clone())
        };
        if tm >= last {
            return None;
        }
        last = tm.clone();
        q = q.add(&Poly::term(tm, tc));
    }
    None
}

fn rational_sqrt(c: &Coeff) -> Option<Coeff> {
    if c.is_negative() {
        return None;
    }
    let n = c.numer().sqrt();
    let d = c.denom().sqrt();
    if &n * &n == *c.numer() && &d * &d == *c.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

fn exact_trig(head: Head, arg: &Expr) -> Option<Expr> {
    if arg.is_zero() {
        return Some(if head == Head::Sin { Expr::zero() } else { Expr::one() });
    }
    if !arg.den().is_one() || !arg.num().is_monomial() {
        return None;
    }
    let (m, c) = arg.num().leading().unwrap();
    if *m != Monomial::var(Symbol::pi(), 1) {
        return None;
    }
    let twice = c * rat(2);
    if !twice.is_integer() {
        return None;
    }
    let k = twice.to_integer().mod_floor_4();
    let (s, co) = [(0, 1), (1, 0), (0, -1), (-1, 0)][k];
    Some(Expr::int(if head == Head::Sin { s } else { co }))
}

trait ModFloor4 {
    fn mod_floor_4(&self) -> usize;
}

impl ModFloor4 for BigInt {
    fn mod_floor_4(&self) -> usize {
        use num_integer::Integer;
        self.mod_floor(&BigInt::from(4)).to_usize().unwrap()
    }
}

impl Expr {
    fn raw(num: Poly, den: Poly, assume: Vec<Poly>) -> Expr {
        Expr(Arc::new(Inner { num, den, assume }))
    }

    /// Normalize `num/den` into canonical form.
    pub fn from_parts(num: Poly, den: Poly) -> Result<Expr, ExprError> {
        Expr::build(num, den, Vec::new())
    }

    fn build(num: Poly, den: Poly, mut assume: Vec<Poly>) -> Result<Expr, ExprError> {
        if den.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let (num, den) = match unify_exp([&num, &den]) {
            Some([n, d]) => (n, d),
            None => (num, den),
        };
        let mut num = reduce_relations(num);
        let mut den = reduce_relations(den);
        if den.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        if num.is_zero() {
            return Ok(Expr::raw(Poly::zero(), Poly::one(), assume));
        }
        if top_algebraic(&den, 1).is_some() {
            let (n, d) = rationalize(num, den)?;
            num = n;
            den = d;
        }
        if !den.is_constant() {
            let g = gcd(&num, &den);
            if !g.is_constant() {
                note(&mut assume, &g);
                num = num.div_exact(&g).expect("gcd divides numerator");
                den = den.div_exact(&g).expect("gcd divides denominator");
            }
        }
        let lc = den.leading_coeff();
        if !lc.is_one() {
            let k = lc.recip();
            num = num.scale(&k);
            den = den.scale(&k);
        }
        Ok(Expr::raw(num, den, assume))
    }

    fn from_poly_unchecked(num: Poly, assume: Vec<Poly>) -> Expr {
        let num = match unify_exp([&num, &Poly::one()]) {
            Some([n, _]) => n,
            None => num,
        };
        Expr::raw(num, Poly::one(), assume)
    }

    /// A polynomial, reduced modulo atom relations.
    pub fn from_poly(p: Poly) -> Expr {
        Expr::from_poly_unchecked(reduce_relations(p), Vec::new())
    }

    pub fn zero() -> Expr {
        Expr::raw(Poly::zero(), Poly::one(), Vec::new())
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::raw(Poly::int(n), Poly::one(), Vec::new())
    }

    pub fn rational(n: i64, d: i64) -> Expr {
        Expr::constant(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn constant(c: Coeff) -> Expr {
        Expr::raw(Poly::constant(c), Poly::one(), Vec::new())
    }

    pub fn symbol(s: &Symbol) -> Expr {
        Expr::raw(Poly::symbol(s.clone()), Poly::one(), Vec::new())
    }

    pub fn t() -> Expr {
        Expr::symbol(&Symbol::t())
    }

    pub fn x() -> Expr {
        Expr::symbol(&Symbol::x())
    }

    pub fn u() -> Expr {
        Expr::symbol(&Symbol::u())
    }

    pub fn v() -> Expr {
        Expr::symbol(&Symbol::v())
    }

    pub fn param(name: &str) -> Expr {
        Expr::symbol(&Symbol::param(name))
    }

    pub fn jet(dep: Dependent, t: u8, x: u8) -> Expr {
        Expr::symbol(&Symbol::jet(dep, t, x))
    }

    pub fn pi() -> Expr {
        Expr::symbol(&Symbol::pi())
    }

    pub fn num(&self) -> &Poly {
        &self.0.num
    }

    pub fn den(&self) -> &Poly {
        &self.0.den
    }

    /// Nonzero-ness assumptions consumed while building this expression,
    /// as primitive integer polynomials.
    pub fn assumptions(&self) -> &[Poly] {
        &self.0.assume
    }

    pub fn without_assumptions(&self) -> Expr {
        if self.0.assume.is_empty() {
            return self.clone();
        }
        Expr::raw(self.0.num.clone(), self.0.den.clone(), Vec::new())
    }

    /// Attach an explicit nonzero assumption.
    pub fn assuming(&self, p: &Poly) -> Expr {
        let mut a = self.0.assume.clone();
        note(&mut a, p);
        Expr::raw(self.0.num.clone(), self.0.den.clone(), a)
    }

    pub fn is_zero(&self) -> bool {
        self.0.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.den.is_one() && self.0.num.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.0.den.is_one()
    }

    /// Rational value when the expression is a constant number.
    pub fn as_rational(&self) -> Option<Coeff> {
        if !self.0.den.is_one() {
            return None;
        }
        self.0.num.constant_value()
    }

    pub fn as_symbol(&self) -> Option<Symbol> {
        if !self.0.den.is_one() || !self.0.num.is_monomial() {
            return None;
        }
        let (m, c) = self.0.num.leading().unwrap();
        match m.factors() {
            [(s, 1)] if c.is_one() => Some(s.clone()),
            _ => None,
        }
    }

    /// Top-level symbols of numerator and denominator (atoms count as one
    /// symbol each).
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut s = self.0.num.symbols();
        s.extend(self.0.den.symbols());
        s
    }

    /// All symbols, descending into atom arguments.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for s in self.symbols() {
            if let Some((_, arg)) = s.atom_parts() {
                out.extend(arg.free_symbols());
            }
            out.insert(s);
        }
        out
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.free_symbols().contains(s)
    }

    pub fn depends_on_any(&self, pred: impl Fn(&Symbol) -> bool) -> bool {
        self.free_symbols().iter().any(pred)
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        Expr::one().checked_div(self)
    }

    pub fn checked_div(&self, other: &Expr) -> Result<Expr, ExprError> {
        if other.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        let mut assume = merge_assumptions(&self.0.assume, &other.0.assume);
        note(&mut assume, &other.0.num);
        if let Some(c) = other.as_rational() {
            let k = c.recip();
            return Ok(Expr::raw(self.0.num.scale(&k), self.0.den.clone(), assume));
        }
        Expr::build(self.0.num.mul(&other.0.den), self.0.den.mul(&other.0.num), assume)
    }

    pub fn pow(&self, e: i32) -> Expr {
        if e == 0 {
            return Expr::one();
        }
        if e < 0 {
            return self.recip().expect("negative power of zero").pow(-e);
        }
        let e = e as u32;
        if self.0.den.is_one() && top_algebraic(&self.0.num, 1).is_none() {
            return Expr::from_poly_unchecked(self.0.num.pow(e), self.0.assume.clone());
        }
        let mut result = Expr::one();
        let mut base = self.clone();
        let mut k = e;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn scale(&self, c: &Coeff) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr::raw(self.0.num.scale(c), self.0.den.clone(), self.0.assume.clone())
    }

    fn add_impl(&self, other: &Expr, negate: bool) -> Expr {
        let assume = merge_assumptions(&self.0.assume, &other.0.assume);
        let on = if negate { other.0.num.neg() } else { other.0.num.clone() };
        if self.0.den == other.0.den {
            if self.0.den.is_one() {
                return Expr::from_poly_unchecked(self.0.num.add(&on), assume);
            }
            return Expr::build(self.0.num.add(&on), self.0.den.clone(), assume)
                .expect("nonzero denominator");
        }
        let g = gcd(&self.0.den, &other.0.den);
        let (d1, d2) = if g.is_one() {
            (self.0.den.clone(), other.0.den.clone())
        } else {
            (
                self.0.den.div_exact(&g).unwrap(),
                other.0.den.div_exact(&g).unwrap(),
            )
        };
        let num = self.0.num.mul(&d2).add(&on.mul(&d1));
        let den = self.0.den.mul(&d2);
        Expr::build(num, den, assume).expect("nonzero denominator")
    }

    fn mul_impl(&self, other: &Expr) -> Expr {
        let assume = merge_assumptions(&self.0.assume, &other.0.assume);
        if self.is_zero() || other.is_zero() {
            return Expr::raw(Poly::zero(), Poly::one(), assume);
        }
        if self.0.den.is_one() && other.0.den.is_one() {
            let p = self.0.num.mul(&other.0.num);
            let algebraic = top_algebraic(&self.0.num, 1).is_some() && top_algebraic(&other.0.num, 1).is_some();
            let p = if algebraic { reduce_relations(p) } else { p };
            return Expr::from_poly_unchecked(p, assume);
        }
        Expr::build(
            self.0.num.mul(&other.0.num),
            self.0.den.mul(&other.0.den),
            assume,
        )
        .expect("nonzero denominator")
    }

    /// A polynomial argument splits into one atom per monomial, so
    /// `exp(a)·exp(b) = exp(a + b)` holds structurally for polynomial `a, b`.
    /// A non-polynomial argument stays a single atom and is not merged with
    /// other exponentials.
    pub fn exp(arg: &Expr) -> Expr {
        let arg = arg.without_assumptions();
        if arg.is_polynomial() {
            let mut num = Poly::one();
            let mut den = Poly::one();
            for (m, c) in arg.num().terms() {
                let q = BigRational::new(BigInt::one(), c.denom().clone());
                let inner = Expr::from_poly_unchecked(Poly::term(m.clone(), q), Vec::new());
                let atom = Poly::symbol(Symbol::atom(Head::Exp, inner));
                let p = c.numer().to_i64().expect("exp exponent out of range");
                if p > 0 {
                    num = num.mul(&atom.pow(p as u32));
                } else {
                    den = den.mul(&atom.pow((-p) as u32));
                }
            }
            return Expr::build(num, den, Vec::new()).expect("exp is nonzero");
        }
        if arg.num().leading_coeff().is_negative() {
            let atom = Symbol::atom(Head::Exp, -&arg);
            return Expr::build(Poly::one(), Poly::symbol(atom), Vec::new()).unwrap();
        }
        Expr::symbol(&Symbol::atom(Head::Exp, arg))
    }

    pub fn sin(arg: &Expr) -> Expr {
        let arg = arg.without_assumptions();
        if let Some(e) = exact_trig(Head::Sin, &arg) {
            return e;
        }
        if arg.num().leading_coeff().is_negative() {
            return -Expr::symbol(&Symbol::atom(Head::Sin, -&arg));
        }
        Expr::symbol(&Symbol::atom(Head::Sin, arg))
    }

    pub fn cos(arg: &Expr) -> Expr {
        let arg = arg.without_assumptions();
        if let Some(e) = exact_trig(Head::Cos, &arg) {
            return e;
        }
        if arg.num().leading_coeff().is_negative() {
            return Expr::symbol(&Symbol::atom(Head::Cos, -&arg));
        }
        Expr::symbol(&Symbol::atom(Head::Cos, arg))
    }

    /// `sin(arg)/cos(arg)`.
    pub fn tan(arg: &Expr) -> Expr {
        Expr::sin(arg).checked_div(&Expr::cos(arg)).expect("cos of argument is zero")
    }

    /// Principal square root as an algebraic atom. A rational radicand
    /// `N/D` is rewritten `sqrt(N·D)/D`, which is the principal branch where
    /// `D > 0`.
    pub fn sqrt(arg: &Expr) -> Expr {
        let arg = arg.without_assumptions();
        if arg.is_zero() {
            return Expr::zero();
        }
        let radicand = arg.num().mul(arg.den());
        let prim = radicand.primitive_integer();
        let c = radicand.leading_coeff() / prim.leading_coeff();
        let (sign, c) = if c.is_negative() { (-1, -c) } else { (1, c) };
        let (s, f) = square_part(&(c.numer() * c.denom()));
        let outer = BigRational::new(s, c.denom().clone());
        let inner = prim.scale(&BigRational::from_integer(f * BigInt::from(sign)));
        let root = if let Some(r) = poly_sqrt(&inner) {
            Expr::from_poly_unchecked(r, Vec::new())
        } else {
            Expr::symbol(&Symbol::atom(
                Head::Sqrt,
                Expr::from_poly_unchecked(inner, Vec::new()),
            ))
        };
        let den = Expr::from_poly_unchecked(arg.den().clone(), Vec::new());
        root.scale(&outer).checked_div(&den).expect("denominator is nonzero")
    }

    pub fn apply(head: Head, arg: &Expr) -> Expr {
        match head {
            Head::Exp => Expr::exp(arg),
            Head::Sin => Expr::sin(arg),
            Head::Cos => Expr::cos(arg),
            Head::Sqrt => Expr::sqrt(arg),
        }
    }

    /// Partial derivative with respect to `s`, all other symbols independent.
    pub fn diff(&self, s: &Symbol) -> Expr {
        let dn = poly_diff(&self.0.num, s);
        if self.0.den.is_one() {
            return dn.with_assumptions_of(self);
        }
        let dd = poly_diff(&self.0.den, s);
        let n = Expr::from_poly_unchecked(self.0.num.clone(), Vec::new());
        let d = Expr::from_poly_unchecked(self.0.den.clone(), Vec::new());
        let top = &(&dn * &d) - &(&n * &dd);
        top.checked_div(&d.pow(2))
            .expect("denominator is nonzero")
            .with_assumptions_of(self)
    }

    fn with_assumptions_of(&self, other: &Expr) -> Expr {
        if other.0.assume.is_empty() {
            return self.clone();
        }
        Expr::raw(
            self.0.num.clone(),
            self.0.den.clone(),
            merge_assumptions(&self.0.assume, &other.0.assume),
        )
    }

    /// Simultaneous substitution followed by one normalization.
    pub fn substitute(&self, bindings: &Bindings) -> Expr {
        self.try_substitute(bindings).expect("substitution produced a zero denominator")
    }

    pub fn try_substitute(&self, bindings: &Bindings) -> Result<Expr, ExprError> {
        if bindings.is_empty() {
            return Ok(self.clone());
        }
        let mut cache: HashMap<Symbol, Option<Expr>> = HashMap::new();
        let (n1, d1, mut assume) = subst_poly(&self.0.num, bindings, &mut cache)?;
        if self.0.den.is_one() {
            assume = merge_assumptions(&assume, &self.0.assume);
            return Expr::build(n1, d1, assume);
        }
        let (n2, d2, a2) = subst_poly(&self.0.den, bindings, &mut cache)?;
        let mut assume = merge_assumptions(&merge_assumptions(&assume, &a2), &self.0.assume);
        if n2.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        note(&mut assume, &n2);
        Expr::build(n1.mul(&d2), d1.mul(&n2), assume)
    }

    pub fn subs(&self, s: &Symbol, value: &Expr) -> Expr {
        let mut b = Bindings::new();
        b.insert(s.clone(), value.clone());
        self.substitute(&b)
    }

    /// Replace every occurrence of the opaque function `name` (and its
    /// derivatives) by `value`, differentiated accordingly.
    pub fn substitute_function(&self, name: &str, value: &Expr) -> Expr {
        let mut b = Bindings::new();
        for s in self.free_symbols() {
            if let SymbolKind::Function { name: n, index, .. } = s.kind() {
                if n == name {
                    let mut e = value.clone();
                    for c in Coord::ALL {
                        for _ in 0..index[c.index()] {
                            e = e.diff(&c.symbol());
                        }
                    }
                    b.insert(s.clone(), e);
                }
            }
        }
        self.substitute(&b)
    }

    /// Split by monomials in the symbols selected by `pred`.
    pub fn collect(&self, pred: impl Fn(&Symbol) -> bool) -> Result<BTreeMap<Monomial, Expr>, ExprError> {
        if let Some(s) = self.0.den.symbols().into_iter().find(|s| pred(s)) {
            return Err(ExprError::NotPolynomial(s.name().to_string()));
        }
        let mut out = BTreeMap::new();
        for (m, c) in self.0.num.split_by(&pred) {
            let e = Expr::build(c, self.0.den.clone(), self.0.assume.clone())?;
            out.insert(m, e);
        }
        Ok(out)
    }

    /// Coefficients of `e` with respect to derivative jet variables (`u_x`,
    /// `v_xx`, ...). The key `Monomial::one()` holds the jet-free part.
    pub fn collect_jets(&self) -> Result<BTreeMap<Monomial, Expr>, ExprError> {
        self.collect(|s| s.is_derivative_jet())
    }

    /// Coefficients with respect to an explicit list of symbols.
    pub fn collect_jet(&self, jets: &[Symbol]) -> Result<BTreeMap<Monomial, Expr>, ExprError> {
        self.collect(|s| jets.contains(s))
    }

    /// Numeric value with every symbol looked up through `lookup`.
    pub fn eval_with(&self, lookup: &dyn Fn(&Symbol) -> Option<f64>, guard: f64) -> Result<f64, EvalError> {
        let mut cache = HashMap::new();
        let n = eval_poly(&self.0.num, lookup, guard, &mut cache)?;
        if self.0.den.is_one() {
            return Ok(n);
        }
        let d = eval_poly(&self.0.den, lookup, guard, &mut cache)?;
        if d.abs() < guard || d == 0.0 {
            return Err(EvalError::Guard { what: format!("denominator {}", render_poly(&self.0.den)), value: d });
        }
        Ok(n / d)
    }

    /// Numeric value with bindings keyed by symbol name.
    pub fn eval_numeric(&self, bindings: &BTreeMap<String, f64>, guard: f64) -> Result<f64, EvalError> {
        self.eval_with(&|s: &Symbol| bindings.get(s.name()).copied(), guard)
    }
}

fn eval_poly(
    p: &Poly,
    lookup: &dyn Fn(&Symbol) -> Option<f64>,
    guard: f64,
    cache: &mut HashMap<Symbol, f64>,
) -> Result<f64, EvalError> {
    p.eval_f64(|s| {
        if let Some(v) = cache.get(s) {
            return Ok(*v);
        }
        let v = eval_symbol(s, lookup, guard)?;
        cache.insert(s.clone(), v);
        Ok(v)
    })
}

fn eval_symbol(s: &Symbol, lookup: &dyn Fn(&Symbol) -> Option<f64>, guard: f64) -> Result<f64, EvalError> {
    if let Some(v) = lookup(s) {
        return Ok(v);
    }
    match s.kind() {
        SymbolKind::Pi => Ok(std::f64::consts::PI),
        SymbolKind::Atom { head, arg } => {
            let a = arg.eval_with(lookup, guard)?;
            match head {
                Head::Exp => Ok(a.exp()),
                Head::Sin => Ok(a.sin()),
                Head::Cos => Ok(a.cos()),
                Head::Sqrt => {
                    if a < guard {
                        return Err(EvalError::Guard { what: format!("radicand {arg}"), value: a });
                    }
                    Ok(a.sqrt())
                }
            }
        }
        _ => Err(EvalError::Unbound(s.name().to_string())),
    }
}

fn symbol_diff(sym: &Symbol, s: &Symbol) -> Expr {
    if sym == s {
        return Expr::one();
    }
    match sym.kind() {
        SymbolKind::Function { name, deps, index } => match s.coord() {
            Some(c) if deps.contains(c) => {
                let mut idx = *index;
                idx[c.index()] += 1;
                Expr::symbol(&Symbol::function(name, *deps, idx))
            }
            _ => Expr::zero(),
        },
        SymbolKind::Atom { head, arg } => {
            let da = arg.diff(s);
            if da.is_zero() {
                return Expr::zero();
            }
            match head {
                Head::Exp => &da * &Expr::symbol(sym),
                Head::Sin => &da * &Expr::cos(arg),
                Head::Cos => -(&da * &Expr::sin(arg)),
                Head::Sqrt => (&da * &Expr::symbol(sym))
                    .checked_div(&arg.scale(&rat(2)))
                    .expect("radicand is nonzero"),
            }
        }
        _ => Expr::zero(),
    }
}

fn poly_diff(p: &Poly, s: &Symbol) -> Expr {
    let mut acc = Expr::zero();
    for sym in p.symbols() {
        let ds = symbol_diff(&sym, s);
        if ds.is_zero() {
            continue;
        }
        let part = Expr::from_poly_unchecked(p.derivative(&sym), Vec::new());
        acc = &acc + &(&part * &ds);
    }
    acc
}

/// Value of a symbol under substitution, or `None` when it is unchanged.
fn subst_symbol(s: &Symbol, b: &Bindings, cache: &mut HashMap<Symbol, Option<Expr>>) -> Option<Expr> {
    if let Some(v) = cache.get(s) {
        return v.clone();
    }
    let v = if let Some(e) = b.get(s) {
        Some(e.clone())
    } else if let Some((head, arg)) = s.atom_parts() {
        let touched = arg.free_symbols().iter().any(|f| b.contains_key(f));
        touched.then(|| Expr::apply(head, &arg.substitute(b)))
    } else {
        None
    };
    cache.insert(s.clone(), v.clone());
    v
}

/// Substitute into a polynomial over a common denominator.
fn subst_poly(
    p: &Poly,
    b: &Bindings,
    cache: &mut HashMap<Symbol, Option<Expr>>,
) -> Result<(Poly, Poly, Vec<Poly>), ExprError> {
    let mut values: BTreeMap<Symbol, (Expr, u32)> = BTreeMap::new();
    for s in p.symbols() {
        if let Some(v) = subst_symbol(&s, b, cache) {
            let e = p.degree(&s);
            values.insert(s, (v, e));
        }
    }
    if values.is_empty() {
        return Ok((p.clone(), Poly::one(), Vec::new()));
    }
    let mut assume = Vec::new();
    let mut den = Poly::one();
    // Powers n^k and d^(E-k) for each substituted symbol.
    let mut npow: BTreeMap<Symbol, Vec<Poly>> = BTreeMap::new();
    let mut dpow: BTreeMap<Symbol, Vec<Poly>> = BTreeMap::new();
    for (s, (v, e)) in &values {
        assume = merge_assumptions(&assume, v.assumptions());
        let mut ns = vec![Poly::one()];
        for _ in 0..*e {
            let next = reduce_relations(ns.last().unwrap().mul(v.num()));
            ns.push(next);
        }
        let mut ds = vec![Poly::one()];
        if !v.den().is_one() {
            for _ in 0..*e {
                let next = ds.last().unwrap().mul(v.den());
                ds.push(next);
            }
            den = den.mul(ds.last().unwrap());
        }
        npow.insert(s.clone(), ns);
        dpow.insert(s.clone(), ds);
    }
    let mut num = Poly::zero();
    for (m, c) in p.terms() {
        let mut kept = Vec::new();
        let mut term = Poly::one();
        let mut seen: BTreeSet<&Symbol> = BTreeSet::new();
        for (s, e) in m.factors() {
            if let Some(ns) = npow.get(s) {
                seen.insert(s);
                term = term.mul(&ns[*e as usize]);
                let ds = &dpow[s];
                if ds.len() > 1 {
                    term = term.mul(&ds[ds.len() - 1 - *e as usize]);
                }
            } else {
                kept.push((s.clone(), *e));
            }
        }
        for (s, ds) in &dpow {
            if ds.len() > 1 && !seen.contains(s) {
                term = term.mul(ds.last().unwrap());
            }
        }
        term = term.mul(&Poly::term(Monomial::from_pairs(kept), c.clone()));
        num = num.add(&term);
    }
    Ok((num, den, assume))
}

macro_rules! binop {
    ($tr:ident, $f:ident, $body:expr) => {
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                $body(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                $body(&self, &rhs)
            }
        }
        impl $tr<&Expr> for Expr {
            type Output = Expr;
            fn $f(self, rhs: &Expr) -> Expr {
                $body(&self, rhs)
            }
        }
        impl $tr<Expr> for &Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                $body(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a: &Expr, b: &Expr| a.add_impl(b, false));
binop!(Sub, sub, |a: &Expr, b: &Expr| a.add_impl(b, true));
binop!(Mul, mul, |a: &Expr, b: &Expr| a.mul_impl(b));
binop!(Div, div, |a: &Expr, b: &Expr| a.checked_div(b).expect("division by zero"));

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::raw(self.0.num.neg(), self.0.den.clone(), self.0.assume.clone())
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<&Symbol> for Expr {
    fn from(s: &Symbol) -> Expr {
        Expr::symbol(s)
    }
}

impl Default for Expr {
    fn default() -> Expr {
        Expr::zero()
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        iter.fold(Expr::zero(), |a, b| a + b)
    }
}

fn render_coeff(c: &Coeff) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn render_monomial(m: &Monomial) -> String {
    let mut out = String::new();
    for (k, (s, e)) in m.factors().iter().enumerate() {
        if k > 0 {
            out.push('*');
        }
        out.push_str(s.name());
        if *e > 1 {
            out.push('^');
            out.push_str(&e.to_string());
        }
    }
    out
}

/// Render a polynomial in the input grammar, leading term first.
pub fn render_poly(p: &Poly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (m, c)) in p.terms().rev().enumerate() {
        let neg = c.is_negative();
        let a = c.abs();
        let body = if m.is_one() {
            render_coeff(&a)
        } else if a.is_one() {
            render_monomial(m)
        } else {
            format!("{}*{}", render_coeff(&a), render_monomial(m))
        };
        if k == 0 {
            if neg {
                // `-x^2` would parse as `(-x)^2`.
                if a.is_one() && !m.is_one() {
                    out.push_str("-1*");
                } else {
                    out.push('-');
                }
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.den.is_one() {
            f.write_str(&render_poly(&self.0.num))
        } else {
            write!(f, "({})/({})", render_poly(&self.0.num), render_poly(&self.0.den))
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn cancellation_records_assumption() {
        let e = p("(u-v)/(u-v)");
        assert!(e.is_one());
        assert_eq!(e.assumptions().len(), 1);
        assert_eq!(render_poly(&e.assumptions()[0]), "u - v");
    }

    #[test]
    fn atom_relations() {
        assert_eq!(p("exp(x)*exp(-x) + sin(x)^2 + cos(x)^2"), Expr::int(2));
        assert_eq!(p("exp(2*a*t)"), p("exp(a*t)^2"));
        assert_eq!(p("exp(a1*t - a2*t)*exp(a2*t)"), p("exp(a1*t)"));
        assert_eq!(p("sqrt(x)^3"), p("x*sqrt(x)"));
        assert_eq!(p("sqrt(4*x^2 + 8*x + 4)"), p("2*x + 2"));
        assert_eq!(p("sqrt(8*b)"), p("2*sqrt(2*b)"));
        assert_eq!(p("sin(-x)"), p("-1*sin(x)"));
        assert_eq!(p("cos(pi)"), Expr::int(-1));
        assert_eq!(p("sin(pi/2)"), Expr::one());
    }

    #[test]
    fn rationalized_denominator() {
        let e = p("1/(1 + sqrt(x))");
        assert!(e.den().symbols().iter().all(|s| !s.is_algebraic()));
        assert_eq!(&e * &p("1 + sqrt(x)"), Expr::one());
    }

    #[test]
    fn derivatives() {
        assert_eq!(p("u*v").diff(&Symbol::u()), p("v"));
        assert_eq!(p("exp(a*t)").diff(&Symbol::t()), p("a*exp(a*t)"));
        let r = p("sqrt(x^2 + 1)");
        assert_eq!(r.diff(&Symbol::x()), p("x/sqrt(x^2 + 1)"));
        assert_eq!(Expr::tan(&Expr::x()).diff(&Symbol::x()), p("1/cos(x)^2"));
    }

    #[test]
    fn substitution() {
        let e = p("u^2 - v^2");
        assert!(e.subs(&Symbol::u(), &Expr::v()).is_zero());
        let e = p("exp(x)*sin(x)");
        assert_eq!(e.subs(&Symbol::x(), &Expr::pi()), Expr::zero());
        let f = p("1/(u - v)");
        assert_eq!(f.subs(&Symbol::u(), &p("v + 1/x")), p("x"));
    }

    #[test]
    fn render_round_trip() {
        for s in [
            "-x^2 + 3/2*u*v - 7",
            "(exp(x) - 1)/(u - v)",
            "-1*sqrt(alpha1^2 + 4*p*lambda1*exp(x))",
            "sin(x)/cos(x)",
        ] {
            let e = p(s);
            assert_eq!(p(&e.to_string()), e, "{s} -> {e}");
        }
    }

    #[test]
    fn collect_first_order_jets() {
        let e = p("2*u_x*v_x + u_xx");
        let c = e.collect_jets().unwrap();
        assert_eq!(c.len(), 2);
        let m = Monomial::from_pairs(vec![(Symbol::jet(Dependent::U, 0, 1), 1), (Symbol::jet(Dependent::V, 0, 1), 1)]);
        assert_eq!(c[&m], Expr::int(2));
        assert!(Expr::zero().collect_jets().unwrap().is_empty());
    }
}
