//! Sparse multivariate polynomials over ℚ in interned symbols.
//!
//! Terms are kept in a `BTreeMap` under the lexicographic monomial order
//! induced by [`Symbol`] ordering, so the leading term is the last entry.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use smallvec::SmallVec;

use super::Symbol;

pub type Coeff = BigRational;

/// Power product of symbols, sorted by symbol, exponents nonzero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(SmallVec<[(Symbol, u32); 4]>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(SmallVec::new())
    }

    pub fn var(s: Symbol, e: u32) -> Monomial {
        if e == 0 {
            return Monomial::one();
        }
        let mut v = SmallVec::new();
        v.push((s, e));
        Monomial(v)
    }

    pub fn from_pairs(mut pairs: Vec<(Symbol, u32)>) -> Monomial {
        pairs.retain(|(_, e)| *e > 0);
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: SmallVec<[(Symbol, u32); 4]> = SmallVec::new();
        for (s, e) in pairs {
            match out.last_mut() {
                Some((ls, le)) if *ls == s => *le += e,
                _ => out.push((s, e)),
            }
        }
        Monomial(out)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Symbol, u32)] {
        &self.0
    }

    pub fn degree(&self, s: &Symbol) -> u32 {
        self.0.iter().find(|(v, _)| v == s).map_or(0, |(_, e)| *e)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().cloned());
        Monomial(out)
    }

    /// `self / other` when `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = SmallVec::with_capacity(self.0.len());
        let mut j = 0;
        for (s, e) in &self.0 {
            if j < other.0.len() && other.0[j].0 == *s {
                let oe = other.0[j].1;
                j += 1;
                match e.cmp(&oe) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((s.clone(), e - oe)),
                }
            } else if j < other.0.len() && other.0[j].0 < *s {
                return None;
            } else {
                out.push((s.clone(), *e));
            }
        }
        if j < other.0.len() {
            return None;
        }
        Some(Monomial(out))
    }

    /// Componentwise minimum of exponents.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        let mut out = SmallVec::new();
        for (s, e) in &self.0 {
            let oe = other.degree(s);
            if oe > 0 {
                out.push((s.clone(), (*e).min(oe)));
            }
        }
        Monomial(out)
    }

    /// Split into the part over symbols satisfying `pred` and the rest.
    pub fn partition(&self, pred: impl Fn(&Symbol) -> bool) -> (Monomial, Monomial) {
        let mut yes = SmallVec::new();
        let mut no = SmallVec::new();
        for f in &self.0 {
            if pred(&f.0) {
                yes.push(f.clone());
            } else {
                no.push(f.clone());
            }
        }
        (Monomial(yes), Monomial(no))
    }

    pub fn without(&self, s: &Symbol) -> Monomial {
        Monomial(self.0.iter().filter(|(v, _)| v != s).cloned().collect())
    }
}

impl Ord for Monomial {
    /// Lexicographic order; `Greater` means `self` leads.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((sa, ea)), Some((sb, eb))) => match sa.cmp(sb) {
                    Ordering::Equal => match ea.cmp(eb) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        o => return o,
                    },
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, (s, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Coeff>,
}

pub fn rat(n: i64) -> Coeff {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn one() -> Poly {
        Poly::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Poly {
        Poly::term(Monomial::one(), c)
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(rat(n))
    }

    pub fn term(m: Monomial, c: Coeff) -> Poly {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn symbol(s: Symbol) -> Poly {
        Poly::term(Monomial::var(s, 1), Coeff::one())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms.keys().next().unwrap().is_one())
    }

    /// Value of a constant polynomial.
    pub fn constant_value(&self) -> Option<Coeff> {
        if self.terms.is_empty() {
            return Some(Coeff::zero());
        }
        if self.terms.len() == 1 {
            let (m, c) = self.terms.iter().next().unwrap();
            if m.is_one() {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, Coeff)> {
        self.terms.into_iter()
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> Coeff {
        self.terms.get(&Monomial::one()).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn coefficient(&self, m: &Monomial) -> Coeff {
        self.terms.get(m).cloned().unwrap_or_else(Coeff::zero)
    }

    pub fn leading(&self) -> Option<(&Monomial, &Coeff)> {
        self.terms.iter().next_back()
    }

    pub fn leading_coeff(&self) -> Coeff {
        self.leading().map_or_else(Coeff::zero, |(_, c)| c.clone())
    }

    fn add_term(&mut self, m: Monomial, c: Coeff) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (big, small) = if self.len() >= other.len() { (self, other) } else { (other, self) };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn scale(&self, k: &Coeff) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        if k.is_one() {
            return self.clone();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        if let Some(c) = self.constant_value() {
            return other.scale(&c);
        }
        if let Some(c) = other.constant_value() {
            return self.scale(&c);
        }
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Poly {
        if m.is_one() {
            return self.clone();
        }
        Poly { terms: self.terms.iter().map(|(k, c)| (k.mul(m), c.clone())).collect() }
    }

    pub fn div_monomial(&self, m: &Monomial) -> Poly {
        if m.is_one() {
            return self.clone();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.div(m).expect("monomial does not divide"), c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// All symbols occurring in the polynomial.
    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            for (s, _) in m.factors() {
                out.insert(s.clone());
            }
        }
        out
    }

    pub fn contains_symbol(&self, s: &Symbol) -> bool {
        self.terms.keys().any(|m| m.degree(s) > 0)
    }

    pub fn degree(&self, s: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.degree(s)).max().unwrap_or(0)
    }

    /// Dense coefficient list in `s`: `self = Σ out[k]·s^k`.
    pub fn coefficients_in(&self, s: &Symbol) -> Vec<Poly> {
        let deg = self.degree(s) as usize;
        let mut out = vec![Poly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let k = m.degree(s) as usize;
            out[k].terms.insert(m.without(s), c.clone());
        }
        out
    }

    pub fn from_coefficients(s: &Symbol, coeffs: &[Poly]) -> Poly {
        let mut out = Poly::zero();
        for (k, p) in coeffs.iter().enumerate() {
            let sk = Monomial::var(s.clone(), k as u32);
            for (m, c) in &p.terms {
                out.add_term(m.mul(&sk), c.clone());
            }
        }
        out
    }

    /// Group terms by their factor over symbols satisfying `pred`.
    pub fn split_by(&self, pred: impl Fn(&Symbol) -> bool) -> BTreeMap<Monomial, Poly> {
        let mut out: BTreeMap<Monomial, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (key, rest) = m.partition(&pred);
            out.entry(key).or_default().add_term(rest, c.clone());
        }
        out
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        let mut g = first.clone();
        for m in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    /// Scaled so that the leading coefficient is one.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) if c.is_one() => self.clone(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Scaled so that coefficients are coprime integers with positive leading
    /// coefficient.
    pub fn primitive_integer(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        use num_integer::Integer;
        let mut lcm = BigInt::one();
        for c in self.terms.values() {
            lcm = lcm.lcm(c.denom());
        }
        let mut g = BigInt::zero();
        for c in self.terms.values() {
            let n = (c * BigRational::from_integer(lcm.clone())).to_integer();
            g = g.gcd(&n);
        }
        let mut k = BigRational::new(lcm, g);
        if self.leading_coeff().is_negative() {
            k = -k;
        }
        self.scale(&k)
    }

    /// Exact quotient `self / d`, or `None` if `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        if d.is_monomial() {
            let (dm, dc) = d.leading().unwrap();
            let inv = dc.recip();
            let mut terms = BTreeMap::new();
            for (m, c) in &self.terms {
                terms.insert(m.div(dm)?, c * &inv);
            }
            return Some(Poly { terms });
        }
        let (dm, dc) = d.leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let inv = dc.recip();
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((rm, rc)) = rem.leading().map(|(m, c)| (m.clone(), c.clone())) {
            let qm = rm.div(&dm)?;
            let qc = rc * &inv;
            for (m, c) in &d.terms {
                rem.add_term(m.mul(&qm), -(c * &qc));
            }
            quot.add_term(qm, qc);
        }
        Some(quot)
    }

    /// Formal partial derivative with respect to a symbol.
    pub fn derivative(&self, s: &Symbol) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.degree(s);
            if e == 0 {
                continue;
            }
            let mut pairs: Vec<(Symbol, u32)> = m.factors().to_vec();
            for p in pairs.iter_mut() {
                if p.0 == *s {
                    p.1 -= 1;
                }
            }
            out.add_term(Monomial::from_pairs(pairs), c * rat(e as i64));
        }
        out
    }

    /// Evaluate with a numeric value for every symbol.
    pub fn eval_f64<E>(&self, mut value: impl FnMut(&Symbol) -> Result<f64, E>) -> Result<f64, E> {
        use num_traits::ToPrimitive;
        let mut cache: BTreeMap<Symbol, f64> = BTreeMap::new();
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (s, e) in m.factors() {
                let x = match cache.get(s) {
                    Some(x) => *x,
                    None => {
                        let x = value(s)?;
                        cache.insert(s.clone(), x);
                        x
                    }
                };
                t *= x.powi(*e as i32);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn map_monomials(&self, f: impl Fn(&Monomial) -> Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            out = out.add(&f(m).scale(c));
        }
        out
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{c}*{m:?}")?;
        }
        Ok(())
    }
}

/// Greatest common divisor over ℚ, normalized monic (leading coefficient 1).
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let mg = ma.gcd(&mb);
    let a1 = a.div_monomial(&ma);
    let b1 = b.div_monomial(&mb);
    gcd_content_free(&a1, &b1).mul_monomial(&mg).monic()
}

fn gcd_content_free(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    let (a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if a.div_exact(b).is_some() {
        return b.monic();
    }
    let va = a.symbols();
    let vb = b.symbols();
    if va != vb {
        // The gcd lives in the common symbols: fold over coefficients with
        // respect to the non-shared ones.
        let common: BTreeSet<Symbol> = va.intersection(&vb).cloned().collect();
        if common.is_empty() {
            return Poly::one();
        }
        let mut parts: Vec<Poly> = Vec::new();
        for p in [a, b] {
            if p.symbols().is_subset(&common) {
                parts.push(p.clone());
            } else {
                parts.extend(p.split_by(|s| !common.contains(s)).into_values());
            }
        }
        parts.sort_by_key(|p| p.len());
        let mut g = parts[0].clone();
        for p in &parts[1..] {
            if g.is_constant() {
                return Poly::one();
            }
            g = gcd(&g, p);
        }
        return g.monic();
    }
    // Same symbol set: primitive PRS in a main variable.
    let main = va
        .iter()
        .min_by_key(|s| (b.degree(s), a.degree(s)))
        .cloned()
        .expect("nonconstant polynomials have symbols");
    let ca = content_in(a, &main);
    let cb = content_in(b, &main);
    let c = gcd(&ca, &cb);
    let mut pa = a.div_exact(&ca).expect("content divides");
    let mut pb = b.div_exact(&cb).expect("content divides");
    if pa.degree(&main) < pb.degree(&main) {
        std::mem::swap(&mut pa, &mut pb);
    }
    let g = loop {
        if pb.degree(&main) == 0 {
            break Poly::one();
        }
        let r = pseudo_remainder(&pa, &pb, &main);
        if r.is_zero() {
            break pb;
        }
        if r.degree(&main) == 0 {
            break Poly::one();
        }
        pa = pb;
        pb = primitive_part_in(&r, &main);
    };
    c.mul(&primitive_part_in(&g, &main)).monic()
}

/// Gcd of the coefficients of `p` viewed as a polynomial in `s`.
pub fn content_in(p: &Poly, s: &Symbol) -> Poly {
    let mut coeffs: Vec<Poly> = p.coefficients_in(s).into_iter().filter(|c| !c.is_zero()).collect();
    if coeffs.iter().any(|c| c.is_constant()) {
        return Poly::one();
    }
    coeffs.sort_by_key(|c| c.len());
    let mut g = coeffs[0].clone();
    for c in &coeffs[1..] {
        if g.is_constant() {
            return Poly::one();
        }
        g = gcd(&g, c);
    }
    g.monic()
}

pub fn primitive_part_in(p: &Poly, s: &Symbol) -> Poly {
    if p.is_zero() {
        return Poly::zero();
    }
    let c = content_in(p, s);
    p.div_exact(&c).expect("content divides")
}

/// Pseudo-remainder of `a` by `b` in the variable `s`.
fn pseudo_remainder(a: &Poly, b: &Poly, s: &Symbol) -> Poly {
    let bc = b.coefficients_in(s);
    let n = bc.len() - 1;
    let lc = bc[n].clone();
    let mut r = a.coefficients_in(s);
    while r.len() > n && r.len() > 0 {
        let m = r.len() - 1;
        let lead = r[m].clone();
        if lead.is_zero() {
            r.pop();
            continue;
        }
        for c in r.iter_mut() {
            *c = c.mul(&lc);
        }
        for (k, bk) in bc.iter().enumerate() {
            let idx = m - n + k;
            r[idx] = r[idx].sub(&lead.mul(bk));
        }
        debug_assert!(r[m].is_zero());
        r.pop();
        while r.last().is_some_and(|c| c.is_zero()) {
            r.pop();
        }
    }
    Poly::from_coefficients(s, &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str) -> Poly {
        Poly::symbol(Symbol::param(name))
    }

    #[test]
    fn exact_division() {
        let (a, b) = (var("a"), var("b"));
        let p = a.add(&b).mul(&a.sub(&b));
        assert_eq!(p.div_exact(&a.add(&b)).unwrap(), a.sub(&b));
        assert!(p.div_exact(&a.add(&Poly::one())).is_none());
    }

    #[test]
    fn gcd_of_products() {
        let (a, b, c) = (var("a"), var("b"), var("c"));
        let f = a.sub(&b).mul(&b.add(&c)).mul(&a);
        let g = a.sub(&b).pow(2).mul(&c.add(&Poly::int(2)));
        assert_eq!(gcd(&f, &g), a.sub(&b).monic());
        assert!(gcd(&a.add(&b), &a.sub(&b)).is_one());
    }

    #[test]
    fn gcd_with_disjoint_symbols() {
        let (a, b, c) = (var("a"), var("b"), var("c"));
        let f = a.mul(&c).add(&b.mul(&c)); // c(a+b)
        let g = a.add(&b).pow(2);
        assert_eq!(gcd(&f, &g), a.add(&b).monic());
        assert!(gcd(&c, &a.add(&b)).is_one());
    }

    #[test]
    fn gcd_multivariate_prs() {
        let (a, b, c) = (var("a"), var("b"), var("c"));
        let common = a.mul(&b).add(&c.pow(2)).sub(&Poly::int(3));
        let f = common.mul(&a.add(&c));
        let g = common.mul(&b.sub(&a.mul(&c)));
        assert_eq!(gcd(&f, &g), common.monic());
    }
}
