//! Vector fields on `(t, x, u, v)`, total derivatives and the second
//! prolongation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{Context, Coord, Dependent, Expr, ParseError, Symbol, SymbolKind};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum JetError {
    #[error("total derivative would leave second-order jet space: input contains {0}")]
    OrderOverflow(String),
    #[error("vector field coefficient {0} depends on derivative jet {1}")]
    JetInCoefficient(&'static str, String),
    #[error("missing key '{0}' in operator text")]
    MissingKey(&'static str),
    #[error("malformed operator line '{0}'")]
    Malformed(String),
    #[error("{key}: {source}")]
    Parse { key: String, source: ParseError },
}

pub const KEYS: [&str; 4] = ["xi0", "xi1", "eta1", "eta2"];

/// Infinitesimal operator `ξ⁰∂t + ξ¹∂x + η¹∂u + η²∂v`.
#[derive(Clone)]
pub struct VectorField {
    pub xi0: Expr,
    pub xi1: Expr,
    pub eta1: Expr,
    pub eta2: Expr,
    pub name: Option<String>,
}

/// Equality compares coefficients only.
impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        self.coefficients() == other.coefficients()
    }
}

impl Eq for VectorField {}

impl VectorField {
    pub fn new(xi0: Expr, xi1: Expr, eta1: Expr, eta2: Expr) -> VectorField {
        VectorField { xi0, xi1, eta1, eta2, name: None }
    }

    pub fn zero() -> VectorField {
        VectorField::new(Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero())
    }

    pub fn named(mut self, name: &str) -> VectorField {
        self.name = Some(name.to_string());
        self
    }

    pub fn p_t() -> VectorField {
        VectorField::new(Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()).named("P_t")
    }

    pub fn p_x() -> VectorField {
        VectorField::new(Expr::zero(), Expr::one(), Expr::zero(), Expr::zero()).named("P_x")
    }

    pub fn coefficients(&self) -> [&Expr; 4] {
        [&self.xi0, &self.xi1, &self.eta1, &self.eta2]
    }

    pub fn coeff(&self, c: Coord) -> &Expr {
        self.coefficients()[c.index()]
    }

    pub fn from_coefficients(c: [Expr; 4]) -> VectorField {
        let [xi0, xi1, eta1, eta2] = c;
        VectorField::new(xi0, xi1, eta1, eta2)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> VectorField {
        VectorField {
            xi0: f(&self.xi0),
            xi1: f(&self.xi1),
            eta1: f(&self.eta1),
            eta2: f(&self.eta2),
            name: self.name.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients().iter().all(|e| e.is_zero())
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField::new(
            &self.xi0 + &other.xi0,
            &self.xi1 + &other.xi1,
            &self.eta1 + &other.eta1,
            &self.eta2 + &other.eta2,
        )
    }

    pub fn scale(&self, k: &Expr) -> VectorField {
        let mut out = self.map(|e| e * k);
        out.name = None;
        out
    }

    /// Coefficients must not involve derivative jets.
    pub fn validate(&self) -> Result<(), JetError> {
        for (key, e) in KEYS.iter().zip(self.coefficients()) {
            if let Some(s) = e.free_symbols().into_iter().find(|s| s.is_derivative_jet()) {
                return Err(JetError::JetInCoefficient(key, s.name().to_string()));
            }
        }
        Ok(())
    }

    /// Action of the (unprolonged) field on a function of `(t, x, u, v)`.
    pub fn act(&self, e: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for c in Coord::ALL {
            let k = self.coeff(c);
            if k.is_zero() {
                continue;
            }
            let d = e.diff(&c.symbol());
            if !d.is_zero() {
                acc = acc + k * d;
            }
        }
        acc
    }

    /// Parse the `key=expression` operator text format.
    pub fn from_text(text: &str, ctx: &Context) -> Result<VectorField, JetError> {
        let mut found: BTreeMap<&str, Expr> = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| JetError::Malformed(line.to_string()))?;
            let k = k.trim();
            let key = KEYS.iter().find(|kk| **kk == k).ok_or_else(|| JetError::Malformed(line.to_string()))?;
            let e = ctx
                .parse(v.trim())
                .map_err(|source| JetError::Parse { key: k.to_string(), source })?;
            found.insert(key, e);
        }
        let mut get = |k: &'static str| found.remove(k).ok_or(JetError::MissingKey(k));
        let vf = VectorField::new(get("xi0")?, get("xi1")?, get("eta1")?, get("eta2")?);
        vf.validate()?;
        Ok(vf)
    }

    pub fn to_text(&self) -> String {
        KEYS.iter()
            .zip(self.coefficients())
            .map(|(k, e)| format!("{k}={e}\n"))
            .collect()
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, e) in Coord::ALL.iter().zip(self.coefficients()) {
            if e.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({e})*d{}", c.letter())?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "{n}: ")?;
        }
        fmt::Display::fmt(self, f)
    }
}

/// Jet coordinates `e` depends on, including `u`, `v` reached only through
/// opaque function dependencies.
fn jet_symbols(e: &Expr) -> Vec<Symbol> {
    let free = e.free_symbols();
    let mut out: BTreeSet<Symbol> = free.iter().filter(|s| s.is_jet()).cloned().collect();
    for s in &free {
        if let SymbolKind::Function { deps, .. } = s.kind() {
            for c in [Coord::U, Coord::V] {
                if deps.contains(c) {
                    out.insert(c.symbol());
                }
            }
        }
    }
    out.into_iter().collect()
}

/// `D_t` or `D_x` without an order bound.
pub(crate) fn total_derivative_unbounded(e: &Expr, wrt: Coord) -> Expr {
    let (dt, dx) = match wrt {
        Coord::T => (1, 0),
        Coord::X => (0, 1),
        _ => panic!("total derivative is taken with respect to t or x"),
    };
    let mut acc = e.diff(&wrt.symbol());
    for j in jet_symbols(e) {
        let (dep, t, x) = j.jet_order().unwrap();
        let part = e.diff(&j);
        if part.is_zero() {
            continue;
        }
        acc = acc + part * Expr::jet(dep, t + dt, x + dx);
    }
    acc
}

/// Total derivative `D_t` or `D_x` on second-order jet space.
pub fn total_derivative(e: &Expr, wrt: Coord) -> Result<Expr, JetError> {
    if let Some(j) = jet_symbols(e).into_iter().find(|j| {
        let (_, t, x) = j.jet_order().unwrap();
        t + x >= 2
    }) {
        return Err(JetError::OrderOverflow(j.name().to_string()));
    }
    Ok(total_derivative_unbounded(e, wrt))
}

/// Second prolongation of a vector field. Indices: `rho[k][μ]` with `k` the
/// dependent variable and `μ ∈ {t, x}`; `sigma[k]` holds `tt, tx, xx`.
#[derive(Clone, Debug)]
pub struct ProlongedField {
    pub base: VectorField,
    pub rho: [[Expr; 2]; 2],
    pub sigma: [[Expr; 3]; 2],
}

const DEPS: [Dependent; 2] = [Dependent::U, Dependent::V];
const MU: [Coord; 2] = [Coord::T, Coord::X];

fn mu_order(mu: Coord) -> (u8, u8) {
    match mu {
        Coord::T => (1, 0),
        _ => (0, 1),
    }
}

fn eta(x: &VectorField, k: usize) -> &Expr {
    if k == 0 {
        &x.eta1
    } else {
        &x.eta2
    }
}

impl ProlongedField {
    pub fn rho(&self, dep: Dependent, mu: Coord) -> &Expr {
        &self.rho[dep as usize][if mu == Coord::T { 0 } else { 1 }]
    }

    /// Coefficient for `dep` differentiated `t` times in time and `x` in space
    /// (`t + x == 2`).
    pub fn sigma(&self, dep: Dependent, t: u8, x: u8) -> &Expr {
        let i = match (t, x) {
            (2, 0) => 0,
            (1, 1) => 1,
            (0, 2) => 2,
            _ => panic!("sigma index must have order two"),
        };
        &self.sigma[dep as usize][i]
    }

    /// Coefficient of `∂/∂j` for any jet coordinate `j` of order ≤ 2.
    pub fn jet_coefficient(&self, j: &Symbol) -> Option<&Expr> {
        let (dep, t, x) = j.jet_order()?;
        Some(match t + x {
            0 => eta(&self.base, dep as usize),
            1 => self.rho(dep, if t == 1 { Coord::T } else { Coord::X }),
            2 => self.sigma(dep, t, x),
            _ => return None,
        })
    }

    /// `σ_xt` computed in the opposite order; must agree with `σ_tx`.
    pub fn mixed_difference(&self) -> [Expr; 2] {
        let xi0 = &self.base.xi0;
        let xi1 = &self.base.xi1;
        let dt_xi0 = total_derivative_unbounded(xi0, Coord::T);
        let dt_xi1 = total_derivative_unbounded(xi1, Coord::T);
        DEPS.map(|dep| {
            let alt = total_derivative_unbounded(self.rho(dep, Coord::X), Coord::T)
                - Expr::jet(dep, 1, 1) * &dt_xi0
                - Expr::jet(dep, 0, 2) * &dt_xi1;
            alt - self.sigma(dep, 1, 1)
        })
    }
}

/// Second prolongation per the standard evolutionary formulas.
pub fn prolong2(x: &VectorField) -> ProlongedField {
    let d_xi0 = MU.map(|mu| total_derivative_unbounded(&x.xi0, mu));
    let d_xi1 = MU.map(|mu| total_derivative_unbounded(&x.xi1, mu));
    let rho: [[Expr; 2]; 2] = [0, 1].map(|k| {
        let dep = DEPS[k];
        [0, 1].map(|m| {
            let mut r = total_derivative_unbounded(eta(x, k), MU[m]);
            if !d_xi0[m].is_zero() {
                r = r - Expr::jet(dep, 1, 0) * &d_xi0[m];
            }
            if !d_xi1[m].is_zero() {
                r = r - Expr::jet(dep, 0, 1) * &d_xi1[m];
            }
            r
        })
    });
    // (μ, ν) pairs for tt, tx, xx.
    let pairs = [(0usize, 0usize), (0, 1), (1, 1)];
    let sigma: [[Expr; 3]; 2] = [0, 1].map(|k| {
        let dep = DEPS[k];
        pairs.map(|(m, n)| {
            let (mt, mx) = mu_order(MU[m]);
            let mut s = total_derivative_unbounded(&rho[k][m], MU[n]);
            if !d_xi0[n].is_zero() {
                s = s - Expr::jet(dep, 1 + mt, mx) * &d_xi0[n];
            }
            if !d_xi1[n].is_zero() {
                s = s - Expr::jet(dep, mt, 1 + mx) * &d_xi1[n];
            }
            s
        })
    });
    ProlongedField { base: x.clone(), rho, sigma }
}

/// Directional derivative of `e` along the prolonged field.
pub fn apply_prolonged(p: &ProlongedField, e: &Expr) -> Expr {
    let mut acc = Expr::zero();
    for c in [Coord::T, Coord::X] {
        let k = p.base.coeff(c);
        if k.is_zero() {
            continue;
        }
        let d = e.diff(&c.symbol());
        if !d.is_zero() {
            acc = acc + k * d;
        }
    }
    for j in jet_symbols(e) {
        let d = e.diff(&j);
        if d.is_zero() {
            continue;
        }
        let k = p
            .jet_coefficient(&j)
            .unwrap_or_else(|| panic!("prolongation does not reach jet {j}"));
        if !k.is_zero() {
            acc = acc + k * d;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn field(xi0: &str, xi1: &str, eta1: &str, eta2: &str) -> VectorField {
        VectorField::new(parse(xi0).unwrap(), parse(xi1).unwrap(), parse(eta1).unwrap(), parse(eta2).unwrap())
    }

    #[test]
    fn total_derivatives() {
        let e = parse("u*v").unwrap();
        assert_eq!(total_derivative(&e, Coord::X).unwrap(), parse("u_x*v + u*v_x").unwrap());
        assert_eq!(total_derivative(&parse("u_x").unwrap(), Coord::T).unwrap(), parse("u_tx").unwrap());
        assert!(total_derivative(&parse("u_xx").unwrap(), Coord::X).is_err());
    }

    #[test]
    fn chain_rule_through_opaque_function() {
        let ctx = Context::new().with_function("eta1", &Coord::ALL);
        let e = ctx.parse("eta1").unwrap();
        let d = total_derivative(&e, Coord::X).unwrap();
        assert_eq!(d, ctx.parse("eta1_x + eta1_u*u_x + eta1_v*v_x").unwrap());
    }

    #[test]
    fn translations_do_not_prolong() {
        let p = prolong2(&VectorField::p_x());
        assert!(p.rho.iter().flatten().chain(p.sigma.iter().flatten()).all(|e| e.is_zero()));
    }

    #[test]
    fn scaling_fields() {
        let p = prolong2(&field("0", "0", "u", "0"));
        assert_eq!(p.rho(Dependent::U, Coord::X), &parse("u_x").unwrap());
        assert_eq!(p.rho(Dependent::U, Coord::T), &parse("u_t").unwrap());
        assert_eq!(p.sigma(Dependent::U, 0, 2), &parse("u_xx").unwrap());
        assert!(p.rho(Dependent::V, Coord::X).is_zero());

        let p = prolong2(&field("t", "0", "0", "0"));
        assert_eq!(p.rho(Dependent::U, Coord::T), &parse("-1*u_t").unwrap());
        assert!(p.rho(Dependent::U, Coord::X).is_zero());
        assert!(p.sigma(Dependent::U, 0, 2).is_zero());
        assert_eq!(p.sigma(Dependent::U, 2, 0), &parse("-2*u_tt").unwrap());
        assert_eq!(p.sigma(Dependent::U, 1, 1), &parse("-1*u_tx").unwrap());
    }

    #[test]
    fn mixed_sigma_is_symmetric() {
        let ctx = Context::new()
            .with_function("xi0", &Coord::ALL)
            .with_function("xi1", &Coord::ALL)
            .with_function("eta1", &Coord::ALL)
            .with_function("eta2", &Coord::ALL);
        let x = VectorField::new(
            ctx.parse("xi0").unwrap(),
            ctx.parse("xi1").unwrap(),
            ctx.parse("eta1").unwrap(),
            ctx.parse("eta2").unwrap(),
        );
        let p = prolong2(&x);
        for d in p.mixed_difference() {
            assert!(d.is_zero(), "{d}");
        }
    }

    #[test]
    fn euler_scaling_identity() {
        let p = prolong2(&field("0", "0", "u", "v"));
        assert_eq!(apply_prolonged(&p, &parse("u*v").unwrap()), parse("2*u*v").unwrap());
        assert!(apply_prolonged(&p, &parse("7").unwrap()).is_zero());
    }

    #[test]
    fn operator_text_round_trip() {
        let x = field("2*t", "x", "-2*u", "0");
        let ctx = Context::new();
        assert_eq!(VectorField::from_text(&x.to_text(), &ctx).unwrap(), x);
        assert!(VectorField::from_text("xi0=1\nxi1=0\neta1=u_x\neta2=0", &ctx).is_err());
        assert!(matches!(VectorField::from_text("xi0=1", &ctx), Err(JetError::MissingKey(_))));
    }
}
