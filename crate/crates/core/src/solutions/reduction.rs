//! Symmetry reduction by `∂x + F(x)/(u − v) (∂u − ∂v)`, zero-flux checks and
//! the map to the logistic form.

use std::collections::BTreeMap;
use std::fmt;

use super::{depends_on, residual_exprs, symbol_depends_on, SampleSpec, SolutionError, SolutionFamily};
use crate::expr::{parse_ast, rat, Ast, Bindings, Coord, CoordSet, Expr, Symbol};
use crate::invariance::SKTSystem;
use crate::jet::VectorField;

/// Ansatz `u, v = (φ1 ± sqrt(φ1² + 4φ2 + 4G(x)))/2` and the ODEs it reduces to.
#[derive(Clone, Debug)]
pub struct ReductionAnsatz {
    pub phi1: Expr,
    pub phi2: Expr,
    /// Antiderivative of the profile `F`.
    pub g: Expr,
    pub u: Expr,
    pub v: Expr,
    /// Reduced equations in `φ1, φ2` and their `t`-derivatives.
    pub equations: Vec<Expr>,
    /// `φ2 + φ1'/2` and `φ1' − φ1²/2 − β`.
    pub integrated: [Expr; 2],
}

impl fmt::Display for ReductionAnsatz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ansatz:\n  u = {}\n  v = {}", self.u, self.v)?;
        writeln!(f, "reduced system:")?;
        for e in &self.equations {
            writeln!(f, "  {e} = 0")?;
        }
        writeln!(f, "integrated form:")?;
        for e in &self.integrated {
            writeln!(f, "  {e} = 0")?;
        }
        Ok(())
    }
}

fn phi(name: &str, order: u8) -> Expr {
    let mut idx = [0u8; 4];
    idx[Coord::T.index()] = order;
    Expr::symbol(&Symbol::function(name, CoordSet::of(&[Coord::T]), idx))
}

/// Normalize an equation to a primitive integer numerator with positive
/// leading coefficient.
fn normalize(e: &Expr) -> Expr {
    Expr::from_poly(e.num().primitive_integer())
}

/// Reduce `sys` by an operator `∂x + F(x)/(u − v)(∂u − ∂v)` with
/// `F'' = ±F`.
pub fn reduce_ansatz(sys: &SKTSystem, x: &VectorField) -> Result<ReductionAnsatz, SolutionError> {
    let unsupported = |m: &str| SolutionError::Unsupported(format!("operator {x}: {m}"));
    if !x.xi0.is_zero() || !x.xi1.is_one() {
        return Err(unsupported("expected xi0 = 0, xi1 = 1"));
    }
    if !(&x.eta1 + &x.eta2).is_zero() {
        return Err(unsupported("expected eta2 = -eta1"));
    }
    let f = &x.eta1 * &(&Expr::u() - &Expr::v());
    if [Coord::T, Coord::U, Coord::V].iter().any(|c| depends_on(&f, *c)) {
        return Err(unsupported("eta1*(u - v) must depend on x only"));
    }
    let xs = Symbol::x();
    let f1 = f.diff(&xs);
    let f2 = f1.diff(&xs);
    let g = if (&f2 - &f).is_zero() {
        f1
    } else if (&f2 + &f).is_zero() {
        -f1
    } else {
        return Err(unsupported("profile F must satisfy F'' = F or F'' = -F"));
    };

    let (p1, p2) = (phi("phi1", 0), phi("phi2", 0));
    let radicand = &(&(&p1 * &p1) + &p2.scale(&rat(4))) + &g.scale(&rat(4));
    let root = Expr::sqrt(&radicand);
    let half = Expr::rational(1, 2);
    let u = &(&p1 + &root) * &half;
    let v = &(&p1 - &root) * &half;
    let (s1, s2) = residual_exprs(sys, &u, &v);
    let sum = &s1 + &s2;
    let diff = &(&s1 - &s2) * &root;

    let mut equations: Vec<Expr> = Vec::new();
    for e in [sum, diff] {
        for (_, c) in e.num().split_by(|s| symbol_depends_on(s, Coord::X)) {
            let n = normalize(&Expr::from_poly(c));
            if !n.is_zero() && !equations.contains(&n) {
                equations.push(n);
            }
        }
    }
    let beta = Expr::param("beta");
    let d1 = phi("phi1", 1);
    let integrated = [&p2 + &(&d1 * &half), &(&d1 - &(&(&p1 * &p1) * &half)) - &beta];
    Ok(ReductionAnsatz { phi1: p1, phi2: p2, g, u, v, equations, integrated })
}

/// `(φ1, φ2)` recovered from a pair of the ansatz form, or `None` when they
/// depend on `x`.
fn recover_phis(red: &ReductionAnsatz, sol: &SolutionFamily) -> Option<(Expr, Expr)> {
    let p1 = &sol.u + &sol.v;
    let w = &sol.u - &sol.v;
    let p2 = &(&(&(&w * &w) - &(&p1 * &p1)) * &Expr::rational(1, 4)) - &red.g;
    if depends_on(&p1, Coord::X) || depends_on(&p2, Coord::X) {
        return None;
    }
    Some((p1, p2))
}

/// The pair is of ansatz form and its `φ1, φ2` satisfy the reduced system.
pub fn reduction_branch_check(red: &ReductionAnsatz, sol: &SolutionFamily) -> bool {
    let Some((p1, p2)) = recover_phis(red, sol) else {
        return false;
    };
    red.equations
        .iter()
        .all(|e| e.substitute_function("phi1", &p1).substitute_function("phi2", &p2).is_zero())
}

#[derive(Clone, Debug)]
pub struct FluxReport {
    /// `(endpoint, u_x there, v_x there)`.
    pub endpoints: Vec<(Expr, Expr, Expr)>,
}

impl FluxReport {
    pub fn passed(&self) -> bool {
        self.endpoints.iter().all(|(_, a, b)| a.is_zero() && b.is_zero())
    }
}

impl fmt::Display for FluxReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (x, ux, vx) in &self.endpoints {
            writeln!(f, "x = {x}: u_x = {ux}, v_x = {vx}")?;
        }
        write!(f, "{}", if self.passed() { "zero flux: pass" } else { "zero flux: FAIL" })
    }
}

/// `u_x` and `v_x` at both endpoints, symbolically in `t`.
pub fn flux_check(sol: &SolutionFamily, x0: &Expr, x1: &Expr) -> Result<FluxReport, SolutionError> {
    let xs = Symbol::x();
    let (ux, vx) = (sol.u.diff(&xs), sol.v.diff(&xs));
    let mut endpoints = Vec::new();
    for p in [x0, x1] {
        let mut b = Bindings::new();
        b.insert(xs.clone(), p.clone());
        let at = |e: &Expr| {
            e.try_substitute(&b)
                .map_err(|_| SolutionError::Domain(format!("x = {p} lies on a constraint boundary")))
        };
        endpoints.push((p.clone(), at(&ux)?, at(&vx)?));
    }
    Ok(FluxReport { endpoints })
}

/// Parameters of `t* = ln(t)/(ab), x* = x/√b, u* = atu/d2, v* = atv/d1`.
#[derive(Clone, Debug)]
pub struct LogisticParams {
    pub a: String,
    pub b: String,
    pub d1: String,
    pub d2: String,
    /// Numeric values used for sampling.
    pub values: [f64; 4],
}

impl Default for LogisticParams {
    fn default() -> LogisticParams {
        LogisticParams { a: "a".into(), b: "b".into(), d1: "d1".into(), d2: "d2".into(), values: [0.5, 2.0, 1.5, 0.7] }
    }
}

/// Map a solution of `3-1` (or `3-2`) to one of `3-8a` (or `3-8b`). The
/// result is written in the new variables, renamed back to `t, x, u, v`.
pub fn to_logistic(sol: &SolutionFamily, lp: &LogisticParams) -> Result<SolutionFamily, SolutionError> {
    let target = match sol.system.as_str() {
        "3-1" => "3-8a",
        "3-2" => "3-8b",
        s => return Err(SolutionError::Precondition(format!("source system must be 3-1 or 3-2, not {s}"))),
    };
    let [av, bv, _, _] = lp.values;
    if bv <= 0.0 || av == 0.0 {
        return Err(SolutionError::Precondition("requires b > 0 and a != 0".into()));
    }
    let ctx = super::solution_context();
    let parse = |s: &str| ctx.parse(s).map_err(|source| SolutionError::Parse { text: s.into(), source });
    let (a, b, d1, d2) = (parse(&lp.a)?, parse(&lp.b)?, parse(&lp.d1)?, parse(&lp.d2)?);
    for (name, e) in [("a", &a), ("b", &b)] {
        if let Some(r) = e.as_rational() {
            let bad = if name == "a" { r == rat(0) } else { r <= rat(0) };
            if bad {
                return Err(SolutionError::Precondition(format!("{name} = {r} is not admissible")));
            }
        }
    }
    if sol.sample.t.1 <= 0.0 {
        return Err(SolutionError::Precondition("ln(t) requires t > 0 on the sampling box".into()));
    }

    let big_t = Expr::exp(&(&(&a * &b) * &Expr::t()));
    let rb = Expr::sqrt(&b);
    let mut bind = Bindings::new();
    bind.insert(Symbol::t(), big_t.clone());
    bind.insert(Symbol::x(), &rb * &Expr::x());
    let factor = &a * &big_t;
    let u = (&factor * &sol.u.substitute(&bind)).checked_div(&d2)?;
    let v = (&factor * &sol.v.substitute(&bind)).checked_div(&d1)?;

    let (at, bt, d1t, d2t) = (&lp.a, &lp.b, &lp.d1, &lp.d2);
    let ast = |s: String| parse_ast(&s).map_err(|source| SolutionError::Parse { text: s, source });
    let mut map: BTreeMap<String, Ast> = BTreeMap::new();
    map.insert("t".into(), ast(format!("exp(({at})*({bt})*t)"))?);
    map.insert("x".into(), ast(format!("sqrt({bt})*x"))?);
    let ua = ast(format!("({at})*exp(({at})*({bt})*t)*({})/({d2t})", super::ast_subst(&sol.u_ast, &map)))?;
    let va = ast(format!("({at})*exp(({at})*({bt})*t)*({})/({d1t})", super::ast_subst(&sol.v_ast, &map)))?;

    let mut params = sol.sample.params.clone();
    for (name, val) in [("a", lp.values[0]), ("b", lp.values[1]), ("d1", lp.values[2]), ("d2", lp.values[3])] {
        params.insert(name.into(), val);
    }
    let ab = av * bv;
    let t0 = sol.sample.t.0.max(1e-3);
    let (s0, s1) = ((t0.ln() / ab).min(sol.sample.t.1.ln() / ab), (t0.ln() / ab).max(sol.sample.t.1.ln() / ab));
    let sample = SampleSpec { t: (s0, s1), x: (sol.sample.x.0 / bv.sqrt(), sol.sample.x.1 / bv.sqrt()), params };

    let constraints = sol
        .constraints
        .iter()
        .map(|c| {
            let body = super::ast_subst(&c.ast, &map).to_string();
            let op = match c.kind {
                super::ConstraintKind::Nonnegative => ">=",
                super::ConstraintKind::Nonzero => "!=",
            };
            super::Constraint::parse(&format!("{body} {op} 0"))
        })
        .collect::<Result<_, _>>()?;
    Ok(SolutionFamily {
        id: format!("{}->logistic", sol.id),
        system: target.into(),
        branch: sol.branch,
        u,
        v,
        u_ast: ua,
        v_ast: va,
        constraints,
        sample,
        template: None,
    })
}
