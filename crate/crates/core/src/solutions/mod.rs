//! Closed-form solution families, residual verification, group orbits,
//! symmetry reduction and flux checks.

mod file;
mod orbit;
mod reduction;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use file::{parse_solution_file, SolutionFileError};
pub use orbit::{group_orbit, steady_membership, Generator, OrbitSpec};
pub use reduction::{
    flux_check, reduce_ansatz, reduction_branch_check, to_logistic, FluxReport, LogisticParams, ReductionAnsatz,
};

use crate::expr::{
    eval_ast_jet_guarded, parse_ast, Ast, AstEnv, Bindings, Context, Coord, EvalError, Expr, ExprError, Jet2,
    ParseError, Symbol, SymbolKind,
};
use crate::invariance::{SKTSystem, PARAM_NAMES};

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("unknown solution family '{0}'")]
    UnknownFamily(String),
    #[error("unknown system '{0}'")]
    UnknownSystem(String),
    #[error("parse error in '{text}': {source}")]
    Parse { text: String, source: ParseError },
    #[error("missing numeric value for parameter '{0}'")]
    MissingValue(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("u - v changes sign on the sampling box; branch is ambiguous")]
    BranchAmbiguous,
    #[error("radicand is negative at (t, x) = ({0}, {1})")]
    NegativeRadicand(f64, f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Upper,
    Lower,
}

impl Branch {
    pub fn flip(self) -> Branch {
        match self {
            Branch::Upper => Branch::Lower,
            Branch::Lower => Branch::Upper,
        }
    }

    fn signs(self) -> (&'static str, &'static str) {
        match self {
            Branch::Upper => ("+", "-"),
            Branch::Lower => ("-", "+"),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `expr ≥ 0` (sampled with the radicand guard).
    Nonnegative,
    /// `expr ≠ 0` (sampled with the denominator guard).
    Nonzero,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub text: String,
    ast: Ast,
}

impl Constraint {
    pub fn parse(text: &str) -> Result<Constraint, SolutionError> {
        let (kind, body) = if let Some((l, r)) = text.split_once(">=") {
            (ConstraintKind::Nonnegative, format!("({}) - ({})", l.trim(), r.trim()))
        } else if let Some((l, r)) = text.split_once("!=") {
            (ConstraintKind::Nonzero, format!("({}) - ({})", l.trim(), r.trim()))
        } else {
            return Err(SolutionError::Domain(format!("constraint '{text}' is neither '>=' nor '!='")));
        };
        let ast = parse_ast(&body).map_err(|source| SolutionError::Parse { text: text.into(), source })?;
        Ok(Constraint { kind, text: text.trim().to_string(), ast })
    }

    fn holds(&self, env: &AstEnv, guards: &Guards) -> Result<bool, EvalError> {
        let v = eval_ast_jet_guarded(&self.ast, env, guards.denominator, guards.radicand)?.v;
        Ok(match self.kind {
            ConstraintKind::Nonnegative => v >= guards.radicand,
            ConstraintKind::Nonzero => v.abs() >= guards.denominator,
        })
    }
}

/// Sampling box and parameter values for numeric checks.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub params: BTreeMap<String, f64>,
}

impl SampleSpec {
    pub fn new(t: (f64, f64), x: (f64, f64), params: &[(&str, f64)]) -> SampleSpec {
        SampleSpec { t, x, params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
    }

    pub fn env(&self, t: f64, x: f64) -> AstEnv {
        let mut env = AstEnv { values: self.params.clone() };
        env.set("t", t);
        env.set("x", x);
        env
    }
}

/// A closed-form pair `(u(t,x), v(t,x))`.
#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub id: String,
    /// Identifier of the system it solves (see [`builtin_system`]).
    pub system: String,
    pub branch: Option<Branch>,
    pub u: Expr,
    pub v: Expr,
    pub u_ast: Ast,
    pub v_ast: Ast,
    pub constraints: Vec<Constraint>,
    pub sample: SampleSpec,
    template: Option<[String; 2]>,
}

pub fn solution_context() -> Context {
    Context::new().with_function("phi1", &[Coord::T]).with_function("phi2", &[Coord::T]).permissive()
}

fn parse_pair(u: &str, v: &str) -> Result<(Expr, Expr, Ast, Ast), SolutionError> {
    let ctx = solution_context();
    let p = |s: &str| ctx.parse(s).map_err(|source| SolutionError::Parse { text: s.into(), source });
    let a = |s: &str| parse_ast(s).map_err(|source| SolutionError::Parse { text: s.into(), source });
    Ok((p(u)?, p(v)?, a(u)?, a(v)?))
}

impl SolutionFamily {
    pub fn new(
        id: &str,
        system: &str,
        u: &str,
        v: &str,
        constraints: &[&str],
        sample: SampleSpec,
    ) -> Result<SolutionFamily, SolutionError> {
        let (ue, ve, ua, va) = parse_pair(u, v)?;
        Ok(SolutionFamily {
            id: id.to_string(),
            system: system.to_string(),
            branch: None,
            u: ue,
            v: ve,
            u_ast: ua,
            v_ast: va,
            constraints: constraints.iter().map(|c| Constraint::parse(c)).collect::<Result<_, _>>()?,
            sample,
            template: None,
        })
    }

    /// Family whose `u` and `v` texts contain `{s}` for the sign in front of
    /// the radical (`±` in `u`, `∓` in `v`).
    pub fn branched(
        id: &str,
        system: &str,
        u: &str,
        v: &str,
        branch: Branch,
        constraints: &[&str],
        sample: SampleSpec,
    ) -> Result<SolutionFamily, SolutionError> {
        let (su, sv) = branch.signs();
        let mut f =
            SolutionFamily::new(id, system, &u.replace("{s}", su), &v.replace("{s}", sv), constraints, sample)?;
        f.branch = Some(branch);
        f.template = Some([u.to_string(), v.to_string()]);
        Ok(f)
    }

    pub fn with_branch(&self, branch: Branch) -> SolutionFamily {
        match (&self.template, self.branch) {
            (Some([u, v]), Some(b)) if b != branch => {
                let (su, sv) = branch.signs();
                let (ue, ve, ua, va) = parse_pair(&u.replace("{s}", su), &v.replace("{s}", sv)).expect("template parsed before");
                SolutionFamily { u: ue, v: ve, u_ast: ua, v_ast: va, branch: Some(branch), ..self.clone() }
            }
            _ => self.clone(),
        }
    }

    /// `(u, v) → (v, u)`.
    pub fn swapped(&self) -> SolutionFamily {
        SolutionFamily {
            u: self.v.clone(),
            v: self.u.clone(),
            u_ast: self.v_ast.clone(),
            v_ast: self.u_ast.clone(),
            branch: self.branch.map(Branch::flip),
            template: self.template.clone().map(|[u, v]| [v, u]),
            ..self.clone()
        }
    }

    pub fn with_sample(mut self, sample: SampleSpec) -> SolutionFamily {
        self.sample = sample;
        self
    }

    pub fn bind(&self, values: &[(&str, f64)]) -> SolutionFamily {
        let mut f = self.clone();
        for (k, v) in values {
            f.sample.params.insert(k.to_string(), *v);
        }
        f
    }

    /// Replace parameters symbolically (and in the oracle texts).
    pub fn substitute_params(&self, subs: &[(&str, &str)]) -> Result<SolutionFamily, SolutionError> {
        let ctx = solution_context();
        let mut b = Bindings::new();
        let mut map = BTreeMap::new();
        for (k, v) in subs {
            b.insert(Symbol::param(k), ctx.parse(v).map_err(|source| SolutionError::Parse { text: v.to_string(), source })?);
            map.insert(k.to_string(), parse_ast(v).map_err(|source| SolutionError::Parse { text: v.to_string(), source })?);
        }
        Ok(SolutionFamily {
            u: self.u.substitute(&b),
            v: self.v.substitute(&b),
            u_ast: ast_subst(&self.u_ast, &map),
            v_ast: ast_subst(&self.v_ast, &map),
            template: None,
            ..self.clone()
        })
    }

    pub fn is_steady(&self) -> bool {
        !depends_on(&self.u, Coord::T) && !depends_on(&self.v, Coord::T)
    }
}

impl fmt::Display for SolutionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)?;
        if let Some(b) = self.branch {
            write!(f, " ({b})")?;
        }
        write!(f, "\n  u = {}\n  v = {}", self.u, self.v)
    }
}

/// Replace identifiers in an AST.
pub fn ast_subst(ast: &Ast, map: &BTreeMap<String, Ast>) -> Ast {
    let rec = |a: &Ast| Box::new(ast_subst(a, map));
    match ast {
        Ast::Ident { name, .. } => map.get(name).cloned().unwrap_or_else(|| ast.clone()),
        Ast::Num(_) => ast.clone(),
        Ast::Neg(a) => Ast::Neg(rec(a)),
        Ast::Bin { op, lhs, rhs, column } => Ast::Bin { op: *op, lhs: rec(lhs), rhs: rec(rhs), column: *column },
        Ast::Pow(a, n) => Ast::Pow(rec(a), *n),
        Ast::Call(h, a) => Ast::Call(*h, rec(a)),
    }
}

pub(crate) fn symbol_depends_on(s: &Symbol, c: Coord) -> bool {
    match s.kind() {
        SymbolKind::Base(b) => *b == c,
        SymbolKind::Jet { dep, .. } => dep.coord() == c,
        SymbolKind::Function { deps, .. } => deps.contains(c),
        SymbolKind::Atom { arg, .. } => depends_on(arg, c),
        _ => false,
    }
}

pub(crate) fn depends_on(e: &Expr, c: Coord) -> bool {
    e.depends_on_any(|s| symbol_depends_on(s, c))
}

fn sys_of(pairs: &[(&str, Expr)]) -> SKTSystem {
    let mut s = SKTSystem::zero();
    for (k, v) in pairs {
        s.set(k, v.clone()).expect("template parameter");
    }
    s
}

/// Systems referred to by the solution families:
/// `3-1` (`u_t = [uv]_xx − uv`, same for `v`), `3-2` (reaction `+uv`),
/// `1-4` (reaction `b·uv`), and the logistic forms `3-8a` / `3-8b` obtained
/// from `3-1` / `3-2`. Catalog ids `T<table>.<case>` are also accepted.
pub fn builtin_system(id: &str) -> Result<SKTSystem, SolutionError> {
    let one = Expr::one();
    let p = Expr::param;
    Ok(match id {
        "3-1" => sys_of(&[("d12", one.clone()), ("d21", one.clone()), ("c1", one.clone()), ("b2", one)]),
        "3-2" => sys_of(&[("d12", one.clone()), ("d21", one.clone()), ("c1", -&one), ("b2", -one)]),
        "1-4" => sys_of(&[("d12", one.clone()), ("d21", one), ("c1", -p("b")), ("b2", -p("b"))]),
        "3-8a" | "3-8b" => {
            let s = if id == "3-8a" { Expr::one() } else { Expr::int(-1) };
            let ab = &p("a") * &p("b");
            sys_of(&[
                ("d12", p("d1")),
                ("d21", p("d2")),
                ("a1", ab.clone()),
                ("a2", ab),
                ("c1", &(&s * &p("b")) * &p("d1")),
                ("b2", &(&s * &p("b")) * &p("d2")),
            ])
        }
        _ => {
            let parsed = id
                .strip_prefix('T')
                .and_then(|r| r.split_once('.'))
                .and_then(|(a, b)| Some((a.parse::<u8>().ok()?, b.parse::<u8>().ok()?)));
            let (t, c) = parsed.ok_or_else(|| SolutionError::UnknownSystem(id.into()))?;
            crate::catalog::Catalog::builtin()
                .entry(t, c)
                .map(|e| e.system.clone())
                .ok_or_else(|| SolutionError::UnknownSystem(id.into()))?
        }
    })
}

/// Ids accepted by [`builtin_family`].
pub const FAMILY_IDS: [&str; 9] = [
    "seed-3-5",
    "family-3-6",
    "family-3-7",
    "steady-3-13a",
    "steady-3-13b",
    "steady-3-13c",
    "reduced-3-14a",
    "reduced-3-14b",
    "reduced-3-14c",
];

/// Test basis for the arbitrary functions `g`, `h` of the steady states.
pub const STEADY_BASIS: [&str; 3] = ["1", "1 + x^2", "2 + sin(x)"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyKind {
    /// `u = f/g, v = g` with `f'' ∓ f = 0`.
    Quotient,
    /// `u = h, v = 0`.
    FirstOnly,
    /// `u = 0, v = h`.
    SecondOnly,
}

/// Steady state of `3-1` or `3-2` with arbitrary function `g` (or `h`).
pub fn steady_family(kind: SteadyKind, system: &str, g: &str) -> Result<SolutionFamily, SolutionError> {
    let f = match system {
        "3-1" => "alpha1*exp(x) + alpha2*exp(-x)",
        "3-2" => "alpha1*cos(x) + alpha2*sin(x)",
        _ => return Err(SolutionError::UnknownSystem(system.into())),
    };
    let sample = SampleSpec::new((0.0, 1.0), (0.0, 3.0), &[("alpha1", 1.0), ("alpha2", 0.5)]);
    let (id, u, v, cons) = match kind {
        SteadyKind::Quotient => ("steady-3-13a", format!("({f})/({g})"), g.to_string(), vec![format!("{g} != 0")]),
        SteadyKind::FirstOnly => ("steady-3-13b", g.to_string(), "0".into(), vec![]),
        SteadyKind::SecondOnly => ("steady-3-13c", "0".into(), g.to_string(), vec![]),
    };
    let cons: Vec<&str> = cons.iter().map(String::as_str).collect();
    SolutionFamily::new(id, system, &u, &v, &cons, sample)
}

pub fn builtin_family(id: &str) -> Result<SolutionFamily, SolutionError> {
    builtin_family_branch(id, Branch::Upper)
}

pub fn builtin_family_branch(id: &str, branch: Branch) -> Result<SolutionFamily, SolutionError> {
    match id {
        "seed-3-5" => SolutionFamily::new(
            id,
            "3-1",
            "alpha1*exp(alpha1*t)/(alpha2 + exp(alpha1*t))",
            "-alpha1*alpha2/(alpha2 + exp(alpha1*t))",
            &["alpha2 + exp(alpha1*t) != 0"],
            SampleSpec::new((0.0, 1.0), (0.0, 3.0), &[("alpha1", 1.0), ("alpha2", 1.0)]),
        ),
        "family-3-6" => {
            let time = "(alpha1*exp(alpha1*t) - alpha1*alpha2)/(2*(alpha2 + exp(alpha1*t)))";
            let root = "sqrt(alpha1^2 + 4*p*(lambda1*exp(x) + lambda2*exp(-x)))/2";
            SolutionFamily::branched(
                id,
                "3-1",
                &format!("{time} {{s}} {root}"),
                &format!("{time} {{s}} {root}"),
                branch,
                &["alpha1^2 + 4*p*(lambda1*exp(x) + lambda2*exp(-x)) >= 0", "alpha2 + exp(alpha1*t) != 0"],
                SampleSpec::new(
                    (0.0, 1.0),
                    (0.0, 3.0),
                    &[("alpha1", 1.0), ("alpha2", 1.0), ("p", 0.1), ("lambda1", 1.0), ("lambda2", 0.5)],
                ),
            )
        }
        "family-3-7" => {
            let time = "(alpha1 + alpha1*alpha2*exp(alpha1*t))/(2*(1 - alpha2*exp(alpha1*t)))";
            let root = "sqrt(alpha1^2 + 4*p*(lambda1*cos(x) + lambda2*sin(x)))/2";
            SolutionFamily::branched(
                id,
                "3-2",
                &format!("{time} {{s}} {root}"),
                &format!("{time} {{s}} {root}"),
                branch,
                &["alpha1^2 + 4*p*(lambda1*cos(x) + lambda2*sin(x)) >= 0", "1 - alpha2*exp(alpha1*t) != 0"],
                SampleSpec::new(
                    (0.0, 1.0),
                    (0.0, std::f64::consts::PI),
                    &[("alpha1", 1.0), ("alpha2", -1.0), ("p", 0.1), ("lambda1", 1.0), ("lambda2", 0.5)],
                ),
            )
        }
        "steady-3-13a" => steady_family(SteadyKind::Quotient, "3-1", STEADY_BASIS[0]),
        "steady-3-13b" => steady_family(SteadyKind::FirstOnly, "3-1", STEADY_BASIS[1]),
        "steady-3-13c" => steady_family(SteadyKind::SecondOnly, "3-1", STEADY_BASIS[2]),
        "reduced-3-14a" | "reduced-3-14b" | "reduced-3-14c" => {
            let (time, shift, params): (&str, &str, &[(&str, f64)]) = match id {
                "reduced-3-14a" => ("-1/t", "", &[("lambda1", 1.0), ("lambda2", -1.0)]),
                "reduced-3-14b" => (
                    "alpha1*sin(alpha1*t)/cos(alpha1*t)",
                    " - alpha1^2",
                    &[("alpha1", 0.5), ("lambda1", 1.0), ("lambda2", -1.0)],
                ),
                _ => (
                    "alpha1*(1 + alpha2*exp(2*alpha1*t))/(1 - alpha2*exp(2*alpha1*t))",
                    " + alpha1^2",
                    &[("alpha1", 0.5), ("alpha2", -1.0), ("lambda1", 1.0), ("lambda2", -1.0)],
                ),
            };
            let rad = format!("lambda1*sin(x) - lambda2*cos(x){shift}");
            let t_box = if id == "reduced-3-14a" { (0.5, 2.0) } else { (0.0, 1.5) };
            let mut cons = vec![format!("{rad} >= 0")];
            match id {
                "reduced-3-14a" => cons.push("t != 0".into()),
                "reduced-3-14b" => cons.push("cos(alpha1*t) != 0".into()),
                _ => cons.push("1 - alpha2*exp(2*alpha1*t) != 0".into()),
            }
            let cons: Vec<&str> = cons.iter().map(String::as_str).collect();
            SolutionFamily::branched(
                id,
                "3-2",
                &format!("{time} {{s}} sqrt({rad})"),
                &format!("{time} {{s}} sqrt({rad})"),
                branch,
                &cons,
                SampleSpec::new(t_box, (0.1, 1.4), params),
            )
        }
        _ => Err(SolutionError::UnknownFamily(id.into())),
    }
}

/// `rhs − u_t` (and for `v`) of `sys` with the pair `(u, v)` substituted.
pub fn residual_exprs(sys: &SKTSystem, u: &Expr, v: &Expr) -> (Expr, Expr) {
    let mut b = Bindings::new();
    b.insert(Symbol::u(), u.clone());
    b.insert(Symbol::v(), v.clone());
    let (tt, xx) = (Symbol::t(), Symbol::x());
    let one = |dep: crate::expr::Dependent, w: &Expr| {
        let p = sys.potential(dep).substitute(&b);
        let r = sys.reaction(dep).substitute(&b);
        &(&p.diff(&xx).diff(&xx) + &r) - &w.diff(&tt)
    };
    (one(crate::expr::Dependent::U, u), one(crate::expr::Dependent::V, v))
}

/// Symbolic residual of a family against a system.
pub fn residual(sys: &SKTSystem, sol: &SolutionFamily) -> (Expr, Expr) {
    residual_exprs(sys, &sol.u, &sol.v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Guards {
    pub denominator: f64,
    pub radicand: f64,
}

impl Default for Guards {
    fn default() -> Guards {
        Guards { denominator: 0.1, radicand: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumericResidual {
    pub points: usize,
    /// Candidates dropped by the guards or constraints.
    pub rejected: usize,
    pub max_abs: f64,
    /// `|S| / max(1, |u_t|, |diffusion|, |reaction|)`, maximized.
    pub max_rel: f64,
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Quasi-random (Halton, bases 2 and 3) points in the box; `seed` shifts the
/// sequence.
pub fn halton_points(t: (f64, f64), x: (f64, f64), seed: u64) -> impl Iterator<Item = (f64, f64)> {
    (1 + seed * 997..).map(move |i| {
        (t.0 + (t.1 - t.0) * radical_inverse(i, 2), x.0 + (x.1 - x.0) * radical_inverse(i, 3))
    })
}

fn numeric_params(sys: &SKTSystem, env: &BTreeMap<String, f64>) -> Result<[f64; 12], SolutionError> {
    let mut out = [0.0; 12];
    for (i, p) in sys.params.iter().enumerate() {
        out[i] = p.eval_numeric(env, 0.0).map_err(|e| match e {
            EvalError::Unbound(n) => SolutionError::MissingValue(n),
            other => SolutionError::Domain(format!("{}: {other}", PARAM_NAMES[i])),
        })?;
    }
    Ok(out)
}

/// Residual pair at one point from the AST oracle: `(S1, S2, scale1, scale2)`.
fn oracle_point(k: &[f64; 12], u: Jet2, v: Jet2) -> [(f64, f64); 2] {
    let c = Jet2::constant;
    let [d1, d2, d11, d12, d21, d22, a1, a2, b1, b2, c1, c2] = *k;
    let pu = (c(d1) + c(d11) * u + c(d12) * v) * u;
    let pv = (c(d2) + c(d21) * u + c(d22) * v) * v;
    let ru = u.v * (a1 - b1 * u.v - c1 * v.v);
    let rv = v.v * (a2 - b2 * u.v - c2 * v.v);
    let s1 = pu.dxx() + ru - u.dt();
    let s2 = pv.dxx() + rv - v.dt();
    let sc = |a: f64, b: f64, d: f64| 1f64.max(a.abs()).max(b.abs()).max(d.abs());
    [(s1, sc(pu.dxx(), ru, u.dt())), (s2, sc(pv.dxx(), rv, v.dt()))]
}

/// Evaluate both residuals at `points` admissible quasi-random points of the
/// family's sampling box using the AST oracle (independent of the kernel).
pub fn numeric_residual(
    sys: &SKTSystem,
    sol: &SolutionFamily,
    points: usize,
    seed: u64,
    guards: Guards,
) -> Result<NumericResidual, SolutionError> {
    let k = numeric_params(sys, &sol.sample.params)?;
    let mut out = NumericResidual { points: 0, rejected: 0, max_abs: 0.0, max_rel: 0.0 };
    let limit = 200 * points.max(1);
    for (t, x) in halton_points(sol.sample.t, sol.sample.x, seed).take(limit) {
        if out.points == points {
            break;
        }
        let env = sol.sample.env(t, x);
        let admissible = sol.constraints.iter().try_fold(true, |ok, c| c.holds(&env, &guards).map(|h| ok && h));
        let jets = admissible.and_then(|ok| {
            Ok(ok.then_some((
                eval_ast_jet_guarded(&sol.u_ast, &env, guards.denominator, guards.radicand)?,
                eval_ast_jet_guarded(&sol.v_ast, &env, guards.denominator, guards.radicand)?,
            )))
        });
        let (u, v) = match jets {
            Ok(Some(p)) => p,
            Ok(None) | Err(EvalError::Guard { .. }) => {
                out.rejected += 1;
                continue;
            }
            Err(EvalError::Unbound(n)) => return Err(SolutionError::MissingValue(n)),
        };
        for (s, scale) in oracle_point(&k, u, v) {
            out.max_abs = out.max_abs.max(s.abs());
            out.max_rel = out.max_rel.max(s.abs() / scale);
        }
        out.points += 1;
    }
    if out.points < points {
        return Err(SolutionError::Domain(format!(
            "only {} of {} sample points satisfy the constraints",
            out.points, points
        )));
    }
    Ok(out)
}

/// Numeric value of a family at one point.
pub fn eval_family(sol: &SolutionFamily, t: f64, x: f64) -> Result<(f64, f64), SolutionError> {
    let env = sol.sample.env(t, x);
    let g = |a: &Ast| {
        eval_ast_jet_guarded(a, &env, 0.0, 0.0).map(|j| j.v).map_err(|e| match e {
            EvalError::Unbound(n) => SolutionError::MissingValue(n),
            other => SolutionError::Domain(other.to_string()),
        })
    };
    Ok((g(&sol.u_ast)?, g(&sol.v_ast)?))
}

/// Symbolic and numeric verification of one family.
#[derive(Clone, Debug)]
pub struct Verification {
    pub family: String,
    pub system: String,
    pub symbolic: (Expr, Expr),
    pub numeric: NumericResidual,
    pub tol: f64,
}

impl Verification {
    pub fn symbolic_zero(&self) -> bool {
        self.symbolic.0.is_zero() && self.symbolic.1.is_zero()
    }

    pub fn numeric_ok(&self) -> bool {
        self.numeric.max_rel < self.tol
    }

    pub fn passed(&self) -> bool {
        self.symbolic_zero() && self.numeric_ok()
    }

    pub fn csv_header() -> &'static str {
        "family,system,max_abs_residual,points,verdict"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:e},{},{}",
            self.family,
            self.system,
            self.numeric.max_abs,
            self.numeric.points,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

impl fmt::Display for Verification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} on {}", self.family, self.system)?;
        writeln!(f, "  S1 = {}", self.symbolic.0)?;
        writeln!(f, "  S2 = {}", self.symbolic.1)?;
        write!(
            f,
            "  numeric: {} points ({} rejected), max |S| = {:.3e}, max rel = {:.3e} -> {}",
            self.numeric.points,
            self.numeric.rejected,
            self.numeric.max_abs,
            self.numeric.max_rel,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

pub fn verify(
    sys: &SKTSystem,
    system_id: &str,
    sol: &SolutionFamily,
    points: usize,
    seed: u64,
    tol: f64,
) -> Result<Verification, SolutionError> {
    Ok(Verification {
        family: match sol.branch {
            Some(b) => format!("{}:{b}", sol.id),
            None => sol.id.clone(),
        },
        system: system_id.to_string(),
        symbolic: residual(sys, sol),
        numeric: numeric_residual(sys, sol, points, seed, Guards::default())?,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_steady_when_alpha2_vanishes() {
        let s = builtin_family("seed-3-5").unwrap().substitute_params(&[("alpha2", "0")]).unwrap();
        assert_eq!(s.u, Expr::param("alpha1"));
        assert!(s.v.is_zero());
    }

    #[test]
    fn steady_example() {
        let f = steady_family(SteadyKind::Quotient, "3-1", "1").unwrap();
        let g = f.substitute_params(&[("alpha1", "1"), ("alpha2", "0")]).unwrap();
        assert_eq!(g.u, crate::expr::parse("exp(x)").unwrap());
        assert!(g.v.is_one());
    }

    #[test]
    fn branch_swap_is_exchange() {
        let up = builtin_family("family-3-6").unwrap();
        let low = up.with_branch(Branch::Lower);
        let sw = up.swapped();
        assert_eq!(low.u, sw.u);
        assert_eq!(low.v, sw.v);
    }

    #[test]
    fn halton_is_deterministic() {
        let a: Vec<_> = halton_points((0.0, 1.0), (0.0, 1.0), 3).take(5).collect();
        let b: Vec<_> = halton_points((0.0, 1.0), (0.0, 1.0), 3).take(5).collect();
        assert_eq!(a, b);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 3), 2.0 / 3.0);
    }

    #[test]
    fn uniform_seed_solves_3_1() {
        let sys = builtin_system("3-1").unwrap();
        let s = builtin_family("seed-3-5").unwrap();
        let (a, b) = residual(&sys, &s);
        assert!(a.is_zero() && b.is_zero());
        let n = numeric_residual(&sys, &s, 20, 0, Guards::default()).unwrap();
        assert!(n.max_rel < 1e-12, "{n:?}");
    }

    #[test]
    fn wrong_reaction_sign_is_detected() {
        let sys = builtin_system("3-2").unwrap();
        let s = builtin_family("family-3-6").unwrap().bind(&[("lambda2", 0.0)]);
        assert!(!residual(&sys, &s).0.is_zero());
        let k = numeric_params(&sys, &s.sample.params).unwrap();
        let env = s.sample.env(0.3, 0.5);
        let u = eval_ast_jet_guarded(&s.u_ast, &env, 0.0, 0.0).unwrap();
        let v = eval_ast_jet_guarded(&s.v_ast, &env, 0.0, 0.0).unwrap();
        let r = oracle_point(&k, u, v);
        assert!(r[0].0.abs() > 1e-3, "{}", r[0].0);
    }
}
