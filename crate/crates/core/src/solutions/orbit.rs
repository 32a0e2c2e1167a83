//! Finite transformations generated by `X1 = λ1 Z1 + λ2 Z2` and
//! `X2 = λ1 Z3 + λ2 Z4` acting on solutions.

use std::collections::BTreeMap;

use super::{depends_on, solution_context, SolutionError, SolutionFamily};
use crate::expr::{eval_ast_jet_guarded, parse_ast, Coord, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    /// `(λ1 eˣ + λ2 e⁻ˣ)/(u − v) (∂u − ∂v)`, symmetry of `3-1`.
    X1,
    /// `(λ1 cos x + λ2 sin x)/(u − v) (∂u − ∂v)`, symmetry of `3-2`.
    X2,
}

impl Generator {
    pub fn parse(s: &str) -> Option<Generator> {
        match s {
            "X1" | "x1" => Some(Generator::X1),
            "X2" | "x2" => Some(Generator::X2),
            _ => None,
        }
    }

    fn profile(self, l1: &str, l2: &str) -> String {
        match self {
            Generator::X1 => format!("({l1})*exp(x) + ({l2})*exp(-x)"),
            Generator::X2 => format!("({l1})*cos(x) + ({l2})*sin(x)"),
        }
    }
}

/// Group parameter and generator coefficients as expression texts, plus
/// numeric values for any new parameter names they introduce.
#[derive(Clone, Debug)]
pub struct OrbitSpec {
    pub generator: Generator,
    pub p: String,
    pub lambda1: String,
    pub lambda2: String,
    pub values: BTreeMap<String, f64>,
}

impl OrbitSpec {
    pub fn new(generator: Generator, p: &str, lambda1: &str, lambda2: &str) -> OrbitSpec {
        OrbitSpec {
            generator,
            p: p.into(),
            lambda1: lambda1.into(),
            lambda2: lambda2.into(),
            values: BTreeMap::new(),
        }
    }

    pub fn value(mut self, name: &str, v: f64) -> OrbitSpec {
        self.values.insert(name.into(), v);
        self
    }
}

const GRID: usize = 100;

/// Sign of `u − v` on a dense grid over the sampling box (a heuristic: 10⁴
/// points). Points where the family cannot be evaluated are skipped.
fn sign_on_box(sol: &SolutionFamily) -> Result<f64, SolutionError> {
    let (mut pos, mut neg) = (false, false);
    let s = &sol.sample;
    for i in 0..GRID {
        for j in 0..GRID {
            let t = s.t.0 + (s.t.1 - s.t.0) * i as f64 / (GRID - 1) as f64;
            let x = s.x.0 + (s.x.1 - s.x.0) * j as f64 / (GRID - 1) as f64;
            let env = s.env(t, x);
            let (Ok(u), Ok(v)) = (
                eval_ast_jet_guarded(&sol.u_ast, &env, 1e-12, 0.0),
                eval_ast_jet_guarded(&sol.v_ast, &env, 1e-12, 0.0),
            ) else {
                continue;
            };
            let d = u.v - v.v;
            pos |= d > 0.0;
            neg |= d <= 0.0;
        }
    }
    match (pos, neg) {
        (true, false) => Ok(1.0),
        (false, true) => Ok(-1.0),
        _ => Err(SolutionError::BranchAmbiguous),
    }
}

/// Apply the one-parameter group of `spec.generator` with parameter `p`:
/// `u* = (u+v)/2 ± sqrt((u−v)² + 4pF(x))/2`, `v* = (u+v)/2 ∓ …`, the sign
/// following the sign of `u − v` on the sampling box.
pub fn group_orbit(sol: &SolutionFamily, spec: &OrbitSpec) -> Result<SolutionFamily, SolutionError> {
    let ctx = solution_context();
    let parse = |s: &str| ctx.parse(s).map_err(|source| SolutionError::Parse { text: s.into(), source });
    let p = parse(&spec.p)?;
    let mut out = sol.clone();
    out.id = format!("{}@{:?}", sol.id, spec.generator);
    for (k, v) in &spec.values {
        out.sample.params.insert(k.clone(), *v);
    }
    if p.is_zero() {
        return Ok(out);
    }
    let sigma = sign_on_box(&out)?;
    let f_text = spec.generator.profile(&spec.lambda1, &spec.lambda2);
    let f = parse(&f_text)?;

    let s = &sol.u + &sol.v;
    let w = &sol.u - &sol.v;
    let radicand = &(&w * &w) + &(&(&p * &f) * &Expr::int(4));
    let root = Expr::sqrt(&radicand).scale(&crate::expr::rat(sigma as i64));
    let half = Expr::rational(1, 2);
    out.u = &(&s + &root) * &half;
    out.v = &(&s - &root) * &half;

    let (ut, vt) = (sol.u_ast.to_string(), sol.v_ast.to_string());
    let rad_text = format!("(({ut}) - ({vt}))^2 + 4*({})*({f_text})", spec.p);
    let sg = if sigma > 0.0 { "+" } else { "-" };
    let so = if sigma > 0.0 { "-" } else { "+" };
    let ast = |text: String| parse_ast(&text).map_err(|source| SolutionError::Parse { text, source });
    out.u_ast = ast(format!("(({ut}) + ({vt}))/2 {sg} sqrt({rad_text})/2"))?;
    out.v_ast = ast(format!("(({ut}) + ({vt}))/2 {so} sqrt({rad_text})/2"))?;
    out.constraints.push(super::Constraint::parse(&format!("{rad_text} >= 0"))?);
    out.branch = None;

    let rad_ast = ast(rad_text)?;
    let sm = &out.sample;
    for i in 0..GRID {
        for j in 0..GRID {
            let t = sm.t.0 + (sm.t.1 - sm.t.0) * i as f64 / (GRID - 1) as f64;
            let x = sm.x.0 + (sm.x.1 - sm.x.0) * j as f64 / (GRID - 1) as f64;
            if let Ok(r) = eval_ast_jet_guarded(&rad_ast, &sm.env(t, x), 1e-12, f64::NEG_INFINITY) {
                if r.v < 0.0 {
                    return Err(SolutionError::NegativeRadicand(t, x));
                }
            }
        }
    }
    Ok(out)
}

/// Whether a steady pair belongs to the steady-state classes of `3-1`
/// (`f'' − f = 0`) or `3-2` (`f'' + f = 0`) with `f = uv`.
pub fn steady_membership(sol: &SolutionFamily, system: &str) -> Result<bool, SolutionError> {
    let sign = match system {
        "3-1" => -1,
        "3-2" => 1,
        _ => return Err(SolutionError::UnknownSystem(system.into())),
    };
    if depends_on(&sol.u, Coord::T) || depends_on(&sol.v, Coord::T) {
        return Ok(false);
    }
    if sol.u.is_zero() || sol.v.is_zero() {
        return Ok(true);
    }
    let f = &sol.u * &sol.v;
    let x = crate::expr::Symbol::x();
    Ok((&f.diff(&x).diff(&x) + &f.scale(&crate::expr::rat(sign))).is_zero())
}
