//! Point transformations `t* = T(t)`, `x* = k x`, `(u*, v*)` affine in
//! `(u, v)` with time-dependent coefficients, and their action on systems
//! and vector fields.

use std::fmt;

use num_rational::BigRational;

use crate::expr::{Bindings, Dependent, Expr, Monomial, Symbol};
use crate::jet::VectorField;

use super::{InvarianceError, SKTSystem};

#[derive(Clone, Debug, PartialEq)]
pub enum TimeMap {
    /// `t* = k t`.
    Linear(Expr),
    /// `t* = scale · exp(rate · t)`.
    Exponential { scale: Expr, rate: Expr },
}

/// `u* = u_map[0] + u_map[1] u + u_map[2] v`, likewise `v*`; map
/// coefficients may depend on `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTransformation {
    pub name: String,
    pub time: TimeMap,
    pub x_scale: Expr,
    pub u_map: [Expr; 3],
    pub v_map: [Expr; 3],
}

fn coord_free(e: &Expr) -> bool {
    !e.depends_on_any(|s| s.depends_on_coords())
}

fn only_t(e: &Expr) -> bool {
    !e.depends_on_any(|s| s.depends_on_coords() && *s != Symbol::t() && !t_atom(s))
}

fn t_atom(s: &Symbol) -> bool {
    match s.atom_parts() {
        Some((_, arg)) => only_t(arg),
        None => false,
    }
}

fn affine(e: &Expr, what: &str) -> Result<[Expr; 3], InvarianceError> {
    let a = e.diff(&Symbol::u());
    let b = e.diff(&Symbol::v());
    let c = e - &a * Expr::u() - &b * Expr::v();
    for k in [&a, &b, &c] {
        if !only_t(k) {
            return Err(InvarianceError::Unsupported(format!("{what} is not affine in (u, v) with t-dependent coefficients")));
        }
    }
    Ok([c, a, b])
}

impl PointTransformation {
    pub fn identity() -> PointTransformation {
        PointTransformation {
            name: "identity".to_string(),
            time: TimeMap::Linear(Expr::one()),
            x_scale: Expr::one(),
            u_map: [Expr::zero(), Expr::one(), Expr::zero()],
            v_map: [Expr::zero(), Expr::zero(), Expr::one()],
        }
    }

    /// `u* = v`, `v* = u`.
    pub fn swap() -> PointTransformation {
        PointTransformation {
            name: "swap".to_string(),
            u_map: [Expr::zero(), Expr::zero(), Expr::one()],
            v_map: [Expr::zero(), Expr::one(), Expr::zero()],
            ..PointTransformation::identity()
        }
    }

    /// Build from closed-form maps in `(t, x, u, v)`.
    pub fn from_maps(
        name: &str,
        t_star: &Expr,
        x_star: &Expr,
        u_star: &Expr,
        v_star: &Expr,
    ) -> Result<PointTransformation, InvarianceError> {
        let t = Expr::t();
        let k = t_star.checked_div(&t).map_err(|_| InvarianceError::Unsupported("t* = 0".into()))?;
        let time = if coord_free(&k) {
            TimeMap::Linear(k)
        } else {
            let rate = t_star
                .diff(&Symbol::t())
                .checked_div(t_star)
                .map_err(|_| InvarianceError::Unsupported("t* = 0".into()))?;
            let scale = t_star.checked_div(&Expr::exp(&(&rate * &t))).expect("exp is nonzero");
            if !coord_free(&rate) || !coord_free(&scale) {
                return Err(InvarianceError::Unsupported(format!("time map t* = {t_star}")));
            }
            TimeMap::Exponential { scale, rate }
        };
        let x_scale = x_star.checked_div(&Expr::x()).map_err(|_| InvarianceError::Unsupported("x* = 0".into()))?;
        if !coord_free(&x_scale) {
            return Err(InvarianceError::Unsupported(format!("space map x* = {x_star}")));
        }
        let tr = PointTransformation {
            name: name.to_string(),
            time,
            x_scale,
            u_map: affine(u_star, "u*")?,
            v_map: affine(v_star, "v*")?,
        };
        Ok(tr)
    }

    pub fn t_star(&self) -> Expr {
        match &self.time {
            TimeMap::Linear(k) => k * Expr::t(),
            TimeMap::Exponential { scale, rate } => scale * Expr::exp(&(rate * Expr::t())),
        }
    }

    pub fn x_star(&self) -> Expr {
        &self.x_scale * Expr::x()
    }

    fn star(m: &[Expr; 3]) -> Expr {
        &m[0] + &m[1] * Expr::u() + &m[2] * Expr::v()
    }

    pub fn u_star(&self) -> Expr {
        Self::star(&self.u_map)
    }

    pub fn v_star(&self) -> Expr {
        Self::star(&self.v_map)
    }

    fn det(&self) -> Expr {
        &self.u_map[1] * &self.v_map[2] - &self.u_map[2] * &self.v_map[1]
    }

    /// `(u, v)` in terms of `(u*, v*)` (written with the symbols `u`, `v`)
    /// and the original `t`.
    pub fn inverse_uv(&self) -> Result<[Expr; 2], InvarianceError> {
        let det = self.det();
        if det.is_zero() {
            return Err(InvarianceError::NotInvertible);
        }
        let du = Expr::u() - &self.u_map[0];
        let dv = Expr::v() - &self.v_map[0];
        let u = (&self.v_map[2] * &du - &self.u_map[2] * &dv).checked_div(&det).expect("det nonzero");
        let v = (&self.u_map[1] * &dv - &self.v_map[1] * &du).checked_div(&det).expect("det nonzero");
        Ok([u, v])
    }

    /// Express a function of the original `t` through the new time.
    fn old_time(&self, e: &Expr) -> Result<Expr, InvarianceError> {
        match &self.time {
            TimeMap::Linear(k) => {
                let inv = Expr::t().checked_div(k).map_err(|_| InvarianceError::NotInvertible)?;
                Ok(e.subs(&Symbol::t(), &inv))
            }
            TimeMap::Exponential { scale, rate } => {
                let ex = Expr::exp(&(rate * Expr::t()));
                let (atom, power) = if ex.den().is_one() {
                    (ex.num().clone(), 1)
                } else {
                    (ex.den().clone(), -1)
                };
                let sym = match atom.terms().next() {
                    Some((m, _)) if atom.len() == 1 && m.factors().len() == 1 && m.factors()[0].1 == 1 => {
                        m.factors()[0].0.clone()
                    }
                    _ => return Err(InvarianceError::Unsupported(format!("time map rate {rate}"))),
                };
                let value = Expr::t().checked_div(scale).map_err(|_| InvarianceError::NotInvertible)?;
                let value = if power == 1 { value } else { value.recip().expect("nonzero") };
                Ok(e.subs(&sym, &value))
            }
        }
    }

    fn time_derivative(&self) -> Expr {
        self.t_star().diff(&Symbol::t())
    }
}

impl fmt::Display for PointTransformation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: t* = {}, x* = {}, u* = {}, v* = {}",
            self.name,
            self.t_star(),
            self.x_star(),
            self.u_star(),
            self.v_star()
        )
    }
}

/// Result of [`transform_system`].
#[derive(Clone, Debug)]
pub enum Transformed {
    System(SKTSystem),
    /// The image is not a (non-degenerate) SKT system; evolution equations
    /// `u_t = equations[0]`, `v_t = equations[1]`.
    Raw { equations: [Expr; 2], reason: String },
}

impl Transformed {
    pub fn system(&self) -> Option<&SKTSystem> {
        match self {
            Transformed::System(s) => Some(s),
            Transformed::Raw { .. } => None,
        }
    }
}

/// Read the twelve template coefficients off a pair of right-hand sides.
fn extract(rhs: &[Expr; 2]) -> Result<SKTSystem, String> {
    let (u, v) = (Symbol::u(), Symbol::v());
    let uxx = Symbol::jet(Dependent::U, 0, 2);
    let vxx = Symbol::jet(Dependent::V, 0, 2);
    let half = |e: Expr| e.scale(&BigRational::new(1.into(), 2.into()));
    let mut s = SKTSystem::zero();
    for (k, e) in rhs.iter().enumerate() {
        let c = e.collect_jet(&[uxx.clone(), vxx.clone()]).map_err(|err| err.to_string())?;
        let get = |j: &Symbol| c.get(&Monomial::var(j.clone(), 1)).cloned().unwrap_or_else(Expr::zero);
        let (cu, cv) = (get(&uxx), get(&vxx));
        let rest = e - &cu * Expr::symbol(&uxx) - &cv * Expr::symbol(&vxx);
        let r = rest
            .collect_jets()
            .map_err(|err| err.to_string())?
            .remove(&Monomial::one())
            .unwrap_or_else(Expr::zero);
        let ruv = -r.diff(&u).diff(&v);
        let vals: [(&str, Expr); 6] = if k == 0 {
            [
                ("d1", at_origin(&cu)),
                ("d11", half(cu.diff(&u))),
                ("d12", cv.diff(&u)),
                ("a1", at_origin(&r.diff(&u))),
                ("b1", -half(r.diff(&u).diff(&u))),
                ("c1", ruv),
            ]
        } else {
            [
                ("d2", at_origin(&cv)),
                ("d21", cu.diff(&v)),
                ("d22", half(cv.diff(&v))),
                ("a2", at_origin(&r.diff(&v))),
                ("b2", ruv),
                ("c2", -half(r.diff(&v).diff(&v))),
            ]
        };
        for (n, val) in vals {
            if !coord_free(&val) {
                return Err(format!("coefficient {n} = {val} depends on the variables"));
            }
            s.set(n, val).expect("template parameter");
        }
    }
    Ok(s)
}

fn at_origin(e: &Expr) -> Expr {
    e.substitute(&zero_uv())
}

/// Image of `sys` under `tr`, re-expressed in the template when possible.
pub fn transform_system(sys: &SKTSystem, tr: &PointTransformation) -> Result<Transformed, InvarianceError> {
    let inv = tr.inverse_uv()?;
    let k = &tr.x_scale;
    let mut b = Bindings::new();
    b.insert(Symbol::u(), inv[0].clone());
    b.insert(Symbol::v(), inv[1].clone());
    // Jets transform through the (u, v) block of the inverse.
    let block = [0, 1].map(|i| [inv[i].diff(&Symbol::u()), inv[i].diff(&Symbol::v())]);
    for order in 1..=2u8 {
        let scale = k.pow(order as i32);
        let (ju, jv) = (Expr::jet(Dependent::U, 0, order), Expr::jet(Dependent::V, 0, order));
        for (i, dep) in [Dependent::U, Dependent::V].into_iter().enumerate() {
            let val = (&block[i][0] * &ju + &block[i][1] * &jv) * &scale;
            b.insert(Symbol::jet(dep, 0, order), val);
        }
    }
    let f = [sys.rhs(Dependent::U), sys.rhs(Dependent::V)];
    let tp = tr.time_derivative();
    let maps = [&tr.u_map, &tr.v_map];
    let mut out = Vec::new();
    for m in maps {
        // U = m0 + m1 u + m2 v  ⇒  U_t = m0' + m1' u + m2' v + m1 F1 + m2 F2.
        let t = Symbol::t();
        let old = m[0].diff(&t)
            + m[1].diff(&t) * Expr::u()
            + m[2].diff(&t) * Expr::v()
            + &m[1] * &f[0]
            + &m[2] * &f[1];
        let old = old.substitute(&b);
        let new = old.checked_div(&tp).map_err(|_| InvarianceError::NotInvertible)?;
        out.push(tr.old_time(&new)?);
    }
    let equations = [out[0].clone(), out[1].clone()];
    if let Some(e) = equations.iter().find(|e| e.contains(&Symbol::t()) || e.contains(&Symbol::x())) {
        return Ok(Transformed::Raw { equations: equations.clone(), reason: format!("explicit coordinates in {e}") });
    }
    match extract(&equations) {
        Ok(s) => {
            let rebuilt = [s.rhs(Dependent::U), s.rhs(Dependent::V)];
            for (k, (g, r)) in equations.iter().zip(&rebuilt).enumerate() {
                let diff = g - r;
                if !diff.is_zero() {
                    let reason = format!("equation {} has non-template terms {diff}", k + 1);
                    return Ok(Transformed::Raw { equations, reason });
                }
            }
            if s.is_degenerate() {
                return Ok(Transformed::Raw { equations, reason: "an equation has no diffusion part".into() });
            }
            Ok(Transformed::System(s))
        }
        Err(reason) => Ok(Transformed::Raw { equations, reason }),
    }
}

fn zero_uv() -> Bindings {
    let mut b = Bindings::new();
    b.insert(Symbol::u(), Expr::zero());
    b.insert(Symbol::v(), Expr::zero());
    b
}

/// Push a vector field forward along a transformation with a linear time
/// map.
pub fn push_forward(x: &VectorField, tr: &PointTransformation) -> Result<VectorField, InvarianceError> {
    let TimeMap::Linear(k) = &tr.time else {
        return Err(InvarianceError::Unsupported("push-forward needs a linear time map".into()));
    };
    let coeffs = [tr.t_star(), tr.x_star(), tr.u_star(), tr.v_star()].map(|c| x.act(&c));
    let inv = tr.inverse_uv()?;
    let t_old = Expr::t().checked_div(k).map_err(|_| InvarianceError::NotInvertible)?;
    let x_old = Expr::x().checked_div(&tr.x_scale).map_err(|_| InvarianceError::NotInvertible)?;
    let mut b = Bindings::new();
    b.insert(Symbol::t(), t_old.clone());
    b.insert(Symbol::x(), x_old);
    b.insert(Symbol::u(), inv[0].subs(&Symbol::t(), &t_old));
    b.insert(Symbol::v(), inv[1].subs(&Symbol::t(), &t_old));
    let mut out = VectorField::from_coefficients(coeffs.map(|c| c.substitute(&b)));
    out.name = x.name.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Context;
    use crate::invariance::check_invariance;

    fn p(s: &str) -> Expr {
        Context::new().permissive().parse(s).unwrap()
    }

    fn sys(pairs: &[(&str, &str)]) -> SKTSystem {
        SKTSystem::from_bindings(pairs.iter().map(|(k, v)| (*k, p(v)))).unwrap()
    }

    #[test]
    fn identity_and_swap() {
        let s = SKTSystem::generic();
        let id = transform_system(&s, &PointTransformation::identity()).unwrap();
        assert_eq!(id.system(), Some(&s));
        let sw = transform_system(&s, &PointTransformation::swap()).unwrap();
        assert_eq!(sw.system(), Some(&s.swapped()));
    }

    #[test]
    fn cross_scaling_normalizes() {
        let s109 = sys(&[
            ("d12", "d12"),
            ("d21", "d21"),
            ("a1", "a1"),
            ("b1", "b1"),
            ("c1", "c1"),
            ("a2", "a2"),
            ("b2", "b2"),
            ("c2", "c2"),
        ]);
        let tr = PointTransformation::from_maps("110", &p("t"), &p("x"), &p("d21*u"), &p("d12*v")).unwrap();
        let img = transform_system(&s109, &tr).unwrap();
        let expected = sys(&[
            ("d12", "1"),
            ("d21", "1"),
            ("a1", "a1"),
            ("b1", "b1/d21"),
            ("c1", "c1/d12"),
            ("a2", "a2"),
            ("b2", "b2/d21"),
            ("c2", "c2/d12"),
        ]);
        assert_eq!(img.system(), Some(&expected));
        // D1 pushes forward to a symmetry of the image.
        let d1 = VectorField::from_text("xi0=t\nxi1=0\neta1=-u\neta2=-v", &Context::new()).unwrap();
        let fixed = sys(&[("d12", "d12"), ("d21", "d21"), ("c1", "c1"), ("b2", "b2")]);
        assert!(check_invariance(&fixed, &d1).invariant);
        let img = transform_system(&fixed, &tr).unwrap();
        let pushed = push_forward(&d1, &tr).unwrap();
        assert!(check_invariance(img.system().unwrap(), &pushed).invariant);
    }

    #[test]
    fn exponential_time_map() {
        let s = sys(&[("d11", "1"), ("a1", "a"), ("b1", "1"), ("d22", "1"), ("a2", "a"), ("c2", "1")]);
        let tr = PointTransformation::from_maps("10", &p("exp(a*t)/a"), &p("x"), &p("exp(-a*t)*u"), &p("exp(-a*t)*v"))
            .unwrap();
        assert!(matches!(tr.time, TimeMap::Exponential { .. }));
        let img = transform_system(&s, &tr).unwrap();
        let expected = sys(&[("d11", "1"), ("b1", "1"), ("d22", "1"), ("c2", "1")]);
        assert_eq!(img.system(), Some(&expected));
    }

    #[test]
    fn difference_variable_is_raw() {
        let s = sys(&[("d12", "1"), ("d21", "1"), ("c1", "1"), ("b2", "1")]);
        let tr = PointTransformation::from_maps("w", &p("t"), &p("x"), &p("u"), &p("u - v")).unwrap();
        match transform_system(&s, &tr).unwrap() {
            Transformed::Raw { equations, .. } => assert!(equations[1].is_zero()),
            other => panic!("expected raw image, got {other:?}"),
        }
    }

    #[test]
    fn singular_block_rejected() {
        let tr = PointTransformation::from_maps("s", &p("t"), &p("x"), &p("u + v"), &p("2*u + 2*v")).unwrap();
        assert_eq!(transform_system(&SKTSystem::generic(), &tr).unwrap_err(), InvarianceError::NotInvertible);
    }
}
