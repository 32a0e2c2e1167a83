//! Lie brackets of vector fields and closure of operator lists.

use std::fmt;

use crate::expr::{Expr, Poly, Symbol};
use crate::jet::VectorField;

/// `[X, Y]` with components `X(Y^i) − Y(X^i)`.
pub fn commutator(x: &VectorField, y: &VectorField) -> VectorField {
    let xc = x.coefficients();
    let yc = y.coefficients();
    VectorField::from_coefficients([0, 1, 2, 3].map(|i| x.act(yc[i]) - y.act(xc[i])))
}

/// `[X_i, X_j] = value · X_k`.
#[derive(Clone, Debug)]
pub struct StructureConstant {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: Expr,
}

#[derive(Clone, Debug)]
pub struct ClosureReport {
    pub names: Vec<String>,
    /// Nonzero structure constants for `i < j`.
    pub constants: Vec<StructureConstant>,
    /// First pair whose bracket leaves the span, with the leftover field.
    pub failure: Option<(usize, usize, VectorField)>,
    /// The list was linearly dependent over the constants.
    pub degenerate: bool,
    /// Nonzeroness assumed for elimination pivots.
    pub assumptions: Vec<Poly>,
}

impl ClosureReport {
    pub fn closes(&self) -> bool {
        self.failure.is_none()
    }

    /// Every structure constant is a rational number.
    pub fn rational(&self) -> bool {
        self.constants.iter().all(|c| c.value.as_rational().is_some())
    }

    /// Structure constants free of the coordinates `t, x, u, v`.
    pub fn coordinate_free(&self) -> bool {
        self.constants.iter().all(|c| !c.value.depends_on_any(|s| s.depends_on_coords()))
    }

    pub fn constant(&self, i: usize, j: usize, k: usize) -> Expr {
        let (i, j, sign) = if i < j { (i, j, 1) } else { (j, i, -1) };
        self.constants
            .iter()
            .find(|c| c.i == i && c.j == j && c.k == k)
            .map(|c| if sign < 0 { -&c.value } else { c.value.clone() })
            .unwrap_or_else(Expr::zero)
    }
}

impl fmt::Display for ClosureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((i, j, r)) = &self.failure {
            return write!(f, "[{}, {}] leaves the span; residual {}", self.names[*i], self.names[*j], r);
        }
        if self.constants.is_empty() {
            return write!(f, "abelian");
        }
        let mut first = true;
        let mut pair = None;
        for c in &self.constants {
            if pair != Some((c.i, c.j)) {
                if !first {
                    writeln!(f)?;
                }
                first = false;
                pair = Some((c.i, c.j));
                write!(f, "[{}, {}] =", self.names[c.i], self.names[c.j])?;
            } else {
                write!(f, " +")?;
            }
            write!(f, " ({})*{}", c.value, self.names[c.k])?;
        }
        Ok(())
    }
}

fn unknown(k: usize) -> Symbol {
    Symbol::param(&format!("closure_c{k}"))
}

/// Solve `Σ c_k ops[k] = target` for constants `c_k` free of the
/// coordinates. Returns the solution (free unknowns set to zero), whether it
/// is exact, the rank deficiency flag and the pivots used.
fn express(ops: &[VectorField], target: &VectorField) -> (Vec<Expr>, bool, bool, Vec<Poly>) {
    let n = ops.len();
    let cs: Vec<Expr> = (0..n).map(|k| Expr::symbol(&unknown(k))).collect();
    let mut rows: Vec<(Vec<Expr>, Expr)> = Vec::new();
    for comp in 0..4 {
        let mut e = -target.coefficients()[comp];
        for (k, op) in ops.iter().enumerate() {
            let c = op.coefficients()[comp];
            if !c.is_zero() {
                e = e + &cs[k] * c;
            }
        }
        if e.is_zero() {
            continue;
        }
        for (_, coeff) in e.num().split_by(|s| s.depends_on_coords()) {
            let c = Expr::from_poly(coeff);
            let mut zero = crate::expr::Bindings::new();
            for k in 0..n {
                zero.insert(unknown(k), Expr::zero());
            }
            let row: Vec<Expr> = (0..n).map(|k| c.diff(&unknown(k))).collect();
            rows.push((row, -c.substitute(&zero)));
        }
    }
    let mut pivots = Vec::new();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for col in 0..n {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i].0[col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let piv = rows[r].0[col].clone();
        pivots.push(piv.num().primitive_integer());
        let inv = piv.recip().expect("pivot is nonzero");
        let (prow, prhs) = rows[r].clone();
        let prow: Vec<Expr> = prow.iter().map(|e| e * &inv).collect();
        let prhs = &prhs * &inv;
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row.0[col].is_zero() {
                continue;
            }
            let f = row.0[col].clone();
            for (a, b) in row.0.iter_mut().zip(&prow) {
                if !b.is_zero() {
                    *a = &*a - &f * b;
                }
            }
            row.1 = &row.1 - &f * &prhs;
        }
        rows[r] = (prow, prhs);
        pivot_cols.push(col);
        r += 1;
    }
    let consistent = rows[r..].iter().all(|(_, b)| b.is_zero());
    let mut sol = vec![Expr::zero(); n];
    for (i, &col) in pivot_cols.iter().enumerate() {
        sol[col] = rows[i].1.clone();
    }
    pivots.retain(|p| !p.is_constant());
    (sol, consistent, pivot_cols.len() < n, pivots)
}

/// Check that every bracket of `ops` is a constant combination of `ops`.
pub fn closure_check(ops: &[VectorField]) -> ClosureReport {
    let names = ops
        .iter()
        .enumerate()
        .map(|(i, o)| o.name.clone().unwrap_or_else(|| format!("X{}", i + 1)))
        .collect();
    let mut constants = Vec::new();
    let mut assumptions = Vec::new();
    let mut degenerate = false;
    let mut failure = None;
    'outer: for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let c = commutator(&ops[i], &ops[j]);
            if c.is_zero() {
                continue;
            }
            let (sol, ok, deficient, piv) = express(ops, &c);
            degenerate |= deficient;
            assumptions.extend(piv);
            if !ok {
                let mut residual = c.clone();
                for (k, s) in sol.iter().enumerate() {
                    if !s.is_zero() {
                        residual = residual.add(&ops[k].scale(&-s));
                    }
                }
                failure = Some((i, j, residual));
                break 'outer;
            }
            for (k, value) in sol.into_iter().enumerate() {
                if !value.is_zero() {
                    constants.push(StructureConstant { i, j, k, value });
                }
            }
        }
    }
    assumptions.sort();
    assumptions.dedup();
    ClosureReport { names, constants, failure, degenerate, assumptions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Context;

    fn field(text: &str) -> VectorField {
        VectorField::from_text(text, &Context::new()).unwrap()
    }

    #[test]
    fn translations_commute() {
        assert!(commutator(&VectorField::p_t(), &VectorField::p_x()).is_zero());
        let r = closure_check(&[VectorField::p_t(), VectorField::p_x()]);
        assert!(r.closes());
        assert!(r.constants.is_empty());
    }

    #[test]
    fn exponential_bracket() {
        let z1 = field("xi0=0\nxi1=0\neta1=exp(x)/(u-v)\neta2=-exp(x)/(u-v)");
        assert_eq!(commutator(&VectorField::p_x(), &z1), z1);
        let d = field("xi0=t\nxi1=0\neta1=-u\neta2=-v");
        let r = closure_check(&[VectorField::p_t(), VectorField::p_x(), d.clone(), z1.clone()]);
        assert!(r.closes(), "{r}");
        assert!(r.rational());
        assert_eq!(r.constant(0, 2, 0), Expr::one());
    }

    #[test]
    fn failure_reported() {
        let x2 = field("xi0=0\nxi1=x^2\neta1=0\neta2=0");
        let r = closure_check(&[VectorField::p_x(), x2]);
        assert!(!r.closes());
    }
}
