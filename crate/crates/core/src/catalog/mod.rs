//! Classified systems, the operator registry and equivalence
//! transformations, loaded from data files.

mod ini;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

pub use ini::{list, parse_ini, IniError, Section};

use crate::expr::{Bindings, Context, Expr, ParseError, Poly};
use crate::invariance::{
    check_invariance, closure_check, transform_system, ClosureReport, InvarianceError, PointTransformation,
    SKTSystem, Transformed, Witness, PARAM_NAMES,
};
use crate::jet::{JetError, VectorField};

const CATALOG: &str = include_str!("../../data/catalog.ini");
const OPERATORS: &str = include_str!("../../data/operators.ini");
const SUBSTITUTIONS: &str = include_str!("../../data/substitutions.ini");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{file}: {source}")]
    Ini { file: String, source: IniError },
    #[error("{section} (line {line}), key {key}: {source}")]
    Parse { section: String, line: usize, key: String, source: ParseError },
    #[error("{section}: {source}")]
    Operator { section: String, source: JetError },
    #[error("{section} (line {line}): {message}")]
    Invalid { section: String, line: usize, message: String },
    #[error("unknown catalog entry T{0}.{1}")]
    UnknownCase(u8, u8),
    #[error("unknown operator '{0}'")]
    UnknownOperator(String),
    #[error("unknown substitution '{0}'")]
    UnknownSubstitution(String),
    #[error("binding violates restriction '{0}'")]
    Restriction(String),
    #[error(transparent)]
    Transform(#[from] InvarianceError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Predicate `expr ≠ 0`.
#[derive(Clone, Debug)]
pub struct Restriction {
    pub text: String,
    pub expr: Expr,
}

impl Restriction {
    fn parse(text: &str, ctx: &Context) -> Result<Restriction, ParseError> {
        let (l, r) = match text.split_once("!=") {
            Some((l, r)) => (l, r),
            None => (text, "0"),
        };
        let expr = ctx.parse(l.trim())? - ctx.parse(r.trim())?;
        Ok(Restriction { text: text.trim().to_string(), expr })
    }

    /// False when the bindings make the predicate fail identically.
    pub fn holds_under(&self, b: &Bindings) -> bool {
        !self.expr.substitute(b).is_zero()
    }
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub table: u8,
    pub case_id: u8,
    pub system: SKTSystem,
    pub restrictions: Vec<Restriction>,
    pub operators: Vec<String>,
    pub substitutions: Vec<String>,
}

impl CatalogEntry {
    pub fn id(&self) -> String {
        format!("T{}.{}", self.table, self.case_id)
    }
}

/// Named operators; a name may carry several candidate encodings.
#[derive(Clone, Debug, Default)]
pub struct OperatorRegistry {
    ops: BTreeMap<String, Vec<(Option<String>, VectorField)>>,
}

impl OperatorRegistry {
    pub fn get(&self, name: &str) -> Option<&[(Option<String>, VectorField)]> {
        self.ops.get(name).map(|v| v.as_slice())
    }

    /// First (or only) encoding.
    pub fn field(&self, name: &str) -> Option<&VectorField> {
        self.get(name).and_then(|c| c.first()).map(|(_, f)| f)
    }

    /// A specific encoding `NAME:variant`, or the first one for `NAME`.
    pub fn resolve(&self, spec: &str) -> Option<&VectorField> {
        match spec.split_once(':') {
            Some((n, var)) => self.get(n)?.iter().find(|(v, _)| v.as_deref() == Some(var)).map(|(_, f)| f),
            None => self.field(spec),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, &VectorField)> {
        self.ops.iter().flat_map(|(n, c)| {
            c.iter().map(move |(v, f)| match v {
                Some(v) => (format!("{n}:{v}"), f),
                None => (n.clone(), f),
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
    pub registry: OperatorRegistry,
    pub substitutions: BTreeMap<String, PointTransformation>,
}

fn entry_context() -> Context {
    Context::new()
}

fn parse_entry(s: &Section, ctx: &Context) -> Result<CatalogEntry, CatalogError> {
    let invalid = |message: String| CatalogError::Invalid { section: s.name.clone(), line: s.line, message };
    let num = |key: &str| -> Result<u8, CatalogError> {
        s.get(key)
            .ok_or_else(|| invalid(format!("missing key '{key}'")))?
            .parse()
            .map_err(|_| invalid(format!("'{key}' is not a small integer")))
    };
    let table = num("table")?;
    let case_id = num("case")?;
    let parse = |key: &str, v: &str| {
        ctx.parse(v)
            .map_err(|source| CatalogError::Parse { section: s.name.clone(), line: s.line, key: key.to_string(), source })
    };
    let mut system = SKTSystem::zero();
    for (k, v) in &s.entries {
        if PARAM_NAMES.contains(&k.as_str()) {
            system.set(k, parse(k, v)?).expect("known parameter");
        } else if !["table", "case", "restrictions", "operators", "substitutions"].contains(&k.as_str()) {
            return Err(invalid(format!("unknown key '{k}'")));
        }
    }
    let restrictions = list(s.get("restrictions").unwrap_or(""))
        .iter()
        .map(|r| {
            Restriction::parse(r, ctx).map_err(|source| CatalogError::Parse {
                section: s.name.clone(),
                line: s.line,
                key: "restrictions".into(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(CatalogEntry {
        table,
        case_id,
        system,
        restrictions,
        operators: list(s.get("operators").unwrap_or("")),
        substitutions: list(s.get("substitutions").unwrap_or("")),
    })
}

fn parse_operators(text: &str) -> Result<OperatorRegistry, CatalogError> {
    let ctx = entry_context();
    let sections = parse_ini(text).map_err(|source| CatalogError::Ini { file: "operators".into(), source })?;
    let mut reg = OperatorRegistry::default();
    for s in sections {
        let Some(full) = s.name.strip_prefix("operator.") else {
            return Err(CatalogError::Invalid {
                section: s.name.clone(),
                line: s.line,
                message: "expected [operator.NAME]".into(),
            });
        };
        let body: String = s.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let (name, variant) = match full.split_once(':') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (full.to_string(), None),
        };
        let field = VectorField::from_text(&body, &ctx)
            .map_err(|source| CatalogError::Operator { section: s.name.clone(), source })?
            .named(&name);
        reg.ops.entry(name).or_default().push((variant, field));
    }
    Ok(reg)
}

fn parse_substitutions(text: &str) -> Result<BTreeMap<String, PointTransformation>, CatalogError> {
    let ctx = Context::new().with_param("e1").with_param("e2");
    let sections = parse_ini(text).map_err(|source| CatalogError::Ini { file: "substitutions".into(), source })?;
    let mut out = BTreeMap::new();
    for s in sections {
        let Some(id) = s.name.strip_prefix("substitution.") else {
            return Err(CatalogError::Invalid {
                section: s.name.clone(),
                line: s.line,
                message: "expected [substitution.ID]".into(),
            });
        };
        let mut maps = Vec::new();
        for key in ["t", "x", "u", "v"] {
            let v = s.get(key).ok_or_else(|| CatalogError::Invalid {
                section: s.name.clone(),
                line: s.line,
                message: format!("missing key '{key}'"),
            })?;
            let e = ctx.parse(v).map_err(|source| CatalogError::Parse {
                section: s.name.clone(),
                line: s.line,
                key: key.into(),
                source,
            })?;
            maps.push(e);
        }
        let tr = PointTransformation::from_maps(id, &maps[0], &maps[1], &maps[2], &maps[3])?;
        out.insert(id.to_string(), tr);
    }
    Ok(out)
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> Catalog {
        Catalog::from_texts(CATALOG, OPERATORS, SUBSTITUTIONS).expect("bundled catalog is valid")
    }

    pub fn from_texts(catalog: &str, operators: &str, substitutions: &str) -> Result<Catalog, CatalogError> {
        let registry = parse_operators(operators)?;
        let substitutions = parse_substitutions(substitutions)?;
        let ctx = entry_context();
        let sections = parse_ini(catalog).map_err(|source| CatalogError::Ini { file: "catalog".into(), source })?;
        let mut entries = Vec::new();
        for s in sections {
            if s.name != "entry" {
                return Err(CatalogError::Invalid {
                    section: s.name.clone(),
                    line: s.line,
                    message: "expected [entry]".into(),
                });
            }
            let e = parse_entry(&s, &ctx)?;
            for op in &e.operators {
                if registry.get(op).is_none() {
                    return Err(CatalogError::UnknownOperator(format!("{op} in {}", e.id())));
                }
            }
            entries.push(e);
        }
        Ok(Catalog { entries, registry, substitutions })
    }

    /// Read a catalog file. `operators.ini` and `substitutions.ini` next to it
    /// are used when present, the bundled ones otherwise.
    pub fn load(path: &Path) -> Result<Catalog, CatalogError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| CatalogError::Io { path: p.display().to_string(), source })
        };
        let catalog = read(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let sibling = |name: &str, fallback: &str| -> Result<String, CatalogError> {
            let p = dir.join(name);
            if p.exists() && p != path {
                read(&p)
            } else {
                Ok(fallback.to_string())
            }
        };
        Catalog::from_texts(&catalog, &sibling("operators.ini", OPERATORS)?, &sibling("substitutions.ini", SUBSTITUTIONS)?)
    }

    pub fn entry(&self, table: u8, case_id: u8) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.table == table && e.case_id == case_id)
    }

    pub fn substitution(&self, id: &str) -> Result<&PointTransformation, CatalogError> {
        self.substitutions.get(id).ok_or_else(|| CatalogError::UnknownSubstitution(id.to_string()))
    }

    /// Concrete system and operators (first encoding of each name) for an
    /// entry; unbound parameters stay symbolic.
    pub fn instantiate(
        &self,
        table: u8,
        case_id: u8,
        bindings: &Bindings,
    ) -> Result<(SKTSystem, Vec<VectorField>), CatalogError> {
        let e = self.entry(table, case_id).ok_or(CatalogError::UnknownCase(table, case_id))?;
        if let Some(r) = e.restrictions.iter().find(|r| !r.holds_under(bindings)) {
            return Err(CatalogError::Restriction(r.text.clone()));
        }
        let sys = e.system.substitute(bindings);
        let ops = e
            .operators
            .iter()
            .map(|n| {
                let f = self.registry.field(n).ok_or_else(|| CatalogError::UnknownOperator(n.clone()))?;
                let mut g = f.map(|c| c.substitute(bindings));
                g.name = Some(n.clone());
                Ok(g)
            })
            .collect::<Result<_, CatalogError>>()?;
        Ok((sys, ops))
    }

    pub fn validate_all(&self) -> ValidationReport {
        self.validate(&self.entries.iter().collect::<Vec<_>>())
    }

    /// Check every listed operator of the given entries and the closure of
    /// each algebra. Entries are processed in parallel; rows keep the
    /// (table, case) order.
    pub fn validate(&self, entries: &[&CatalogEntry]) -> ValidationReport {
        let start = Instant::now();
        let mut rows: Vec<EntryReport> = entries.par_iter().map(|e| self.validate_entry(e)).collect();
        rows.sort_by_key(|r| (r.table, r.case_id));
        ValidationReport { rows, elapsed: start.elapsed() }
    }

    pub fn validate_entry(&self, e: &CatalogEntry) -> EntryReport {
        let start = Instant::now();
        let mut operators = Vec::new();
        let mut chosen = Vec::new();
        for name in &e.operators {
            let candidates = self.registry.get(name).unwrap_or(&[]);
            let mut tried = Vec::new();
            for (variant, field) in candidates {
                let v = check_invariance(&e.system, field);
                let ok = v.invariant;
                tried.push((variant.clone(), field.clone(), v));
                if ok {
                    break;
                }
            }
            let (variant, field, verdict) = match tried.iter().position(|(_, _, v)| v.invariant) {
                Some(i) => tried.swap_remove(i),
                None => tried.swap_remove(0),
            };
            let rejected = if candidates.len() > 1 {
                candidates.iter().filter_map(|(v, _)| v.clone()).filter(|v| Some(v) != variant.as_ref()).collect()
            } else {
                Vec::new()
            };
            chosen.push(field);
            operators.push(OperatorVerdict {
                name: name.clone(),
                variant,
                rejected,
                invariant: verdict.invariant,
                witnesses: verdict.witnesses,
                assumptions: verdict.assumptions,
            });
        }
        let closure = closure_check(&chosen);
        EntryReport { table: e.table, case_id: e.case_id, operators, closure, elapsed: start.elapsed() }
    }

    /// Single-sign mutations of an entry: negate one nonzero system
    /// coefficient, or flip the sign of one term of one operator coefficient.
    pub fn sign_mutations(&self, e: &CatalogEntry) -> Vec<Mutation> {
        let base_ops: Vec<VectorField> =
            e.operators.iter().map(|n| self.registry.field(n).expect("registered").clone()).collect();
        let mut out = Vec::new();
        for (i, name) in PARAM_NAMES.iter().enumerate() {
            let p = &e.system.params[i];
            if p.is_zero() {
                continue;
            }
            let mut s = e.system.clone();
            s.params[i] = -p;
            out.push(Mutation { description: format!("{name} -> -({p})"), system: s, operators: base_ops.clone() });
        }
        for (k, op) in base_ops.iter().enumerate() {
            for (c, coeff) in op.coefficients().into_iter().enumerate() {
                for (m, a) in coeff.num().terms() {
                    let flipped = coeff.num().sub(&Poly::term(m.clone(), a.clone()).scale(&crate::expr::rat(2)));
                    let Ok(new) = Expr::from_parts(flipped, coeff.den().clone()) else { continue };
                    let mut ops = base_ops.clone();
                    let mut cs = op.coefficients().map(Clone::clone);
                    cs[c] = new;
                    ops[k] = VectorField::from_coefficients(cs).named(&e.operators[k]);
                    out.push(Mutation {
                        description: format!("{}: flip term {} of {}", e.operators[k], Expr::from_poly(Poly::term(m.clone(), a.clone())), crate::jet::KEYS[c]),
                        system: e.system.clone(),
                        operators: ops,
                    });
                }
            }
        }
        out
    }

    /// First single-sign mutation that makes some listed operator fail.
    pub fn find_flipping_mutation(&self, e: &CatalogEntry) -> Option<(Mutation, String, Witness)> {
        for m in self.sign_mutations(e) {
            for op in &m.operators {
                let v = check_invariance(&m.system, op);
                if !v.invariant {
                    let name = op.name.clone().unwrap_or_default();
                    let w = v.witnesses[0].clone();
                    return Some((m, name, w));
                }
            }
        }
        None
    }
}

/// Apply a catalog substitution to a system.
pub fn apply_substitution(sys: &SKTSystem, tr: &PointTransformation) -> Result<Transformed, CatalogError> {
    Ok(transform_system(sys, tr)?)
}

#[derive(Clone, Debug)]
pub struct Mutation {
    pub description: String,
    pub system: SKTSystem,
    pub operators: Vec<VectorField>,
}

#[derive(Clone, Debug)]
pub struct OperatorVerdict {
    pub name: String,
    /// Encoding that was used when several exist.
    pub variant: Option<String>,
    pub rejected: Vec<String>,
    pub invariant: bool,
    pub witnesses: Vec<Witness>,
    pub assumptions: Vec<Poly>,
}

#[derive(Clone, Debug)]
pub struct EntryReport {
    pub table: u8,
    pub case_id: u8,
    pub operators: Vec<OperatorVerdict>,
    pub closure: ClosureReport,
    pub elapsed: Duration,
}

impl EntryReport {
    pub fn id(&self) -> String {
        format!("T{}.{}", self.table, self.case_id)
    }

    pub fn passed(&self) -> bool {
        self.operators.iter().all(|o| o.invariant)
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub rows: Vec<EntryReport>,
    pub elapsed: Duration,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(EntryReport::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&EntryReport, &OperatorVerdict)> {
        self.rows.iter().flat_map(|r| r.operators.iter().filter(|o| !o.invariant).map(move |o| (r, o)))
    }

    /// One CSV record per (entry, operator).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("entry,operator,status,witnesses,assumptions\n");
        for r in &self.rows {
            for o in &r.operators {
                let name = match &o.variant {
                    Some(v) => format!("{}:{v}", o.name),
                    None => o.name.clone(),
                };
                let assumptions: Vec<String> =
                    o.assumptions.iter().map(|p| Expr::from_poly(p.clone()).to_string()).collect();
                s.push_str(&format!(
                    "{},{},{},{},\"{}\"\n",
                    r.id(),
                    name,
                    if o.invariant { "invariant" } else { "FAIL" },
                    o.witnesses.len(),
                    assumptions.join("; ")
                ));
            }
        }
        s
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<6} {:<5} {:<8} {:<8} operators", "entry", "dim", "status", "closure")?;
        for r in &self.rows {
            let ops: Vec<String> = r
                .operators
                .iter()
                .map(|o| {
                    let mut s = o.name.clone();
                    if let Some(v) = &o.variant {
                        s.push_str(&format!("[{v}]"));
                    }
                    if !o.invariant {
                        s.push_str(&format!("(FAIL, {} witnesses)", o.witnesses.len()));
                    }
                    s
                })
                .collect();
            writeln!(
                f,
                "{:<6} {:<5} {:<8} {:<8} {}",
                r.id(),
                r.operators.len(),
                if r.passed() { "ok" } else { "FAIL" },
                if r.closure.closes() { "closes" } else { "open" },
                ops.join(", ")
            )?;
        }
        let pairs: usize = self.rows.iter().map(|r| r.operators.len()).sum();
        let failed = self.failures().count();
        write!(f, "{} entries, {} pairs, {} failures", self.rows.len(), pairs, failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_loads() {
        let c = Catalog::builtin();
        assert_eq!(c.entries.len(), 27);
        assert_eq!(c.registry.get("R").unwrap().len(), 2);
        assert!(c.substitution("37a.10").is_ok());
    }

    #[test]
    fn unknown_operator_rejected() {
        let bad = "[entry]\ntable = 1\ncase = 1\noperators = P_t, Nope\n";
        assert!(matches!(
            Catalog::from_texts(bad, OPERATORS, SUBSTITUTIONS),
            Err(CatalogError::UnknownOperator(_))
        ));
    }

    #[test]
    fn restriction_violation() {
        let c = Catalog::builtin();
        let mut b = Bindings::new();
        b.insert(crate::expr::Symbol::param("a1"), Expr::int(2));
        b.insert(crate::expr::Symbol::param("a2"), Expr::int(2));
        assert!(matches!(c.instantiate(1, 4, &b), Err(CatalogError::Restriction(_))));
    }
}
