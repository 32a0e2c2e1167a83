//! Interned symbols: coordinates, jet variables, parameters, opaque
//! functions and transcendental atoms.
//!
//! Every symbol is interned in a process-wide table, so two symbols are
//! equal iff they are the same allocation. Ordering is structural (class,
//! then canonical key) and therefore independent of interning order.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use once_cell::sync::Lazy;

use super::Expr;

/// Independent coordinates of the base space plus the two dependent
/// variables, in the fixed order `t, x, u, v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    T,
    X,
    U,
    V,
}

impl Coord {
    pub const ALL: [Coord; 4] = [Coord::T, Coord::X, Coord::U, Coord::V];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            Coord::T => 't',
            Coord::X => 'x',
            Coord::U => 'u',
            Coord::V => 'v',
        }
    }

    pub fn from_letter(c: char) -> Option<Coord> {
        match c {
            't' => Some(Coord::T),
            'x' => Some(Coord::X),
            'u' => Some(Coord::U),
            'v' => Some(Coord::V),
            _ => None,
        }
    }

    /// The symbol carrying this coordinate (`u` and `v` are order-0 jets).
    pub fn symbol(self) -> Symbol {
        match self {
            Coord::T => Symbol::base('t'),
            Coord::X => Symbol::base('x'),
            Coord::U => Symbol::jet(Dependent::U, 0, 0),
            Coord::V => Symbol::jet(Dependent::V, 0, 0),
        }
    }
}

/// The two dependent variables `u` (index 1) and `v` (index 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dependent {
    U,
    V,
}

impl Dependent {
    pub fn letter(self) -> char {
        match self {
            Dependent::U => 'u',
            Dependent::V => 'v',
        }
    }

    pub fn other(self) -> Dependent {
        match self {
            Dependent::U => Dependent::V,
            Dependent::V => Dependent::U,
        }
    }

    pub fn coord(self) -> Coord {
        match self {
            Dependent::U => Coord::U,
            Dependent::V => Coord::V,
        }
    }
}

/// Function heads admitted by the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Exp => "exp",
            Head::Sin => "sin",
            Head::Cos => "cos",
            Head::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Head> {
        match s {
            "exp" => Some(Head::Exp),
            "sin" => Some(Head::Sin),
            "cos" => Some(Head::Cos),
            "sqrt" => Some(Head::Sqrt),
            _ => None,
        }
    }
}

/// Bit set over [`Coord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CoordSet(u8);

impl CoordSet {
    pub const EMPTY: CoordSet = CoordSet(0);
    pub const ALL: CoordSet = CoordSet(0b1111);

    pub fn of(coords: &[Coord]) -> CoordSet {
        CoordSet(coords.iter().fold(0, |m, c| m | (1 << c.index())))
    }

    pub fn contains(self, c: Coord) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Coord> {
        Coord::ALL.into_iter().filter(move |c| self.contains(*c))
    }
}

#[derive(Debug)]
pub enum SymbolKind {
    /// `t` or `x`.
    Base(Coord),
    /// `u`/`v` differentiated `t` times in time and `x` times in space.
    Jet { dep: Dependent, t: u8, x: u8 },
    Param,
    /// The constant π.
    Pi,
    /// Opaque function of a subset of the coordinates, with a derivative
    /// multi-index (counts per coordinate in `t, x, u, v` order).
    Function { name: String, deps: CoordSet, index: [u8; 4] },
    /// Transcendental or algebraic application with a canonical argument.
    Atom { head: Head, arg: Expr },
}

pub struct SymbolData {
    kind: SymbolKind,
    name: String,
    key: String,
    class: u8,
    rank: u32,
}

/// Interned symbol handle.
#[derive(Clone)]
pub struct Symbol(Arc<SymbolData>);

static TABLE: Lazy<RwLock<HashMap<String, Symbol>>> = Lazy::new(|| RwLock::new(HashMap::new()));

fn intern(key: String, make: impl FnOnce(String) -> SymbolData) -> Symbol {
    if let Some(s) = TABLE.read().expect("symbol table poisoned").get(&key) {
        return s.clone();
    }
    let mut table = TABLE.write().expect("symbol table poisoned");
    if let Some(s) = table.get(&key) {
        return s.clone();
    }
    let sym = Symbol(Arc::new(make(key.clone())));
    table.insert(key, sym.clone());
    sym
}

const CLASS_BASE: u8 = 0;
const CLASS_JET: u8 = 1;
const CLASS_FUNCTION: u8 = 2;
const CLASS_ATOM: u8 = 3;
const CLASS_PARAM: u8 = 4;
const CLASS_PI: u8 = 5;

impl Symbol {
    pub fn base(letter: char) -> Symbol {
        let coord = match letter {
            't' => Coord::T,
            'x' => Coord::X,
            _ => panic!("base variable must be t or x"),
        };
        let name = letter.to_string();
        intern(format!("b:{name}"), |key| SymbolData {
            kind: SymbolKind::Base(coord),
            name,
            key,
            class: CLASS_BASE,
            rank: 0,
        })
    }

    pub fn t() -> Symbol {
        Symbol::base('t')
    }

    pub fn x() -> Symbol {
        Symbol::base('x')
    }

    pub fn u() -> Symbol {
        Symbol::jet(Dependent::U, 0, 0)
    }

    pub fn v() -> Symbol {
        Symbol::jet(Dependent::V, 0, 0)
    }

    pub fn jet(dep: Dependent, t: u8, x: u8) -> Symbol {
        let mut name = dep.letter().to_string();
        if t + x > 0 {
            name.push('_');
            name.extend(std::iter::repeat('t').take(t as usize));
            name.extend(std::iter::repeat('x').take(x as usize));
        }
        // Sort jets by total order first so that `u` precedes `u_x`.
        let key = format!("j:{}{}{}:{}", t + x, dep.letter(), t, name);
        intern(key, |key| SymbolData {
            kind: SymbolKind::Jet { dep, t, x },
            name,
            key,
            class: CLASS_JET,
            rank: 0,
        })
    }

    pub fn param(name: &str) -> Symbol {
        let name = name.to_string();
        intern(format!("p:{name}"), |key| SymbolData {
            kind: SymbolKind::Param,
            name,
            key,
            class: CLASS_PARAM,
            rank: 0,
        })
    }

    pub fn pi() -> Symbol {
        intern("pi".to_string(), |key| SymbolData {
            kind: SymbolKind::Pi,
            name: "pi".to_string(),
            key,
            class: CLASS_PI,
            rank: 0,
        })
    }

    /// Opaque function `name(deps...)` differentiated according to `index`.
    pub fn function(name: &str, deps: CoordSet, index: [u8; 4]) -> Symbol {
        let mut rendered = name.to_string();
        if index.iter().any(|&k| k > 0) {
            rendered.push('_');
            for c in Coord::ALL {
                rendered.extend(std::iter::repeat(c.letter()).take(index[c.index()] as usize));
            }
        }
        let order: u8 = index.iter().sum();
        let key = format!("f:{name}:{}:{order}:{index:?}", deps.0);
        let fname = name.to_string();
        intern(key, |key| SymbolData {
            kind: SymbolKind::Function { name: fname, deps, index },
            name: rendered,
            key,
            class: CLASS_FUNCTION,
            rank: 0,
        })
    }

    /// Raw atom constructor; callers are responsible for canonicalizing
    /// `arg` (see `Expr::exp` and friends).
    pub(crate) fn atom(head: Head, arg: Expr) -> Symbol {
        let rendered = format!("{}({})", head.name(), arg);
        let rank = 1 + arg.symbols().iter().map(|s| s.rank()).max().unwrap_or(0);
        intern(format!("a:{rendered}"), |key| SymbolData {
            kind: SymbolKind::Atom { head, arg },
            name: rendered,
            key,
            class: CLASS_ATOM,
            rank,
        })
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.0.kind
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    /// Nesting depth for atoms, zero otherwise.
    pub fn rank(&self) -> u32 {
        self.0.rank
    }

    pub fn is_jet(&self) -> bool {
        matches!(self.0.kind, SymbolKind::Jet { .. })
    }

    /// Jet variable of order at least one.
    pub fn is_derivative_jet(&self) -> bool {
        matches!(self.0.kind, SymbolKind::Jet { t, x, .. } if t + x > 0)
    }

    pub fn jet_order(&self) -> Option<(Dependent, u8, u8)> {
        match self.0.kind {
            SymbolKind::Jet { dep, t, x } => Some((dep, t, x)),
            _ => None,
        }
    }

    pub fn coord(&self) -> Option<Coord> {
        match self.0.kind {
            SymbolKind::Base(c) => Some(c),
            SymbolKind::Jet { dep, t: 0, x: 0 } => Some(dep.coord()),
            _ => None,
        }
    }

    pub fn atom_parts(&self) -> Option<(Head, &Expr)> {
        match &self.0.kind {
            SymbolKind::Atom { head, arg } => Some((*head, arg)),
            _ => None,
        }
    }

    /// True for atoms carrying a polynomial relation (`sqrt`, `sin`).
    pub fn is_algebraic(&self) -> bool {
        matches!(
            self.0.kind,
            SymbolKind::Atom { head: Head::Sqrt | Head::Sin, .. }
        )
    }

    /// True when the symbol varies with some coordinate `t, x, u, v`
    /// (directly, through a function dependency, or through an atom argument).
    pub fn depends_on_coords(&self) -> bool {
        match &self.0.kind {
            SymbolKind::Base(_) | SymbolKind::Jet { .. } => true,
            SymbolKind::Param | SymbolKind::Pi => false,
            SymbolKind::Function { deps, .. } => *deps != CoordSet::EMPTY,
            SymbolKind::Atom { arg, .. } => arg.symbols().iter().any(|s| s.depends_on_coords()),
        }
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (Arc::as_ptr(&self.0) as usize).hash(state)
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0
            .class
            .cmp(&other.0.class)
            .then_with(|| self.0.key.cmp(&other.0.key))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_gives_pointer_equality() {
        assert_eq!(Symbol::param("d12"), Symbol::param("d12"));
        assert_ne!(Symbol::param("d12"), Symbol::param("d21"));
        assert_eq!(Symbol::jet(Dependent::U, 1, 1).name(), "u_tx");
        assert_eq!(Symbol::u().name(), "u");
    }

    #[test]
    fn jets_order_by_total_order() {
        assert!(Symbol::u() < Symbol::jet(Dependent::U, 0, 1));
        assert!(Symbol::jet(Dependent::V, 0, 1) < Symbol::jet(Dependent::U, 0, 2));
        assert!(Symbol::t() < Symbol::u());
    }

    #[test]
    fn function_names_render_multi_index() {
        let s = Symbol::function("eta1", CoordSet::ALL, [0, 1, 1, 0]);
        assert_eq!(s.name(), "eta1_xu");
        let restricted = Symbol::function("xi0", CoordSet::of(&[Coord::T]), [1, 0, 0, 0]);
        let general = Symbol::function("xi0", CoordSet::ALL, [1, 0, 0, 0]);
        assert_ne!(restricted, general);
        assert_eq!(restricted.name(), general.name());
    }
}
