//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expression ::= term (('+'|'-') term)*
//! term       ::= factor (('*'|'/') factor)*
//! factor     ::= base ('^' integer)?
//! base       ::= number | identifier | call | '(' expression ')' | '-' base
//! call       ::= ('exp'|'sin'|'cos'|'sqrt') '(' expression ')'
//! ```
//!
//! Parsing produces an [`Ast`] first; conversion to [`Expr`] resolves
//! identifiers through a [`Context`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use super::{Coord, CoordSet, Dependent, Expr, Head, Symbol};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("column {column}: {message}")]
pub struct ParseError {
    /// 1-based column of the offending character.
    pub column: usize,
    pub message: String,
}

fn err<T>(column: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { column, message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Num(BigRational),
    Ident { name: String, column: usize },
    Neg(Box<Ast>),
    Bin { op: BinOp, lhs: Box<Ast>, rhs: Box<Ast>, column: usize },
    Pow(Box<Ast>, u32),
    Call(Head, Box<Ast>),
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Num(r) => {
                if r.is_integer() {
                    write!(f, "{}", r.numer())
                } else {
                    write!(f, "({}/{})", r.numer(), r.denom())
                }
            }
            Ast::Ident { name, .. } => f.write_str(name),
            Ast::Neg(a) => write!(f, "-({a})"),
            Ast::Bin { op, lhs, rhs, .. } => {
                let c = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "({lhs} {c} {rhs})")
            }
            Ast::Pow(a, n) => write!(f, "({a})^{n}"),
            Ast::Call(h, a) => write!(f, "{}({a})", h.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[start..i].iter().collect();
            let mut frac = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    frac.push(chars[i]);
                    i += 1;
                }
            }
            let mut exp10: i64 = 0;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                let mut sign = 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    sign = if chars[j] == '-' { -1 } else { 1 };
                    j += 1;
                }
                let ds = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j == ds {
                    return err(i + 1, "malformed exponent in number");
                }
                let digits: String = chars[ds..j].iter().collect();
                exp10 = sign * digits.parse::<i64>().map_err(|_| ParseError { column: i + 1, message: "exponent too large".into() })?;
                i = j;
            }
            let mantissa: BigInt = format!("{}{}", if int_part.is_empty() { "0" } else { &int_part }, frac)
                .parse()
                .expect("digits");
            let scale = exp10 - frac.len() as i64;
            let ten = BigInt::from(10);
            let value = if scale >= 0 {
                BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
            } else {
                BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
            };
            out.push((Tok::Num(value), col));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else {
            return err(col, format!("unexpected character '{c}'"));
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

impl Lexer {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Sym(s) if *s == c => {
                self.bump();
                Ok(())
            }
            _ => err(self.col(), format!("expected '{c}'")),
        }
    }

    fn expression(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (_, column) = self.bump();
            let rhs = self.term()?;
            lhs = Ast::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs), column };
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (_, column) = self.bump();
            let rhs = self.factor()?;
            lhs = Ast::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs), column };
        }
    }

    fn factor(&mut self) -> Result<Ast, ParseError> {
        let base = self.base()?;
        if let Tok::Sym('^') = self.peek() {
            self.bump();
            let col = self.col();
            match self.bump() {
                (Tok::Num(n), _) if n.is_integer() => {
                    let e: u32 = n
                        .to_integer()
                        .try_into()
                        .map_err(|_| ParseError { column: col, message: "exponent too large".into() })?;
                    return Ok(Ast::Pow(Box::new(base), e));
                }
                _ => return err(col, "expected a nonnegative integer exponent"),
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Ast, ParseError> {
        let col = self.col();
        match self.bump() {
            (Tok::Num(n), _) => Ok(Ast::Num(n)),
            (Tok::Sym('-'), _) => Ok(Ast::Neg(Box::new(self.base()?))),
            (Tok::Sym('('), _) => {
                let e = self.expression()?;
                self.expect(')')?;
                Ok(e)
            }
            (Tok::Ident(name), _) => {
                if let Tok::Sym('(') = self.peek() {
                    let Some(head) = Head::from_name(&name) else {
                        return err(col, format!("unknown function '{name}'"));
                    };
                    self.bump();
                    let arg = self.expression()?;
                    self.expect(')')?;
                    return Ok(Ast::Call(head, Box::new(arg)));
                }
                Ok(Ast::Ident { name, column: col })
            }
            (Tok::End, _) => err(col, "unexpected end of input"),
            (Tok::Sym(c), _) => err(col, format!("unexpected '{c}'")),
        }
    }
}

/// Parse text into an AST without resolving identifiers.
pub fn parse_ast(text: &str) -> Result<Ast, ParseError> {
    let mut lx = Lexer { toks: lex(text)?, pos: 0 };
    let ast = lx.expression()?;
    if *lx.peek() != Tok::End {
        return err(lx.col(), "unexpected trailing input");
    }
    Ok(ast)
}

/// Parse with the default [`Context`].
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    Context::default().parse(text)
}

/// Symbol table used to resolve identifiers.
#[derive(Debug, Clone)]
pub struct Context {
    functions: BTreeMap<String, CoordSet>,
    params: BTreeSet<String>,
    permissive: bool,
}

const STANDARD_PARAMS: &[&str] = &[
    "d1", "d2", "d11", "d12", "d21", "d22", "a1", "a2", "b1", "b2", "c1", "c2", "a", "b", "c", "p",
    "beta",
];

const INDEXED_FAMILIES: &[&str] = &["alpha", "lambda", "beta", "p"];

impl Default for Context {
    fn default() -> Context {
        Context {
            functions: BTreeMap::new(),
            params: STANDARD_PARAMS.iter().map(|s| s.to_string()).collect(),
            permissive: false,
        }
    }
}

fn jet_from_name(name: &str) -> Option<Symbol> {
    let (dep, rest) = match name.as_bytes().first()? {
        b'u' => (Dependent::U, &name[1..]),
        b'v' => (Dependent::V, &name[1..]),
        _ => return None,
    };
    let (t, x) = match rest {
        "" => (0, 0),
        "_t" => (1, 0),
        "_x" => (0, 1),
        "_xx" => (0, 2),
        "_tx" => (1, 1),
        "_tt" => (2, 0),
        _ => return None,
    };
    Some(Symbol::jet(dep, t, x))
}

impl Context {
    pub fn new() -> Context {
        Context::default()
    }

    /// Declare an opaque function of the given coordinates.
    pub fn with_function(mut self, name: &str, deps: &[Coord]) -> Context {
        self.functions.insert(name.to_string(), CoordSet::of(deps));
        self
    }

    pub fn with_param(mut self, name: &str) -> Context {
        self.params.insert(name.to_string());
        self
    }

    /// Treat every otherwise unknown identifier as a parameter.
    pub fn permissive(mut self) -> Context {
        self.permissive = true;
        self
    }

    fn is_param(&self, name: &str) -> bool {
        if self.permissive || self.params.contains(name) {
            return true;
        }
        INDEXED_FAMILIES.iter().any(|fam| {
            name.strip_prefix(fam)
                .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
        })
    }

    fn function(&self, ident: &str) -> Option<Symbol> {
        let (base, suffix) = match ident.split_once('_') {
            Some((b, s)) => (b, s),
            None => (ident, ""),
        };
        let deps = *self.functions.get(base)?;
        let mut index = [0u8; 4];
        for ch in suffix.chars() {
            let c = Coord::from_letter(ch)?;
            if !deps.contains(c) {
                return None;
            }
            index[c.index()] += 1;
        }
        Some(Symbol::function(base, deps, index))
    }

    /// Resolve an identifier to a symbol.
    pub fn resolve(&self, name: &str) -> Option<Symbol> {
        match name {
            "t" => return Some(Symbol::t()),
            "x" => return Some(Symbol::x()),
            "pi" => return Some(Symbol::pi()),
            _ => {}
        }
        if let Some(j) = jet_from_name(name) {
            return Some(j);
        }
        if let Some(f) = self.function(name) {
            return Some(f);
        }
        if self.is_param(name) && Head::from_name(name).is_none() {
            return Some(Symbol::param(name));
        }
        None
    }

    pub fn parse(&self, text: &str) -> Result<Expr, ParseError> {
        self.to_expr(&parse_ast(text)?)
    }

    pub fn to_expr(&self, ast: &Ast) -> Result<Expr, ParseError> {
        Ok(match ast {
            Ast::Num(n) => Expr::constant(n.clone()),
            Ast::Ident { name, column } => match self.resolve(name) {
                Some(s) => Expr::symbol(&s),
                None => return err(*column, format!("unknown identifier '{name}'")),
            },
            Ast::Neg(a) => -self.to_expr(a)?,
            Ast::Bin { op, lhs, rhs, column } => {
                let l = self.to_expr(lhs)?;
                let r = self.to_expr(rhs)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => match l.checked_div(&r) {
                        Ok(e) => e,
                        Err(e) => return err(*column, e.to_string()),
                    },
                }
            }
            Ast::Pow(a, n) => self.to_expr(a)?.pow(*n as i32),
            Ast::Call(h, a) => Expr::apply(*h, &self.to_expr(a)?),
        })
    }
}

impl Ast {
    /// Identifiers occurring in the tree.
    pub fn identifiers(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |a| {
            if let Ast::Ident { name, .. } = a {
                out.insert(name.clone());
            }
        });
        out
    }

    fn walk(&self, f: &mut impl FnMut(&Ast)) {
        f(self);
        match self {
            Ast::Neg(a) | Ast::Pow(a, _) | Ast::Call(_, a) => a.walk(f),
            Ast::Bin { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            _ => {}
        }
    }

    pub fn num(n: i64) -> Ast {
        Ast::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Ast::Num(n) if n.is_zero())
    }

    pub fn is_one_literal(&self) -> bool {
        matches!(self, Ast::Num(n) if n.is_one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        assert_eq!(parse("-x^2").unwrap(), parse("x^2").unwrap());
        assert_eq!(parse("0 - x^2").unwrap(), -parse("x^2").unwrap());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("0.5").unwrap(), Expr::rational(1, 2));
        assert_eq!(parse("3/2").unwrap(), Expr::rational(3, 2));
        assert_eq!(parse("1e-2").unwrap(), Expr::rational(1, 100));
    }

    #[test]
    fn errors_carry_columns() {
        let e = parse("u + * v").unwrap_err();
        assert_eq!(e.column, 5);
        let e = parse("u + foo").unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("foo"));
        assert!(parse("2 x").is_err());
        assert!(parse("tan(x)").is_err());
        assert_eq!(parse("(u").unwrap_err().column, 3);
    }

    #[test]
    fn functions_resolve_with_derivative_index() {
        let ctx = Context::new().with_function("eta1", &Coord::ALL);
        let e = ctx.parse("eta1_xu").unwrap();
        let s = e.as_symbol().unwrap();
        assert_eq!(s, Symbol::function("eta1", CoordSet::ALL, [0, 1, 1, 0]));
        assert!(ctx.parse("eta2").is_err());
    }

    #[test]
    fn indexed_parameters() {
        assert!(parse("alpha1 + lambda2 + p").is_ok());
        assert!(parse("alpha").is_err());
    }
}
