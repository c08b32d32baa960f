//! Constraint surface syntax.
//!
//! ```text
//! expr     := or_expr
//! or_expr  := and_expr ("or" and_expr)*
//! and_expr := not_expr ("and" not_expr)*
//! not_expr := ["not"] cmp
//! cmp      := term op term | "(" expr ")" | bool_lit | bool-typed term
//! term     := int_lit | hex_bytes_lit | bool_lit | field_ref
//! field_ref:= payload.<name> | block.number | block.time | publisher
//! op       := == | != | < | <= | > | >=
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{EventDefinition, VarType};

pub const MAX_DEPTH: usize = 32;
pub const MAX_NODES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstraintError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("type error: {0}")]
    Type(String),
    #[error("expression too complex: {0}")]
    TooComplex(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

/// Static type of a term. Addresses and publisher keys compare as bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermType {
    Int,
    Bytes,
    Bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Int(i64),
    Bytes(Vec<u8>),
    Bool(bool),
    Field { index: usize, ty: VarType },
    BlockNumber,
    BlockTime,
    Publisher,
}

impl Term {
    pub fn term_type(&self) -> TermType {
        match self {
            Term::Int(_) | Term::BlockNumber | Term::BlockTime => TermType::Int,
            Term::Bytes(_) | Term::Publisher => TermType::Bytes,
            Term::Bool(_) => TermType::Bool,
            Term::Field { ty, .. } => match ty {
                VarType::Int => TermType::Int,
                VarType::Bytes | VarType::Address => TermType::Bytes,
                VarType::Bool => TermType::Bool,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Lit(bool),
    /// A bool-typed term standing alone.
    Test(Term),
    Cmp(CmpOp, Term, Term),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::Lit(true)
    }
}

impl Expr {
    /// Nodes in the tree. A comparison counts itself and both terms.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Lit(_) => 1,
            Expr::Test(_) => 2,
            Expr::Cmp(..) => 3,
            Expr::And(a, b) | Expr::Or(a, b) => 1 + a.node_count() + b.node_count(),
            Expr::Not(a) => 1 + a.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Lit(_) => 1,
            Expr::Test(_) | Expr::Cmp(..) => 2,
            Expr::And(a, b) | Expr::Or(a, b) => 1 + a.depth().max(b.depth()),
            Expr::Not(a) => 1 + a.depth(),
        }
    }

    pub fn comparisons(&self) -> usize {
        match self {
            Expr::Lit(_) => 0,
            Expr::Test(_) | Expr::Cmp(..) => 1,
            Expr::And(a, b) | Expr::Or(a, b) => a.comparisons() + b.comparisons(),
            Expr::Not(a) => a.comparisons(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(i64),
    Hex(Vec<u8>),
    Ident(String),
    Op(CmpOp),
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ConstraintError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| ConstraintError::Syntax { pos, msg: msg.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
            b'=' | b'!' | b'<' | b'>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    (b'=', Some(b'=')) => (CmpOp::Eq, 2),
                    (b'!', Some(b'=')) => (CmpOp::Ne, 2),
                    (b'<', Some(b'=')) => (CmpOp::Le, 2),
                    (b'>', Some(b'=')) => (CmpOp::Ge, 2),
                    (b'<', _) => (CmpOp::Lt, 1),
                    (b'>', _) => (CmpOp::Gt, 1),
                    _ => return Err(err(start, "unknown operator")),
                };
                out.push((start, Tok::Op(op)));
                i += len;
            }
            b'0' if matches!(bytes.get(i + 1), Some(b'x') | Some(b'X')) => {
                i += 2;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
                let digits = &text[start + 2..i];
                let raw = hex::decode(digits).map_err(|_| err(start, "bad hex literal"))?;
                out.push((start, Tok::Hex(raw)));
            }
            b'-' | b'0'..=b'9' => {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let v: i64 = text[start..i].parse().map_err(|_| err(start, "bad integer literal"))?;
                out.push((start, Tok::Int(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => return Err(err(start, "unexpected character")),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    def: &'a EventDefinition,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn syntax(&self, msg: &str) -> ConstraintError {
        ConstraintError::Syntax { pos: self.offset(), msg: msg.to_string() }
    }

    fn keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self, depth: usize) -> Result<Expr, ConstraintError> {
        if depth > MAX_DEPTH {
            return Err(ConstraintError::TooComplex(format!("nesting deeper than {MAX_DEPTH}")));
        }
        let mut left = self.and_expr(depth)?;
        while self.keyword("or") {
            let right = self.and_expr(depth)?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self, depth: usize) -> Result<Expr, ConstraintError> {
        let mut left = self.not_expr(depth)?;
        while self.keyword("and") {
            let right = self.not_expr(depth)?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self, depth: usize) -> Result<Expr, ConstraintError> {
        if self.keyword("not") {
            return Ok(Expr::Not(Box::new(self.cmp(depth)?)));
        }
        self.cmp(depth)
    }

    fn cmp(&mut self, depth: usize) -> Result<Expr, ConstraintError> {
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let inner = self.expr(depth + 1)?;
            if self.peek() != Some(&Tok::RParen) {
                return Err(self.syntax("expected ')'"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        let left = self.term()?;
        let op = match self.peek() {
            Some(Tok::Op(op)) => *op,
            _ => {
                return match left {
                    Term::Bool(b) => Ok(Expr::Lit(b)),
                    t if t.term_type() == TermType::Bool => Ok(Expr::Test(t)),
                    _ => Err(self.syntax("expected comparison operator")),
                };
            }
        };
        self.pos += 1;
        let right = self.term()?;
        check_types(op, &left, &right)?;
        Ok(Expr::Cmp(op, left, right))
    }

    fn term(&mut self) -> Result<Term, ConstraintError> {
        let Some((_, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(self.syntax("unexpected end of constraint"));
        };
        let term = match tok {
            Tok::Int(v) => Term::Int(v),
            Tok::Hex(b) => Term::Bytes(b),
            Tok::Ident(name) => match name.as_str() {
                "true" => Term::Bool(true),
                "false" => Term::Bool(false),
                "block.number" => Term::BlockNumber,
                "block.time" => Term::BlockTime,
                "publisher" => Term::Publisher,
                other => {
                    let Some(field) = other.strip_prefix("payload.") else {
                        return Err(self.syntax(&format!("unknown identifier '{other}'")));
                    };
                    let Some((index, ty)) = self.def.variable(field) else {
                        return Err(ConstraintError::Type(format!("unknown field '{field}'")));
                    };
                    Term::Field { index, ty }
                }
            },
            _ => return Err(self.syntax("expected a term")),
        };
        self.pos += 1;
        Ok(term)
    }
}

fn check_types(op: CmpOp, left: &Term, right: &Term) -> Result<(), ConstraintError> {
    let (l, r) = (left.term_type(), right.term_type());
    if l != r {
        return Err(ConstraintError::Type(format!("cannot compare {l:?} with {r:?}")));
    }
    if l != TermType::Int && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
        return Err(ConstraintError::Type(format!("ordering comparison on {l:?}")));
    }
    Ok(())
}

/// Parses and type-checks `text` against the event schema. Empty text is
/// the always-true expression.
pub fn parse_constraint(text: &str, def: &EventDefinition) -> Result<Expr, ConstraintError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Ok(Expr::Lit(true));
    }
    let mut p = Parser { toks, pos: 0, end: text.len(), def };
    let expr = p.expr(1)?;
    if p.pos != p.toks.len() {
        return Err(p.syntax("trailing input"));
    }
    if expr.depth() > MAX_DEPTH {
        return Err(ConstraintError::TooComplex(format!("depth {} > {MAX_DEPTH}", expr.depth())));
    }
    if expr.node_count() > MAX_NODES {
        return Err(ConstraintError::TooComplex(format!(
            "{} nodes > {MAX_NODES}",
            expr.node_count()
        )));
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Address;

    fn def() -> EventDefinition {
        EventDefinition::new(
            Address::ZERO,
            vec![
                ("price".into(), VarType::Int),
                ("tag".into(), VarType::Bytes),
                ("live".into(), VarType::Bool),
            ],
            "",
        )
    }

    #[test]
    fn two_comparisons() {
        let e = parse_constraint("payload.price > 100 and block.number >= 50", &def()).unwrap();
        assert_eq!(e.comparisons(), 2);
        assert!(matches!(e, Expr::And(..)));
    }

    #[test]
    fn unknown_field_is_a_type_error() {
        assert!(matches!(
            parse_constraint("payload.missing == 1", &def()),
            Err(ConstraintError::Type(_))
        ));
    }

    #[test]
    fn empty_text_is_true() {
        assert_eq!(parse_constraint("", &def()).unwrap(), Expr::Lit(true));
        assert_eq!(parse_constraint("  ", &def()).unwrap(), Expr::Lit(true));
    }

    #[test]
    fn ordering_on_bytes_is_rejected() {
        assert!(matches!(
            parse_constraint("payload.tag < 0x01", &def()),
            Err(ConstraintError::Type(_))
        ));
        assert!(parse_constraint("payload.tag == 0x0102", &def()).is_ok());
    }

    #[test]
    fn precedence_and_binds_tighter_than_or() {
        let e = parse_constraint("true or false and false", &def()).unwrap();
        assert!(matches!(e, Expr::Or(..)));
    }

    #[test]
    fn bare_bool_field() {
        assert!(matches!(parse_constraint("not payload.live", &def()).unwrap(), Expr::Not(_)));
        assert!(parse_constraint("payload.price", &def()).is_err());
    }

    #[test]
    fn syntax_errors() {
        for bad in ["payload.price >", "(true", "true true", "1 == ", "x == 1", "a ? b"] {
            assert!(parse_constraint(bad, &def()).is_err(), "{bad}");
        }
    }

    #[test]
    fn limits() {
        let deep = format!("{}true{}", "(".repeat(40), ")".repeat(40));
        assert!(matches!(parse_constraint(&deep, &def()), Err(ConstraintError::TooComplex(_))));
        let wide = vec!["payload.price == 1"; 100].join(" or ");
        assert!(matches!(parse_constraint(&wide, &def()), Err(ConstraintError::TooComplex(_))));
    }
}
