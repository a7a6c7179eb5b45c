//! A small arithmetic expression language for field definitions.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom (('^' | '**') unary)?        right-associative
//! atom    := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers:
//! - coordinates `x1 .. xd`; `x` and `y` alias `x1` and `x2`
//! - `r2` is the squared Euclidean norm of the position, `r` its root
//! - constants `pi` and `e`
//! - any named parameter supplied at compile time
//!
//! Functions: `sin cos tan asin acos atan sinh cosh tanh exp ln log sqrt abs
//! sign floor ceil` (one argument), `atan2 pow min max` (two arguments).
//!
//! Expressions are compiled once into a tree with parameters and constant
//! subtrees folded, then evaluated per node.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Floor,
    Ceil,
    Atan2,
    Pow,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        use Func::*;
        Some(match name {
            "sin" => Sin,
            "cos" => Cos,
            "tan" => Tan,
            "asin" => Asin,
            "acos" => Acos,
            "atan" => Atan,
            "sinh" => Sinh,
            "cosh" => Cosh,
            "tanh" => Tanh,
            "exp" => Exp,
            "ln" | "log" => Ln,
            "sqrt" => Sqrt,
            "abs" => Abs,
            "sign" => Sign,
            "floor" => Floor,
            "ceil" => Ceil,
            "atan2" => Atan2,
            "pow" => Pow,
            "min" => Min,
            "max" => Max,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        match self {
            Func::Atan2 | Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn apply(self, args: &[f64]) -> f64 {
        let a = args[0];
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Asin => a.asin(),
            Func::Acos => a.acos(),
            Func::Atan => a.atan(),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh(),
            Func::Exp => a.exp(),
            Func::Ln => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
            Func::Sign => {
                if a > 0.0 {
                    1.0
                } else if a < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Func::Floor => a.floor(),
            Func::Ceil => a.ceil(),
            Func::Atan2 => a.atan2(args[1]),
            Func::Pow => a.powf(args[1]),
            Func::Min => a.min(args[1]),
            Func::Max => a.max(args[1]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    Coord(usize),
    R2,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Const(c) => *c,
            Node::Coord(i) => x[*i],
            Node::R2 => x.iter().map(|v| v * v).sum(),
            Node::Neg(a) => -a.eval(x),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Node::Call(f, args) => match args.len() {
                1 => f.apply(&[args[0].eval(x)]),
                _ => f.apply(&[args[0].eval(x), args[1].eval(x)]),
            },
        }
    }

    fn is_const(&self) -> Option<f64> {
        match self {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn uses_position(&self) -> bool {
        match self {
            Node::Const(_) => false,
            Node::Coord(_) | Node::R2 => true,
            Node::Neg(a) => a.uses_position(),
            Node::Bin(_, a, b) => a.uses_position() || b.uses_position(),
            Node::Call(_, args) => args.iter().any(Node::uses_position),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    // Small integer exponents are common (x^2) and powi is exact for them.
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A compiled scalar field `f(x)` over `R^d`.
#[derive(Clone)]
pub struct Expr {
    source: String,
    dim: usize,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Expr").field(&self.source).finish()
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source && self.dim == other.dim
    }
}

impl Expr {
    /// Compiles `source` for positions in `R^dim` with named parameters.
    pub fn parse(source: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<Expr> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            source,
            tokens,
            pos: 0,
            dim,
            params,
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.tokens.get(parser.pos) {
            return Err(parser.error(tok.offset, "unexpected trailing input"));
        }
        Ok(Expr {
            source: source.to_string(),
            dim,
            root,
        })
    }

    pub fn constant(value: f64, dim: usize) -> Expr {
        Expr {
            source: format!("{value:?}"),
            dim,
            root: Node::Const(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates at position `x` (length must equal `dim`).
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.root.eval(x)
    }

    /// The value if the expression does not depend on position.
    pub fn as_constant(&self) -> Option<f64> {
        self.root.is_const()
    }

    pub fn depends_on_position(&self) -> bool {
        self.root.uses_position()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(source: &str) -> Result<Vec<Token>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, msg: &str| Error::Parse {
        source_text: source.to_string(),
        position: pos,
        message: msg.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                i += 1;
                Tok::Caret
            }
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| err(start, &format!("bad number `{text}`")))?;
                out.push(Token {
                    tok: Tok::Num(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(source[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => return Err(err(i, &format!("unexpected character `{}`", c as char))),
        };
        out.push(Token { tok, offset: start });
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    source: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn error(&self, position: usize, message: &str) -> Error {
        Error::Parse {
            source_text: self.source.to_string(),
            position,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.source.len(), |t| t.offset)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(self.offset(), &format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = fold_bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = fold_bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                let inner = self.unary()?;
                Ok(match inner {
                    Node::Const(c) => Node::Const(-c),
                    other => Node::Neg(Box::new(other)),
                })
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(fold_bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let offset = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error(offset, "unexpected end of expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let func =
                        Func::lookup(&name).ok_or_else(|| self.error(offset, &format!("unknown function `{name}`")))?;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)` after arguments")?;
                    if args.len() != func.arity() {
                        return Err(self.error(
                            offset,
                            &format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()),
                        ));
                    }
                    if args.iter().all(|a| a.is_const().is_some()) {
                        let vals: Vec<f64> = args.iter().filter_map(Node::is_const).collect();
                        return Ok(Node::Const(func.apply(&vals)));
                    }
                    return Ok(Node::Call(func, args));
                }
                self.identifier(&name, offset)
            }
            _ => Err(self.error(offset, "expected a number, identifier or `(`")),
        }
    }

    fn identifier(&self, name: &str, offset: usize) -> Result<Node> {
        if let Some(v) = self.params.get(name) {
            return Ok(Node::Const(*v));
        }
        match name {
            "pi" => return Ok(Node::Const(std::f64::consts::PI)),
            "e" => return Ok(Node::Const(std::f64::consts::E)),
            "r2" => return Ok(Node::R2),
            "r" => return Ok(Node::Call(Func::Sqrt, vec![Node::R2])),
            "x" if self.dim >= 1 => return Ok(Node::Coord(0)),
            "y" if self.dim >= 2 => return Ok(Node::Coord(1)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            if (1..=self.dim).contains(&idx) {
                return Ok(Node::Coord(idx - 1));
            }
            return Err(self.error(
                offset,
                &format!("coordinate `{name}` out of range for dimension {}", self.dim),
            ));
        }
        Err(self.error(offset, &format!("unknown identifier `{name}`")))
    }
}

fn fold_bin(op: BinOp, a: Node, b: Node) -> Node {
    let folded = Node::Bin(op, Box::new(a), Box::new(b));
    match &folded {
        Node::Bin(_, a, b) if a.is_const().is_some() && b.is_const().is_some() => Node::Const(folded.eval(&[])),
        _ => folded,
    }
}
