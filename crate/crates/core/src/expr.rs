//! Arithmetic expressions over point coordinates `x1..xn`, used for
//! user-supplied costs and test functions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          right-associative
//! atom    := number | xK | func '(' sum (',' sum)* ')' | '(' sum ')'
//! func    := abs | min | max
//! ```
//!
//! The Unicode minus sign `−` is accepted as `-`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Abs,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    arity: usize,
}

impl Expr {
    pub fn source(&self) -> &str {
        &self.source
    }

    /// One more than the largest coordinate index referenced (0 for constants).
    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval<T: Scalar>(&self, coords: &[T]) -> Result<T> {
        if coords.len() < self.arity {
            return Err(Error::Evaluation(format!(
                "expression `{}` uses x{} but the point has dimension {}",
                self.source,
                self.arity,
                coords.len()
            )));
        }
        let v = eval_node(&self.root, coords);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!(
                "expression `{}` is not finite at {:?}",
                self.source, coords
            )))
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expression(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_expression(&s).map_err(serde::de::Error::custom)
    }
}

fn eval_node<T: Scalar>(node: &Node, x: &[T]) -> T {
    match node {
        Node::Num(v) => T::lit(*v),
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval_node(a, x),
        Node::Add(a, b) => eval_node(a, x) + eval_node(b, x),
        Node::Sub(a, b) => eval_node(a, x) - eval_node(b, x),
        Node::Mul(a, b) => eval_node(a, x) * eval_node(b, x),
        Node::Div(a, b) => eval_node(a, x) / eval_node(b, x),
        Node::Pow(a, b) => {
            let base = eval_node(a, x);
            let exp = eval_node(b, x);
            // integer exponents keep odd powers of negative bases real
            if exp.fract() == T::zero() && exp.abs() <= T::lit(64.0) {
                base.powi(exp.to_i32().unwrap_or(0))
            } else {
                base.powf(exp)
            }
        }
        Node::Call(f, args) => {
            let mut vals = args.iter().map(|a| eval_node(a, x));
            match f {
                Func::Abs => vals.next().unwrap().abs(),
                Func::Min => vals.fold(T::infinity(), T::min),
                Func::Max => vals.fold(T::neg_infinity(), T::max),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '*' | '/' | '^' | '-' | '−' => {
                out.push((i, Tok::Op(if c == '−' { '-' } else { c })));
                i += 1;
            }
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<f64>().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(chars[start..i].iter().collect())));
            }
            other => {
                return Err(Error::Parse {
                    position: i,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push((chars.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn at(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<X>(&self, message: impl Into<String>) -> Result<X> {
        Err(Error::Parse {
            position: self.at(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}"))
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Node::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let position = self.at();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "abs" => Some(Func::Abs),
                    "min" => Some(Func::Min),
                    "max" => Some(Func::Max),
                    _ => None,
                };
                if let Some(func) = func {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let mut args = vec![self.sum()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.sum()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    if func == Func::Abs && args.len() != 1 {
                        return Err(Error::Parse {
                            position,
                            message: "abs takes exactly one argument".into(),
                        });
                    }
                    return Ok(Node::Call(func, args));
                }
                match name.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                    Some(k) if k >= 1 && !name[1..].starts_with('0') => {
                        self.arity = self.arity.max(k);
                        Ok(Node::Var(k - 1))
                    }
                    _ => Err(Error::Parse {
                        position,
                        message: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            Tok::End => Err(Error::Parse {
                position,
                message: "unexpected end of expression".into(),
            }),
            other => Err(Error::Parse {
                position,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

/// Parses an expression over coordinates `x1..xn`.
pub fn parse_expression(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        arity: 0,
    };
    let root = p.sum()?;
    if *p.peek() != Tok::End {
        return p.fail("trailing input");
    }
    Ok(Expr {
        source: src.to_string(),
        root,
        arity: p.arity,
    })
}
