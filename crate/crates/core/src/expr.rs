//! Expression language used for immersion components, metrics, structure
//! tensors and coefficient functions.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-u1^2`
//! is `-(u1^2)` and `a^b^c` is `a^(b^c)`. Identifiers are either one of the
//! declared parameters, a function name followed by `(`, or a named constant
//! resolved through [`Bindings`] at evaluation time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, JetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl UnaryOp {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "atan" => UnaryOp::Atan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Atan => "atan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(String),
    /// Zero-based index into the declared parameter list.
    Param(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { position: usize, name: String },
}

impl ParseError {
    /// One-based character position of the error.
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { position, .. } | ParseError::UnknownIdentifier { position, .. } => *position,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound constant '{0}'")]
    Unbound(String),
    #[error("parameter index {index} out of range for {count} parameters")]
    ParamOutOfRange { index: usize, count: usize },
    #[error(transparent)]
    Domain(#[from] JetError),
}

/// Named constants available to expressions. `pi` is always preset.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    values: BTreeMap<String, f64>,
}

impl Default for Bindings {
    fn default() -> Self {
        let mut values = BTreeMap::new();
        values.insert("pi".to_string(), std::f64::consts::PI);
        Bindings { values }
    }
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn extend(&mut self, other: &Bindings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let value = text
                .parse::<f64>()
                .map_err(|_| ParseError::Syntax { position: pos, message: format!("malformed number '{text}'") })?;
            out.push((Token::Num(value), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), pos));
        } else if "+-*/^".contains(c) {
            out.push((Token::Op(c), pos));
            i += 1;
        } else if c == '(' {
            out.push((Token::LParen, pos));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, pos));
            i += 1;
        } else {
            return Err(ParseError::Syntax { position: pos, message: format!("unknown token '{c}'") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    end: usize,
    params: &'a [&'a str],
    constants: Option<&'a BTreeSet<String>>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Token::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax { position: self.here(), message: "expected ')'".into() }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let position = self.here();
        let Some((token, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(ParseError::Syntax { position, message: "unexpected end of input".into() });
        };
        self.pos += 1;
        match token {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    if let Some(Token::LParen) = self.peek() {
                        self.pos += 1;
                        let arg = self.expr()?;
                        self.expect_rparen()?;
                        return Ok(Expr::Unary(op, Box::new(arg)));
                    }
                    return Err(ParseError::Syntax { position, message: format!("function '{name}' needs '('") });
                }
                if let Some(i) = self.params.iter().position(|p| *p == name) {
                    return Ok(Expr::Param(i));
                }
                match self.constants {
                    Some(known) if !known.contains(&name) => Err(ParseError::UnknownIdentifier { position, name }),
                    _ => Ok(Expr::Const(name)),
                }
            }
            Token::Op(c) => Err(ParseError::Syntax { position, message: format!("unexpected '{c}'") }),
            Token::RParen => Err(ParseError::Syntax { position, message: "unexpected ')'".into() }),
        }
    }
}

fn parse_impl(source: &str, params: &[&str], constants: Option<&BTreeSet<String>>) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let end = source.chars().count() + 1;
    let mut parser = Parser { tokens, pos: 0, end, params, constants };
    let expr = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(ParseError::Syntax { position: parser.here(), message: "trailing input".into() });
    }
    Ok(expr)
}

/// Parses `source`; any identifier that is neither a parameter nor a function
/// becomes a named constant.
pub fn parse_expression(source: &str, params: &[&str]) -> Result<Expr, ParseError> {
    parse_impl(source, params, None)
}

/// Like [`parse_expression`] but rejects constants not listed in `constants`.
pub fn parse_expression_strict(source: &str, params: &[&str], constants: &BTreeSet<String>) -> Result<Expr, ParseError> {
    parse_impl(source, params, Some(constants))
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Names of the constants referenced anywhere in the tree.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(n) => {
                out.insert(n.clone());
            }
            Expr::Unary(_, a) => a.collect_constants(out),
            Expr::Binary(_, a, b) => {
                a.collect_constants(out);
                b.collect_constants(out);
            }
            Expr::Num(_) | Expr::Param(_) => {}
        }
    }

    pub fn max_param(&self) -> Option<usize> {
        match self {
            Expr::Param(i) => Some(*i),
            Expr::Unary(_, a) => a.max_param(),
            Expr::Binary(_, a, b) => match (a.max_param(), b.max_param()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
            Expr::Num(_) | Expr::Const(_) => None,
        }
    }

    /// Replaces parameter `i` by `replacements[i]`.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Param(i) => replacements[*i].clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.substitute(replacements))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute(replacements)), Box::new(b.substitute(replacements)))
            }
            Expr::Num(_) | Expr::Const(_) => self.clone(),
        }
    }

    fn depends_on_params(&self) -> bool {
        self.max_param().is_some()
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, params: &[f64], b: &Bindings) -> Result<f64, EvalError> {
        let jets: Vec<Jet> = params.iter().map(|&v| Jet::constant(params.len(), 0, v)).collect();
        Ok(self.eval_jets(&jets, params.len(), 0, b)?.value())
    }

    /// Evaluates with arbitrary jets substituted for the parameters. All
    /// argument jets must share `nvars`; constants become order-`order` jets.
    pub fn eval_jets(&self, params: &[Jet], nvars: usize, order: usize, b: &Bindings) -> Result<Jet, EvalError> {
        Ok(match self {
            Expr::Num(v) => Jet::constant(nvars, order, *v),
            Expr::Const(name) => {
                let v = b.get(name).ok_or_else(|| EvalError::Unbound(name.clone()))?;
                Jet::constant(nvars, order, v)
            }
            Expr::Param(i) => params
                .get(*i)
                .cloned()
                .ok_or(EvalError::ParamOutOfRange { index: *i, count: params.len() })?,
            Expr::Unary(op, a) => {
                let x = a.eval_jets(params, nvars, order, b)?;
                match op {
                    UnaryOp::Neg => -&x,
                    UnaryOp::Sin => x.sin(),
                    UnaryOp::Cos => x.cos(),
                    UnaryOp::Tan => x.tan()?,
                    UnaryOp::Exp => x.exp(),
                    UnaryOp::Log => x.ln()?,
                    UnaryOp::Sqrt => x.sqrt()?,
                    UnaryOp::Atan => x.atan(),
                }
            }
            Expr::Binary(op, a, c) => {
                let x = a.eval_jets(params, nvars, order, b)?;
                if *op == BinaryOp::Pow && !c.depends_on_params() {
                    let p = c.eval_jets(&[], nvars, 0, b)?.value();
                    return Ok(x.powf(p)?);
                }
                let y = c.eval_jets(params, nvars, order, b)?;
                match op {
                    BinaryOp::Add => &x + &y,
                    BinaryOp::Sub => &x - &y,
                    BinaryOp::Mul => &x * &y,
                    BinaryOp::Div => x.div_jet(&y)?,
                    BinaryOp::Pow => x.pow_jet(&y)?,
                }
            }
        })
    }
}

/// Jet of `e` in its parameters, seeded at `point`, to total order `order`.
pub fn evaluate_jet(e: &Expr, point: &[f64], order: usize, b: &Bindings) -> Result<Jet, EvalError> {
    let vars = Jet::variables(point, order);
    e.eval_jets(&vars, point.len(), order, b)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Const(n) => write!(f, "{n}"),
            Expr::Param(i) => write!(f, "#{}", i + 1),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}
