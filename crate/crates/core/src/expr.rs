//! Arithmetic mini-language for user-supplied circuit and neuron equations.
//!
//! Grammar (`^` is right-associative, unary minus binds looser than `^`):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! so `-2^2` is `-(2^2)` and `2^-1` is `0.5`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ExprError {
    Syntax {
        pos: usize,
        message: String,
    },
    UnknownFunction {
        name: String,
        pos: usize,
    },
    Arity {
        name: &'static str,
        expected: usize,
        found: usize,
        pos: usize,
    },
    Unbound(String),
    /// Identifier outside the vocabulary an expression slot accepts.
    UnknownVariable {
        name: String,
        allowed: Vec<String>,
    },
    NonFiniteBinding(String),
    DivisionByZero,
    Domain {
        func: &'static str,
        arg: f64,
    },
    NonFinite,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syntax { pos, message } => write!(f, "syntax error at {pos}: {message}"),
            Self::UnknownFunction { name, pos } => {
                write!(f, "unknown function `{name}` at {pos}")
            }
            Self::Arity {
                name,
                expected,
                found,
                pos,
            } => write!(
                f,
                "`{name}` at {pos} takes {expected} argument(s), got {found}"
            ),
            Self::Unbound(name) => write!(f, "unbound identifier `{name}`"),
            Self::UnknownVariable { name, allowed } => {
                write!(f, "unknown variable `{name}`; allowed: ")?;
                for (i, a) in allowed.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(a)?;
                }
                Ok(())
            }
            Self::NonFiniteBinding(name) => write!(f, "binding for `{name}` is not finite"),
            Self::DivisionByZero => write!(f, "division by zero"),
            Self::Domain { func, arg } => write!(f, "{func}({arg}) is undefined"),
            Self::NonFinite => write!(f, "expression result is not finite"),
        }
    }
}

impl core::error::Error for ExprError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Tanh,
    Sqrt,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Self::Exp,
            "log" => Self::Log,
            "abs" => Self::Abs,
            "min" => Self::Min,
            "max" => Self::Max,
            "tanh" => Self::Tanh,
            "sqrt" => Self::Sqrt,
            "pow" => Self::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Abs => "abs",
            Self::Min => "min",
            Self::Max => "max",
            Self::Tanh => "tanh",
            Self::Sqrt => "sqrt",
            Self::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Min | Self::Max | Self::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(String),
    Slot(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression. Immutable; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
}

/// Variable bindings for [`Expression::eval`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    bindings: BTreeMap<String, f64>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, value: f64) -> Result<(), ExprError> {
        if !value.is_finite() {
            return Err(ExprError::NonFiniteBinding(name.to_string()));
        }
        self.bindings.insert(name.to_string(), value);
        Ok(())
    }

    /// Builder form of [`bind`](Self::bind) for literals known to be finite.
    pub fn with(mut self, name: &str, value: f64) -> Self {
        assert!(value.is_finite(), "binding for `{name}` is not finite");
        self.bindings.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.bindings.get(name).copied()
    }
}

trait Lookup {
    fn var(&self, name: &str) -> Result<f64, ExprError>;
    fn slot(&self, idx: usize) -> f64;
}

impl Lookup for Environment {
    fn var(&self, name: &str) -> Result<f64, ExprError> {
        self.get(name)
            .ok_or_else(|| ExprError::Unbound(name.to_string()))
    }
    fn slot(&self, _: usize) -> f64 {
        unreachable!("uncompiled expressions have no slots")
    }
}

impl Lookup for [f64] {
    fn var(&self, name: &str) -> Result<f64, ExprError> {
        Err(ExprError::Unbound(name.to_string()))
    }
    fn slot(&self, idx: usize) -> f64 {
        self[idx]
    }
}

fn eval_node<L: Lookup + ?Sized>(node: &Node, env: &L) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(name) => env.var(name)?,
        Node::Slot(idx) => env.slot(*idx),
        Node::Neg(inner) => -eval_node(inner, env)?,
        Node::Bin(op, lhs, rhs) => {
            let a = eval_node(lhs, env)?;
            let b = eval_node(rhs, env)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    a / b
                }
                BinOp::Pow => checked_pow(a, b)?,
            }
        }
        Node::Call(func, args) => {
            let x = eval_node(&args[0], env)?;
            match func {
                Func::Exp => libm::exp(x),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(ExprError::Domain {
                            func: "log",
                            arg: x,
                        });
                    }
                    libm::log(x)
                }
                Func::Abs => libm::fabs(x),
                Func::Tanh => libm::tanh(x),
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(ExprError::Domain {
                            func: "sqrt",
                            arg: x,
                        });
                    }
                    libm::sqrt(x)
                }
                Func::Min => libm::fmin(x, eval_node(&args[1], env)?),
                Func::Max => libm::fmax(x, eval_node(&args[1], env)?),
                Func::Pow => checked_pow(x, eval_node(&args[1], env)?)?,
            }
        }
    })
}

fn checked_pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    let v = libm::pow(base, exponent);
    if v.is_nan() {
        return Err(ExprError::Domain {
            func: "pow",
            arg: base,
        });
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::DivisionByZero);
    }
    Ok(v)
}

fn finite(v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::NonFinite)
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            end: source.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(syntax(tok.pos, "unexpected trailing input"));
        }
        Ok(Self { root })
    }

    pub fn eval(&self, env: &Environment) -> Result<f64, ExprError> {
        finite(eval_node(&self.root, env)?)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn walk(node: &Node, out: &mut BTreeSet<String>) {
            match node {
                Node::Var(name) => {
                    out.insert(name.clone());
                }
                Node::Num(_) | Node::Slot(_) => {}
                Node::Neg(inner) => walk(inner, out),
                Node::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Node::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut out);
        out
    }

    /// Resolves identifiers against a fixed slot layout. Names found in
    /// `constants` are folded in as literals; anything else is an error that
    /// lists the accepted names.
    pub fn compile(
        &self,
        slots: &[&str],
        constants: &BTreeMap<String, f64>,
    ) -> Result<Program, ExprError> {
        fn resolve(
            node: &Node,
            slots: &[&str],
            constants: &BTreeMap<String, f64>,
        ) -> Result<Node, ExprError> {
            Ok(match node {
                Node::Var(name) => {
                    if let Some(idx) = slots.iter().position(|s| s == name) {
                        Node::Slot(idx)
                    } else if let Some(&v) = constants.get(name) {
                        Node::Num(v)
                    } else {
                        let mut allowed: Vec<String> =
                            slots.iter().map(|s| s.to_string()).collect();
                        allowed.extend(constants.keys().cloned());
                        return Err(ExprError::UnknownVariable {
                            name: name.clone(),
                            allowed,
                        });
                    }
                }
                Node::Num(_) | Node::Slot(_) => node.clone(),
                Node::Neg(inner) => Node::Neg(Box::new(resolve(inner, slots, constants)?)),
                Node::Bin(op, a, b) => Node::Bin(
                    *op,
                    Box::new(resolve(a, slots, constants)?),
                    Box::new(resolve(b, slots, constants)?),
                ),
                Node::Call(f, args) => Node::Call(
                    *f,
                    args.iter()
                        .map(|a| resolve(a, slots, constants))
                        .collect::<Result<_, _>>()?,
                ),
            })
        }
        Ok(Program {
            root: resolve(&self.root, slots, constants)?,
            source: self.clone(),
        })
    }
}

impl fmt::Display for Expression {
    /// Fully parenthesised form; re-parses to an equivalent expression.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match node {
                Node::Num(v) => write!(f, "{v}"),
                Node::Var(name) => f.write_str(name),
                Node::Slot(idx) => write!(f, "${idx}"),
                Node::Neg(inner) => {
                    f.write_str("(-")?;
                    go(inner, f)?;
                    f.write_str(")")
                }
                Node::Bin(op, a, b) => {
                    f.write_str("(")?;
                    go(a, f)?;
                    write!(f, " {} ", op.symbol())?;
                    go(b, f)?;
                    f.write_str(")")
                }
                Node::Call(func, args) => {
                    write!(f, "{}(", func.name())?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        go(a, f)?;
                    }
                    f.write_str(")")
                }
            }
        }
        go(&self.root, f)
    }
}

/// An expression with identifiers bound to positions in a value slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    root: Node,
    source: Expression,
}

impl Program {
    pub fn eval(&self, slots: &[f64]) -> Result<f64, ExprError> {
        finite(eval_node(&self.root, slots)?)
    }

    pub fn expression(&self) -> &Expression {
        &self.source
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
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn syntax(pos: usize, message: &str) -> ExprError {
    ExprError::Syntax {
        pos,
        message: message.to_string(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        match c {
            c if c.is_whitespace() => i += c.len_utf8(),
            '0'..='9' | '.' => {
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
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, "malformed number"))?;
                if !value.is_finite() {
                    return Err(syntax(start, "number out of range"));
                }
                out.push(Token {
                    tok: Tok::Num(value),
                    pos: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(src[start..i].to_string()),
                    pos: start,
                });
            }
            '+' | '-' | '*' | '/' | '^' => {
                out.push(Token {
                    tok: Tok::Op(c),
                    pos: start,
                });
                i += 1;
            }
            '\u{2212}' => {
                out.push(Token {
                    tok: Tok::Op('-'),
                    pos: start,
                });
                i += c.len_utf8();
            }
            '(' | ')' | ',' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Comma,
                };
                out.push(Token { tok, pos: start });
                i += 1;
            }
            _ => return Err(syntax(start, "unexpected character")),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                tok: Tok::Op(c), ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        match self.peek() {
            Some(t) if t.tok == tok => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ExprError::Syntax {
                pos: self.here(),
                message: alloc::format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(syntax(self.end, "unexpected end of input"));
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Ident(name) => {
                if !matches!(
                    self.peek(),
                    Some(Token {
                        tok: Tok::LParen,
                        ..
                    })
                ) {
                    return Ok(Node::Var(name));
                }
                let func = Func::lookup(&name).ok_or(ExprError::UnknownFunction {
                    name,
                    pos: token.pos,
                })?;
                self.pos += 1;
                let mut args = alloc::vec![self.expr()?];
                while matches!(
                    self.peek(),
                    Some(Token {
                        tok: Tok::Comma,
                        ..
                    })
                ) {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                if args.len() != func.arity() {
                    return Err(ExprError::Arity {
                        name: func.name(),
                        expected: func.arity(),
                        found: args.len(),
                        pos: token.pos,
                    });
                }
                Ok(Node::Call(func, args))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(syntax(token.pos, "expected a number, identifier or `(`")),
        }
    }
}
