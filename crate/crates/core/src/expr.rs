//! Right-hand sides `f(x)` of the scalar evolution equation `x' = f(x)`.
//!
//! Grammar (whitespace is insignificant between tokens):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;
//! atom    = number | "x" | func "(" expr ")" | "(" expr ")" ;
//! func    = "sin" | "cos" | "exp" | "tanh" | "abs" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
//!         | "." digits [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `^` binds tighter than unary minus (`-x^2` is `-(x^2)`) and is
//! right-associative; the other binary operators are left-associative.
//!
//! `abs` is the only non-smooth function. It is accepted for stress tests
//! even though the consistency results assume a smooth field.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => libm::sin(v),
            Func::Cos => libm::cos(v),
            Func::Exp => libm::exp(v),
            Func::Tanh => libm::tanh(v),
            Func::Abs => libm::fabs(v),
        }
    }
}

/// Parsed expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyInput,
    UnexpectedChar(char),
    UnexpectedEnd,
    UnknownIdentifier(String),
    UnbalancedParen,
    InvalidNumber,
}

/// Parse failure with the byte offset into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::EmptyInput => write!(f, "empty expression"),
            ParseErrorKind::UnexpectedChar(c) => {
                write!(f, "syntax error at offset {}: unexpected '{}'", self.offset, c)
            }
            ParseErrorKind::UnexpectedEnd => {
                write!(f, "syntax error at offset {}: unexpected end of input", self.offset)
            }
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(f, "unknown identifier '{}' at offset {}", name, self.offset)
            }
            ParseErrorKind::UnbalancedParen => {
                write!(f, "unbalanced parenthesis at offset {}", self.offset)
            }
            ParseErrorKind::InvalidNumber => {
                write!(f, "invalid numeric literal at offset {}", self.offset)
            }
        }
    }
}

impl core::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalError {
    DivisionByZero { x: f64 },
    NonFinite { x: f64 },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DivisionByZero { x } => write!(f, "division by zero evaluating at x={}", x),
            EvalError::NonFinite { x } => write!(f, "non-finite result evaluating at x={}", x),
        }
    }
}

impl core::error::Error for EvalError {}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse(text)
    }

    /// Evaluates the expression at `x`. Never returns NaN or an infinity.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(x)?;
                let b = r.eval(x)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::DivisionByZero { x });
                        }
                        a / b
                    }
                    BinOp::Pow => libm::pow(a, b),
                }
            }
            Expr::Call(func, e) => func.apply(e.eval(x)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x })
        }
    }

    // Binding strength used by the printer: atoms 5, `^` 4, unary minus 3,
    // `* /` 2, `+ -` 1.
    fn level(&self) -> u8 {
        match self {
            Expr::Num(_) | Expr::Var | Expr::Call(..) => 5,
            Expr::Binary(BinOp::Pow, ..) => 4,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
    if e.level() < min_level {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

/// Prints with the minimum parentheses needed to re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // only reachable for hand-built trees
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{:?}", v)
                }
            }
            Expr::Var => f.write_str("x"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e, 3)
            }
            Expr::Binary(op, l, r) => {
                let (left_min, right_min) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                write_operand(f, l, left_min)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, r, right_min)
            }
            Expr::Call(func, e) => write!(f, "{}({})", func.name(), e),
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
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    /// Returns the next token and its starting offset.
    fn next(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let c = match self.peek_char() {
            None => return Ok(None),
            Some(c) => c,
        };
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => {
                self.pos += 1;
                Tok::Op(c)
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            '0'..='9' | '.' => self.number(start)?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let bytes = self.src.as_bytes();
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_string())
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(other),
                    offset: start,
                })
            }
        };
        Ok(Some((tok, start)))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let from = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - from
        };
        let mut pos = self.pos;
        let int_digits = digits(&mut pos);
        let mut frac_digits = 0;
        if pos < bytes.len() && bytes[pos] == b'.' {
            pos += 1;
            frac_digits = digits(&mut pos);
        }
        if int_digits == 0 && frac_digits == 0 {
            return Err(ParseError {
                kind: ParseErrorKind::InvalidNumber,
                offset: start,
            });
        }
        if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
            let mut exp_pos = pos + 1;
            if exp_pos < bytes.len() && (bytes[exp_pos] == b'+' || bytes[exp_pos] == b'-') {
                exp_pos += 1;
            }
            if digits(&mut exp_pos) > 0 {
                pos = exp_pos;
            }
        }
        self.pos = pos;
        let value: f64 = self.src[start..pos].parse().map_err(|_| ParseError {
            kind: ParseErrorKind::InvalidNumber,
            offset: start,
        })?;
        if !value.is_finite() {
            return Err(ParseError {
                kind: ParseErrorKind::InvalidNumber,
                offset: start,
            });
        }
        Ok(Tok::Num(value))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    lookahead: Option<(Tok, usize)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let lookahead = lexer.next()?;
        Ok(Parser { lexer, lookahead })
    }

    fn bump(&mut self) -> Result<Option<(Tok, usize)>, ParseError> {
        let next = self.lexer.next()?;
        Ok(core::mem::replace(&mut self.lookahead, next))
    }

    fn end_offset(&self) -> usize {
        self.lexer.src.len()
    }

    fn peek_op(&self) -> Option<char> {
        match &self.lookahead {
            Some((Tok::Op(c), _)) => Some(*c),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.bump()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.bump()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek_op() == Some('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parenthesized(&mut self, open_at: usize) -> Result<Expr, ParseError> {
        let inner = self.expr()?;
        match self.bump()? {
            Some((Tok::RParen, _)) => Ok(inner),
            None => Err(ParseError {
                kind: ParseErrorKind::UnbalancedParen,
                offset: open_at,
            }),
            Some((tok, at)) => Err(unexpected(&tok, at)),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump()? {
            None => Err(ParseError {
                kind: ParseErrorKind::UnexpectedEnd,
                offset: self.end_offset(),
            }),
            Some((Tok::Num(v), _)) => Ok(Expr::Num(v)),
            Some((Tok::LParen, at)) => self.parenthesized(at),
            Some((Tok::Ident(name), at)) => {
                if name == "x" {
                    return Ok(Expr::Var);
                }
                let func = Func::from_name(&name).ok_or(ParseError {
                    kind: ParseErrorKind::UnknownIdentifier(name),
                    offset: at,
                })?;
                match self.bump()? {
                    Some((Tok::LParen, open_at)) => {
                        Ok(Expr::Call(func, Box::new(self.parenthesized(open_at)?)))
                    }
                    Some((tok, at)) => Err(unexpected(&tok, at)),
                    None => Err(ParseError {
                        kind: ParseErrorKind::UnexpectedEnd,
                        offset: self.end_offset(),
                    }),
                }
            }
            Some((tok, at)) => Err(unexpected(&tok, at)),
        }
    }
}

fn unexpected(tok: &Tok, at: usize) -> ParseError {
    let kind = match tok {
        Tok::RParen => ParseErrorKind::UnbalancedParen,
        Tok::Op(c) => ParseErrorKind::UnexpectedChar(*c),
        Tok::LParen => ParseErrorKind::UnexpectedChar('('),
        Tok::Num(_) | Tok::Ident(_) => ParseErrorKind::UnexpectedChar('?'),
    };
    ParseError { kind, offset: at }
}

/// Parses an expression in the grammar documented at module level.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::EmptyInput,
            offset: 0,
        });
    }
    let mut parser = Parser::new(text)?;
    let expr = parser.expr()?;
    match parser.lookahead.take() {
        None => Ok(expr),
        Some((tok, at)) => Err(unexpected(&tok, at)),
    }
}
