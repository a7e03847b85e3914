//! Arithmetic expressions over variables `x1..xN` with forward-mode
//! derivatives.
//!
//! The grammar covers exactly the smooth primitives used by inner maps:
//! constants, variables, `+ - * /`, integer powers `^k`, and `exp(..)`.
//! Nonsmooth constructs (`abs`, `max`, `|..|`) are rejected at parse time;
//! nonsmooth structure belongs to the outer-function catalog instead.
//!
//! Grammar (EBNF, also documented in the repository README):
//!
//! ```text
//! expr    := term { ("+" | "-") term }
//! term    := factor { ("*" | "/") factor }
//! factor  := "-" factor | power
//! power   := atom [ "^" [ "-" ] integer ]
//! atom    := number | variable | "exp" "(" expr ")" | "(" expr ")"
//! variable:= "x" integer            (1-based index)
//! ```
//!
//! Both ASCII `-` and the typographic minus sign U+2212 are accepted.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Const(f64),
    /// 0-based variable index.
    Var(usize),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    PowInt(Box<Ast>, i32),
    Exp(Box<Ast>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    root: Ast,
    nvars: usize,
    source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    /// Byte offset into the input where the problem was detected.
    pub offset: usize,
    pub message: String,
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "parse error at byte {}: {}", self.offset, self.message)
    }
}

impl core::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    /// Division by zero, carrying the offending denominator subtree.
    DivisionByZero { subtree: String },
    /// Input point has the wrong number of coordinates.
    WrongArity { expected: usize, got: usize },
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::DivisionByZero { subtree } => {
                write!(f, "division by zero in subexpression `{subtree}`")
            }
            EvalError::WrongArity { expected, got } => {
                write!(f, "point has {got} coordinates, expression expects {expected}")
            }
        }
    }
}

impl core::error::Error for EvalError {}

/// Scalar with an attached gradient; arithmetic follows the chain rule.
#[derive(Clone, Debug, PartialEq)]
pub struct DualNumber {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl DualNumber {
    pub fn constant(value: f64, nvars: usize) -> Self {
        DualNumber {
            value,
            partials: vec![0.0; nvars],
        }
    }

    pub fn variable(value: f64, index: usize, nvars: usize) -> Self {
        let mut partials = vec![0.0; nvars];
        partials[index] = 1.0;
        DualNumber { value, partials }
    }

    pub fn neg(&self) -> Self {
        DualNumber {
            value: -self.value,
            partials: self.partials.iter().map(|p| -p).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        DualNumber {
            value: self.value + o.value,
            partials: self
                .partials
                .iter()
                .zip(&o.partials)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        DualNumber {
            value: self.value - o.value,
            partials: self
                .partials
                .iter()
                .zip(&o.partials)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        DualNumber {
            value: self.value * o.value,
            partials: self
                .partials
                .iter()
                .zip(&o.partials)
                .map(|(a, b)| a * o.value + self.value * b)
                .collect(),
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        let d = o.value * o.value;
        DualNumber {
            value: self.value / o.value,
            partials: self
                .partials
                .iter()
                .zip(&o.partials)
                .map(|(a, b)| (a * o.value - self.value * b) / d)
                .collect(),
        }
    }

    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return DualNumber::constant(1.0, self.partials.len());
        }
        let value = fmath::powi(self.value, k);
        let dcoef = k as f64 * fmath::powi(self.value, k - 1);
        DualNumber {
            value,
            partials: self.partials.iter().map(|p| dcoef * p).collect(),
        }
    }

    pub fn exp(&self) -> Self {
        let e = fmath::exp(self.value);
        DualNumber {
            value: e,
            partials: self.partials.iter().map(|p| e * p).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// tokenizer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize), // 1-based as written
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>, // token + byte offset
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &src[i..];
        let ch = rest.chars().next().unwrap();
        match ch {
            ' ' | '\t' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '\u{2212}' => {
                toks.push((Tok::Minus, i));
                i += ch.len_utf8();
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '|' => {
                return Err(ParseError {
                    offset: i,
                    message: "`|..|` is not allowed: inner maps must be smooth".to_owned(),
                });
            }
            '0'..='9' | '.' => {
                let mut j = i;
                let mut seen_dot = false;
                let mut seen_exp = false;
                while j < bytes.len() {
                    let b = bytes[j];
                    match b {
                        b'0'..=b'9' => j += 1,
                        b'.' if !seen_dot && !seen_exp => {
                            seen_dot = true;
                            j += 1;
                        }
                        b'e' | b'E' if !seen_exp && j > i => {
                            // exponent only if followed by digit or sign+digit
                            let k = j + 1;
                            let k2 = if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                                k + 1
                            } else {
                                k
                            };
                            if k2 < bytes.len() && bytes[k2].is_ascii_digit() {
                                seen_exp = true;
                                j = k2 + 1;
                            } else {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                let text = &src[i..j];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    offset: i,
                    message: format!("invalid number literal `{text}`"),
                })?;
                toks.push((Tok::Num(value), i));
                i = j;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &src[i..j];
                if let Some(num) = word.strip_prefix('x') {
                    if !num.is_empty() && num.bytes().all(|b| b.is_ascii_digit()) {
                        let idx: usize = num.parse().map_err(|_| ParseError {
                            offset: i,
                            message: format!("invalid variable `{word}`"),
                        })?;
                        if idx == 0 {
                            return Err(ParseError {
                                offset: i,
                                message: "variable indices start at x1".to_owned(),
                            });
                        }
                        toks.push((Tok::Var(idx), i));
                        i = j;
                        continue;
                    }
                }
                toks.push((Tok::Ident(word.to_owned()), i));
                i = j;
            }
            _ => {
                return Err(ParseError {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    lexer: Lexer<'a>,
    pos: usize,
    nvars: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.lexer.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.lexer.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_offset(&self) -> usize {
        self.lexer.src.len()
    }

    fn parse_expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.parse_term()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.parse_term()?;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.parse_factor()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Tok::Star => {
                    self.bump();
                    let rhs = self.parse_factor()?;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.parse_factor()?;
                    lhs = Ast::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn parse_factor(&mut self) -> Result<Ast, ParseError> {
        if let Some((Tok::Minus, _)) = self.peek() {
            self.bump();
            let inner = self.parse_factor()?;
            return Ok(Ast::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Ast, ParseError> {
        let base = self.parse_atom()?;
        if let Some((Tok::Caret, _)) = self.peek() {
            self.bump();
            let mut sign = 1i32;
            if let Some((Tok::Minus, _)) = self.peek() {
                self.bump();
                sign = -1;
            }
            match self.bump() {
                Some((Tok::Num(v), off)) => {
                    if fmath::trunc(v) != v || v.abs() > i32::MAX as f64 {
                        return Err(ParseError {
                            offset: off,
                            message: "exponent must be an integer literal".to_owned(),
                        });
                    }
                    Ok(Ast::PowInt(Box::new(base), sign * v as i32))
                }
                Some((_, off)) => Err(ParseError {
                    offset: off,
                    message: "expected integer exponent after `^`".to_owned(),
                }),
                None => Err(ParseError {
                    offset: self.end_offset(),
                    message: "expected integer exponent after `^`".to_owned(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Ast, ParseError> {
        match self.bump() {
            Some((Tok::Num(v), _)) => Ok(Ast::Const(v)),
            Some((Tok::Var(idx), off)) => {
                if idx > self.nvars {
                    return Err(ParseError {
                        offset: off,
                        message: format!(
                            "variable x{idx} exceeds declared dimension {}",
                            self.nvars
                        ),
                    });
                }
                Ok(Ast::Var(idx - 1))
            }
            Some((Tok::Ident(name), off)) => match name.as_str() {
                "exp" => {
                    match self.bump() {
                        Some((Tok::LParen, _)) => {}
                        _ => {
                            return Err(ParseError {
                                offset: off,
                                message: "expected `(` after `exp`".to_owned(),
                            });
                        }
                    }
                    let inner = self.parse_expr()?;
                    match self.bump() {
                        Some((Tok::RParen, _)) => Ok(Ast::Exp(Box::new(inner))),
                        Some((_, o)) => Err(ParseError {
                            offset: o,
                            message: "expected `)`".to_owned(),
                        }),
                        None => Err(ParseError {
                            offset: self.end_offset(),
                            message: "expected `)`".to_owned(),
                        }),
                    }
                }
                "abs" | "max" | "min" => Err(ParseError {
                    offset: off,
                    message: format!(
                        "`{name}` is not allowed: inner maps must be smooth (encode nonsmoothness in the outer function)"
                    ),
                }),
                _ => Err(ParseError {
                    offset: off,
                    message: format!("unknown identifier `{name}`"),
                }),
            },
            Some((Tok::LParen, _)) => {
                let inner = self.parse_expr()?;
                match self.bump() {
                    Some((Tok::RParen, _)) => Ok(inner),
                    Some((_, o)) => Err(ParseError {
                        offset: o,
                        message: "expected `)`".to_owned(),
                    }),
                    None => Err(ParseError {
                        offset: self.end_offset(),
                        message: "expected `)`".to_owned(),
                    }),
                }
            }
            Some((tok, off)) => Err(ParseError {
                offset: off,
                message: format!("unexpected token {tok:?}"),
            }),
            None => Err(ParseError {
                offset: self.end_offset(),
                message: "unexpected end of expression".to_owned(),
            }),
        }
    }
}

/// Parse `text` into an expression over `x1..x{nvars}`.
pub fn parse_expression(text: &str, nvars: usize) -> Result<Expression, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".to_owned(),
        });
    }
    let toks = lex(text)?;
    let mut parser = Parser {
        lexer: Lexer { src: text, toks },
        pos: 0,
        nvars,
    };
    let root = parser.parse_expr()?;
    if let Some((tok, off)) = parser.peek() {
        return Err(ParseError {
            offset: *off,
            message: format!("trailing input starting with {tok:?}"),
        });
    }
    Ok(Expression {
        root,
        nvars,
        source: text.to_owned(),
    })
}

impl Expression {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Ast {
        &self.root
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.nvars {
            return Err(EvalError::WrongArity {
                expected: self.nvars,
                got: x.len(),
            });
        }
        eval_ast(&self.root, x)
    }

    /// Value and exact gradient by forward-mode propagation.
    pub fn eval_with_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>), EvalError> {
        if x.len() != self.nvars {
            return Err(EvalError::WrongArity {
                expected: self.nvars,
                got: x.len(),
            });
        }
        let d = eval_dual(&self.root, x, self.nvars)?;
        Ok((d.value, d.partials))
    }
}

fn eval_ast(ast: &Ast, x: &[f64]) -> Result<f64, EvalError> {
    Ok(match ast {
        Ast::Const(v) => *v,
        Ast::Var(i) => x[*i],
        Ast::Neg(a) => -eval_ast(a, x)?,
        Ast::Add(a, b) => eval_ast(a, x)? + eval_ast(b, x)?,
        Ast::Sub(a, b) => eval_ast(a, x)? - eval_ast(b, x)?,
        Ast::Mul(a, b) => eval_ast(a, x)? * eval_ast(b, x)?,
        Ast::Div(a, b) => {
            let den = eval_ast(b, x)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero {
                    subtree: display_ast(b),
                });
            }
            eval_ast(a, x)? / den
        }
        Ast::PowInt(a, k) => {
            let base = eval_ast(a, x)?;
            if base == 0.0 && *k < 0 {
                return Err(EvalError::DivisionByZero {
                    subtree: display_ast(a),
                });
            }
            fmath::powi(base, *k)
        }
        Ast::Exp(a) => fmath::exp(eval_ast(a, x)?),
    })
}

fn eval_dual(ast: &Ast, x: &[f64], nvars: usize) -> Result<DualNumber, EvalError> {
    Ok(match ast {
        Ast::Const(v) => DualNumber::constant(*v, nvars),
        Ast::Var(i) => DualNumber::variable(x[*i], *i, nvars),
        Ast::Neg(a) => eval_dual(a, x, nvars)?.neg(),
        Ast::Add(a, b) => eval_dual(a, x, nvars)?.add(&eval_dual(b, x, nvars)?),
        Ast::Sub(a, b) => eval_dual(a, x, nvars)?.sub(&eval_dual(b, x, nvars)?),
        Ast::Mul(a, b) => eval_dual(a, x, nvars)?.mul(&eval_dual(b, x, nvars)?),
        Ast::Div(a, b) => {
            let den = eval_dual(b, x, nvars)?;
            if den.value == 0.0 {
                return Err(EvalError::DivisionByZero {
                    subtree: display_ast(b),
                });
            }
            eval_dual(a, x, nvars)?.div(&den)
        }
        Ast::PowInt(a, k) => {
            let base = eval_dual(a, x, nvars)?;
            if base.value == 0.0 && *k < 0 {
                return Err(EvalError::DivisionByZero {
                    subtree: display_ast(a),
                });
            }
            base.powi(*k)
        }
        Ast::Exp(a) => eval_dual(a, x, nvars)?.exp(),
    })
}

fn precedence(ast: &Ast) -> u8 {
    match ast {
        Ast::Add(..) | Ast::Sub(..) => 1,
        Ast::Mul(..) | Ast::Div(..) => 2,
        Ast::Neg(..) => 3,
        Ast::PowInt(..) => 4,
        Ast::Const(..) | Ast::Var(..) | Ast::Exp(..) => 5,
    }
}

fn display_child(child: &Ast, parent_prec: u8, out: &mut String) {
    if precedence(child) < parent_prec {
        out.push('(');
        write_ast(child, out);
        out.push(')');
    } else {
        write_ast(child, out);
    }
}

fn write_ast(ast: &Ast, out: &mut String) {
    match ast {
        Ast::Const(v) => {
            if *v < 0.0 {
                out.push('(');
                out.push_str(&format_f64(*v));
                out.push(')');
            } else {
                out.push_str(&format_f64(*v));
            }
        }
        Ast::Var(i) => out.push_str(&format!("x{}", i + 1)),
        Ast::Neg(a) => {
            out.push('-');
            display_child(a, 4, out);
        }
        Ast::Add(a, b) => {
            display_child(a, 1, out);
            out.push('+');
            display_child(b, 2, out);
        }
        Ast::Sub(a, b) => {
            display_child(a, 1, out);
            out.push('-');
            display_child(b, 2, out);
        }
        Ast::Mul(a, b) => {
            display_child(a, 2, out);
            out.push('*');
            display_child(b, 3, out);
        }
        Ast::Div(a, b) => {
            display_child(a, 2, out);
            out.push('/');
            display_child(b, 3, out);
        }
        Ast::PowInt(a, k) => {
            display_child(a, 5, out);
            out.push('^');
            if *k < 0 {
                out.push('-');
            }
            out.push_str(&k.unsigned_abs().to_string());
        }
        Ast::Exp(a) => {
            out.push_str("exp(");
            write_ast(a, out);
            out.push(')');
        }
    }
}

fn format_f64(v: f64) -> String {
    if v == crate::fmath::trunc(v) && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        // ryu-style shortest repr via Display round-trips in f64
        format!("{v}")
    }
}

fn display_ast(ast: &Ast) -> String {
    let mut s = String::new();
    write_ast(ast, &mut s);
    s
}

impl core::fmt::Display for Expression {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&display_ast(&self.root))
    }
}
