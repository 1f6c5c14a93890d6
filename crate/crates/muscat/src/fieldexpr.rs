//! Scalar field expressions for the N(x) and h(x) profiles.
//!
//! Config files describe profiles as strings like `"0.5*gauss(0,0,0,1)"` or
//! `"exp(i*x)"`. This module parses them with a small recursive-descent
//! grammar (precedence `^` > unary `-` > `* /` > `+ -`) and evaluates the
//! resulting tree at points of ℝ³. Complex values enter only through the
//! literal `i`, so density profiles stay real unless the user opts in.

use crate::geom::RVec3;
use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

/// Support threshold: densities at or below this magnitude count as zero.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("parse error at column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero at point ({0}, {1}, {2})")]
    DivisionByZero(f64, f64, f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("density must be real and nonnegative, got {value} at point ({x}, {y}, {z})")]
    NegativeDensity { value: f64, x: f64, y: f64, z: f64 },
    #[error("density must be real, got imaginary part {imag:.3e} at point ({x}, {y}, {z})")]
    ComplexDensity { imag: f64, x: f64, y: f64, z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

/// Abstract syntax tree of a scalar field expression.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Number(f64),
    ImaginaryUnit,
    Var(Axis),
    Neg(Box<FieldExpr>),
    Add(Box<FieldExpr>, Box<FieldExpr>),
    Sub(Box<FieldExpr>, Box<FieldExpr>),
    Mul(Box<FieldExpr>, Box<FieldExpr>),
    Div(Box<FieldExpr>, Box<FieldExpr>),
    Pow(Box<FieldExpr>, i32),
    Call(Func, Box<FieldExpr>),
    /// gauss(cx, cy, cz, w) = exp(-((x-cx)² + (y-cy)² + (z-cz)²) / w²)
    Gauss(Box<[FieldExpr; 4]>),
}

impl FieldExpr {
    pub fn parse(src: &str) -> Result<Self, ParseError> {
        let tokens = lex(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.sum()?;
        match parser.peek() {
            Some(tok) => Err(ParseError {
                column: tok.column,
                message: format!("unexpected trailing {}", tok.kind.describe()),
            }),
            None => Ok(expr),
        }
    }

    pub fn evaluate(&self, p: &RVec3) -> Result<Complex64, EvalError> {
        let div_zero = || EvalError::DivisionByZero(p.x, p.y, p.z);
        Ok(match self {
            FieldExpr::Number(v) => Complex64::from(*v),
            FieldExpr::ImaginaryUnit => Complex64::i(),
            FieldExpr::Var(Axis::X) => Complex64::from(p.x),
            FieldExpr::Var(Axis::Y) => Complex64::from(p.y),
            FieldExpr::Var(Axis::Z) => Complex64::from(p.z),
            FieldExpr::Neg(e) => -e.evaluate(p)?,
            FieldExpr::Add(a, b) => a.evaluate(p)? + b.evaluate(p)?,
            FieldExpr::Sub(a, b) => a.evaluate(p)? - b.evaluate(p)?,
            FieldExpr::Mul(a, b) => a.evaluate(p)? * b.evaluate(p)?,
            FieldExpr::Div(a, b) => {
                let denom = b.evaluate(p)?;
                if denom == Complex64::new(0.0, 0.0) {
                    return Err(div_zero());
                }
                a.evaluate(p)? / denom
            }
            FieldExpr::Pow(e, n) => {
                let base = e.evaluate(p)?;
                if *n < 0 && base == Complex64::new(0.0, 0.0) {
                    return Err(div_zero());
                }
                base.powi(*n)
            }
            FieldExpr::Call(f, e) => {
                let v = e.evaluate(p)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => Complex64::from(v.norm()),
                }
            }
            FieldExpr::Gauss(args) => {
                let cx = args[0].evaluate(p)?;
                let cy = args[1].evaluate(p)?;
                let cz = args[2].evaluate(p)?;
                let w = args[3].evaluate(p)?;
                let w2 = w * w;
                if w2 == Complex64::new(0.0, 0.0) {
                    return Err(div_zero());
                }
                let dx = Complex64::from(p.x) - cx;
                let dy = Complex64::from(p.y) - cy;
                let dz = Complex64::from(p.z) - cz;
                (-(dx * dx + dy * dy + dz * dz) / w2).exp()
            }
        })
    }
}

impl fmt::Display for FieldExpr {
    /// Fully parenthesized form; reparsing yields a structurally equal tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Number(v) => write!(f, "{v}"),
            FieldExpr::ImaginaryUnit => write!(f, "i"),
            FieldExpr::Var(Axis::X) => write!(f, "x"),
            FieldExpr::Var(Axis::Y) => write!(f, "y"),
            FieldExpr::Var(Axis::Z) => write!(f, "z"),
            FieldExpr::Neg(e) => write!(f, "(-{e})"),
            FieldExpr::Add(a, b) => write!(f, "({a}+{b})"),
            FieldExpr::Sub(a, b) => write!(f, "({a}-{b})"),
            FieldExpr::Mul(a, b) => write!(f, "({a}*{b})"),
            FieldExpr::Div(a, b) => write!(f, "({a}/{b})"),
            FieldExpr::Pow(e, n) => write!(f, "({e}^{n})"),
            FieldExpr::Call(func, e) => write!(f, "{}({e})", func.name()),
            FieldExpr::Gauss(args) => {
                write!(f, "gauss({},{},{},{})", args[0], args[1], args[2], args[3])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number { value: f64, integer: bool },
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

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number { value, .. } => format!("number `{value}`"),
            TokenKind::Ident(name) => format!("identifier `{name}`"),
            TokenKind::Plus => "`+`".into(),
            TokenKind::Minus => "`-`".into(),
            TokenKind::Star => "`*`".into(),
            TokenKind::Slash => "`/`".into(),
            TokenKind::Caret => "`^`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Token {
    kind: TokenKind,
    column: usize, // 1-based
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let column = i + 1;
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' => {
                tokens.push(Token { kind: TokenKind::Plus, column });
                i += 1;
            }
            b'-' => {
                tokens.push(Token { kind: TokenKind::Minus, column });
                i += 1;
            }
            b'*' => {
                tokens.push(Token { kind: TokenKind::Star, column });
                i += 1;
            }
            b'/' => {
                tokens.push(Token { kind: TokenKind::Slash, column });
                i += 1;
            }
            b'^' => {
                tokens.push(Token { kind: TokenKind::Caret, column });
                i += 1;
            }
            b'(' => {
                tokens.push(Token { kind: TokenKind::LParen, column });
                i += 1;
            }
            b')' => {
                tokens.push(Token { kind: TokenKind::RParen, column });
                i += 1;
            }
            b',' => {
                tokens.push(Token { kind: TokenKind::Comma, column });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                let mut integer = b != b'.';
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    integer = false;
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    // Only consume the exponent if digits follow; otherwise
                    // leave `e...` to be lexed as an identifier.
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        integer = false;
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lexeme = &src[start..i];
                let value: f64 = lexeme.parse().map_err(|_| ParseError {
                    column,
                    message: format!("malformed number `{lexeme}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number { value, integer },
                    column,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(src[start..i].to_string()),
                    column,
                });
            }
            _ => {
                return Err(ParseError {
                    column,
                    message: format!("unexpected character `{}`", &src[i..i + 1]),
                });
            }
        }
    }
    if tokens.is_empty() {
        return Err(ParseError {
            column: 1,
            message: "empty expression".into(),
        });
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn end_column(&self) -> usize {
        self.tokens
            .last()
            .map(|t| t.column + 1)
            .unwrap_or(1)
    }

    fn unexpected_end<T>(&self, wanted: &str) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.end_column(),
            message: format!("expected {wanted}, found end of input"),
        })
    }

    fn sum(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(tok) = self.peek() {
            let op = match tok.kind {
                TokenKind::Plus => FieldExpr::Add as fn(_, _) -> _,
                TokenKind::Minus => FieldExpr::Sub as fn(_, _) -> _,
                _ => break,
            };
            self.advance();
            let rhs = self.product()?;
            lhs = op(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(tok) = self.peek() {
            let op = match tok.kind {
                TokenKind::Star => FieldExpr::Mul as fn(_, _) -> _,
                TokenKind::Slash => FieldExpr::Div as fn(_, _) -> _,
                _ => break,
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = op(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FieldExpr, ParseError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.advance();
            let inner = self.unary()?;
            return Ok(FieldExpr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Caret)) {
            self.advance();
            let exponent = self.integer_exponent()?;
            return Ok(FieldExpr::Pow(Box::new(base), exponent));
        }
        Ok(base)
    }

    fn integer_exponent(&mut self) -> Result<i32, ParseError> {
        let mut sign = 1i64;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.advance();
            sign = -1;
        }
        let Some(tok) = self.advance() else {
            return self.unexpected_end("integer exponent");
        };
        match tok.kind {
            TokenKind::Number { value, integer } => {
                if !integer || value.fract() != 0.0 || value.abs() > i32::MAX as f64 {
                    return Err(ParseError {
                        column: tok.column,
                        message: format!("non-integer exponent `{value}`"),
                    });
                }
                Ok((sign * value as i64) as i32)
            }
            other => Err(ParseError {
                column: tok.column,
                message: format!("non-integer exponent: found {}", other.describe()),
            }),
        }
    }

    fn atom(&mut self) -> Result<FieldExpr, ParseError> {
        let Some(tok) = self.advance() else {
            return self.unexpected_end("a value");
        };
        match tok.kind {
            TokenKind::Number { value, .. } => Ok(FieldExpr::Number(value)),
            TokenKind::Ident(name) => self.ident(&name, tok.column),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(ParseError {
                column: tok.column,
                message: format!("expected a value, found {}", other.describe()),
            }),
        }
    }

    fn ident(&mut self, name: &str, column: usize) -> Result<FieldExpr, ParseError> {
        match name {
            "x" => return Ok(FieldExpr::Var(Axis::X)),
            "y" => return Ok(FieldExpr::Var(Axis::Y)),
            "z" => return Ok(FieldExpr::Var(Axis::Z)),
            "i" => return Ok(FieldExpr::ImaginaryUnit),
            _ => {}
        }
        let func = match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(func) = func {
            let args = self.call_args(name, column, 1)?;
            let [arg] = <[FieldExpr; 1]>::try_from(args).expect("arity checked");
            return Ok(FieldExpr::Call(func, Box::new(arg)));
        }
        if name == "gauss" {
            let args = self.call_args(name, column, 4)?;
            let args = <[FieldExpr; 4]>::try_from(args).expect("arity checked");
            return Ok(FieldExpr::Gauss(Box::new(args)));
        }
        Err(ParseError {
            column,
            message: format!("unknown identifier `{name}`"),
        })
    }

    fn call_args(
        &mut self,
        name: &str,
        name_column: usize,
        arity: usize,
    ) -> Result<Vec<FieldExpr>, ParseError> {
        match self.advance() {
            Some(Token {
                kind: TokenKind::LParen,
                ..
            }) => {}
            Some(tok) => {
                return Err(ParseError {
                    column: tok.column,
                    message: format!("expected `(` after `{name}`, found {}", tok.kind.describe()),
                })
            }
            None => return self.unexpected_end("`(`"),
        }
        let mut args = vec![self.sum()?];
        while matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
            self.advance();
            args.push(self.sum()?);
        }
        self.expect_rparen()?;
        if args.len() != arity {
            return Err(ParseError {
                column: name_column,
                message: format!(
                    "`{name}` expects {arity} argument{}, got {}",
                    if arity == 1 { "" } else { "s" },
                    args.len()
                ),
            });
        }
        Ok(args)
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.advance() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(tok) => Err(ParseError {
                column: tok.column,
                message: format!("expected `)`, found {}", tok.kind.describe()),
            }),
            None => self.unexpected_end("`)`"),
        }
    }
}

/// A parsed profile together with its source text; evaluation is pure and
/// thread-safe.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldProfile {
    source: String,
    expr: FieldExpr,
}

impl ScalarFieldProfile {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let expr = FieldExpr::parse(source)?;
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value}"),
            expr: FieldExpr::Number(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    pub fn evaluate(&self, p: &RVec3) -> Result<Complex64, EvalError> {
        self.expr.evaluate(p)
    }

    /// Evaluates a density profile: the result must be real and ≥ 0 (values
    /// within `SUPPORT_TOL` of zero are clamped to zero).
    pub fn evaluate_density(&self, p: &RVec3) -> Result<f64, ProfileError> {
        let v = self.expr.evaluate(p)?;
        let scale = v.re.abs().max(1.0);
        if v.im.abs() > 1e-12 * scale {
            return Err(ProfileError::ComplexDensity {
                imag: v.im,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        if v.re < -SUPPORT_TOL {
            return Err(ProfileError::NegativeDensity {
                value: v.re,
                x: p.x,
                y: p.y,
                z: p.z,
            });
        }
        Ok(v.re.max(0.0))
    }
}

impl fmt::Display for ScalarFieldProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
