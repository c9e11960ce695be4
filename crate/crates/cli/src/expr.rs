//! Tiny arithmetic expression grammar for load, modulus and reference-solution
//! definitions in experiment configs.
//!
//! Grammar (recursive descent):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' unary)*          (right-associative, integer powers)
//! unary  := '-' unary | primary
//! primary:= number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Identifiers: `x1`, `x2` (spatial point), `y1`..`yN` (random variables),
//! `E` (the modulus value at the evaluation point), `nu`, `pi`. Functions:
//! `sin`, `cos`, `exp`, `ln`, `sqrt`, `abs`.

use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X1,
    X2,
    Y(usize),
    Modulus,
    Nu,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

/// Evaluation context for one point.
#[derive(Debug, Clone, Copy)]
pub struct EvalCtx<'a> {
    pub x1: f64,
    pub x2: f64,
    pub y: &'a [f64],
    pub modulus: f64,
    pub nu: f64,
}

#[derive(Debug)]
pub struct ParseError {
    pub message: String,
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at byte {})", self.message, self.position)
    }
}

impl std::error::Error for ParseError {}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input after expression"));
        }
        Ok(e)
    }

    pub fn eval(&self, ctx: &EvalCtx<'_>) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X1 => ctx.x1,
            Expr::X2 => ctx.x2,
            Expr::Y(i) => ctx.y.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Modulus => ctx.modulus,
            Expr::Nu => ctx.nu,
            Expr::Neg(e) => -e.eval(ctx),
            Expr::Add(a, b) => a.eval(ctx) + b.eval(ctx),
            Expr::Sub(a, b) => a.eval(ctx) - b.eval(ctx),
            Expr::Mul(a, b) => a.eval(ctx) * b.eval(ctx),
            Expr::Div(a, b) => a.eval(ctx) / b.eval(ctx),
            Expr::Pow(a, b) => {
                let base = a.eval(ctx);
                let e = b.eval(ctx);
                if e.fract() == 0.0 && e.abs() <= 64.0 {
                    base.powi(e as i32)
                } else {
                    base.powf(e)
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(ctx);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    /// Highest random-variable index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        match self {
            Expr::Y(i) => Some(*i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_variable(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_variable().max(b.max_variable()),
            _ => None,
        }
    }

    /// Whether the expression references the modulus placeholder.
    pub fn uses_modulus(&self) -> bool {
        match self {
            Expr::Modulus => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.uses_modulus(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.uses_modulus() || b.uses_modulus(),
            _ => false,
        }
    }

    pub fn shared(self) -> Arc<Expr> {
        Arc::new(self)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            message: msg.to_string(),
            position: self.pos,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if self.eat(b'^') {
            let exp = self.factor()?; // right associative
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, identifier or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err("malformed number"))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(f) = func {
            if !self.eat(b'(') {
                return Err(self.err("function call needs '('"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected ')' after function argument"));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        match name {
            "x1" => Ok(Expr::X1),
            "x2" => Ok(Expr::X2),
            "E" => Ok(Expr::Modulus),
            "nu" => Ok(Expr::Nu),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            _ => {
                if let Some(rest) = name.strip_prefix('y') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx >= 1 {
                            return Ok(Expr::Y(idx - 1));
                        }
                    }
                }
                Err(ParseError {
                    message: format!("unknown identifier '{name}'"),
                    position: start,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x1: f64, x2: f64, y: &[f64], modulus: f64, nu: f64) -> f64 {
        Expr::parse(src).unwrap().eval(&EvalCtx {
            x1,
            x2,
            y,
            modulus,
            nu,
        })
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1+2*3", 0.0, 0.0, &[], 0.0, 0.0), 7.0);
        assert_eq!(eval("(1+2)*3", 0.0, 0.0, &[], 0.0, 0.0), 9.0);
        assert_eq!(eval("-2^2", 0.0, 0.0, &[], 0.0, 0.0), 4.0); // (-2)^2, unary binds tighter
        assert_eq!(eval("2^3^2", 0.0, 0.0, &[], 0.0, 0.0), 512.0);
        assert_eq!(eval("1 - 2 - 3", 0.0, 0.0, &[], 0.0, 0.0), -4.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(eval("-2*E*x2", 1.0, 0.5, &[], 1000.0, 0.25), -1000.0);
        assert_eq!(eval("1+y1^2", 0.0, 0.0, &[3.0], 0.0, 0.0), 10.0);
        assert!((eval("sqrt(abs(-9))", 0.0, 0.0, &[], 0.0, 0.0) - 3.0).abs() < 1e-15);
        assert!((eval("sin(pi/2)", 0.0, 0.0, &[], 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(eval("nu*(x2^2-1)", 0.0, 2.0, &[], 0.0, 0.25), 0.75);
    }

    #[test]
    fn introspection() {
        let e = Expr::parse("y2*(1+y1)").unwrap();
        assert_eq!(e.max_variable(), Some(1));
        assert!(!e.uses_modulus());
        assert!(Expr::parse("-2*E*x2").unwrap().uses_modulus());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("2 +").is_err());
        assert!(Expr::parse("foo").is_err());
        assert!(Expr::parse("y0").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("sin 3").is_err());
    }
}
