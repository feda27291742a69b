//! Small arithmetic expression language over the variables `x1`, `x2`.
//!
//! Supports `+ - * / ^`, parentheses, the constants `pi` and `e`, and the
//! functions `exp`, `ln`, `sin`, `cos`, `sqrt`. Exponents must fold to a
//! constant. Expressions differentiate symbolically and evaluate on any
//! [`Real`], so jets of user maps come for free.

use std::fmt;

use crate::domain::Point2;
use crate::error::{Error, Result};
use crate::jet::Real;
use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

use Expr::*;

fn num(v: f64) -> Expr {
    Num(v)
}

// Constructors with constant folding, so derivatives stay small.
fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Num(x), Num(y)) => num(x + y),
        (Num(x), _) if *x == 0.0 => b,
        (_, Num(y)) if *y == 0.0 => a,
        _ => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Num(x), Num(y)) => num(x - y),
        (_, Num(y)) if *y == 0.0 => a,
        (Num(x), _) if *x == 0.0 => neg(b),
        _ => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Num(x), Num(y)) => num(x * y),
        (Num(x), _) | (_, Num(x)) if *x == 0.0 => num(0.0),
        (Num(x), _) if *x == 1.0 => b,
        (_, Num(y)) if *y == 1.0 => a,
        _ => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Num(x), Num(y)) => num(x / y),
        (Num(x), _) if *x == 0.0 => num(0.0),
        (_, Num(y)) if *y == 1.0 => a,
        _ => Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => num(-x),
        Neg(inner) => *inner,
        other => Neg(Box::new(other)),
    }
}

fn pow(a: Expr, p: f64) -> Expr {
    if p == 0.0 {
        return num(1.0);
    }
    if p == 1.0 {
        return a;
    }
    match a {
        Num(x) => num(x.powf(p)),
        other => Pow(Box::new(other), p),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match (f, &a) {
        (Func::Exp, Num(x)) => num(x.exp()),
        (Func::Ln, Num(x)) => num(x.ln()),
        (Func::Sin, Num(x)) => num(x.sin()),
        (Func::Cos, Num(x)) => num(x.cos()),
        (Func::Sqrt, Num(x)) => num(x.sqrt()),
        _ => Call(f, Box::new(a)),
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some(t) = p.peek() {
            return Err(t.error(format!("unexpected {:?}", t.kind)));
        }
        Ok(e)
    }

    pub fn eval<R: Real>(&self, x: &[R; 2]) -> R {
        match self {
            Num(v) => x[0].constant(*v),
            Var(i) => x[*i].clone(),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Neg(a) => -a.eval(x),
            Pow(a, p) => {
                let base = a.eval(x);
                if p.fract() == 0.0 && p.abs() <= 64.0 {
                    base.powi(*p as i32)
                } else {
                    base.powf(*p)
                }
            }
            Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        }
    }

    pub fn eval_f64(&self, p: &Point2) -> f64 {
        self.eval(&[p.x, p.y])
    }

    /// Symbolic partial derivative along variable `k`.
    pub fn derivative(&self, k: usize) -> Expr {
        match self {
            Num(_) => num(0.0),
            Var(i) => num(if *i == k { 1.0 } else { 0.0 }),
            Add(a, b) => add(a.derivative(k), b.derivative(k)),
            Sub(a, b) => sub(a.derivative(k), b.derivative(k)),
            Mul(a, b) => add(mul(a.derivative(k), (**b).clone()), mul((**a).clone(), b.derivative(k))),
            Div(a, b) => div(
                sub(mul(a.derivative(k), (**b).clone()), mul((**a).clone(), b.derivative(k))),
                pow((**b).clone(), 2.0),
            ),
            Neg(a) => neg(a.derivative(k)),
            Pow(a, p) => mul(mul(num(*p), pow((**a).clone(), p - 1.0)), a.derivative(k)),
            Call(f, a) => {
                let inner = a.derivative(k);
                let outer = match f {
                    Func::Exp => call(Func::Exp, (**a).clone()),
                    Func::Ln => div(num(1.0), (**a).clone()),
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, (**a).clone())),
                };
                mul(outer, inner)
            }
        }
    }

    /// Exact conversion when the expression is a polynomial of degree at
    /// most 8 in `x1`, `x2`.
    pub fn to_polynomial(&self) -> Option<Polynomial> {
        let p = self.poly_rec()?;
        if p.effective_degree() > crate::poly::MAX_DEGREE {
            return None;
        }
        Polynomial::from_terms(Point2::zeros(), &p.terms().filter(|t| t.2 != 0.0).collect::<Vec<_>>()).ok()
    }

    fn poly_rec(&self) -> Option<Polynomial> {
        let o = Point2::zeros();
        Some(match self {
            Num(v) => Polynomial::from_terms(o, &[(0, 0, *v)]).ok()?,
            Var(0) => Polynomial::from_terms(o, &[(1, 0, 1.0)]).ok()?,
            Var(_) => Polynomial::from_terms(o, &[(0, 1, 1.0)]).ok()?,
            Add(a, b) => a.poly_rec()?.add(&b.poly_rec()?),
            Sub(a, b) => a.poly_rec()?.add(&b.poly_rec()?.scaled(-1.0)),
            Mul(a, b) => {
                let p = a.poly_rec()?.mul(&b.poly_rec()?);
                if p.degree() > 2 * crate::poly::MAX_DEGREE {
                    return None;
                }
                p
            }
            Div(a, b) => match **b {
                Num(d) if d != 0.0 => a.poly_rec()?.scaled(1.0 / d),
                _ => {
                    let q = b.poly_rec()?;
                    if q.effective_degree() != 0 {
                        return None;
                    }
                    a.poly_rec()?.scaled(1.0 / q.coeff(0, 0))
                }
            },
            Neg(a) => a.poly_rec()?.scaled(-1.0),
            Pow(a, p) => {
                if p.fract() != 0.0 || *p < 0.0 || *p > crate::poly::MAX_DEGREE as f64 {
                    return None;
                }
                let base = a.poly_rec()?;
                let mut out = Polynomial::from_terms(o, &[(0, 0, 1.0)]).ok()?;
                for _ in 0..(*p as usize) {
                    out = out.mul(&base);
                }
                out
            }
            Call(..) => return None,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Var(i) => write!(f, "x{}", i + 1),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Neg(a) => write!(f, "(-{a})"),
            Pow(a, p) => write!(f, "({a} ^ {})", Num(*p)),
            Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    line: usize,
    column: usize,
}

impl Token {
    fn error(&self, message: String) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message,
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    i = k;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("bad number {text:?}"),
            })?;
            col += i - start;
            out.push(Token {
                kind: TokKind::Num(v),
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                kind: TokKind::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token {
                kind: TokKind::Op(c),
                line: tl,
                column: tc,
            });
            i += 1;
            col += 1;
            continue;
        }
        return Err(Error::Parse {
            line: tl,
            column: tc,
            message: format!("unexpected character {c:?}"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokKind::Op(c), ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn end_error(&self) -> Error {
        let (line, column) = self.tokens.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
        Error::Parse {
            line,
            column,
            message: "unexpected end of expression".into(),
        }
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Op(c) => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(t.error(format!("expected {c:?}"))),
            None => Err(self.end_error()),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek_op() {
            match c {
                '+' => {
                    self.pos += 1;
                    lhs = add(lhs, self.term()?);
                }
                '-' => {
                    self.pos += 1;
                    lhs = sub(lhs, self.term()?);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.peek_op() {
            match c {
                '*' => {
                    self.pos += 1;
                    lhs = mul(lhs, self.unary()?);
                }
                '/' => {
                    self.pos += 1;
                    lhs = div(lhs, self.unary()?);
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(neg(self.unary()?))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            let tok = self.tokens[self.pos].clone();
            self.pos += 1;
            let exponent = self.unary()?;
            return match exponent {
                Num(p) => Ok(pow(base, p)),
                _ => Err(tok.error("exponent must be a constant".into())),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.end_error());
        };
        self.pos += 1;
        match &tok.kind {
            TokKind::Num(v) => Ok(num(*v)),
            TokKind::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                let func = match name.as_str() {
                    "x1" | "x" => return Ok(Var(0)),
                    "x2" | "y" => return Ok(Var(1)),
                    "pi" => return Ok(num(std::f64::consts::PI)),
                    "e" => return Ok(num(std::f64::consts::E)),
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "sqrt" => Func::Sqrt,
                    _ => return Err(tok.error(format!("unknown identifier {name:?}"))),
                };
                self.expect_op('(')?;
                let arg = self.expr()?;
                self.expect_op(')')?;
                Ok(call(func, arg))
            }
            TokKind::Op(c) => Err(tok.error(format!("unexpected {c:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("0.5*(x1^2+x2^2) - 3*x1 + exp(x2)").unwrap();
        let v = e.eval_f64(&Point2::new(2.0, 1.0));
        assert!((v - (2.5 - 6.0 + 1f64.exp())).abs() < 1e-14);
        let e = Expr::parse("-x^2").unwrap();
        assert_eq!(e.eval_f64(&Point2::new(3.0, 0.0)), -9.0);
        let e = Expr::parse("2^-1 * x2").unwrap();
        assert_eq!(e.eval_f64(&Point2::new(0.0, 4.0)), 2.0);
    }

    #[test]
    fn parse_errors_carry_position() {
        match Expr::parse("x1 +\n  * 2") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        match Expr::parse("x1 ^ x2") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 4)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Expr::parse("foo(x1)"), Err(Error::Parse { column: 1, .. })));
        assert!(matches!(Expr::parse("(x1"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x1 $ 2"), Err(Error::Parse { column: 4, .. })));
    }

    #[test]
    fn symbolic_derivative_matches_finite_differences() {
        let e = Expr::parse("exp(x2)*x1 + sin(x1*x2)/(2+cos(x1)) + sqrt(1+x1^2)*ln(3+x2)").unwrap();
        let p = Point2::new(0.3, -0.4);
        let h = 1e-6;
        for k in 0..2 {
            let mut d = Point2::zeros();
            d[k] = h;
            let fd = (e.eval_f64(&(p + d)) - e.eval_f64(&(p - d))) / (2.0 * h);
            assert!((fd - e.derivative(k).eval_f64(&p)).abs() < 1e-8);
        }
    }

    #[test]
    fn jet_evaluation_matches_symbolic_derivatives() {
        let e = Expr::parse("exp(x2)*x1").unwrap();
        let j = e.eval(&[Jet::var_s(3, 0.1), Jet::var_t(3, 0.2)]);
        let p = Point2::new(0.1, 0.2);
        assert!((j.coeff(0, 1) - e.derivative(1).eval_f64(&p)).abs() < 1e-15);
        assert!((2.0 * j.coeff(0, 2) - e.derivative(1).derivative(1).eval_f64(&p)).abs() < 1e-15);
    }

    #[test]
    fn polynomial_conversion() {
        let e = Expr::parse("3*x1").unwrap();
        let p = e.to_polynomial().unwrap();
        assert_eq!(p.coeff(1, 0), 3.0);
        let e = Expr::parse("(x1 + 2*x2)^3 / 4 - 1").unwrap();
        let p = e.to_polynomial().unwrap();
        let at = Point2::new(0.7, -0.2);
        assert!((p.eval(&at) - e.eval_f64(&at)).abs() < 1e-14);
        assert!(Expr::parse("exp(x1)").unwrap().to_polynomial().is_none());
        assert!(Expr::parse("x1^9").unwrap().to_polynomial().is_none());
        assert!(Expr::parse("1/x1").unwrap().to_polynomial().is_none());
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("-(x1 - 2.5)^2 * exp(-x2) / 3").unwrap();
        let back = Expr::parse(&e.to_string()).unwrap();
        let p = Point2::new(0.4, 1.3);
        assert_eq!(e.eval_f64(&p), back.eval_f64(&p));
    }
}
