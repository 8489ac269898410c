//! A small expression language for user-supplied generating functions.
//!
//! Grammar (whitespace insignificant, the variable is always `t`):
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := atom ('^' unary)?          exponent must fold to a constant
//! atom     := number | 't' | func '(' expr ')' | '(' expr ')'
//! func     := exp | log | sin | cos | sqrt
//! ```
//!
//! `^` binds tighter than unary minus, so `-t^2` is `-(t^2)`.

use std::fmt;

use thiserror::Error;

use crate::jet::{JetError, TaylorJet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Neg,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
}

impl UnaryFn {
    fn name(self) -> &'static str {
        match self {
            UnaryFn::Neg => "-",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => UnaryFn::Exp,
            "log" => UnaryFn::Log,
            "sin" => UnaryFn::Sin,
            "cos" => UnaryFn::Cos,
            "sqrt" => UnaryFn::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Parsed expression tree of a scalar function of `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum FuncExpr {
    Const(f64),
    Var,
    Unary(UnaryFn, Box<FuncExpr>),
    Binary(BinOp, Box<FuncExpr>, Box<FuncExpr>),
    /// Power with a constant real exponent.
    Pow(Box<FuncExpr>, f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: expected one of {expected:?}, found {found}")]
    Syntax { offset: usize, expected: Vec<&'static str>, found: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at offset {offset} is not a constant")]
    NonConstantExponent { offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Empty => None,
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonConstantExponent { offset } => Some(*offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("`{subexpr}` is outside its domain at t = {at} (argument value {value})")]
    Domain { subexpr: String, at: f64, value: f64 },
    #[error("`{subexpr}` is singular at t = {at}")]
    Singular { subexpr: String, at: f64 },
    #[error("`{subexpr}` produced a non-finite value at t = {at}")]
    NonFinite { subexpr: String, at: f64 },
}

impl FuncExpr {
    pub fn constant(c: f64) -> Self {
        FuncExpr::Const(c)
    }

    pub fn var() -> Self {
        FuncExpr::Var
    }

    pub fn is_constant(&self) -> bool {
        match self {
            FuncExpr::Const(_) => true,
            FuncExpr::Var => false,
            FuncExpr::Unary(_, a) | FuncExpr::Pow(a, _) => a.is_constant(),
            FuncExpr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Plain value at `t`.
    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let v = match self {
            FuncExpr::Const(c) => *c,
            FuncExpr::Var => t,
            FuncExpr::Unary(op, a) => {
                let x = a.eval(t)?;
                match op {
                    UnaryFn::Neg => -x,
                    UnaryFn::Exp => x.exp(),
                    UnaryFn::Sin => x.sin(),
                    UnaryFn::Cos => x.cos(),
                    UnaryFn::Log | UnaryFn::Sqrt => {
                        if x <= 0.0 {
                            return Err(self.domain_error(t, x));
                        }
                        if *op == UnaryFn::Log {
                            x.ln()
                        } else {
                            x.sqrt()
                        }
                    }
                }
            }
            FuncExpr::Binary(op, a, b) => {
                let (x, y) = (a.eval(t)?, b.eval(t)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(EvalError::Singular { subexpr: self.to_string(), at: t });
                        }
                        x / y
                    }
                }
            }
            FuncExpr::Pow(a, p) => {
                let x = a.eval(t)?;
                match integer_exponent(*p) {
                    Some(k) if k >= 0 => x.powi(k),
                    Some(k) => {
                        if x == 0.0 {
                            return Err(EvalError::Singular { subexpr: self.to_string(), at: t });
                        }
                        x.powi(k)
                    }
                    None => {
                        if x <= 0.0 {
                            return Err(self.domain_error(t, x));
                        }
                        x.powf(*p)
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite { subexpr: self.to_string(), at: t });
        }
        Ok(v)
    }

    fn domain_error(&self, at: f64, value: f64) -> EvalError {
        EvalError::Domain { subexpr: self.to_string(), at, value }
    }

    fn lift(&self, at: f64, err: JetError) -> EvalError {
        match err {
            JetError::Domain { value, .. } => self.domain_error(at, value),
            JetError::Singular { .. } => EvalError::Singular { subexpr: self.to_string(), at },
            _ => EvalError::NonFinite { subexpr: self.to_string(), at },
        }
    }
}

fn integer_exponent(p: f64) -> Option<i32> {
    (p.fract() == 0.0 && p.abs() <= 64.0).then_some(p as i32)
}

/// Exact jet of `f` at `at`, by structural recursion over the tree.
pub fn eval_jet(f: &FuncExpr, at: f64, order: usize) -> Result<TaylorJet, EvalError> {
    let jet = match f {
        FuncExpr::Const(c) => TaylorJet::constant(at, *c, order),
        FuncExpr::Var => TaylorJet::variable(at, order),
        FuncExpr::Unary(op, a) => {
            let u = eval_jet(a, at, order)?;
            match op {
                UnaryFn::Neg => u.neg(),
                UnaryFn::Exp => u.exp(),
                UnaryFn::Sin => u.sin_cos().0,
                UnaryFn::Cos => u.sin_cos().1,
                UnaryFn::Log => u.ln().map_err(|e| f.lift(at, e))?,
                UnaryFn::Sqrt => u.sqrt().map_err(|e| f.lift(at, e))?,
            }
        }
        FuncExpr::Binary(op, a, b) => {
            let (x, y) = (eval_jet(a, at, order)?, eval_jet(b, at, order)?);
            let r = match op {
                BinOp::Add => x.add(&y),
                BinOp::Sub => x.sub(&y),
                BinOp::Mul => x.mul(&y),
                BinOp::Div => x.div(&y),
            };
            r.map_err(|e| f.lift(at, e))?
        }
        FuncExpr::Pow(a, p) => {
            let u = eval_jet(a, at, order)?;
            match integer_exponent(*p) {
                Some(k) if k >= 0 => u.powi(k as u32),
                Some(k) => TaylorJet::constant(at, 1.0, order)
                    .div(&u.powi((-k) as u32))
                    .map_err(|e| f.lift(at, e))?,
                None => u.powf(*p).map_err(|e| f.lift(at, e))?,
            }
        }
    };
    if !jet.is_finite() {
        return Err(EvalError::NonFinite { subexpr: f.to_string(), at });
    }
    Ok(jet)
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuncExpr::Const(c) => write!(f, "{c}"),
            FuncExpr::Var => write!(f, "t"),
            FuncExpr::Unary(UnaryFn::Neg, a) => write!(f, "(-{a})"),
            FuncExpr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            FuncExpr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            FuncExpr::Pow(a, p) => write!(f, "({a})^({p})"),
        }
    }
}

impl std::str::FromStr for FuncExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expr(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
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
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
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
                let text = &src[start..i];
                let v = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    expected: vec!["number"],
                    found: format!("`{text}`"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap();
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: vec!["number", "`t`", "function", "`(`", "operator"],
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const OPERAND: &[&str] = &["number", "`t`", "function", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.to_vec(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<FuncExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = FuncExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<FuncExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = FuncExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<FuncExpr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(FuncExpr::Unary(UnaryFn::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FuncExpr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let exponent = self.unary()?;
        if !exponent.is_constant() {
            return Err(ParseError::NonConstantExponent { offset: at });
        }
        let p = exponent
            .eval(0.0)
            .map_err(|_| ParseError::NonConstantExponent { offset: at })?;
        Ok(FuncExpr::Pow(Box::new(base), p))
    }

    fn atom(&mut self) -> Result<FuncExpr, ParseError> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(FuncExpr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "t" {
                    return Ok(FuncExpr::Var);
                }
                let Some(func) = UnaryFn::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier { name, offset: at });
                };
                if *self.peek() != Tok::LParen {
                    return Err(self.unexpected(&["`(`"]));
                }
                self.bump();
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(FuncExpr::Unary(func, Box::new(arg)))
            }
            _ => Err(self.unexpected(OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::RParen {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&["`)`", "operator"]))
        }
    }
}

pub fn parse_expr(src: &str) -> Result<FuncExpr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["operator", "end of input"]));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(v: f64) -> Box<FuncExpr> {
        Box::new(FuncExpr::Const(v))
    }

    fn var() -> Box<FuncExpr> {
        Box::new(FuncExpr::Var)
    }

    #[test]
    fn parses_sum_with_power() {
        let e = parse_expr("1 + t^2").unwrap();
        assert_eq!(e, FuncExpr::Binary(BinOp::Add, c(1.0), Box::new(FuncExpr::Pow(var(), 2.0))));
    }

    #[test]
    fn parses_function_calls() {
        let e = parse_expr("exp(2*t)*sin(t)").unwrap();
        let want = FuncExpr::Binary(
            BinOp::Mul,
            Box::new(FuncExpr::Unary(
                UnaryFn::Exp,
                Box::new(FuncExpr::Binary(BinOp::Mul, c(2.0), var())),
            )),
            Box::new(FuncExpr::Unary(UnaryFn::Sin, var())),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn malformed_input_reports_offset() {
        let err = parse_expr("1 + * 2").unwrap_err();
        assert_eq!(err.offset(), Some(4));
        match err {
            ParseError::Syntax { expected, .. } => assert!(expected.contains(&"`t`")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus binds looser than ^
        assert_eq!(
            parse_expr("-t^2").unwrap(),
            FuncExpr::Unary(UnaryFn::Neg, Box::new(FuncExpr::Pow(var(), 2.0)))
        );
        // left-assoc subtraction
        let e = parse_expr("1 - 2 - 3").unwrap();
        assert_eq!(e.eval(0.0).unwrap(), -4.0);
        let e = parse_expr("8 / 4 / 2").unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
        // constant exponents fold, including signed and parenthesized ones
        assert_eq!(parse_expr("t^-1").unwrap(), FuncExpr::Pow(var(), -1.0));
        assert_eq!(parse_expr("t^(1/2)").unwrap(), FuncExpr::Pow(var(), 0.5));
        assert_eq!(parse_expr("  t  ").unwrap(), FuncExpr::Var);
    }

    #[test]
    fn rejects_bad_identifiers_and_exponents() {
        assert!(matches!(
            parse_expr("1 + x"),
            Err(ParseError::UnknownIdentifier { offset: 4, .. })
        ));
        assert!(matches!(parse_expr("t^t"), Err(ParseError::NonConstantExponent { offset: 2 })));
        assert!(matches!(parse_expr("  "), Err(ParseError::Empty)));
        assert!(parse_expr("(1 + t").is_err());
        assert!(parse_expr("sin t").is_err());
        assert!(parse_expr("1 2").is_err());
        assert!(matches!(parse_expr("1 $ 2"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn variable_jet() {
        let j = eval_jet(&FuncExpr::Var, 0.0, 2).unwrap();
        assert_eq!(j.coeffs(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn product_rule_jet() {
        let e = parse_expr("sin(t)*exp(2*t)").unwrap();
        let j = eval_jet(&e, 0.0, 1).unwrap();
        assert_eq!(j.coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn constant_jet() {
        let e = parse_expr("3/2").unwrap();
        let j = eval_jet(&e, 7.5, 3).unwrap();
        assert_eq!(j.coeffs(), &[1.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let e = parse_expr("1 + log(t - 1)").unwrap();
        match eval_jet(&e, 0.5, 2).unwrap_err() {
            EvalError::Domain { subexpr, value, .. } => {
                assert_eq!(subexpr, "log((t - 1))");
                assert_relative_eq!(value, -0.5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(e.eval(0.5).is_err());
        let s = parse_expr("sqrt(t)").unwrap();
        assert!(eval_jet(&s, 0.0, 1).is_err());
        let d = parse_expr("1/t").unwrap();
        assert!(matches!(eval_jet(&d, 0.0, 1), Err(EvalError::Singular { .. })));
    }

    #[test]
    fn integer_powers_allow_negative_bases() {
        let e = parse_expr("(t - 2)^3").unwrap();
        let j = eval_jet(&e, 0.0, 3).unwrap();
        assert_eq!(j.derivatives(), vec![-8.0, 12.0, -12.0, 6.0]);
        let r = parse_expr("(t - 2)^-2").unwrap();
        assert_relative_eq!(eval_jet(&r, 0.0, 0).unwrap().value(), 0.25);
        assert!(eval_jet(&parse_expr("(t - 2)^0.5").unwrap(), 0.0, 0).is_err());
    }

    fn arb_expr() -> impl Strategy<Value = FuncExpr> {
        let leaf = prop_oneof![
            (0.0f64..5.0).prop_map(FuncExpr::Const),
            Just(FuncExpr::Var),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), prop_oneof![
                    Just(UnaryFn::Neg), Just(UnaryFn::Exp), Just(UnaryFn::Sin), Just(UnaryFn::Cos)
                ]).prop_map(|(a, f)| FuncExpr::Unary(f, Box::new(a))),
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)
                ]).prop_map(|(a, b, op)| FuncExpr::Binary(op, Box::new(a), Box::new(b))),
                (inner, prop_oneof![Just(2.0), Just(3.0), Just(-1.5), Just(0.25)])
                    .prop_map(|(a, p)| FuncExpr::Pow(Box::new(a), p)),
            ]
        })
    }

    fn smooth_expr() -> impl Strategy<Value = FuncExpr> {
        // Exercises every node kind on a positive argument so log/sqrt/real powers are defined.
        (0.5f64..2.0, 0.1f64..1.5, 0usize..5).prop_map(|(a, b, which)| {
            let src = match which {
                0 => format!("{a} + sin({b}*t)*exp(-t)"),
                1 => format!("log({a} + t^2) * cos({b}*t)"),
                2 => format!("sqrt({a} + t) / (1 + {b}*t^2)"),
                3 => format!("({a} + t)^(-2/3) - {b}*t^3"),
                _ => format!("exp({b}*sin(t)) * ({a} + t)^1.5"),
            };
            parse_expr(&src).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_expr(&printed).unwrap();
            prop_assert_eq!(back, e);
        }

        #[test]
        fn jets_match_central_differences(e in smooth_expr(), t in 0.1f64..1.5) {
            let j = eval_jet(&e, t, 2).unwrap();
            let h = 1e-4;
            let (fp, f0, fm) = (e.eval(t + h).unwrap(), e.eval(t).unwrap(), e.eval(t - h).unwrap());
            prop_assert!((j.value() - f0).abs() <= 1e-14 * (1.0 + f0.abs()));
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            let g1 = j.derivative(1).unwrap();
            let g2 = j.derivative(2).unwrap();
            prop_assert!((g1 - d1).abs() <= 1e-6 * g1.abs().max(1.0), "d1 {} vs {}", g1, d1);
            prop_assert!((g2 - d2).abs() <= 1e-6 * g2.abs().max(1.0) * 10.0, "d2 {} vs {}", g2, d2);
        }
    }
}
