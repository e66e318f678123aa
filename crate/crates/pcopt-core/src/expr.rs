//! Arithmetic expressions over named variables: parsing, evaluation,
//! exact differentiation, and a parenthesized printer.
//!
//! Grammar (integer exponents only, no transcendental functions):
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' UNSIGNED_INT)?
//! atom   := NUMBER | IDENT | '(' expr ')'
//! ```

use crate::error::{Error, Result};
use std::collections::{BTreeSet, HashMap};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    /// Names of all variables referenced anywhere in the tree.
    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Neg(a) => a.collect_vars(out),
            Expr::Pow(a, _) => a.collect_vars(out),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
        }
    }
}

/// Value of `e` with every variable bound by `env`.
pub fn eval_expr(e: &Expr, env: &HashMap<String, f64>) -> Result<f64> {
    Ok(eval_grad(e, None, env)?.0)
}

/// Exact partial derivative ∂e/∂wrt at `env`, by differentiating the tree.
pub fn grad_expr(e: &Expr, wrt: &str, env: &HashMap<String, f64>) -> Result<f64> {
    Ok(eval_grad(e, Some(wrt), env)?.1)
}

fn eval_grad(e: &Expr, wrt: Option<&str>, env: &HashMap<String, f64>) -> Result<(f64, f64)> {
    Ok(match e {
        Expr::Const(c) => (*c, 0.0),
        Expr::Var(name) => {
            let v = *env.get(name).ok_or_else(|| {
                Error::Eval(format!("no value bound for variable `{name}`"))
            })?;
            (v, if wrt == Some(name.as_str()) { 1.0 } else { 0.0 })
        }
        Expr::Add(a, b) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            let (vb, db) = eval_grad(b, wrt, env)?;
            (va + vb, da + db)
        }
        Expr::Sub(a, b) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            let (vb, db) = eval_grad(b, wrt, env)?;
            (va - vb, da - db)
        }
        Expr::Mul(a, b) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            let (vb, db) = eval_grad(b, wrt, env)?;
            (va * vb, da * vb + va * db)
        }
        Expr::Div(a, b) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            let (vb, db) = eval_grad(b, wrt, env)?;
            if vb == 0.0 {
                return Err(Error::Eval("division by zero".into()));
            }
            (va / vb, (da * vb - va * db) / (vb * vb))
        }
        Expr::Neg(a) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            (-va, -da)
        }
        Expr::Pow(a, n) => {
            let (va, da) = eval_grad(a, wrt, env)?;
            if *n == 0 {
                (1.0, 0.0)
            } else {
                (va.powi(*n as i32), (*n as f64) * va.powi(*n as i32 - 1) * da)
            }
        }
    })
}

/// Parses an expression that starts at line 1, column 1.
pub fn parse_expression(text: &str) -> Result<Expr> {
    parse_expression_at(text, 1, 1)
}

/// Parses an expression whose first character sits at the given 1-based
/// position, so errors carry file-global coordinates.
pub(crate) fn parse_expression_at(text: &str, line: usize, col: usize) -> Result<Expr> {
    let tokens = lex(text, line, col)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(t.unexpected()),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num { value: f64, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Other(char),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    line: usize,
    col: usize,
}

impl Token {
    fn describe(&self) -> String {
        match &self.kind {
            TokKind::Num { value, .. } => format!("number `{value}`"),
            TokKind::Ident(s) => format!("identifier `{s}`"),
            TokKind::Plus => "`+`".into(),
            TokKind::Minus => "`-`".into(),
            TokKind::Star => "`*`".into(),
            TokKind::Slash => "`/`".into(),
            TokKind::Caret => "`^`".into(),
            TokKind::LParen => "`(`".into(),
            TokKind::RParen => "`)`".into(),
            TokKind::Other(c) => format!("`{c}`"),
        }
    }

    fn unexpected(&self) -> Error {
        Error::Parse {
            line: self.line,
            column: self.col,
            message: format!("unexpected {}", self.describe()),
        }
    }
}

fn lex(text: &str, line: usize, start_col: usize) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = start_col + i;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                out.push(Token {
                    kind: match c {
                        '+' => TokKind::Plus,
                        '-' => TokKind::Minus,
                        '*' => TokKind::Star,
                        '/' => TokKind::Slash,
                        '^' => TokKind::Caret,
                        '(' => TokKind::LParen,
                        _ => TokKind::RParen,
                    },
                    line,
                    col,
                });
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                let mut integral = true;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    integral = false;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        integral = false;
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let raw: String = chars[start..i].iter().collect();
                let value = raw.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: col,
                    message: format!("malformed number `{raw}`"),
                })?;
                out.push(Token {
                    kind: TokKind::Num { value, integral },
                    line,
                    col,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokKind::Ident(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            }
            other => {
                out.push(Token {
                    kind: TokKind::Other(other),
                    line,
                    col,
                });
                i += 1;
            }
        }
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

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn end_error(&self) -> Error {
        let (line, col) = self
            .tokens
            .last()
            .map(|t| (t.line, t.col + 1))
            .unwrap_or((1, 1));
        Error::Parse {
            line,
            column: col,
            message: "unexpected end of expression".into(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            match t.kind {
                TokKind::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                TokKind::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(t) = self.peek() {
            match t.kind {
                TokKind::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                TokKind::Slash => {
                    let slash = self.bump().unwrap();
                    let rhs = self.factor()?;
                    if rhs == Expr::Const(0.0) {
                        return Err(Error::Parse {
                            line: slash.line,
                            column: slash.col,
                            message: "division by the constant zero".into(),
                        });
                    }
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(t) if t.kind == TokKind::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Caret {
                self.bump();
                let exp_tok = self.bump().ok_or_else(|| self.end_error())?;
                let exp = match exp_tok.kind {
                    TokKind::Num { value, integral }
                        if integral && value >= 0.0 && value <= u32::MAX as f64 =>
                    {
                        value as u32
                    }
                    _ => {
                        return Err(Error::Parse {
                            line: exp_tok.line,
                            column: exp_tok.col,
                            message: format!(
                                "exponent must be an unsigned integer, found {}",
                                exp_tok.describe()
                            ),
                        })
                    }
                };
                return Ok(Expr::Pow(Box::new(base), exp));
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.bump().ok_or_else(|| self.end_error())?;
        match t.kind {
            TokKind::Num { value, .. } => Ok(Expr::Const(value)),
            TokKind::Ident(name) => Ok(Expr::Var(name)),
            TokKind::LParen => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(close) if close.kind == TokKind::RParen => Ok(inner),
                    Some(other) => Err(Error::Parse {
                        line: other.line,
                        column: other.col,
                        message: format!("expected `)`, found {}", other.describe()),
                    }),
                    None => Err(self.end_error()),
                }
            }
            _ => Err(t.unexpected()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn env(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluates_quadratic_objective() {
        let e = parse_expression("(1 + lambda)*x^2 + x").unwrap();
        let v = eval_expr(&e, &env(&[("x", -0.5), ("lambda", 0.0)])).unwrap();
        assert!((v + 0.25).abs() < 1e-15);
    }

    #[test]
    fn precedence_and_associativity() {
        let cases = [
            ("1 + 2*3", 7.0),
            ("2*3^2", 18.0),
            ("2 - 3 - 4", -5.0),
            ("8/4/2", 1.0),
            ("(x - 3)^2", 4.0),
            ("-x^2", -25.0),
            ("x^0", 1.0),
        ];
        for (text, want) in cases {
            let e = parse_expression(text).unwrap();
            let v = eval_expr(&e, &env(&[("x", 5.0)])).unwrap();
            assert!((v - want).abs() < 1e-12, "{text}: {v}");
        }
    }

    #[test]
    fn gradient_examples() {
        let e = parse_expression("(1 + lambda)*x^2 + x").unwrap();
        let g = grad_expr(&e, "x", &env(&[("x", 1.0), ("lambda", 0.0)])).unwrap();
        assert!((g - 3.0).abs() < 1e-15);

        let e = parse_expression("x^2").unwrap();
        let g = grad_expr(&e, "lambda", &env(&[("x", 4.0), ("lambda", 9.0)])).unwrap();
        assert_eq!(g, 0.0);

        let e = parse_expression("x^3").unwrap();
        let g = grad_expr(&e, "x", &env(&[("x", 2.0)])).unwrap();
        assert!((g - 12.0).abs() < 1e-15);

        let e = parse_expression("1/x").unwrap();
        let g = grad_expr(&e, "x", &env(&[("x", 2.0)])).unwrap();
        assert!((g + 0.25).abs() < 1e-15);
    }

    #[test]
    fn eval_errors() {
        let e = parse_expression("x + y").unwrap();
        let err = eval_expr(&e, &env(&[("x", 1.0)])).unwrap_err();
        assert!(err.to_string().contains("`y`"));

        let e = parse_expression("x/(y - y)").unwrap();
        assert!(eval_expr(&e, &env(&[("x", 1.0), ("y", 2.0)])).is_err());
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse_expression("x + * 2").unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!((line, column), (1, 5));
            }
            other => panic!("{other:?}"),
        }
        match parse_expression_at("x +", 7, 10).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!((line, column), (7, 13));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_expression("x ^ y").is_err());
        assert!(parse_expression("x ^ -2").is_err());
        assert!(parse_expression("x ^ 2.5").is_err());
        assert!(parse_expression("1/0").is_err());
        assert!(parse_expression("(x + 1").is_err());
        assert!(parse_expression("x 2").is_err());
        assert!(parse_expression("x $ 2").is_err());
        assert!(parse_expression("").is_err());
    }

    #[test]
    fn print_parse_roundtrip() {
        let texts = [
            "(1 + lambda)*x^2 + x",
            "-x^2 + 3*y - 4/(x + 2)",
            "x1 + x2 - 1",
            "((x - 3)^2 + lambda)/2",
            "-(-x)",
            "0.5*x^3 - 1.25e-2",
        ];
        for text in texts {
            let first = parse_expression(text).unwrap();
            let printed = first.to_string();
            let second = parse_expression(&printed).unwrap();
            assert_eq!(first, second, "{text} -> {printed}");
        }
    }

    fn random_expr(rng: &mut StdRng, depth: usize) -> Expr {
        if depth == 0 {
            return if rng.random_bool(0.5) {
                Expr::Const(rng.random_range(-2.0..2.0))
            } else {
                Expr::Var(if rng.random_bool(0.5) { "x" } else { "y" }.into())
            };
        }
        match rng.random_range(0..6) {
            0 => Expr::Add(
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            ),
            1 => Expr::Sub(
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            ),
            2 => Expr::Mul(
                Box::new(random_expr(rng, depth - 1)),
                Box::new(random_expr(rng, depth - 1)),
            ),
            3 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
            4 => Expr::Pow(Box::new(random_expr(rng, depth - 1)), rng.random_range(0..4)),
            // Denominator bounded away from zero on the sampled box.
            _ => Expr::Div(
                Box::new(random_expr(rng, depth - 1)),
                Box::new(Expr::Add(
                    Box::new(Expr::Const(rng.random_range(3.0..4.0))),
                    Box::new(Expr::Pow(Box::new(Expr::Var("x".into())), 2)),
                )),
            ),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = StdRng::seed_from_u64(11);
        let h = 1e-6;
        for case in 0..100 {
            let e = random_expr(&mut rng, 3);
            let x: f64 = rng.random_range(-1.2..1.2);
            let y: f64 = rng.random_range(-1.2..1.2);
            for (wrt, step_x, step_y) in [("x", h, 0.0), ("y", 0.0, h)] {
                let g = grad_expr(&e, wrt, &env(&[("x", x), ("y", y)])).unwrap();
                let fp = eval_expr(&e, &env(&[("x", x + step_x), ("y", y + step_y)])).unwrap();
                let fm = eval_expr(&e, &env(&[("x", x - step_x), ("y", y - step_y)])).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (g - fd).abs() <= 1e-5 * (1.0 + g.abs()),
                    "case {case} wrt {wrt}: symbolic {g} vs fd {fd} on {e}"
                );
            }
        }
    }

    #[test]
    fn collects_variables() {
        let e = parse_expression("(a + b)*c^2 - a/(d + 3)").unwrap();
        let vars: Vec<&str> = e.variables().into_iter().collect();
        assert_eq!(vars, vec!["a", "b", "c", "d"]);
    }
}
