//! Arithmetic expressions over `t`, `x1..xd` and `a1..am` for experiment configs.
//!
//! Grammar: `+ - * / ^` with the usual precedence (`^` binds tightest and is
//! right-associative), unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `exp ln log sqrt sin cos tan abs
//! sinh cosh tanh`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    T,
    X(usize),
    A(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Abs,
    Sinh,
    Cosh,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "abs" => Func::Abs,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Abs => v.abs(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn eval(&self, t: f64, x: &[f64], a: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(Var::T) => t,
            Node::Var(Var::X(i)) => x[*i],
            Node::Var(Var::A(i)) => a[*i],
            Node::Neg(n) => -n.eval(t, x, a),
            Node::Add(l, r) => l.eval(t, x, a) + r.eval(t, x, a),
            Node::Sub(l, r) => l.eval(t, x, a) - r.eval(t, x, a),
            Node::Mul(l, r) => l.eval(t, x, a) * r.eval(t, x, a),
            Node::Div(l, r) => l.eval(t, x, a) / r.eval(t, x, a),
            Node::Pow(l, r) => {
                let base = l.eval(t, x, a);
                match **r {
                    Node::Num(p) if p == p.trunc() && p.abs() <= 64.0 => base.powi(p as i32),
                    _ => base.powf(r.eval(t, x, a)),
                }
            }
            Node::Call(f, n) => f.apply(n.eval(t, x, a)),
        }
    }

    fn visit_vars(&self, out: &mut impl FnMut(Var)) {
        match self {
            Node::Num(_) => {}
            Node::Var(v) => out(*v),
            Node::Neg(n) | Node::Call(_, n) => n.visit_vars(out),
            Node::Add(l, r) | Node::Sub(l, r) | Node::Mul(l, r) | Node::Div(l, r) | Node::Pow(l, r) => {
                l.visit_vars(out);
                r.visit_vars(out);
            }
        }
    }
}

/// A parsed expression.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
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
        Expr::parse(s)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, source };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn eval(&self, t: f64, x: &[f64], a: &[f64]) -> f64 {
        self.root.eval(t, x, a)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Fails if the expression names `x_i` beyond `d` or `a_k` beyond `m`.
    pub fn check_arity(&self, d: usize, m: usize) -> Result<()> {
        let mut bad = None;
        self.root.visit_vars(&mut |v| match v {
            Var::X(i) if i >= d => bad = Some(format!("x{}", i + 1)),
            Var::A(k) if k >= m => bad = Some(format!("a{}", k + 1)),
            _ => {}
        });
        match bad {
            Some(name) => Err(Error::Expression(format!(
                "`{}` uses {name}, but the functional has d = {d}, m = {m}",
                self.source
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}` in `{src}`")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'s> {
    tokens: Vec<Token>,
    pos: usize,
    source: &'s str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression(format!("{msg} at token {} in `{}`", self.pos + 1, self.source))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect_op(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| self.error("unexpected end"))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let inner = self.expr()?;
                self.expect_op(')')?;
                Ok(inner)
            }
            Token::Op(c) => {
                self.pos -= 1;
                Err(self.error(&format!("unexpected `{c}`")))
            }
            Token::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.expect_op('(')?;
                    let arg = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "t" => Ok(Node::Var(Var::T)),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => parse_indexed(&name).ok_or_else(|| {
                        self.pos -= 1;
                        self.error(&format!("unknown name `{name}`"))
                    }),
                }
            }
        }
    }
}

fn parse_indexed(name: &str) -> Option<Node> {
    let (head, digits) = name.split_at(1);
    let idx: usize = digits.parse().ok()?;
    if idx == 0 {
        return None;
    }
    match head {
        "x" => Some(Node::Var(Var::X(idx - 1))),
        "a" => Some(Node::Var(Var::A(idx - 1))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval(0.5, &[2.0, 3.0], &[0.25])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2"), 512.0);
        assert_eq!(ev("-2 ^ 2"), -4.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("10 - 3 - 2"), 5.0);
        assert_eq!(ev("1.5e1 + 2E-1"), 15.2);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("t"), 0.5);
        assert_eq!(ev("x1 * x2 + a1"), 6.25);
        assert_eq!(ev("exp(0) + ln(1) + sqrt(x1 + 2)"), 3.0);
        assert_eq!(ev("abs(-x2)"), 3.0);
        assert!((ev("sin(pi / 2)") - 1.0).abs() < 1e-15);
        assert!((ev("log(e)") - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        for bad in ["", "1 +", "(1", "foo", "x0", "y1", "exp 1", "1 $ 2", "2 3"] {
            assert!(Expr::parse(bad).is_err(), "`{bad}` should not parse");
        }
        let e = Expr::parse("x3 + a1").unwrap();
        assert!(e.check_arity(2, 1).is_err());
        assert!(e.check_arity(3, 1).is_ok());
        assert!(Expr::parse("a2").unwrap().check_arity(3, 1).is_err());
    }
}
