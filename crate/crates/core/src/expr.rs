//! Closed-form scalar expressions over `x`, `y` and `tau`.
//!
//! The vocabulary is small: `+ - * / ^`, parentheses, numeric
//! literals, the constant `pi`, and the functions `sin`, `cos`, `exp`,
//! `sqrt`, `ln`. Expressions are parsed once into a tree and then evaluated on the
//! lattice. Symbolic differentiation in `tau` supplies analytic metric rates.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unexpected token '{token}' at offset {pos}")]
    UnexpectedToken { token: String, pos: usize },
    #[error("unknown identifier '{0}'")]
    UnknownIdent(String),
    #[error("invalid number literal '{0}'")]
    BadNumber(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Sqrt => v.sqrt(),
            Func::Ln => v.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    Tau,
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some((tok, pos)) => Err(ExprError::UnexpectedToken {
                token: tok.to_string(),
                pos,
            }),
        }
    }

    pub fn eval(&self, x: f64, y: f64, tau: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::Tau) => tau,
            Expr::Neg(a) => -a.eval(x, y, tau),
            Expr::Add(a, b) => a.eval(x, y, tau) + b.eval(x, y, tau),
            Expr::Sub(a, b) => a.eval(x, y, tau) - b.eval(x, y, tau),
            Expr::Mul(a, b) => a.eval(x, y, tau) * b.eval(x, y, tau),
            Expr::Div(a, b) => a.eval(x, y, tau) / b.eval(x, y, tau),
            Expr::Pow(a, b) => {
                let base = a.eval(x, y, tau);
                match b.as_ref() {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() < 64.0 => base.powi(*e as i32),
                    other => base.powf(other.eval(x, y, tau)),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(x, y, tau)),
        }
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Symbolic derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        if !self.depends_on(var) {
            return Num(0.0);
        }
        let bx = |e: Expr| Box::new(e);
        match self {
            Num(_) => Num(0.0),
            Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => Neg(bx(a.derivative(var))),
            Add(a, b) => Add(bx(a.derivative(var)), bx(b.derivative(var))),
            Sub(a, b) => Sub(bx(a.derivative(var)), bx(b.derivative(var))),
            Mul(a, b) => Add(
                bx(Mul(bx(a.derivative(var)), b.clone())),
                bx(Mul(a.clone(), bx(b.derivative(var)))),
            ),
            Div(a, b) => Div(
                bx(Sub(
                    bx(Mul(bx(a.derivative(var)), b.clone())),
                    bx(Mul(a.clone(), bx(b.derivative(var)))),
                )),
                bx(Mul(b.clone(), b.clone())),
            ),
            Pow(a, b) => {
                if !b.depends_on(var) {
                    // d(a^c) = c a^(c-1) a'
                    Mul(
                        bx(Mul(b.clone(), bx(Pow(a.clone(), bx(Sub(b.clone(), bx(Num(1.0)))))))),
                        bx(a.derivative(var)),
                    )
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let ln_a_times_db = Mul(bx(b.derivative(var)), bx(Call(Func::Ln, a.clone())));
                    let b_da_over_a = Div(bx(Mul(b.clone(), bx(a.derivative(var)))), a.clone());
                    Mul(bx(self.clone()), bx(Add(bx(ln_a_times_db), bx(b_da_over_a))))
                }
            }
            Call(f, a) => {
                let inner = a.derivative(var);
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(bx(Call(Func::Sin, a.clone()))),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Sqrt => Div(bx(Num(0.5)), bx(Call(Func::Sqrt, a.clone()))),
                    Func::Ln => Div(bx(Num(1.0)), a.clone()),
                };
                Mul(bx(outer), bx(inner))
            }
        }
        .simplify()
    }

    fn simplify(self) -> Expr {
        use Expr::*;
        match self {
            Add(a, b) => match (a.simplify(), b.simplify()) {
                (Num(p), Num(q)) => Num(p + q),
                (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
                (p, q) => Add(Box::new(p), Box::new(q)),
            },
            Sub(a, b) => match (a.simplify(), b.simplify()) {
                (Num(p), Num(q)) => Num(p - q),
                (e, Num(z)) if z == 0.0 => e,
                (Num(z), e) if z == 0.0 => Neg(Box::new(e)),
                (p, q) => Sub(Box::new(p), Box::new(q)),
            },
            Mul(a, b) => match (a.simplify(), b.simplify()) {
                (Num(p), Num(q)) => Num(p * q),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
                (p, q) => Mul(Box::new(p), Box::new(q)),
            },
            Div(a, b) => match (a.simplify(), b.simplify()) {
                (Num(z), _) if z == 0.0 => Num(0.0),
                (e, Num(o)) if o == 1.0 => e,
                (p, q) => Div(Box::new(p), Box::new(q)),
            },
            Neg(a) => match a.simplify() {
                Num(p) => Num(-p),
                Neg(inner) => *inner,
                e => Neg(Box::new(e)),
            },
            Pow(a, b) => Pow(Box::new(a.simplify()), Box::new(b.simplify())),
            Call(f, a) => Call(f, Box::new(a.simplify())),
            e => e,
        }
    }

    /// Shareable evaluator closure.
    pub fn into_fn(self) -> ScalarFn {
        Arc::new(move |x, y, tau| self.eval(x, y, tau))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Var(Var::Tau) => write!(f, "tau"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// Scalar function of `(x, y, tau)`.
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Two coordinate components of a vector field as functions of `(x, y, tau)`.
pub type VectorFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => write!(f, "{s}"),
            Token::Op(c) => write!(f, "{c}"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
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
            // exponent part: 1e-3, 2.5E+4
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
            let v = text.parse::<f64>().map_err(|_| ExprError::BadNumber(text.clone()))?;
            out.push((Token::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Token::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^".contains(c) {
            out.push((Token::Op(c), i));
            i += 1;
        } else if c == '(' {
            out.push((Token::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Token::RParen, i));
            i += 1;
        } else {
            return Err(ExprError::UnexpectedChar { ch: c, pos: i });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(&Token, usize)> {
        self.tokens.get(self.pos).map(|(t, p)| (t, *p))
    }

    fn next(&mut self) -> Result<(Token, usize), ExprError> {
        let tok = self.tokens.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(tok)
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some((Token::Op(op @ ('+' | '-')), _)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // term := unary (('*'|'/') unary)*
    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some((Token::Op(op @ ('*' | '/')), _)) = self.peek() {
            let op = *op;
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := '-' unary | '+' unary | power
    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some((Token::Op('-'), _)) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some((Token::Op('+'), _)) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // power := atom ('^' unary)?   (right associative)
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some((Token::Op('^'), _)) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, pos) = self.next()?;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let e = self.expr()?;
                match self.next()? {
                    (Token::RParen, _) => Ok(e),
                    (t, p) => Err(ExprError::UnexpectedToken { token: t.to_string(), pos: p }),
                }
            }
            Token::Ident(name) => {
                let func = match name.as_str() {
                    "x" => return Ok(Expr::Var(Var::X)),
                    "y" => return Ok(Expr::Var(Var::Y)),
                    "tau" | "t" => return Ok(Expr::Var(Var::Tau)),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "sqrt" => Func::Sqrt,
                    "ln" => Func::Ln,
                    _ => return Err(ExprError::UnknownIdent(name)),
                };
                match self.next()? {
                    (Token::LParen, _) => {}
                    (t, p) => return Err(ExprError::UnexpectedToken { token: t.to_string(), pos: p }),
                }
                let arg = self.expr()?;
                match self.next()? {
                    (Token::RParen, _) => Ok(Expr::Call(func, Box::new(arg))),
                    (t, p) => Err(ExprError::UnexpectedToken { token: t.to_string(), pos: p }),
                }
            }
            other => Err(ExprError::UnexpectedToken { token: other.to_string(), pos }),
        }
    }
}
