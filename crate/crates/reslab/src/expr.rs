//! Tiny expression language for 2-D objectives in the variables x and y:
//! `+ - * / ^`, parentheses, numeric literals, and sin/cos/exp. Parsed by
//! recursive descent; derivatives are taken symbolically, so parsed
//! objectives carry exact gradients, Hessians, and third derivatives.
//!
//! Error offsets are 1-based byte positions into the source string.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{Matrix, Objective, Vector};

#[derive(Clone, Debug, PartialEq)]
enum Expr {
    Num(f64),
    /// 0 = x, 1 = y.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    /// Not writable in the surface syntax; produced by differentiating
    /// non-constant exponents.
    Ln(Box<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(0) => write!(f, "x"),
            Expr::Var(_) => write!(f, "y"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Ln(a) => write!(f, "ln({a})"),
        }
    }
}

impl Expr {
    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(0) => x,
            Expr::Var(_) => y,
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
            Expr::Sin(a) => a.eval(x, y).sin(),
            Expr::Cos(a) => a.eval(x, y).cos(),
            Expr::Exp(a) => a.eval(x, y).exp(),
            Expr::Ln(a) => a.eval(x, y).ln(),
        }
    }

    fn diff(&self, v: usize) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(i) => Num(if *i == v { 1.0 } else { 0.0 }),
            Add(a, b) => simplify(Add(Box::new(a.diff(v)), Box::new(b.diff(v)))),
            Sub(a, b) => simplify(Sub(Box::new(a.diff(v)), Box::new(b.diff(v)))),
            Mul(a, b) => simplify(Add(
                Box::new(simplify(Mul(Box::new(a.diff(v)), b.clone()))),
                Box::new(simplify(Mul(a.clone(), Box::new(b.diff(v))))),
            )),
            Div(a, b) => simplify(Div(
                Box::new(simplify(Sub(
                    Box::new(simplify(Mul(Box::new(a.diff(v)), b.clone()))),
                    Box::new(simplify(Mul(a.clone(), Box::new(b.diff(v))))),
                ))),
                Box::new(simplify(Mul(b.clone(), b.clone()))),
            )),
            Neg(a) => simplify(Neg(Box::new(a.diff(v)))),
            Pow(a, b) => match b.as_ref() {
                Num(n) => {
                    // n * a^(n-1) * a'
                    simplify(Mul(
                        Box::new(simplify(Mul(
                            Box::new(Num(*n)),
                            Box::new(simplify(Pow(a.clone(), Box::new(Num(n - 1.0))))),
                        ))),
                        Box::new(a.diff(v)),
                    ))
                }
                _ => {
                    // a^b * (b' ln a + b a'/a)
                    simplify(Mul(
                        Box::new(self.clone()),
                        Box::new(simplify(Add(
                            Box::new(simplify(Mul(
                                Box::new(b.diff(v)),
                                Box::new(Ln(a.clone())),
                            ))),
                            Box::new(simplify(Div(
                                Box::new(simplify(Mul(b.clone(), Box::new(a.diff(v))))),
                                a.clone(),
                            ))),
                        ))),
                    ))
                }
            },
            Sin(a) => simplify(Mul(Box::new(Cos(a.clone())), Box::new(a.diff(v)))),
            Cos(a) => simplify(Neg(Box::new(simplify(Mul(
                Box::new(Sin(a.clone())),
                Box::new(a.diff(v)),
            ))))),
            Exp(a) => simplify(Mul(Box::new(self.clone()), Box::new(a.diff(v)))),
            Ln(a) => simplify(Div(Box::new(a.diff(v)), a.clone())),
        }
    }
}

/// One level of constant folding and identity elimination. Children are
/// assumed already simplified, which holds for everything diff() builds.
fn simplify(e: Expr) -> Expr {
    use Expr::*;
    match e {
        Add(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x + y),
            (Num(z), rhs) if z == 0.0 => rhs,
            (lhs, Num(z)) if z == 0.0 => lhs,
            (lhs, rhs) => Add(Box::new(lhs), Box::new(rhs)),
        },
        Sub(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x - y),
            (lhs, Num(z)) if z == 0.0 => lhs,
            (Num(z), rhs) if z == 0.0 => simplify(Neg(Box::new(rhs))),
            (lhs, rhs) => Sub(Box::new(lhs), Box::new(rhs)),
        },
        Mul(a, b) => match (*a, *b) {
            (Num(x), Num(y)) => Num(x * y),
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), rhs) if o == 1.0 => rhs,
            (lhs, Num(o)) if o == 1.0 => lhs,
            (lhs, rhs) => Mul(Box::new(lhs), Box::new(rhs)),
        },
        Div(a, b) => match (*a, *b) {
            (Num(z), rhs) if z == 0.0 && !matches!(rhs, Num(y) if y == 0.0) => Num(0.0),
            (Num(x), Num(y)) if y != 0.0 => Num(x / y),
            (lhs, Num(o)) if o == 1.0 => lhs,
            (lhs, rhs) => Div(Box::new(lhs), Box::new(rhs)),
        },
        Neg(a) => match *a {
            Num(x) => Num(-x),
            Neg(inner) => *inner,
            other => Neg(Box::new(other)),
        },
        Pow(a, b) => match (*a, *b) {
            (lhs, Num(o)) if o == 1.0 => lhs,
            (_, Num(z)) if z == 0.0 => Num(1.0),
            (Num(x), Num(y)) => Num(x.powf(y)),
            (lhs, rhs) => Pow(Box::new(lhs), Box::new(rhs)),
        },
        other => other,
    }
}

// ---------------------------------------------------------------------------
// tokenizer / parser

#[derive(Clone, Debug, PartialEq)]
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
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>> {
        let mut lx = Lexer { src: src.as_bytes(), pos: 0 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let start = lx.pos + 1; // 1-based
            match lx.peek() {
                None => {
                    out.push((Tok::Eof, start));
                    return Ok(out);
                }
                Some(c) => {
                    let tok = match c {
                        b'+' => {
                            lx.pos += 1;
                            Tok::Plus
                        }
                        b'-' => {
                            lx.pos += 1;
                            Tok::Minus
                        }
                        b'*' => {
                            lx.pos += 1;
                            Tok::Star
                        }
                        b'/' => {
                            lx.pos += 1;
                            Tok::Slash
                        }
                        b'^' => {
                            lx.pos += 1;
                            Tok::Caret
                        }
                        b'(' => {
                            lx.pos += 1;
                            Tok::LParen
                        }
                        b')' => {
                            lx.pos += 1;
                            Tok::RParen
                        }
                        b'0'..=b'9' | b'.' => lx.number(start)?,
                        b'a'..=b'z' | b'A'..=b'Z' | b'_' => lx.ident(),
                        other => {
                            return Err(Error::Parse {
                                offset: start,
                                msg: format!("unexpected character '{}'", other as char),
                            })
                        }
                    };
                    out.push((tok, start));
                }
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\n') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn number(&mut self, start: usize) -> Result<Tok> {
        let begin = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9') | Some(b'.')) {
            self.pos += 1;
        }
        // exponent suffix like 1e-3
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(b'0'..=b'9')) {
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[begin..self.pos]).unwrap();
        text.parse::<f64>().map(Tok::Num).map_err(|_| Error::Parse {
            offset: start,
            msg: format!("malformed number '{text}'"),
        })
    }

    fn ident(&mut self) -> Tok {
        let begin = self.pos;
        while matches!(
            self.peek(),
            Some(b'a'..=b'z') | Some(b'A'..=b'Z') | Some(b'0'..=b'9') | Some(b'_')
        ) {
            self.pos += 1;
        }
        Tok::Ident(std::str::from_utf8(&self.src[begin..self.pos]).unwrap().to_string())
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn offset(&self) -> usize {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].0.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    // sum := product (('+' | '-') product)*
    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // product := unary (('*' | '/') unary)*
    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right-associative, binds above unary minus)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            // right operand at unary level so x^-2 and x^2^3 parse naturally
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let off = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "sin" | "cos" | "exp" => {
                    if !matches!(self.peek(), Tok::LParen) {
                        return Err(Error::Parse {
                            offset: self.offset(),
                            msg: format!("expected '(' after {name}"),
                        });
                    }
                    self.bump();
                    let arg = self.sum()?;
                    if !matches!(self.peek(), Tok::RParen) {
                        return Err(Error::Parse {
                            offset: self.offset(),
                            msg: "expected ')'".into(),
                        });
                    }
                    self.bump();
                    Ok(match name.as_str() {
                        "sin" => Expr::Sin(Box::new(arg)),
                        "cos" => Expr::Cos(Box::new(arg)),
                        _ => Expr::Exp(Box::new(arg)),
                    })
                }
                other => Err(Error::Parse {
                    offset: off,
                    msg: format!("unknown identifier '{other}'"),
                }),
            },
            Tok::LParen => {
                let inner = self.sum()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(Error::Parse { offset: self.offset(), msg: "expected ')'".into() });
                }
                self.bump();
                Ok(inner)
            }
            tok => Err(Error::Parse { offset: off, msg: format!("unexpected token {tok:?}") }),
        }
    }
}

fn parse_expr(src: &str) -> Result<Expr> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, i: 0 };
    let e = p.sum()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(Error::Parse {
            offset: p.offset(),
            msg: format!("trailing input starting with {:?}", p.peek()),
        });
    }
    Ok(e)
}

/// Parse a 2-D objective f(x, y) and equip it with exact symbolic first,
/// second, and third derivatives. Evaluation at poles of `/` produces a
/// numerics error downstream rather than a parse failure.
pub fn parse_objective(src: &str) -> Result<Objective> {
    let f = parse_expr(src)?;
    let grad: Vec<Expr> = (0..2).map(|v| f.diff(v)).collect();
    let hess: Vec<Vec<Expr>> =
        (0..2).map(|i| (0..2).map(|j| grad[i].diff(j)).collect()).collect();
    // third[k][i][j] = d^3 f / dz_k dz_i dz_j
    let third: Vec<Vec<Vec<Expr>>> = (0..2)
        .map(|k| (0..2).map(|i| (0..2).map(|j| hess[i][j].diff(k)).collect()).collect())
        .collect();

    let fe = Arc::new(f);
    let ge = Arc::new(grad);
    let he = Arc::new(hess);
    let te = Arc::new(third);

    let fv = fe.clone();
    let obj = Objective::new(1, 1, move |z: &Vector| fv.eval(z[0], z[1]))?
        .with_grad({
            let ge = ge.clone();
            move |z: &Vector| Vector::from_fn(2, |i, _| ge[i].eval(z[0], z[1]))
        })
        .with_hess({
            let he = he.clone();
            move |z: &Vector| Matrix::from_fn(2, 2, |i, j| he[i][j].eval(z[0], z[1]))
        })
        .with_third_dir({
            let te = te.clone();
            move |z: &Vector, v: &Vector| {
                Matrix::from_fn(2, 2, |i, j| {
                    (0..2).map(|k| te[k][i][j].eval(z[0], z[1]) * v[k]).sum()
                })
            }
        });
    Ok(obj)
}
