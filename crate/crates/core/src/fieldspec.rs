//! Parsing and jet evaluation of field definitions.
//!
//! A field source is a sequence of `name = expr ;` assignments over the chart
//! variables. Base variables are spelled `x1..xn`, fibre variables `y1..yn`;
//! for `n <= 3` the aliases `x, y, z` and `u, v, w` are also accepted, which
//! matches the usual notation for the worked examples. Component names encode
//! the field kind: `G1..Gn` for spray coefficients, a single free name for a
//! scalar, `T1..Tn` for covector components, `Hij` (upper triangle) for a
//! symmetric 2-tensor, and `Aij`/`Bij`/`Cij` for the three blocks of a 2-form
//! in coordinates (`dx^i ∧ dx^j`, `dx^i ∧ dy^j`, `dy^i ∧ dy^j`).

use crate::error::{Error, Result};
use crate::jets::Jet;
use crate::spray::Point;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Global variable index: base `0..n`, fibre `n..2n`.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Func(Func, Box<Expr>),
    Atan2(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(idx: usize) -> Expr {
        Expr::Var(idx)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 1.0)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return Expr::Num(x + y);
        }
        Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return Expr::Num(x - y);
        }
        Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        if a.is_zero() || b.is_zero() {
            return Expr::Num(0.0);
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        if let (Expr::Num(x), Expr::Num(y)) = (&a, &b) {
            return Expr::Num(x * y);
        }
        Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        if a.is_zero() {
            return Expr::Num(0.0);
        }
        if b.is_one() {
            return a;
        }
        Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        if a.is_zero() {
            return a;
        }
        if let Expr::Num(v) = &a {
            return Expr::Num(-v);
        }
        Expr::Neg(Box::new(a))
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        match k {
            0 => Expr::Num(1.0),
            1 => a,
            _ => Expr::Pow(Box::new(a), k),
        }
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        Expr::Func(f, Box::new(a))
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::func(Func::Sqrt, a)
    }

    /// Evaluate as a jet given the seed jets for every variable.
    pub fn eval_jet(&self, vars: &[Jet]) -> Result<Jet> {
        match self {
            Expr::Num(v) => {
                let proto = &vars[0];
                Ok(Jet::constant(proto.order(), proto.base_dim(), *v))
            }
            Expr::Var(i) => Ok(vars[*i].clone()),
            Expr::Neg(a) => Ok(a.eval_jet(vars)?.neg()),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval_jet(vars)?, b.eval_jet(vars)?);
                match op {
                    BinOp::Add => a.add(&b),
                    BinOp::Sub => a.sub(&b),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => a.div(&b),
                }
            }
            Expr::Pow(a, k) => a.eval_jet(vars)?.powi(*k),
            Expr::Func(f, a) => {
                let a = a.eval_jet(vars)?;
                match f {
                    Func::Sqrt => a.sqrt(),
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Log => a.ln(),
                }
            }
            Expr::Atan2(a, b) => a.eval_jet(vars)?.atan2(&b.eval_jet(vars)?),
        }
    }

    /// Plain evaluation at a variable assignment.
    pub fn eval(&self, vals: &[f64]) -> Result<f64> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(i) => Ok(vals[*i]),
            Expr::Neg(a) => Ok(-a.eval(vals)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(vals)?, b.eval(vals)?);
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b.abs() < crate::jets::EPS_DOM {
                            Err(Error::DivisionByZero(b.abs()))
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Expr::Pow(a, k) => Ok(a.eval(vals)?.powi(*k)),
            Expr::Func(f, a) => {
                let a = a.eval(vals)?;
                match f {
                    Func::Sqrt => {
                        if a < crate::jets::EPS_DOM {
                            Err(Error::Domain(format!("sqrt of {a:e}")))
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => Ok(a.exp()),
                    Func::Log => {
                        if a < crate::jets::EPS_DOM {
                            Err(Error::Domain(format!("log of {a:e}")))
                        } else {
                            Ok(a.ln())
                        }
                    }
                }
            }
            Expr::Atan2(a, b) => Ok(a.eval(vals)?.atan2(b.eval(vals)?)),
        }
    }

    /// Symbolic partial derivative with respect to the variable `var`.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Bin(BinOp::Add, a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Bin(BinOp::Sub, a, b) => Expr::sub(a.diff(var), b.diff(var)),
            Expr::Bin(BinOp::Mul, a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Expr::Bin(BinOp::Div, a, b) => Expr::sub(
                Expr::div(a.diff(var), (**b).clone()),
                Expr::div(
                    Expr::mul((**a).clone(), b.diff(var)),
                    Expr::pow((**b).clone(), 2),
                ),
            ),
            Expr::Pow(a, k) => Expr::mul(
                Expr::mul(Expr::Num(*k as f64), Expr::pow((**a).clone(), k - 1)),
                a.diff(var),
            ),
            Expr::Func(f, a) => {
                let da = a.diff(var);
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sqrt => Expr::div(
                        Expr::Num(0.5),
                        Expr::sqrt(inner),
                    ),
                    Func::Sin => Expr::func(Func::Cos, inner),
                    Func::Cos => Expr::neg(Expr::func(Func::Sin, inner)),
                    Func::Exp => Expr::func(Func::Exp, inner),
                    Func::Log => Expr::div(Expr::Num(1.0), inner),
                };
                Expr::mul(outer, da)
            }
            Expr::Atan2(a, b) => {
                // d atan2(a,b) = (b da - a db) / (a^2 + b^2)
                let num = Expr::sub(
                    Expr::mul((**b).clone(), a.diff(var)),
                    Expr::mul((**a).clone(), b.diff(var)),
                );
                let den = Expr::add(
                    Expr::pow((**a).clone(), 2),
                    Expr::pow((**b).clone(), 2),
                );
                Expr::div(num, den)
            }
        }
    }
}

// Printing: reparses to a structurally identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, _, _) => 1,
            Expr::Neg(_) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, _, _) => 2,
            Expr::Pow(_, _) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, outer: u8) -> fmt::Result {
        let me = self.prec();
        if me < outer {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")?;
                } else {
                    write!(f, "{v}")?;
                }
            }
            Expr::Var(i) => write!(f, "@{i}")?,
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 2)?;
            }
            Expr::Bin(op, a, b) => {
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 1, 1),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 2),
                    BinOp::Div => ("/", 2, 3),
                };
                a.fmt_prec(f, lp)?;
                write!(f, " {sym} ")?;
                b.fmt_prec(f, rp)?;
            }
            Expr::Pow(a, k) => {
                a.fmt_prec(f, 4)?;
                if *k < 0 {
                    write!(f, "^({k})")?;
                } else {
                    write!(f, "^{k}")?;
                }
            }
            Expr::Func(func, a) => {
                let name = match func {
                    Func::Sqrt => "sqrt",
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                    Func::Log => "log",
                };
                write!(f, "{name}({a})")?;
            }
            Expr::Atan2(a, b) => write!(f, "atan2({a}, {b})")?,
        }
        if me < outer {
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Spray,
    Scalar,
    Covector,
    Sym2,
    TwoForm,
}

/// A parsed field: expression trees for every component.
#[derive(Debug, Clone)]
pub struct FieldDef {
    pub kind: FieldKind,
    pub n: usize,
    exprs: Vec<Expr>,
}

fn tri_index(n: usize, i: usize, j: usize) -> usize {
    // upper-triangle row-major index for i <= j
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

fn strict_index(n: usize, i: usize, j: usize) -> usize {
    // strict upper triangle, i < j
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + j - i - 1
}

impl FieldDef {
    pub fn component_count(kind: FieldKind, n: usize) -> usize {
        match kind {
            FieldKind::Spray | FieldKind::Covector => n,
            FieldKind::Scalar => 1,
            FieldKind::Sym2 => n * (n + 1) / 2,
            FieldKind::TwoForm => n * (n - 1) / 2 + n * n + n * (n - 1) / 2,
        }
    }

    pub fn from_exprs(kind: FieldKind, n: usize, exprs: Vec<Expr>) -> Result<FieldDef> {
        let want = Self::component_count(kind, n);
        if exprs.len() != want {
            return Err(Error::Arity(format!(
                "expected {want} component expressions, got {}",
                exprs.len()
            )));
        }
        Ok(FieldDef { kind, n, exprs })
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    pub fn scalar_expr(&self) -> &Expr {
        assert_eq!(self.kind, FieldKind::Scalar);
        &self.exprs[0]
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.exprs[i]
    }

    pub fn sym2_expr(&self, i: usize, j: usize) -> &Expr {
        assert_eq!(self.kind, FieldKind::Sym2);
        &self.exprs[tri_index(self.n, i, j)]
    }

    /// Signed coefficient of the `dx^i ∧ dx^j` block (antisymmetric).
    pub fn twoform_a(&self, i: usize, j: usize) -> Expr {
        assert_eq!(self.kind, FieldKind::TwoForm);
        if i == j {
            return Expr::Num(0.0);
        }
        let e = self.exprs[strict_index(self.n, i.min(j), i.max(j))].clone();
        if i < j {
            e
        } else {
            Expr::neg(e)
        }
    }

    pub fn twoform_b(&self, i: usize, j: usize) -> &Expr {
        assert_eq!(self.kind, FieldKind::TwoForm);
        let base = self.n * (self.n - 1) / 2;
        &self.exprs[base + i * self.n + j]
    }

    pub fn twoform_c(&self, i: usize, j: usize) -> Expr {
        assert_eq!(self.kind, FieldKind::TwoForm);
        if i == j {
            return Expr::Num(0.0);
        }
        let base = self.n * (self.n - 1) / 2 + self.n * self.n;
        let e = self.exprs[base + strict_index(self.n, i.min(j), i.max(j))].clone();
        if i < j {
            e
        } else {
            Expr::neg(e)
        }
    }

    fn seed_vars(&self, p: &Point, order: u8) -> Vec<Jet> {
        let n = self.n;
        (0..2 * n)
            .map(|a| {
                let v = if a < n { p.x[a] } else { p.y[a - n] };
                Jet::variable(order, n, a, v)
            })
            .collect()
    }

    /// Jets of every stored component at `p`.
    pub fn eval_jets(&self, p: &Point, order: u8) -> Result<Vec<Jet>> {
        assert_eq!(p.n(), self.n, "point dimension mismatch");
        let vars = self.seed_vars(p, order);
        self.exprs.iter().map(|e| e.eval_jet(&vars)).collect()
    }

    pub fn eval_scalar_jet(&self, p: &Point, order: u8) -> Result<Jet> {
        assert_eq!(self.kind, FieldKind::Scalar);
        let vars = self.seed_vars(p, order);
        self.exprs[0].eval_jet(&vars)
    }

    /// Plain values of every stored component.
    pub fn eval_values(&self, p: &Point) -> Result<Vec<f64>> {
        let vals: Vec<f64> = p.x.iter().chain(p.y.iter()).copied().collect();
        self.exprs.iter().map(|e| e.eval(&vals)).collect()
    }

    /// Symmetrized full matrix of order-`order` jets for a sym2 field.
    pub fn eval_sym2_jets(&self, p: &Point, order: u8) -> Result<Vec<Vec<Jet>>> {
        assert_eq!(self.kind, FieldKind::Sym2);
        let comps = self.eval_jets(p, order)?;
        let n = self.n;
        let mut m = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(comps[tri_index(n, i, j)].clone());
            }
            m.push(row);
        }
        Ok(m)
    }

    pub fn print_source(&self) -> String {
        let mut out = String::new();
        let names = component_names(self.kind, self.n);
        for (name, e) in names.iter().zip(&self.exprs) {
            out.push_str(&format!("{name} = {e};\n"));
        }
        out
    }
}

pub fn component_names(kind: FieldKind, n: usize) -> Vec<String> {
    match kind {
        FieldKind::Spray => (1..=n).map(|i| format!("G{i}")).collect(),
        FieldKind::Scalar => vec!["F".into()],
        FieldKind::Covector => (1..=n).map(|i| format!("T{i}")).collect(),
        FieldKind::Sym2 => {
            let mut v = Vec::new();
            for i in 1..=n {
                for j in i..=n {
                    v.push(format!("H{i}{j}"));
                }
            }
            v
        }
        FieldKind::TwoForm => {
            let mut v = Vec::new();
            for i in 1..=n {
                for j in (i + 1)..=n {
                    v.push(format!("A{i}{j}"));
                }
            }
            for i in 1..=n {
                for j in 1..=n {
                    v.push(format!("B{i}{j}"));
                }
            }
            for i in 1..=n {
                for j in (i + 1)..=n {
                    v.push(format!("C{i}{j}"));
                }
            }
            v
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Semi,
    Equals,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> u8 {
        let c = self.src[self.pos];
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>> {
        let mut toks = Vec::new();
        while self.pos < self.src.len() {
            let (line, col) = (self.line, self.col);
            let c = self.src[self.pos];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'#' => {
                    while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                        self.bump();
                    }
                }
                b'+' => {
                    self.bump();
                    toks.push((Tok::Plus, line, col));
                }
                b'-' => {
                    self.bump();
                    toks.push((Tok::Minus, line, col));
                }
                b'*' => {
                    self.bump();
                    toks.push((Tok::Star, line, col));
                }
                b'/' => {
                    self.bump();
                    toks.push((Tok::Slash, line, col));
                }
                b'^' => {
                    self.bump();
                    toks.push((Tok::Caret, line, col));
                }
                b'(' => {
                    self.bump();
                    toks.push((Tok::LParen, line, col));
                }
                b')' => {
                    self.bump();
                    toks.push((Tok::RParen, line, col));
                }
                b',' => {
                    self.bump();
                    toks.push((Tok::Comma, line, col));
                }
                b';' => {
                    self.bump();
                    toks.push((Tok::Semi, line, col));
                }
                b'=' => {
                    self.bump();
                    toks.push((Tok::Equals, line, col));
                }
                b'0'..=b'9' | b'.' => {
                    let start = self.pos;
                    while self.pos < self.src.len()
                        && matches!(self.src[self.pos], b'0'..=b'9' | b'.')
                    {
                        self.bump();
                    }
                    if self.pos < self.src.len()
                        && matches!(self.src[self.pos], b'e' | b'E')
                    {
                        let save = (self.pos, self.line, self.col);
                        self.bump();
                        if self.pos < self.src.len()
                            && matches!(self.src[self.pos], b'+' | b'-')
                        {
                            self.bump();
                        }
                        if self.pos < self.src.len()
                            && self.src[self.pos].is_ascii_digit()
                        {
                            while self.pos < self.src.len()
                                && self.src[self.pos].is_ascii_digit()
                            {
                                self.bump();
                            }
                        } else {
                            (self.pos, self.line, self.col) = save;
                        }
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                    let v: f64 = text
                        .parse()
                        .map_err(|_| self.err(format!("bad number literal '{text}'")))?;
                    toks.push((Tok::Num(v), line, col));
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' | b'@' => {
                    let start = self.pos;
                    self.bump();
                    while self.pos < self.src.len()
                        && matches!(self.src[self.pos],
                            b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_')
                    {
                        self.bump();
                    }
                    let text = std::str::from_utf8(&self.src[start..self.pos])
                        .unwrap()
                        .to_string();
                    toks.push((Tok::Ident(text), line, col));
                }
                _ => return Err(self.err(format!("unexpected character '{}'", c as char))),
            }
        }
        Ok(toks)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    n: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1));
        Error::Parse { line, col, msg: msg.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.err_here(format!("expected {want:?}, found {other:?}"))),
        }
    }

    fn resolve_var(&self, name: &str) -> Option<usize> {
        let n = self.n;
        let bytes = name.as_bytes();
        // numbered spellings x1..xn / y1..yn, and @k for printed trees
        if bytes.len() >= 2 && (bytes[0] == b'x' || bytes[0] == b'y') {
            if let Ok(k) = name[1..].parse::<usize>() {
                if k >= 1 && k <= n {
                    return Some(if bytes[0] == b'x' { k - 1 } else { n + k - 1 });
                }
                return None;
            }
        }
        if bytes[0] == b'@' {
            if let Ok(k) = name[1..].parse::<usize>() {
                if k < 2 * n {
                    return Some(k);
                }
            }
            return None;
        }
        // letter aliases for n <= 3
        if n <= 3 && name.len() == 1 {
            let base = [b'x', b'y', b'z'];
            let fibre = [b'u', b'v', b'w'];
            if let Some(i) = base.iter().position(|&c| c == bytes[0]) {
                if i < n {
                    return Some(i);
                }
            }
            if let Some(i) = fibre.iter().position(|&c| c == bytes[0]) {
                if i < n {
                    return Some(n + i);
                }
            }
        }
        None
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            Expr::Neg(Box::new(self.parse_term()?))
        } else {
            self.parse_term()?
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.next();
                    let rhs = self.parse_term()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.next();
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(Expr::Neg(Box::new(self.parse_factor()?)));
        }
        let base = self.parse_base()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.next();
            if matches!(self.peek(), Some(Tok::LParen)) {
                // allow ^(k) and ^(-k) for printed negative exponents
                self.next();
                let neg = if matches!(self.peek(), Some(Tok::Minus)) {
                    self.next();
                    true
                } else {
                    false
                };
                let k = self.parse_int()?;
                self.expect(Tok::RParen)?;
                return Ok(Expr::Pow(Box::new(base), if neg { -k } else { k }));
            }
            let k = self.parse_int()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn parse_int(&mut self) -> Result<i32> {
        match self.next() {
            Some(Tok::Num(v)) if v.fract() == 0.0 && v.abs() < 1e9 => Ok(v as i32),
            other => {
                self.pos = self.pos.saturating_sub(1);
                let _ = other;
                Err(self.err_here("exponent must be an integer literal"))
            }
        }
    }

    fn parse_base(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Num(v)),
            Some(Tok::LParen) => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::LParen)) {
                    let func = match name.as_str() {
                        "sqrt" => Some(Func::Sqrt),
                        "sin" => Some(Func::Sin),
                        "cos" => Some(Func::Cos),
                        "exp" => Some(Func::Exp),
                        "log" => Some(Func::Log),
                        "atan2" => None,
                        _ => {
                            return Err(self.err_here(format!("unknown function '{name}'")));
                        }
                    };
                    self.next(); // consume '('
                    let a = self.parse_expr()?;
                    match func {
                        Some(f) => {
                            self.expect(Tok::RParen)?;
                            Ok(Expr::Func(f, Box::new(a)))
                        }
                        None => {
                            self.expect(Tok::Comma)?;
                            let b = self.parse_expr()?;
                            self.expect(Tok::RParen)?;
                            Ok(Expr::Atan2(Box::new(a), Box::new(b)))
                        }
                    }
                } else {
                    match self.resolve_var(&name) {
                        Some(idx) => Ok(Expr::Var(idx)),
                        None => {
                            self.pos -= 1;
                            Err(self.err_here(format!("unknown identifier '{name}'")))
                        }
                    }
                }
            }
            other => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_here(format!("expected expression, found {other:?}")))
            }
        }
    }
}

/// Parse a field source into a [`FieldDef`].
pub fn parse_field(source: &str, kind: FieldKind, n: usize) -> Result<FieldDef> {
    if n == 0 || n > 6 {
        return Err(Error::Config(format!("base dimension {n} out of supported range 1..=6")));
    }
    let toks = Lexer::new(source).tokens()?;
    if toks.is_empty() {
        return Err(Error::Parse { line: 1, col: 1, msg: "empty field source".into() });
    }
    let mut parser = Parser { toks, pos: 0, n };
    let mut assigns: Vec<(String, Expr)> = Vec::new();
    while parser.peek().is_some() {
        let name = match parser.next() {
            Some(Tok::Ident(name)) => name,
            _ => {
                parser.pos -= 1;
                return Err(parser.err_here("expected component name"));
            }
        };
        parser.expect(Tok::Equals)?;
        let e = parser.parse_expr()?;
        if parser.peek().is_some() {
            parser.expect(Tok::Semi)?;
        }
        if assigns.iter().any(|(prev, _)| *prev == name) {
            return Err(parser.err_here(format!("component '{name}' defined twice")));
        }
        assigns.push((name, e));
    }

    let names = component_names(kind, n);
    match kind {
        FieldKind::Scalar => {
            if assigns.len() != 1 {
                return Err(Error::Arity(format!(
                    "scalar field needs exactly 1 assignment, got {}",
                    assigns.len()
                )));
            }
            FieldDef::from_exprs(kind, n, vec![assigns.pop().unwrap().1])
        }
        FieldKind::TwoForm => {
            // unnamed blocks default to zero
            let mut exprs = vec![Expr::Num(0.0); names.len()];
            for (name, e) in assigns {
                match names.iter().position(|x| *x == name) {
                    Some(i) => exprs[i] = e,
                    None => {
                        return Err(Error::Arity(format!(
                            "unknown 2-form component '{name}' for n = {n}"
                        )))
                    }
                }
            }
            FieldDef::from_exprs(kind, n, exprs)
        }
        _ => {
            let mut exprs: Vec<Option<Expr>> = vec![None; names.len()];
            for (name, e) in assigns {
                match names.iter().position(|x| *x == name) {
                    Some(i) => exprs[i] = Some(e),
                    None => {
                        return Err(Error::Arity(format!(
                            "unknown component '{name}' (expected one of {names:?})"
                        )))
                    }
                }
            }
            let missing: Vec<&String> = names
                .iter()
                .zip(&exprs)
                .filter(|(_, e)| e.is_none())
                .map(|(nm, _)| nm)
                .collect();
            if !missing.is_empty() {
                return Err(Error::Arity(format!("missing components {missing:?}")));
            }
            FieldDef::from_exprs(kind, n, exprs.into_iter().map(|e| e.unwrap()).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parses_spiral_spray() {
        let f = parse_field(
            "G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0;",
            FieldKind::Spray,
            3,
        )
        .unwrap();
        let p = Point::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]).unwrap();
        let vals = f.eval_values(&p).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0);
        assert_abs_diff_eq!(vals[1], -0.5);
        assert_abs_diff_eq!(vals[2], 0.0);
    }

    #[test]
    fn scalar_f_at_example_point() {
        let f = parse_field(
            "F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2",
            FieldKind::Scalar,
            3,
        )
        .unwrap();
        let p = Point::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0]).unwrap();
        let j = f.eval_scalar_jet(&p, 0).unwrap();
        assert_abs_diff_eq!(j.value(), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn flat_spray_two_components() {
        let f = parse_field("G1 = 0; G2 = 0", FieldKind::Spray, 2).unwrap();
        let p = Point::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
        for j in f.eval_jets(&p, 2).unwrap() {
            assert_eq!(j.value(), 0.0);
            assert_eq!(j.grad(0), 0.0);
        }
    }

    #[test]
    fn rejects_unknown_identifier() {
        let e = parse_field("G1 = q + 1; G2 = 0", FieldKind::Spray, 2);
        assert!(matches!(e, Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_wrong_arity() {
        let e = parse_field("G1 = 0;", FieldKind::Spray, 2);
        assert!(matches!(e, Err(Error::Arity(_))));
    }

    #[test]
    fn reports_position() {
        let e = parse_field("G1 = 1 + ); G2 = 0", FieldKind::Spray, 2);
        match e {
            Err(Error::Parse { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col >= 9);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn print_parse_roundtrip() {
        let src = "G1 = v*sqrt(u^2+v^2+w^2)/2; G2 = -u*sqrt(u^2+v^2+w^2)/2; G3 = 0;";
        let f = parse_field(src, FieldKind::Spray, 3).unwrap();
        let printed = f.print_source();
        let f2 = parse_field(&printed, FieldKind::Spray, 3).unwrap();
        assert_eq!(f.exprs(), f2.exprs());
    }

    #[test]
    fn symbolic_diff_matches_jet() {
        let f = parse_field("F = sqrt(u^2+v^2+w^2) + (y*u - x*v)/2", FieldKind::Scalar, 3)
            .unwrap();
        let p = Point::new(vec![0.3, -0.2, 0.7], vec![0.9, 0.4, -1.1]).unwrap();
        let vals: Vec<f64> = p.x.iter().chain(p.y.iter()).copied().collect();
        let jet = f.eval_scalar_jet(&p, 1).unwrap();
        for a in 0..6 {
            let d = f.scalar_expr().diff(a);
            assert_abs_diff_eq!(d.eval(&vals).unwrap(), jet.grad(a), epsilon = 1e-12);
        }
    }

    #[test]
    fn twoform_defaults_missing_to_zero() {
        let f = parse_field("A12 = 1; B11 = 1; B22 = 1;", FieldKind::TwoForm, 2).unwrap();
        assert!(f.twoform_c(0, 1).is_zero());
        assert_eq!(f.twoform_a(1, 0), Expr::Num(-1.0));
    }
}
