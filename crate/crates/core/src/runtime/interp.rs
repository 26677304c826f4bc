//! Reference interpreter for exported shaders.
//!
//! Understands the subset of GLSL that [`shader_source`](super::shader_source)
//! emits: `float` / `vec3` scalars and `float` arrays, `const` globals,
//! assignments and `+=`, counted `for` loops, `if` / `else` on one
//! comparison, and the builtins `vec3 dot cross normalize length pow max min
//! clamp sqrt sin cos exp abs`. Literals are read as `f32`; arithmetic runs
//! in `f32` or `f64` depending on [`Precision`].

use std::collections::HashMap;

use crate::brdf::Rgb;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// Round after every operation, like a GPU.
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    P(&'static str),
}

const PUNCT: [&str; 21] = [
    "+=", "++", "<=", ">=", "==", "!=", "(", ")", "[", "]", "{", "}", ",", ";", ".", "+", "-", "*", "/", "=", "<",
];

fn lex(src: &str) -> Result<Vec<Tok>> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    'outer: while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[s..i].to_string()));
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                i += 1;
                if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                    i += 1;
                }
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let v: f32 = src[s..i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {:?}", &src[s..i])))?;
            out.push(Tok::Num(v as f64));
            continue;
        }
        for p in PUNCT {
            if src[i..].starts_with(p) {
                out.push(Tok::P(p));
                i += p.len();
                continue 'outer;
            }
        }
        if c == b'>' {
            out.push(Tok::P(">"));
            i += 1;
            continue;
        }
        return Err(Error::Parse(format!("unexpected character {:?} at byte {i}", c as char)));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bin {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Builtin {
    Vec3,
    Dot,
    Cross,
    Normalize,
    Length,
    Pow,
    Max,
    Min,
    Clamp,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Builtin {
    fn from_name(s: &str) -> Option<(Self, &'static [usize])> {
        Some(match s {
            "vec3" => (Builtin::Vec3, &[1, 3]),
            "dot" => (Builtin::Dot, &[2]),
            "cross" => (Builtin::Cross, &[2]),
            "normalize" => (Builtin::Normalize, &[1]),
            "length" => (Builtin::Length, &[1]),
            "pow" => (Builtin::Pow, &[2]),
            "max" => (Builtin::Max, &[2]),
            "min" => (Builtin::Min, &[2]),
            "clamp" => (Builtin::Clamp, &[3]),
            "sqrt" => (Builtin::Sqrt, &[1]),
            "sin" => (Builtin::Sin, &[1]),
            "cos" => (Builtin::Cos, &[1]),
            "exp" => (Builtin::Exp, &[1]),
            "abs" => (Builtin::Abs, &[1]),
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
enum Expr {
    Num(f64),
    Var(usize),
    Index(usize, Box<Expr>),
    Field(Box<Expr>, usize),
    Neg(Box<Expr>),
    Bin(Bin, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

#[derive(Clone, Debug)]
enum Stmt {
    /// Array declaration: zero-filled.
    Array(usize, usize),
    Set(usize, Option<Expr>, Expr, bool),
    For(usize, Expr, Expr, Vec<Stmt>),
    If(Expr, Cmp, Expr, Vec<Stmt>, Vec<Stmt>),
    Return(Expr),
}

#[derive(Clone, Debug, PartialEq)]
enum Val {
    S(f64),
    V([f64; 3]),
    A(Vec<f64>),
}

/// A parsed shader, ready to evaluate.
#[derive(Clone, Debug)]
pub struct ShaderProgram {
    globals: Vec<Val>,
    n_vars: usize,
    wi: usize,
    wo: usize,
    params: usize,
    n_params: usize,
    body: Vec<Stmt>,
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    names: HashMap<String, usize>,
    n_globals: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Tok> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse("unexpected end of shader".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn is(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::P(q)) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == w)
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        match self.next()? {
            Tok::P(q) if q == p => Ok(()),
            t => Err(Error::Parse(format!("expected {p:?}, found {t:?} (token {})", self.pos - 1))),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => Err(Error::Parse(format!("expected identifier, found {t:?}"))),
        }
    }

    fn int(&mut self) -> Result<usize> {
        match self.next()? {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            t => Err(Error::Parse(format!("expected integer, found {t:?}"))),
        }
    }

    fn declare(&mut self, name: String) -> usize {
        let n = self.names.len();
        *self.names.entry(name).or_insert(n)
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.names
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parse(format!("undeclared identifier {name:?}")))
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next()? {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::P("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::P("-") => Ok(Expr::Neg(Box::new(self.postfix()?))),
            Tok::Ident(name) => {
                if self.is("(") {
                    let (b, arity) = Builtin::from_name(&name)
                        .ok_or_else(|| Error::Parse(format!("unknown function {name:?}")))?;
                    self.expect("(")?;
                    let mut args = Vec::new();
                    if !self.is(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.is(",") {
                                self.pos += 1;
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    if !arity.contains(&args.len()) {
                        return Err(Error::Parse(format!("{name} takes {arity:?} arguments, got {}", args.len())));
                    }
                    return Ok(Expr::Call(b, args));
                }
                let v = self.lookup(&name)?;
                if self.is("[") {
                    self.pos += 1;
                    let i = self.expr()?;
                    self.expect("]")?;
                    return Ok(Expr::Index(v, Box::new(i)));
                }
                Ok(Expr::Var(v))
            }
            t => Err(Error::Parse(format!("unexpected {t:?} in expression"))),
        }
    }

    fn postfix(&mut self) -> Result<Expr> {
        let mut e = self.primary()?;
        while self.is(".") {
            self.pos += 1;
            let f = self.ident()?;
            let k = match f.as_str() {
                "x" | "r" => 0,
                "y" | "g" => 1,
                "z" | "b" => 2,
                _ => return Err(Error::Parse(format!("unknown component .{f}"))),
            };
            e = Expr::Field(Box::new(e), k);
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.postfix()?;
        loop {
            let op = if self.is("*") {
                Bin::Mul
            } else if self.is("/") {
                Bin::Div
            } else {
                return Ok(e);
            };
            self.pos += 1;
            e = Expr::Bin(op, Box::new(e), Box::new(self.postfix()?));
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            let op = if self.is("+") {
                Bin::Add
            } else if self.is("-") {
                Bin::Sub
            } else {
                return Ok(e);
            };
            self.pos += 1;
            e = Expr::Bin(op, Box::new(e), Box::new(self.term()?));
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.is("}") {
            out.push(self.stmt()?);
        }
        self.expect("}")?;
        Ok(out)
    }

    fn assign_target(&mut self, name: &str) -> Result<usize> {
        let v = self.lookup(name)?;
        if v < self.n_globals {
            return Err(Error::Parse(format!("cannot assign to constant {name:?}")));
        }
        Ok(v)
    }

    fn stmt(&mut self) -> Result<Stmt> {
        if self.is_word("return") {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(";")?;
            return Ok(Stmt::Return(e));
        }
        if self.is_word("for") {
            self.pos += 1;
            self.expect("(")?;
            if !self.is_word("int") {
                return Err(Error::Parse("loop variable must be int".into()));
            }
            self.pos += 1;
            let name = self.ident()?;
            let v = self.declare(name.clone());
            self.expect("=")?;
            let start = self.expr()?;
            self.expect(";")?;
            if self.ident()? != name {
                return Err(Error::Parse("loop condition must test the loop variable".into()));
            }
            self.expect("<")?;
            let end = self.expr()?;
            self.expect(";")?;
            if self.ident()? != name {
                return Err(Error::Parse("loop step must increment the loop variable".into()));
            }
            self.expect("++")?;
            self.expect(")")?;
            let body = self.block()?;
            return Ok(Stmt::For(v, start, end, body));
        }
        if self.is_word("if") {
            self.pos += 1;
            self.expect("(")?;
            let l = self.expr()?;
            let cmp = match self.next()? {
                Tok::P("<") => Cmp::Lt,
                Tok::P("<=") => Cmp::Le,
                Tok::P(">") => Cmp::Gt,
                Tok::P(">=") => Cmp::Ge,
                Tok::P("==") => Cmp::Eq,
                Tok::P("!=") => Cmp::Ne,
                t => return Err(Error::Parse(format!("expected comparison, found {t:?}"))),
            };
            let r = self.expr()?;
            self.expect(")")?;
            let then = self.block()?;
            let els = if self.is_word("else") {
                self.pos += 1;
                self.block()?
            } else {
                Vec::new()
            };
            return Ok(Stmt::If(l, cmp, r, then, els));
        }
        if self.is_word("float") || self.is_word("vec3") || self.is_word("int") {
            self.pos += 1;
            let name = self.ident()?;
            if self.names.get(&name).is_some_and(|&v| v < self.n_globals) {
                return Err(Error::Parse(format!("{name:?} shadows a constant")));
            }
            let v = self.declare(name);
            if self.is("[") {
                self.pos += 1;
                let n = self.int()?;
                self.expect("]")?;
                self.expect(";")?;
                return Ok(Stmt::Array(v, n));
            }
            let init = if self.is("=") {
                self.pos += 1;
                self.expr()?
            } else {
                Expr::Num(0.0)
            };
            self.expect(";")?;
            return Ok(Stmt::Set(v, None, init, false));
        }
        let name = self.ident()?;
        let v = self.assign_target(&name)?;
        let idx = if self.is("[") {
            self.pos += 1;
            let i = self.expr()?;
            self.expect("]")?;
            Some(i)
        } else {
            None
        };
        let add = match self.next()? {
            Tok::P("=") => false,
            Tok::P("+=") => true,
            t => return Err(Error::Parse(format!("expected assignment, found {t:?}"))),
        };
        let e = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Set(v, idx, e, add))
    }
}

struct Machine<'a> {
    prog: &'a ShaderProgram,
    env: Vec<Val>,
    prec: Precision,
}

impl Machine<'_> {
    #[inline]
    fn r(&self, x: f64) -> f64 {
        match self.prec {
            Precision::F32 => x as f32 as f64,
            Precision::F64 => x,
        }
    }

    fn var(&self, v: usize) -> &Val {
        if v < self.prog.globals.len() {
            &self.prog.globals[v]
        } else {
            &self.env[v]
        }
    }

    fn scalar(&self, e: &Expr) -> Result<f64> {
        match self.eval(e)? {
            Val::S(x) => Ok(x),
            v => Err(Error::Parse(format!("expected scalar, got {v:?}"))),
        }
    }

    fn vector(&self, e: &Expr) -> Result<[f64; 3]> {
        match self.eval(e)? {
            Val::V(x) => Ok(x),
            v => Err(Error::Parse(format!("expected vec3, got {v:?}"))),
        }
    }

    fn index(&self, v: usize, i: &Expr) -> Result<usize> {
        let i = self.scalar(i)?;
        let n = match self.var(v) {
            Val::A(a) => a.len(),
            _ => return Err(Error::Parse("indexing a non-array".into())),
        };
        if i < 0.0 || i.fract() != 0.0 || i as usize >= n {
            return Err(Error::OutOfRange(format!("index {i} outside array of {n}")));
        }
        Ok(i as usize)
    }

    fn map(&self, v: &Val, f: impl Fn(f64) -> f64) -> Val {
        match v {
            Val::S(x) => Val::S(self.r(f(*x))),
            Val::V(a) => Val::V(a.map(|x| self.r(f(x)))),
            Val::A(_) => unreachable!("arrays are not values"),
        }
    }

    fn zip(&self, a: Val, b: Val, f: impl Fn(f64, f64) -> f64) -> Result<Val> {
        Ok(match (a, b) {
            (Val::S(x), Val::S(y)) => Val::S(self.r(f(x, y))),
            (Val::V(x), Val::V(y)) => Val::V([0, 1, 2].map(|k| self.r(f(x[k], y[k])))),
            (Val::S(x), Val::V(y)) => Val::V(y.map(|v| self.r(f(x, v)))),
            (Val::V(x), Val::S(y)) => Val::V(x.map(|v| self.r(f(v, y)))),
            _ => return Err(Error::Parse("array used as a value".into())),
        })
    }

    fn dot(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let p0 = self.r(a[0] * b[0]);
        let p1 = self.r(a[1] * b[1]);
        let p2 = self.r(a[2] * b[2]);
        self.r(self.r(p0 + p1) + p2)
    }

    fn eval(&self, e: &Expr) -> Result<Val> {
        Ok(match e {
            Expr::Num(v) => Val::S(*v),
            Expr::Var(v) => match self.var(*v) {
                Val::A(_) => return Err(Error::Parse("array used as a value".into())),
                x => x.clone(),
            },
            Expr::Index(v, i) => {
                let k = self.index(*v, i)?;
                match self.var(*v) {
                    Val::A(a) => Val::S(a[k]),
                    _ => unreachable!(),
                }
            }
            Expr::Field(e, k) => Val::S(self.vector(e)?[*k]),
            Expr::Neg(e) => self.map(&self.eval(e)?, |x| -x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.eval(a)?, self.eval(b)?);
                match op {
                    Bin::Add => self.zip(a, b, |x, y| x + y)?,
                    Bin::Sub => self.zip(a, b, |x, y| x - y)?,
                    Bin::Mul => self.zip(a, b, |x, y| x * y)?,
                    Bin::Div => self.zip(a, b, |x, y| x / y)?,
                }
            }
            Expr::Call(f, args) => self.call(*f, args)?,
        })
    }

    fn call(&self, f: Builtin, args: &[Expr]) -> Result<Val> {
        let unary = |g: fn(f64) -> f64| -> Result<Val> { Ok(self.map(&self.eval(&args[0])?, g)) };
        Ok(match f {
            Builtin::Vec3 => {
                if args.len() == 1 {
                    let s = self.scalar(&args[0])?;
                    Val::V([s; 3])
                } else {
                    Val::V([self.scalar(&args[0])?, self.scalar(&args[1])?, self.scalar(&args[2])?])
                }
            }
            Builtin::Dot => Val::S(self.dot(&self.vector(&args[0])?, &self.vector(&args[1])?)),
            Builtin::Cross => {
                let (a, b) = (self.vector(&args[0])?, self.vector(&args[1])?);
                let c = |i: usize, j: usize| self.r(self.r(a[i] * b[j]) - self.r(a[j] * b[i]));
                Val::V([c(1, 2), c(2, 0), c(0, 1)])
            }
            Builtin::Normalize => {
                let a = self.vector(&args[0])?;
                let inv = self.r(1.0 / self.r(self.dot(&a, &a).sqrt()));
                Val::V(a.map(|x| self.r(x * inv)))
            }
            Builtin::Length => {
                let a = self.vector(&args[0])?;
                Val::S(self.r(self.dot(&a, &a).sqrt()))
            }
            Builtin::Pow => self.zip(self.eval(&args[0])?, self.eval(&args[1])?, f64::powf)?,
            Builtin::Max => self.zip(self.eval(&args[0])?, self.eval(&args[1])?, f64::max)?,
            Builtin::Min => self.zip(self.eval(&args[0])?, self.eval(&args[1])?, f64::min)?,
            Builtin::Clamp => {
                let lo = self.zip(self.eval(&args[0])?, self.eval(&args[1])?, f64::max)?;
                self.zip(lo, self.eval(&args[2])?, f64::min)?
            }
            Builtin::Sqrt => unary(f64::sqrt)?,
            Builtin::Sin => unary(f64::sin)?,
            Builtin::Cos => unary(f64::cos)?,
            Builtin::Exp => unary(f64::exp)?,
            Builtin::Abs => unary(f64::abs)?,
        })
    }

    /// `Some(value)` once a `return` executes.
    fn run(&mut self, stmts: &[Stmt]) -> Result<Option<Val>> {
        for s in stmts {
            match s {
                Stmt::Array(v, n) => self.env[*v] = Val::A(vec![0.0; *n]),
                Stmt::Set(v, None, e, add) => {
                    let x = self.eval(e)?;
                    let x = if *add {
                        self.zip(self.env[*v].clone(), x, |a, b| a + b)?
                    } else {
                        x
                    };
                    self.env[*v] = x;
                }
                Stmt::Set(v, Some(i), e, add) => {
                    let k = self.index(*v, i)?;
                    let x = self.scalar(e)?;
                    let r = self.prec;
                    if let Val::A(a) = &mut self.env[*v] {
                        let y = if *add { a[k] + x } else { x };
                        a[k] = if r == Precision::F32 { y as f32 as f64 } else { y };
                    }
                }
                Stmt::For(v, start, end, body) => {
                    let (a, b) = (self.scalar(start)?, self.scalar(end)?);
                    let mut i = a;
                    while i < b {
                        self.env[*v] = Val::S(i);
                        if let Some(r) = self.run(body)? {
                            return Ok(Some(r));
                        }
                        i += 1.0;
                    }
                }
                Stmt::If(l, c, r, then, els) => {
                    let (x, y) = (self.scalar(l)?, self.scalar(r)?);
                    let t = match c {
                        Cmp::Lt => x < y,
                        Cmp::Le => x <= y,
                        Cmp::Gt => x > y,
                        Cmp::Ge => x >= y,
                        Cmp::Eq => x == y,
                        Cmp::Ne => x != y,
                    };
                    if let Some(v) = self.run(if t { then } else { els })? {
                        return Ok(Some(v));
                    }
                }
                Stmt::Return(e) => return Ok(Some(self.eval(e)?)),
            }
        }
        Ok(None)
    }
}

impl ShaderProgram {
    /// Parses constants followed by `vec3 <entry>(vec3 wi, vec3 wo, float params[P]) { ... }`.
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser {
            toks: lex(src)?,
            pos: 0,
            names: HashMap::new(),
            n_globals: 0,
        };
        let mut globals = Vec::new();
        while p.is_word("const") {
            p.pos += 1;
            if p.ident()? != "float" {
                return Err(Error::Parse("constants must be float".into()));
            }
            let name = p.ident()?;
            if p.names.contains_key(&name) {
                return Err(Error::Parse(format!("constant {name:?} defined twice")));
            }
            let v = p.declare(name);
            debug_assert_eq!(v, globals.len());
            if p.is("[") {
                p.pos += 1;
                let n = p.int()?;
                p.expect("]")?;
                p.expect("=")?;
                if p.ident()? != "float" {
                    return Err(Error::Parse("expected float[N](...)".into()));
                }
                p.expect("[")?;
                if p.int()? != n {
                    return Err(Error::Parse("array size mismatch".into()));
                }
                p.expect("]")?;
                p.expect("(")?;
                let mut vals = Vec::with_capacity(n);
                loop {
                    let neg = p.is("-");
                    if neg {
                        p.pos += 1;
                    }
                    match p.next()? {
                        Tok::Num(x) => vals.push(if neg { -x } else { x }),
                        t => return Err(Error::Parse(format!("expected literal, found {t:?}"))),
                    }
                    if p.is(",") {
                        p.pos += 1;
                    } else {
                        break;
                    }
                }
                p.expect(")")?;
                if vals.len() != n {
                    return Err(Error::Parse(format!("{} values for array of {n}", vals.len())));
                }
                globals.push(Val::A(vals));
            } else {
                p.expect("=")?;
                p.n_globals = globals.len();
                let e = p.expr()?;
                let m = Machine {
                    prog: &ShaderProgram {
                        globals: globals.clone(),
                        n_vars: 0,
                        wi: 0,
                        wo: 0,
                        params: 0,
                        n_params: 0,
                        body: Vec::new(),
                    },
                    env: Vec::new(),
                    prec: Precision::F64,
                };
                globals.push(m.eval(&e)?);
            }
            p.expect(";")?;
            p.n_globals = globals.len();
        }
        if !p.is_word("vec3") {
            return Err(Error::Parse("expected the vec3 entry function".into()));
        }
        p.pos += 1;
        p.ident()?;
        p.expect("(")?;
        let arg = |p: &mut Parser, ty: &str| -> Result<usize> {
            if p.ident()? != ty {
                return Err(Error::Parse(format!("expected {ty} parameter")));
            }
            let name = p.ident()?;
            Ok(p.declare(name))
        };
        let wi = arg(&mut p, "vec3")?;
        p.expect(",")?;
        let wo = arg(&mut p, "vec3")?;
        p.expect(",")?;
        let params = arg(&mut p, "float")?;
        p.expect("[")?;
        let n_params = p.int()?;
        p.expect("]")?;
        p.expect(")")?;
        let body = p.block()?;
        if p.pos != p.toks.len() {
            return Err(Error::Parse("trailing tokens after the entry function".into()));
        }
        Ok(Self {
            globals,
            n_vars: p.names.len(),
            wi,
            wo,
            params,
            n_params,
            body,
        })
    }

    /// Declared length of the `params` argument.
    pub fn param_count(&self) -> usize {
        self.n_params
    }

    /// A constant array by name-independent position, for inspection.
    pub fn constant_arrays(&self) -> usize {
        self.globals.iter().filter(|g| matches!(g, Val::A(_))).count()
    }

    pub fn eval(&self, wi: &[f64; 3], wo: &[f64; 3], params: &[f64], prec: Precision) -> Result<Rgb> {
        if params.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                got: params.len(),
            });
        }
        let round = |x: f64| if prec == Precision::F32 { x as f32 as f64 } else { x };
        let mut env = vec![Val::S(0.0); self.n_vars];
        env[self.wi] = Val::V(wi.map(round));
        env[self.wo] = Val::V(wo.map(round));
        env[self.params] = Val::A(params.iter().map(|x| round(*x)).collect());
        let mut m = Machine { prog: self, env, prec };
        match m.run(&self.body)? {
            Some(Val::V(v)) => Ok(v),
            Some(Val::S(s)) => Ok([s; 3]),
            _ => Err(Error::Parse("entry function did not return a value".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = "
        // comment
        const float K = 2.0;
        const float W[3] = float[3](1.0, -2.0, 0.5);
        vec3 eval_brdf(vec3 wi, vec3 wo, float params[2]) {
            float acc = 0.0;
            for (int i = 0; i < 3; i++) { acc += W[i] * params[0]; }
            vec3 v = vec3(acc) + wi * K;
            float s = 0.0;
            if (params[1] > 0.5) { s = 1.0; } else { s = -1.0; }
            return v * s + vec3(dot(wi, wo), max(-1.0, 3.0), pow(2.0, 3.0));
        }";

    #[test]
    fn evaluates_small_program() {
        let p = ShaderProgram::parse(SRC).unwrap();
        assert_eq!(p.param_count(), 2);
        let wi = [0.0, 0.0, 1.0];
        let wo = [1.0, 0.0, 0.0];
        // acc = -0.5 * 2 = -1, v = (-1, -1, 1), s = 1
        let r = p.eval(&wi, &wo, &[2.0, 1.0], Precision::F64).unwrap();
        assert_eq!(r, [-1.0, 2.0, 9.0]);
        let r = p.eval(&wi, &wo, &[2.0, 0.0], Precision::F32).unwrap();
        assert_eq!(r, [1.0, 4.0, 7.0]);
    }

    #[test]
    fn rejects_malformed_programs() {
        for bad in [
            "vec3 f(vec3 a, vec3 b, float p[1]) { return q; }",
            "vec3 f(vec3 a, vec3 b, float p[1]) { return a }",
            "const float K = 1.0; vec3 f(vec3 a, vec3 b, float p[1]) { K = 2.0; return a; }",
            "vec3 f(vec3 a, vec3 b, float p[1]) { return foo(a); }",
            "vec3 f(vec3 a, vec3 b, float p[1]) { return p[3] * a; }",
            "vec3 f(vec3 a, vec3 b, float p[1]) { return a; } extra",
        ] {
            let r = ShaderProgram::parse(bad).and_then(|p| p.eval(&[0.0; 3], &[0.0; 3], &[1.0], Precision::F64));
            assert!(r.is_err(), "{bad}");
        }
        let p = ShaderProgram::parse(SRC).unwrap();
        assert!(p.eval(&[0.0; 3], &[0.0; 3], &[1.0], Precision::F64).is_err());
    }
}
