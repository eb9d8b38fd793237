//! Plain-text system descriptions with rational-power primitives.
//!
//! The file grammar is line oriented:
//!
//! ```text
//! system "<name>"
//! vars x1 x2 ...
//! inputs u1 ...            (optional)
//! x<i>' = <expr>           (one per state)
//! ```
//!
//! with `expr := term (('+'|'-') term)*`, `term := factor ('*' factor)*`,
//! `factor := number | var | '(' expr ')' | factor '^' int |
//! abspow(var, p/q) | sgnpow(var, p/q)`. Lines starting with `#` are
//! comments. `abspow(x, p/q)` denotes `|x|^(p/q)` and `sgnpow(x, p/q)`
//! denotes `|x|^(p/q) * sign(x)`; both take a bare variable, which keeps
//! the polynomial/non-polynomial boundary explicit for recasting.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Parse failure with a position inside the source text (1-based).
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Reference to a declared state or input variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarRef {
    State(usize),
    Input(usize),
}

/// A rational-power primitive on a bare state variable:
/// `|x_var|^(p/q)`, optionally carrying `sign(x_var)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub var: usize,
    pub p: u32,
    pub q: u32,
    pub signed: bool,
}

impl Atom {
    pub fn eval(&self, x: f64) -> f64 {
        let mag = x.abs().powf(self.p as f64 / self.q as f64);
        if self.signed {
            mag * sign0(x)
        } else {
            mag
        }
    }
}

/// sign with sign(0) = 0, keeping sgnpow continuous at the origin.
pub fn sign0(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Expression tree over constants, variables, sums, products, integer
/// powers, and rational-power primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(VarRef),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, u32),
    AbsPow(Atom),
    SgnPow(Atom),
}

impl Expr {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(VarRef::State(i)) => x[*i],
            Expr::Var(VarRef::Input(j)) => u[*j],
            Expr::Add(es) => es.iter().map(|e| e.eval(x, u)).sum(),
            Expr::Mul(es) => es.iter().map(|e| e.eval(x, u)).product(),
            Expr::Pow(e, k) => e.eval(x, u).powi(*k as i32),
            Expr::AbsPow(a) | Expr::SgnPow(a) => a.eval(x[a.var]),
        }
    }

    /// Expand into canonical terms: coefficient times powers of states,
    /// inputs and atoms.
    pub fn canonical(&self, nstates: usize, ninputs: usize) -> Vec<CanonTerm> {
        let mut acc: BTreeMap<TermKey, f64> = BTreeMap::new();
        self.expand(nstates, ninputs, &mut acc);
        acc.into_iter()
            .filter(|(_, c)| c.abs() >= crate::poly::DROP_TOL)
            .map(|(k, coef)| CanonTerm {
                coef,
                states: k.states,
                inputs: k.inputs,
                atoms: k.atoms,
            })
            .collect()
    }

    fn expand(&self, n: usize, m: usize, acc: &mut BTreeMap<TermKey, f64>) {
        let terms = self.expand_terms(n, m);
        for (k, c) in terms {
            *acc.entry(k).or_insert(0.0) += c;
        }
    }

    fn expand_terms(&self, n: usize, m: usize) -> Vec<(TermKey, f64)> {
        match self {
            Expr::Const(c) => vec![(TermKey::one(n, m), *c)],
            Expr::Var(VarRef::State(i)) => {
                let mut k = TermKey::one(n, m);
                k.states[*i] = 1;
                vec![(k, 1.0)]
            }
            Expr::Var(VarRef::Input(j)) => {
                let mut k = TermKey::one(n, m);
                k.inputs[*j] = 1;
                vec![(k, 1.0)]
            }
            Expr::Add(es) => {
                let mut acc: BTreeMap<TermKey, f64> = BTreeMap::new();
                for e in es {
                    e.expand(n, m, &mut acc);
                }
                acc.into_iter().collect()
            }
            Expr::Mul(es) => {
                let mut prod = vec![(TermKey::one(n, m), 1.0)];
                for e in es {
                    let rhs = e.expand_terms(n, m);
                    let mut next: BTreeMap<TermKey, f64> = BTreeMap::new();
                    for (ka, ca) in &prod {
                        for (kb, cb) in &rhs {
                            *next.entry(ka.mul(kb)).or_insert(0.0) += ca * cb;
                        }
                    }
                    prod = next.into_iter().collect();
                }
                prod
            }
            Expr::Pow(e, k) => {
                let base = Expr::Mul(vec![(**e).clone(); *k as usize]);
                if *k == 0 {
                    vec![(TermKey::one(n, m), 1.0)]
                } else {
                    base.expand_terms(n, m)
                }
            }
            Expr::AbsPow(a) | Expr::SgnPow(a) => {
                let mut k = TermKey::one(n, m);
                // exact integer powers fold back into the polynomial part
                if a.q == 1 && (a.signed == (a.p % 2 == 1)) {
                    k.states[a.var] = a.p as u16;
                } else {
                    k.atoms.insert(*a, 1);
                }
                vec![(k, 1.0)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    states: Vec<u16>,
    inputs: Vec<u16>,
    atoms: BTreeMap<Atom, u16>,
}

impl TermKey {
    fn one(n: usize, m: usize) -> Self {
        TermKey {
            states: vec![0; n],
            inputs: vec![0; m],
            atoms: BTreeMap::new(),
        }
    }

    fn mul(&self, other: &TermKey) -> TermKey {
        let mut out = self.clone();
        for (a, b) in out.states.iter_mut().zip(&other.states) {
            *a += b;
        }
        for (a, b) in out.inputs.iter_mut().zip(&other.inputs) {
            *a += b;
        }
        for (&atom, &e) in &other.atoms {
            *out.atoms.entry(atom).or_insert(0) += e;
        }
        out
    }
}

/// Canonical product term: `coef * prod states^e * prod inputs^e * prod atoms^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonTerm {
    pub coef: f64,
    pub states: Vec<u16>,
    pub inputs: Vec<u16>,
    pub atoms: BTreeMap<Atom, u16>,
}

impl CanonTerm {
    pub fn input_degree(&self) -> u32 {
        self.inputs.iter().map(|&e| e as u32).sum()
    }

    pub fn eval_states_atoms(&self, x: &[f64]) -> f64 {
        let mut v = self.coef;
        for (i, &e) in self.states.iter().enumerate() {
            if e > 0 {
                v *= x[i].powi(e as i32);
            }
        }
        for (a, &e) in &self.atoms {
            if e > 0 {
                v *= a.eval(x[a.var]).powi(e as i32);
            }
        }
        v
    }
}

/// Parsed dynamical system in input-affine form: `xdot = f0(x) + sum f_i(x) u_i`.
#[derive(Debug, Clone)]
pub struct DynSystem {
    pub name: String,
    pub vars: Vec<String>,
    pub inputs: Vec<String>,
    /// Drift vector `f0`, one expression per state.
    pub drift: Vec<Expr>,
    /// Input columns `f_i`, indexed `input_cols[input][state]`.
    pub input_cols: Vec<Vec<Expr>>,
}

impl DynSystem {
    pub fn nstates(&self) -> usize {
        self.vars.len()
    }

    pub fn ninputs(&self) -> usize {
        self.inputs.len()
    }

    /// Numeric right-hand side at state `x` with input `u`.
    pub fn eval_rhs(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, ParseError> {
        if x.len() != self.nstates() || u.len() != self.ninputs() {
            return Err(ParseError::new(
                0,
                0,
                format!(
                    "dimension mismatch: expected {} states and {} inputs, got {} and {}",
                    self.nstates(),
                    self.ninputs(),
                    x.len(),
                    u.len()
                ),
            ));
        }
        let empty: [f64; 0] = [];
        let mut out = Vec::with_capacity(self.nstates());
        for i in 0..self.nstates() {
            let mut v = self.drift[i].eval(x, &empty);
            for (j, col) in self.input_cols.iter().enumerate() {
                v += col[i].eval(x, &empty) * u[j];
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Render back to the file grammar.
    pub fn render(&self) -> String {
        let mut out = format!("system \"{}\"\n", self.name);
        out.push_str(&format!("vars {}\n", self.vars.join(" ")));
        if !self.inputs.is_empty() {
            out.push_str(&format!("inputs {}\n", self.inputs.join(" ")));
        }
        for i in 0..self.nstates() {
            let mut rhs = render_expr(&self.drift[i], &self.vars, &self.inputs);
            for (j, col) in self.input_cols.iter().enumerate() {
                let g = render_expr(&col[i], &self.vars, &self.inputs);
                if g != "0" {
                    rhs.push_str(&format!(" + ({})*{}", g, self.inputs[j]));
                }
            }
            out.push_str(&format!("{}' = {}\n", self.vars[i], rhs));
        }
        out
    }
}

fn render_expr(e: &Expr, vars: &[String], inputs: &[String]) -> String {
    match e {
        Expr::Const(c) => format!("{c}"),
        Expr::Var(VarRef::State(i)) => vars[*i].clone(),
        Expr::Var(VarRef::Input(j)) => inputs[*j].clone(),
        Expr::Add(es) => {
            if es.is_empty() {
                return "0".to_string();
            }
            let parts: Vec<String> = es.iter().map(|e| render_expr(e, vars, inputs)).collect();
            let mut out = parts[0].clone();
            for p in &parts[1..] {
                if let Some(rest) = p.strip_prefix('-') {
                    out.push_str(&format!(" - {rest}"));
                } else {
                    out.push_str(&format!(" + {p}"));
                }
            }
            out
        }
        Expr::Mul(es) => {
            let parts: Vec<String> = es
                .iter()
                .map(|e| {
                    let s = render_expr(e, vars, inputs);
                    if matches!(e, Expr::Add(_)) {
                        format!("({s})")
                    } else {
                        s
                    }
                })
                .collect();
            parts.join("*")
        }
        Expr::Pow(b, k) => {
            let s = render_expr(b, vars, inputs);
            if matches!(**b, Expr::Add(_) | Expr::Mul(_)) {
                format!("({s})^{k}")
            } else {
                format!("{s}^{k}")
            }
        }
        Expr::AbsPow(a) => format!("abspow({}, {}/{})", vars[a.var], a.p, a.q),
        Expr::SgnPow(a) => format!("sgnpow({}, {}/{})", vars[a.var], a.p, a.q),
    }
}

impl fmt::Display for DynSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parse a system description; see the module docs for the grammar.
pub fn parse_system(text: &str) -> Result<DynSystem, ParseError> {
    let mut name = None;
    let mut vars: Vec<String> = Vec::new();
    let mut inputs: Vec<String> = Vec::new();
    let mut equations: Vec<(usize, Expr, usize)> = Vec::new(); // (state, rhs, line)

    for (lineno0, raw) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("system") {
            let rest = rest.trim();
            if !(rest.starts_with('"') && rest.ends_with('"') && rest.len() >= 2) {
                return Err(ParseError::new(lineno, 1, "expected system \"<name>\""));
            }
            name = Some(rest[1..rest.len() - 1].to_string());
        } else if let Some(rest) = line.strip_prefix("vars") {
            vars = rest.split_whitespace().map(String::from).collect();
            if vars.is_empty() {
                return Err(ParseError::new(lineno, 1, "vars line declares no variables"));
            }
        } else if let Some(rest) = line.strip_prefix("inputs") {
            inputs = rest.split_whitespace().map(String::from).collect();
        } else if let Some(eq_pos) = line.find('=') {
            let lhs = line[..eq_pos].trim();
            let state_name = lhs
                .strip_suffix('\'')
                .ok_or_else(|| ParseError::new(lineno, 1, "expected <var>' on the left"))?
                .trim();
            let idx = vars
                .iter()
                .position(|v| v == state_name)
                .ok_or_else(|| {
                    ParseError::new(lineno, 1, format!("undeclared state `{state_name}`"))
                })?;
            if equations.iter().any(|&(i, _, _)| i == idx) {
                return Err(ParseError::new(
                    lineno,
                    1,
                    format!("duplicate equation for `{state_name}`"),
                ));
            }
            let col0 = eq_pos + 1;
            let mut p = ExprParser::new(&line[col0..], lineno, col0 + 1, &vars, &inputs);
            let rhs = p.parse_expr()?;
            p.expect_end()?;
            equations.push((idx, rhs, lineno));
        } else {
            return Err(ParseError::new(lineno, 1, "unrecognized line"));
        }
    }

    let name = name.ok_or_else(|| ParseError::new(1, 1, "missing system line"))?;
    if vars.is_empty() {
        return Err(ParseError::new(1, 1, "missing vars line"));
    }
    let n = vars.len();
    let m = inputs.len();
    for i in 0..n {
        if !equations.iter().any(|&(j, _, _)| j == i) {
            return Err(ParseError::new(
                1,
                1,
                format!("missing equation for `{}`", vars[i]),
            ));
        }
    }
    equations.sort_by_key(|&(i, _, _)| i);

    // decompose into drift plus input columns, rejecting non-affine inputs
    let mut drift = Vec::with_capacity(n);
    let mut input_cols: Vec<Vec<Expr>> = vec![Vec::with_capacity(n); m];
    for (_, rhs, lineno) in &equations {
        let canon = rhs.canonical(n, m);
        for t in &canon {
            if t.input_degree() > 1 {
                return Err(ParseError::new(
                    *lineno,
                    1,
                    "right-hand side is not affine in the inputs",
                ));
            }
        }
        drift.push(terms_to_expr(
            canon.iter().filter(|t| t.input_degree() == 0),
            n,
            m,
        ));
        for j in 0..m {
            input_cols[j].push(terms_to_expr(
                canon.iter().filter(|t| t.inputs[j] == 1),
                n,
                m,
            ));
        }
    }

    let sys = DynSystem {
        name,
        vars,
        inputs,
        drift,
        input_cols,
    };

    // equilibrium check: the drift must vanish at the origin
    let zero_x = vec![0.0; n];
    let zero_u = vec![0.0; m];
    let rhs0 = sys.eval_rhs(&zero_x, &zero_u).expect("dims fixed above");
    if let Some((i, v)) = rhs0
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() > 1e-9)
    {
        return Err(ParseError::new(
            equations[i].2,
            1,
            format!("drift does not vanish at the origin: f{}(0) = {v}", i + 1),
        ));
    }
    Ok(sys)
}

/// Rebuild an expression from canonical terms (inputs dropped).
fn terms_to_expr<'a>(
    terms: impl Iterator<Item = &'a CanonTerm>,
    _n: usize,
    _m: usize,
) -> Expr {
    let mut sum = Vec::new();
    for t in terms {
        let mut factors = Vec::new();
        if (t.coef - 1.0).abs() > 1e-15 || (t.states.iter().all(|&e| e == 0) && t.atoms.is_empty())
        {
            factors.push(Expr::Const(t.coef));
        }
        for (i, &e) in t.states.iter().enumerate() {
            if e == 1 {
                factors.push(Expr::Var(VarRef::State(i)));
            } else if e > 1 {
                factors.push(Expr::Pow(Box::new(Expr::Var(VarRef::State(i))), e as u32));
            }
        }
        for (a, &e) in &t.atoms {
            let atom = if a.signed {
                Expr::SgnPow(*a)
            } else {
                Expr::AbsPow(*a)
            };
            if e == 1 {
                factors.push(atom);
            } else if e > 1 {
                factors.push(Expr::Pow(Box::new(atom), e as u32));
            }
        }
        sum.push(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Mul(factors)
        });
    }
    if sum.is_empty() {
        Expr::Const(0.0)
    } else if sum.len() == 1 {
        sum.pop().unwrap()
    } else {
        Expr::Add(sum)
    }
}

struct ExprParser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col_offset: usize,
    vars: &'a [String],
    inputs: &'a [String],
}

impl<'a> ExprParser<'a> {
    fn new(src: &'a str, line: usize, col_offset: usize, vars: &'a [String], inputs: &'a [String]) -> Self {
        ExprParser {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line,
            col_offset,
            vars,
            inputs,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, self.col_offset + self.pos, msg)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn expect_end(&mut self) -> Result<(), ParseError> {
        if self.peek().is_some() {
            Err(self.err("trailing input after expression"))
        } else {
            Ok(())
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = Vec::new();
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let first = self.parse_term()?;
        terms.push(if neg {
            Expr::Mul(vec![Expr::Const(-1.0), first])
        } else {
            first
        });
        loop {
            if self.eat(b'+') {
                terms.push(self.parse_term()?);
            } else if self.eat(b'-') {
                let t = self.parse_term()?;
                terms.push(Expr::Mul(vec![Expr::Const(-1.0), t]));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Add(terms)
        })
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.parse_factor()?];
        while self.eat(b'*') {
            factors.push(self.parse_factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Mul(factors)
        })
    }

    fn parse_factor(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.parse_primary()?;
        while self.eat(b'^') {
            let k = self.parse_uint()?;
            base = Expr::Pow(Box::new(base), k);
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let ident = self.parse_ident();
                match ident.as_str() {
                    "abspow" => self.parse_power_primitive(false),
                    "sgnpow" => self.parse_power_primitive(true),
                    _ => self.resolve_var(&ident),
                }
            }
            _ => Err(self.err("expected number, variable, `(` or power primitive")),
        }
    }

    fn resolve_var(&self, ident: &str) -> Result<Expr, ParseError> {
        if let Some(i) = self.vars.iter().position(|v| v == ident) {
            Ok(Expr::Var(VarRef::State(i)))
        } else if let Some(j) = self.inputs.iter().position(|v| v == ident) {
            Ok(Expr::Var(VarRef::Input(j)))
        } else {
            Err(self.err(format!("undeclared variable `{ident}`")))
        }
    }

    fn parse_power_primitive(&mut self, signed: bool) -> Result<Expr, ParseError> {
        self.expect(b'(')?;
        self.skip_ws();
        let ident = self.parse_ident();
        if ident.is_empty() {
            return Err(self.err("power primitives take a bare state variable"));
        }
        let var = match self.resolve_var(&ident)? {
            Expr::Var(VarRef::State(i)) => i,
            _ => return Err(self.err("power primitives take a state variable, not an input")),
        };
        self.expect(b',')?;
        let p = self.parse_uint()?;
        self.expect(b'/')?;
        let q = self.parse_uint()?;
        self.expect(b')')?;
        if p == 0 || q == 0 {
            return Err(self.err("rational exponent must be positive"));
        }
        let g = gcd(p, q);
        let atom = Atom {
            var,
            p: p / g,
            q: q / g,
            signed,
        };
        Ok(if signed {
            Expr::SgnPow(atom)
        } else {
            Expr::AbsPow(atom)
        })
    }

    fn parse_ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        self.src[start..self.pos].to_string()
    }

    fn parse_uint(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn parse_number(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && (self.bytes[self.pos].is_ascii_digit() || self.bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        // scientific notation
        if self.bytes.get(self.pos) == Some(&b'e') || self.bytes.get(self.pos) == Some(&b'E') {
            let mut probe = self.pos + 1;
            if matches!(self.bytes.get(probe), Some(b'+') | Some(b'-')) {
                probe += 1;
            }
            if self.bytes.get(probe).is_some_and(|b| b.is_ascii_digit()) {
                self.pos = probe;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.err("malformed number"))
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Parse a polynomial expression (no power primitives, no inputs) over the
/// given variable names. Used to read polynomials back from certificate
/// files and shape flags.
pub fn parse_polynomial(text: &str, names: &[String]) -> Result<crate::poly::Polynomial, ParseError> {
    let empty: [String; 0] = [];
    let mut p = ExprParser::new(text, 1, 1, names, &empty);
    let expr = p.parse_expr()?;
    p.expect_end()?;
    let n = names.len();
    let canon = expr.canonical(n, 0);
    let mut out = crate::poly::Polynomial::zero(n);
    for t in &canon {
        if !t.atoms.is_empty() {
            return Err(ParseError::new(1, 1, "power primitives are not polynomial"));
        }
        out.add_term(crate::poly::Monomial(t.states.clone()), t.coef);
    }
    Ok(out)
}

/// Bundled example systems, compiled into the library.
pub mod bundled {
    pub const EX1: &str = include_str!("../assets/ex1.sys");
    pub const EX2: &str = include_str!("../assets/ex2.sys");
    pub const SUPERTWIST: &str = include_str!("../assets/supertwist.sys");
    /// Quadratic Lyapunov candidate for the first bundled system, stored
    /// in certificate format for `validate --v-file`.
    pub const EX1_QUAD_CERT: &str = include_str!("../assets/ex1_quad.cert");

    pub fn lookup(name: &str) -> Option<&'static str> {
        match name {
            "ex1" => Some(EX1),
            "ex2" => Some(EX2),
            "supertwist" => Some(SUPERTWIST),
            _ => None,
        }
    }
}
