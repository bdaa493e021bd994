//! Logical terms: constants, variables, compounds, and lambda predicates.
//!
//! Lists are compounds with the reserved functor `[]`. The binding
//! environment lives in [`Substitution`]; unification always runs the
//! occurs check because plan terms embed other plans.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Sym = Arc<str>;

pub const LIST: &str = "[]";
pub const APPLY: &str = "apply";
pub const EQ: &str = "=";

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// A logic variable. Identity is the id; the name is only for display.
#[derive(Clone, Debug)]
pub struct Var {
    pub name: Sym,
    pub id: u64,
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Var {}
impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}
impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Sym),
    Var(Var),
    Compound(Sym, Vec<Term>),
    Lambda(Vec<Var>, Box<Term>),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Const(sym(name))
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        Term::Compound(sym(functor), args)
    }

    pub fn list(items: Vec<Term>) -> Term {
        Term::Compound(sym(LIST), items)
    }

    pub fn empty_list() -> Term {
        Term::list(Vec::new())
    }

    pub fn as_list(&self) -> Option<&[Term]> {
        match self {
            Term::Compound(f, args) if &**f == LIST => Some(args),
            _ => None,
        }
    }

    pub fn functor(&self) -> Option<&str> {
        match self {
            Term::Compound(f, _) => Some(f),
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn arg(&self, i: usize) -> Option<&Term> {
        self.args().get(i)
    }

    pub fn is_functor(&self, name: &str, arity: usize) -> bool {
        matches!(self, Term::Compound(f, args) if &**f == name && args.len() == arity)
    }

    pub fn const_name(&self) -> Option<&str> {
        match self {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Const(_) => true,
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            Term::Lambda(params, body) => {
                let mut free = Vec::new();
                body.collect_vars(&mut free);
                free.iter().all(|v| params.contains(v))
            }
        }
    }

    /// Variables in order of first occurrence, lambda parameters excluded.
    pub fn free_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.free_vars_into(&[], &mut out);
        out
    }

    fn free_vars_into(&self, bound: &[Var], out: &mut Vec<Var>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.free_vars_into(bound, out)),
            Term::Lambda(params, body) => {
                let mut inner = bound.to_vec();
                inner.extend(params.iter().cloned());
                body.free_vars_into(&inner, out);
            }
        }
    }

    /// All variables including lambda parameters, in order of first occurrence.
    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Const(_) => {}
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::Lambda(params, body) => {
                for p in params {
                    if !out.contains(p) {
                        out.push(p.clone());
                    }
                }
                body.collect_vars(out);
            }
        }
    }

    pub fn contains_var(&self, var: &Var) -> bool {
        match self {
            Term::Const(_) => false,
            Term::Var(v) => v == var,
            Term::Compound(_, args) => args.iter().any(|a| a.contains_var(var)),
            Term::Lambda(params, body) => params.contains(var) || body.contains_var(var),
        }
    }

    /// Constants appearing anywhere in the term.
    pub fn constants(&self, out: &mut Vec<Sym>) {
        match self {
            Term::Const(c) => {
                if !out.contains(c) {
                    out.push(c.clone())
                }
            }
            Term::Var(_) => {}
            Term::Compound(_, args) => args.iter().for_each(|a| a.constants(out)),
            Term::Lambda(_, body) => body.constants(out),
        }
    }

    /// Replace variables by the mapped terms, without chasing chains.
    pub fn replace_vars(&self, map: &HashMap<Var, Term>) -> Term {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| a.replace_vars(map)).collect()),
            Term::Lambda(params, body) => {
                let params = params
                    .iter()
                    .map(|p| match map.get(p) {
                        Some(Term::Var(v)) => v.clone(),
                        _ => p.clone(),
                    })
                    .collect();
                Term::Lambda(params, Box::new(body.replace_vars(map)))
            }
        }
    }

    /// Beta-reduce every `apply(Lambda, Args..)` whose head is a lambda.
    pub fn reduce(&self) -> Term {
        match self {
            Term::Compound(f, args) => {
                let args: Vec<Term> = args.iter().map(Term::reduce).collect();
                if &**f == APPLY {
                    if let Some(Term::Lambda(params, _)) = args.first() {
                        if params.len() == args.len() - 1 {
                            if let Ok(t) = apply_lambda(&args[0], &args[1..]) {
                                return t.reduce();
                            }
                        }
                    }
                }
                Term::Compound(f.clone(), args)
            }
            Term::Lambda(params, body) => Term::Lambda(params.clone(), Box::new(body.reduce())),
            _ => self.clone(),
        }
    }
}

/// Simultaneously replaces the lambda's parameters by `args` in its body.
pub fn apply_lambda(lambda: &Term, args: &[Term]) -> Result<Term> {
    match lambda {
        Term::Lambda(params, body) => {
            if params.len() != args.len() {
                return Err(Error::LambdaArity {
                    expected: params.len(),
                    got: args.len(),
                });
            }
            let map: HashMap<Var, Term> = params.iter().cloned().zip(args.iter().cloned()).collect();
            Ok(body.replace_vars(&map))
        }
        other => Err(Error::NotLambda(other.to_string())),
    }
}

/// Monotone id source shared by variables, plan names, and discourse entities.
#[derive(Debug)]
pub struct IdGen {
    vars: AtomicU64,
    names: AtomicU64,
    entities: AtomicU64,
}

impl Default for IdGen {
    fn default() -> Self {
        IdGen {
            vars: AtomicU64::new(1),
            names: AtomicU64::new(1),
            entities: AtomicU64::new(1),
        }
    }
}

impl IdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh_var(&self, name: &str) -> Var {
        Var {
            name: sym(name),
            id: self.vars.fetch_add(1, Ordering::Relaxed),
        }
    }

    pub fn fresh_var_term(&self, name: &str) -> Term {
        Term::Var(self.fresh_var(name))
    }

    /// Next node or plan name, `p1`, `p2`, ...
    pub fn fresh_name(&self) -> Sym {
        let n = self.names.fetch_add(1, Ordering::Relaxed);
        sym(&format!("p{n}"))
    }

    pub fn fresh_entity(&self) -> Term {
        let n = self.entities.fetch_add(1, Ordering::Relaxed);
        Term::Const(sym(&format!("entity{n}")))
    }

    /// Keeps minted entity names clear of `entityN` constants seen in input.
    pub fn observe_constants(&self, term: &Term) {
        let mut consts = Vec::new();
        term.constants(&mut consts);
        for c in consts {
            if let Some(n) = c.strip_prefix("entity").and_then(|d| d.parse::<u64>().ok()) {
                self.entities.fetch_max(n + 1, Ordering::Relaxed);
            }
        }
    }
}

/// Replaces every variable by a fresh one, preserving sharing.
pub fn rename_apart(term: &Term, ids: &IdGen) -> Term {
    let mut map = HashMap::new();
    rename_with(term, ids, &mut map)
}

pub fn rename_with(term: &Term, ids: &IdGen, map: &mut HashMap<Var, Term>) -> Term {
    let mut vars = Vec::new();
    term.collect_vars(&mut vars);
    for v in vars {
        map.entry(v.clone())
            .or_insert_with(|| Term::Var(ids.fresh_var(&v.name)));
    }
    term.replace_vars(map)
}

/// Variable bindings. Kept triangular; [`Substitution::apply`] resolves chains.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &Var) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    pub fn bind(&mut self, var: Var, term: Term) {
        self.bindings.insert(var, term);
    }

    fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.bindings.get(v) {
                Some(t) => term = t,
                None => break,
            }
        }
        term
    }

    pub fn apply(&self, term: &Term) -> Term {
        match self.walk(term) {
            Term::Const(c) => Term::Const(c.clone()),
            Term::Var(v) => Term::Var(v.clone()),
            Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect()),
            Term::Lambda(params, body) => Term::Lambda(params.clone(), Box::new(self.apply(body))),
        }
    }

    /// Fully resolved bindings; the result is idempotent.
    pub fn normalized(&self) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .keys()
                .map(|v| (v.clone(), self.apply(&Term::Var(v.clone()))))
                .collect(),
        }
    }

    fn occurs(&self, var: &Var, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(v) => v == var,
            Term::Const(_) => false,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(var, a)),
            Term::Lambda(_, body) => self.occurs(var, body),
        }
    }

    fn unify_in_place(&mut self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if self.occurs(x, t) {
                    return false;
                }
                self.bindings.insert(x.clone(), t.clone());
                true
            }
            (Term::Const(x), Term::Const(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.unify_in_place(x, y))
            }
            (Term::Lambda(ps, pb), Term::Lambda(qs, qb)) => {
                if ps.len() != qs.len() {
                    return false;
                }
                // Alpha-rename q's parameters onto p's, then forbid the
                // parameters from being bound or escaping.
                let map: HashMap<Var, Term> = qs.iter().cloned().zip(ps.iter().cloned().map(Term::Var)).collect();
                let qb = qb.replace_vars(&map);
                let before = self.clone();
                if !self.unify_in_place(pb, &qb) {
                    return false;
                }
                let escaped = self.bindings.iter().any(|(v, t)| {
                    before.bindings.get(v) != Some(t) && (ps.contains(v) || ps.iter().any(|p| self.occurs(p, t)))
                });
                if escaped {
                    *self = before;
                    return false;
                }
                true
            }
            _ => false,
        }
    }
}

/// Most general unifier of `a` and `b` extending `s`, or `None`.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    if out.unify_in_place(a, b) {
        Some(out)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Text syntax
// ---------------------------------------------------------------------------

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Var(v) => write!(f, "{v}"),
            Term::Compound(func, args) if &**func == LIST => {
                f.write_str("[")?;
                write_args(f, args)?;
                f.write_str("]")
            }
            Term::Compound(func, args) if &**func == EQ && args.len() == 2 => {
                write!(f, "{} = {}", args[0], args[1])
            }
            Term::Compound(func, args) => {
                write!(f, "{func}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Term::Lambda(params, body) => {
                f.write_str("lambda(")?;
                for p in params {
                    write!(f, "{p}, ")?;
                }
                write!(f, "{body})")
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

pub fn display_list(terms: &[Term]) -> String {
    terms.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")
}

/// Variable scope for parsing: one name maps to one variable.
#[derive(Debug, Default, Clone)]
pub struct Scope {
    vars: HashMap<String, Var>,
}

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: &str, ids: &IdGen) -> Var {
        if name == "_" {
            return ids.fresh_var("_");
        }
        self.vars
            .entry(name.to_string())
            .or_insert_with(|| ids.fresh_var(name))
            .clone()
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    ids: &'a IdGen,
    scope: &'a mut Scope,
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'-' || c == b'?'
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
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

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && is_ident_char(self.src[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn term(&mut self) -> Result<Term> {
        let left = self.primary()?;
        if self.peek() == Some(b'=') {
            self.pos += 1;
            let right = self.primary()?;
            return Ok(Term::compound(EQ, vec![left, right]));
        }
        Ok(left)
    }

    fn args_until(&mut self, close: u8) -> Result<Vec<Term>> {
        let mut args = Vec::new();
        if self.peek() == Some(close) {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.term()?);
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return Err(self.err(format!("expected `,` or `{}`", close as char))),
            }
        }
    }

    fn primary(&mut self) -> Result<Term> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                Ok(Term::list(self.args_until(b']')?))
            }
            Some(_) => {
                let name = self.ident()?;
                let first = name.as_bytes()[0];
                if first.is_ascii_uppercase() || first == b'_' {
                    return Ok(Term::Var(self.scope.var(&name, self.ids)));
                }
                if self.peek() == Some(b'(') {
                    self.pos += 1;
                    if name == "lambda" {
                        return self.lambda();
                    }
                    let args = self.args_until(b')')?;
                    Ok(Term::compound(&name, args))
                } else {
                    Ok(Term::constant(&name))
                }
            }
            None => Err(self.err("unexpected end of input")),
        }
    }

    /// `lambda(X, Y, body)`: parameters are fresh and shadow outer names.
    fn lambda(&mut self) -> Result<Term> {
        let mut params: Vec<Var> = Vec::new();
        let mut shadowed: Vec<(String, Option<Var>)> = Vec::new();
        let body = loop {
            let save = self.pos;
            let is_param = match self.peek() {
                Some(c) if c.is_ascii_uppercase() || c == b'_' => {
                    let name = self.ident()?;
                    if self.peek() == Some(b',') {
                        self.pos += 1;
                        let v = self.ids.fresh_var(&name);
                        let old = self.scope.vars.insert(name.clone(), v.clone());
                        shadowed.push((name, old));
                        params.push(v);
                        true
                    } else {
                        false
                    }
                }
                _ => false,
            };
            if !is_param {
                self.pos = save;
                let body = self.term()?;
                self.expect(b')')?;
                break body;
            }
        };
        for (name, old) in shadowed.into_iter().rev() {
            match old {
                Some(v) => self.scope.vars.insert(name, v),
                None => self.scope.vars.remove(&name),
            };
        }
        if params.is_empty() {
            return Err(self.err("lambda needs parameters and a body"));
        }
        Ok(Term::Lambda(params, Box::new(body)))
    }
}

/// Parses one term. Variables resolve through `scope`.
pub fn parse_term_in(src: &str, ids: &IdGen, scope: &mut Scope) -> Result<Term> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        ids,
        scope,
    };
    let t = p.term()?;
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

pub fn parse_term(src: &str, ids: &IdGen) -> Result<Term> {
    parse_term_in(src, ids, &mut Scope::new())
}

/// Parses a comma-separated sequence of terms at top level.
pub fn parse_terms_in(src: &str, ids: &IdGen, scope: &mut Scope) -> Result<Vec<Term>> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        ids,
        scope,
    };
    let mut out = Vec::new();
    if p.peek().is_none() {
        return Ok(out);
    }
    loop {
        out.push(p.term()?);
        match p.peek() {
            Some(b',') => p.pos += 1,
            None => return Ok(out),
            Some(_) => return Err(p.err("expected `,` between terms")),
        }
    }
}
