//! Terms, atoms, Horn clauses and programs, with the surface parser and the
//! canonical printer.
//!
//! Surface syntax:
//!
//! ```text
//! % comment
//! k1: connect(X,Z) <= connect(X,Y), connect(Y,Z).
//! k2: connect(node1,node2).
//! ```
//!
//! Identifiers starting with an upper-case letter or `_` are variables,
//! everything else (including numerals such as `0`) is a functor, predicate
//! or label.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::App(name.into(), Vec::new())
    }

    pub fn app(functor: impl Into<String>, args: Vec<Term>) -> Self {
        Term::App(functor.into(), args)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Number of symbol occurrences (variables count as 1).
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    pub fn occurs(&self, name: &str) -> bool {
        match self {
            Term::Var(v) => v == name,
            Term::App(_, args) => args.iter().any(|t| t.occurs(name)),
        }
    }

    /// True iff `other` is a proper subterm of `self`.
    pub fn has_strict_subterm(&self, other: &Term) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(_, args) => args.iter().any(|a| a == other || a.has_strict_subterm(other)),
        }
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_functors(&self, out: &mut BTreeMap<String, usize>) {
        if let Term::App(f, args) = self {
            out.entry(f.clone()).or_insert(args.len());
            args.iter().for_each(|a| a.collect_functors(out));
        }
    }

    pub fn rename(&self, map: &HashMap<String, String>) -> Term {
        match self {
            Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.rename(map)).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn rename(&self, map: &HashMap<String, String>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.rename(map)).collect(),
        }
    }

    /// `A[t]`: the atom extended with one extra trailing argument.
    pub fn extended(&self, extra: Term) -> Atom {
        let mut args = self.args.clone();
        args.push(extra);
        Atom {
            predicate: self.predicate.clone(),
            args,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HornClause {
    pub label: String,
    pub body: Vec<Atom>,
    pub head: Atom,
}

impl HornClause {
    pub fn new(label: impl Into<String>, body: Vec<Atom>, head: Atom) -> Self {
        HornClause {
            label: label.into(),
            body,
            head,
        }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Variables in formula order: body atoms first, then the head.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for atom in &self.body {
            atom.collect_vars(&mut out);
        }
        self.head.collect_vars(&mut out);
        out
    }

    pub fn rename(&self, map: &HashMap<String, String>) -> HornClause {
        HornClause {
            label: self.label.clone(),
            body: self.body.iter().map(|a| a.rename(map)).collect(),
            head: self.head.rename(map),
        }
    }

    /// True iff `other` is `self` up to a bijective renaming of variables.
    pub fn alpha_eq(&self, other: &HornClause) -> bool {
        if self.label != other.label || self.body.len() != other.body.len() {
            return false;
        }
        let mut fwd = HashMap::new();
        let mut bwd = HashMap::new();
        let pairs = self
            .body
            .iter()
            .zip(&other.body)
            .chain(std::iter::once((&self.head, &other.head)));
        for (a, b) in pairs {
            if !atoms_alpha_step(a, b, &mut fwd, &mut bwd) {
                return false;
            }
        }
        true
    }
}

fn atoms_alpha_step(
    a: &Atom,
    b: &Atom,
    fwd: &mut HashMap<String, String>,
    bwd: &mut HashMap<String, String>,
) -> bool {
    a.predicate == b.predicate
        && a.args.len() == b.args.len()
        && a.args.iter().zip(&b.args).all(|(s, t)| terms_alpha_step(s, t, fwd, bwd))
}

fn terms_alpha_step(
    a: &Term,
    b: &Term,
    fwd: &mut HashMap<String, String>,
    bwd: &mut HashMap<String, String>,
) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => {
            let f = fwd.entry(x.clone()).or_insert_with(|| y.clone()).clone();
            let g = bwd.entry(y.clone()).or_insert_with(|| x.clone()).clone();
            &f == y && &g == x
        }
        (Term::App(f, xs), Term::App(g, ys)) => {
            f == g
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(s, t)| terms_alpha_step(s, t, fwd, bwd))
        }
        _ => false,
    }
}

/// True iff the two atom sequences are equal up to a bijective renaming of
/// the variables not in `fixed`; variables in `fixed` must match literally.
pub fn alpha_eq_atoms(a: &[Atom], b: &[Atom], fixed: &BTreeSet<String>) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<String, String> = fixed.iter().map(|v| (v.clone(), v.clone())).collect();
    let mut bwd = fwd.clone();
    a.iter().zip(b).all(|(x, y)| atoms_alpha_step(x, y, &mut fwd, &mut bwd))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub clauses: Vec<HornClause>,
}

impl Program {
    pub fn new(clauses: Vec<HornClause>) -> Self {
        Program { clauses }
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clause(&self, label: &str) -> Option<&HornClause> {
        self.clauses.iter().find(|c| c.label == label)
    }

    /// Predicate name -> arity, first occurrence wins.
    pub fn predicates(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.clauses {
            for a in c.body.iter().chain(std::iter::once(&c.head)) {
                out.entry(a.predicate.clone()).or_insert(a.arity());
            }
        }
        out
    }

    /// Function symbol name -> arity, first occurrence wins.
    pub fn functors(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.clauses {
            for a in c.body.iter().chain(std::iter::once(&c.head)) {
                a.args.iter().for_each(|t| t.collect_functors(&mut out));
            }
        }
        out
    }

    /// Checks label uniqueness and per-symbol arity consistency.
    pub fn validate(&self) -> Result<(), ParseError> {
        let mut labels = BTreeSet::new();
        let mut sig = Signature::default();
        for c in &self.clauses {
            if !labels.insert(c.label.as_str()) {
                return Err(ParseError::DuplicateLabel(c.label.clone()));
            }
            for a in c.body.iter().chain(std::iter::once(&c.head)) {
                sig.atom(a)?;
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct Signature {
    preds: HashMap<String, usize>,
    funs: HashMap<String, usize>,
}

impl Signature {
    fn atom(&mut self, a: &Atom) -> Result<(), ParseError> {
        check_arity(&mut self.preds, &a.predicate, a.arity(), "predicate")?;
        for t in &a.args {
            self.term(t)?;
        }
        Ok(())
    }

    fn term(&mut self, t: &Term) -> Result<(), ParseError> {
        if let Term::App(f, args) = t {
            check_arity(&mut self.funs, f, args.len(), "functor")?;
            for a in args {
                self.term(a)?;
            }
        }
        Ok(())
    }
}

fn check_arity(
    table: &mut HashMap<String, usize>,
    name: &str,
    arity: usize,
    kind: &'static str,
) -> Result<(), ParseError> {
    match table.get(name) {
        Some(&seen) if seen != arity => Err(ParseError::ArityClash {
            kind,
            name: name.to_string(),
            first: seen,
            second: arity,
        }),
        Some(_) => Ok(()),
        None => {
            table.insert(name.to_string(), arity);
            Ok(())
        }
    }
}

/// The current goals of a derivation. Order fixes the selection rule;
/// [`GoalSet::multiset_eq`] compares as multisets.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GoalSet(pub Vec<Atom>);

impl GoalSet {
    pub fn new(atoms: Vec<Atom>) -> Self {
        GoalSet(atoms)
    }

    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for a in &self.0 {
            a.collect_vars(&mut out);
        }
        out
    }

    pub fn multiset_eq(&self, other: &GoalSet) -> bool {
        let mut a = self.0.clone();
        let mut b = other.0.clone();
        a.sort();
        b.sort();
        a == b
    }
}

impl Deref for GoalSet {
    type Target = Vec<Atom>;
    fn deref(&self) -> &Vec<Atom> {
        &self.0
    }
}

impl DerefMut for GoalSet {
    fn deref_mut(&mut self) -> &mut Vec<Atom> {
        &mut self.0
    }
}

impl From<Vec<Atom>> for GoalSet {
    fn from(v: Vec<Atom>) -> Self {
        GoalSet(v)
    }
}

// ---------------------------------------------------------------------------
// Renaming

/// Source of fresh variable names `<prefix>0`, `<prefix>1`, ... that skips
/// every reserved name.
#[derive(Clone, Debug)]
pub struct Fresh {
    prefix: String,
    next: usize,
    reserved: BTreeSet<String>,
}

impl Fresh {
    pub fn new<'a>(prefix: &str, reserved: impl IntoIterator<Item = &'a str>) -> Self {
        Fresh {
            prefix: prefix.to_string(),
            next: 0,
            reserved: reserved.into_iter().map(str::to_string).collect(),
        }
    }

    /// Starts numbering at `n` instead of 0.
    pub fn starting_at(mut self, n: usize) -> Self {
        self.next = n;
        self
    }

    pub fn counter(&self) -> usize {
        self.next
    }

    pub fn reserve(&mut self, name: &str) {
        self.reserved.insert(name.to_string());
    }

    pub fn reserve_all<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) {
        self.reserved.extend(names.into_iter().map(str::to_string));
    }

    pub fn next_name(&mut self) -> String {
        loop {
            let name = format!("{}{}", self.prefix, self.next);
            self.next += 1;
            if !self.reserved.contains(&name) {
                return name;
            }
        }
    }

    /// Renames every variable of `clause` to a fresh name, in formula order.
    pub fn rename_clause(&mut self, clause: &HornClause) -> HornClause {
        let map: HashMap<String, String> = clause
            .vars()
            .into_iter()
            .map(|v| (v.to_string(), self.next_name()))
            .collect();
        clause.rename(&map)
    }
}

/// Renames `clause` apart from `used` with a counter-based `_G0, _G1, ...`
/// scheme in order of first appearance (body, then head).
pub fn rename_apart(clause: &HornClause, used: &BTreeSet<String>) -> HornClause {
    Fresh::new("_G", used.iter().map(String::as_str)).rename_clause(clause)
}

/// Renames every variable of `atoms` to `_G0, _G1, ...` in first-appearance
/// order, leaving names in `keep` untouched.
pub fn canonicalize(atoms: &[Atom], keep: &BTreeSet<String>) -> Vec<Atom> {
    let mut vars = Vec::new();
    for a in atoms {
        a.collect_vars(&mut vars);
    }
    let mut fresh = Fresh::new("_G", keep.iter().map(String::as_str));
    let map: HashMap<String, String> = vars
        .into_iter()
        .filter(|v| !keep.contains(*v))
        .map(|v| (v.to_string(), fresh.next_name()))
        .collect();
    atoms.iter().map(|a| a.rename(&map)).collect()
}

// ---------------------------------------------------------------------------
// Printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::App(name, args) => {
                f.write_str(name)?;
                write_args(f, args)
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        write_args(f, &self.args)
    }
}

impl fmt::Display for HornClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.head)?;
        if !self.body.is_empty() {
            f.write_str(" <= ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        f.write_str(".")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for GoalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// Canonical text of any syntax object; re-parses to an equal value.
pub fn print_canonical<T: fmt::Display + ?Sized>(x: &T) -> String {
    x.to_string()
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate clause label `{0}`")]
    DuplicateLabel(String),
    #[error("{kind} `{name}` used with arity {first} and {second}")]
    ArityClash {
        kind: &'static str,
        name: String,
        first: usize,
        second: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Dot,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Var(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Arrow => f.write_str("`<=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.char_indices().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn error(line: usize, column: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            while let Some(c) = self.peek() {
                if c.is_whitespace() {
                    self.bump();
                } else if c == '%' {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                } else {
                    break;
                }
            }
            let (line, column) = (self.line, self.column);
            let Some(c) = self.bump() else {
                out.push((Tok::Eof, line, column));
                return Ok(out);
            };
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                '<' => {
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Arrow
                    } else {
                        return Err(Self::error(line, column, "expected `<=`"));
                    }
                }
                c if c.is_ascii_alphanumeric() || c == '_' => {
                    let mut name = String::from(c);
                    while let Some(n) = self.peek() {
                        if n.is_ascii_alphanumeric() || n == '_' {
                            name.push(n);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if c.is_ascii_uppercase() || c == '_' {
                        Tok::Var(name)
                    } else {
                        Tok::Ident(name)
                    }
                }
                other => {
                    return Err(Self::error(line, column, format!("unexpected character `{other}`")))
                }
            };
            out.push((tok, line, column));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: Lexer::new(text).tokens()?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        let (tok, line, column) = &self.toks[self.pos];
        Lexer::error(*line, *column, format!("expected {expected}, found {tok}"))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>, ParseError> {
        if *self.peek() != Tok::LParen {
            return Ok(Vec::new());
        }
        self.next();
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.next();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(Term::Var(v))
            }
            Tok::Ident(f) => {
                self.next();
                Ok(Term::App(f, self.args()?))
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = self.ident("a predicate name")?;
        Ok(Atom {
            predicate,
            args: self.args()?,
        })
    }

    fn atom_list(&mut self) -> Result<Vec<Atom>, ParseError> {
        let mut atoms = vec![self.atom()?];
        while *self.peek() == Tok::Comma {
            self.next();
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn clause(&mut self) -> Result<HornClause, ParseError> {
        let label = self.ident("a clause label")?;
        self.expect(Tok::Colon, "`:` after the clause label")?;
        let head = self.atom()?;
        let body = if *self.peek() == Tok::Arrow {
            self.next();
            self.atom_list()?
        } else {
            Vec::new()
        };
        self.expect(Tok::Dot, "`.` at the end of the clause")?;
        Ok(HornClause { label, body, head })
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut clauses = Vec::new();
    while *p.peek() != Tok::Eof {
        clauses.push(p.clause()?);
    }
    let program = Program { clauses };
    program.validate()?;
    Ok(program)
}

pub fn parse_query(text: &str) -> Result<GoalSet, ParseError> {
    let mut p = Parser::new(text)?;
    if *p.peek() == Tok::Eof {
        return Ok(GoalSet::default());
    }
    let atoms = p.atom_list()?;
    if *p.peek() == Tok::Dot {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of query"));
    }
    let mut sig = Signature::default();
    for a in &atoms {
        sig.atom(a)?;
    }
    Ok(GoalSet(atoms))
}

/// Parses a single clause, e.g. `k: p(X) <= q(X).`
pub fn parse_clause(text: &str) -> Result<HornClause, ParseError> {
    let mut p = Parser::new(text)?;
    let c = p.clause()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(c)
}

pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(text)?;
    let a = p.atom()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(a)
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text)?;
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of input"));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryWarning {
    UnknownPredicate(String),
    ArityMismatch { predicate: String, program: usize, query: usize },
}

impl fmt::Display for QueryWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryWarning::UnknownPredicate(p) => write!(f, "warning: unknown predicate `{p}`"),
            QueryWarning::ArityMismatch {
                predicate,
                program,
                query,
            } => write!(
                f,
                "warning: `{predicate}` has arity {program} in the program but {query} in the query"
            ),
        }
    }
}

/// Non-fatal diagnostics for a query against a program.
pub fn query_warnings(program: &Program, query: &GoalSet) -> Vec<QueryWarning> {
    let preds = program.predicates();
    let mut out = Vec::new();
    for a in query.iter() {
        match preds.get(&a.predicate) {
            None => out.push(QueryWarning::UnknownPredicate(a.predicate.clone())),
            Some(&n) if n != a.arity() => out.push(QueryWarning::ArityMismatch {
                predicate: a.predicate.clone(),
                program: n,
                query: a.arity(),
            }),
            _ => {}
        }
    }
    out.dedup();
    out
}
