//! Proof terms for Horn formulas: beta normalisation, first-order
//! representation, extraction from derivations and judgement checking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{replay_checked, DerivationTrace, ReplayError, StepMode};
use crate::realize::NameScheme;
use crate::subst::{match_terms, unify_atoms, Substitution};
use crate::syntax::{parse_atom, parse_query, Atom, Fresh, Program, Term};

pub const DEFAULT_FUEL: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProofTerm {
    Const(String),
    Var(String),
    Lam(String, Box<ProofTerm>),
    App(Box<ProofTerm>, Box<ProofTerm>),
}

/// Maps proof variables to the terms they stand for.
pub type RepEnv = BTreeMap<String, Term>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProofError {
    #[error("normalisation did not finish within the fuel budget")]
    BudgetExhausted,
    #[error("proof term is not first order")]
    NotFirstOrder,
    #[error("proof variable `{0}` has no representation")]
    UnboundProofVariable(String),
    #[error("proof variable `{0}` is applied to arguments")]
    AppliedVariable(String),
    #[error("expected a normal form `\\a1 ... ak. n` with first-order `n`")]
    NotNormal,
    #[error("cannot parse proof term at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("malformed trace: {0}")]
    MalformedTrace(#[from] ReplayError),
}

impl ProofTerm {
    pub fn constant(label: impl Into<String>) -> Self {
        ProofTerm::Const(label.into())
    }

    pub fn var(name: impl Into<String>) -> Self {
        ProofTerm::Var(name.into())
    }

    pub fn lam(binder: impl Into<String>, body: ProofTerm) -> Self {
        ProofTerm::Lam(binder.into(), Box::new(body))
    }

    pub fn app(f: ProofTerm, x: ProofTerm) -> Self {
        ProofTerm::App(Box::new(f), Box::new(x))
    }

    /// `head a1 ... an`, associating to the left.
    pub fn apply_all(head: ProofTerm, args: impl IntoIterator<Item = ProofTerm>) -> Self {
        args.into_iter().fold(head, ProofTerm::app)
    }

    /// `\a1. ... \an. body`.
    pub fn abstract_all(binders: impl IntoIterator<Item = String>, body: ProofTerm) -> Self {
        let binders: Vec<String> = binders.into_iter().collect();
        binders.into_iter().rev().fold(body, |b, a| ProofTerm::lam(a, b))
    }

    /// Splits an application spine into its head and arguments.
    pub fn spine(&self) -> (&ProofTerm, Vec<&ProofTerm>) {
        let mut args = Vec::new();
        let mut at = self;
        while let ProofTerm::App(f, x) = at {
            args.push(x.as_ref());
            at = f;
        }
        args.reverse();
        (at, args)
    }

    /// Splits leading binders from the body.
    pub fn binders(&self) -> (Vec<&str>, &ProofTerm) {
        let mut out = Vec::new();
        let mut at = self;
        while let ProofTerm::Lam(a, b) = at {
            out.push(a.as_str());
            at = b;
        }
        (out, at)
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            ProofTerm::Const(_) => {}
            ProofTerm::Var(a) => {
                if !bound.contains(a) {
                    out.insert(a.clone());
                }
            }
            ProofTerm::Lam(a, b) => {
                bound.push(a.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
            ProofTerm::App(f, x) => {
                f.collect_free(bound, out);
                x.collect_free(bound, out);
            }
        }
    }

    fn all_names(&self, out: &mut BTreeSet<String>) {
        match self {
            ProofTerm::Const(_) => {}
            ProofTerm::Var(a) => {
                out.insert(a.clone());
            }
            ProofTerm::Lam(a, b) => {
                out.insert(a.clone());
                b.all_names(out);
            }
            ProofTerm::App(f, x) => {
                f.all_names(out);
                x.all_names(out);
            }
        }
    }

    /// Capture-avoiding `[with/a]self`.
    pub fn substitute(&self, a: &str, with: &ProofTerm) -> ProofTerm {
        match self {
            ProofTerm::Const(_) => self.clone(),
            ProofTerm::Var(b) if b == a => with.clone(),
            ProofTerm::Var(_) => self.clone(),
            ProofTerm::App(f, x) => ProofTerm::app(f.substitute(a, with), x.substitute(a, with)),
            ProofTerm::Lam(b, _) if b == a => self.clone(),
            ProofTerm::Lam(b, body) => {
                let fv = with.free_vars();
                if !fv.contains(b) || !body.free_vars().contains(a) {
                    return ProofTerm::lam(b.clone(), body.substitute(a, with));
                }
                let mut avoid = fv;
                body.all_names(&mut avoid);
                avoid.insert(a.to_string());
                let fresh = (0..)
                    .map(|n| format!("{b}{n}"))
                    .find(|c| !avoid.contains(c))
                    .expect("unbounded supply");
                let renamed = body.substitute(b, &ProofTerm::Var(fresh.clone()));
                ProofTerm::lam(fresh, renamed.substitute(a, with))
            }
        }
    }

    /// One leftmost-outermost beta step.
    fn beta_step(&self) -> Option<ProofTerm> {
        match self {
            ProofTerm::App(f, x) => {
                if let ProofTerm::Lam(a, body) = f.as_ref() {
                    return Some(body.substitute(a, x));
                }
                if let Some(f2) = f.beta_step() {
                    return Some(ProofTerm::app(f2, (**x).clone()));
                }
                x.beta_step().map(|x2| ProofTerm::app((**f).clone(), x2))
            }
            ProofTerm::Lam(a, b) => b.beta_step().map(|b2| ProofTerm::lam(a.clone(), b2)),
            _ => None,
        }
    }

    pub fn is_normal(&self) -> bool {
        self.beta_step().is_none()
    }

    pub fn size(&self) -> usize {
        match self {
            ProofTerm::Const(_) | ProofTerm::Var(_) => 1,
            ProofTerm::Lam(_, b) => 1 + b.size(),
            ProofTerm::App(f, x) => 1 + f.size() + x.size(),
        }
    }
}

/// Leftmost-outermost normalisation with at most `fuel` beta steps.
pub fn beta_normalize(e: &ProofTerm, fuel: usize) -> Result<ProofTerm, ProofError> {
    let mut cur = e.clone();
    for _ in 0..=fuel {
        match cur.beta_step() {
            None => return Ok(cur),
            Some(next) => cur = next,
        }
    }
    Err(ProofError::BudgetExhausted)
}

/// Built from variables and constants by application only.
pub fn is_first_order(e: &ProofTerm) -> bool {
    match e {
        ProofTerm::Const(_) | ProofTerm::Var(_) => true,
        ProofTerm::Lam(..) => false,
        ProofTerm::App(f, x) => is_first_order(f) && is_first_order(x),
    }
}

/// `⟦κ p1 … pn⟧ = f_κ(⟦p1⟧, …, ⟦pn⟧)`, `⟦κ⟧ = c_κ`, `⟦a⟧ = env(a)`.
pub fn represent(n: &ProofTerm, env: &RepEnv, scheme: &NameScheme) -> Result<Term, ProofError> {
    let (head, args) = n.spine();
    match head {
        ProofTerm::Var(a) => {
            if !args.is_empty() {
                return Err(ProofError::AppliedVariable(a.clone()));
            }
            env.get(a).cloned().ok_or_else(|| ProofError::UnboundProofVariable(a.clone()))
        }
        ProofTerm::Const(k) => {
            let reps = args
                .into_iter()
                .map(|p| represent(p, env, scheme))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Term::app(scheme.proof_fun(k, reps.len()), reps))
        }
        _ => Err(ProofError::NotFirstOrder),
    }
}

// ---------------------------------------------------------------------------
// Printing and parsing

impl fmt::Display for ProofTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProofTerm::Const(k) => f.write_str(k),
            ProofTerm::Var(a) => f.write_str(a),
            ProofTerm::Lam(a, b) => write!(f, "\\{a}. {b}"),
            ProofTerm::App(g, x) => {
                match g.as_ref() {
                    ProofTerm::App(..) | ProofTerm::Lam(..) => write!(f, "({g})")?,
                    _ => write!(f, "{g}")?,
                }
                match x.as_ref() {
                    ProofTerm::App(..) | ProofTerm::Lam(..) => write!(f, " ({x})"),
                    _ => write!(f, " {x}"),
                }
            }
        }
    }
}

/// Parses `\a b. (k1 a) k2`-style terms (`λ` is accepted for `\`). Names
/// bound by an enclosing lambda become variables, all others constants.
pub fn parse_proof_term(text: &str) -> Result<ProofTerm, ProofError> {
    let mut p = TermParser {
        chars: text.char_indices().collect(),
        pos: 0,
        bound: Vec::new(),
    };
    let t = p.term()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(t)
}

struct TermParser {
    chars: Vec<(usize, char)>,
    pos: usize,
    bound: Vec<String>,
}

impl TermParser {
    fn error(&self, message: &str) -> ProofError {
        let offset = self.chars.get(self.pos).map(|c| c.0).unwrap_or_else(|| self.chars.last().map(|c| c.0 + 1).unwrap_or(0));
        ProofError::Parse {
            offset,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().map(|c| c.1).collect())
    }

    fn term(&mut self) -> Result<ProofTerm, ProofError> {
        self.skip_ws();
        if matches!(self.peek(), Some('\\' | 'λ')) {
            return self.lambda();
        }
        let mut t = self.atom()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some('\\' | 'λ') => return Ok(ProofTerm::app(t, self.lambda()?)),
                Some(c) if c == '(' || c.is_alphanumeric() || c == '_' => t = ProofTerm::app(t, self.atom()?),
                _ => return Ok(t),
            }
        }
    }

    fn lambda(&mut self) -> Result<ProofTerm, ProofError> {
        self.pos += 1;
        let mut binders = Vec::new();
        while let Some(a) = self.ident() {
            binders.push(a);
        }
        if binders.is_empty() {
            return Err(self.error("expected a binder"));
        }
        self.skip_ws();
        if self.peek() != Some('.') {
            return Err(self.error("expected `.`"));
        }
        self.pos += 1;
        let depth = self.bound.len();
        self.bound.extend(binders.iter().cloned());
        let body = self.term();
        self.bound.truncate(depth);
        Ok(ProofTerm::abstract_all(binders, body?))
    }

    fn atom(&mut self) -> Result<ProofTerm, ProofError> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            let t = self.term()?;
            self.skip_ws();
            if self.peek() != Some(')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(t);
        }
        match self.ident() {
            Some(name) if self.bound.contains(&name) => Ok(ProofTerm::Var(name)),
            Some(name) => Ok(ProofTerm::Const(name)),
            None => Err(self.error("expected a proof term")),
        }
    }
}

// ---------------------------------------------------------------------------
// Judgements

/// `proof : body => head`, universally closed over its term variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub proof: ProofTerm,
    pub body: Vec<Atom>,
    pub head: Atom,
}

impl Judgement {
    pub fn new(proof: ProofTerm, body: Vec<Atom>, head: Atom) -> Self {
        Judgement { proof, body, head }
    }

    /// Parses `proof : A1, ..., An => A`.
    pub fn parse(text: &str) -> Result<Judgement, String> {
        let (proof, formula) = text.split_once(':').ok_or("expected `proof : formula`")?;
        let (body, head) = formula.split_once("=>").ok_or("expected `=>` in formula")?;
        Ok(Judgement {
            proof: parse_proof_term(proof).map_err(|e| e.to_string())?,
            body: parse_query(body).map_err(|e| e.to_string())?.0,
            head: parse_atom(head.trim()).map_err(|e| e.to_string())?,
        })
    }
}

impl fmt::Display for Judgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.body.iter().map(ToString::to_string).collect();
        if body.is_empty() {
            write!(f, "{} : => {}", self.proof, self.head)
        } else {
            write!(f, "{} : {} => {}", self.proof, body.join(", "), self.head)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("proof is not a normal form `\\a1 ... ak. n` with first-order `n`")]
    NotNormal,
    #[error("{binders} binders but only {premises} premises")]
    TooManyBinders { binders: usize, premises: usize },
    #[error("free proof variable `{0}`")]
    FreeProofVariable(String),
    #[error("proof variable `{0}` is applied to arguments")]
    AppliedVariable(String),
    #[error("unknown clause `{0}`")]
    UnknownConstant(String),
    #[error("`{label}` applied to {given} arguments but its body has {expected} atoms")]
    OverApplied { label: String, given: usize, expected: usize },
    #[error("argument {position} of `{label}` is only partially applied")]
    PartialArgument { label: String, position: usize },
    #[error("argument {position} of `{label}` proves {found}, which does not unify with {expected}")]
    Clash { label: String, position: usize, expected: Atom, found: Atom },
    #[error("premises left open by the proof ({computed}) do not match the declared ones ({declared})")]
    PremiseMismatch { computed: String, declared: String },
    #[error("declared formula is not an instance of the computed conclusion {computed}")]
    HeadMismatch { computed: String },
}

fn skolem(name: &str) -> Term {
    Term::constant(format!("${name}"))
}

fn skolemize(atom: &Atom, map: &Substitution) -> Atom {
    map.apply(atom)
}

struct Checker<'a> {
    program: &'a Program,
    premises: HashMap<String, Atom>,
    theta: Substitution,
    fresh: Fresh,
}

impl Checker<'_> {
    /// Most general (open premises, conclusion) of a first-order proof.
    fn conclusion(&mut self, e: &ProofTerm) -> Result<(Vec<Atom>, Atom), CheckError> {
        let (head, args) = e.spine();
        match head {
            ProofTerm::Var(a) => {
                if !args.is_empty() {
                    return Err(CheckError::AppliedVariable(a.clone()));
                }
                let p = self.premises.get(a).ok_or_else(|| CheckError::FreeProofVariable(a.clone()))?;
                Ok((Vec::new(), p.clone()))
            }
            ProofTerm::Const(k) => {
                let clause = self.program.clause(k).ok_or_else(|| CheckError::UnknownConstant(k.clone()))?;
                if args.len() > clause.body.len() {
                    return Err(CheckError::OverApplied {
                        label: k.clone(),
                        given: args.len(),
                        expected: clause.body.len(),
                    });
                }
                let inst = self.fresh.rename_clause(clause);
                for (i, arg) in args.iter().enumerate() {
                    let (open, c) = self.conclusion(arg)?;
                    if !open.is_empty() {
                        return Err(CheckError::PartialArgument {
                            label: k.clone(),
                            position: i + 1,
                        });
                    }
                    let expected = self.theta.apply(&inst.body[i]);
                    let found = self.theta.apply(&c);
                    let u = unify_atoms(&expected, &found).ok_or(CheckError::Clash {
                        label: k.clone(),
                        position: i + 1,
                        expected: expected.clone(),
                        found: found.clone(),
                    })?;
                    self.theta = Substitution::compose(&u, &self.theta);
                }
                Ok((inst.body[args.len()..].to_vec(), inst.head))
            }
            _ => Err(CheckError::NotNormal),
        }
    }
}

/// Decides `Φ ⊢ j` for a normal proof `\a1…ak. n`. Binder `ai` proves the
/// i-th premise; any premises after the k-th must be exactly the body atoms
/// left unresolved by an under-applied head constant.
pub fn check_judgement(program: &Program, j: &Judgement) -> Result<(), CheckError> {
    let (binders, body) = j.proof.binders();
    if !is_first_order(body) {
        return Err(CheckError::NotNormal);
    }
    if binders.len() > j.body.len() {
        return Err(CheckError::TooManyBinders {
            binders: binders.len(),
            premises: j.body.len(),
        });
    }
    let mut vars = Vec::new();
    for a in j.body.iter().chain(std::iter::once(&j.head)) {
        a.collect_vars(&mut vars);
    }
    let sk = Substitution::from_pairs(vars.iter().map(|v| (v.to_string(), skolem(v))));
    let premises: Vec<Atom> = j.body.iter().map(|a| skolemize(a, &sk)).collect();
    let head = skolemize(&j.head, &sk);

    let mut checker = Checker {
        program,
        premises: binders.iter().map(|b| b.to_string()).zip(premises.iter().cloned()).collect(),
        theta: Substitution::new(),
        fresh: Fresh::new("_C", []),
    };
    let (open, conc) = checker.conclusion(body)?;
    let open: Vec<Atom> = open.iter().map(|a| checker.theta.apply(a)).collect();
    let conc = checker.theta.apply(&conc);
    let declared = &premises[binders.len()..];
    let render = |atoms: &[Atom]| atoms.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
    let same_shape = open.len() == declared.len()
        && open
            .iter()
            .zip(declared)
            .all(|(a, b)| a.predicate == b.predicate && a.arity() == b.arity());
    if !same_shape {
        return Err(CheckError::PremiseMismatch {
            computed: render(&open),
            declared: render(declared),
        });
    }
    if conc.predicate != head.predicate || conc.arity() != head.arity() {
        return Err(CheckError::HeadMismatch { computed: conc.to_string() });
    }
    let pats: Vec<Term> = open.iter().chain(std::iter::once(&conc)).flat_map(|a| a.args.iter().cloned()).collect();
    let targets: Vec<Term> = declared.iter().chain(std::iter::once(&head)).flat_map(|a| a.args.iter().cloned()).collect();
    match match_terms(&pats, &targets) {
        Some(_) => Ok(()),
        None if open.is_empty() => Err(CheckError::HeadMismatch { computed: conc.to_string() }),
        None => Err(CheckError::PremiseMismatch {
            computed: format!("{} => {}", render(&open), conc),
            declared: format!("{} => {}", render(declared), head),
        }),
    }
}

pub fn is_derivable(program: &Program, j: &Judgement) -> bool {
    check_judgement(program, j).is_ok()
}

// ---------------------------------------------------------------------------
// Extraction

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extracted {
    /// The initial goal this proof belongs to.
    pub goal: Atom,
    /// `\b1…bk. n` proving `γC1, …, γCk => γA`.
    pub judgement: Judgement,
}

/// Builds, for each initial goal, the proof recorded by a derivation.
/// Resolution steps (unif and tm) apply a clause constant to the proofs of
/// the body atoms they introduce; substitutional steps only instantiate.
/// Goals still open at the end become proof variables `b1…bk`.
pub fn extract_proof(trace: &DerivationTrace) -> Result<Vec<Extracted>, ProofError> {
    replay_checked(trace)?;
    struct Node {
        label: Option<String>,
        children: Vec<usize>,
    }
    let mut nodes: Vec<Node> = (0..trace.initial.len())
        .map(|_| Node {
            label: None,
            children: Vec::new(),
        })
        .collect();
    let mut current: Vec<usize> = (0..trace.initial.len()).collect();
    for step in &trace.steps {
        if step.mode == StepMode::Sub {
            continue;
        }
        let id = current[step.selected_index];
        let first = nodes.len();
        for _ in 0..step.instance.body.len() {
            nodes.push(Node {
                label: None,
                children: Vec::new(),
            });
        }
        let kids: Vec<usize> = (first..nodes.len()).collect();
        nodes[id].label = Some(step.clause_label.clone());
        nodes[id].children = kids.clone();
        current.splice(step.selected_index..=step.selected_index, kids);
    }

    let open: HashMap<usize, String> = current.iter().enumerate().map(|(i, &n)| (n, format!("b{}", i + 1))).collect();
    fn build(nodes: &[Node], open: &HashMap<usize, String>, id: usize, used: &mut Vec<usize>) -> ProofTerm {
        match &nodes[id].label {
            Some(k) => ProofTerm::apply_all(
                ProofTerm::constant(k.clone()),
                nodes[id].children.iter().map(|&c| build(nodes, open, c, used)).collect::<Vec<_>>(),
            ),
            None => {
                used.push(id);
                ProofTerm::Var(open[&id].clone())
            }
        }
    }

    let gamma = trace.final_state();
    let finals = trace.final_goals();
    let position: HashMap<usize, usize> = current.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    Ok(trace
        .initial
        .iter()
        .enumerate()
        .map(|(j, goal)| {
            let mut used = Vec::new();
            let n = build(&nodes, &open, j, &mut used);
            used.sort_by_key(|id| position[id]);
            let binders: Vec<String> = used.iter().map(|id| open[id].clone()).collect();
            let body: Vec<Atom> = used.iter().map(|id| gamma.apply(&finals[position[id]])).collect();
            Extracted {
                goal: goal.clone(),
                judgement: Judgement::new(ProofTerm::abstract_all(binders, n), body, gamma.apply(goal)),
            }
        })
        .collect())
}
