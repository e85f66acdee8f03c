//! Brute-force reference enumerator. It keeps its own unification, matching
//! and renaming so that it shares no search code with the engine.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use structres::engine::{canonical_answer, Strategy};
use structres::subst::Substitution;
use structres::syntax::{canonicalize, Atom, GoalSet, HornClause, Program, Term};

/// Cap on term-matching steps inside one LP-Struct normalisation.
pub const ORACLE_TM_CAP: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleResult {
    pub answers: BTreeSet<Substitution>,
    /// Some term-matching normalisation exceeded [`ORACLE_TM_CAP`].
    pub truncated: bool,
}

type Bind = BTreeMap<String, Term>;

fn walk(t: &Term, b: &Bind) -> Term {
    match t {
        Term::Var(v) => match b.get(v) {
            Some(r) => walk(r, b),
            None => t.clone(),
        },
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| walk(a, b)).collect()),
    }
}

fn occurs(v: &str, t: &Term, b: &Bind) -> bool {
    match t {
        Term::Var(w) => match b.get(w) {
            Some(r) => occurs(v, r, b),
            None => v == w,
        },
        Term::App(_, args) => args.iter().any(|a| occurs(v, a, b)),
    }
}

fn deref<'a>(t: &'a Term, b: &'a Bind) -> &'a Term {
    let mut at = t;
    while let Term::Var(v) = at {
        match b.get(v) {
            Some(r) => at = r,
            None => break,
        }
    }
    at
}

/// Triangular-form unification.
fn unify(a: &Atom, c: &Atom) -> Option<Bind> {
    if a.predicate != c.predicate || a.args.len() != c.args.len() {
        return None;
    }
    let mut b = Bind::new();
    let mut todo: Vec<(Term, Term)> = a.args.iter().cloned().zip(c.args.iter().cloned()).collect();
    while let Some((x, y)) = todo.pop() {
        let (x, y) = (deref(&x, &b).clone(), deref(&y, &b).clone());
        match (&x, &y) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if occurs(v, t, &b) {
                    return None;
                }
                b.insert(v.clone(), t.clone());
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                todo.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
        }
    }
    Some(b)
}

/// One-way matching of `pat` onto `target`.
fn matches(pat: &Atom, target: &Atom) -> Option<Bind> {
    fn go(p: &Term, t: &Term, b: &mut Bind) -> bool {
        match p {
            Term::Var(v) => match b.get(v) {
                Some(prev) => prev == t,
                None => {
                    b.insert(v.clone(), t.clone());
                    true
                }
            },
            Term::App(f, xs) => match t {
                Term::App(g, ys) if f == g && xs.len() == ys.len() => xs.iter().zip(ys).all(|(x, y)| go(x, y, b)),
                _ => false,
            },
        }
    }
    if pat.predicate != target.predicate || pat.args.len() != target.args.len() {
        return None;
    }
    let mut b = Bind::new();
    pat.args.iter().zip(&target.args).all(|(x, y)| go(x, y, &mut b)).then_some(b)
}

fn apply_atom(a: &Atom, b: &Bind) -> Atom {
    Atom::new(a.predicate.clone(), a.args.iter().map(|t| walk(t, b)).collect())
}

#[derive(Clone)]
struct State {
    goals: Vec<Atom>,
    /// Current value of each query variable.
    answer: Vec<Term>,
    counter: usize,
}

impl State {
    fn rename(&mut self, c: &HornClause) -> HornClause {
        let mut map = std::collections::HashMap::new();
        for v in c.vars() {
            map.insert(v.to_string(), format!("?{}", self.counter));
            self.counter += 1;
        }
        c.rename(&map)
    }

    fn key(&self) -> Vec<Atom> {
        let mut atoms = self.goals.clone();
        atoms.push(Atom::new("$answer", self.answer.clone()));
        canonicalize(&atoms, &BTreeSet::new())
    }

    fn instantiate(&self, b: &Bind) -> (Vec<Atom>, Vec<Term>) {
        (
            self.goals.iter().map(|a| apply_atom(a, b)).collect(),
            self.answer.iter().map(|t| walk(t, b)).collect(),
        )
    }
}

/// Every term-matching successor over all selections and clauses.
fn tm_successors(p: &Program, s: &State) -> Vec<State> {
    let mut out = Vec::new();
    for i in 0..s.goals.len() {
        for c in &p.clauses {
            let mut next = s.clone();
            let inst = next.rename(c);
            if let Some(sigma) = matches(&inst.head, &s.goals[i]) {
                let body: Vec<Atom> = inst.body.iter().map(|a| apply_atom(a, &sigma)).collect();
                next.goals.splice(i..=i, body);
                out.push(next);
            }
        }
    }
    out
}

/// Every resolution (`resolve = true`) or substitutional successor.
fn unif_successors(p: &Program, s: &State, resolve: bool) -> Vec<State> {
    let mut out = Vec::new();
    for i in 0..s.goals.len() {
        for c in &p.clauses {
            let mut next = s.clone();
            let inst = next.rename(c);
            if let Some(b) = unify(&inst.head, &s.goals[i]) {
                let mut goals = s.goals.clone();
                if resolve {
                    goals.splice(i..=i, inst.body.iter().cloned());
                }
                next.goals = goals;
                let (g, a) = next.instantiate(&b);
                next.goals = g;
                next.answer = a;
                out.push(next);
            }
        }
    }
    out
}

/// All term-matching normal forms of `s`; `None` if some branch passes the cap.
fn tm_normal_forms(p: &Program, s: State) -> Option<Vec<State>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut layer = vec![s];
    for _ in 0..=ORACLE_TM_CAP {
        let mut next = Vec::new();
        let mut layer_seen = HashSet::new();
        for st in layer {
            let succ = tm_successors(p, &st);
            if succ.is_empty() {
                if seen.insert(st.key()) {
                    out.push(st);
                }
            } else {
                next.extend(succ.into_iter().filter(|n| layer_seen.insert(n.key())));
            }
        }
        if next.is_empty() {
            return Some(out);
        }
        layer = next;
    }
    None
}

/// Complete set of success bindings reachable within `depth` resolution
/// steps (unif steps, tm steps, or substitutional steps for LP-Struct),
/// over every selection and clause choice, canonically renamed.
pub fn oracle_run(p: &Program, q: &GoalSet, mode: Strategy, depth: usize) -> OracleResult {
    let qvars: Vec<String> = {
        let mut v: Vec<String> = q.vars().into_iter().map(str::to_string).collect();
        v.sort();
        v
    };
    let root = State {
        goals: q.0.clone(),
        answer: qvars.iter().map(|v| Term::var(v.clone())).collect(),
        counter: 0,
    };
    let mut result = OracleResult::default();
    let record = |s: &State, result: &mut OracleResult| {
        let b = Substitution::from_pairs(qvars.iter().cloned().zip(s.answer.iter().cloned()));
        result.answers.insert(canonical_answer(&b));
    };

    let mut layer = match mode {
        Strategy::Struct => match tm_normal_forms(p, root) {
            Some(v) => v,
            None => {
                result.truncated = true;
                Vec::new()
            }
        },
        _ => vec![root],
    };
    for level in 0..=depth {
        let remaining = depth - level;
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for s in layer {
            if s.goals.is_empty() {
                record(&s, &mut result);
                continue;
            }
            if remaining == 0 {
                continue;
            }
            match mode {
                Strategy::Unif | Strategy::Tm => {
                    let succ = if mode == Strategy::Unif {
                        unif_successors(p, &s, true)
                    } else {
                        tm_successors(p, &s)
                    };
                    for n in succ {
                        // Each step discharges at most one goal.
                        if n.goals.len() < remaining && seen.insert(n.key()) {
                            next.push(n);
                        }
                    }
                }
                Strategy::Struct => {
                    for n in unif_successors(p, &s, false) {
                        match tm_normal_forms(p, n) {
                            Some(nfs) => {
                                for nf in nfs {
                                    if seen.insert(nf.key()) {
                                        next.push(nf);
                                    }
                                }
                            }
                            None => result.truncated = true,
                        }
                    }
                }
            }
        }
        layer = next;
    }
    result
}

pub fn oracle_answers(p: &Program, q: &GoalSet, mode: Strategy, depth: usize) -> BTreeSet<Substitution> {
    oracle_run(p, q, mode, depth).answers
}
