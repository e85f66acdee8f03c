//! Substitutions, term matching and unification with occurs check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{Atom, GoalSet, HornClause, Term};

/// A finite map from variable names to terms. Identity bindings are never
/// stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(var: impl Into<String>, term: Term) -> Self {
        let mut s = Self::new();
        s.insert(var.into(), term);
        s
    }

    pub fn from_pairs<I, K>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, Term)>,
        K: Into<String>,
    {
        let mut s = Self::new();
        for (k, t) in pairs {
            s.insert(k.into(), t);
        }
        s
    }

    /// Adds a binding as-is (no resolution against existing bindings).
    /// Identity bindings are dropped.
    pub fn insert(&mut self, var: String, term: Term) {
        if matches!(&term, Term::Var(v) if *v == var) {
            self.bindings.remove(&var);
        } else {
            self.bindings.insert(var, term);
        }
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn range_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.bindings.values() {
            for v in t.vars() {
                out.insert(v.to_string());
            }
        }
        out
    }

    /// No variable of the domain occurs in any range term.
    pub fn is_idempotent(&self) -> bool {
        self.bindings
            .values()
            .all(|t| self.bindings.keys().all(|v| !t.occurs(v)))
    }

    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a str>) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(t) = self.bindings.get(v) {
                out.bindings.insert(v.to_string(), t.clone());
            }
        }
        out
    }

    pub fn apply<T: Substitute + ?Sized>(&self, x: &T) -> T::Output {
        x.substitute(self)
    }

    /// `compose(outer, inner)` applies `inner` first: for every term `t`,
    /// `compose(outer, inner)(t) == outer(inner(t))`.
    pub fn compose(outer: &Substitution, inner: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in &inner.bindings {
            out.insert(v.clone(), outer.apply(t));
        }
        for (v, t) in &outer.bindings {
            if !inner.bindings.contains_key(v) {
                out.insert(v.clone(), t.clone());
            }
        }
        out
    }

    /// Shorthand for `compose(self, inner)`.
    pub fn after(&self, inner: &Substitution) -> Substitution {
        Substitution::compose(self, inner)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}={t}")?;
        }
        f.write_str("}")
    }
}

pub trait Substitute {
    type Output;
    fn substitute(&self, s: &Substitution) -> Self::Output;
}

impl Substitute for Term {
    type Output = Term;
    fn substitute(&self, s: &Substitution) -> Term {
        match self {
            Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.substitute(s)).collect()),
        }
    }
}

impl Substitute for Atom {
    type Output = Atom;
    fn substitute(&self, s: &Substitution) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| a.substitute(s)).collect(),
        }
    }
}

impl Substitute for [Atom] {
    type Output = Vec<Atom>;
    fn substitute(&self, s: &Substitution) -> Vec<Atom> {
        self.iter().map(|a| a.substitute(s)).collect()
    }
}

impl Substitute for GoalSet {
    type Output = GoalSet;
    fn substitute(&self, s: &Substitution) -> GoalSet {
        GoalSet(self.0.substitute(s))
    }
}

impl Substitute for HornClause {
    type Output = HornClause;
    fn substitute(&self, s: &Substitution) -> HornClause {
        HornClause {
            label: self.label.clone(),
            body: self.body.substitute(s),
            head: self.head.substitute(s),
        }
    }
}

// ---------------------------------------------------------------------------
// Term matching

/// One-sided matching: a substitution `σ` with `σ(pattern) == target` whose
/// domain lies in the pattern's variables. Target variables are never
/// instantiated.
pub fn match_atom(pattern: &Atom, target: &Atom) -> Option<Substitution> {
    if pattern.predicate != target.predicate || pattern.arity() != target.arity() {
        return None;
    }
    let mut acc = BTreeMap::new();
    for (p, t) in pattern.args.iter().zip(&target.args) {
        match_into(p, t, &mut acc)?;
    }
    Some(Substitution::from_pairs(acc))
}

pub fn match_term(pattern: &Term, target: &Term) -> Option<Substitution> {
    let mut acc = BTreeMap::new();
    match_into(pattern, target, &mut acc)?;
    Some(Substitution::from_pairs(acc))
}

/// Matching of the argument lists position by position; the per-position
/// matchers are merged with `[t1/x] ∪ [t2/x] = [t1/x]` only when `t1 ≡ t2`.
pub fn match_terms(patterns: &[Term], targets: &[Term]) -> Option<Substitution> {
    if patterns.len() != targets.len() {
        return None;
    }
    let mut acc = BTreeMap::new();
    for (p, t) in patterns.iter().zip(targets) {
        match_into(p, t, &mut acc)?;
    }
    Some(Substitution::from_pairs(acc))
}

fn match_into(pattern: &Term, target: &Term, acc: &mut BTreeMap<String, Term>) -> Option<()> {
    match (pattern, target) {
        (Term::Var(x), _) => match acc.get(x) {
            Some(bound) if bound != target => None,
            Some(_) => Some(()),
            None => {
                acc.insert(x.clone(), target.clone());
                Some(())
            }
        },
        (Term::App(f, ps), Term::App(g, ts)) if f == g && ps.len() == ts.len() => {
            for (p, t) in ps.iter().zip(ts) {
                match_into(p, t, acc)?;
            }
            Some(())
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Unification

/// Most general unifier of two atoms, or `None` on a clash or an occurs-check
/// violation. Arguments are processed left to right, each pair under the
/// substitution accumulated so far. When both sides are variables the
/// left-hand variable is bound, so `unify(head, goal)` keeps goal variables.
pub fn unify_atoms(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.predicate != b.predicate || a.arity() != b.arity() {
        return None;
    }
    unify_lists(&a.args, &b.args)
}

pub fn unify_terms(a: &Term, b: &Term) -> Option<Substitution> {
    let mut acc = Substitution::new();
    unify_into(a, b, &mut acc)?;
    Some(acc)
}

pub fn unify_lists(xs: &[Term], ys: &[Term]) -> Option<Substitution> {
    if xs.len() != ys.len() {
        return None;
    }
    let mut acc = Substitution::new();
    for (x, y) in xs.iter().zip(ys) {
        unify_into(x, y, &mut acc)?;
    }
    Some(acc)
}

/// Unifies `acc(a)` with `acc(b)` and extends `acc`; `acc` stays idempotent.
fn unify_into(a: &Term, b: &Term, acc: &mut Substitution) -> Option<()> {
    let a = acc.apply(a);
    let b = acc.apply(b);
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => Some(()),
        (Term::Var(x), t) | (t, Term::Var(x)) => {
            if t.occurs(x) {
                return None;
            }
            let step = Substitution::singleton(x.clone(), t.clone());
            *acc = Substitution::compose(&step, acc);
            Some(())
        }
        (Term::App(f, xs), Term::App(g, ys)) => {
            if f != g || xs.len() != ys.len() {
                return None;
            }
            for (x, y) in xs.iter().zip(ys) {
                unify_into(x, y, acc)?;
            }
            Some(())
        }
    }
}

/// True iff `specific` is an instance of `general` on `vars`: some `δ` has
/// `δ(general(x)) == specific(x)` for every `x` in `vars`.
pub fn is_instance_on<'a>(
    specific: &Substitution,
    general: &Substitution,
    vars: impl IntoIterator<Item = &'a str>,
) -> bool {
    let (gs, ss): (Vec<Term>, Vec<Term>) = vars
        .into_iter()
        .map(|v| {
            let x = Term::var(v);
            (general.apply(&x), specific.apply(&x))
        })
        .unzip();
    match_terms(&gs, &ss).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_atom, parse_term};

    fn atom(s: &str) -> Atom {
        parse_atom(s).unwrap()
    }

    fn term(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn subst(pairs: &[(&str, &str)]) -> Substitution {
        Substitution::from_pairs(pairs.iter().map(|(v, t)| (*v, term(t))))
    }

    #[test]
    fn apply_examples() {
        let s = subst(&[("X", "node1")]);
        assert_eq!(s.apply(&atom("connect(X,Y)")), atom("connect(node1,Y)"));
        assert_eq!(Substitution::new().apply(&atom("p(X,f(Y))")), atom("p(X,f(Y))"));
        let s = subst(&[("Y", "cons(X2,Y2)")]);
        assert_eq!(s.apply(&atom("stream(Y)")), atom("stream(cons(X2,Y2))"));
    }

    #[test]
    fn identity_bindings_dropped() {
        let s = subst(&[("X", "X"), ("Y", "a")]);
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn compose_identity_and_disjoint() {
        let s = subst(&[("X", "f(Y)")]);
        assert_eq!(Substitution::compose(&Substitution::new(), &s), s);
        assert_eq!(Substitution::compose(&s, &Substitution::new()), s);
        let c = Substitution::compose(&subst(&[("Y", "node3")]), &subst(&[("X", "node1")]));
        assert_eq!(c.apply(&atom("connect(X,Y)")), atom("connect(node1,node3)"));
    }

    #[test]
    fn compose_applies_inner_first() {
        let inner = subst(&[("X", "f(Y)")]);
        let outer = subst(&[("Y", "a")]);
        let c = Substitution::compose(&outer, &inner);
        assert_eq!(c, subst(&[("X", "f(a)"), ("Y", "a")]));
        assert!(c.is_idempotent());
    }

    #[test]
    fn display_sorted() {
        let s = subst(&[("Y", "node3"), ("X", "node1")]);
        assert_eq!(s.to_string(), "{X=node1, Y=node3}");
        assert_eq!(Substitution::new().to_string(), "{}");
    }

    #[test]
    fn matching() {
        let s = match_atom(&atom("blist(cons(X1,Y1))"), &atom("blist(cons(X,Y))")).unwrap();
        assert_eq!(s, subst(&[("X1", "X"), ("Y1", "Y")]));
        assert!(match_atom(&atom("p(X,X)"), &atom("p(a,b)")).is_none());
        assert!(match_atom(&atom("p(c)"), &atom("p(X)")).is_none());
        assert_eq!(match_atom(&atom("p(X)"), &atom("p(c)")).unwrap(), subst(&[("X", "c")]));
        assert!(match_atom(&atom("p(X)"), &atom("q(X)")).is_none());
        // consistent union
        assert_eq!(
            match_atom(&atom("p(X,X)"), &atom("p(f(Y),f(Y))")).unwrap(),
            subst(&[("X", "f(Y)")])
        );
    }

    #[test]
    fn unification() {
        let g = unify_atoms(&atom("connect(X1,Z1)"), &atom("connect(X,Y)")).unwrap();
        assert_eq!(g, subst(&[("X1", "X"), ("Z1", "Y")]));
        assert!(unify_atoms(&atom("p(X)"), &atom("p(f(X))")).is_none());
        assert!(unify_atoms(&atom("p(X,X)"), &atom("p(a,b)")).is_none());
        let g = unify_atoms(&atom("p(X,b)"), &atom("p(a,Y)")).unwrap();
        assert_eq!(g, subst(&[("X", "a"), ("Y", "b")]));
    }

    #[test]
    fn unifier_threads_state() {
        let g = unify_atoms(&atom("p(X,f(X),Y)"), &atom("p(Z,Y,f(Z))")).unwrap();
        assert!(g.is_idempotent());
        assert_eq!(
            g.apply(&atom("p(X,f(X),Y)")),
            g.apply(&atom("p(Z,Y,f(Z))"))
        );
        // occurs check through accumulated bindings
        assert!(unify_atoms(&atom("p(X,Y)"), &atom("p(Y,f(X))")).is_none());
    }

    #[test]
    fn instance_check() {
        let general = subst(&[("X", "f(Y)")]);
        let specific = subst(&[("X", "f(a)"), ("Y", "a")]);
        assert!(is_instance_on(&specific, &general, ["X", "Y"]));
        assert!(!is_instance_on(&general, &specific, ["X", "Y"]));
    }
}
