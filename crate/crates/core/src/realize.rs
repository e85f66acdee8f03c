//! The realizability transformation, the non-overlapping check and
//! productivity certificates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{derivation_fresh, step_tm, BudgetKind, DerivationTrace, Outcome};
use crate::proof::{represent, Judgement, ProofError, RepEnv};
use crate::subst::{match_atom, unify_atoms, Substitution};
use crate::syntax::{Atom, Fresh, GoalSet, HornClause, Program, Term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameScheme {
    /// Prefix of proof functors with arguments.
    pub fun_prefix: String,
    /// Prefix of nullary proof functors.
    pub const_prefix: String,
    /// Prefix of proof-argument variables added to clauses and judgements.
    pub proof_arg_prefix: String,
    /// Prefix of proof-argument variables added to queries.
    pub query_prefix: String,
}

impl Default for NameScheme {
    fn default() -> Self {
        NameScheme {
            fun_prefix: "f_".into(),
            const_prefix: "c_".into(),
            proof_arg_prefix: "U".into(),
            query_prefix: "_P".into(),
        }
    }
}

impl NameScheme {
    pub fn proof_fun(&self, label: &str, arity: usize) -> String {
        if arity == 0 {
            format!("{}{label}", self.const_prefix)
        } else {
            format!("{}{label}", self.fun_prefix)
        }
    }

    /// Labels whose proof functor already occurs in the program.
    pub fn collisions(&self, p: &Program) -> Vec<String> {
        let functors = p.functors();
        let mut out = Vec::new();
        for c in &p.clauses {
            for arity in [0, 1] {
                let name = self.proof_fun(&c.label, arity);
                if functors.contains_key(&name) && !out.contains(&name) {
                    out.push(name);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RealizeError {
    #[error("proof functor `{0}` already occurs in the program")]
    Collision(String),
    #[error("judgement has {binders} binders for {premises} premises")]
    BinderCount { binders: usize, premises: usize },
    #[error(transparent)]
    Proof(#[from] ProofError),
    #[error("measure position {position} is out of range for {predicate}/{arity}")]
    MeasureOutOfRange { predicate: String, arity: usize, position: usize },
}

/// `κ: B[f_κ(y1,…,ym)] <= A1[y1], …, Am[ym]`.
pub fn transform_clause(c: &HornClause, scheme: &NameScheme) -> HornClause {
    let mut fresh = Fresh::new(&scheme.proof_arg_prefix, c.vars()).starting_at(1);
    let ys: Vec<Term> = c.body.iter().map(|_| Term::var(fresh.next_name())).collect();
    let body = c.body.iter().zip(&ys).map(|(a, y)| a.extended(y.clone())).collect();
    let head = c.head.extended(Term::app(scheme.proof_fun(&c.label, ys.len()), ys));
    HornClause::new(c.label.clone(), body, head)
}

pub fn transform_program(p: &Program, scheme: &NameScheme) -> Result<Program, RealizeError> {
    if let Some(name) = scheme.collisions(p).into_iter().next() {
        return Err(RealizeError::Collision(name));
    }
    Ok(Program::new(p.clauses.iter().map(|c| transform_clause(c, scheme)).collect()))
}

/// Adds a distinct fresh proof variable to every atom; returns the new goals
/// and the proof variables in atom order.
pub fn transform_query_vars(q: &GoalSet, scheme: &NameScheme) -> (GoalSet, Vec<String>) {
    let mut fresh = Fresh::new(&scheme.query_prefix, q.vars());
    let ys: Vec<String> = q.iter().map(|_| fresh.next_name()).collect();
    let goals = q.iter().zip(&ys).map(|(a, y)| a.extended(Term::var(y.clone()))).collect::<Vec<_>>();
    (GoalSet(goals), ys)
}

pub fn transform_query(q: &GoalSet, scheme: &NameScheme) -> GoalSet {
    transform_query_vars(q, scheme).0
}

/// `λa̲.n : A1,…,Am ⇒ B` becomes `λa̲.n : A1[y1],…,Am[ym] ⇒ B[⟦n⟧_{[y̲/a̲]}]`.
pub fn transform_judgement(j: &Judgement, scheme: &NameScheme) -> Result<Judgement, RealizeError> {
    let (binders, n) = j.proof.binders();
    if binders.len() != j.body.len() {
        return Err(RealizeError::BinderCount {
            binders: binders.len(),
            premises: j.body.len(),
        });
    }
    let mut vars = Vec::new();
    for a in j.body.iter().chain(std::iter::once(&j.head)) {
        a.collect_vars(&mut vars);
    }
    let mut fresh = Fresh::new(&scheme.proof_arg_prefix, vars).starting_at(1);
    let ys: Vec<Term> = j.body.iter().map(|_| Term::var(fresh.next_name())).collect();
    let env: RepEnv = binders.iter().map(|b| b.to_string()).zip(ys.iter().cloned()).collect();
    let rep = represent(n, &env, scheme)?;
    Ok(Judgement::new(
        j.proof.clone(),
        j.body.iter().zip(ys).map(|(a, y)| a.extended(y)).collect(),
        j.head.extended(rep),
    ))
}

// ---------------------------------------------------------------------------
// Non-overlapping

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub first: String,
    pub second: String,
    pub unifier: Substitution,
}

impl fmt::Display for Overlap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.first, self.second, self.unifier)
    }
}

/// No two distinct clause heads have a common instance; otherwise the first
/// overlapping pair in program order.
pub fn check_non_overlapping(p: &Program) -> Result<(), Overlap> {
    for (i, a) in p.clauses.iter().enumerate() {
        for b in &p.clauses[i + 1..] {
            if a.head.predicate != b.head.predicate || a.head.arity() != b.head.arity() {
                continue;
            }
            let renamed = Fresh::new("_H", b.head.vars()).rename_clause(&HornClause::new("", Vec::new(), a.head.clone()));
            if let Some(u) = unify_atoms(&renamed.head, &b.head) {
                return Err(Overlap {
                    first: a.label.clone(),
                    second: b.label.clone(),
                    unifier: u,
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Productivity

/// Measured argument per predicate (0-based); absent predicates use their
/// last argument.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureSpec(pub BTreeMap<String, usize>);

impl MeasureSpec {
    pub fn last() -> Self {
        MeasureSpec::default()
    }

    pub fn position(&self, predicate: &str, arity: usize) -> Option<usize> {
        match self.0.get(predicate) {
            Some(&p) => Some(p),
            None => arity.checked_sub(1),
        }
    }

    fn measured<'a>(&self, a: &'a Atom) -> Option<&'a Term> {
        self.position(&a.predicate, a.arity()).and_then(|i| a.args.get(i))
    }

    /// Resolved positions for every predicate of `p`.
    pub fn resolve(&self, p: &Program) -> Result<BTreeMap<String, usize>, RealizeError> {
        let mut out = BTreeMap::new();
        for (pred, arity) in p.predicates() {
            if let Some(&pos) = self.0.get(&pred) {
                if pos >= arity {
                    return Err(RealizeError::MeasureOutOfRange {
                        predicate: pred,
                        arity,
                        position: pos,
                    });
                }
            }
            if let Some(pos) = self.position(&pred, arity) {
                out.insert(pred, pos);
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    /// Every body atom's measured argument is a strict subterm of the head's.
    MeasureDecreasing,
    /// No self-embedding found up to `depth` from the listed queries.
    BoundedEvidence { depth: usize, queries: Vec<Atom> },
    /// A term-matching lineage in which an atom is an instance of one of its
    /// ancestors, so the reduction can be repeated forever.
    Refuted { witness: Box<DerivationTrace> },
    /// The exploration hit its node cap first.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// 0-based measured position per predicate.
    pub positions: BTreeMap<String, usize>,
}

impl Certificate {
    pub fn is_measure_decreasing(&self) -> bool {
        matches!(self.kind, CertificateKind::MeasureDecreasing)
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self.kind, CertificateKind::Refuted { .. })
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let positions: Vec<String> = self.positions.iter().map(|(p, i)| format!("{p}:{}", i + 1)).collect();
        match &self.kind {
            CertificateKind::MeasureDecreasing => write!(f, "measure-decreasing positions={{{}}}", positions.join(", ")),
            CertificateKind::BoundedEvidence { depth, queries } => {
                let qs: Vec<String> = queries.iter().map(ToString::to_string).collect();
                write!(f, "bounded-evidence depth={depth} queries={{{}}}", qs.join(", "))
            }
            CertificateKind::Refuted { witness } => {
                write!(f, "refuted loop={} steps", witness.steps.len())
            }
            CertificateKind::Unknown => f.write_str("unknown"),
        }
    }
}

/// Maximum number of lineage nodes explored while looking for a refutation.
pub const PRODUCTIVITY_NODE_CAP: usize = 20_000;

pub fn measure_decreasing(p: &Program, spec: &MeasureSpec) -> bool {
    p.clauses.iter().all(|c| {
        c.body.iter().all(|b| match (spec.measured(&c.head), spec.measured(b)) {
            (Some(h), Some(t)) => h.has_strict_subterm(t),
            _ => false,
        })
    })
}

pub fn check_productivity(p: &Program, spec: &MeasureSpec, bound: usize) -> Result<Certificate, RealizeError> {
    let positions = spec.resolve(p)?;
    if measure_decreasing(p, spec) {
        return Ok(Certificate {
            kind: CertificateKind::MeasureDecreasing,
            positions,
        });
    }
    let mut queries = Vec::new();
    let mut budget = PRODUCTIVITY_NODE_CAP;
    let mut exhausted = false;
    for (pred, arity) in p.predicates() {
        let query = Atom::new(pred, (1..=arity).map(|i| Term::var(format!("X{i}"))).collect());
        match find_self_embedding(p, &query, bound, &mut budget) {
            Search::Found(path) => {
                return Ok(Certificate {
                    kind: CertificateKind::Refuted {
                        witness: Box::new(witness_trace(p, &query, &path)),
                    },
                    positions,
                });
            }
            Search::Capped => exhausted = true,
            Search::None => {}
        }
        queries.push(query);
    }
    let kind = if exhausted {
        CertificateKind::Unknown
    } else {
        CertificateKind::BoundedEvidence { depth: bound, queries }
    };
    Ok(Certificate { kind, positions })
}

enum Search {
    Found(Vec<(String, usize)>),
    Capped,
    None,
}

/// (clause, body position taken) per lineage step.
type LineagePath = Vec<(String, usize)>;

/// Depth-first over single-atom lineages.
fn find_self_embedding(p: &Program, query: &Atom, bound: usize, budget: &mut usize) -> Search {
    let mut fresh = Fresh::new("_L", query.vars());
    let mut stack: Vec<(Vec<Atom>, LineagePath)> = vec![(vec![query.clone()], Vec::new())];
    let mut capped = false;
    while let Some((lineage, path)) = stack.pop() {
        let atom = lineage.last().expect("nonempty lineage");
        if path.len() >= bound {
            continue;
        }
        for c in &p.clauses {
            if c.head.predicate != atom.predicate || c.head.arity() != atom.arity() {
                continue;
            }
            let inst = fresh.rename_clause(c);
            let Some(sigma) = match_atom(&inst.head, atom) else {
                continue;
            };
            for (j, b) in inst.body.iter().enumerate() {
                let child = sigma.apply(b);
                let mut next_path = path.clone();
                next_path.push((c.label.clone(), j));
                if lineage.iter().any(|anc| match_atom(anc, &child).is_some()) {
                    return Search::Found(next_path);
                }
                if *budget == 0 {
                    capped = true;
                    continue;
                }
                *budget -= 1;
                let mut next = lineage.clone();
                next.push(child);
                stack.push((next, next_path));
            }
        }
    }
    if capped {
        Search::Capped
    } else {
        Search::None
    }
}

fn witness_trace(p: &Program, query: &Atom, path: &[(String, usize)]) -> DerivationTrace {
    let initial = GoalSet(vec![query.clone()]);
    let mut fresh = derivation_fresh(&initial);
    let mut goals = initial.clone();
    let mut at = 0;
    let mut steps = Vec::new();
    let state = Substitution::new();
    for (label, j) in path {
        let step = step_tm(p, &goals, &state, at, label, &mut fresh).expect("lineage step replays");
        goals = step.goals_after.clone();
        at += j;
        steps.push(step);
    }
    DerivationTrace {
        program: p.clone(),
        initial,
        steps,
        outcome: Outcome::BudgetExhausted(BudgetKind::TmDivergence),
    }
}

/// Multiset of measured arguments of a goal set.
pub fn measure_multiset(goals: &[Atom], spec: &MeasureSpec) -> Vec<Term> {
    goals.iter().filter_map(|a| spec.measured(a).cloned()).collect()
}

/// Multiset extension of the strict-subterm order: after cancelling common
/// elements, something was removed and every added element is a strict
/// subterm of a removed one.
pub fn multiset_decreases(before: &[Term], after: &[Term]) -> bool {
    let mut counts: HashMap<&Term, isize> = HashMap::new();
    for t in before {
        *counts.entry(t).or_default() += 1;
    }
    for t in after {
        *counts.entry(t).or_default() -= 1;
    }
    let removed: Vec<&Term> = counts.iter().filter(|(_, &n)| n > 0).map(|(t, _)| *t).collect();
    let added: BTreeSet<&Term> = counts.iter().filter(|(_, &n)| n < 0).map(|(t, _)| *t).collect();
    !removed.is_empty() && added.iter().all(|y| removed.iter().any(|x| x.has_strict_subterm(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proof::check_judgement;
    use crate::syntax::{parse_program, parse_query};

    const CONNECT: &str = "k1: connect(X,Z) <= connect(X,Y), connect(Y,Z).\n\
        k2: connect(node1,node2).\n\
        k3: connect(node2,node3).\n";

    #[test]
    fn transform_connect() {
        let p = parse_program(CONNECT).unwrap();
        let t = transform_program(&p, &NameScheme::default()).unwrap();
        assert_eq!(
            t.to_string(),
            "k1: connect(X,Z,f_k1(U1,U2)) <= connect(X,Y,U1), connect(Y,Z,U2).\n\
             k2: connect(node1,node2,c_k2).\n\
             k3: connect(node2,node3,c_k3).\n"
        );
        assert!(transform_program(&Program::default(), &NameScheme::default()).unwrap().is_empty());
    }

    #[test]
    fn transform_loop_clause() {
        let p = parse_program("k: p(X) <= p(X).").unwrap();
        let t = transform_program(&p, &NameScheme::default()).unwrap();
        assert_eq!(t.to_string(), "k: p(X,f_k(U1)) <= p(X,U1).\n");
    }

    #[test]
    fn proof_args_skip_clause_variables() {
        let p = parse_program("k: p(U1) <= q(U1).").unwrap();
        let t = transform_program(&p, &NameScheme::default()).unwrap();
        assert_eq!(t.to_string(), "k: p(U1,f_k(U2)) <= q(U1,U2).\n");
    }

    #[test]
    fn collision() {
        let p = parse_program("k1: p(f_k1(a)).").unwrap();
        assert_eq!(
            transform_program(&p, &NameScheme::default()),
            Err(RealizeError::Collision("f_k1".into()))
        );
    }

    #[test]
    fn query_transform() {
        let s = NameScheme::default();
        assert_eq!(transform_query(&parse_query("connect(X,Y)").unwrap(), &s).to_string(), "{connect(X,Y,_P0)}");
        assert!(transform_query(&GoalSet::default(), &s).is_empty());
        let two = transform_query(&parse_query("p(X), q(_P0)").unwrap(), &s);
        assert_eq!(two.to_string(), "{p(X,_P1), q(_P0,_P2)}");
    }

    #[test]
    fn judgement_transform() {
        let s = NameScheme::default();
        let j = Judgement::parse("\\b. (k1 b) k2 : connect(node2,Z) => connect(node1,Z)").unwrap();
        let t = transform_judgement(&j, &s).unwrap();
        assert_eq!(t.to_string(), "\\b. (k1 b) k2 : connect(node2,Z,U1) => connect(node1,Z,f_k1(U1,c_k2))");
        let j = Judgement::parse("k2 : => connect(node1,node2)").unwrap();
        assert_eq!(transform_judgement(&j, &s).unwrap().to_string(), "k2 : => connect(node1,node2,c_k2)");
        let j = Judgement::parse("\\a. a : p(X) => p(X)").unwrap();
        assert_eq!(transform_judgement(&j, &s).unwrap().to_string(), "\\a. a : p(X,U1) => p(X,U1)");
    }

    #[test]
    fn transformed_judgements_check() {
        let s = NameScheme::default();
        let p = parse_program(CONNECT).unwrap();
        let fp = transform_program(&p, &s).unwrap();
        for text in [
            "(k1 k2) k3 : => connect(node1,node3)",
            "k2 : => connect(node1,node2)",
            "\\b. (k1 k2) b : connect(node2,Z) => connect(node1,Z)",
        ] {
            let j = Judgement::parse(text).unwrap();
            assert_eq!(check_judgement(&p, &j), Ok(()), "{text}");
            let t = transform_judgement(&j, &s).unwrap();
            assert_eq!(check_judgement(&fp, &t), Ok(()), "{t}");
        }
    }

    #[test]
    fn overlap() {
        let p = parse_program("k1: p(c).\nk2: p(X) <= q(X).").unwrap();
        let w = check_non_overlapping(&p).unwrap_err();
        assert_eq!((w.first.as_str(), w.second.as_str()), ("k1", "k2"));
        assert_eq!(w.unifier.to_string(), "{X=c}");
        let fp = transform_program(&parse_program(CONNECT).unwrap(), &NameScheme::default()).unwrap();
        assert!(check_non_overlapping(&fp).is_ok());
        assert!(check_non_overlapping(&parse_program("k: p(X) <= p(X).").unwrap()).is_ok());
    }

    #[test]
    fn overlap_renames_apart() {
        // p(X,a) and p(b,X) share a common instance only after renaming.
        let p = parse_program("k1: p(X,a).\nk2: p(b,X).").unwrap();
        assert!(check_non_overlapping(&p).is_err());
    }

    #[test]
    fn productivity() {
        let p = parse_program(CONNECT).unwrap();
        let fp = transform_program(&p, &NameScheme::default()).unwrap();
        assert!(check_productivity(&fp, &MeasureSpec::last(), 8).unwrap().is_measure_decreasing());
        let cert = check_productivity(&p, &MeasureSpec::last(), 8).unwrap();
        match &cert.kind {
            CertificateKind::Refuted { witness } => {
                assert!(crate::engine::replay(witness));
                assert!(!witness.steps.is_empty());
            }
            other => panic!("expected refutation, got {other:?}"),
        }
        let stream = parse_program("k1: stream(cons(X,Y)) <= bit(X), stream(Y).\nk2: bit(0).\nk3: bit(1).").unwrap();
        let c = check_productivity(&stream, &MeasureSpec::last(), 8).unwrap();
        assert!(c.is_measure_decreasing());
        assert_eq!(c.positions["stream"], 0);
        assert_eq!(c.to_string(), "measure-decreasing positions={bit:1, stream:1}");
    }

    #[test]
    fn productivity_bounded_evidence() {
        let p = parse_program("k1: p(a) <= q(X).\nk2: q(b).").unwrap();
        let c = check_productivity(&p, &MeasureSpec::last(), 5).unwrap();
        assert!(matches!(c.kind, CertificateKind::BoundedEvidence { depth: 5, .. }));
    }

    #[test]
    fn measure_out_of_range() {
        let p = parse_program("k: p(a).").unwrap();
        let spec = MeasureSpec(BTreeMap::from([("p".to_string(), 3)]));
        assert!(matches!(check_productivity(&p, &spec, 3), Err(RealizeError::MeasureOutOfRange { .. })));
    }

    #[test]
    fn multiset_order() {
        let t = |s: &str| crate::syntax::parse_term(s).unwrap();
        assert!(multiset_decreases(&[t("f(a,b)")], &[t("a"), t("b")]));
        assert!(multiset_decreases(&[t("f(a)"), t("c")], &[t("a"), t("c")]));
        assert!(!multiset_decreases(&[t("a")], &[t("a")]));
        assert!(!multiset_decreases(&[t("a")], &[t("b")]));
    }
}
