//! Differential checks of the operational and proof-theoretic properties
//! relating LP-Unif, LP-TM, LP-Struct and the realizability transform.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use structres::engine::{
    canonical_answer, derivation_fresh, fused_pairs, replay_checked, solve, step_sub, step_tm, step_unif, tm_normalize, Budget,
    DerivationStep, DerivationTrace, Search, Selection, SolveOptions, SolveResult, StepMode, Strategy, TmRun,
};
use structres::proof::{beta_normalize, check_judgement, extract_proof, is_first_order, represent, RepEnv, DEFAULT_FUEL};
use structres::realize::{
    check_non_overlapping, check_productivity, measure_multiset, multiset_decreases, transform_program,
    transform_query_vars, MeasureSpec, NameScheme,
};
use structres::subst::Substitution;
use structres::syntax::{alpha_eq_atoms, Atom, Fresh, GoalSet, Program, Term};

use crate::oracle::oracle_run;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    /// LP-Struct and LP-Unif agree on transformed programs.
    Equiv,
    /// The transform preserves LP-Unif answers and derivation lengths.
    Preservation,
    /// Proof arguments record normalised proof terms.
    Record,
    /// Stepwise simulation under non-overlap and productivity.
    Stepwise,
    /// Extracted proofs of LP-Unif and LP-TM successes check.
    Soundness,
    /// Term matching strictly decreases the measure on transformed programs.
    Productivity,
    /// A unif step is a substitutional step followed by a term-matching step.
    Decomposition,
    /// Engine agrees with the brute-force enumerator.
    Oracle,
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::Equiv,
        TheoremId::Preservation,
        TheoremId::Record,
        TheoremId::Stepwise,
        TheoremId::Soundness,
        TheoremId::Productivity,
        TheoremId::Decomposition,
        TheoremId::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Equiv => "equiv",
            TheoremId::Preservation => "preservation",
            TheoremId::Record => "record",
            TheoremId::Stepwise => "stepwise",
            TheoremId::Soundness => "soundness",
            TheoremId::Productivity => "productivity",
            TheoremId::Decomposition => "decomposition",
            TheoremId::Oracle => "oracle",
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TheoremId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TheoremId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown theorem `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Refuted { counterexample: Vec<DerivationTrace> },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn is_holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }

    fn inconclusive(reason: impl Into<String>) -> Self {
        Verdict::Inconclusive { reason: reason.into() }
    }

    fn refuted(traces: impl IntoIterator<Item = DerivationTrace>) -> Self {
        Verdict::Refuted {
            counterexample: traces.into_iter().collect(),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Holds => f.write_str("holds"),
            Verdict::Refuted { .. } => f.write_str("refuted"),
            Verdict::Inconclusive { reason } => write!(f, "inconclusive ({reason})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    /// Seed of the corpus item, if any.
    pub seed: Option<u64>,
    pub program: Program,
    pub query: GoalSet,
    pub verdict: Verdict,
    pub details: Vec<String>,
}

/// Bounds shared by both sides of every comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckBudget {
    /// Resolution depth (unif steps, or substitutional steps for LP-Struct).
    pub depth: usize,
    pub max_steps: usize,
    pub max_tm_steps: usize,
    /// Cap on LP-Struct states visited by the stepwise and measure checks.
    pub max_states: usize,
}

impl Default for CheckBudget {
    fn default() -> Self {
        CheckBudget {
            depth: 6,
            max_steps: 20_000,
            max_tm_steps: 200,
            max_states: 200,
        }
    }
}

const SOLUTION_CAP: usize = 100_000;

impl CheckBudget {
    fn options(&self) -> SolveOptions {
        SolveOptions {
            budget: Budget {
                max_steps: self.max_steps,
                max_tm_steps: self.max_tm_steps,
                max_solutions: SOLUTION_CAP,
                max_depth: Some(self.depth),
            },
            selection: Selection::Leftmost,
            search: Search::DepthFirst,
        }
    }
}

fn run(p: &Program, q: &GoalSet, strategy: Strategy, b: &CheckBudget) -> SolveResult {
    solve(p, q, strategy, &b.options())
}

fn complete(r: &SolveResult) -> bool {
    r.exhaustive() && r.answers.len() < SOLUTION_CAP
}

fn answer_key(bindings: &Substitution, vars: &[&str]) -> Substitution {
    canonical_answer(&bindings.restrict(vars.iter().copied()))
}

fn success_set(r: &SolveResult, vars: &[&str]) -> BTreeSet<Substitution> {
    r.successes().map(|a| answer_key(&a.bindings, vars)).collect()
}

fn render_set(s: &BTreeSet<Substitution>) -> String {
    let items: Vec<String> = s.iter().map(ToString::to_string).collect();
    format!("[{}]", items.join(" "))
}

fn report(theorem: TheoremId, p: &Program, q: &GoalSet, verdict: Verdict, details: Vec<String>) -> TheoremReport {
    TheoremReport {
        theorem,
        seed: None,
        program: p.clone(),
        query: q.clone(),
        verdict,
        details,
    }
}

fn transformed(p: &Program, q: &GoalSet) -> Result<(Program, GoalSet, Vec<String>), String> {
    let s = NameScheme::default();
    let fp = transform_program(p, &s).map_err(|e| e.to_string())?;
    let (fq, ys) = transform_query_vars(q, &s);
    Ok((fp, fq, ys))
}

/// Success traces whose answers are missing on the other side, falling back
/// to the first dead end when a side has no success at all.
fn witnesses(r: &SolveResult, vars: &[&str], other: &BTreeSet<Substitution>) -> Vec<DerivationTrace> {
    let mut out: Vec<DerivationTrace> = r
        .successes()
        .filter(|a| !other.contains(&answer_key(&a.bindings, vars)))
        .map(|a| a.trace.clone())
        .take(3)
        .collect();
    if r.successes().next().is_none() {
        out.extend(r.dead_end.clone());
    }
    out
}

/// Runs LP-Unif and LP-Struct on `q` as given; `p` is expected to be the
/// transformed program (pass a raw one to observe the failure on overlaps).
pub fn check_equiv_struct_unif(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let vars = q.vars();
    let unif = run(p, q, Strategy::Unif, b);
    let strc = run(p, q, Strategy::Struct, b);
    let (su, ss) = (success_set(&unif, &vars), success_set(&strc, &vars));
    let mut details = vec![format!("unif={}", render_set(&su)), format!("struct={}", render_set(&ss))];
    let verdict = if !complete(&unif) || !complete(&strc) {
        if su != ss && (complete(&unif) || complete(&strc)) && !su.is_subset(&ss) && !ss.is_subset(&su) {
            details.push("answer sets disagree beyond truncation".into());
            Verdict::refuted(witnesses(&unif, &vars, &ss).into_iter().chain(witnesses(&strc, &vars, &su)))
        } else {
            Verdict::inconclusive("search budget")
        }
    } else if su != ss {
        Verdict::refuted(witnesses(&unif, &vars, &ss).into_iter().chain(witnesses(&strc, &vars, &su)))
    } else if let Some(bad) = strc.successes().find(|a| fused_pairs(&a.trace).is_none()) {
        details.push("struct success is not an alternation of substitutional and term-matching steps".into());
        Verdict::refuted([bad.trace.clone()])
    } else if su.is_empty() && (unif.depth_cut || strc.depth_cut) {
        Verdict::inconclusive("no answers within depth")
    } else {
        Verdict::Holds
    };
    report(TheoremId::Equiv, p, q, verdict, details)
}

/// [`check_equiv_struct_unif`] on the transformed program and query.
pub fn check_equiv_after_transform(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    match transformed(p, q) {
        Ok((fp, fq, _)) => {
            let mut r = check_equiv_struct_unif(&fp, &fq, b);
            r.program = p.clone();
            r.query = q.clone();
            r
        }
        Err(e) => report(TheoremId::Equiv, p, q, Verdict::inconclusive(e), Vec::new()),
    }
}

/// LP-Unif answers (with derivation lengths) of `q` under `p` and of the
/// transformed query under the transformed program coincide.
pub fn check_preservation(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let (fp, fq, _) = match transformed(p, q) {
        Ok(t) => t,
        Err(e) => return report(TheoremId::Preservation, p, q, Verdict::inconclusive(e), Vec::new()),
    };
    let vars = q.vars();
    let raw = run(p, q, Strategy::Unif, b);
    let tr = run(&fp, &fq, Strategy::Unif, b);
    let multiset = |r: &SolveResult| {
        let mut v: Vec<(Substitution, usize)> = r.successes().map(|a| (answer_key(&a.bindings, &vars), a.depth())).collect();
        v.sort();
        v
    };
    let (mr, mt) = (multiset(&raw), multiset(&tr));
    let details = vec![
        format!("raw={} derivations, {} answers", mr.len(), success_set(&raw, &vars).len()),
        format!("transformed={} derivations, {} answers", mt.len(), success_set(&tr, &vars).len()),
    ];
    let verdict = if !complete(&raw) || !complete(&tr) {
        Verdict::inconclusive("search budget")
    } else if mr != mt {
        Verdict::refuted(
            witnesses(&raw, &vars, &success_set(&tr, &vars))
                .into_iter()
                .chain(witnesses(&tr, &vars, &success_set(&raw, &vars))),
        )
    } else if mr.is_empty() && (raw.depth_cut || tr.depth_cut) {
        Verdict::inconclusive("no answers within depth")
    } else {
        Verdict::Holds
    };
    report(TheoremId::Preservation, p, q, verdict, details)
}

/// Each LP-Unif success on the transformed program binds the proof argument
/// to the representation of the normalised extracted proof.
pub fn check_record(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let (fp, fq, ys) = match transformed(p, q) {
        Ok(t) => t,
        Err(e) => return report(TheoremId::Record, p, q, Verdict::inconclusive(e), Vec::new()),
    };
    let r = run(&fp, &fq, Strategy::Unif, b);
    let scheme = NameScheme::default();
    let mut details = Vec::new();
    for a in r.successes() {
        let failure = (|| -> Result<(), String> {
            let extracted = extract_proof(&a.trace).map_err(|e| e.to_string())?;
            let gamma = a.trace.final_state();
            for (e, y) in extracted.iter().zip(&ys) {
                let n = beta_normalize(&e.judgement.proof, DEFAULT_FUEL).map_err(|e| e.to_string())?;
                if !is_first_order(&n) {
                    return Err(format!("normal form {n} is not first order"));
                }
                let rep = represent(&n, &RepEnv::new(), &scheme).map_err(|e| e.to_string())?;
                let bound = gamma.apply(&Term::var(y.clone()));
                if rep != bound {
                    return Err(format!("proof {n} represents {rep} but {y}={bound}"));
                }
                if details.len() < 4 {
                    details.push(format!("{y}={bound} proof={n}"));
                }
            }
            Ok(())
        })();
        if let Err(e) = failure {
            details.push(e);
            return report(TheoremId::Record, p, q, Verdict::refuted([a.trace.clone()]), details);
        }
    }
    let verdict = if r.successes().next().is_some() {
        Verdict::Holds
    } else if !complete(&r) {
        Verdict::inconclusive("search budget")
    } else {
        Verdict::inconclusive("no successes within depth")
    };
    report(TheoremId::Record, p, q, verdict, details)
}

/// Extracted proofs of LP-Unif successes prove `γA`; those of LP-TM
/// successes prove the original `A`; normal forms are first order.
pub fn check_soundness(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let mut details = Vec::new();
    let mut checked = 0;
    for strategy in [Strategy::Unif, Strategy::Tm] {
        let r = run(p, q, strategy, b);
        for a in r.successes() {
            let outcome = (|| -> Result<(), String> {
                let extracted = extract_proof(&a.trace).map_err(|e| e.to_string())?;
                let gamma = a.trace.final_state();
                for (e, goal) in extracted.iter().zip(q.iter()) {
                    let want = if strategy == Strategy::Tm { goal.clone() } else { gamma.apply(goal) };
                    if e.judgement.head != want || !e.judgement.body.is_empty() {
                        return Err(format!("extracted judgement {} does not prove {want}", e.judgement));
                    }
                    check_judgement(p, &e.judgement).map_err(|err| format!("{}: {err}", e.judgement))?;
                    let n = beta_normalize(&e.judgement.proof, DEFAULT_FUEL).map_err(|e| e.to_string())?;
                    if !is_first_order(&n) {
                        return Err(format!("normal form {n} is not first order"));
                    }
                }
                Ok(())
            })();
            if let Err(e) = outcome {
                details.push(format!("{strategy}: {e}"));
                return report(TheoremId::Soundness, p, q, Verdict::refuted([a.trace.clone()]), details);
            }
            checked += 1;
        }
    }
    details.push(format!("{checked} successes checked"));
    let verdict = if checked > 0 {
        Verdict::Holds
    } else {
        Verdict::inconclusive("no successes within depth")
    };
    report(TheoremId::Soundness, p, q, verdict, details)
}

// ---------------------------------------------------------------------------
// LP-Struct exploration

#[derive(Clone)]
struct StructState {
    path: Vec<DerivationStep>,
    goals: GoalSet,
    state: Substitution,
    fresh: Fresh,
    depth: usize,
}

struct Exploration {
    states: Vec<StructState>,
    /// Every term-matching run performed, diverged ones included.
    tm_runs: Vec<(GoalSet, Vec<DerivationStep>)>,
    diverged: bool,
    truncated: bool,
}

/// Breadth-first LP-Struct search over every clause for the selected atom.
fn explore_struct(p: &Program, q: &GoalSet, b: &CheckBudget) -> Exploration {
    let mut ex = Exploration {
        states: Vec::new(),
        tm_runs: Vec::new(),
        diverged: false,
        truncated: false,
    };
    let mut fresh = derivation_fresh(q);
    let root = match tm_normalize(p, q, &Substitution::new(), Selection::Leftmost, b.max_tm_steps, &mut fresh) {
        TmRun::Normal(steps) => {
            ex.tm_runs.push((q.clone(), steps.clone()));
            StructState {
                goals: steps.last().map(|s| s.goals_after.clone()).unwrap_or_else(|| q.clone()),
                path: steps,
                state: Substitution::new(),
                fresh,
                depth: 0,
            }
        }
        TmRun::Diverged(steps) => {
            ex.tm_runs.push((q.clone(), steps));
            ex.diverged = true;
            return ex;
        }
    };
    let mut queue = VecDeque::from([root]);
    while let Some(s) = queue.pop_front() {
        if ex.states.len() >= b.max_states {
            ex.truncated = true;
            break;
        }
        ex.states.push(s.clone());
        if s.goals.is_empty() || s.depth >= b.depth {
            continue;
        }
        for c in &p.clauses {
            let mut fresh = s.fresh.clone();
            let Some(sub) = step_sub(p, &s.goals, &s.state, 0, &c.label, &mut fresh) else {
                continue;
            };
            let run = tm_normalize(p, &sub.goals_after, &sub.state, Selection::Leftmost, b.max_tm_steps, &mut fresh);
            match run {
                TmRun::Normal(tms) => {
                    ex.tm_runs.push((sub.goals_after.clone(), tms.clone()));
                    let goals = tms.last().map(|t| t.goals_after.clone()).unwrap_or_else(|| sub.goals_after.clone());
                    let state = sub.state.clone();
                    let mut path = s.path.clone();
                    path.push(sub);
                    path.extend(tms);
                    queue.push_back(StructState {
                        path,
                        goals,
                        state,
                        fresh,
                        depth: s.depth + 1,
                    });
                }
                TmRun::Diverged(tms) => {
                    ex.tm_runs.push((sub.goals_after.clone(), tms));
                    ex.diverged = true;
                }
            }
        }
    }
    ex
}

fn trace_of(p: &Program, q: &GoalSet, path: Vec<DerivationStep>) -> DerivationTrace {
    let goals = path.last().map(|s| s.goals_after.clone()).unwrap_or_else(|| q.clone());
    DerivationTrace {
        program: p.clone(),
        initial: q.clone(),
        steps: path,
        outcome: structres::engine::Outcome::Stuck(goals),
    }
}

fn var_set<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<String> {
    let mut v = Vec::new();
    for a in atoms {
        a.collect_vars(&mut v);
    }
    v.into_iter().map(str::to_string).collect()
}

/// Goals and the state on `vars`, packed for an alpha-equivalence check.
fn snapshot(goals: &[Atom], state: &Substitution, vars: &BTreeSet<String>) -> Vec<Atom> {
    let mut out = goals.to_vec();
    out.push(Atom::new("$state", vars.iter().map(|v| state.apply(&Term::var(v.clone()))).collect()));
    out
}

/// Term matching on the transformed program decreases the multiset of
/// measured arguments at every step of every LP-Struct run.
pub fn check_productivity_decrease(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let (fp, fq, _) = match transformed(p, q) {
        Ok(t) => t,
        Err(e) => return report(TheoremId::Productivity, p, q, Verdict::inconclusive(e), Vec::new()),
    };
    let spec = MeasureSpec::last();
    let cert = match check_productivity(&fp, &spec, b.depth) {
        Ok(c) => c,
        Err(e) => return report(TheoremId::Productivity, p, q, Verdict::inconclusive(e.to_string()), Vec::new()),
    };
    let mut details = vec![format!("certificate: {cert}")];
    if !cert.is_measure_decreasing() {
        return report(TheoremId::Productivity, p, q, Verdict::refuted([]), details);
    }
    let ex = explore_struct(&fp, &fq, b);
    let mut steps = 0;
    for (start, run) in &ex.tm_runs {
        let mut before = measure_multiset(start, &spec);
        for (i, s) in run.iter().enumerate() {
            let after = measure_multiset(&s.goals_after, &spec);
            if !multiset_decreases(&before, &after) {
                details.push(format!("measure does not decrease at step {}", i + 1));
                return report(TheoremId::Productivity, p, q, Verdict::refuted([trace_of(&fp, start, run.clone())]), details);
            }
            before = after;
            steps += 1;
        }
    }
    details.push(format!("{steps} term-matching steps checked in {} states", ex.states.len()));
    let verdict = if ex.diverged {
        details.push("term matching hit its cap".into());
        Verdict::refuted(ex.tm_runs.iter().filter(|r| r.1.len() >= b.max_tm_steps).map(|r| trace_of(&fp, &r.0, r.1.clone())).take(1))
    } else {
        Verdict::Holds
    };
    report(TheoremId::Productivity, p, q, verdict, details)
}

#[derive(Clone, Copy)]
enum Slot {
    /// Corresponds to the LP-Unif goal at this index.
    At(usize),
    /// Already resolved on the LP-Unif side into these goals.
    Pending(usize, usize),
}

/// Replays an LP-Struct path as an LP-Unif derivation: a substitutional step
/// resolves eagerly on the unif side, and the later term-matching step on
/// the same atom is absorbed.
fn simulate_struct_path(p: &Program, q: &GoalSet, path: &[DerivationStep]) -> Result<(), String> {
    let mut u = q.clone();
    let mut u_state = Substitution::new();
    let mut fresh = Fresh::new("_S", q.vars());
    for s in path {
        fresh.reserve_all(s.instance.vars());
    }
    let mut slots: Vec<Slot> = (0..q.len()).map(Slot::At).collect();
    let shift = |slots: &mut Vec<Slot>, from: usize, by: isize| {
        for sl in slots.iter_mut() {
            match sl {
                Slot::At(i) if *i > from => *i = (*i as isize + by) as usize,
                Slot::Pending(i, _) if *i > from => *i = (*i as isize + by) as usize,
                _ => {}
            }
        }
    };
    let mut s_goals = q.clone();
    for (n, step) in path.iter().enumerate() {
        let slot = slots[step.selected_index];
        match (step.mode, slot) {
            (StepMode::Tm, Slot::Pending(start, len)) => {
                if len != step.instance.body.len() {
                    return Err(format!("step {}: body length changed", n + 1));
                }
                slots.splice(step.selected_index..=step.selected_index, (start..start + len).map(Slot::At));
            }
            (StepMode::Tm | StepMode::Sub, Slot::At(ui)) => {
                let un = step_unif(p, &u, &u_state, ui, &step.clause_label, &mut fresh)
                    .ok_or_else(|| format!("step {}: no matching unif step", n + 1))?;
                let m = step.instance.body.len();
                u = un.goals_after;
                u_state = un.state;
                shift(&mut slots, ui, m as isize - 1);
                let replacement: Vec<Slot> = if step.mode == StepMode::Tm {
                    (ui..ui + m).map(Slot::At).collect()
                } else {
                    vec![Slot::Pending(ui, m)]
                };
                slots.splice(step.selected_index..=step.selected_index, replacement);
            }
            (_, Slot::Pending(..)) => return Err(format!("step {}: atom substituted twice", n + 1)),
            (StepMode::Unif, _) => return Err(format!("step {}: unexpected unif step", n + 1)),
        }
        s_goals = step.goals_after.clone();
    }
    if slots.iter().any(|s| matches!(s, Slot::Pending(..))) {
        return Err("path ends with an unresolved substitutional step".into());
    }
    let permuted: Vec<Atom> = slots
        .iter()
        .map(|s| match s {
            Slot::At(i) => u[*i].clone(),
            Slot::Pending(..) => unreachable!(),
        })
        .collect();
    if permuted.len() != u.len() {
        return Err("goal counts differ".into());
    }
    let s_state = path.last().map(|s| s.state.clone()).unwrap_or_default();
    let qv: BTreeSet<String> = q.vars().into_iter().map(str::to_string).collect();
    let fixed: BTreeSet<String> = qv.iter().filter(|v| s_state.get(v).is_none()).cloned().collect();
    if !alpha_eq_atoms(&snapshot(&s_goals, &s_state, &qv), &snapshot(&permuted, &u_state, &qv), &fixed) {
        return Err(format!("struct reached {s_goals} but unif reached {}", GoalSet(permuted)));
    }
    Ok(())
}

/// Under non-overlap and productivity: every unif step from an LP-Struct
/// state is rejoined by LP-Struct after term matching (part 1), and every
/// LP-Struct path is simulated by unif steps (part 2).
pub fn check_stepwise(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let mut details = Vec::new();
    if let Err(w) = check_non_overlapping(p) {
        details.push(format!("overlapping clauses {w}"));
        return report(TheoremId::Stepwise, p, q, Verdict::inconclusive("precondition: overlapping"), details);
    }
    match check_productivity(p, &MeasureSpec::last(), b.depth) {
        Ok(c) if c.is_measure_decreasing() => {}
        _ => return report(TheoremId::Stepwise, p, q, Verdict::inconclusive("precondition: no productivity certificate"), details),
    }
    let ex = explore_struct(p, q, b);
    let (mut part1, mut part2) = (0, 0);
    for s in &ex.states {
        for i in 0..s.goals.len() {
            for c in &p.clauses {
                let mut fu = s.fresh.clone();
                let Some(un) = step_unif(p, &s.goals, &s.state, i, &c.label, &mut fu) else {
                    continue;
                };
                let mut fs = s.fresh.clone();
                let sub = step_sub(p, &s.goals, &s.state, i, &c.label, &mut fs).expect("sub mirrors unif");
                let joined = tm_normalize(p, &un.goals_after, &un.state, Selection::Leftmost, b.max_tm_steps, &mut fu);
                let via = tm_normalize(p, &sub.goals_after, &sub.state, Selection::Leftmost, b.max_tm_steps, &mut fs);
                let (TmRun::Normal(j), TmRun::Normal(v)) = (joined, via) else {
                    return report(TheoremId::Stepwise, p, q, Verdict::inconclusive("term matching hit its cap"), details);
                };
                let c1 = j.last().map(|t| t.goals_after.clone()).unwrap_or(un.goals_after.clone());
                let c2 = v.last().map(|t| t.goals_after.clone()).unwrap_or(sub.goals_after.clone());
                let fixed = var_set(sub.goals_after.iter());
                if !alpha_eq_atoms(&c1, &c2, &fixed) {
                    details.push(format!("part 1: unif step with {} at {i} gives {c1} but struct gives {c2}", c.label));
                    let mut path = s.path.clone();
                    path.push(un);
                    path.extend(j);
                    let mut path2 = s.path.clone();
                    path2.push(sub);
                    path2.extend(v);
                    return report(
                        TheoremId::Stepwise,
                        p,
                        q,
                        Verdict::refuted([trace_of(p, q, path), trace_of(p, q, path2)]),
                        details,
                    );
                }
                part1 += 1;
            }
        }
        if let Err(e) = simulate_struct_path(p, q, &s.path) {
            details.push(format!("part 2: {e}"));
            return report(TheoremId::Stepwise, p, q, Verdict::refuted([trace_of(p, q, s.path.clone())]), details);
        }
        part2 += 1;
    }
    details.push(format!("part 1: {part1} steps, part 2: {part2} paths"));
    let verdict = if ex.diverged {
        Verdict::inconclusive("term matching hit its cap")
    } else {
        Verdict::Holds
    };
    report(TheoremId::Stepwise, p, q, verdict, details)
}

fn decompose_unif_step(p: &Program, trace: &DerivationTrace, n: usize) -> Result<(), String> {
    let step = &trace.steps[n];
    let (prev, prev_state) = match n {
        0 => (&trace.initial, Substitution::new()),
        _ => (&trace.steps[n - 1].goals_after, trace.steps[n - 1].state.clone()),
    };
    let prev_state = &prev_state;
    let mut fresh = Fresh::new("_D", trace.initial.vars());
    for s in &trace.steps {
        fresh.reserve_all(s.instance.vars());
    }
    let sub = step_sub(p, prev, prev_state, step.selected_index, &step.clause_label, &mut fresh)
        .ok_or("substitutional step fails")?;
    let tm = step_tm(p, &sub.goals_after, &sub.state, step.selected_index, &step.clause_label, &mut fresh)
        .ok_or("term-matching step fails after substitution")?;
    let mut steps = trace.steps[..n].to_vec();
    steps.extend([sub, tm.clone()]);
    let pair = DerivationTrace {
        program: p.clone(),
        initial: trace.initial.clone(),
        steps,
        outcome: structres::engine::Outcome::Stuck(tm.goals_after.clone()),
    };
    replay_checked(&pair).map_err(|e| format!("decomposed pair does not replay: {e:?}"))?;
    let vars = var_set(prev.iter());
    let fixed: BTreeSet<String> = vars.iter().filter(|v| step.local_binding.get(v).is_none()).cloned().collect();
    if !alpha_eq_atoms(
        &snapshot(&tm.goals_after, &tm.state, &vars),
        &snapshot(&step.goals_after, &step.state, &vars),
        &fixed,
    ) {
        return Err(format!("decomposition reaches {} instead of {}", tm.goals_after, step.goals_after));
    }
    Ok(())
}

/// Every unif step of every LP-Unif trace splits into a substitutional and a
/// term-matching step; every LP-Struct pair on the transformed program fuses
/// into one unif step.
pub fn check_decomposition(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let mut details = Vec::new();
    let unif = run(p, q, Strategy::Unif, b);
    let mut n7 = 0;
    for trace in unif.answers.iter().map(|a| &a.trace).chain(unif.dead_end.iter()) {
        for n in 0..trace.steps.len() {
            if let Err(e) = decompose_unif_step(p, trace, n) {
                details.push(e);
                return report(TheoremId::Decomposition, p, q, Verdict::refuted([trace.clone()]), details);
            }
            n7 += 1;
        }
    }
    let (fp, fq, _) = match transformed(p, q) {
        Ok(t) => t,
        Err(e) => return report(TheoremId::Decomposition, p, q, Verdict::inconclusive(e), details),
    };
    let strc = run(&fp, &fq, Strategy::Struct, b);
    let mut n8 = 0;
    for a in strc.successes() {
        let Some(pairs) = fused_pairs(&a.trace) else {
            details.push("struct trace is not an alternation of pairs".into());
            return report(TheoremId::Decomposition, p, q, Verdict::refuted([a.trace.clone()]), details);
        };
        let mut prev = a.trace.initial.clone();
        let mut prev_state = Substitution::new();
        for (sub, tm) in pairs {
            let mut fresh = Fresh::new("_F", prev.vars());
            fresh.reserve_all(sub.instance.vars());
            let fused = step_unif(&fp, &prev, &prev_state, sub.selected_index, &sub.clause_label, &mut fresh);
            let vars = var_set(prev.iter());
            let fixed: BTreeSet<String> = vars.iter().filter(|v| sub.local_binding.get(v).is_none()).cloned().collect();
            let ok = fused.is_some_and(|u| {
                alpha_eq_atoms(&snapshot(&u.goals_after, &u.state, &vars), &snapshot(&tm.goals_after, &tm.state, &vars), &fixed)
            });
            if !ok {
                details.push(format!("pair on {} does not fuse into one unif step", sub.clause_label));
                return report(TheoremId::Decomposition, p, q, Verdict::refuted([a.trace.clone()]), details);
            }
            n8 += 1;
            prev = tm.goals_after.clone();
            prev_state = tm.state.clone();
        }
    }
    details.push(format!("{n7} unif steps split, {n8} struct pairs fused"));
    let verdict = if n7 + n8 == 0 {
        Verdict::inconclusive("no steps to decompose")
    } else if !complete(&unif) || !complete(&strc) {
        // Every step seen decomposed; the search itself was cut short.
        Verdict::Holds
    } else {
        Verdict::Holds
    };
    report(TheoremId::Decomposition, p, q, verdict, details)
}

/// The engine's success sets equal the brute-force enumeration at equal
/// depth: LP-Unif and LP-TM on `p`, LP-Struct on the transformed program.
pub fn check_oracle(p: &Program, q: &GoalSet, b: &CheckBudget) -> TheoremReport {
    let mut details = Vec::new();
    let mut inconclusive = false;
    let mut runs: Vec<(Strategy, Program, GoalSet)> = vec![(Strategy::Unif, p.clone(), q.clone()), (Strategy::Tm, p.clone(), q.clone())];
    if let Ok((fp, fq, _)) = transformed(p, q) {
        runs.push((Strategy::Struct, fp, fq));
    }
    for (strategy, prog, goal) in runs {
        let vars = goal.vars();
        let r = run(&prog, &goal, strategy, b);
        let o = oracle_run(&prog, &goal, strategy, b.depth);
        let engine = success_set(&r, &vars);
        details.push(format!("{strategy}: engine={} oracle={}", render_set(&engine), render_set(&o.answers)));
        if !complete(&r) || o.truncated {
            inconclusive = true;
            continue;
        }
        if engine != o.answers {
            let missing: BTreeSet<Substitution> = o.answers.clone();
            let mut traces = witnesses(&r, &vars, &missing);
            traces.truncate(3);
            return report(TheoremId::Oracle, p, q, Verdict::refuted(traces), details);
        }
    }
    let verdict = if inconclusive {
        Verdict::inconclusive("search budget")
    } else {
        Verdict::Holds
    };
    report(TheoremId::Oracle, p, q, verdict, details)
}

/// Runs the selected checks on one program and query. `equiv` and
/// `stepwise` use the transformed program unless `raw` is set.
pub fn run_checks(p: &Program, q: &GoalSet, theorems: &[TheoremId], b: &CheckBudget, raw: bool) -> Vec<TheoremReport> {
    theorems
        .iter()
        .map(|t| match t {
            TheoremId::Equiv if raw => check_equiv_struct_unif(p, q, b),
            TheoremId::Equiv => check_equiv_after_transform(p, q, b),
            TheoremId::Stepwise if raw => check_stepwise(p, q, b),
            TheoremId::Stepwise => match transformed(p, q) {
                Ok((fp, fq, _)) => {
                    let mut r = check_stepwise(&fp, &fq, b);
                    r.program = p.clone();
                    r.query = q.clone();
                    r
                }
                Err(e) => report(TheoremId::Stepwise, p, q, Verdict::inconclusive(e), Vec::new()),
            },
            TheoremId::Preservation => check_preservation(p, q, b),
            TheoremId::Record => check_record(p, q, b),
            TheoremId::Soundness => check_soundness(p, q, b),
            TheoremId::Productivity => check_productivity_decrease(p, q, b),
            TheoremId::Decomposition => check_decomposition(p, q, b),
            TheoremId::Oracle => check_oracle(p, q, b),
        })
        .collect()
}

/// Verdict counts per theorem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub holds: usize,
    pub refuted: usize,
    pub inconclusive: usize,
}

pub fn tally(reports: &[TheoremReport]) -> BTreeMap<TheoremId, Tally> {
    let mut out: BTreeMap<TheoremId, Tally> = BTreeMap::new();
    for r in reports {
        let t = out.entry(r.theorem).or_default();
        match r.verdict {
            Verdict::Holds => t.holds += 1,
            Verdict::Refuted { .. } => t.refuted += 1,
            Verdict::Inconclusive { .. } => t.inconclusive += 1,
        }
    }
    out
}
