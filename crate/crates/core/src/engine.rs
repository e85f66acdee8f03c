//! The three reduction relations (term matching, unification, substitution),
//! the LP-TM / LP-Unif / LP-Struct search strategies built from them, and
//! trace replay.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::subst::{is_instance_on, match_atom, unify_atoms, Substitution};
use crate::syntax::{canonicalize, Atom, Fresh, GoalSet, HornClause, Program};

/// Prefix of clause variables introduced by renaming during a derivation.
pub const FRESH_PREFIX: &str = "_G";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    Tm,
    Unif,
    Sub,
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepMode::Tm => "tm",
            StepMode::Unif => "unif",
            StepMode::Sub => "sub",
        })
    }
}

/// Which abstract reduction system drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// `(Φ, ⇝)`
    Unif,
    /// `(Φ, →)`
    Tm,
    /// `(Φ, →^μ · ↪^1)`
    Struct,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Unif => "unif",
            Strategy::Tm => "tm",
            Strategy::Struct => "struct",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unif" => Ok(Strategy::Unif),
            "tm" => Ok(Strategy::Tm),
            "struct" => Ok(Strategy::Struct),
            other => Err(format!("unknown mode `{other}` (expected unif, tm or struct)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    #[default]
    Leftmost,
    Rightmost,
}

impl Selection {
    fn order(self, len: usize) -> Box<dyn Iterator<Item = usize>> {
        match self {
            Selection::Leftmost => Box::new(0..len),
            Selection::Rightmost => Box::new((0..len).rev()),
        }
    }

    fn pick(self, len: usize) -> usize {
        match self {
            Selection::Leftmost => 0,
            Selection::Rightmost => len - 1,
        }
    }
}

impl std::str::FromStr for Selection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "leftmost" => Ok(Selection::Leftmost),
            "rightmost" => Ok(Selection::Rightmost),
            other => Err(format!("unknown selection `{other}` (expected leftmost or rightmost)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    /// Iterative deepening for UNIF and STRUCT, plain depth-first for TM
    /// (whose depth is already bounded by `max_tm_steps`).
    #[default]
    Auto,
    DepthFirst,
    IterativeDeepening,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Total reduction steps the search may perform.
    pub max_steps: usize,
    /// Cap on a single term-matching run (`→^μ`); reaching it means divergence.
    pub max_tm_steps: usize,
    pub max_solutions: usize,
    /// Optional bound on resolution depth: unif steps for UNIF, substitutional
    /// steps for STRUCT, term-matching steps for TM.
    pub max_depth: Option<usize>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_steps: 10_000,
            max_tm_steps: 1_000,
            max_solutions: 16,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub budget: Budget,
    pub selection: Selection,
    pub search: Search,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationStep {
    pub mode: StepMode,
    pub clause_label: String,
    pub selected_index: usize,
    /// The renamed-apart copy of the clause used by this step.
    pub instance: HornClause,
    /// The matcher (TM) or unifier (UNIF, SUB) computed by this step.
    pub local_binding: Substitution,
    /// Accumulated state after this step.
    pub state: Substitution,
    pub goals_after: GoalSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKind {
    TmDivergence,
    SearchBudget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Stuck(GoalSet),
    BudgetExhausted(BudgetKind),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::Success)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Success => f.write_str("outcome=success"),
            Outcome::Stuck(g) => write!(f, "outcome=stuck goals={g}"),
            Outcome::BudgetExhausted(BudgetKind::TmDivergence) => f.write_str("outcome=tm-divergence"),
            Outcome::BudgetExhausted(BudgetKind::SearchBudget) => f.write_str("outcome=search-budget"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationTrace {
    pub program: Program,
    pub initial: GoalSet,
    pub steps: Vec<DerivationStep>,
    pub outcome: Outcome,
}

impl DerivationTrace {
    pub fn final_goals(&self) -> &GoalSet {
        self.steps.last().map(|s| &s.goals_after).unwrap_or(&self.initial)
    }

    pub fn final_state(&self) -> Substitution {
        self.steps.last().map(|s| s.state.clone()).unwrap_or_default()
    }

    /// Number of steps of the given mode.
    pub fn count(&self, mode: StepMode) -> usize {
        self.steps.iter().filter(|s| s.mode == mode).count()
    }

    /// Line-oriented rendering: one record per step, then the outcome.
    pub fn to_lines(&self) -> String {
        let mut out = format!("initial={}\n", self.initial);
        for (n, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "step={} mode={} clause={} at={} bind={} state={} goals={}\n",
                n + 1,
                s.mode,
                s.clause_label,
                s.selected_index,
                s.local_binding,
                s.state,
                s.goals_after
            ));
        }
        out.push_str(&format!("{}\n", self.outcome));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    /// Final state restricted to the query's variables.
    pub bindings: Substitution,
    pub trace: DerivationTrace,
}

impl Answer {
    pub fn is_success(&self) -> bool {
        self.trace.outcome.is_success()
    }

    /// Remaining goals (empty for a success, a term-matching normal form for
    /// partial TM answers).
    pub fn residue(&self) -> &GoalSet {
        self.trace.final_goals()
    }

    /// Bindings with the free variables of their range renamed to
    /// `_G0, _G1, ...` in order of the sorted query variables.
    pub fn canonical_bindings(&self) -> Substitution {
        canonical_answer(&self.bindings)
    }

    /// Number of resolution steps (unif steps, or sub steps for LP-Struct, or
    /// tm steps for LP-TM).
    pub fn depth(&self) -> usize {
        let t = &self.trace;
        [StepMode::Sub, StepMode::Unif, StepMode::Tm]
            .into_iter()
            .map(|m| t.count(m))
            .find(|&n| n > 0)
            .unwrap_or(0)
    }

    /// `X = node1, Y = node3`, or `true` when nothing is bound.
    pub fn render(&self) -> String {
        let b = self.canonical_bindings();
        if b.is_empty() {
            "true".to_string()
        } else {
            b.iter().map(|(v, t)| format!("{v} = {t}")).collect::<Vec<_>>().join(", ")
        }
    }
}

/// Canonical form of an answer substitution for comparisons.
pub fn canonical_answer(bindings: &Substitution) -> Substitution {
    let keep: BTreeSet<String> = bindings.domain().map(str::to_string).collect();
    let vars: Vec<&String> = bindings.iter().map(|(v, _)| v).collect();
    let atom = Atom::new("answer", bindings.iter().map(|(_, t)| t.clone()).collect());
    let renamed = canonicalize(std::slice::from_ref(&atom), &keep).remove(0);
    Substitution::from_pairs(vars.into_iter().cloned().zip(renamed.args))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub strategy: Strategy,
    pub answers: Vec<Answer>,
    pub outcome: Outcome,
    pub steps_used: usize,
    /// Some branch was cut by the depth bound.
    pub depth_cut: bool,
    pub search_budget_hit: bool,
    pub tm_divergence: bool,
    /// Trace to the first goal set that admitted no step.
    pub dead_end: Option<DerivationTrace>,
}

impl SolveResult {
    pub fn successes(&self) -> impl Iterator<Item = &Answer> {
        self.answers.iter().filter(|a| a.is_success())
    }

    /// The whole search space up to the bounds was explored.
    pub fn exhaustive(&self) -> bool {
        !self.search_budget_hit && !self.tm_divergence
    }
}

// ---------------------------------------------------------------------------
// Single steps

/// Fresh-name source for a derivation: `_G0, _G1, ...` avoiding the query's
/// variables.
pub fn derivation_fresh(query: &GoalSet) -> Fresh {
    Fresh::new(FRESH_PREFIX, query.vars())
}

fn replace_at(goals: &GoalSet, index: usize, with: Vec<Atom>) -> GoalSet {
    let mut out = Vec::with_capacity(goals.len() + with.len());
    out.extend_from_slice(&goals[..index]);
    out.extend(with);
    out.extend_from_slice(&goals[index + 1..]);
    GoalSet(out)
}

fn compatible(clause: &HornClause, atom: &Atom) -> bool {
    clause.head.predicate == atom.predicate && clause.head.arity() == atom.arity()
}

/// `Φ ⊢ {A1,…,Ai,…,An} →_κ {A1,…,σB1,…,σBm,…,An}` when the renamed head
/// matches `Ai` with `σ`. The state passes through unchanged. `fresh`
/// advances only when the step succeeds; an unknown label also yields `None`.
pub fn step_tm(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    select: usize,
    label: &str,
    fresh: &mut Fresh,
) -> Option<DerivationStep> {
    let clause = program.clause(label)?;
    let target = goals.get(select)?;
    if !compatible(clause, target) {
        return None;
    }
    let mut f = fresh.clone();
    let instance = f.rename_clause(clause);
    let sigma = match_atom(&instance.head, target)?;
    *fresh = f;
    let body = sigma.apply(instance.body.as_slice());
    Some(DerivationStep {
        mode: StepMode::Tm,
        clause_label: clause.label.clone(),
        selected_index: select,
        instance,
        goals_after: replace_at(goals, select, body),
        local_binding: sigma,
        state: state.clone(),
    })
}

/// `Φ ⊢ {A1,…,Ai,…,An} ⇝_{κ, γ·γ'} {γA1,…,γB1,…,γBm,…,γAn}`.
pub fn step_unif(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    select: usize,
    label: &str,
    fresh: &mut Fresh,
) -> Option<DerivationStep> {
    unify_step(program, goals, state, select, label, fresh, StepMode::Unif)
}

/// `Φ ⊢ {A1,…,Ai,…,An} ↪_{κ, γ·γ'} {γA1,…,γAi,…,γAn}`.
pub fn step_sub(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    select: usize,
    label: &str,
    fresh: &mut Fresh,
) -> Option<DerivationStep> {
    unify_step(program, goals, state, select, label, fresh, StepMode::Sub)
}

fn unify_step(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    select: usize,
    label: &str,
    fresh: &mut Fresh,
    mode: StepMode,
) -> Option<DerivationStep> {
    let clause = program.clause(label)?;
    let target = goals.get(select)?;
    if !compatible(clause, target) {
        return None;
    }
    let mut f = fresh.clone();
    let instance = f.rename_clause(clause);
    let gamma = unify_atoms(&instance.head, target)?;
    *fresh = f;
    let goals_after = match mode {
        StepMode::Unif => gamma.apply(&replace_at(goals, select, instance.body.clone())),
        _ => gamma.apply(goals),
    };
    Some(DerivationStep {
        mode,
        clause_label: clause.label.clone(),
        selected_index: select,
        instance,
        state: Substitution::compose(&gamma, state),
        local_binding: gamma,
        goals_after,
    })
}

/// First term-matching step in selection order (leftmost reducible atom,
/// first matching clause in program order).
pub fn first_tm_step(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    selection: Selection,
    fresh: &mut Fresh,
) -> Option<DerivationStep> {
    for i in selection.order(goals.len()) {
        for c in &program.clauses {
            if let Some(step) = step_tm(program, goals, state, i, &c.label, fresh) {
                return Some(step);
            }
        }
    }
    None
}

pub fn is_tm_normal(program: &Program, goals: &GoalSet) -> bool {
    goals.iter().all(|a| {
        program
            .clauses
            .iter()
            .all(|c| !compatible(c, a) || match_atom(&c.head, a).is_none())
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TmRun {
    Normal(Vec<DerivationStep>),
    /// The cap was reached with the goals still reducible.
    Diverged(Vec<DerivationStep>),
}

/// `→^μ` by committed choice, stopping after `cap` steps.
pub fn tm_normalize(
    program: &Program,
    goals: &GoalSet,
    state: &Substitution,
    selection: Selection,
    cap: usize,
    fresh: &mut Fresh,
) -> TmRun {
    let mut steps: Vec<DerivationStep> = Vec::new();
    loop {
        let current = steps.last().map(|s| &s.goals_after).unwrap_or(goals);
        let Some(step) = first_tm_step(program, current, state, selection, fresh) else {
            return TmRun::Normal(steps);
        };
        if steps.len() == cap {
            return TmRun::Diverged(steps);
        }
        steps.push(step);
    }
}

// ---------------------------------------------------------------------------
// Search

#[derive(Clone)]
struct Node {
    goals: GoalSet,
    state: Substitution,
    fresh: Fresh,
    depth: usize,
    /// Arena index of the last step on the path to this node.
    last: Option<usize>,
}

struct Searcher<'a> {
    program: &'a Program,
    query: &'a GoalSet,
    strategy: Strategy,
    opts: &'a SolveOptions,
    arena: Vec<(Option<usize>, DerivationStep)>,
    answers: Vec<Answer>,
    steps_used: usize,
    depth_cut: bool,
    search_budget_hit: bool,
    tm_divergence: bool,
    first_dead_end: Option<(GoalSet, Option<usize>)>,
}

enum Expansion {
    Children(Vec<(Vec<DerivationStep>, GoalSet, Substitution, Fresh)>),
    Leaf(Leaf),
}

enum Leaf {
    Success,
    NormalForm,
    DeadEnd,
    Diverged,
}

impl<'a> Searcher<'a> {
    fn record(&mut self, parent: Option<usize>, steps: Vec<DerivationStep>) -> Option<usize> {
        let mut last = parent;
        for s in steps {
            self.arena.push((last, s));
            last = Some(self.arena.len() - 1);
        }
        last
    }

    fn path(&self, mut at: Option<usize>) -> Vec<DerivationStep> {
        let mut out = Vec::new();
        while let Some(i) = at {
            out.push(self.arena[i].1.clone());
            at = self.arena[i].0;
        }
        out.reverse();
        out
    }

    fn charge(&mut self, n: usize) -> bool {
        self.steps_used += n;
        if self.steps_used > self.opts.budget.max_steps {
            self.search_budget_hit = true;
            false
        } else {
            true
        }
    }

    fn expand(&mut self, node: &Node) -> Expansion {
        let sel = self.opts.selection;
        match self.strategy {
            Strategy::Unif => {
                if node.goals.is_empty() {
                    return Expansion::Leaf(Leaf::Success);
                }
                let i = sel.pick(node.goals.len());
                let mut kids = Vec::new();
                for c in &self.program.clauses {
                    let mut fresh = node.fresh.clone();
                    if let Some(step) = step_unif(self.program, &node.goals, &node.state, i, &c.label, &mut fresh) {
                        let (g, s) = (step.goals_after.clone(), step.state.clone());
                        kids.push((vec![step], g, s, fresh));
                    }
                }
                if kids.is_empty() {
                    Expansion::Leaf(Leaf::DeadEnd)
                } else {
                    Expansion::Children(kids)
                }
            }
            Strategy::Tm => {
                for i in sel.order(node.goals.len()) {
                    let mut kids = Vec::new();
                    for c in &self.program.clauses {
                        let mut fresh = node.fresh.clone();
                        if let Some(step) = step_tm(self.program, &node.goals, &node.state, i, &c.label, &mut fresh) {
                            let (g, s) = (step.goals_after.clone(), step.state.clone());
                            kids.push((vec![step], g, s, fresh));
                        }
                    }
                    if !kids.is_empty() {
                        if node.depth >= self.opts.budget.max_tm_steps {
                            return Expansion::Leaf(Leaf::Diverged);
                        }
                        return Expansion::Children(kids);
                    }
                }
                if node.goals.is_empty() {
                    Expansion::Leaf(Leaf::Success)
                } else {
                    Expansion::Leaf(Leaf::NormalForm)
                }
            }
            Strategy::Struct => {
                if node.goals.is_empty() {
                    return Expansion::Leaf(Leaf::Success);
                }
                let i = sel.pick(node.goals.len());
                let mut kids = Vec::new();
                let mut diverged = false;
                for c in &self.program.clauses {
                    let mut fresh = node.fresh.clone();
                    let Some(sub) = step_sub(self.program, &node.goals, &node.state, i, &c.label, &mut fresh) else {
                        continue;
                    };
                    let run = tm_normalize(
                        self.program,
                        &sub.goals_after,
                        &sub.state,
                        sel,
                        self.opts.budget.max_tm_steps,
                        &mut fresh,
                    );
                    match run {
                        TmRun::Normal(tms) => {
                            let goals = tms.last().map(|s| s.goals_after.clone()).unwrap_or_else(|| sub.goals_after.clone());
                            let state = sub.state.clone();
                            let mut steps = vec![sub];
                            steps.extend(tms);
                            kids.push((steps, goals, state, fresh));
                        }
                        TmRun::Diverged(tms) => {
                            self.steps_used += tms.len() + 1;
                            diverged = true;
                        }
                    }
                }
                if diverged {
                    self.tm_divergence = true;
                }
                if kids.is_empty() {
                    if diverged {
                        Expansion::Leaf(Leaf::Diverged)
                    } else {
                        Expansion::Leaf(Leaf::DeadEnd)
                    }
                } else {
                    Expansion::Children(kids)
                }
            }
        }
    }

    fn emit(&mut self, node: &Node, outcome: Outcome) {
        let qvars = self.query.vars();
        let trace = DerivationTrace {
            program: self.program.clone(),
            initial: self.query.clone(),
            steps: self.path(node.last),
            outcome,
        };
        self.answers.push(Answer {
            bindings: node.state.restrict(qvars),
            trace,
        });
    }

    fn done(&self) -> bool {
        self.search_budget_hit || self.answers.len() >= self.opts.budget.max_solutions
    }

    /// Depth-first search below `root` with resolution depth bound `limit`.
    /// Only leaves at depth >= `report_from` produce answers.
    fn dfs(&mut self, root: Node, limit: usize, report_from: usize) {
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if self.done() {
                return;
            }
            let at_limit = node.depth >= limit;
            // Leaves are recognised before the depth cut.
            let exp = self.expand(&node);
            match exp {
                Expansion::Leaf(Leaf::Success) => {
                    if node.depth >= report_from {
                        self.emit(&node, Outcome::Success);
                    }
                }
                Expansion::Leaf(Leaf::NormalForm) => {
                    if node.depth >= report_from {
                        self.emit(&node, Outcome::Stuck(node.goals.clone()));
                    }
                }
                Expansion::Leaf(Leaf::DeadEnd) => {
                    if self.first_dead_end.is_none() {
                        self.first_dead_end = Some((node.goals.clone(), node.last));
                    }
                }
                Expansion::Leaf(Leaf::Diverged) => self.tm_divergence = true,
                Expansion::Children(kids) => {
                    if at_limit {
                        self.depth_cut = true;
                        continue;
                    }
                    let mut pushed = Vec::with_capacity(kids.len());
                    for (steps, goals, state, fresh) in kids {
                        if !self.charge(steps.len()) {
                            return;
                        }
                        let last = self.record(node.last, steps);
                        pushed.push(Node {
                            goals,
                            state,
                            fresh,
                            depth: node.depth + 1,
                            last,
                        });
                    }
                    stack.extend(pushed.into_iter().rev());
                }
            }
        }
    }
}

/// Runs `strategy` on `query` and collects answers up to the budget.
pub fn solve(program: &Program, query: &GoalSet, strategy: Strategy, opts: &SolveOptions) -> SolveResult {
    let mut s = Searcher {
        program,
        query,
        strategy,
        opts,
        arena: Vec::new(),
        answers: Vec::new(),
        steps_used: 0,
        depth_cut: false,
        search_budget_hit: false,
        tm_divergence: false,
        first_dead_end: None,
    };
    let mut fresh = derivation_fresh(query);
    let mut root = Node {
        goals: query.clone(),
        state: Substitution::new(),
        fresh: fresh.clone(),
        depth: 0,
        last: None,
    };
    let mut runnable = true;
    if strategy == Strategy::Struct {
        match tm_normalize(program, query, &Substitution::new(), opts.selection, opts.budget.max_tm_steps, &mut fresh) {
            TmRun::Normal(steps) => {
                s.steps_used += steps.len();
                root.goals = steps.last().map(|st| st.goals_after.clone()).unwrap_or_else(|| query.clone());
                root.fresh = fresh;
                root.last = s.record(None, steps);
            }
            TmRun::Diverged(steps) => {
                s.steps_used += steps.len();
                s.tm_divergence = true;
                runnable = false;
            }
        }
    }

    let hard_limit = match strategy {
        Strategy::Tm => opts.budget.max_depth.unwrap_or(usize::MAX).min(opts.budget.max_tm_steps),
        _ => opts.budget.max_depth.unwrap_or(usize::MAX),
    };
    let iterative = match opts.search {
        Search::Auto => strategy != Strategy::Tm,
        Search::DepthFirst => false,
        Search::IterativeDeepening => true,
    };
    if runnable {
        if iterative {
            let mut limit = 0;
            loop {
                s.depth_cut = false;
                s.dfs(root.clone(), limit, limit);
                if s.done() || !s.depth_cut || limit >= hard_limit {
                    break;
                }
                limit += 1;
            }
        } else {
            s.dfs(root, hard_limit, 0);
        }
    }
    // In TM mode hitting max_tm_steps is divergence, not a depth cut.
    if strategy == Strategy::Tm && s.depth_cut && hard_limit == opts.budget.max_tm_steps {
        s.depth_cut = false;
        s.tm_divergence = true;
    }

    let outcome = if s.answers.iter().any(Answer::is_success) {
        Outcome::Success
    } else if s.tm_divergence {
        Outcome::BudgetExhausted(BudgetKind::TmDivergence)
    } else if s.search_budget_hit || s.depth_cut {
        Outcome::BudgetExhausted(BudgetKind::SearchBudget)
    } else if let Some(nf) = s.answers.first() {
        Outcome::Stuck(nf.residue().clone())
    } else {
        Outcome::Stuck(s.first_dead_end.as_ref().map(|d| d.0.clone()).unwrap_or_else(|| query.clone()))
    };
    let dead_end = s.first_dead_end.as_ref().map(|(goals, last)| DerivationTrace {
        program: program.clone(),
        initial: query.clone(),
        steps: s.path(*last),
        outcome: Outcome::Stuck(goals.clone()),
    });
    SolveResult {
        strategy,
        answers: s.answers,
        outcome,
        steps_used: s.steps_used,
        depth_cut: s.depth_cut,
        search_budget_hit: s.search_budget_hit,
        tm_divergence: s.tm_divergence,
        dead_end,
    }
}

// ---------------------------------------------------------------------------
// Replay

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("step {step}: unknown clause `{label}`")]
    UnknownClause { step: usize, label: String },
    #[error("step {step}: selected index {index} out of range")]
    BadIndex { step: usize, index: usize },
    #[error("step {step}: clause instance is not a renaming of `{label}`")]
    BadInstance { step: usize, label: String },
    #[error("step {step}: clause instance is not renamed apart from the goals")]
    NotApart { step: usize },
    #[error("step {step}: {what}")]
    Invalid { step: usize, what: String },
    #[error("outcome does not agree with the final goals")]
    Outcome,
}

/// Re-validates every step of a trace under its claimed rule and state law.
pub fn replay(trace: &DerivationTrace) -> bool {
    replay_checked(trace).is_ok()
}

pub fn replay_checked(trace: &DerivationTrace) -> Result<(), ReplayError> {
    let mut goals = trace.initial.clone();
    let mut state = Substitution::new();
    for (n, step) in trace.steps.iter().enumerate() {
        let n = n + 1;
        let invalid = |what: &str| ReplayError::Invalid {
            step: n,
            what: what.to_string(),
        };
        let clause = trace
            .program
            .clause(&step.clause_label)
            .ok_or_else(|| ReplayError::UnknownClause {
                step: n,
                label: step.clause_label.clone(),
            })?;
        if !clause.alpha_eq(&step.instance) {
            return Err(ReplayError::BadInstance {
                step: n,
                label: clause.label.clone(),
            });
        }
        let target = goals.get(step.selected_index).ok_or(ReplayError::BadIndex {
            step: n,
            index: step.selected_index,
        })?;
        let mut taken: BTreeSet<&str> = goals.vars().into_iter().collect();
        let range = state.range_vars();
        taken.extend(state.domain());
        taken.extend(range.iter().map(String::as_str));
        if step.instance.vars().iter().any(|v| taken.contains(v)) {
            return Err(ReplayError::NotApart { step: n });
        }
        let inst = &step.instance;
        let expected = match step.mode {
            StepMode::Tm => {
                let sigma = match_atom(&inst.head, target).ok_or_else(|| invalid("head does not match the selected goal"))?;
                if sigma != step.local_binding {
                    return Err(invalid("recorded matcher differs"));
                }
                if step.state != state {
                    return Err(invalid("term-matching step changed the state"));
                }
                replace_at(&goals, step.selected_index, sigma.apply(inst.body.as_slice()))
            }
            StepMode::Unif | StepMode::Sub => {
                let gamma = &step.local_binding;
                if gamma.apply(&inst.head) != gamma.apply(target) {
                    return Err(invalid("recorded binding is not a unifier"));
                }
                if !gamma.is_idempotent() {
                    return Err(invalid("recorded unifier is not idempotent"));
                }
                let mgu = unify_atoms(&inst.head, target).ok_or_else(|| invalid("head does not unify"))?;
                let mut vars: Vec<&str> = inst.head.vars();
                target.collect_vars(&mut vars);
                if !is_instance_on(gamma, &mgu, vars.iter().copied()) || !is_instance_on(&mgu, gamma, vars.iter().copied()) {
                    return Err(invalid("recorded unifier is not most general"));
                }
                let allowed: BTreeSet<&str> = goals.vars().into_iter().chain(inst.vars()).collect();
                if gamma.domain().any(|v| !allowed.contains(v)) {
                    return Err(invalid("unifier binds unrelated variables"));
                }
                if step.state != Substitution::compose(gamma, &state) {
                    return Err(invalid("state is not the composition of the step binding and the prior state"));
                }
                if step.mode == StepMode::Unif {
                    gamma.apply(&replace_at(&goals, step.selected_index, inst.body.clone()))
                } else {
                    gamma.apply(&goals)
                }
            }
        };
        if expected != step.goals_after {
            return Err(invalid("goals do not follow from the rule"));
        }
        goals = step.goals_after.clone();
        state = step.state.clone();
    }
    match &trace.outcome {
        Outcome::Success if !goals.is_empty() => Err(ReplayError::Outcome),
        Outcome::Stuck(g) if *g != goals => Err(ReplayError::Outcome),
        _ => Ok(()),
    }
}

/// Groups a LP-Struct trace into `↪·→` pairs; returns `None` unless the
/// trace alternates exactly one substitutional step with one term-matching
/// step on the same clause and position.
pub fn fused_pairs(trace: &DerivationTrace) -> Option<Vec<(&DerivationStep, &DerivationStep)>> {
    let steps = &trace.steps;
    if !steps.len().is_multiple_of(2) {
        return None;
    }
    steps
        .chunks(2)
        .map(|pair| {
            let (sub, tm) = (&pair[0], &pair[1]);
            (sub.mode == StepMode::Sub
                && tm.mode == StepMode::Tm
                && sub.clause_label == tm.clause_label
                && sub.selected_index == tm.selected_index)
                .then_some((sub, tm))
        })
        .collect()
}
