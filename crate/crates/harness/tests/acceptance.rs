//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structres::engine::{fused_pairs, replay, solve, Budget, BudgetKind, Outcome, SolveOptions, Strategy};
use structres::proof::{beta_normalize, extract_proof, is_first_order, represent, RepEnv, DEFAULT_FUEL};
use structres::realize::{transform_program, transform_query, NameScheme};
use structres::subst::{match_atom, unify_atoms, Substitution};
use structres::syntax::{alpha_eq_atoms, parse_program, parse_query, Atom, GoalSet, Program, Term};
use structres_harness::corpus::{generate_corpus, run_corpus};
use structres_harness::oracle::oracle_answers;
use structres_harness::theorems::{check_equiv_struct_unif, CheckBudget, TheoremId, TheoremReport, Verdict};

const CONNECT: &str = "k1: connect(X,Z) <= connect(X,Y), connect(Y,Z).
k2: connect(node1,node2).
k3: connect(node2,node3).
";
const BLIST: &str = "k1: bit(0).
k2: bit(1).
k3: blist(nil).
k4: blist(cons(X,Y)) <= bit(X), blist(Y).
";
const STREAM: &str = "k1: stream(cons(X,Y)) <= bit(X), stream(Y).
k2: bit(0).
k3: bit(1).
";
const OVERLAP: &str = "k1: p(c).
k2: p(X) <= q(X).
";

const CORPUS_SEED: u64 = 0;
const CORPUS_SIZE: usize = 200;
const PAIR_SEED: u64 = 11;
const PAIRS: usize = 1000;

type Check = Result<String, String>;

fn prog(s: &str) -> Program {
    parse_program(s).unwrap()
}

fn q(s: &str) -> GoalSet {
    parse_query(s).unwrap()
}

fn at_depth(d: usize) -> SolveOptions {
    SolveOptions {
        budget: Budget {
            max_depth: Some(d),
            max_solutions: 1000,
            ..Budget::default()
        },
        ..SolveOptions::default()
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixed(vars: &[&str]) -> BTreeSet<String> {
    vars.iter().map(|v| v.to_string()).collect()
}

fn connect_answers() -> Check {
    let p = prog(CONNECT);
    let r = solve(&p, &q("connect(X,Y)"), Strategy::Unif, &at_depth(4));
    let mut got: Vec<String> = r.successes().map(|a| a.bindings.to_string()).collect();
    got.sort();
    got.dedup();
    let want = ["{X=node1, Y=node2}", "{X=node1, Y=node3}", "{X=node2, Y=node3}"];
    ensure(got == want, format!("answers {got:?}"))?;
    let oracle: Vec<String> = oracle_answers(&p, &q("connect(X,Y)"), Strategy::Unif, 4).iter().map(ToString::to_string).collect();
    ensure(oracle == want, format!("oracle gives {oracle:?}"))?;
    let three = r
        .successes()
        .find(|a| {
            let labels: Vec<&str> = a.trace.steps.iter().map(|s| s.clause_label.as_str()).collect();
            labels == ["k1", "k2", "k3"]
        })
        .ok_or("no k1,k2,k3 derivation")?;
    ensure(three.render() == "X = node1, Y = node3", three.render())?;
    ensure(r.answers.iter().all(|a| replay(&a.trace)), "a trace does not replay")?;
    Ok(format!("{} answers, oracle agrees, k1,k2,k3 derivation present", got.len()))
}

fn blist_runs() -> Check {
    let p = prog(BLIST);
    let tm = solve(&p, &q("blist(cons(X,Y))"), Strategy::Tm, &SolveOptions::default());
    ensure(tm.outcome == Outcome::Stuck(q("bit(X), blist(Y)")), tm.outcome.to_string())?;
    let unif = solve(&p, &q("blist(cons(X,Y))"), Strategy::Unif, &at_depth(4));
    let answers: Vec<String> = unif.successes().map(|a| a.render()).collect();
    ensure(answers.iter().any(|a| a == "X = 0, Y = nil"), format!("{answers:?}"))?;
    Ok(format!("tm normal form {{bit(X), blist(Y)}}, unif answers {answers:?}"))
}

fn divergence() -> Check {
    let (connect, stream) = (prog(CONNECT), prog(STREAM));
    let mut runs = 0;
    for n in [10, 11, 25, 50, 100, 200, 500, 1000] {
        for (steps, tm) in [(n, n), (n, 1000), (10_000, n)] {
            let opts = SolveOptions {
                budget: Budget {
                    max_steps: steps,
                    max_tm_steps: tm,
                    ..Budget::default()
                },
                ..SolveOptions::default()
            };
            let a = solve(&connect, &q("connect(X,Y)"), Strategy::Tm, &opts);
            let b = solve(&stream, &q("stream(cons(X,Y))"), Strategy::Unif, &opts);
            for r in [&a, &b] {
                ensure(
                    matches!(r.outcome, Outcome::BudgetExhausted(_)) && r.successes().next().is_none(),
                    format!("steps={steps} tm={tm}: {}", r.outcome),
                )?;
            }
            runs += 2;
        }
    }
    let tm = solve(&connect, &q("connect(X,Y)"), Strategy::Tm, &SolveOptions::default());
    ensure(tm.outcome == Outcome::BudgetExhausted(BudgetKind::TmDivergence), tm.outcome.to_string())?;
    Ok(format!("{runs} bounded runs end in budget outcomes"))
}

fn overlap_program() -> Check {
    let p = prog(OVERLAP);
    let u = solve(&p, &q("p(X)"), Strategy::Unif, &SolveOptions::default());
    let answers: Vec<String> = u.successes().map(|a| a.bindings.to_string()).collect();
    ensure(answers == ["{X=c}"], format!("{answers:?}"))?;
    let s = solve(&p, &q("p(X)"), Strategy::Struct, &SolveOptions::default());
    ensure(s.outcome == Outcome::Stuck(q("q(X)")), s.outcome.to_string())?;
    Ok(format!("unif {{X=c}}, struct {}", s.outcome))
}

fn realizability_connect() -> Check {
    let s = NameScheme::default();
    let fp = transform_program(&prog(CONNECT), &s).map_err(|e| e.to_string())?;
    // Expected transform, written out by hand.
    let expected = prog(
        "k1: connect(X,Z,f_k1(U1,U2)) <= connect(X,Y,U1), connect(Y,Z,U2).
k2: connect(node1,node2,c_k2).
k3: connect(node2,node3,c_k3).",
    );
    ensure(fp.clauses.len() == 3, "clause count")?;
    for (a, b) in fp.clauses.iter().zip(&expected.clauses) {
        ensure(a.label == b.label && a.alpha_eq(b), format!("{a} differs from {b}"))?;
    }
    let r = solve(&fp, &transform_query(&q("connect(X,Y)"), &s), Strategy::Struct, &at_depth(4));
    let a = r
        .successes()
        .find(|a| a.bindings.get("X") == Some(&Term::constant("node1")) && a.bindings.get("Y") == Some(&Term::constant("node3")))
        .ok_or("no struct answer for node1, node3")?;
    let u = a.bindings.get("_P0").map(ToString::to_string).unwrap_or_default();
    ensure(u == "f_k1(c_k2,c_k3)", format!("U = {u}"))?;
    let pairs = fused_pairs(&a.trace).ok_or("not an alternation of sub and tm steps")?;
    let shape: Vec<String> = a.trace.steps.iter().map(|s| format!("{}:{}", s.mode, s.clause_label)).collect();
    ensure(
        shape == ["sub:k1", "tm:k1", "sub:k2", "tm:k2", "sub:k3", "tm:k3"],
        format!("shape {shape:?}"),
    )?;
    let keep = fixed(&["X", "Y"]);
    let after: Vec<&GoalSet> = pairs.iter().map(|(_, tm)| &tm.goals_after).collect();
    ensure(alpha_eq_atoms(after[0], &q("connect(X,W,V1), connect(W,Y,V2)"), &keep), after[0].to_string())?;
    ensure(alpha_eq_atoms(after[1], &q("connect(node2,Y,V2)"), &keep), after[1].to_string())?;
    ensure(after[2].is_empty(), after[2].to_string())?;
    ensure(replay(&a.trace), "struct trace does not replay")?;
    Ok(format!("transform matches, U = {u}, shape {}", shape.join(" ")))
}

fn proof_recording() -> Check {
    let s = NameScheme::default();
    let fp = transform_program(&prog(CONNECT), &s).map_err(|e| e.to_string())?;
    let goal = transform_query(&q("connect(node1,node3)"), &s);
    let r = solve(&fp, &goal, Strategy::Unif, &at_depth(3));
    let a = r.successes().next().ok_or("no success")?;
    let ex = extract_proof(&a.trace).map_err(|e| e.to_string())?;
    let n = beta_normalize(&ex[0].judgement.proof, DEFAULT_FUEL).map_err(|e| e.to_string())?;
    ensure(n.to_string() == "(k1 k2) k3", format!("normal form {n}"))?;
    ensure(is_first_order(&n), "not first order")?;
    let rep = represent(&n, &RepEnv::new(), &s).map_err(|e| e.to_string())?;
    let bound = a.trace.final_state().apply(&Term::var("_P0"));
    ensure(rep == bound, format!("represent gives {rep}, U = {bound}"))?;
    Ok(format!("{n} represents {rep}"))
}

struct CorpusRun {
    reports: Vec<TheoremReport>,
}

impl CorpusRun {
    fn of(&self, t: TheoremId) -> impl Iterator<Item = &TheoremReport> {
        self.reports.iter().filter(move |r| r.theorem == t)
    }

    /// No refutation; inconclusive only for lack of evidence, never for budget.
    fn all_hold(&self, t: TheoremId, min_holds: usize) -> Check {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in self.of(t) {
            match &r.verdict {
                Verdict::Holds => *counts.entry("holds").or_default() += 1,
                Verdict::Refuted { counterexample } => {
                    return Err(format!(
                        "seed {:?} refuted: {:?} ({} replayable traces)",
                        r.seed,
                        r.details,
                        counterexample.iter().filter(|t| replay(t)).count()
                    ))
                }
                Verdict::Inconclusive { reason } if reason.starts_with("no ") => *counts.entry("no-evidence").or_default() += 1,
                Verdict::Inconclusive { reason } => return Err(format!("seed {:?} inconclusive: {reason}", r.seed)),
            }
        }
        let holds = counts.get("holds").copied().unwrap_or(0);
        ensure(holds >= min_holds, format!("only {holds} items hold"))?;
        ensure(counts.values().sum::<usize>() == CORPUS_SIZE, "missing reports")?;
        Ok(format!(
            "{holds}/{CORPUS_SIZE} hold, {} without successes to compare",
            counts.get("no-evidence").copied().unwrap_or(0)
        ))
    }
}

fn soundness(c: &CorpusRun) -> Check {
    c.all_hold(TheoremId::Soundness, 1)
}

fn measure(c: &CorpusRun) -> Check {
    c.all_hold(TheoremId::Productivity, CORPUS_SIZE)
}

fn preservation(c: &CorpusRun) -> Check {
    c.all_hold(TheoremId::Preservation, CORPUS_SIZE / 2)
}

fn equivalence(c: &CorpusRun) -> Check {
    let corpus = c.all_hold(TheoremId::Equiv, CORPUS_SIZE / 2)?;
    let b = CheckBudget::default();
    let raw = check_equiv_struct_unif(&prog(OVERLAP), &q("p(X)"), &b);
    match &raw.verdict {
        Verdict::Refuted { counterexample } => {
            ensure(counterexample.len() == 2 && counterexample.iter().all(replay), "overlap counterexample not replayable")?;
            let modes: Vec<Outcome> = counterexample.iter().map(|t| t.outcome.clone()).collect();
            ensure(modes == [Outcome::Success, Outcome::Stuck(q("q(X)"))], format!("{modes:?}"))?;
        }
        other => return Err(format!("raw overlap program: {other}")),
    }
    Ok(format!("{corpus}; raw overlap program refuted"))
}

fn decomposition(c: &CorpusRun) -> Check {
    let detail = c.all_hold(TheoremId::Decomposition, 1)?;
    let mut split = 0;
    let mut fused = 0;
    for r in c.of(TheoremId::Decomposition) {
        if let Some(line) = r.details.iter().find(|d| d.contains("unif steps split")) {
            let nums: Vec<usize> = line.split_whitespace().filter_map(|w| w.parse().ok()).collect();
            split += nums[0];
            fused += nums[1];
        }
    }
    ensure(split > 0 && fused > 0, "nothing decomposed")?;
    Ok(format!("{detail}; {split} unif steps split, {fused} struct pairs fused"))
}

// ---------------------------------------------------------------------------
// Unification oracle: equation solving over explicit equation sets.

fn solve_equations(mut eqs: Vec<(Term, Term)>) -> Option<BTreeMap<String, Term>> {
    let mut sol: BTreeMap<String, Term> = BTreeMap::new();
    while let Some((l, r)) = eqs.pop() {
        match (l, r) {
            (Term::Var(x), Term::Var(y)) if x == y => {}
            (Term::Var(x), t) | (t, Term::Var(x)) => {
                if t.occurs(&x) {
                    return None;
                }
                let one = Substitution::singleton(x.clone(), t.clone());
                for e in eqs.iter_mut() {
                    *e = (one.apply(&e.0), one.apply(&e.1));
                }
                for v in sol.values_mut() {
                    *v = one.apply(&*v);
                }
                sol.insert(x, t);
            }
            (Term::App(f, xs), Term::App(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                eqs.extend(xs.into_iter().zip(ys));
            }
        }
    }
    Some(sol)
}

fn oracle_mgu(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let sol = solve_equations(a.args.iter().cloned().zip(b.args.iter().cloned()).collect())?;
    Some(Substitution::from_pairs(sol))
}

/// `general` is at least as general as `specific` on `vars`.
fn more_general(general: &Substitution, specific: &Substitution, vars: &BTreeSet<String>) -> bool {
    vars.iter().all(|v| {
        let x = Term::var(v.clone());
        specific.apply(&general.apply(&x)) == specific.apply(&x)
    })
}

struct PairGen {
    rng: ChaCha8Rng,
}

impl PairGen {
    fn term(&mut self, depth: usize) -> Term {
        const VARS: [&str; 4] = ["X", "Y", "Z", "W"];
        const CONSTS: [&str; 3] = ["a", "b", "c"];
        if depth == 0 || self.rng.gen_bool(0.4) {
            if self.rng.gen_bool(0.6) {
                Term::var(*VARS.choose(&mut self.rng).unwrap())
            } else {
                Term::constant(*CONSTS.choose(&mut self.rng).unwrap())
            }
        } else if self.rng.gen_bool(0.5) {
            Term::app("f", vec![self.term(depth - 1)])
        } else {
            Term::app("g", vec![self.term(depth - 1), self.term(depth - 1)])
        }
    }

    fn atom(&mut self) -> Atom {
        Atom::new("p", (0..3).map(|_| self.term(3)).collect())
    }

    fn instance_of(&mut self, a: &Atom) -> Atom {
        let vars: Vec<String> = a.vars().into_iter().map(str::to_string).collect();
        let s = Substitution::from_pairs(vars.into_iter().map(|v| {
            let t = self.term(2);
            (v, t)
        }));
        s.apply(a)
    }
}

fn atom_vars(atoms: &[&Atom]) -> BTreeSet<String> {
    atoms.iter().flat_map(|a| a.vars()).map(str::to_string).collect()
}

fn unification_properties() -> Check {
    let mut g = PairGen {
        rng: ChaCha8Rng::seed_from_u64(PAIR_SEED),
    };
    let (mut unifiable, mut clashes, mut occurs, mut matched) = (0, 0, 0, 0);
    for i in 0..PAIRS {
        let a = g.atom();
        let b = if g.rng.gen_bool(0.5) { g.atom() } else { g.instance_of(&a) };
        let vars = atom_vars(&[&a, &b]);
        match (unify_atoms(&a, &b), oracle_mgu(&a, &b)) {
            (Some(s), Some(o)) => {
                ensure(s.apply(&a) == s.apply(&b), format!("pair {i}: {s} does not unify {a} and {b}"))?;
                ensure(s.is_idempotent(), format!("pair {i}: {s} is not idempotent"))?;
                ensure(o.apply(&a) == o.apply(&b), format!("pair {i}: oracle answer wrong"))?;
                ensure(
                    more_general(&s, &o, &vars) && more_general(&o, &s, &vars),
                    format!("pair {i}: {s} and oracle {o} are not instances of each other"),
                )?;
                unifiable += 1;
            }
            (None, None) => clashes += 1,
            (s, o) => return Err(format!("pair {i}: {a} vs {b}: engine {s:?}, oracle {o:?}")),
        }
        // Occurs check: a variable against a proper term containing it.
        if let Some(v) = a.vars().first().map(|v| v.to_string()) {
            let t = Term::app("g", vec![g.term(2), Term::var(v.clone())]);
            let l = Atom::new("q", vec![Term::var(v.clone())]);
            let r = Atom::new("q", vec![t]);
            ensure(unify_atoms(&l, &r).is_none(), format!("pair {i}: occurs check missed on {l} = {r}"))?;
            ensure(oracle_mgu(&l, &r).is_none(), "oracle occurs check")?;
            occurs += 1;
        }
        // Matching implies unification once the pattern is renamed apart.
        let apart: std::collections::HashMap<String, String> = a.vars().iter().map(|v| (v.to_string(), format!("{v}1"))).collect();
        let pattern = Atom::new(
            a.predicate.clone(),
            a.args.iter().map(|t| t.rename(&apart)).collect(),
        );
        if let Some(m) = match_atom(&pattern, &b) {
            ensure(m.apply(&pattern) == b, format!("pair {i}: matcher {m} does not map {pattern} to {b}"))?;
            let u = unify_atoms(&pattern, &b).ok_or(format!("pair {i}: {pattern} matches {b} but does not unify"))?;
            let all = atom_vars(&[&pattern, &b]);
            ensure(more_general(&u, &m, &all), format!("pair {i}: mgu {u} not more general than matcher {m}"))?;
            matched += 1;
        }
    }
    ensure(unifiable > 50 && clashes > 50 && matched > 50, format!("weak sample: {unifiable}/{clashes}/{matched}"))?;
    Ok(format!(
        "{PAIRS} pairs: {unifiable} unifiable, {clashes} not, {occurs} occurs-check cases, {matched} matches"
    ))
}

// ---------------------------------------------------------------------------

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let line = match &result {
        Ok(detail) => format!("PASS {id:>2} {name}: {detail}\n"),
        Err(why) => format!("FAIL {id:>2} {name}: {why}\n"),
    };
    // Written past the test harness capture so the lines always show.
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes()).and_then(|_| out.flush());
    result.is_ok()
}

#[test]
fn acceptance() {
    let items = generate_corpus(CORPUS_SEED, CORPUS_SIZE);
    let budget = CheckBudget::default();
    let corpus = CorpusRun {
        reports: run_corpus(&items, &TheoremId::ALL, &budget, false),
    };

    let results = [
        run(1, "connect answers", connect_answers),
        run(2, "blist normal form and answers", blist_runs),
        run(3, "divergence under every budget", divergence),
        run(4, "overlap program", overlap_program),
        run(5, "realizability transform and struct run", realizability_connect),
        run(6, "proof recording", proof_recording),
        run(7, "soundness of extracted proofs", || soundness(&corpus)),
        run(8, "measure decrease on transformed programs", || measure(&corpus)),
        run(9, "preservation under the transform", || preservation(&corpus)),
        run(10, "struct and unif equivalence", || equivalence(&corpus)),
        run(11, "unification and matching", unification_properties),
        run(12, "step decomposition", || decomposition(&corpus)),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
