//! Seeded random programs and queries.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use structres::syntax::{Atom, GoalSet, HornClause, Program, Term};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub max_clauses: usize,
    pub max_body: usize,
    pub max_arity: usize,
    pub max_term_depth: usize,
    /// Function symbols with their arities.
    pub functors: Vec<(String, usize)>,
    pub predicates: Vec<String>,
    pub variables: Vec<String>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_clauses: 5,
            max_body: 2,
            max_arity: 2,
            max_term_depth: 3,
            functors: vec![("a".into(), 0), ("b".into(), 0), ("s".into(), 1), ("f".into(), 2)],
            predicates: vec!["p".into(), "q".into(), "r".into()],
            variables: vec!["X".into(), "Y".into(), "Z".into()],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..GenConfig::default() }
    }

    pub fn is_valid(&self) -> bool {
        self.max_clauses >= 1
            && self.max_term_depth >= 1
            && !self.predicates.is_empty()
            && !self.variables.is_empty()
            && self.functors.iter().any(|(_, n)| *n == 0)
    }
}

struct Gen<'a> {
    cfg: &'a GenConfig,
    rng: ChaCha8Rng,
    arities: Vec<usize>,
}

impl Gen<'_> {
    fn term(&mut self, depth: usize) -> Term {
        let cfg = self.cfg;
        if depth <= 1 || self.rng.gen_bool(0.45) {
            if self.rng.gen_bool(0.55) {
                Term::var(cfg.variables.choose(&mut self.rng).expect("variables").clone())
            } else {
                let consts: Vec<&String> = cfg.functors.iter().filter(|f| f.1 == 0).map(|f| &f.0).collect();
                Term::constant((*consts.choose(&mut self.rng).expect("constants")).clone())
            }
        } else {
            let (f, n) = cfg.functors.choose(&mut self.rng).expect("functors").clone();
            Term::app(f, (0..n).map(|_| self.term(depth - 1)).collect())
        }
    }

    fn atom(&mut self, pred: usize) -> Atom {
        let depth = self.cfg.max_term_depth;
        let args = (0..self.arities[pred]).map(|_| self.term(depth)).collect();
        Atom::new(self.cfg.predicates[pred].clone(), args)
    }

    fn pred(&mut self) -> usize {
        self.rng.gen_range(0..self.cfg.predicates.len())
    }
}

fn generator(cfg: &GenConfig, stream: u64) -> Gen<'_> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let arities = cfg.predicates.iter().map(|_| rng.gen_range(0..=cfg.max_arity)).collect();
    Gen { cfg, rng, arities }
}

/// Arity-consistent program; identical for identical configurations.
pub fn generate_program(cfg: &GenConfig) -> Program {
    let mut g = generator(cfg, 0);
    let n = g.rng.gen_range(1..=cfg.max_clauses);
    let clauses = (1..=n)
        .map(|i| {
            let head_pred = g.pred();
            let head = g.atom(head_pred);
            let m = g.rng.gen_range(0..=cfg.max_body);
            let body = (0..m)
                .map(|_| {
                    let p = g.pred();
                    g.atom(p)
                })
                .collect();
            HornClause::new(format!("k{i}"), body, head)
        })
        .collect();
    Program::new(clauses)
}

/// A single-atom query over a predicate defined by `program` (or any
/// predicate when the program is empty). Usually a clause head with some
/// arguments generalised to variables.
pub fn generate_query(cfg: &GenConfig, program: &Program) -> GoalSet {
    let mut g = generator(cfg, 1);
    if !program.clauses.is_empty() && g.rng.gen_bool(0.75) {
        let head = &program.clauses[g.rng.gen_range(0..program.clauses.len())].head;
        let args = head
            .args
            .iter()
            .map(|t| {
                if g.rng.gen_bool(0.4) {
                    Term::var(cfg.variables.choose(&mut g.rng).expect("variables").clone())
                } else {
                    t.clone()
                }
            })
            .collect();
        return GoalSet(vec![Atom::new(head.predicate.clone(), args)]);
    }
    let defined: Vec<usize> = (0..cfg.predicates.len())
        .filter(|&i| program.clauses.iter().any(|c| c.head.predicate == cfg.predicates[i]))
        .collect();
    let pred = defined.choose(&mut g.rng).copied().unwrap_or(0);
    let depth = cfg.max_term_depth.min(2);
    let args = (0..g.arities[pred]).map(|_| g.term(depth)).collect();
    GoalSet(vec![Atom::new(cfg.predicates[pred].clone(), args)])
}
