//! Seeded corpora of random programs and the parallel differential run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use structres::syntax::{GoalSet, Program};

use crate::gen::{generate_program, generate_query, GenConfig};
use crate::theorems::{run_checks, tally, CheckBudget, Tally, TheoremId, TheoremReport};

pub const DEFAULT_CORPUS_SIZE: usize = 200;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub seed: u64,
    pub program: Program,
    pub query: GoalSet,
}

/// Seed of the `i`th item of the corpus drawn from `seed`.
pub fn item_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

pub fn generate_corpus(seed: u64, count: usize) -> Vec<CorpusItem> {
    (0..count)
        .map(|i| {
            let cfg = GenConfig::with_seed(item_seed(seed, i));
            let program = generate_program(&cfg);
            let query = generate_query(&cfg, &program);
            CorpusItem {
                seed: cfg.seed,
                program,
                query,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub items: usize,
    pub reports: Vec<TheoremReport>,
    pub summary: BTreeMap<TheoremId, Tally>,
}

impl CorpusReport {
    pub fn refutations(&self) -> impl Iterator<Item = &TheoremReport> {
        self.reports.iter().filter(|r| r.verdict.is_refuted())
    }

    pub fn summary_table(&self) -> String {
        let mut s = format!("{:<14} {:>6} {:>8} {:>13}\n", "theorem", "holds", "refuted", "inconclusive");
        for (t, n) in &self.summary {
            let _ = writeln!(s, "{:<14} {:>6} {:>8} {:>13}", t.name(), n.holds, n.refuted, n.inconclusive);
        }
        s
    }
}

/// Runs `theorems` on every item in parallel; results keep corpus order.
pub fn run_corpus(items: &[CorpusItem], theorems: &[TheoremId], budget: &CheckBudget, raw: bool) -> Vec<TheoremReport> {
    items
        .par_iter()
        .map(|it| {
            let mut rs = run_checks(&it.program, &it.query, theorems, budget, raw);
            for r in &mut rs {
                r.seed = Some(it.seed);
            }
            rs
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

pub fn corpus_report(seed: u64, count: usize, theorems: &[TheoremId], budget: &CheckBudget, raw: bool) -> CorpusReport {
    let items = generate_corpus(seed, count);
    let reports = run_corpus(&items, theorems, budget, raw);
    CorpusReport {
        seed,
        items: count,
        summary: tally(&reports),
        reports,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded() {
        assert_eq!(generate_corpus(7, 5), generate_corpus(7, 5));
        assert_ne!(generate_corpus(7, 5), generate_corpus(8, 5));
        assert_eq!(generate_corpus(7, 5)[3].seed, item_seed(7, 3));
    }

    #[test]
    fn small_run_is_ordered() {
        let items = generate_corpus(1, 6);
        let rs = run_corpus(&items, &[TheoremId::Oracle, TheoremId::Equiv], &CheckBudget::default(), false);
        assert_eq!(rs.len(), 12);
        for (i, pair) in rs.chunks(2).enumerate() {
            assert_eq!(pair[0].seed, Some(items[i].seed));
            assert_eq!(pair[0].theorem, TheoremId::Oracle);
        }
    }
}
