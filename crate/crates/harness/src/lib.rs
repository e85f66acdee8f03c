//! Random program generation, a reference enumerator and the differential
//! checks that compare the three resolution strategies.

pub mod corpus;
pub mod gen;
pub mod oracle;
pub mod theorems;

pub use corpus::{corpus_report, generate_corpus, run_corpus, CorpusItem, CorpusReport};
pub use gen::{generate_program, generate_query, GenConfig};
pub use oracle::{oracle_answers, oracle_run, OracleResult};
pub use theorems::{run_checks, CheckBudget, TheoremId, TheoremReport, Verdict};
