use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use structres::engine::{solve, Budget, Outcome, Search, Selection, SolveOptions, SolveResult, Strategy};
use structres::proof::{beta_normalize, check_judgement, extract_proof, is_first_order, represent, Judgement, RepEnv, DEFAULT_FUEL};
use structres::realize::{check_non_overlapping, check_productivity, transform_program, CertificateKind, MeasureSpec, NameScheme};
use structres::syntax::{parse_program, parse_query, query_warnings, GoalSet, Program, Term};
use structres_harness::corpus::{corpus_report, DEFAULT_CORPUS_SIZE};
use structres_harness::theorems::{run_checks, tally, CheckBudget, TheoremId, TheoremReport, Verdict};

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_USAGE: u8 = 3;

/// Structural resolution for Horn clause programs.
#[derive(Parser, Debug)]
#[command(name = "structres", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Total reduction steps per search [default: 10000, 20000 for diff].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: Option<u64>,
    /// Steps allowed in one term-matching run before it counts as divergent
    /// [default: 1000, 200 for diff].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_tm_steps: Option<u64>,
    /// Answers reported before the search stops.
    #[arg(long, global = true, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    max_solutions: u64,
    /// Bound on resolution depth [default: none for solve/prove, 6 for diff].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    max_depth: Option<u64>,
    /// Search order: auto, depth-first or iterative-deepening.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_search)]
    search: Search,
    /// Atom selection rule: leftmost or rightmost.
    #[arg(long, global = true, default_value = "leftmost")]
    selection: Selection,
    /// Write derivation traces in line format to this file.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Write the full result as JSON to this file.
    #[arg(long, global = true)]
    trace_json: Option<PathBuf>,
    /// Seed for generated corpora.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a query with LP-Unif, LP-TM or LP-Struct.
    Solve {
        program: PathBuf,
        query: String,
        /// unif, tm or struct.
        #[arg(long, default_value = "unif")]
        mode: Strategy,
    },
    /// Print the realizability transform of a program.
    Transform {
        program: PathBuf,
        /// Output file instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Report overlapping heads and a productivity certificate.
    Check {
        program: PathBuf,
        /// Measured argument per predicate, 1-based, e.g. `stream=1,bit=1`.
        #[arg(long, value_parser = parse_measure)]
        measure: Option<MeasureSpec>,
        /// Term-matching depth explored when no measure applies.
        #[arg(long, default_value_t = 8)]
        bound: usize,
    },
    /// Extract, normalise and check the proof of a query.
    Prove { program: PathBuf, query: String },
    /// Differential checks on one program or on a generated corpus.
    Diff {
        program: Option<PathBuf>,
        query: Option<String>,
        /// Comma separated subset of: equiv, preservation, record, stepwise,
        /// soundness, productivity, decomposition, oracle.
        #[arg(long, value_delimiter = ',')]
        theorems: Vec<TheoremId>,
        /// Run equiv and stepwise on the program as given.
        #[arg(long)]
        raw: bool,
        /// Use a generated corpus instead of a program file.
        #[arg(long)]
        corpus: bool,
        /// Number of corpus programs.
        #[arg(long, default_value_t = DEFAULT_CORPUS_SIZE)]
        count: usize,
        /// Write one JSON record per report line to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_search(s: &str) -> Result<Search, String> {
    match s {
        "auto" => Ok(Search::Auto),
        "dfs" | "depth-first" => Ok(Search::DepthFirst),
        "iddfs" | "iterative-deepening" => Ok(Search::IterativeDeepening),
        other => Err(format!("unknown search `{other}`")),
    }
}

fn parse_measure(s: &str) -> Result<MeasureSpec, String> {
    let mut m = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (pred, pos) = part.split_once('=').ok_or_else(|| format!("expected pred=position, got `{part}`"))?;
        let pos: usize = pos.trim().parse().map_err(|_| format!("bad position in `{part}`"))?;
        if pos == 0 {
            return Err("positions are 1-based".into());
        }
        m.insert(pred.trim().to_string(), pos - 1);
    }
    Ok(MeasureSpec(m))
}

struct Failure(u8, String);

type Run = Result<u8, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn read_program(path: &Path) -> Result<Program, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let p = parse_program(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    p.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(p)
}

fn read_query(p: &Program, text: &str) -> Result<GoalSet, Failure> {
    let q = parse_query(text).map_err(|e| usage(format!("query: {e}")))?;
    for w in query_warnings(p, &q) {
        eprintln!("{w}");
    }
    Ok(q)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl Global {
    fn options(&self) -> SolveOptions {
        let d = Budget::default();
        SolveOptions {
            budget: Budget {
                max_steps: self.max_steps.map_or(d.max_steps, |n| n as usize),
                max_tm_steps: self.max_tm_steps.map_or(d.max_tm_steps, |n| n as usize),
                max_solutions: self.max_solutions as usize,
                max_depth: self.max_depth.map(|d| d as usize),
            },
            selection: self.selection,
            search: self.search,
        }
    }

    fn write_traces(&self, r: &SolveResult) -> Result<(), Failure> {
        if let Some(path) = &self.trace {
            let mut traces: Vec<String> = r.answers.iter().map(|a| a.trace.to_lines()).collect();
            if traces.is_empty() {
                traces.extend(r.dead_end.iter().map(|t| t.to_lines()));
            }
            write_file(path, &traces.join("\n"))?;
        }
        if let Some(path) = &self.trace_json {
            let json = serde_json::to_string_pretty(r).map_err(|e| usage(e.to_string()))?;
            write_file(path, &json)?;
        }
        Ok(())
    }
}

fn exit_for(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Success => EXIT_OK,
        Outcome::Stuck(_) => EXIT_FAIL,
        Outcome::BudgetExhausted(_) => EXIT_BUDGET,
    }
}

fn cmd_solve(g: &Global, program: &Path, query: &str, mode: Strategy) -> Run {
    let p = read_program(program)?;
    let q = read_query(&p, query)?;
    let r = solve(&p, &q, mode, &g.options());
    let answers: Vec<String> = r.successes().map(|a| a.render()).collect();
    for (i, a) in answers.iter().enumerate() {
        if i + 1 < answers.len() {
            println!("{a} ;");
        } else {
            println!("{a}");
        }
    }
    println!("{}", r.outcome);
    g.write_traces(&r)?;
    Ok(exit_for(&r.outcome))
}

fn cmd_transform(program: &Path, output: Option<&Path>) -> Run {
    let p = read_program(program)?;
    let fp = transform_program(&p, &NameScheme::default()).map_err(|e| usage(e.to_string()))?;
    let text = fp.to_string();
    match output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(EXIT_OK)
}

fn cmd_check(program: &Path, measure: Option<MeasureSpec>, bound: usize) -> Run {
    let p = read_program(program)?;
    let mut code = EXIT_OK;
    match check_non_overlapping(&p) {
        Ok(()) => println!("non-overlapping: yes"),
        Err(w) => {
            println!("non-overlapping: no witness={w}");
            code = EXIT_FAIL;
        }
    }
    let spec = measure.unwrap_or_default();
    let cert = check_productivity(&p, &spec, bound).map_err(|e| usage(e.to_string()))?;
    println!("productivity: {cert}");
    match &cert.kind {
        CertificateKind::Refuted { witness } => {
            print!("{}", witness.to_lines());
            code = EXIT_FAIL;
        }
        CertificateKind::Unknown if code == EXIT_OK => code = EXIT_BUDGET,
        _ => {}
    }
    Ok(code)
}

/// Every clause carries its own proof functor in the last head argument.
fn is_transformed(p: &Program, scheme: &NameScheme) -> bool {
    !p.is_empty()
        && p.clauses.iter().all(|c| match c.head.args.last() {
            Some(Term::App(f, args)) => *f == scheme.proof_fun(&c.label, args.len()),
            _ => false,
        })
}

fn cmd_prove(g: &Global, program: &Path, query: &str) -> Run {
    let p = read_program(program)?;
    let q = read_query(&p, query)?;
    let scheme = NameScheme::default();
    let r = solve(&p, &q, Strategy::Unif, &g.options());
    g.write_traces(&r)?;
    let Some(a) = r.successes().next() else {
        println!("{}", r.outcome);
        return Ok(exit_for(&r.outcome));
    };
    println!("answer: {}", a.render());
    let extracted = extract_proof(&a.trace).map_err(|e| Failure(EXIT_FAIL, e.to_string()))?;
    let gamma = a.trace.final_state();
    let mut code = EXIT_OK;
    for e in extracted {
        let n = beta_normalize(&e.judgement.proof, DEFAULT_FUEL).map_err(|e| Failure(EXIT_BUDGET, e.to_string()))?;
        let j = Judgement {
            proof: n.clone(),
            ..e.judgement
        };
        println!("proof: {n}");
        println!("judgement: {j}");
        if is_transformed(&p, &scheme) && is_first_order(&n) {
            let rep = represent(&n, &RepEnv::new(), &scheme).map_err(|e| Failure(EXIT_FAIL, e.to_string()))?;
            let recorded = e.goal.args.last().map(|t| gamma.apply(t));
            let agrees = recorded.as_ref() == Some(&rep);
            println!("representation: {rep} recorded={}", if agrees { "yes" } else { "no" });
            if !agrees {
                code = EXIT_FAIL;
            }
        }
        match check_judgement(&p, &j) {
            Ok(()) => println!("check: ok"),
            Err(err) => {
                println!("check: failed {err}");
                code = EXIT_FAIL;
            }
        }
    }
    Ok(code)
}

fn print_report(r: &TheoremReport) {
    let seed = r.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
    println!("{}{seed}: {}", r.theorem, r.verdict);
    for d in &r.details {
        println!("  {d}");
    }
    if let Verdict::Refuted { counterexample } = &r.verdict {
        println!("  program: {}", r.program.to_string().replace('\n', " "));
        println!("  query: {}", r.query);
        for t in counterexample {
            for line in t.to_lines().lines() {
                println!("  | {line}");
            }
        }
    }
}

struct DiffArgs {
    program: Option<PathBuf>,
    query: Option<String>,
    theorems: Vec<TheoremId>,
    raw: bool,
    corpus: bool,
    count: usize,
    report: Option<PathBuf>,
}

fn cmd_diff(g: &Global, d: DiffArgs) -> Run {
    let base = CheckBudget::default();
    let budget = CheckBudget {
        depth: g.max_depth.map_or(base.depth, |x| x as usize),
        max_steps: g.max_steps.map_or(base.max_steps, |x| x as usize),
        max_tm_steps: g.max_tm_steps.map_or(base.max_tm_steps, |x| x as usize),
        ..base
    };
    let theorems = if d.theorems.is_empty() { TheoremId::ALL.to_vec() } else { d.theorems };
    let reports = if d.corpus {
        if d.program.is_some() {
            return Err(usage("--corpus takes no program file"));
        }
        let r = corpus_report(g.seed, d.count, &theorems, &budget, d.raw);
        for rep in r.refutations() {
            print_report(rep);
        }
        print!("{}", r.summary_table());
        r.reports
    } else {
        let (Some(path), Some(query)) = (d.program, d.query) else {
            return Err(usage("diff needs a program and a query, or --corpus"));
        };
        let p = read_program(&path)?;
        let q = read_query(&p, &query)?;
        let reports = run_checks(&p, &q, &theorems, &budget, d.raw);
        reports.iter().for_each(print_report);
        reports
    };
    if let Some(path) = d.report {
        let mut text = String::new();
        for r in &reports {
            text.push_str(&serde_json::to_string(r).map_err(|e| usage(e.to_string()))?);
            text.push('\n');
        }
        write_file(&path, &text)?;
    }
    let refuted = tally(&reports).values().map(|t| t.refuted).sum::<usize>();
    Ok(if refuted > 0 { EXIT_FAIL } else { EXIT_OK })
}

fn run(cli: Cli) -> Run {
    let g = &cli.global;
    match cli.command {
        Command::Solve { program, query, mode } => cmd_solve(g, &program, &query, mode),
        Command::Transform { program, output } => cmd_transform(&program, output.as_deref()),
        Command::Check { program, measure, bound } => cmd_check(&program, measure, bound),
        Command::Prove { program, query } => cmd_prove(g, &program, &query),
        Command::Diff {
            program,
            query,
            theorems,
            raw,
            corpus,
            count,
            report,
        } => cmd_diff(
            g,
            DiffArgs {
                program,
                query,
                theorems,
                raw,
                corpus,
                count,
                report,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
