//! `lbt` command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage or instance errors, 2 when a solver
//! does not converge or a reference check disagrees.

pub mod doc;
pub mod render;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbt_core::posterior::{symmetric_no_lock, test_quality};
use lbt_core::*;

use doc::{equilibrium_doc, ratio_row, round12, sim_doc, symmetric_rows, CheckRow, ResultDocument};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lbt", version, about = "Solvers for the locks, bombs and testing game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal attack value and layouts of the symmetric game
    Symmetric(Common),
    /// Posterior no-lock ratios and minus-count probabilities
    Ratios(Common),
    /// Equilibrium with one bomb and non-informative tests
    Noninfo(Common),
    /// Equilibrium of the two-site game in closed form
    TwoSite(Common),
    /// Numerical equilibrium of a fixed-lock game
    General(Common),
    /// Monte Carlo estimate of the expected damage
    Simulate(SimArgs),
    /// Compare solvers against brute-force references
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Args)]
struct Common {
    /// Instance file (JSON)
    #[arg(long)]
    input: PathBuf,
    /// Write the result here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Override the number of bombs
    #[arg(long)]
    m: Option<u32>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap for the numerical equilibrium solver
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MixChoice {
    /// The instance's own prior: uniform over k-subsets, or independent locks
    Prior,
    /// The numerical equilibrium mix
    Equilibrium,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// greedy-best-response, uap-symmetric, uniform-random or single-site:<i>
    #[arg(long, default_value = "greedy-best-response")]
    policy: String,
    #[arg(long, value_enum, default_value = "prior")]
    mix: MixChoice,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Grid steps per dimension for the defender check
    #[arg(long, default_value_t = 1000)]
    resolution: u32,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Solver(_) => EXIT_SOLVER,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<LbtError> for Failure {
    fn from(e: LbtError) -> Self {
        match e {
            LbtError::NonConvergence { .. } | LbtError::Lp(_) => Failure::Solver(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses an instance document; unknown keys are rejected and syntax errors
/// carry their line and column.
pub fn parse_instance(text: &str) -> std::result::Result<SpecInput, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed instance: {e}"))
}

fn load(path: &Path, m: Option<u32>) -> Outcome<(SpecInput, GameSpec)> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let mut input = parse_instance(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    if let Some(m) = m {
        input.m = m;
    }
    let spec = validate_spec(&input)?;
    Ok((input, spec))
}

/// Runs the command line `argv` (including the program name) and returns
/// the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn execute(command: Command) -> Outcome<()> {
    let (doc, common, failed_check) = match command {
        Command::Symmetric(c) => (symmetric(&c)?, c, false),
        Command::Ratios(c) => (ratios(&c)?, c, false),
        Command::Noninfo(c) => (noninfo(&c)?, c, false),
        Command::TwoSite(c) => (two_site(&c)?, c, false),
        Command::General(c) => (general(&c)?, c, false),
        Command::Simulate(s) => (simulate_cmd(&s)?, s.common, false),
        Command::Oracle(o) => {
            let doc = oracle(&o)?;
            let failed = doc.diagnostics.checks.iter().flatten().any(|r| !r.pass);
            (doc, o.common, failed)
        }
    };
    let text = match common.format {
        Format::Json => serde_json::to_string_pretty(&doc).map_err(|e| Failure::Invalid(e.to_string()))? + "\n",
        Format::Csv => render::csv(&doc),
        Format::Table => render::table(&doc),
    };
    match &common.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if failed_check {
        return Err(Failure::Solver("a reference check disagreed".into()));
    }
    Ok(())
}

fn symmetric_params(spec: &GameSpec) -> Outcome<(usize, f64, f64)> {
    match (spec.is_symmetric(), spec.k()) {
        (true, Some(k)) => Ok((k, spec.a()[0], spec.b()[0])),
        _ => Err(Failure::Invalid(
            "this command needs equal a, equal b, all c = 1 and a fixed number of locks".into(),
        )),
    }
}

fn symmetric(c: &Common) -> Outcome<ResultDocument> {
    let (input, spec) = load(&c.input, c.m)?;
    let (k, a, b) = symmetric_params(&spec)?;
    let sv = value(spec.n(), k, spec.m(), a, b, spec.p())?;
    let mut doc = ResultDocument::new(input, "symmetric");
    doc.set("value", sv.value);
    doc.diagnostics.per_x = Some(symmetric_rows(&sv));
    Ok(doc)
}

fn uniform_tests(spec: &GameSpec) -> Outcome<(f64, f64)> {
    let (a, b) = (spec.a()[0], spec.b()[0]);
    if spec.a().iter().any(|&v| v != a) || spec.b().iter().any(|&v| v != b) {
        return Err(Failure::Invalid("ratios need the same a and b at every site".into()));
    }
    Ok((a, b))
}

fn ratios(c: &Common) -> Outcome<ResultDocument> {
    let (input, spec) = load(&c.input, c.m)?;
    let (a, b) = uniform_tests(&spec)?;
    let mut doc = ResultDocument::new(input, "ratios");
    doc.set("q_test", test_quality(a, b));
    let n = spec.n();
    let rows = match spec.lock_mode() {
        LockMode::Fixed { k } => {
            let dist = minus_count_dist(n, k, a, b)?;
            (0..=n)
                .map(|x| {
                    let prob = Some(dist.prob(x));
                    if x == 0 || x == n {
                        let (pm, pp) = symmetric_no_lock(n, k, x, a, b)?;
                        Ok(ratio_row(Some(x), prob, pm, pp, f64::NAN))
                    } else {
                        let cr = critical_ratio_a(n, k, x, a, b)?;
                        Ok(ratio_row(Some(x), prob, cr.p_minus, cr.p_plus, cr.r))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        LockMode::Iid { lambda } => {
            let cr = critical_ratio_b(lambda, a, b)?;
            doc.set("r", cr.r);
            vec![ratio_row(None, None, cr.p_minus, cr.p_plus, cr.r)]
        }
    };
    doc.diagnostics.ratios = Some(rows);
    Ok(doc)
}

fn noninfo(c: &Common) -> Outcome<ResultDocument> {
    let (input, spec) = load(&c.input, c.m)?;
    let non_informative = spec.a().iter().chain(spec.b()).all(|&v| v == 0.5);
    let Some(k) = spec.k() else {
        return Err(Failure::Invalid("noninfo needs a fixed number of locks".into()));
    };
    if !non_informative || spec.m() != 1 || spec.p() != 1.0 {
        return Err(Failure::Invalid("noninfo needs a = b = 1/2, m = 1 and p = 1".into()));
    }
    let report = solve_noninformative(spec.c(), k)?;
    let mut doc = ResultDocument::new(input, "noninformative");
    equilibrium_doc(&mut doc, &report, 1.0);
    Ok(doc)
}

fn two_site(c: &Common) -> Outcome<ResultDocument> {
    let (input, spec) = load(&c.input, c.m)?;
    if spec.n() != 2 || spec.k() != Some(1) || spec.m() != 1 || spec.p() != 1.0 {
        return Err(Failure::Invalid("two-site needs n = 2, k = 1, m = 1 and p = 1".into()));
    }
    let (a, b) = (spec.a()[0], spec.b()[0]);
    if spec.a()[1] != a || spec.b()[1] != b {
        return Err(Failure::Invalid("two-site needs the same a and b at both sites".into()));
    }
    let (c1, c2) = (spec.c()[0], spec.c()[1]);
    if c1 < c2 {
        return Err(Failure::Invalid("two-site needs c_1 >= c_2; list the more valuable site first".into()));
    }
    let report = solve_2x1(c1 / c2, a, b)?;
    let mut doc = ResultDocument::new(input, "two-site");
    equilibrium_doc(&mut doc, &report, c2);
    if let Some(bp) = &report.breakpoints {
        doc.set("x_star", bp.x_star);
        doc.set("c_ratio", bp.c);
    }
    Ok(doc)
}

fn general_options(c: &Common) -> GeneralOptions {
    GeneralOptions {
        tol: c.tol,
        max_iterations: c.max_iterations,
        ..GeneralOptions::default()
    }
}

fn general(c: &Common) -> Outcome<ResultDocument> {
    let (input, spec) = load(&c.input, c.m)?;
    let report = solve_general_with(&spec, &general_options(c))?;
    let mut doc = ResultDocument::new(input, "general");
    equilibrium_doc(&mut doc, &report, 1.0);
    doc.provenance.tol = Some(c.tol);
    Ok(doc)
}

fn simulate_cmd(s: &SimArgs) -> Outcome<ResultDocument> {
    let (input, spec) = load(&s.common.input, s.common.m)?;
    let policy: Policy = s.policy.parse()?;
    let mix = match s.mix {
        MixChoice::Prior => spec.default_mix()?,
        MixChoice::Equilibrium => solve_general_with(&spec, &general_options(&s.common))?.mix,
    };
    let result = match s.workers {
        Some(w) => simulate_with_workers(&spec, &mix, &policy, s.trials, s.seed, w)?,
        None => simulate(&spec, &mix, &policy, s.trials, s.seed)?,
    };
    let mut doc = ResultDocument::new(input, "simulate");
    sim_doc(&mut doc, &result, &policy.to_string());
    doc.strategies.defender_mix = Some(doc::mix_entries(&mix));
    if s.mix == MixChoice::Equilibrium {
        doc.provenance.tol = Some(s.common.tol);
    }
    Ok(doc)
}

fn check(label: String, value: f64, reference: f64, allowed: f64) -> CheckRow {
    CheckRow {
        label,
        value: round12(value),
        reference: round12(reference),
        allowed,
        pass: (value - reference).abs() <= allowed,
    }
}

/// Tolerance for closed forms against enumeration.
const ENUMERATION_TOL: f64 = 1e-9;

fn oracle(o: &OracleArgs) -> Outcome<ResultDocument> {
    let c = &o.common;
    let (input, spec) = load(&c.input, c.m)?;
    let mut rows = Vec::new();
    if let (true, Some(k)) = (spec.is_symmetric(), spec.k()) {
        let (n, m, a, b, p) = (spec.n(), spec.m(), spec.a()[0], spec.b()[0], spec.p());
        for x in 0..=n {
            let formula = value_given_x(n, k, m, x, a, b, p)?;
            let brute = exhaustive_symmetric_value(n, k, m, x, a, b, p)?;
            rows.push(check(format!("v(x={x})"), formula.value, brute, ENUMERATION_TOL));
        }
    }
    if spec.k().is_some() && spec.n() <= 16 {
        let mix = spec.default_mix()?;
        let br = best_response(&mix, &spec)?;
        let mut worst: Option<CheckRow> = None;
        for r in &br.per_signal {
            let (_, best) = exhaustive_best_allocation(&r.alpha, spec.c(), spec.p(), spec.m())?;
            let row = check(format!("greedy {}", r.signal), r.damage, best, 1e-12 * best.max(1.0));
            if worst.as_ref().is_none_or(|w| (w.value - w.reference).abs() < (row.value - row.reference).abs()) {
                worst = Some(row);
            }
        }
        rows.extend(worst);
    }
    if let Ok(grid) = grid_min_defender(&spec, o.resolution) {
        let report = solve_general_with(&spec, &general_options(c))?;
        let row = check(
            "general vs grid".into(),
            report.value,
            grid.value,
            grid.slack + c.tol,
        );
        rows.push(CheckRow {
            pass: report.value <= grid.value + c.tol && grid.value - grid.slack <= report.value + c.tol,
            ..row
        });
    }
    if rows.is_empty() {
        return Err(Failure::Invalid("no reference check applies to this instance".into()));
    }
    let mut doc = ResultDocument::new(input, "oracle");
    doc.set("checks", rows.len() as f64);
    doc.set("failures", rows.iter().filter(|r| !r.pass).count() as f64);
    doc.diagnostics.checks = Some(rows);
    doc.provenance.tol = Some(c.tol);
    Ok(doc)
}

