//! `cse`: budgets, instance generation, experiment grids, boundary
//! verification and result summaries from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cse_core::budget::BudgetReport;
use cse_core::env::EnvironmentSpec;
use cse_core::harness::{self, AlgorithmSpec, ExperimentGrid};
use cse_core::stats::StatisticKind;
use cse_core::verify::{self, BoundaryCase};
use cse_core::{LimitProfile, LimitTable, Variant};
use serde::Serialize;

/// Largest number of query sets `gen --limits` writes out.
const TABULATION_LIMIT: u64 = 1_000_000;

/// Budgeted best-arm identification for combinatorial bandits.
#[derive(Debug, Parser)]
#[command(name = "cse", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print schedules, per-round budgets, sufficient budgets and lower bounds.
    Budget(BudgetArgs),
    /// Generate an environment specification or its limit table.
    Gen(GenArgs),
    /// Run an experiment grid and write one CSV row per run.
    Run(RunArgs),
    /// Run the deterministic boundary suites and report PASS or FAIL per case.
    Verify(VerifyArgs),
    /// Aggregate result rows into per-cell success rates.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BudgetVariant {
    Csws,
    Csr,
    Csh,
    Rr,
}

impl BudgetVariant {
    fn variant(self) -> Option<Variant> {
        match self {
            Self::Csws => Some(Variant::Csws),
            Self::Csr => Some(Variant::Csr),
            Self::Csh => Some(Variant::Csh),
            Self::Rr => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Gaussian,
    Preference,
    Race,
}

#[derive(Debug, clap::Args)]
struct BudgetArgs {
    /// Elimination variant or round robin.
    #[arg(long, value_enum)]
    variant: BudgetVariant,
    /// Number of arms.
    #[arg(long)]
    n: usize,
    /// Query-set size.
    #[arg(long)]
    k: usize,
    /// Total budget for the per-round budgets.
    #[arg(long = "B")]
    budget: Option<u64>,
    /// JSON limit table enabling the gap-dependent quantities.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Fail unless the gap-dependent quantities can be computed.
    #[arg(long, default_value_t = false)]
    with_gaps: bool,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Output file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct GenArgs {
    /// Environment kind.
    #[arg(long, value_enum, default_value_t = EnvKind::Gaussian)]
    env: EnvKind,
    /// Number of arms.
    #[arg(long)]
    n: usize,
    /// Query-set size.
    #[arg(long)]
    k: usize,
    /// Environment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gap of the forced winner.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Force a Borda winner different from the Condorcet winner.
    #[arg(long, default_value_t = false)]
    force_distinct_gbw: bool,
    /// Write the latent limit table instead of the specification.
    #[arg(long, default_value_t = false)]
    limits: bool,
    /// Output file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// JSON grid configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment kind when no configuration is given.
    #[arg(long, value_enum, default_value_t = EnvKind::Gaussian)]
    env: EnvKind,
    /// Replaces the grid's arm counts.
    #[arg(long)]
    n: Option<usize>,
    /// Replaces the grid's subset sizes.
    #[arg(long)]
    k: Option<usize>,
    /// Replaces the grid's budgets.
    #[arg(long = "B")]
    budget: Option<u64>,
    /// Replaces the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the algorithm list (csws, csr, csh, rr, sh); repeatable.
    #[arg(long = "variant")]
    variants: Vec<String>,
    /// Replaces the statistic: a kind name or a JSON object.
    #[arg(long)]
    statistic: Option<String>,
    /// Replaces the repetition count.
    #[arg(long)]
    repetitions: Option<u64>,
    /// Output format of the rows.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; falls back to the grid's output, then stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct VerifyArgs {
    /// Worst-case instances per elimination variant.
    #[arg(long, default_value_t = 20)]
    instances: usize,
    /// Round-robin instances.
    #[arg(long, default_value_t = 10)]
    rr_instances: usize,
    /// Seed of the instance generator.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to these algorithms (CSWS, CSR, CSH, RoundRobin); repeatable.
    #[arg(long = "only")]
    only: Vec<String>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, clap::Args)]
struct SummarizeArgs {
    /// Result CSV written by `run`.
    #[arg(long)]
    input: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn render_budget(report: &BudgetReport) -> String {
    let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
    let mut lines = vec![
        ("variant", report.variant.clone()),
        ("n", report.n.to_string()),
        ("k", report.k.to_string()),
        ("rounds R", report.rounds.to_string()),
        ("partitions P", join(&report.partitions)),
        ("budget B", opt(report.budget)),
        ("per-set budgets b", report.per_set_budgets.as_deref().map_or_else(|| "-".to_string(), join)),
        ("nominal spend", opt(report.nominal_spend)),
        ("sufficient budget z", opt(report.sufficient_budget)),
        ("sufficient budget (closed form)", opt(report.sufficient_budget_table)),
        ("lower bound GCW", opt(report.lower_bound_gcw)),
    ];
    match &report.lower_bound_gbw_gcopew {
        Some(w) => {
            lines.push(("lower bound GBW/GCopeW", w.exact.to_string()));
            lines.push(("lower bound GBW/GCopeW (quarter form)", w.quarter.to_string()));
        }
        None => lines.push(("lower bound GBW/GCopeW", "-".to_string())),
    }
    lines.push(("max distinct query sets", report.max_distinct_query_sets.to_string()));
    let width = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    lines.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
}

fn cmd_budget(args: &BudgetArgs) -> Result<ExitCode> {
    if args.with_gaps && args.profile.is_none() {
        bail!(
            "the gap-dependent fields sufficient_budget, sufficient_budget_table, lower_bound_gcw and \
             lower_bound_gbw_gcopew need --profile"
        );
    }
    let mut report = match args.variant.variant() {
        Some(v) => BudgetReport::for_variant(v, args.n, args.k, args.budget)?,
        None => BudgetReport::for_round_robin(args.n, args.k, args.budget)?,
    };
    if let Some(path) = &args.profile {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let table: LimitTable<f64> = serde_json::from_str(&text).context("profile is not a JSON limit table")?;
        let profile = LimitProfile::from_limit_table(table)?;
        report = report.with_profile(args.variant.variant(), &profile)?;
    }
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Text => out.write_all(render_budget(&report).as_bytes())?,
        Format::Json => write_json(&mut *out, &report)?,
        Format::Csv => bail!("budget supports --format text or json"),
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn env_spec(kind: EnvKind, n: usize, k: usize, seed: u64) -> EnvironmentSpec {
    match kind {
        EnvKind::Gaussian => EnvironmentSpec::gaussian(n, k, seed),
        EnvKind::Preference => EnvironmentSpec::preference(n, k, seed),
        EnvKind::Race => EnvironmentSpec::race(n, k, seed),
    }
}

fn cmd_gen(args: &GenArgs) -> Result<ExitCode> {
    let mut spec = env_spec(args.env, args.n, args.k, args.seed);
    spec.epsilon = args.epsilon;
    spec.force_distinct_gbw = args.force_distinct_gbw;
    spec.validate()?;
    let mut out = open_output(args.output.as_deref())?;
    if args.limits {
        let env = spec.build()?;
        let table = env
            .latent_limits()?
            .tabulated(TABULATION_LIMIT)?
            .to_limit_table()
            .context("the latent profile of this environment is not tabulated")?;
        write_json(&mut *out, &table)?;
    } else {
        write_json(&mut *out, &spec)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn parse_statistic(s: &str) -> Result<StatisticKind> {
    let value = if s.trim_start().starts_with('{') {
        serde_json::from_str(s)?
    } else {
        serde_json::json!({ "kind": s })
    };
    let kind: StatisticKind = serde_json::from_value(value).with_context(|| format!("unknown statistic {s:?}"))?;
    kind.validate()?;
    Ok(kind)
}

fn build_grid(args: &RunArgs) -> Result<ExperimentGrid> {
    let mut grid = match &args.config {
        Some(path) => ExperimentGrid::from_json_file(path).with_context(|| format!("cannot load {}", path.display()))?,
        None => {
            let (Some(n), Some(k), Some(budget)) = (args.n, args.k, args.budget) else {
                bail!("without --config, --n, --k and --B are required");
            };
            ExperimentGrid::new(env_spec(args.env, n, k, 0), vec![AlgorithmSpec::Csws], vec![n], vec![k], vec![budget])
        }
    };
    if let Some(n) = args.n {
        grid.n_values = vec![n];
    }
    if let Some(k) = args.k {
        grid.k_values = vec![k];
    }
    if let Some(b) = args.budget {
        grid.budgets = vec![b];
    }
    if let Some(seed) = args.seed {
        grid.base_seed = seed;
    }
    if !args.variants.is_empty() {
        grid.algorithms = args.variants.iter().map(|v| v.parse()).collect::<cse_core::Result<_>>()?;
    }
    if let Some(s) = &args.statistic {
        grid.statistic = parse_statistic(s)?;
    }
    if let Some(r) = args.repetitions {
        grid.repetitions = r;
    }
    if let Some(out) = &args.output {
        grid.output = Some(out.clone());
    }
    grid.validate()?;
    Ok(grid)
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let grid = build_grid(args)?;
    let rows = harness::run_grid(&grid)?;
    let mut out = open_output(grid.output.as_deref())?;
    match args.format {
        Format::Csv => harness::write_csv(&mut out, &rows)?,
        Format::Json => write_json(&mut *out, &rows)?,
        Format::Text => {
            for s in harness::summarize(&rows) {
                writeln!(
                    out,
                    "{:<10} {} n={} k={} B={} success={}/{} ({:.3}, CI [{:.3}, {:.3}])",
                    s.algo, s.env, s.n, s.k, s.budget, s.successes, s.runs, s.success_rate, s.ci_low, s.ci_high
                )?;
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let mut cases: Vec<BoundaryCase> = verify::cse_boundary_suite(args.instances, args.seed)?;
    cases.extend(verify::round_robin_boundary_suite(args.rr_instances, args.seed)?);
    if !args.only.is_empty() {
        let wanted: Vec<String> = args.only.iter().map(|s| s.to_ascii_lowercase()).collect();
        cases.retain(|c| wanted.contains(&c.algorithm.to_ascii_lowercase()));
    }
    let mut out = open_output(None)?;
    match args.format {
        Format::Json => write_json(&mut *out, &cases)?,
        _ => {
            for case in &cases {
                writeln!(out, "{}", verify::describe(case))?;
            }
        }
    }
    let failures = cases.iter().filter(|c| !c.pass()).count();
    if args.format != Format::Json {
        writeln!(out, "{} of {} cases passed", cases.len() - failures, cases.len())?;
    }
    out.flush()?;
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<ExitCode> {
    let rows = harness::read_csv_file(&args.input).with_context(|| format!("cannot read {}", args.input.display()))?;
    if rows.is_empty() {
        bail!("{} has no rows", args.input.display());
    }
    let summaries = harness::summarize(&rows);
    let mut out = open_output(args.output.as_deref())?;
    match args.format {
        Format::Csv => harness::write_summary_csv(&mut out, &summaries)?,
        Format::Json => write_json(&mut *out, &summaries)?,
        Format::Text => {
            for s in &summaries {
                writeln!(
                    out,
                    "{:<10} {} n={} k={} B={} success={:.3} [{:.3}, {:.3}] wallclock={:.4} +- {:.4}",
                    s.algo, s.env, s.n, s.k, s.budget, s.success_rate, s.ci_low, s.ci_high, s.mean_wallclock, s.wallclock_se
                )?;
            }
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Budget(a) => cmd_budget(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
