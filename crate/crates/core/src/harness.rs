//! Seeded experiment grids, CSV emission and success-rate summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algo::{run_cse, run_round_robin, run_sh_baseline, PartitionOrder, RoundRobinConfig, RunConfig, RunFlag, RunRecord, TieBreak};
use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::query::ArmId;
use crate::schedule::{schedule_for, Variant};
use crate::stats::StatisticKind;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "CSE_WORKERS";

/// Column names of the result CSV, in order.
pub const CSV_HEADER: [&str; 14] = [
    "algo",
    "statistic",
    "env",
    "n",
    "k",
    "B",
    "seed",
    "returned_arm",
    "true_best",
    "success",
    "pulls_used",
    "distinct_query_sets",
    "simulated_wallclock",
    "flags",
];

/// Algorithms a grid can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmSpec {
    /// Combinatorial successive winner stays.
    Csws,
    /// Combinatorial successive rejects.
    Csr,
    /// Combinatorial successive halving.
    Csh,
    /// Round robin over the size-`k` sets.
    #[serde(rename = "rr")]
    RoundRobin,
    /// Single-arm successive halving with `k` times the budget.
    Sh,
}

impl AlgorithmSpec {
    /// The elimination variant, if any.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Self::Csws => Some(Variant::Csws),
            Self::Csr => Some(Variant::Csr),
            Self::Csh => Some(Variant::Csh),
            Self::RoundRobin | Self::Sh => None,
        }
    }

    /// Name used in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Self::Csws => "CSWS",
            Self::Csr => "CSR",
            Self::Csh => "CSH",
            Self::RoundRobin => "RoundRobin",
            Self::Sh => "SH",
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csws" => Ok(Self::Csws),
            "csr" => Ok(Self::Csr),
            "csh" => Ok(Self::Csh),
            "rr" | "roundrobin" | "round-robin" => Ok(Self::RoundRobin),
            "sh" => Ok(Self::Sh),
            _ => Err(Error::Config(format!("unknown algorithm {s:?}"))),
        }
    }
}

fn default_repetitions() -> u64 {
    100
}

fn default_statistic() -> StatisticKind {
    StatisticKind::EmpiricalMean
}

/// A grid of experiment cells `(algorithm, n, k, B)`, each repeated with
/// derived seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    /// Environment template; `n`, `k` and `seed` are set per run.
    pub environment: EnvironmentSpec,
    /// Algorithms to run.
    pub algorithms: Vec<AlgorithmSpec>,
    /// Arm counts.
    pub n_values: Vec<usize>,
    /// Subset sizes; cells with `k > n` are skipped.
    pub k_values: Vec<usize>,
    /// Budgets.
    pub budgets: Vec<u64>,
    /// Repetitions per cell.
    #[serde(default = "default_repetitions")]
    pub repetitions: u64,
    /// Base seed of the seed derivation.
    #[serde(default)]
    pub base_seed: u64,
    /// Statistic of the elimination and round-robin learners.
    #[serde(default = "default_statistic")]
    pub statistic: StatisticKind,
    /// Block assignment of the elimination learners.
    #[serde(default)]
    pub partition_order: PartitionOrder,
    /// Tie handling of the elimination learners.
    #[serde(default)]
    pub tie_break: TieBreak,
    /// Worker threads; `CSE_WORKERS` overrides, all cores when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Destination of the CSV.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// One cell of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    /// Algorithm.
    pub algorithm: AlgorithmSpec,
    /// Arm count.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Nominal budget.
    pub budget: u64,
}

impl ExperimentGrid {
    /// Grid of one environment template with every listed combination.
    pub fn new(
        environment: EnvironmentSpec,
        algorithms: Vec<AlgorithmSpec>,
        n_values: Vec<usize>,
        k_values: Vec<usize>,
        budgets: Vec<u64>,
    ) -> Self {
        Self {
            environment,
            algorithms,
            n_values,
            k_values,
            budgets,
            repetitions: default_repetitions(),
            base_seed: 0,
            statistic: default_statistic(),
            partition_order: PartitionOrder::default(),
            tie_break: TieBreak::default(),
            workers: None,
            output: None,
        }
    }

    /// Reads a grid from a JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that the grid is non-empty and its parameters are valid.
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.algorithms.is_empty() || self.n_values.is_empty() || self.k_values.is_empty() || self.budgets.is_empty() {
            return Err(Error::Config("grid has an empty axis".into()));
        }
        if self.budgets.contains(&0) {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if self.cells().is_empty() {
            return Err(Error::Config("grid has no cell with 2 <= k <= n".into()));
        }
        self.statistic.validate()
    }

    /// Cells in emission order: algorithm, then `n`, `k` and `B`.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &n in &self.n_values {
                for &k in &self.k_values {
                    if k < 2 || k > n {
                        continue;
                    }
                    for &budget in &self.budgets {
                        out.push(Cell { algorithm, n, k, budget });
                    }
                }
            }
        }
        out
    }

    /// Seed of repetition `rep` of cell `cell_index`: `base + cell * reps + rep`.
    pub fn seed_for(&self, cell_index: usize, rep: u64) -> u64 {
        self.base_seed.wrapping_add((cell_index as u64).wrapping_mul(self.repetitions)).wrapping_add(rep)
    }

    fn worker_count(&self) -> Option<usize> {
        std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&w| w > 0).or(self.workers)
    }
}

/// One line of the result CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Algorithm name.
    pub algo: String,
    /// Statistic label.
    pub statistic: String,
    /// Environment kind.
    pub env: String,
    /// Arm count.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Nominal budget.
    #[serde(rename = "B")]
    pub budget: u64,
    /// Environment and algorithm seed.
    pub seed: u64,
    /// Returned arm, empty when the run returned none.
    pub returned_arm: Option<ArmId>,
    /// Ground-truth best arm.
    pub true_best: Option<ArmId>,
    /// `1` iff `returned_arm == true_best`.
    pub success: u8,
    /// Pulls charged.
    pub pulls_used: u64,
    /// Distinct query sets pulled.
    pub distinct_query_sets: usize,
    /// Simulated wallclock seconds.
    pub simulated_wallclock: f64,
    /// Run flags joined by `|`.
    pub flags: String,
}

impl ResultRow {
    /// Parsed flags.
    pub fn flag_list(&self) -> Result<Vec<RunFlag>> {
        self.flags.split('|').filter(|s| !s.is_empty()).map(RunFlag::parse).collect()
    }
}

/// Runs one algorithm once on a fresh environment built from `spec`.
pub fn run_single(
    algorithm: AlgorithmSpec,
    spec: &EnvironmentSpec,
    budget: u64,
    statistic: &StatisticKind,
    partition_order: PartitionOrder,
    tie_break: TieBreak,
) -> Result<(RunRecord, Option<ArmId>)> {
    let mut env = spec.build()?;
    let truth = env.true_best();
    let record = match algorithm.variant() {
        Some(variant) => {
            let config = RunConfig {
                budget,
                schedule: schedule_for(variant, spec.n, spec.k)?,
                statistic: statistic.clone(),
                partition_order,
                tie_break,
                seed: spec.seed,
            };
            run_cse(&config, env.as_mut())?
        }
        None if algorithm == AlgorithmSpec::RoundRobin => {
            let config = RoundRobinConfig { budget, statistic: statistic.clone(), order: partition_order, seed: spec.seed };
            run_round_robin(&config, env.as_mut())?
        }
        None => {
            let inflated = budget.saturating_mul(spec.k as u64);
            let mut record = run_sh_baseline(inflated, env.as_mut())?;
            record.flag(RunFlag::ShInflatedBudget);
            record
        }
    };
    Ok((record, truth))
}

fn run_row(grid: &ExperimentGrid, cell: Cell, seed: u64) -> ResultRow {
    let spec = grid.environment.clone().with_dims(cell.n, cell.k).with_seed(seed);
    let mut row = ResultRow {
        algo: cell.algorithm.name().to_string(),
        statistic: if cell.algorithm == AlgorithmSpec::Sh { "mean-runtime".into() } else { grid.statistic.label() },
        env: spec.model.label().to_string(),
        n: cell.n,
        k: cell.k,
        budget: cell.budget,
        seed,
        returned_arm: None,
        true_best: None,
        success: 0,
        pulls_used: 0,
        distinct_query_sets: 0,
        simulated_wallclock: 0.0,
        flags: String::new(),
    };
    match run_single(cell.algorithm, &spec, cell.budget, &grid.statistic, grid.partition_order, grid.tie_break) {
        Ok((record, truth)) => {
            row.returned_arm = record.returned_arm;
            row.true_best = truth;
            row.success = u8::from(record.returned_arm.is_some() && record.returned_arm == truth);
            row.pulls_used = record.pulls_used;
            row.distinct_query_sets = record.distinct_query_sets;
            row.simulated_wallclock = record.simulated_wallclock;
            row.flags = record.flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join("|");
        }
        Err(_) => {
            row.flags = RunFlag::Error.as_str().to_string();
        }
    }
    row
}

/// Runs every `(cell, repetition)` of the grid and returns the rows in
/// deterministic `(cell, repetition)` order.
///
/// Runs execute in parallel on up to `CSE_WORKERS` threads. A failing run
/// yields a row flagged `error` instead of aborting the grid.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<ResultRow>> {
    grid.validate()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..grid.repetitions).map(move |r| (c, r))).collect();
    let work = || jobs.par_iter().map(|&(c, r)| run_row(grid, cells[c], grid.seed_for(c, r))).collect();
    match grid.worker_count() {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Writes rows with the fixed header.
pub fn write_csv<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows to a file.
pub fn write_csv_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, rows)
}

/// Reads rows written by [`write_csv`], checking the header.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Reads rows from a file.
pub fn read_csv_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_csv(std::fs::File::open(path)?)
}

/// Wilson score interval of `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Normal quantile of a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Aggregate of one `(algo, env, n, k, B)` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    /// Algorithm name.
    pub algo: String,
    /// Environment kind.
    pub env: String,
    /// Arm count.
    pub n: usize,
    /// Subset size.
    pub k: usize,
    /// Nominal budget.
    #[serde(rename = "B")]
    pub budget: u64,
    /// Number of runs.
    pub runs: u64,
    /// Number of successful runs.
    pub successes: u64,
    /// `successes / runs`.
    pub success_rate: f64,
    /// Lower end of the 95% Wilson interval.
    pub ci_low: f64,
    /// Upper end of the 95% Wilson interval.
    pub ci_high: f64,
    /// Mean simulated wallclock.
    pub mean_wallclock: f64,
    /// Standard error of the mean wallclock.
    pub wallclock_se: f64,
}

/// Groups rows by `(algo, env, n, k, B)` and reports success rates with 95%
/// Wilson intervals and the mean simulated wallclock.
pub fn summarize(rows: &[ResultRow]) -> Vec<CellSummary> {
    let mut groups: BTreeMap<(String, String, usize, usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups.entry((row.algo.clone(), row.env.clone(), row.n, row.k, row.budget)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((algo, env, n, k, budget), rows)| {
            let runs = rows.len() as u64;
            let successes = rows.iter().filter(|r| r.success == 1).count() as u64;
            let (ci_low, ci_high) = wilson_interval(successes, runs, Z95);
            let m = runs as f64;
            let mean = rows.iter().map(|r| r.simulated_wallclock).sum::<f64>() / m;
            let var = if runs > 1 {
                rows.iter().map(|r| (r.simulated_wallclock - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            CellSummary {
                algo,
                env,
                n,
                k,
                budget,
                runs,
                successes,
                success_rate: successes as f64 / m,
                ci_low,
                ci_high,
                mean_wallclock: mean,
                wallclock_se: (var / m).sqrt(),
            }
        })
        .collect()
}

/// Writes summaries as CSV.
pub fn write_summary_csv<W: Write>(writer: W, summaries: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
