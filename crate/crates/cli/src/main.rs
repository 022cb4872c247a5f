//! Command-line driver: dataset generation, experiment runs from a TOML
//! file, batched-update benchmarks, and one-shot queries.
//!
//! Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when
//! verification against the linear-scan oracle finds a mismatch.

mod experiment;
mod update;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rdindex::baselines::{linear_scan, BackendSpec};
use rdindex::bench::{self, BenchError, EnvFingerprint};
use rdindex::workload::{gen_relation, load_relation, save_relation, DataSpec, Dist};
use rdindex::{DimensionOrder, Query};

use experiment::{load_experiment, run_matrix, Overrides};

#[derive(Parser)]
#[command(
    name = "rdindex",
    version,
    about = "Interval indexing experiments: generate datasets, benchmark index structures, run ad-hoc range/duration queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV (start,end,id rows).
    Generate {
        /// Number of intervals.
        #[arg(long)]
        n: usize,
        /// Start-time distribution, e.g. "uniform(1,1000000)" (default) or "zipf(1,n)".
        #[arg(long)]
        starts: Option<String>,
        /// Duration distribution, e.g. "zipf(1,1000)" or "uniform(1,100)".
        #[arg(long, default_value = "zipf(1,1000)")]
        durations: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment matrix described by a TOML file and write a CSV report.
    Bench {
        #[arg(long)]
        experiment: PathBuf,
        /// Check every query of every backend against the linear-scan oracle.
        #[arg(long)]
        verify: bool,
        /// Override the experiment's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override timed repetitions per query.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Insert datasets into initially empty indexes in timed batches;
    /// optionally drain them again with integrity checks.
    UpdateBench {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// After inserting, verify the experiment's workloads against the oracle.
        #[arg(long)]
        verify: bool,
    },
    /// Answer one query against a dataset file and print the match count.
    Query {
        /// Dataset CSV (start,end[,id] rows).
        #[arg(long)]
        data: PathBuf,
        /// Time range "ts:te" (closed-open).
        #[arg(long)]
        range: Option<String>,
        /// Duration range "dmin:dmax" (inclusive).
        #[arg(long)]
        duration: Option<String>,
        /// Backend: rd-index, linear-scan, btree, interval-tree, grid-file.
        #[arg(long, default_value = "rd-index")]
        backend: String,
        /// Page size for rd-index.
        #[arg(long, default_value_t = 200)]
        s: usize,
        /// Dimension order for rd-index: td or dt.
        #[arg(long, default_value = "dt")]
        order: String,
        /// Also check the answer against the linear-scan oracle.
        #[arg(long)]
        verify: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit codes collide with the verification code
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let verification = err
                .downcast_ref::<BenchError>()
                .is_some_and(|e| matches!(e, BenchError::Verification { .. }));
            ExitCode::from(if verification { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { n, starts, durations, seed, out } => {
            cmd_generate(n, starts, durations, seed, out)
        }
        Command::Bench { experiment, verify, seed, out, repetitions } => {
            cmd_bench(experiment, verify, seed, out, repetitions)
        }
        Command::UpdateBench { experiment, seed, out, verify } => {
            cmd_update_bench(experiment, seed, out, verify)
        }
        Command::Query { data, range, duration, backend, s, order, verify } => {
            cmd_query(data, range, duration, backend, s, order, verify)
        }
    }
}

fn parse_dist(text: &str) -> Result<Dist> {
    text.parse::<Dist>().map_err(anyhow::Error::msg)
}

fn cmd_generate(
    n: usize,
    starts: Option<String>,
    durations: String,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let starts = match starts {
        Some(text) => parse_dist(&text)?,
        None => Dist::Uniform { lo: 1, hi: n.max(1) as u64 },
    };
    let durations = parse_dist(&durations)?;
    let relation = gen_relation(&DataSpec { n, starts, durations, seed })?;
    save_relation(&relation, &out)?;
    match relation.summary() {
        Some(s) => println!(
            "wrote {} intervals to {} (starts {}..={}, durations {}..={})",
            relation.len(),
            out.display(),
            s.min_start,
            s.max_start,
            s.min_duration,
            s.max_duration
        ),
        None => println!("wrote empty dataset to {}", out.display()),
    }
    Ok(())
}

fn cmd_bench(
    experiment: PathBuf,
    verify: bool,
    seed: Option<u64>,
    out: Option<PathBuf>,
    repetitions: Option<usize>,
) -> Result<()> {
    let exp = load_experiment(&experiment)?;
    if exp.workloads.is_empty() {
        bail!("experiment declares no workloads");
    }
    let out = out
        .or_else(|| exp.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let overrides = Overrides { seed, repetitions, verify };
    let runs = run_matrix(&exp, &overrides)?;

    let fingerprint = EnvFingerprint::capture();
    eprintln!(
        "host {} @ {} (rev {}), {} runs",
        fingerprint.host,
        fingerprint.timestamp_unix,
        fingerprint.git_revision,
        runs.len()
    );

    let mut writer = csv::Writer::from_path(&out)
        .with_context(|| format!("creating {}", out.display()))?;
    let mut first = true;
    for config in &runs {
        let report = bench::run(config)?;
        for workload in &report.workloads {
            println!(
                "{} {} | {} | {}: {:.1} qps, build {:.1} ms, {:.1} B/interval",
                report.backend,
                report.params,
                report.dataset,
                workload.name,
                workload.qps,
                report.build_ms,
                report.bytes_per_interval
            );
        }
        bench::write_csv_into(&report, &mut writer, first)?;
        first = false;
    }
    writer.flush()?;
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_update_bench(
    experiment: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    verify: bool,
) -> Result<()> {
    let exp = load_experiment(&experiment)?;
    let out = out
        .or_else(|| exp.output.clone())
        .unwrap_or_else(|| PathBuf::from("updates.csv"));
    let overrides = Overrides { seed, repetitions: None, verify };
    let reports = update::run_update_bench(&exp, &overrides)?;

    let mut writer = csv::Writer::from_path(&out)
        .with_context(|| format!("creating {}", out.display()))?;
    let mut first = true;
    for report in &reports {
        for workload in &report.workloads {
            println!(
                "{} {} | {} | {}: {:.0} ops/s over {} batches",
                report.backend,
                report.params,
                report.dataset,
                workload.name,
                workload.qps,
                workload.queries.len()
            );
        }
        bench::write_csv_into(report, &mut writer, first)?;
        first = false;
    }
    writer.flush()?;
    println!("report written to {}", out.display());
    Ok(())
}

fn parse_bounds(text: &str, what: &str) -> Result<(u64, u64)> {
    let (lo, hi) = text
        .split_once(':')
        .with_context(|| format!("{what} must look like `lo:hi`, got `{text}`"))?;
    Ok((
        lo.trim().parse().with_context(|| format!("bad {what} lower bound `{lo}`"))?,
        hi.trim().parse().with_context(|| format!("bad {what} upper bound `{hi}`"))?,
    ))
}

fn cmd_query(
    data: PathBuf,
    range: Option<String>,
    duration: Option<String>,
    backend: String,
    s: usize,
    order: String,
    verify: bool,
) -> Result<()> {
    let range = range.map(|t| parse_bounds(&t, "range")).transpose()?;
    let duration = duration.map(|t| parse_bounds(&t, "duration")).transpose()?;
    if range.is_none() && duration.is_none() {
        bail!("give at least one of --range or --duration");
    }
    if let Some((ts, te)) = range {
        if ts >= te {
            bail!("range start {ts} must be before end {te}");
        }
    }
    if let Some((dmin, dmax)) = duration {
        if dmin < 1 || dmin > dmax {
            bail!("duration bounds must satisfy 1 <= dmin <= dmax, got {dmin}:{dmax}");
        }
    }
    let query = Query {
        range: range.map(|(ts, te)| rdindex::TimeRange::new(ts, te)),
        duration: duration.map(|(lo, hi)| rdindex::DurationRange::new(lo, hi)),
    };

    let spec = match backend.as_str() {
        "rd-index" => BackendSpec::RdIndex {
            s,
            order: order.parse::<DimensionOrder>().map_err(anyhow::Error::msg)?,
        },
        "linear-scan" => BackendSpec::LinearScan,
        "btree" => BackendSpec::Btree,
        "interval-tree" => BackendSpec::IntervalTree,
        "grid-file" => BackendSpec::GridFile { time_cells: None, duration_cells: None },
        other => bail!("unknown backend `{other}`"),
    };

    let relation = load_relation(&data)?;
    let mut backend = spec
        .instantiate(relation.len())
        .map_err(|source| BenchError::Backend { context: spec.id().into(), source })?;
    backend
        .build(&relation)
        .map_err(|source| BenchError::Backend { context: spec.id().into(), source })?;
    let result = backend.query(&query);

    if verify {
        let expected = linear_scan(&relation, &query);
        if result.sorted_matches() != expected.sorted_matches() {
            return Err(BenchError::Verification {
                backend: format!("{} {}", backend.name(), backend.params()),
                workload: "ad-hoc".into(),
                query_id: 0,
                expected: expected.matches.len(),
                got: result.matches.len(),
            }
            .into());
        }
    }

    println!("{}", result.matches.len());
    eprintln!("examined {} of {} intervals", result.examined, relation.len());
    Ok(())
}
