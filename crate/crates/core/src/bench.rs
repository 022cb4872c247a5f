//! Experiment runner: builds a backend over a dataset (timed), replays query
//! workloads measuring latency and examined counts, and emits CSV rows.
//!
//! Queries are executed as count queries, so timings measure retrieval
//! rather than result materialization; verification mode additionally
//! compares full id sets against the linear-scan oracle. Non-timing outputs
//! (match counts, examined counts) are deterministic for a fixed config.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::baselines::{linear_scan, BackendError, BackendSpec};
use crate::types::{Query, QueryKind, Relation, RelationSummary};
use crate::workload::{
    gen_queries, gen_relation, load_relation, selectivity_grid_queries, DataSpec, MixFractions,
    QueryKindSpec, QuerySpec, WorkloadError,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("backend {context}: {source}")]
    Backend {
        context: String,
        #[source]
        source: BackendError,
    },
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(
        "verification mismatch: backend {backend}, workload {workload}, query {query_id}: \
         expected {expected} matches, got {got}"
    )]
    Verification {
        backend: String,
        workload: String,
        query_id: usize,
        expected: usize,
        got: usize,
    },
    #[error("mixed throughput undefined: {kind} has fraction {fraction} but zero rate")]
    UndefinedMix { kind: &'static str, fraction: f64 },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: Box<csv::Error>,
    },
}

#[derive(Debug, Clone)]
pub enum DatasetSource {
    Synthetic(DataSpec),
    File(PathBuf),
    /// η time-shifted copies of the base dataset.
    Scaled { base: Box<DatasetSource>, eta: usize },
}

impl DatasetSource {
    pub fn resolve(&self) -> Result<Relation, WorkloadError> {
        match self {
            DatasetSource::Synthetic(spec) => gen_relation(spec),
            DatasetSource::File(path) => load_relation(path),
            DatasetSource::Scaled { base, eta } => {
                crate::workload::scale_dataset(&base.resolve()?, *eta)
            }
        }
    }
}

/// One named query workload of an experiment.
#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub name: String,
    pub queries: QuerySpec,
}

/// A single (backend × dataset × workloads) run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: BackendSpec,
    pub dataset: DatasetSource,
    pub dataset_name: String,
    pub workloads: Vec<WorkloadSpec>,
    /// Timed executions per query; the mean is reported.
    pub repetitions: usize,
    /// Untimed passes per query before the timed loop.
    pub warmup: usize,
    /// Check every query against the linear-scan oracle.
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRow {
    pub query_id: usize,
    pub kind: QueryKind,
    pub k: u64,
    pub examined: u64,
    pub latency_ns: u64,
}

#[derive(Debug, Clone)]
pub struct WorkloadReport {
    pub name: String,
    pub queries: Vec<QueryRow>,
    /// Workload throughput: query count over the sum of mean latencies.
    pub qps: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub backend: String,
    pub params: String,
    pub dataset: String,
    pub n: usize,
    pub build_ms: f64,
    pub bytes_per_interval: f64,
    pub fingerprint: EnvFingerprint,
    pub workloads: Vec<WorkloadReport>,
}

#[derive(Debug, Clone)]
pub struct EnvFingerprint {
    pub host: String,
    pub timestamp_unix: u64,
    pub git_revision: String,
}

impl EnvFingerprint {
    pub fn capture() -> Self {
        let host = std::env::var("HOSTNAME")
            .ok()
            .filter(|h| !h.is_empty())
            .or_else(|| {
                std::fs::read_to_string("/proc/sys/kernel/hostname")
                    .ok()
                    .map(|s| s.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let git_revision = std::process::Command::new("git")
            .args(["rev-parse", "--short", "HEAD"])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
            .unwrap_or_else(|| "unknown".into());
        EnvFingerprint { host, timestamp_unix, git_revision }
    }
}

fn empty_domain() -> RelationSummary {
    RelationSummary {
        n: 0,
        min_start: 0,
        max_start: 0,
        max_end: 1,
        min_duration: 1,
        max_duration: 1,
    }
}

/// Materializes the workload's queries against a concrete relation.
pub fn workload_queries(
    workload: &WorkloadSpec,
    relation: &Relation,
) -> Result<Vec<Query>, WorkloadError> {
    match workload.queries.kind {
        QueryKindSpec::SelectivityGrid(g) => Ok(selectivity_grid_queries(relation, g)?
            .into_iter()
            .map(|gq| gq.query)
            .collect()),
        _ => gen_queries(&workload.queries, &relation.summary().unwrap_or_else(empty_domain)),
    }
}

/// Builds the backend once (timed) and replays every workload: per query,
/// `warmup` untimed passes then `repetitions` timed count executions.
pub fn run(config: &RunConfig) -> Result<RunReport, BenchError> {
    if config.repetitions < 1 {
        return Err(BenchError::Config("repetitions must be at least 1".into()));
    }
    let relation = config.dataset.resolve()?;
    let context = format!(
        "{} on dataset {}",
        config.backend.id(),
        config.dataset_name
    );
    let mut backend = config
        .backend
        .instantiate(relation.len())
        .map_err(|source| BenchError::Backend { context: context.clone(), source })?;
    let build_started = Instant::now();
    backend
        .build(&relation)
        .map_err(|source| BenchError::Backend { context: context.clone(), source })?;
    let build_ms = build_started.elapsed().as_secs_f64() * 1e3;
    let bytes_per_interval = backend.stats().bytes_per_interval;

    let mut workloads = Vec::with_capacity(config.workloads.len());
    for workload in &config.workloads {
        let queries = workload_queries(workload, &relation)?;
        if config.verify {
            for (query_id, query) in queries.iter().enumerate() {
                let got = backend.query(query);
                let expected = linear_scan(&relation, query);
                if got.sorted_matches() != expected.sorted_matches() {
                    return Err(BenchError::Verification {
                        backend: format!("{} {}", backend.name(), backend.params()),
                        workload: workload.name.clone(),
                        query_id,
                        expected: expected.matches.len(),
                        got: got.matches.len(),
                    });
                }
            }
        }

        let mut rows = Vec::with_capacity(queries.len());
        let mut total_latency_ns = 0u128;
        for (query_id, query) in queries.iter().enumerate() {
            let outcome = backend.count(query);
            for _ in 0..config.warmup {
                std::hint::black_box(backend.count(query));
            }
            let timer = Instant::now();
            for _ in 0..config.repetitions {
                std::hint::black_box(backend.count(query));
            }
            let latency_ns =
                ((timer.elapsed().as_nanos() / config.repetitions as u128) as u64).max(1);
            total_latency_ns += latency_ns as u128;
            rows.push(QueryRow {
                query_id,
                kind: query.kind(),
                k: outcome.count,
                examined: outcome.examined,
                latency_ns,
            });
        }
        let qps = if rows.is_empty() {
            0.0
        } else {
            rows.len() as f64 * 1e9 / total_latency_ns as f64
        };
        workloads.push(WorkloadReport { name: workload.name.clone(), queries: rows, qps });
    }

    Ok(RunReport {
        backend: backend.name().to_string(),
        params: backend.params(),
        dataset: config.dataset_name.clone(),
        n: relation.len(),
        build_ms,
        bytes_per_interval,
        fingerprint: EnvFingerprint::capture(),
        workloads,
    })
}

/// Per-kind throughputs feeding the mixed-workload formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindRates {
    pub rd: f64,
    pub r: f64,
    pub d: f64,
}

/// Weighted harmonic mean `1 / (f_rd/φ_rd + f_d/φ_d + f_r/φ_r)`; kinds with
/// zero fraction are skipped, a positive fraction with zero rate is an error.
pub fn mixed_throughput(rates: &KindRates, fractions: &MixFractions) -> Result<f64, BenchError> {
    fractions.validate()?;
    let mut denominator = 0.0;
    let terms = [
        ("range-duration", fractions.rd, rates.rd),
        ("range-only", fractions.r, rates.r),
        ("duration-only", fractions.d, rates.d),
    ];
    for (kind, fraction, rate) in terms {
        if fraction > 0.0 {
            if rate <= 0.0 {
                return Err(BenchError::UndefinedMix { kind, fraction });
            }
            denominator += fraction / rate;
        }
    }
    Ok(1.0 / denominator)
}

/// Fraction of the dataset examined by each query of the report, flattened
/// across workloads in order.
pub fn examined_fraction(report: &RunReport, n: usize) -> Vec<f64> {
    assert!(n > 0, "dataset size must be positive");
    report
        .workloads
        .iter()
        .flat_map(|w| w.queries.iter())
        .map(|row| row.examined as f64 / n as f64)
        .collect()
}

pub const CSV_HEADER: [&str; 12] = [
    "backend",
    "params",
    "dataset",
    "workload",
    "query_id",
    "kind",
    "k",
    "examined",
    "latency_ns",
    "qps",
    "build_ms",
    "bytes_per_interval",
];

/// Writes one row per query plus one summary row per workload, with the
/// fixed header above. Appends to nothing: the file is created or truncated.
pub fn write_csv(report: &RunReport, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| BenchError::Csv { path: name.clone(), source: Box::new(e) })?;
    write_csv_into(report, &mut writer, true)
        .map_err(|e| BenchError::Csv { path: name.clone(), source: Box::new(e) })?;
    writer
        .flush()
        .map_err(|e| BenchError::Csv { path: name, source: Box::new(csv::Error::from(e)) })?;
    Ok(())
}

/// Appends report rows to an open writer, optionally emitting the header;
/// used to concatenate the reports of a whole experiment matrix.
pub fn write_csv_into<W: std::io::Write>(
    report: &RunReport,
    writer: &mut csv::Writer<W>,
    header: bool,
) -> Result<(), csv::Error> {
    if header {
        writer.write_record(CSV_HEADER)?;
    }
    for workload in &report.workloads {
        let mut total_k = 0u64;
        let mut total_examined = 0u64;
        let mut total_latency = 0u128;
        for row in &workload.queries {
            total_k += row.k;
            total_examined += row.examined;
            total_latency += row.latency_ns as u128;
            writer.write_record([
                report.backend.as_str(),
                report.params.as_str(),
                report.dataset.as_str(),
                workload.name.as_str(),
                &row.query_id.to_string(),
                row.kind.label(),
                &row.k.to_string(),
                &row.examined.to_string(),
                &row.latency_ns.to_string(),
                &format!("{:.3}", 1e9 / row.latency_ns as f64),
                &format!("{:.3}", report.build_ms),
                &format!("{:.3}", report.bytes_per_interval),
            ])?;
        }
        let mean_latency = if workload.queries.is_empty() {
            0
        } else {
            (total_latency / workload.queries.len() as u128) as u64
        };
        writer.write_record([
            report.backend.as_str(),
            report.params.as_str(),
            report.dataset.as_str(),
            workload.name.as_str(),
            "summary",
            "all",
            &total_k.to_string(),
            &total_examined.to_string(),
            &mean_latency.to_string(),
            &format!("{:.3}", workload.qps),
            &format!("{:.3}", report.build_ms),
            &format!("{:.3}", report.bytes_per_interval),
        ])?;
    }
    Ok(())
}
