//! Batched-update benchmark: inserts a dataset into an initially empty index
//! in timed batches (random or sorted-by-start order), optionally verifies
//! query results against the linear scan, then drains the index again with
//! integrity checks.

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

use rdindex::baselines::linear_scan;
use rdindex::bench::{
    workload_queries, BenchError, EnvFingerprint, QueryRow, RunReport, WorkloadReport,
};
use rdindex::types::{QueryKind, Relation};

use crate::experiment::{ExperimentFile, Overrides};

const DEFAULT_BATCH: usize = 50_000;

pub fn run_update_bench(exp: &ExperimentFile, overrides: &Overrides) -> Result<Vec<RunReport>> {
    let global_seed = overrides.seed.or(exp.seed).unwrap_or(0);
    let update = exp.update.as_ref();
    let batch_size = update.and_then(|u| u.batch_size).unwrap_or(DEFAULT_BATCH).max(1);
    let insert_order = update.and_then(|u| u.order.clone()).unwrap_or_else(|| "sorted".into());
    let drain = update.and_then(|u| u.drain).unwrap_or(false);

    let mut workloads = Vec::new();
    for (j, w) in exp.workloads.iter().enumerate() {
        workloads.push(w.to_spec(global_seed, j)?);
    }

    let mut reports = Vec::new();
    for (i, dataset) in exp.datasets.iter().enumerate() {
        let relation = dataset
            .source(global_seed, i)?
            .resolve()
            .with_context(|| format!("dataset {}", dataset.name))?;
        let mut items = relation.items.clone();
        match insert_order.as_str() {
            "sorted" => items.sort_unstable_by_key(|(iv, _)| iv.start),
            "random" => {
                items.shuffle(&mut ChaCha8Rng::seed_from_u64(global_seed.wrapping_add(99)))
            }
            other => bail!("unknown insertion order `{other}` (expected sorted or random)"),
        }

        for backend_config in &exp.backends {
            for spec in backend_config.expand()? {
                let mut backend = spec.instantiate(relation.len()).map_err(|source| {
                    BenchError::Backend { context: spec.id().into(), source }
                })?;
                if !backend.supports_updates() {
                    bail!("backend {} does not support updates", backend.name());
                }
                backend.build(&Relation::default()).map_err(|source| BenchError::Backend {
                    context: spec.id().into(),
                    source,
                })?;

                let mut insert_rows = Vec::new();
                let mut inserted = 0u64;
                for (batch_id, batch) in items.chunks(batch_size).enumerate() {
                    let timer = Instant::now();
                    for &(interval, id) in batch {
                        backend.insert(interval, id).map_err(|source| {
                            BenchError::Backend { context: spec.id().into(), source }
                        })?;
                    }
                    let latency_ns = (timer.elapsed().as_nanos() as u64).max(1);
                    inserted += batch.len() as u64;
                    insert_rows.push(QueryRow {
                        query_id: batch_id,
                        kind: QueryKind::RangeDuration,
                        k: batch.len() as u64,
                        examined: inserted,
                        latency_ns,
                    });
                }
                backend
                    .check_integrity()
                    .map_err(|e| anyhow::anyhow!("{} integrity after inserts: {e}", spec.id()))?;
                let bytes_per_interval = backend.stats().bytes_per_interval;

                if overrides.verify {
                    for workload in &workloads {
                        let queries = workload_queries(workload, &relation)?;
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
                                }
                                .into());
                            }
                        }
                    }
                }

                let mut phases = vec![phase_report(
                    format!("insert-{insert_order}"),
                    insert_rows,
                )];
                if drain {
                    let mut drain_rows = Vec::new();
                    let mut removal: Vec<_> = items.clone();
                    removal
                        .shuffle(&mut ChaCha8Rng::seed_from_u64(global_seed.wrapping_add(123)));
                    let mut remaining = removal.len() as u64;
                    for (batch_id, batch) in removal.chunks(batch_size).enumerate() {
                        let timer = Instant::now();
                        for &(_, id) in batch {
                            if !backend.remove(id) {
                                bail!("{}: drain failed to remove id {id}", backend.name());
                            }
                        }
                        let latency_ns = (timer.elapsed().as_nanos() as u64).max(1);
                        remaining -= batch.len() as u64;
                        drain_rows.push(QueryRow {
                            query_id: batch_id,
                            kind: QueryKind::RangeDuration,
                            k: batch.len() as u64,
                            examined: remaining,
                            latency_ns,
                        });
                        backend.check_integrity().map_err(|e| {
                            anyhow::anyhow!("{} integrity during drain: {e}", spec.id())
                        })?;
                    }
                    let leftover = backend
                        .count(&rdindex::Query::duration_only(1, u64::MAX))
                        .count;
                    if leftover != 0 {
                        bail!("{}: {leftover} entries left after drain", backend.name());
                    }
                    phases.push(phase_report("drain".into(), drain_rows));
                }

                let mut report = RunReport {
                    backend: backend.name().to_string(),
                    params: backend.params(),
                    dataset: dataset.name.clone(),
                    n: relation.len(),
                    build_ms: 0.0,
                    bytes_per_interval,
                    fingerprint: EnvFingerprint::capture(),
                    workloads: Vec::new(),
                };
                report.workloads = phases;
                reports.push(report);
            }
        }
    }
    Ok(reports)
}

/// Batch rows become report rows: `k` holds the batch size, `examined` the
/// index size after the batch, `qps` the operation throughput of the phase.
fn phase_report(name: String, rows: Vec<QueryRow>) -> WorkloadReport {
    let ops: u64 = rows.iter().map(|r| r.k).sum();
    let total_ns: u128 = rows.iter().map(|r| r.latency_ns as u128).sum();
    let qps = if total_ns == 0 { 0.0 } else { ops as f64 * 1e9 / total_ns as f64 };
    WorkloadReport { name, queries: rows, qps }
}
