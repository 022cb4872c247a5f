//! Experiment files: a TOML description of datasets, backends with parameter
//! sweeps, and query workloads, expanded into the run matrix.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use rdindex::baselines::BackendSpec;
use rdindex::bench::{DatasetSource, RunConfig, WorkloadSpec};
use rdindex::workload::{DataSpec, Dist, MixFractions, QueryKindSpec, QuerySpec};
use rdindex::DimensionOrder;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub warmup: Option<usize>,
    pub output: Option<PathBuf>,
    pub datasets: Vec<DatasetConfig>,
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub workloads: Vec<WorkloadConfig>,
    pub update: Option<UpdateConfig>,
}

/// Either a synthetic spec (`n`, `starts`, `durations`) or a CSV `path`;
/// `scale` applies time-shifted copying on top.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub starts: Option<Dist>,
    pub durations: Option<Dist>,
    pub seed: Option<u64>,
    pub scale: Option<usize>,
}

/// Backend selection; list-valued fields sweep the parameter space.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: String,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub order: Vec<String>,
    #[serde(default)]
    pub time_cells: Vec<usize>,
    #[serde(default)]
    pub duration_cells: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub name: Option<String>,
    pub kind: String,
    pub count: Option<usize>,
    /// Grid dimension for `selectivity-grid`.
    pub g: Option<usize>,
    /// `[f_rd, f_r, f_d]` for `mixed`.
    pub fractions: Option<[f64; 3]>,
    pub range_len: Option<Dist>,
    pub duration_width: Option<Dist>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateConfig {
    pub batch_size: Option<usize>,
    /// `random` or `sorted` (by start time).
    pub order: Option<String>,
    /// Remove everything again after the insert phase, with invariant checks.
    pub drain: Option<bool>,
}

pub fn load_experiment(path: &Path) -> Result<ExperimentFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading experiment file {}", path.display()))?;
    let exp: ExperimentFile =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if exp.datasets.is_empty() {
        bail!("experiment declares no datasets");
    }
    if exp.backends.is_empty() {
        bail!("experiment declares no backends");
    }
    Ok(exp)
}

impl DatasetConfig {
    pub fn source(&self, global_seed: u64, index: usize) -> Result<DatasetSource> {
        let base = match (&self.path, self.n) {
            (Some(path), None) => DatasetSource::File(path.clone()),
            (None, Some(n)) => {
                let starts = self.starts.unwrap_or(Dist::Uniform { lo: 1, hi: n.max(1) as u64 });
                let durations = self.durations.unwrap_or(Dist::Zipf { beta: 1.0, max: 1_000 });
                let seed = self.seed.unwrap_or(global_seed.wrapping_add(index as u64));
                DatasetSource::Synthetic(DataSpec { n, starts, durations, seed })
            }
            (Some(_), Some(_)) => {
                bail!("dataset {}: give either `path` or `n`, not both", self.name)
            }
            (None, None) => bail!("dataset {}: needs `path` or `n`", self.name),
        };
        Ok(match self.scale {
            Some(eta) if eta != 1 => DatasetSource::Scaled { base: Box::new(base), eta },
            _ => base,
        })
    }
}

impl BackendConfig {
    /// Expands list-valued parameters into the concrete backend sweep.
    pub fn expand(&self) -> Result<Vec<BackendSpec>> {
        let specs = match self.kind.as_str() {
            "rd-index" => {
                let sizes = if self.s.is_empty() { vec![200] } else { self.s.clone() };
                let orders: Vec<DimensionOrder> = if self.order.is_empty() {
                    vec![DimensionOrder::DurationTime]
                } else {
                    self.order
                        .iter()
                        .map(|o| o.parse().map_err(anyhow::Error::msg))
                        .collect::<Result<_>>()?
                };
                let mut out = Vec::new();
                for &s in &sizes {
                    for &order in &orders {
                        out.push(BackendSpec::RdIndex { s, order });
                    }
                }
                out
            }
            "linear-scan" => vec![BackendSpec::LinearScan],
            "btree" => vec![BackendSpec::Btree],
            "interval-tree" => vec![BackendSpec::IntervalTree],
            "grid-file" => {
                let times: Vec<Option<usize>> = if self.time_cells.is_empty() {
                    vec![None]
                } else {
                    self.time_cells.iter().map(|&c| Some(c)).collect()
                };
                let durs: Vec<Option<usize>> = if self.duration_cells.is_empty() {
                    vec![None]
                } else {
                    self.duration_cells.iter().map(|&c| Some(c)).collect()
                };
                let mut out = Vec::new();
                for &time_cells in &times {
                    for &duration_cells in &durs {
                        out.push(BackendSpec::GridFile { time_cells, duration_cells });
                    }
                }
                out
            }
            other => bail!("unknown backend kind `{other}`"),
        };
        Ok(specs)
    }
}

impl WorkloadConfig {
    pub fn to_spec(&self, global_seed: u64, index: usize) -> Result<WorkloadSpec> {
        let kind = match self.kind.as_str() {
            "range-only" => QueryKindSpec::RangeOnly,
            "duration-only" => QueryKindSpec::DurationOnly,
            "range-duration" => QueryKindSpec::RangeDuration,
            "mixed" => {
                let f = self.fractions.unwrap_or([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
                QueryKindSpec::Mixed(MixFractions::new(f[0], f[1], f[2])?)
            }
            "selectivity-grid" => {
                QueryKindSpec::SelectivityGrid(self.g.context("selectivity-grid needs `g`")?)
            }
            other => bail!("unknown workload kind `{other}`"),
        };
        let name = self.name.clone().unwrap_or_else(|| format!("{}-{index}", self.kind));
        Ok(WorkloadSpec {
            name,
            queries: QuerySpec {
                count: self.count.unwrap_or(100),
                kind,
                range_len: self.range_len.unwrap_or(Dist::Uniform { lo: 1, hi: 10_000 }),
                duration_width: self.duration_width.unwrap_or(Dist::Uniform { lo: 0, hi: 100 }),
                seed: self.seed.unwrap_or(global_seed.wrapping_add(1_000 + index as u64)),
            },
        })
    }
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    pub verify: bool,
}

/// Expands the experiment into one run per (dataset × backend), each
/// carrying every workload.
pub fn run_matrix(exp: &ExperimentFile, overrides: &Overrides) -> Result<Vec<RunConfig>> {
    let global_seed = overrides.seed.or(exp.seed).unwrap_or(0);
    let repetitions = overrides.repetitions.or(exp.repetitions).unwrap_or(1);
    let warmup = exp.warmup.unwrap_or(1);

    let mut workloads = Vec::new();
    for (j, w) in exp.workloads.iter().enumerate() {
        workloads.push(w.to_spec(global_seed, j)?);
    }

    let mut runs = Vec::new();
    for (i, dataset) in exp.datasets.iter().enumerate() {
        let source = dataset.source(global_seed, i)?;
        for backend_config in &exp.backends {
            for backend in backend_config.expand()? {
                runs.push(RunConfig {
                    backend,
                    dataset: source.clone(),
                    dataset_name: dataset.name.clone(),
                    workloads: workloads.clone(),
                    repetitions,
                    warmup,
                    verify: overrides.verify,
                });
            }
        }
    }
    Ok(runs)
}
