//! Deterministic generators for synthetic relations and query sets, dataset
//! scaling, and CSV ingestion. Everything is a pure function of its spec and
//! seed: the same inputs always produce byte-identical output.

mod grid;
mod io;

pub use grid::{selectivity_grid_queries, GridQuery};
pub use io::{load_relation, save_relation};

use rand::distributions::{Distribution, Uniform, WeightedIndex};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Interval, Query, QueryKind, Relation, RelationSummary};
use crate::Time;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("relation is empty")]
    EmptyRelation,
    #[error("scale factor must be at least 1")]
    InvalidScaleFactor,
    #[error("time domain overflow")]
    TimeOverflow,
    #[error("invalid mix fractions: {0}")]
    InvalidMix(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: Box<csv::Error>,
    },
    #[error("{path}, row {row}: {message}")]
    InvalidRow { path: String, row: usize, message: String },
    #[error("{path}: file contains no rows")]
    EmptyFile { path: String },
}

/// Value distribution for starts, durations, and query widths.
/// Parses from `uniform(lo,hi)` (inclusive bounds) or `zipf(beta,max)`
/// (values `1..=max` with probability proportional to `1/k^beta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dist {
    Uniform { lo: Time, hi: Time },
    Zipf { beta: f64, max: Time },
}

impl Dist {
    fn sampler(&self) -> Result<Sampler, WorkloadError> {
        match *self {
            Dist::Uniform { lo, hi } => {
                if lo > hi {
                    return Err(WorkloadError::InvalidDistribution(format!(
                        "uniform bounds out of order: ({lo},{hi})"
                    )));
                }
                Ok(Sampler::Uniform(Uniform::new_inclusive(lo, hi)))
            }
            Dist::Zipf { beta, max } => {
                if max < 1 || max > 100_000_000 {
                    return Err(WorkloadError::InvalidDistribution(format!(
                        "zipf max out of range: {max}"
                    )));
                }
                if !beta.is_finite() || beta < 0.0 {
                    return Err(WorkloadError::InvalidDistribution(format!(
                        "zipf exponent out of range: {beta}"
                    )));
                }
                let weights = (1..=max).map(|k| (k as f64).powf(-beta));
                let index = WeightedIndex::new(weights).map_err(|e| {
                    WorkloadError::InvalidDistribution(format!("zipf weights: {e}"))
                })?;
                Ok(Sampler::Zipf(index))
            }
        }
    }

    pub fn min_value(&self) -> Time {
        match *self {
            Dist::Uniform { lo, .. } => lo,
            Dist::Zipf { .. } => 1,
        }
    }

    pub fn max_value(&self) -> Time {
        match *self {
            Dist::Uniform { hi, .. } => hi,
            Dist::Zipf { max, .. } => max,
        }
    }
}

enum Sampler {
    Uniform(Uniform<Time>),
    Zipf(WeightedIndex<f64>),
}

impl Sampler {
    fn sample(&self, rng: &mut impl Rng) -> Time {
        match self {
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Zipf(w) => w.sample(rng) as Time + 1,
        }
    }
}

impl std::str::FromStr for Dist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, args) = s
            .strip_suffix(')')
            .and_then(|rest| rest.split_once('('))
            .ok_or_else(|| format!("cannot parse distribution `{s}`"))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format!("distribution `{s}` needs exactly two arguments"));
        }
        match name.trim() {
            "uniform" => Ok(Dist::Uniform {
                lo: parts[0].parse().map_err(|e| format!("bad uniform lo: {e}"))?,
                hi: parts[1].parse().map_err(|e| format!("bad uniform hi: {e}"))?,
            }),
            "zipf" => Ok(Dist::Zipf {
                beta: parts[0].parse().map_err(|e| format!("bad zipf exponent: {e}"))?,
                max: parts[1].parse().map_err(|e| format!("bad zipf max: {e}"))?,
            }),
            other => Err(format!("unknown distribution `{other}`")),
        }
    }
}

impl TryFrom<String> for Dist {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Dist> for String {
    fn from(d: Dist) -> String {
        match d {
            Dist::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
            Dist::Zipf { beta, max } => format!("zipf({beta},{max})"),
        }
    }
}

/// Synthetic relation description: interval start times and durations are
/// drawn independently, `end = start + duration`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSpec {
    pub n: usize,
    pub starts: Dist,
    pub durations: Dist,
    pub seed: u64,
}

impl DataSpec {
    /// Uniform starts in `[1, n]` and Zipf(1) durations, the default
    /// synthetic dataset shape.
    pub fn synthetic(n: usize, max_duration: Time, seed: u64) -> Self {
        DataSpec {
            n,
            starts: Dist::Uniform { lo: 1, hi: n.max(1) as Time },
            durations: Dist::Zipf { beta: 1.0, max: max_duration },
            seed,
        }
    }
}

/// Generates the relation described by `spec`, reproducibly under its seed.
pub fn gen_relation(spec: &DataSpec) -> Result<Relation, WorkloadError> {
    let starts = spec.starts.sampler()?;
    let durations = spec.durations.sampler()?;
    if spec.durations.min_value() < 1 {
        return Err(WorkloadError::InvalidDistribution(
            "durations must be at least 1".into(),
        ));
    }
    if spec.starts.max_value().checked_add(spec.durations.max_value()).is_none() {
        return Err(WorkloadError::TimeOverflow);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut intervals = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = starts.sample(&mut rng);
        let duration = durations.sample(&mut rng);
        intervals.push(Interval::new(start, start + duration));
    }
    Ok(Relation::from_intervals(intervals))
}

/// Fractions of range-duration, range-only, and duration-only queries in a
/// mixed workload. Must be non-negative and sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixFractions {
    pub rd: f64,
    pub r: f64,
    pub d: f64,
}

impl MixFractions {
    pub fn new(rd: f64, r: f64, d: f64) -> Result<Self, WorkloadError> {
        let m = MixFractions { rd, r, d };
        m.validate()?;
        Ok(m)
    }

    pub fn thirds() -> Self {
        MixFractions { rd: 1.0 / 3.0, r: 1.0 / 3.0, d: 1.0 / 3.0 }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.rd < 0.0 || self.r < 0.0 || self.d < 0.0 {
            return Err(WorkloadError::InvalidMix("negative fraction".into()));
        }
        let sum = self.rd + self.r + self.d;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WorkloadError::InvalidMix(format!("fractions sum to {sum}")));
        }
        Ok(())
    }

    /// Splits `count` into per-kind counts `(rd, r, d)` by largest remainder,
    /// so the result is deterministic and sums exactly to `count`.
    pub fn counts(&self, count: usize) -> (usize, usize, usize) {
        let raw = [self.rd, self.r, self.d].map(|f| f * count as f64);
        let mut counts = raw.map(|x| x.floor() as usize);
        let mut remainder = count - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let fa = raw[a] - raw[a].floor();
            let fb = raw[b] - raw[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for &k in &order {
            if remainder == 0 {
                break;
            }
            counts[k] += 1;
            remainder -= 1;
        }
        (counts[0], counts[1], counts[2])
    }
}

/// What a generated query set should look like.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuerySpec {
    pub count: usize,
    pub kind: QueryKindSpec,
    /// Length of generated time ranges.
    pub range_len: Dist,
    /// Width of generated duration ranges (`dmax - dmin`).
    pub duration_width: Dist,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKindSpec {
    RangeOnly,
    DurationOnly,
    RangeDuration,
    Mixed(MixFractions),
    /// `g × g` grid of queries tiling the time × duration selectivity plane;
    /// generated by [`selectivity_grid_queries`], which needs the relation
    /// itself rather than summary statistics.
    SelectivityGrid(usize),
}

/// Generates `spec.count` queries conditioned on the relation's domain.
/// For [`QueryKindSpec::SelectivityGrid`] use [`selectivity_grid_queries`].
pub fn gen_queries(spec: &QuerySpec, domain: &RelationSummary) -> Result<Vec<Query>, WorkloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let range_len = spec.range_len.sampler()?;
    let duration_width = spec.duration_width.sampler()?;
    let mut gen = QueryGen { domain, range_len, duration_width };

    let queries = match &spec.kind {
        QueryKindSpec::RangeOnly => gen.batch(QueryKind::RangeOnly, spec.count, &mut rng),
        QueryKindSpec::DurationOnly => gen.batch(QueryKind::DurationOnly, spec.count, &mut rng),
        QueryKindSpec::RangeDuration => gen.batch(QueryKind::RangeDuration, spec.count, &mut rng),
        QueryKindSpec::Mixed(mix) => {
            mix.validate()?;
            let (n_rd, n_r, n_d) = mix.counts(spec.count);
            let mut out = gen.batch(QueryKind::RangeDuration, n_rd, &mut rng);
            out.extend(gen.batch(QueryKind::RangeOnly, n_r, &mut rng));
            out.extend(gen.batch(QueryKind::DurationOnly, n_d, &mut rng));
            out
        }
        QueryKindSpec::SelectivityGrid(_) => {
            return Err(WorkloadError::InvalidDistribution(
                "selectivity-grid queries are generated from the relation itself".into(),
            ))
        }
    };
    Ok(queries)
}

struct QueryGen<'a> {
    domain: &'a RelationSummary,
    range_len: Sampler,
    duration_width: Sampler,
}

impl QueryGen<'_> {
    fn batch(&mut self, kind: QueryKind, count: usize, rng: &mut ChaCha8Rng) -> Vec<Query> {
        (0..count).map(|_| self.one(kind, rng)).collect()
    }

    fn one(&mut self, kind: QueryKind, rng: &mut ChaCha8Rng) -> Query {
        let range = match kind {
            QueryKind::DurationOnly => None,
            _ => {
                let len = self.range_len.sample(rng).max(1);
                let lo = self.domain.min_start;
                let hi = (self.domain.max_end - 1).max(lo);
                let ts = rng.gen_range(lo..=hi);
                Some((ts, ts.saturating_add(len)))
            }
        };
        let duration = match kind {
            QueryKind::RangeOnly => None,
            _ => {
                let dmin = rng.gen_range(self.domain.min_duration..=self.domain.max_duration);
                let width = self.duration_width.sample(rng);
                Some((dmin, dmin.saturating_add(width)))
            }
        };
        Query {
            range: range.map(|(s, e)| crate::types::TimeRange::new(s, e)),
            duration: duration.map(|(lo, hi)| crate::types::DurationRange::new(lo, hi)),
        }
    }
}

/// Enlarges a relation by `eta` time-shifted copies: copy `i` of `[a, b)` is
/// `[a + i·span, b + i·span)` where `span` is the time extent of the input.
/// Durations are preserved exactly; ids are reassigned sequentially.
pub fn scale_dataset(relation: &Relation, eta: usize) -> Result<Relation, WorkloadError> {
    if eta < 1 {
        return Err(WorkloadError::InvalidScaleFactor);
    }
    let summary = relation.summary().ok_or(WorkloadError::EmptyRelation)?;
    let span = summary.max_end - summary.min_start;
    let mut intervals = Vec::with_capacity(relation.len() * eta);
    for copy in 0..eta as u64 {
        let shift = span.checked_mul(copy).ok_or(WorkloadError::TimeOverflow)?;
        for (interval, _) in relation.iter() {
            let start = interval.start.checked_add(shift).ok_or(WorkloadError::TimeOverflow)?;
            let end = interval.end.checked_add(shift).ok_or(WorkloadError::TimeOverflow)?;
            intervals.push(Interval::new(start, end));
        }
    }
    Ok(Relation::from_intervals(intervals))
}
