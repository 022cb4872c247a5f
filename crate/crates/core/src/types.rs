//! Domain types: intervals, queries, and the predicate logic every index
//! backend must agree on.

use serde::{Deserialize, Serialize};

use crate::{Time, TupleId};

/// Closed-open span `[start, end)` on the discrete time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: Time,
    pub end: Time,
}

impl Interval {
    /// Panics if `start >= end`; the minimal interval `[t, t+1)` has duration 1.
    pub fn new(start: Time, end: Time) -> Self {
        assert!(start < end, "invalid interval [{start}, {end})");
        Self { start, end }
    }

    pub fn duration(&self) -> Time {
        self.end - self.start
    }

    /// True iff the interval shares at least one time point with `range`.
    pub fn overlaps(&self, range: &TimeRange) -> bool {
        self.end > range.start && self.start < range.end
    }

    pub fn matches(&self, query: &Query) -> bool {
        let range_ok = query.range.map_or(true, |r| self.overlaps(&r));
        let duration_ok = query.duration.map_or(true, |d| d.contains(self.duration()));
        range_ok && duration_ok
    }
}

/// Closed-open query range `[start, end)` on the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: Time,
    pub end: Time,
}

impl TimeRange {
    pub fn new(start: Time, end: Time) -> Self {
        assert!(start < end, "invalid time range [{start}, {end})");
        Self { start, end }
    }
}

/// Inclusive duration range `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationRange {
    pub min: Time,
    pub max: Time,
}

impl DurationRange {
    pub fn new(min: Time, max: Time) -> Self {
        assert!(1 <= min && min <= max, "invalid duration range [{min}, {max}]");
        Self { min, max }
    }

    pub fn contains(&self, duration: Time) -> bool {
        self.min <= duration && duration <= self.max
    }
}

/// A selection query. Either constraint may be absent, but queries produced
/// by the workload generators always carry at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub range: Option<TimeRange>,
    pub duration: Option<DurationRange>,
}

impl Query {
    pub fn range_only(start: Time, end: Time) -> Self {
        Self { range: Some(TimeRange::new(start, end)), duration: None }
    }

    pub fn duration_only(min: Time, max: Time) -> Self {
        Self { range: None, duration: Some(DurationRange::new(min, max)) }
    }

    pub fn range_duration(start: Time, end: Time, min: Time, max: Time) -> Self {
        Self {
            range: Some(TimeRange::new(start, end)),
            duration: Some(DurationRange::new(min, max)),
        }
    }

    pub fn kind(&self) -> QueryKind {
        match (self.range.is_some(), self.duration.is_some()) {
            (true, true) => QueryKind::RangeDuration,
            (true, false) => QueryKind::RangeOnly,
            (false, _) => QueryKind::DurationOnly,
        }
    }
}

/// The three query families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    RangeOnly,
    DurationOnly,
    RangeDuration,
}

impl QueryKind {
    pub fn label(&self) -> &'static str {
        match self {
            QueryKind::RangeOnly => "range-only",
            QueryKind::DurationOnly => "duration-only",
            QueryKind::RangeDuration => "range-duration",
        }
    }
}

/// A finite collection of intervals, each carrying an opaque tuple id.
/// Duplicate `(start, end)` pairs are allowed under distinct ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relation {
    pub items: Vec<(Interval, TupleId)>,
}

impl Relation {
    pub fn new(items: Vec<(Interval, TupleId)>) -> Self {
        Self { items }
    }

    /// Wraps intervals with sequential ids starting at 0.
    pub fn from_intervals(intervals: impl IntoIterator<Item = Interval>) -> Self {
        Self {
            items: intervals
                .into_iter()
                .enumerate()
                .map(|(id, interval)| (interval, id as TupleId))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Interval, TupleId)> {
        self.items.iter()
    }

    /// Min/max bounds of the relation, or `None` when empty.
    pub fn summary(&self) -> Option<RelationSummary> {
        let first = self.items.first()?;
        let mut s = RelationSummary {
            n: self.items.len(),
            min_start: first.0.start,
            max_start: first.0.start,
            max_end: first.0.end,
            min_duration: first.0.duration(),
            max_duration: first.0.duration(),
        };
        for (interval, _) in &self.items {
            s.min_start = s.min_start.min(interval.start);
            s.max_start = s.max_start.max(interval.start);
            s.max_end = s.max_end.max(interval.end);
            s.min_duration = s.min_duration.min(interval.duration());
            s.max_duration = s.max_duration.max(interval.duration());
        }
        Some(s)
    }
}

/// Domain statistics of a relation, used to condition query generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelationSummary {
    pub n: usize,
    pub min_start: Time,
    pub max_start: Time,
    pub max_end: Time,
    pub min_duration: Time,
    pub max_duration: Time,
}

/// Result of a query: the matched tuple ids plus the number of intervals the
/// index evaluated any predicate against (including the scan-break test).
/// `examined` is the implementation-independent cost metric.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub matches: Vec<TupleId>,
    pub examined: u64,
}

impl QueryResult {
    /// Matches as a sorted vector, for set comparison across backends.
    pub fn sorted_matches(&self) -> Vec<TupleId> {
        let mut m = self.matches.clone();
        m.sort_unstable();
        m
    }
}

/// Count-only query result: what the benchmark loop measures.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CountResult {
    pub count: u64,
    pub examined: u64,
}

/// Structural statistics of a built index.
///
/// `bytes_per_interval` follows a fixed analytic accounting model, not
/// allocator introspection: 16 bytes per indexed interval (two 64-bit time
/// points), 8 bytes per boundary-array entry, and 64 bytes of fixed overhead
/// per column and per cell (or the backend's analogous bookkeeping units).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IndexStats {
    pub columns: usize,
    pub cells: usize,
    pub heavy_columns: usize,
    pub heavy_cells: usize,
    pub bytes_per_interval: f64,
    pub build_millis: f64,
}
