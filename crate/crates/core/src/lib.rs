//! Indexing of time intervals for range, duration, and range-duration queries.
//!
//! The centerpiece is [`RDIndex`], a two-level grid over the
//! (start time × duration) plane whose partition boundaries follow the
//! empirical distribution of the data, so that every grid cell holds roughly
//! the same number of intervals. Around it, the crate provides reference
//! index backends behind a common [`IndexBackend`](baselines::IndexBackend)
//! contract, deterministic workload generators, and a benchmark runner that
//! measures throughput, build time, index size, and the number of intervals
//! examined per query.

pub mod baselines;
pub mod bench;
pub mod rd_index;
pub mod types;
pub mod workload;

/// Discrete time point. The unit is abstract; datasets decide whether a tick
/// is a minute, a day, or anything else.
pub type Time = u64;

/// Opaque reference to the tuple an interval belongs to.
pub type TupleId = u64;

pub use rd_index::{DimensionOrder, RDIndex};
pub use types::{
    DurationRange, IndexStats, Interval, Query, QueryResult, Relation, TimeRange,
};
