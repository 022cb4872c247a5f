//! Reference index backends behind a common contract: an exhaustive linear
//! scan (the correctness oracle), a duration-keyed B-tree, a centered
//! interval tree, and a uniform grid file, plus the adapter exposing
//! [`RDIndex`](crate::RDIndex) through the same interface.

mod btree;
mod grid_file;
mod interval_tree;
mod linear;
mod rd;

pub use btree::BTreeBackend;
pub use grid_file::{GridFileBackend, GridFileParams};
pub use interval_tree::IntervalTreeBackend;
pub use linear::{linear_scan, LinearScanBackend};
pub use rd::RdIndexBackend;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rd_index::{DimensionOrder, IndexError};
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::TupleId;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{0} does not support updates")]
    UpdatesUnsupported(&'static str),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

/// Uniform contract over all index structures. Query results must be
/// oracle-equivalent across backends; `examined` counts are backend-specific.
///
/// Queries are read-only and may run concurrently; insert/remove require
/// exclusive access (single writer, no internal synchronization).
pub trait IndexBackend: Send {
    fn name(&self) -> &'static str;

    /// Parameter string for reports, e.g. `s=200 order=dt`.
    fn params(&self) -> String {
        String::new()
    }

    /// (Re)builds the index over `relation`, discarding previous contents.
    fn build(&mut self, relation: &Relation) -> Result<(), BackendError>;

    fn query(&self, query: &Query) -> QueryResult;

    /// Count-only execution, the operation timed by the benchmark loop.
    fn count(&self, query: &Query) -> CountResult;

    fn stats(&self) -> IndexStats;

    fn supports_updates(&self) -> bool {
        false
    }

    fn insert(&mut self, _interval: Interval, _id: TupleId) -> Result<(), BackendError> {
        Err(BackendError::UpdatesUnsupported(self.name()))
    }

    /// Removes by tuple id. Backends that support updates keep an id →
    /// interval side map; the index structures themselves locate entries by
    /// their keys.
    fn remove(&mut self, _id: TupleId) -> bool {
        false
    }

    /// Deep structural self-check; backends without internal invariants
    /// report Ok.
    fn check_integrity(&self) -> Result<(), String> {
        Ok(())
    }
}

/// Declarative backend selection, as it appears in experiment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendSpec {
    RdIndex { s: usize, order: DimensionOrder },
    LinearScan,
    Btree,
    IntervalTree,
    GridFile {
        time_cells: Option<usize>,
        duration_cells: Option<usize>,
    },
}

impl BackendSpec {
    /// Instantiates an empty backend. `n_hint` sizes the grid file's default
    /// cell counts when none are given.
    pub fn instantiate(&self, n_hint: usize) -> Result<Box<dyn IndexBackend>, BackendError> {
        match *self {
            BackendSpec::RdIndex { s, order } => Ok(Box::new(RdIndexBackend::new(s, order)?)),
            BackendSpec::LinearScan => Ok(Box::new(LinearScanBackend::default())),
            BackendSpec::Btree => Ok(Box::new(BTreeBackend::default())),
            BackendSpec::IntervalTree => Ok(Box::new(IntervalTreeBackend::default())),
            BackendSpec::GridFile { time_cells, duration_cells } => {
                let defaults = GridFileParams::default_for(n_hint);
                let params = GridFileParams {
                    time_cells: time_cells.unwrap_or(defaults.time_cells),
                    duration_cells: duration_cells.unwrap_or(defaults.duration_cells),
                };
                Ok(Box::new(GridFileBackend::new(params)?))
            }
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            BackendSpec::RdIndex { .. } => "rd-index",
            BackendSpec::LinearScan => "linear-scan",
            BackendSpec::Btree => "btree",
            BackendSpec::IntervalTree => "interval-tree",
            BackendSpec::GridFile { .. } => "grid-file",
        }
    }
}
