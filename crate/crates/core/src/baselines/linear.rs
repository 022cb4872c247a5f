//! Exhaustive scan: the correctness oracle every other backend is checked
//! against. Examines the whole relation on every query.

use std::time::Instant;

use super::{BackendError, IndexBackend};
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::TupleId;

/// Filters `relation` by the query predicate; `examined` is always `|r|`.
pub fn linear_scan(relation: &Relation, query: &Query) -> QueryResult {
    let matches = relation
        .iter()
        .filter(|(interval, _)| interval.matches(query))
        .map(|&(_, id)| id)
        .collect();
    QueryResult { matches, examined: relation.len() as u64 }
}

#[derive(Debug, Default)]
pub struct LinearScanBackend {
    data: Relation,
    build_millis: f64,
}

impl IndexBackend for LinearScanBackend {
    fn name(&self) -> &'static str {
        "linear-scan"
    }

    fn build(&mut self, relation: &Relation) -> Result<(), BackendError> {
        let started = Instant::now();
        self.data = relation.clone();
        self.build_millis = started.elapsed().as_secs_f64() * 1e3;
        Ok(())
    }

    fn query(&self, query: &Query) -> QueryResult {
        linear_scan(&self.data, query)
    }

    fn count(&self, query: &Query) -> CountResult {
        let count = self
            .data
            .iter()
            .filter(|(interval, _)| interval.matches(query))
            .count() as u64;
        CountResult { count, examined: self.data.len() as u64 }
    }

    fn stats(&self) -> IndexStats {
        IndexStats {
            bytes_per_interval: if self.data.is_empty() { 0.0 } else { 16.0 },
            build_millis: self.build_millis,
            ..IndexStats::default()
        }
    }

    fn supports_updates(&self) -> bool {
        true
    }

    fn insert(&mut self, interval: Interval, id: TupleId) -> Result<(), BackendError> {
        if self.data.iter().any(|&(_, existing)| existing == id) {
            return Err(crate::rd_index::IndexError::DuplicateId(id).into());
        }
        self.data.items.push((interval, id));
        Ok(())
    }

    fn remove(&mut self, id: TupleId) -> bool {
        let before = self.data.len();
        self.data.items.retain(|&(_, existing)| existing != id);
        self.data.len() < before
    }
}
