//! Backend adapter for [`RDIndex`]. The index itself removes by
//! `(interval, id)`; this harness layer keeps the id → interval side map
//! that turns removal-by-id into that call.

use std::collections::HashMap;
use std::time::Instant;

use super::{BackendError, IndexBackend};
use crate::rd_index::{DimensionOrder, RDIndex};
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::TupleId;

#[derive(Debug)]
pub struct RdIndexBackend {
    s: usize,
    order: DimensionOrder,
    index: RDIndex,
    intervals_by_id: HashMap<TupleId, Interval>,
    build_millis: f64,
}

impl RdIndexBackend {
    pub fn new(s: usize, order: DimensionOrder) -> Result<Self, BackendError> {
        Ok(RdIndexBackend {
            s,
            order,
            index: RDIndex::new_empty(s, order)?,
            intervals_by_id: HashMap::new(),
            build_millis: 0.0,
        })
    }

    pub fn index(&self) -> &RDIndex {
        &self.index
    }
}

impl IndexBackend for RdIndexBackend {
    fn name(&self) -> &'static str {
        "rd-index"
    }

    fn params(&self) -> String {
        format!("s={} order={}", self.s, self.order.label())
    }

    fn build(&mut self, relation: &Relation) -> Result<(), BackendError> {
        let started = Instant::now();
        self.index = RDIndex::build(relation, self.s, self.order)?;
        self.intervals_by_id = relation.iter().map(|&(iv, id)| (id, iv)).collect();
        self.build_millis = started.elapsed().as_secs_f64() * 1e3;
        Ok(())
    }

    fn query(&self, query: &Query) -> QueryResult {
        self.index.query(query)
    }

    fn count(&self, query: &Query) -> CountResult {
        self.index.count(query)
    }

    fn stats(&self) -> IndexStats {
        let mut stats = self.index.stats();
        stats.build_millis = self.build_millis;
        stats
    }

    fn supports_updates(&self) -> bool {
        true
    }

    fn insert(&mut self, interval: Interval, id: TupleId) -> Result<(), BackendError> {
        if self.intervals_by_id.contains_key(&id) {
            return Err(crate::rd_index::IndexError::DuplicateId(id).into());
        }
        self.index.insert(interval, id)?;
        self.intervals_by_id.insert(id, interval);
        Ok(())
    }

    fn remove(&mut self, id: TupleId) -> bool {
        let Some(interval) = self.intervals_by_id.remove(&id) else {
            return false;
        };
        self.index.remove(interval, id)
    }

    fn check_integrity(&self) -> Result<(), String> {
        self.index.validate()?;
        if self.index.len() != self.intervals_by_id.len() {
            return Err(format!(
                "index holds {} entries but the id map holds {}",
                self.index.len(),
                self.intervals_by_id.len()
            ));
        }
        Ok(())
    }
}
