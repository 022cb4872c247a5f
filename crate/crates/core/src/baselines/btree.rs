//! Duration-keyed ordered map. Duration constraints become an in-order key
//! range scan; the time-range constraint is applied per entry during the
//! scan, so a range-only query degenerates to a full scan. All intervals of
//! equal duration share one key bucket.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use super::{BackendError, IndexBackend};
use crate::rd_index::IndexError;
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::{Time, TupleId};

#[derive(Debug, Default)]
pub struct BTreeBackend {
    by_duration: BTreeMap<Time, Vec<(Interval, TupleId)>>,
    intervals_by_id: HashMap<TupleId, Interval>,
    n: usize,
    build_millis: f64,
}

impl BTreeBackend {
    fn scan(&self, query: &Query, mut visit: impl FnMut(&Interval, TupleId)) -> u64 {
        let (lo, hi) = match query.duration {
            Some(d) => (d.min, d.max),
            None => (0, Time::MAX),
        };
        let mut examined = 0;
        for (_, bucket) in self.by_duration.range(lo..=hi) {
            for &(interval, id) in bucket {
                examined += 1;
                if query.range.map_or(true, |r| interval.overlaps(&r)) {
                    visit(&interval, id);
                }
            }
        }
        examined
    }

    /// Bucket sizes keyed by duration, exposed for scaling experiments.
    pub fn bucket_sizes(&self) -> BTreeMap<Time, usize> {
        self.by_duration.iter().map(|(&d, b)| (d, b.len())).collect()
    }
}

impl IndexBackend for BTreeBackend {
    fn name(&self) -> &'static str {
        "btree"
    }

    fn build(&mut self, relation: &Relation) -> Result<(), BackendError> {
        let started = Instant::now();
        self.by_duration.clear();
        self.intervals_by_id.clear();
        self.n = relation.len();
        for &(interval, id) in relation.iter() {
            if self.intervals_by_id.insert(id, interval).is_some() {
                return Err(IndexError::DuplicateId(id).into());
            }
            self.by_duration.entry(interval.duration()).or_default().push((interval, id));
        }
        self.build_millis = started.elapsed().as_secs_f64() * 1e3;
        Ok(())
    }

    fn query(&self, query: &Query) -> QueryResult {
        let mut matches = Vec::new();
        let examined = self.scan(query, |_, id| matches.push(id));
        QueryResult { matches, examined }
    }

    fn count(&self, query: &Query) -> CountResult {
        let mut count = 0;
        let examined = self.scan(query, |_, _| count += 1);
        CountResult { count, examined }
    }

    fn stats(&self) -> IndexStats {
        let keys = self.by_duration.len();
        let bytes_per_interval = if self.n == 0 {
            0.0
        } else {
            (16.0 * self.n as f64 + (8.0 + 64.0) * keys as f64) / self.n as f64
        };
        IndexStats {
            cells: keys,
            bytes_per_interval,
            build_millis: self.build_millis,
            ..IndexStats::default()
        }
    }

    fn supports_updates(&self) -> bool {
        true
    }

    fn insert(&mut self, interval: Interval, id: TupleId) -> Result<(), BackendError> {
        if self.intervals_by_id.contains_key(&id) {
            return Err(IndexError::DuplicateId(id).into());
        }
        self.intervals_by_id.insert(id, interval);
        self.by_duration.entry(interval.duration()).or_default().push((interval, id));
        self.n += 1;
        Ok(())
    }

    fn remove(&mut self, id: TupleId) -> bool {
        let Some(interval) = self.intervals_by_id.remove(&id) else {
            return false;
        };
        let duration = interval.duration();
        if let Some(bucket) = self.by_duration.get_mut(&duration) {
            bucket.retain(|&(_, existing)| existing != id);
            if bucket.is_empty() {
                self.by_duration.remove(&duration);
            }
        }
        self.n -= 1;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Interval;

    fn built() -> BTreeBackend {
        let r = Relation::from_intervals([
            Interval::new(7, 13),
            Interval::new(9, 11),
            Interval::new(19, 34),
            Interval::new(23, 33),
        ]);
        let mut b = BTreeBackend::default();
        b.build(&r).unwrap();
        b
    }

    #[test]
    fn duration_point_query_touches_one_bucket() {
        let b = built();
        let res = b.query(&Query::duration_only(6, 6));
        assert_eq!(res.matches, vec![0]);
        assert_eq!(res.examined, 1);
    }

    #[test]
    fn range_only_degenerates_to_full_scan() {
        let b = built();
        let res = b.query(&Query::range_only(14, 44));
        assert_eq!(res.sorted_matches(), vec![2, 3]);
        assert_eq!(res.examined, 4);
    }

    /// Examined counts depend only on the duration constraint: horizontal
    /// bands in the selectivity plane.
    #[test]
    fn examined_is_invariant_under_range_changes() {
        let b = built();
        let base = b.query(&Query::range_duration(0, 5, 2, 10)).examined;
        for (ts, te) in [(0, 100), (20, 30), (5, 6)] {
            assert_eq!(b.query(&Query::range_duration(ts, te, 2, 10)).examined, base);
        }
    }
}
