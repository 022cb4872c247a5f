//! Centered interval tree. Each node stores the intervals containing its
//! center point twice, sorted by start and by end, so an overlap query scans
//! only the prefix that can intersect the range. The tree selects intervals
//! purely by their position on the timeline: a duration constraint is
//! applied per candidate and never prunes the traversal, and a duration-only
//! query visits every interval.

use std::cmp::Reverse;
use std::collections::HashMap;
use std::time::Instant;

use super::{BackendError, IndexBackend};
use crate::rd_index::IndexError;
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation, TimeRange};
use crate::{Time, TupleId};

#[derive(Debug)]
struct Node {
    center: Time,
    /// Intervals containing `center`, ascending by (start, id).
    by_start: Vec<(Interval, TupleId)>,
    /// The same intervals, descending by end (ties ascending by id).
    by_end: Vec<(Interval, TupleId)>,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

impl Node {
    fn leaf(center: Time) -> Box<Node> {
        Box::new(Node {
            center,
            by_start: Vec::new(),
            by_end: Vec::new(),
            left: None,
            right: None,
        })
    }

    fn attach(&mut self, interval: Interval, id: TupleId) {
        let pos = self
            .by_start
            .partition_point(|&(iv, eid)| (iv.start, eid) < (interval.start, id));
        self.by_start.insert(pos, (interval, id));
        let pos = self
            .by_end
            .partition_point(|&(iv, eid)| (Reverse(iv.end), eid) < (Reverse(interval.end), id));
        self.by_end.insert(pos, (interval, id));
    }

    fn detach(&mut self, id: TupleId) -> bool {
        let Some(pos) = self.by_start.iter().position(|&(_, eid)| eid == id) else {
            return false;
        };
        self.by_start.remove(pos);
        let pos = self.by_end.iter().position(|&(_, eid)| eid == id).unwrap();
        self.by_end.remove(pos);
        true
    }
}

/// Builds a subtree over `items`; the center is the median start time, which
/// guarantees the interval(s) starting there stay at this node and both
/// subtrees hold at most half of the start points.
fn build_node(items: Vec<(Interval, TupleId)>) -> Option<Box<Node>> {
    if items.is_empty() {
        return None;
    }
    let mut starts: Vec<Time> = items.iter().map(|(iv, _)| iv.start).collect();
    let mid = starts.len() / 2;
    let (_, &mut center, _) = starts.select_nth_unstable(mid);

    let mut here = Node::leaf(center);
    let mut left_items = Vec::new();
    let mut right_items = Vec::new();
    for (interval, id) in items {
        if interval.end <= center {
            left_items.push((interval, id));
        } else if interval.start > center {
            right_items.push((interval, id));
        } else {
            here.attach(interval, id);
        }
    }
    here.left = build_node(left_items);
    here.right = build_node(right_items);
    Some(here)
}

#[derive(Debug, Default)]
pub struct IntervalTreeBackend {
    root: Option<Box<Node>>,
    intervals_by_id: HashMap<TupleId, Interval>,
    n: usize,
    build_millis: f64,
}

impl IntervalTreeBackend {
    fn scan(&self, query: &Query, mut visit: impl FnMut(&Interval, TupleId)) -> u64 {
        let mut examined = 0;
        let duration = query.duration;
        let mut candidate = |interval: &Interval, id: TupleId| {
            if duration.map_or(true, |d| d.contains(interval.duration())) {
                visit(interval, id);
            }
        };
        match query.range {
            Some(range) => overlap_walk(&self.root, &range, &mut examined, &mut candidate),
            None => full_walk(&self.root, &mut examined, &mut candidate),
        }
        examined
    }

    fn node_count(&self) -> usize {
        fn count(node: &Option<Box<Node>>) -> usize {
            node.as_ref().map_or(0, |n| 1 + count(&n.left) + count(&n.right))
        }
        count(&self.root)
    }
}

fn full_walk(
    node: &Option<Box<Node>>,
    examined: &mut u64,
    candidate: &mut impl FnMut(&Interval, TupleId),
) {
    let Some(node) = node else { return };
    *examined += node.by_start.len() as u64;
    for (interval, id) in &node.by_start {
        candidate(interval, *id);
    }
    full_walk(&node.left, examined, candidate);
    full_walk(&node.right, examined, candidate);
}

fn overlap_walk(
    node: &Option<Box<Node>>,
    range: &TimeRange,
    examined: &mut u64,
    candidate: &mut impl FnMut(&Interval, TupleId),
) {
    let Some(node) = node else { return };
    if range.end <= node.center {
        // query left of the center: node intervals end past the center, so
        // only the start matters; the entry breaking the scan still counts
        for (interval, id) in &node.by_start {
            *examined += 1;
            if interval.start >= range.end {
                break;
            }
            candidate(interval, *id);
        }
        overlap_walk(&node.left, range, examined, candidate);
    } else if range.start >= node.center {
        for (interval, id) in &node.by_end {
            *examined += 1;
            if interval.end <= range.start {
                break;
            }
            candidate(interval, *id);
        }
        overlap_walk(&node.right, range, examined, candidate);
    } else {
        // center strictly inside the range: every interval here overlaps
        *examined += node.by_start.len() as u64;
        for (interval, id) in &node.by_start {
            candidate(interval, *id);
        }
        overlap_walk(&node.left, range, examined, candidate);
        overlap_walk(&node.right, range, examined, candidate);
    }
}

impl IndexBackend for IntervalTreeBackend {
    fn name(&self) -> &'static str {
        "interval-tree"
    }

    fn build(&mut self, relation: &Relation) -> Result<(), BackendError> {
        let started = Instant::now();
        self.intervals_by_id.clear();
        for &(interval, id) in relation.iter() {
            if self.intervals_by_id.insert(id, interval).is_some() {
                return Err(IndexError::DuplicateId(id).into());
            }
        }
        self.root = build_node(relation.items.clone());
        self.n = relation.len();
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
        let nodes = self.node_count();
        let bytes_per_interval = if self.n == 0 {
            0.0
        } else {
            // every interval is listed twice, plus node overhead
            (32.0 * self.n as f64 + (64.0 + 8.0) * nodes as f64) / self.n as f64
        };
        IndexStats {
            cells: nodes,
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
        self.n += 1;
        let mut slot = &mut self.root;
        loop {
            let Some(node) = slot else {
                *slot = Some(Node::leaf(interval.start));
                slot.as_mut().unwrap().attach(interval, id);
                return Ok(());
            };
            if interval.end <= node.center {
                slot = &mut node.left;
            } else if interval.start > node.center {
                slot = &mut node.right;
            } else {
                node.attach(interval, id);
                return Ok(());
            }
        }
    }

    fn remove(&mut self, id: TupleId) -> bool {
        let Some(interval) = self.intervals_by_id.remove(&id) else {
            return false;
        };
        self.n -= 1;
        let mut slot = &mut self.root;
        while let Some(node) = slot {
            if interval.end <= node.center {
                slot = &mut node.left;
            } else if interval.start > node.center {
                slot = &mut node.right;
            } else {
                return node.detach(id);
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn built() -> IntervalTreeBackend {
        let r = Relation::from_intervals([
            Interval::new(7, 13),
            Interval::new(9, 11),
            Interval::new(19, 34),
            Interval::new(23, 33),
        ]);
        let mut t = IntervalTreeBackend::default();
        t.build(&r).unwrap();
        t
    }

    #[test]
    fn range_query_on_running_example() {
        let t = built();
        let res = t.query(&Query::range_only(14, 44));
        assert_eq!(res.sorted_matches(), vec![2, 3]);
    }

    #[test]
    fn duration_only_examines_everything() {
        let t = built();
        let res = t.query(&Query::duration_only(5, 15));
        assert_eq!(res.examined, 4);
        assert_eq!(res.sorted_matches(), vec![0, 2, 3]);
    }

    /// Examined counts depend only on the range constraint: vertical bands in
    /// the selectivity plane.
    #[test]
    fn examined_is_invariant_under_duration_changes() {
        let t = built();
        let base = t.query(&Query::range_only(10, 25)).examined;
        for (dmin, dmax) in [(1, 2), (5, 15), (1, u64::MAX)] {
            let q = Query::range_duration(10, 25, dmin, dmax);
            assert_eq!(t.query(&q).examined, base);
        }
    }

    #[test]
    fn identical_intervals_stay_at_one_node() {
        let r = Relation::from_intervals(std::iter::repeat(Interval::new(5, 6)).take(100));
        let mut t = IntervalTreeBackend::default();
        t.build(&r).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.query(&Query::range_only(0, 10)).matches.len(), 100);
    }
}
