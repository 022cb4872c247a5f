//! The RD-index: a two-level grid over the (start time × duration) plane.
//!
//! The relation is partitioned into *columns* of roughly `s²` intervals along
//! the first dimension, and each column into *cells* of roughly `s` intervals
//! along the second dimension. Boundaries follow the empirical distribution
//! of the keys, so cells stay balanced regardless of skew; runs of equal keys
//! are never split, and a partition that exceeds its target size because all
//! members share one key is *heavy* and is left intact by updates.
//!
//! Cells are scanned by decreasing end time, which lets a scan stop at the
//! first entry ending at or before the query range start. Physically the
//! entries sit in ascending end order and the scan iterates in reverse, so
//! append-heavy insertion patterns extend cells at the back instead of
//! shifting them.

use std::cmp::Reverse;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::{Time, TupleId};

/// Which dimension is partitioned into columns. Fixed at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DimensionOrder {
    /// Columns by start time, cells by duration (`td`).
    #[serde(rename = "td")]
    TimeDuration,
    /// Columns by duration, cells by start time (`dt`).
    #[serde(rename = "dt")]
    DurationTime,
}

impl DimensionOrder {
    pub fn label(&self) -> &'static str {
        match self {
            DimensionOrder::TimeDuration => "td",
            DimensionOrder::DurationTime => "dt",
        }
    }

    fn key1(&self, interval: &Interval) -> Time {
        match self {
            DimensionOrder::TimeDuration => interval.start,
            DimensionOrder::DurationTime => interval.duration(),
        }
    }

    fn key2(&self, interval: &Interval) -> Time {
        match self {
            DimensionOrder::TimeDuration => interval.duration(),
            DimensionOrder::DurationTime => interval.start,
        }
    }
}

impl FromStr for DimensionOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "td" | "time-duration" => Ok(DimensionOrder::TimeDuration),
            "dt" | "duration-time" => Ok(DimensionOrder::DurationTime),
            other => Err(format!("unknown dimension order `{other}` (expected td or dt)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("page size must be at least 1")]
    ZeroPageSize,
    #[error("duplicate tuple id {0}")]
    DuplicateId(TupleId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    interval: Interval,
    id: TupleId,
}

/// Second-level partition, with exact min/max of the second-dimension key.
/// Entries are kept ascending by (end, id descending): iterating in reverse
/// yields the scan order, decreasing end with ties in id order.
#[derive(Debug, Clone)]
struct Cell {
    min_key2: Time,
    max_key2: Time,
    entries: Vec<Entry>,
}

impl Cell {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn max_end(&self) -> Time {
        self.entries.last().map(|e| e.interval.end).unwrap_or(0)
    }

    fn sort_entries(entries: &mut [Entry]) {
        entries.sort_unstable_by_key(|e| (e.interval.end, Reverse(e.id)));
    }

    /// Builds a cell from entries sorted by the second-dimension key.
    fn from_key2_sorted(entries: &[Entry], order: DimensionOrder) -> Self {
        debug_assert!(!entries.is_empty());
        let min_key2 = order.key2(&entries[0].interval);
        let max_key2 = order.key2(&entries[entries.len() - 1].interval);
        let mut entries = entries.to_vec();
        Self::sort_entries(&mut entries);
        Cell { min_key2, max_key2, entries }
    }

    fn refresh_key2_bounds(&mut self, order: DimensionOrder) {
        let mut keys = self.entries.iter().map(|e| order.key2(&e.interval));
        let first = keys.next().expect("cell must not be empty");
        let (mut lo, mut hi) = (first, first);
        for k in keys {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        self.min_key2 = lo;
        self.max_key2 = hi;
    }
}

/// First-level partition: cells ordered by strictly increasing `min_key2`,
/// plus the running maximum end time across the cell sequence.
#[derive(Debug, Clone)]
struct Column {
    min_key1: Time,
    max_key1: Time,
    size: usize,
    max_end: Time,
    cells: Vec<Cell>,
    cum_max_end: Vec<Time>,
}

impl Column {
    /// Partitions `entries` (any order) into cells of target size `s`.
    fn build(entries: &mut [Entry], s: usize, order: DimensionOrder) -> Self {
        debug_assert!(!entries.is_empty());
        let mut min_key1 = order.key1(&entries[0].interval);
        let mut max_key1 = min_key1;
        for e in entries.iter() {
            let k = order.key1(&e.interval);
            min_key1 = min_key1.min(k);
            max_key1 = max_key1.max(k);
        }

        entries.sort_unstable_by_key(|e| order.key2(&e.interval));
        let mut cells = Vec::new();
        let mut k = 0;
        while k < entries.len() {
            let k2 = next_subseq(entries, k, s, |e| order.key2(&e.interval));
            cells.push(Cell::from_key2_sorted(&entries[k..k2], order));
            k = k2;
        }

        let mut column = Column {
            min_key1,
            max_key1,
            size: 0,
            max_end: 0,
            cells,
            cum_max_end: Vec::new(),
        };
        column.refresh();
        column
    }

    /// Recomputes size, max end, and the per-cell cumulative max end array.
    fn refresh(&mut self) {
        self.cum_max_end.clear();
        let mut running = 0;
        let mut size = 0;
        for cell in &self.cells {
            running = running.max(cell.max_end());
            size += cell.len();
            self.cum_max_end.push(running);
        }
        self.max_end = running;
        self.size = size;
    }

    fn refresh_key1_bounds(&mut self, order: DimensionOrder) {
        let mut keys = self
            .cells
            .iter()
            .flat_map(|c| c.entries.iter())
            .map(|e| order.key1(&e.interval));
        let first = keys.next().expect("column must not be empty");
        let (mut lo, mut hi) = (first, first);
        for k in keys {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        self.min_key1 = lo;
        self.max_key1 = hi;
    }

    fn drain_entries(&mut self) -> Vec<Entry> {
        let mut out = Vec::with_capacity(self.size);
        for cell in &mut self.cells {
            out.append(&mut cell.entries);
        }
        out
    }

    /// Locates an exact stored entry by its keys: the cell owning its
    /// second-dimension key, then a binary search on the storage order.
    fn probe(&self, entry: &Entry, order: DimensionOrder) -> Option<(usize, usize)> {
        let k2 = order.key2(&entry.interval);
        let j = match self.cells.partition_point(|c| c.min_key2 <= k2) {
            0 => return None,
            p => p - 1,
        };
        let cell = &self.cells[j];
        let pos = cell.entries.partition_point(|e| {
            (e.interval.end, Reverse(e.id)) < (entry.interval.end, Reverse(entry.id))
        });
        (cell.entries.get(pos) == Some(entry)).then_some((j, pos))
    }
}

/// Traversal counters for a single query, used to check cost bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalCost {
    pub columns_touched: usize,
    pub cells_touched: usize,
    pub examined: u64,
}

/// Finds the end (exclusive) of the next partition of a key-sorted sequence.
///
/// Starting at `h` with size bound `b`, the returned `h'` satisfies one of:
/// fewer than `b` items remain and everything is taken; the items at `h` and
/// `h + b` share a key and the run extends to the first differing key (a
/// *heavy* group, possibly larger than `b`); or the boundary backs up to the
/// last key change at or before `h + b`. A run of equal keys is never split
/// across the boundary.
///
/// Panics if `h` is out of bounds or `b` is zero.
pub fn next_subseq<T>(items: &[T], h: usize, b: usize, key: impl Fn(&T) -> Time) -> usize {
    assert!(h < items.len(), "start index {h} out of bounds ({})", items.len());
    assert!(b >= 1, "size bound must be at least 1");
    if h + b >= items.len() {
        return items.len();
    }
    let mut end = h + b;
    if key(&items[h]) == key(&items[end]) {
        while end < items.len() && key(&items[h]) == key(&items[end]) {
            end += 1;
        }
    } else {
        while key(&items[end - 1]) == key(&items[end]) {
            end -= 1;
        }
    }
    end
}

/// Data-adaptive grid index over intervals, tuned by a single page size `s`:
/// columns target `s²` entries, cells target `s`.
pub struct RDIndex {
    s: usize,
    order: DimensionOrder,
    columns: Vec<Column>,
    /// Per column, running maximum end time over columns `0..=i`.
    cum_max_end: Vec<Time>,
    n: usize,
    build_millis: f64,
}

impl fmt::Debug for RDIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rd-index(s={}, order={}, n={}, columns={})",
            self.s,
            self.order.label(),
            self.n,
            self.columns.len()
        )
    }
}

impl RDIndex {
    /// Bulk-loads the index. Sorting dominates; the relation itself is not
    /// modified.
    pub fn build(relation: &Relation, s: usize, order: DimensionOrder) -> Result<Self, IndexError> {
        if s == 0 {
            return Err(IndexError::ZeroPageSize);
        }
        let started = Instant::now();
        let mut entries: Vec<Entry> = relation
            .iter()
            .map(|&(interval, id)| Entry { interval, id })
            .collect();
        let mut ids = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !ids.insert(e.id) {
                return Err(IndexError::DuplicateId(e.id));
            }
        }

        entries.sort_unstable_by_key(|e| order.key1(&e.interval));
        let block = s * s;
        let mut columns = Vec::new();
        let mut h = 0;
        while h < entries.len() {
            let h2 = next_subseq(&entries, h, block, |e| order.key1(&e.interval));
            columns.push(Column::build(&mut entries[h..h2], s, order));
            h = h2;
        }

        let mut index = RDIndex {
            s,
            order,
            columns,
            cum_max_end: Vec::new(),
            n: entries.len(),
            build_millis: 0.0,
        };
        index.rebuild_cum_max_end();
        index.build_millis = started.elapsed().as_secs_f64() * 1e3;
        Ok(index)
    }

    pub fn new_empty(s: usize, order: DimensionOrder) -> Result<Self, IndexError> {
        Self::build(&Relation::default(), s, order)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn page_size(&self) -> usize {
        self.s
    }

    pub fn order(&self) -> DimensionOrder {
        self.order
    }

    /// Number of entries in each column, in column order.
    pub fn column_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.size).collect()
    }

    /// Number of cells in each column, in column order.
    pub fn cells_per_column(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.cells.len()).collect()
    }

    pub fn query(&self, query: &Query) -> QueryResult {
        let mut matches = Vec::new();
        let cost = self.traverse(query, |id| matches.push(id));
        QueryResult { matches, examined: cost.examined }
    }

    /// Count-only execution; this is what the benchmark loop times.
    pub fn count(&self, query: &Query) -> CountResult {
        let mut count = 0;
        let cost = self.traverse(query, |_| count += 1);
        CountResult { count, examined: cost.examined }
    }

    pub fn query_with_cost(&self, query: &Query) -> (QueryResult, TraversalCost) {
        let mut matches = Vec::new();
        let cost = self.traverse(query, |id| matches.push(id));
        (QueryResult { matches, examined: cost.examined }, cost)
    }

    /// Grid traversal shared by all query flavors. An absent range behaves as
    /// `[0, ∞)` and an absent duration as `[1, ∞)`.
    ///
    /// Columns are entered at the last one whose lower boundary can still
    /// satisfy the query and walked backwards until the pruning array rules
    /// the rest out; the same scheme applies to the cells in each column, and
    /// each cell scan stops at the first entry ending at or before the range
    /// start.
    fn traverse(&self, query: &Query, mut sink: impl FnMut(TupleId)) -> TraversalCost {
        let mut cost = TraversalCost::default();
        if self.columns.is_empty() {
            return cost;
        }
        let (ts, te) = match query.range {
            Some(r) => (r.start, r.end),
            None => (0, Time::MAX),
        };
        let (dmin, dmax) = match query.duration {
            Some(d) => (d.min, d.max),
            None => (1, Time::MAX),
        };

        let order = self.order;
        let col_enter = match order {
            DimensionOrder::TimeDuration => self.columns.partition_point(|c| c.min_key1 < te),
            DimensionOrder::DurationTime => self.columns.partition_point(|c| c.min_key1 <= dmax),
        };
        for i in (0..col_enter).rev() {
            let column = &self.columns[i];
            let keep = match order {
                DimensionOrder::TimeDuration => ts < self.cum_max_end[i],
                DimensionOrder::DurationTime => column.max_key1 >= dmin,
            };
            if !keep {
                break;
            }
            cost.columns_touched += 1;

            let cell_enter = match order {
                DimensionOrder::TimeDuration => column.cells.partition_point(|c| c.min_key2 <= dmax),
                DimensionOrder::DurationTime => column.cells.partition_point(|c| c.min_key2 < te),
            };
            for j in (0..cell_enter).rev() {
                let cell = &column.cells[j];
                let keep = match order {
                    DimensionOrder::TimeDuration => cell.max_key2 >= dmin,
                    DimensionOrder::DurationTime => ts < column.cum_max_end[j],
                };
                if !keep {
                    break;
                }
                cost.cells_touched += 1;

                for entry in cell.entries.iter().rev() {
                    cost.examined += 1;
                    if entry.interval.end <= ts {
                        break;
                    }
                    let duration = entry.interval.duration();
                    if duration >= dmin && duration <= dmax && entry.interval.start < te {
                        sink(entry.id);
                    }
                }
            }
        }
        cost
    }

    /// Inserts one interval. The entry lands in the unique column/cell whose
    /// key ranges contain its keys (boundary columns stretch to cover keys
    /// outside all boundaries). A light column pushed past `s²` entries is
    /// replaced by two columns split at the breakpoint found with bound
    /// `s²/2 + 1`; a light cell pushed past `s` splits with bound `s/2 + 1`.
    /// Heavy columns and cells are never split.
    ///
    /// Re-inserting an already stored `(interval, id)` entry is rejected.
    /// Global id uniqueness is the caller's invariant; the backend layer
    /// enforces it through the id map it keeps for removal.
    pub fn insert(&mut self, interval: Interval, id: TupleId) -> Result<(), IndexError> {
        let entry = Entry { interval, id };
        let k1 = self.order.key1(&interval);

        if self.columns.is_empty() {
            self.columns.push(Column::build(&mut [entry], self.s, self.order));
            self.rebuild_cum_max_end();
            self.n += 1;
            return Ok(());
        }

        let placement = self.columns.partition_point(|c| c.min_key1 <= k1);
        let i = placement.saturating_sub(1);
        if placement > 0 && self.columns[i].probe(&entry, self.order).is_some() {
            return Err(IndexError::DuplicateId(id));
        }
        if placement == 0 {
            self.columns[0].min_key1 = k1;
        }

        let block = self.s * self.s;
        let column = &mut self.columns[i];
        let single_keyed = column.min_key1.min(k1) == column.max_key1.max(k1);
        if column.size + 1 > block && !single_keyed {
            let mut entries = column.drain_entries();
            entries.push(entry);
            let replacements = split_into_columns(entries, self.s, self.order);
            self.columns.splice(i..=i, replacements);
            self.rebuild_cum_max_end();
        } else {
            self.insert_into_column(i, entry);
            // suffix maintenance: the new end time can only raise the
            // running maxima from column i onward
            for running in &mut self.cum_max_end[i..] {
                *running = (*running).max(interval.end);
            }
        }
        self.n += 1;
        Ok(())
    }

    fn insert_into_column(&mut self, i: usize, entry: Entry) {
        let order = self.order;
        let s = self.s;
        let k1 = order.key1(&entry.interval);
        let k2 = order.key2(&entry.interval);
        let column = &mut self.columns[i];
        column.min_key1 = column.min_key1.min(k1);
        column.max_key1 = column.max_key1.max(k1);

        let j = match column.cells.partition_point(|c| c.min_key2 <= k2) {
            0 => {
                column.cells[0].min_key2 = k2;
                0
            }
            p => p - 1,
        };
        let cell = &mut column.cells[j];
        let single_keyed = cell.min_key2.min(k2) == cell.max_key2.max(k2);
        if cell.len() + 1 > s && !single_keyed {
            let mut entries = std::mem::take(&mut cell.entries);
            entries.push(entry);
            entries.sort_unstable_by_key(|e| order.key2(&e.interval));
            let breakpoint = next_subseq(&entries, 0, s / 2 + 1, |e| order.key2(&e.interval));
            let mut replacements = vec![Cell::from_key2_sorted(&entries[..breakpoint], order)];
            if breakpoint < entries.len() {
                replacements.push(Cell::from_key2_sorted(&entries[breakpoint..], order));
            }
            column.cells.splice(j..=j, replacements);
            column.refresh();
        } else {
            cell.min_key2 = cell.min_key2.min(k2);
            cell.max_key2 = cell.max_key2.max(k2);
            let pos = cell.entries.partition_point(|e| {
                (e.interval.end, Reverse(e.id)) < (entry.interval.end, Reverse(entry.id))
            });
            cell.entries.insert(pos, entry);
            column.size += 1;
            column.max_end = column.max_end.max(entry.interval.end);
            for running in &mut column.cum_max_end[j..] {
                *running = (*running).max(entry.interval.end);
            }
        }
    }

    /// Removes the entry `(interval, id)` if present, returning whether it
    /// was. A cell whose size together with an adjacent cell drops below `s`
    /// is merged with it; columns merge when their combined size drops below
    /// `s²`, after which the merged column is re-partitioned into cells.
    pub fn remove(&mut self, interval: Interval, id: TupleId) -> bool {
        if self.columns.is_empty() {
            return false;
        }
        let order = self.order;
        let k1 = order.key1(&interval);

        let i = match self.columns.partition_point(|c| c.min_key1 <= k1) {
            0 => return false,
            p => p - 1,
        };
        let target = Entry { interval, id };
        let Some((j, pos)) = self.columns[i].probe(&target, order) else {
            return false;
        };
        let column = &mut self.columns[i];
        let cell = &mut column.cells[j];

        cell.entries.remove(pos);
        self.n -= 1;

        if cell.entries.is_empty() {
            column.cells.remove(j);
        } else {
            cell.refresh_key2_bounds(order);
            self.merge_cells_around(i, j);
        }

        if self.columns[i].cells.is_empty() {
            self.columns.remove(i);
        } else {
            let column = &mut self.columns[i];
            if k1 == column.min_key1 || k1 == column.max_key1 {
                column.refresh_key1_bounds(order);
            }
            column.refresh();
            self.merge_columns_around(i);
        }
        self.rebuild_cum_max_end();
        true
    }

    /// Merges cell `j` of column `i` with an adjacent cell when the combined
    /// size is below `s`.
    fn merge_cells_around(&mut self, i: usize, j: usize) {
        let s = self.s;
        let column = &mut self.columns[i];
        let len = column.cells[j].len();
        let partner = if j > 0 && column.cells[j - 1].len() + len < s {
            Some(j - 1)
        } else if j + 1 < column.cells.len() && column.cells[j + 1].len() + len < s {
            Some(j + 1)
        } else {
            None
        };
        if let Some(other) = partner {
            let (lo, hi) = (j.min(other), j.max(other));
            let removed = column.cells.remove(hi);
            let kept = &mut column.cells[lo];
            kept.min_key2 = kept.min_key2.min(removed.min_key2);
            kept.max_key2 = kept.max_key2.max(removed.max_key2);
            kept.entries.extend(removed.entries);
            Cell::sort_entries(&mut kept.entries);
        }
    }

    /// Merges column `i` with an adjacent column when the combined size is
    /// below `s²`; the merged column is re-partitioned into cells.
    fn merge_columns_around(&mut self, i: usize) {
        let block = self.s * self.s;
        let size = self.columns[i].size;
        let partner = if i > 0 && self.columns[i - 1].size + size < block {
            Some(i - 1)
        } else if i + 1 < self.columns.len() && self.columns[i + 1].size + size < block {
            Some(i + 1)
        } else {
            None
        };
        if let Some(other) = partner {
            let (lo, hi) = (i.min(other), i.max(other));
            let mut entries = self.columns[lo].drain_entries();
            entries.extend(self.columns.remove(hi).drain_entries());
            self.columns[lo] = Column::build(&mut entries, self.s, self.order);
        }
    }

    fn rebuild_cum_max_end(&mut self) {
        self.cum_max_end.clear();
        let mut running = 0;
        for column in &self.columns {
            running = running.max(column.max_end);
            self.cum_max_end.push(running);
        }
    }

    /// Structural statistics plus the analytic size model: 16 bytes per
    /// interval, 8 bytes per boundary-array entry (three per column, three
    /// per cell), and 64 bytes fixed per column and per cell. Empty index
    /// reports 0 bytes per interval.
    pub fn stats(&self) -> IndexStats {
        let block = self.s * self.s;
        let columns = self.columns.len();
        let cells: usize = self.columns.iter().map(|c| c.cells.len()).sum();
        let heavy_columns = self.columns.iter().filter(|c| c.size > block).count();
        let heavy_cells = self
            .columns
            .iter()
            .flat_map(|c| c.cells.iter())
            .filter(|cell| cell.len() > self.s)
            .count();
        let bytes_per_interval = if self.n == 0 {
            0.0
        } else {
            let payload = 16u64 * self.n as u64;
            let boundaries = 8u64 * (3 * columns as u64 + 3 * cells as u64);
            let fixed = 64u64 * (columns as u64 + cells as u64);
            (payload + boundaries + fixed) as f64 / self.n as f64
        };
        IndexStats {
            columns,
            cells,
            heavy_columns,
            heavy_cells,
            bytes_per_interval,
            build_millis: self.build_millis,
        }
    }

    /// Walks the whole structure and checks every maintained invariant.
    /// Returns a description of the first violation found.
    pub fn validate(&self) -> Result<(), String> {
        let order = self.order;
        let block = self.s * self.s;
        if self.columns.len() != self.cum_max_end.len() {
            return Err("cumulative max end array length mismatch".into());
        }
        let mut seen = HashSet::new();
        let mut total = 0usize;
        let mut running_end = 0;
        for (i, column) in self.columns.iter().enumerate() {
            if column.cells.is_empty() {
                return Err(format!("column {i} is empty"));
            }
            if i > 0 && self.columns[i - 1].min_key1 >= column.min_key1 {
                return Err(format!("column {i} min key not strictly increasing"));
            }
            if column.size > block && column.min_key1 != column.max_key1 {
                return Err(format!("column {i} exceeds s² without a single key"));
            }
            if column.cells.len() != column.cum_max_end.len() {
                return Err(format!("column {i} cell cum array length mismatch"));
            }

            let next_min = self.columns.get(i + 1).map(|c| c.min_key1);
            let (mut k1_lo, mut k1_hi) = (Time::MAX, Time::MIN);
            let mut size = 0;
            let mut cell_running_end = 0;
            for (j, cell) in column.cells.iter().enumerate() {
                if cell.entries.is_empty() {
                    return Err(format!("cell {i}/{j} is empty"));
                }
                if j > 0 && column.cells[j - 1].min_key2 >= cell.min_key2 {
                    return Err(format!("cell {i}/{j} min key not strictly increasing"));
                }
                if cell.len() > self.s && cell.min_key2 != cell.max_key2 {
                    return Err(format!("cell {i}/{j} exceeds s without a single key"));
                }
                let heavy_in_heavy = column.size > block && cell.len() > self.s;

                let (mut k2_lo, mut k2_hi) = (Time::MAX, Time::MIN);
                let mut prev_end = Time::MAX;
                for entry in cell.entries.iter().rev() {
                    if !seen.insert(entry.id) {
                        return Err(format!("duplicate id {}", entry.id));
                    }
                    if entry.interval.end > prev_end {
                        return Err(format!("cell {i}/{j} scan order not by decreasing end"));
                    }
                    prev_end = entry.interval.end;
                    let k1 = order.key1(&entry.interval);
                    let k2 = order.key2(&entry.interval);
                    if k1 < column.min_key1 {
                        return Err(format!("cell {i}/{j} entry below column min key"));
                    }
                    if next_min.is_some_and(|m| k1 >= m) {
                        return Err(format!("cell {i}/{j} entry at or above next column min"));
                    }
                    k1_lo = k1_lo.min(k1);
                    k1_hi = k1_hi.max(k1);
                    k2_lo = k2_lo.min(k2);
                    k2_hi = k2_hi.max(k2);
                    if heavy_in_heavy && entry.interval != cell.entries[0].interval {
                        return Err(format!(
                            "cell {i}/{j} is heavy in a heavy column but holds distinct intervals"
                        ));
                    }
                }
                if (k2_lo, k2_hi) != (cell.min_key2, cell.max_key2) {
                    return Err(format!("cell {i}/{j} key bounds stale"));
                }
                cell_running_end = cell_running_end.max(cell.max_end());
                if column.cum_max_end[j] != cell_running_end {
                    return Err(format!("column {i} cell cum max end stale at {j}"));
                }
                size += cell.len();
            }
            if (k1_lo, k1_hi) != (column.min_key1, column.max_key1) {
                return Err(format!("column {i} key bounds stale"));
            }
            if size != column.size {
                return Err(format!("column {i} size stale"));
            }
            if column.max_end != cell_running_end {
                return Err(format!("column {i} max end stale"));
            }
            running_end = running_end.max(column.max_end);
            if self.cum_max_end[i] != running_end {
                return Err(format!("cumulative max end stale at column {i}"));
            }
            total += size;
        }
        if total != self.n {
            return Err(format!("entry count {total} does not match n={}", self.n));
        }
        Ok(())
    }
}

/// Splits an over-full light column into two at the breakpoint found with
/// bound `s²/2 + 1`, re-partitioning each half into cells.
fn split_into_columns(mut entries: Vec<Entry>, s: usize, order: DimensionOrder) -> Vec<Column> {
    entries.sort_unstable_by_key(|e| order.key1(&e.interval));
    let breakpoint = next_subseq(&entries, 0, (s * s) / 2 + 1, |e| order.key1(&e.interval));
    if breakpoint >= entries.len() {
        return vec![Column::build(&mut entries, s, order)];
    }
    let (left, right) = entries.split_at_mut(breakpoint);
    vec![Column::build(left, s, order), Column::build(right, s, order)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TimeRange;

    /// 25 start times from the partitioning example: a run of eleven 13s
    /// flanked by two groups of seven.
    fn sample_starts() -> Vec<Time> {
        let mut starts = vec![1, 2, 4, 4, 7, 8, 10];
        starts.extend(std::iter::repeat(13).take(11));
        starts.extend([14, 15, 16, 17, 19, 21, 23]);
        starts
    }

    fn sample_relation() -> Relation {
        let durations: Vec<Time> = vec![
            8, 4, 5, 10, 9, 9, 2, 6, 5, 3, 7, 9, 10, 11, 13, 14, 15, 17, 18, 4, 2, 4, 5, 12, 8,
        ];
        Relation::from_intervals(
            sample_starts()
                .into_iter()
                .zip(durations)
                .map(|(s, d)| Interval::new(s, s + d)),
        )
    }

    fn running_example() -> Relation {
        Relation::from_intervals([
            Interval::new(7, 13),
            Interval::new(9, 11),
            Interval::new(19, 34),
            Interval::new(23, 33),
        ])
    }

    #[test]
    fn next_subseq_partitioning_fixture() {
        let starts = sample_starts();
        let key = |t: &Time| *t;
        assert_eq!(next_subseq(&starts, 0, 9, key), 7);
        assert_eq!(next_subseq(&starts, 7, 9, key), 18); // heavy: 11 × start 13
        assert_eq!(next_subseq(&starts, 18, 9, key), 25);
    }

    #[test]
    fn next_subseq_never_splits_a_run() {
        let keys: Vec<Time> = vec![1, 1, 2, 2, 2, 3, 3, 5, 5, 5, 5, 6];
        let mut h = 0;
        while h < keys.len() {
            let h2 = next_subseq(&keys, h, 4, |k| *k);
            assert!(h2 > h);
            if h2 < keys.len() {
                assert_ne!(keys[h2 - 1], keys[h2], "run split at {h2}");
            }
            h = h2;
        }
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn next_subseq_rejects_bad_start() {
        next_subseq(&[1u64, 2], 2, 1, |k| *k);
    }

    #[test]
    fn build_single_interval() {
        let r = Relation::from_intervals([Interval::new(0, 5)]);
        let idx = RDIndex::build(&r, 2, DimensionOrder::TimeDuration).unwrap();
        assert_eq!(idx.column_sizes(), vec![1]);
        assert_eq!(idx.cells_per_column(), vec![1]);
        assert_eq!(idx.columns[0].min_key1, 0);
        assert_eq!(idx.cum_max_end, vec![5]);
        idx.validate().unwrap();
    }

    #[test]
    fn build_rejects_zero_page_size() {
        assert_eq!(
            RDIndex::build(&running_example(), 0, DimensionOrder::TimeDuration).unwrap_err(),
            IndexError::ZeroPageSize
        );
    }

    #[test]
    fn build_sample_columns() {
        let idx = RDIndex::build(&sample_relation(), 3, DimensionOrder::TimeDuration).unwrap();
        assert_eq!(idx.column_sizes(), vec![7, 11, 7]);
        let stats = idx.stats();
        assert_eq!(stats.columns, 3);
        assert_eq!(stats.heavy_columns, 1);
        idx.validate().unwrap();
    }

    #[test]
    fn build_distinct_keys_columns() {
        let r = Relation::from_intervals((1..=100).map(|s| Interval::new(s, s + 1)));
        let idx = RDIndex::build(&r, 4, DimensionOrder::TimeDuration).unwrap();
        assert_eq!(idx.column_sizes(), vec![16, 16, 16, 16, 16, 16, 4]);
        idx.validate().unwrap();
    }

    #[test]
    fn query_running_example() {
        for order in [DimensionOrder::TimeDuration, DimensionOrder::DurationTime] {
            let idx = RDIndex::build(&running_example(), 2, order).unwrap();
            let q = Query::range_duration(14, 44, 5, 15);
            // r3 (id 2) and r4 (id 3): duration bounds are inclusive, so r3's
            // duration of exactly 15 qualifies.
            assert_eq!(idx.query(&q).sorted_matches(), vec![2, 3]);
            assert_eq!(idx.query(&Query::range_only(14, 44)).sorted_matches(), vec![2, 3]);
            assert_eq!(idx.query(&Query::duration_only(5, 8)).sorted_matches(), vec![0]);
        }
    }

    #[test]
    fn query_empty_index() {
        let idx = RDIndex::new_empty(4, DimensionOrder::TimeDuration).unwrap();
        let res = idx.query(&Query::range_duration(0, 100, 1, 10));
        assert!(res.matches.is_empty());
        assert_eq!(res.examined, 0);
    }

    #[test]
    fn query_counts_break_entry() {
        // One cell, scanned by decreasing end: [5,9), [1,3). Range [3,7)
        // matches the first and stops at the second, which still counts.
        let r = Relation::from_intervals([Interval::new(1, 3), Interval::new(5, 9)]);
        let idx = RDIndex::build(&r, 4, DimensionOrder::TimeDuration).unwrap();
        let res = idx.query(&Query::range_only(3, 7));
        assert_eq!(res.sorted_matches(), vec![1]);
        assert_eq!(res.examined, 2);
    }

    #[test]
    fn insert_into_empty() {
        let mut idx = RDIndex::new_empty(4, DimensionOrder::TimeDuration).unwrap();
        idx.insert(Interval::new(3, 9), 7).unwrap();
        assert_eq!(idx.column_sizes(), vec![1]);
        assert_eq!(idx.cells_per_column(), vec![1]);
        assert_eq!(idx.cum_max_end, vec![9]);
        idx.validate().unwrap();
        assert_eq!(idx.query(&Query::range_only(0, 100)).matches, vec![7]);
    }

    #[test]
    fn insert_splits_full_column() {
        let r = Relation::from_intervals((1..=16).map(|s| Interval::new(s, s + 1)));
        let mut idx = RDIndex::build(&r, 4, DimensionOrder::TimeDuration).unwrap();
        assert_eq!(idx.column_sizes(), vec![16]);
        idx.insert(Interval::new(17, 18), 100).unwrap();
        assert_eq!(idx.column_sizes(), vec![9, 8]);
        idx.validate().unwrap();
    }

    #[test]
    fn insert_copies_forms_heavy_column_and_cell() {
        let mut idx = RDIndex::new_empty(4, DimensionOrder::TimeDuration).unwrap();
        for id in 0..20 {
            idx.insert(Interval::new(5, 10), id).unwrap();
        }
        let stats = idx.stats();
        assert_eq!(stats.columns, 1);
        assert_eq!(stats.cells, 1);
        assert_eq!(stats.heavy_columns, 1);
        assert_eq!(stats.heavy_cells, 1);
        idx.validate().unwrap();
        let res = idx.query(&Query::range_duration(6, 7, 5, 5));
        assert_eq!(res.matches.len(), 20);
    }

    #[test]
    fn insert_rejects_duplicate_entry() {
        let mut idx = RDIndex::new_empty(4, DimensionOrder::TimeDuration).unwrap();
        idx.insert(Interval::new(0, 2), 1).unwrap();
        assert_eq!(
            idx.insert(Interval::new(0, 2), 1).unwrap_err(),
            IndexError::DuplicateId(1)
        );
        idx.validate().unwrap();
        assert_eq!(idx.len(), 1);
    }

    #[test]
    fn build_rejects_duplicate_ids() {
        let relation = Relation::new(vec![
            (Interval::new(0, 2), 9),
            (Interval::new(5, 6), 9),
        ]);
        assert_eq!(
            RDIndex::build(&relation, 4, DimensionOrder::TimeDuration).unwrap_err(),
            IndexError::DuplicateId(9)
        );
    }

    #[test]
    fn insert_key_below_all_boundaries() {
        let r = Relation::from_intervals((10..20).map(|s| Interval::new(s, s + 3)));
        let mut idx = RDIndex::build(&r, 3, DimensionOrder::TimeDuration).unwrap();
        idx.insert(Interval::new(2, 4), 50).unwrap();
        idx.validate().unwrap();
        assert!(idx.query(&Query::range_only(0, 5)).matches.contains(&50));
    }

    #[test]
    fn remove_single_entry_empties_index() {
        let mut idx = RDIndex::new_empty(4, DimensionOrder::TimeDuration).unwrap();
        idx.insert(Interval::new(3, 9), 7).unwrap();
        assert!(idx.remove(Interval::new(3, 9), 7));
        assert!(idx.is_empty());
        idx.validate().unwrap();
        assert!(idx.query(&Query::range_only(0, 100)).matches.is_empty());
    }

    #[test]
    fn remove_unknown_id_is_noop() {
        let mut idx = RDIndex::build(&running_example(), 4, DimensionOrder::TimeDuration).unwrap();
        assert!(!idx.remove(Interval::new(7, 13), 99));
        assert_eq!(idx.len(), 4);
        idx.validate().unwrap();
    }

    #[test]
    fn remove_merges_back_down() {
        let r = Relation::from_intervals((1..=32).map(|s| Interval::new(s, s + 1 + s % 5)));
        let mut idx = RDIndex::build(&r, 3, DimensionOrder::TimeDuration).unwrap();
        for (interval, id) in r.items.clone() {
            assert!(idx.remove(interval, id));
            idx.validate().unwrap();
        }
        assert!(idx.is_empty());
        assert_eq!(idx.stats().columns, 0);
    }

    #[test]
    fn stats_empty_index() {
        let idx = RDIndex::new_empty(8, DimensionOrder::DurationTime).unwrap();
        let stats = idx.stats();
        assert_eq!(stats.columns, 0);
        assert_eq!(stats.cells, 0);
        assert_eq!(stats.bytes_per_interval, 0.0);
    }

    #[test]
    fn degenerate_page_sizes_stay_correct() {
        let r = sample_relation();
        let oracle = |q: &Query| {
            let mut ids: Vec<TupleId> = r
                .iter()
                .filter(|(iv, _)| iv.matches(q))
                .map(|&(_, id)| id)
                .collect();
            ids.sort_unstable();
            ids
        };
        let queries = [
            Query::range_duration(5, 20, 2, 9),
            Query::range_only(13, 14),
            Query::duration_only(9, 9),
            Query { range: Some(TimeRange::new(1, 40)), duration: None },
        ];
        for s in [1, 2, 6, 50] {
            for order in [DimensionOrder::TimeDuration, DimensionOrder::DurationTime] {
                let idx = RDIndex::build(&r, s, order).unwrap();
                idx.validate().unwrap();
                for q in &queries {
                    assert_eq!(idx.query(q).sorted_matches(), oracle(q), "s={s} {order:?}");
                }
            }
        }
    }

    /// Two consecutive non-final columns always jointly hold at least s²
    /// entries, which caps the column count at 2·ceil(n/s²)+1; same for
    /// cells within a column.
    #[test]
    fn partition_counts_stay_bounded() {
        let mut intervals = Vec::new();
        // single key followed by a run of exactly s² equal keys, repeated —
        // the adversarial layout for tiny light columns
        for block in 0u64..6 {
            let base = block * 100;
            intervals.push(Interval::new(base + 1, base + 3));
            for _ in 0..9 {
                intervals.push(Interval::new(base + 2, base + 2 + 1 + block % 4));
            }
        }
        let r = Relation::from_intervals(intervals);
        let idx = RDIndex::build(&r, 3, DimensionOrder::TimeDuration).unwrap();
        idx.validate().unwrap();
        let sizes = idx.column_sizes();
        let block = 9;
        assert!(sizes.len() <= 2 * r.len().div_ceil(block) + 1);
        for w in sizes[..sizes.len().saturating_sub(1)].windows(2) {
            assert!(w[0] + w[1] >= block, "consecutive columns too small: {sizes:?}");
        }
    }

    #[test]
    fn dimension_order_labels_parse() {
        assert_eq!("td".parse::<DimensionOrder>().unwrap(), DimensionOrder::TimeDuration);
        assert_eq!("dt".parse::<DimensionOrder>().unwrap(), DimensionOrder::DurationTime);
        assert!("xy".parse::<DimensionOrder>().is_err());
    }
}
