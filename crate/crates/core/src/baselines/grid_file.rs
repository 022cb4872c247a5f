//! Uniform grid over the (start time × duration) bounding box: equal-width
//! strips and bands instead of equi-depth ones. The query traversal mirrors
//! the adaptive grid's, so under skew the difference in examined counts is
//! due purely to unbalanced buckets. Build-once: no updates.

use std::cmp::Reverse;
use std::time::Instant;

use super::{BackendError, IndexBackend};
use crate::rd_index::IndexError;
use crate::types::{CountResult, IndexStats, Interval, Query, QueryResult, Relation};
use crate::{Time, TupleId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridFileParams {
    pub time_cells: usize,
    pub duration_cells: usize,
}

impl GridFileParams {
    /// `⌈√(n/200)⌉` cells per dimension, at least one.
    pub fn default_for(n: usize) -> Self {
        let cells = ((n as f64 / 200.0).sqrt().ceil() as usize).max(1);
        GridFileParams { time_cells: cells, duration_cells: cells }
    }
}

#[derive(Debug)]
pub struct GridFileBackend {
    params: GridFileParams,
    min_start: Time,
    start_width: Time,
    min_duration: Time,
    duration_width: Time,
    /// `strips[i][j]`: bucket for time strip `i`, duration band `j`, sorted
    /// by decreasing end time.
    strips: Vec<Vec<Vec<(Interval, TupleId)>>>,
    /// Running max end time over strips `0..=i`.
    cum_max_end: Vec<Time>,
    n: usize,
    build_millis: f64,
}

impl GridFileBackend {
    pub fn new(params: GridFileParams) -> Result<Self, BackendError> {
        if params.time_cells < 1 || params.duration_cells < 1 {
            return Err(BackendError::InvalidConfig(
                "grid file needs at least one cell per dimension".into(),
            ));
        }
        Ok(GridFileBackend {
            params,
            min_start: 0,
            start_width: 1,
            min_duration: 1,
            duration_width: 1,
            strips: Vec::new(),
            cum_max_end: Vec::new(),
            n: 0,
            build_millis: 0.0,
        })
    }

    fn strip_of(&self, start: Time) -> usize {
        (((start - self.min_start) / self.start_width) as usize).min(self.params.time_cells - 1)
    }

    fn band_of(&self, duration: Time) -> usize {
        (((duration - self.min_duration) / self.duration_width) as usize)
            .min(self.params.duration_cells - 1)
    }

    fn scan(&self, query: &Query, mut visit: impl FnMut(&Interval, TupleId)) -> u64 {
        let mut examined = 0;
        if self.n == 0 {
            return examined;
        }
        let (ts, te) = match query.range {
            Some(r) => (r.start, r.end),
            None => (0, Time::MAX),
        };
        let (dmin, dmax) = match query.duration {
            Some(d) => (d.min, d.max),
            None => (1, Time::MAX),
        };
        if te <= self.min_start || dmax < self.min_duration {
            return examined;
        }
        let strip_enter = self.strip_of(te - 1);
        let band_enter = self.band_of(dmax);
        for i in (0..=strip_enter).rev() {
            if ts >= self.cum_max_end[i] {
                break;
            }
            for j in (0..=band_enter).rev() {
                // exclusive upper duration bound of band j
                let band_hi = self.min_duration + (j as Time + 1) * self.duration_width;
                if band_hi <= dmin {
                    break;
                }
                for &(interval, id) in &self.strips[i][j] {
                    examined += 1;
                    if interval.end <= ts {
                        break;
                    }
                    let duration = interval.duration();
                    if duration >= dmin && duration <= dmax && interval.start < te {
                        visit(&interval, id);
                    }
                }
            }
        }
        examined
    }
}

impl IndexBackend for GridFileBackend {
    fn name(&self) -> &'static str {
        "grid-file"
    }

    fn params(&self) -> String {
        format!(
            "time_cells={} duration_cells={}",
            self.params.time_cells, self.params.duration_cells
        )
    }

    fn build(&mut self, relation: &Relation) -> Result<(), BackendError> {
        let started = Instant::now();
        self.n = relation.len();
        self.strips =
            vec![vec![Vec::new(); self.params.duration_cells]; self.params.time_cells];
        self.cum_max_end = vec![0; self.params.time_cells];
        let Some(summary) = relation.summary() else {
            // empty relation: a degenerate grid with empty buckets
            self.build_millis = started.elapsed().as_secs_f64() * 1e3;
            return Ok(());
        };
        self.min_start = summary.min_start;
        let start_span = summary.max_start - summary.min_start;
        self.start_width = (start_span / self.params.time_cells as Time) + 1;
        self.min_duration = summary.min_duration;
        let duration_span = summary.max_duration - summary.min_duration;
        self.duration_width = (duration_span / self.params.duration_cells as Time) + 1;

        let mut seen = std::collections::HashSet::with_capacity(relation.len());
        for &(interval, id) in relation.iter() {
            if !seen.insert(id) {
                return Err(IndexError::DuplicateId(id).into());
            }
            let i = self.strip_of(interval.start);
            let j = self.band_of(interval.duration());
            self.strips[i][j].push((interval, id));
        }
        let mut running = 0;
        for (i, strip) in self.strips.iter_mut().enumerate() {
            for bucket in strip.iter_mut() {
                bucket.sort_unstable_by_key(|&(iv, id)| (Reverse(iv.end), id));
                running = running.max(bucket.first().map(|&(iv, _)| iv.end).unwrap_or(0));
            }
            self.cum_max_end[i] = running;
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
        let strips = self.params.time_cells;
        let buckets = strips * self.params.duration_cells;
        let bytes_per_interval = if self.n == 0 {
            0.0
        } else {
            (16.0 * self.n as f64 + 8.0 * strips as f64 + 64.0 * (strips + buckets) as f64)
                / self.n as f64
        };
        IndexStats {
            columns: strips,
            cells: buckets,
            bytes_per_interval,
            build_millis: self.build_millis,
            ..IndexStats::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_intervals_fill_one_bucket() {
        let r = Relation::from_intervals(std::iter::repeat(Interval::new(5, 10)).take(50));
        let mut g = GridFileBackend::new(GridFileParams { time_cells: 4, duration_cells: 4 })
            .unwrap();
        g.build(&r).unwrap();
        let res = g.query(&Query::range_duration(0, 100, 1, 10));
        assert_eq!(res.matches.len(), 50);
        assert_eq!(res.examined, 50);
    }

    #[test]
    fn empty_relation_degenerates_gracefully() {
        let mut g = GridFileBackend::new(GridFileParams { time_cells: 1, duration_cells: 1 })
            .unwrap();
        g.build(&Relation::default()).unwrap();
        let res = g.query(&Query::range_only(0, 10));
        assert!(res.matches.is_empty());
        assert_eq!(res.examined, 0);
        assert_eq!(g.stats().bytes_per_interval, 0.0);
    }

    #[test]
    fn rejects_zero_cells() {
        assert!(GridFileBackend::new(GridFileParams { time_cells: 0, duration_cells: 3 }).is_err());
    }
}
