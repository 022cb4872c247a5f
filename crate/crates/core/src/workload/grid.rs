//! Query sets tiling the time × duration selectivity plane.
//!
//! Targets are realized against the empirical distribution: duration bands
//! are chosen as quantile windows of the sorted duration multiset, and time
//! ranges by binary-searching the range end until the overlap count
//! `#(start < te) − #(end ≤ ts)` hits the target. Realized selectivities are
//! therefore exact oracle counts, not estimates.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::WorkloadError;
use crate::types::{DurationRange, Query, Relation, TimeRange};
use crate::Time;

/// One grid point: the query plus its per-dimension selectivity targets and
/// the oracle-measured values actually achieved. `realized` is false when a
/// target could not be met within 10% relative error on this relation; such
/// points are flagged rather than dropped.
#[derive(Debug, Clone)]
pub struct GridQuery {
    pub query: Query,
    pub time_target: f64,
    pub duration_target: f64,
    pub time_selectivity: f64,
    pub duration_selectivity: f64,
    pub realized: bool,
}

const TOLERANCE: f64 = 0.10;
const ATTEMPTS: usize = 64;

/// Builds `g²` range-duration queries whose time selectivity steps through
/// `1/g, 2/g, …, 1` across rows and duration selectivity across columns.
/// Achieved per-dimension selectivities are non-decreasing along their axis.
pub fn selectivity_grid_queries(
    relation: &Relation,
    g: usize,
) -> Result<Vec<GridQuery>, WorkloadError> {
    if g < 1 {
        return Err(WorkloadError::InvalidDistribution(
            "grid dimension must be at least 1".into(),
        ));
    }
    let summary = relation.summary().ok_or(WorkloadError::EmptyRelation)?;
    let n = relation.len();

    let mut starts: Vec<Time> = relation.iter().map(|(iv, _)| iv.start).collect();
    let mut ends: Vec<Time> = relation.iter().map(|(iv, _)| iv.end).collect();
    let mut durations: Vec<Time> = relation.iter().map(|(iv, _)| iv.duration()).collect();
    starts.sort_unstable();
    ends.sort_unstable();
    durations.sort_unstable();

    // The construction is deterministic per relation: anchors come from a
    // fixed-seed stream.
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d1c_5e1e);

    let mut bands: Vec<(DurationRange, usize, bool)> = Vec::with_capacity(g);
    let mut prev = 0usize;
    for b in 1..=g {
        let target = target_count(b, g, n);
        let band = realize_duration_band(&durations, target, prev, &mut rng);
        prev = band.1;
        bands.push(band);
    }

    let mut ranges: Vec<(TimeRange, usize, bool)> = Vec::with_capacity(g);
    let mut prev = 0usize;
    for a in 1..=g {
        let target = target_count(a, g, n);
        let range = realize_time_range(&starts, &ends, summary.max_start, target, prev, &mut rng);
        prev = range.1;
        ranges.push(range);
    }

    let mut out = Vec::with_capacity(g * g);
    for (a, &(range, t_count, t_ok)) in ranges.iter().enumerate() {
        for (b, &(band, d_count, d_ok)) in bands.iter().enumerate() {
            out.push(GridQuery {
                query: Query { range: Some(range), duration: Some(band) },
                time_target: (a + 1) as f64 / g as f64,
                duration_target: (b + 1) as f64 / g as f64,
                time_selectivity: t_count as f64 / n as f64,
                duration_selectivity: d_count as f64 / n as f64,
                realized: t_ok && d_ok,
            });
        }
    }
    Ok(out)
}

fn target_count(step: usize, g: usize, n: usize) -> usize {
    (((step as f64 / g as f64) * n as f64).round() as usize).clamp(1, n)
}

fn relative_error(achieved: usize, target: usize) -> f64 {
    (achieved as f64 - target as f64).abs() / target as f64
}

/// Picks `[dmin, dmax]` as a quantile window of the sorted durations,
/// snapping both bounds to whole runs of equal values. Returns the band, its
/// exact match count, and whether the count is within tolerance of `target`
/// without dropping below the previous band's count.
fn realize_duration_band(
    durations: &[Time],
    target: usize,
    prev_achieved: usize,
    rng: &mut ChaCha8Rng,
) -> (DurationRange, usize, bool) {
    let n = durations.len();
    let slack = n - target;
    let mut best: Option<(f64, DurationRange, usize)> = None;

    for attempt in 0..ATTEMPTS {
        let pos = if attempt >= ATTEMPTS - 4 {
            slack * (ATTEMPTS - attempt) / 8
        } else {
            rng.gen_range(0..=slack)
        };
        let dmin = durations[pos];
        let lo = durations.partition_point(|&d| d < dmin);
        let j = (lo + target - 1).min(n - 1);

        for dmax in [durations[j], dmin.max(durations[j].saturating_sub(1))] {
            if dmax < dmin {
                continue;
            }
            let hi = durations.partition_point(|&d| d <= dmax);
            let achieved = hi.saturating_sub(lo);
            if achieved == 0 || achieved < prev_achieved {
                continue;
            }
            let err = relative_error(achieved, target);
            if best.as_ref().map_or(true, |(e, _, _)| err < *e) {
                best = Some((err, DurationRange::new(dmin, dmax), achieved));
            }
        }
        if best.as_ref().is_some_and(|(e, _, _)| *e <= TOLERANCE) {
            break;
        }
    }

    match best {
        Some((err, band, achieved)) => (band, achieved, err <= TOLERANCE),
        // nothing satisfies monotonicity: fall back to the full domain
        None => {
            let band = DurationRange::new(durations[0], durations[n - 1]);
            (band, n, relative_error(n, target) <= TOLERANCE)
        }
    }
}

/// Picks `[ts, te)` by anchoring `ts` at a start-time quantile and binary
/// searching the smallest `te` whose overlap count reaches `target`.
fn realize_time_range(
    starts: &[Time],
    ends: &[Time],
    max_start: Time,
    target: usize,
    prev_achieved: usize,
    rng: &mut ChaCha8Rng,
) -> (TimeRange, usize, bool) {
    let n = starts.len();
    let slack = n - target;
    let overlap = |ts: Time, te: Time| -> usize {
        starts.partition_point(|&s| s < te) - ends.partition_point(|&e| e <= ts)
    };
    let mut best: Option<(f64, TimeRange, usize)> = None;

    for attempt in 0..ATTEMPTS {
        let pos = if attempt >= ATTEMPTS - 4 {
            slack * (ATTEMPTS - attempt) / 8
        } else {
            rng.gen_range(0..=slack)
        };
        let ts = starts[pos];
        let te_cap = max_start + 1;
        if ts >= te_cap || overlap(ts, te_cap) < target {
            continue;
        }
        // smallest te with overlap(ts, te) >= target
        let (mut lo, mut hi) = (ts + 1, te_cap);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if overlap(ts, mid) >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        for te in [lo, (lo - 1).max(ts + 1)] {
            let achieved = overlap(ts, te);
            if achieved == 0 || achieved < prev_achieved {
                continue;
            }
            let err = relative_error(achieved, target);
            if best.as_ref().map_or(true, |(e, _, _)| err < *e) {
                best = Some((err, TimeRange::new(ts, te), achieved));
            }
        }
        if best.as_ref().is_some_and(|(e, _, _)| *e <= TOLERANCE) {
            break;
        }
    }

    match best {
        Some((err, range, achieved)) => (range, achieved, err <= TOLERANCE),
        None => {
            let range = TimeRange::new(starts[0], max_start + 1);
            let achieved = overlap(starts[0], max_start + 1);
            (range, achieved, relative_error(achieved, target) <= TOLERANCE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Interval;
    use crate::workload::{gen_relation, DataSpec};

    fn oracle_counts(relation: &Relation, q: &Query) -> (usize, usize) {
        let time = relation
            .iter()
            .filter(|(iv, _)| q.range.map_or(true, |r| iv.overlaps(&r)))
            .count();
        let duration = relation
            .iter()
            .filter(|(iv, _)| q.duration.map_or(true, |d| d.contains(iv.duration())))
            .count();
        (time, duration)
    }

    #[test]
    fn single_cell_grid_covers_everything() {
        let r = gen_relation(&DataSpec::synthetic(2_000, 100, 5)).unwrap();
        let grid = selectivity_grid_queries(&r, 1).unwrap();
        assert_eq!(grid.len(), 1);
        let q = &grid[0];
        assert!(q.realized);
        assert!(q.time_selectivity >= 0.9);
        assert!(q.duration_selectivity >= 0.9);
    }

    #[test]
    fn grid_has_g_squared_queries_and_exact_selectivities() {
        let r = gen_relation(&DataSpec::synthetic(20_000, 200, 11)).unwrap();
        let g = 8;
        let grid = selectivity_grid_queries(&r, g).unwrap();
        assert_eq!(grid.len(), g * g);
        for gq in &grid {
            let (time, duration) = oracle_counts(&r, &gq.query);
            assert_eq!(gq.time_selectivity, time as f64 / r.len() as f64);
            assert_eq!(gq.duration_selectivity, duration as f64 / r.len() as f64);
            if gq.realized {
                let t_err = (gq.time_selectivity - gq.time_target).abs() / gq.time_target;
                let d_err =
                    (gq.duration_selectivity - gq.duration_target).abs() / gq.duration_target;
                assert!(t_err <= TOLERANCE + 1e-9, "time err {t_err}");
                assert!(d_err <= TOLERANCE + 1e-9, "duration err {d_err}");
            }
        }
        let realized = grid.iter().filter(|q| q.realized).count();
        assert!(realized * 10 >= grid.len() * 8, "only {realized}/{} realized", grid.len());
    }

    #[test]
    fn selectivities_are_monotone_along_axes() {
        let r = gen_relation(&DataSpec::synthetic(30_000, 500, 3)).unwrap();
        let g = 16;
        let grid = selectivity_grid_queries(&r, g).unwrap();
        for a in 0..g {
            for b in 0..g {
                let q = &grid[a * g + b];
                if a > 0 {
                    assert!(q.time_selectivity >= grid[(a - 1) * g + b].time_selectivity);
                }
                if b > 0 {
                    assert!(q.duration_selectivity >= grid[a * g + b - 1].duration_selectivity);
                }
            }
        }
    }

    #[test]
    fn tiny_relation_flags_unreachable_targets() {
        let r = Relation::from_intervals([Interval::new(0, 4), Interval::new(0, 4)]);
        let grid = selectivity_grid_queries(&r, 4).unwrap();
        assert_eq!(grid.len(), 16);
        // with two identical intervals only selectivity 1 is reachable
        assert!(grid.iter().any(|q| !q.realized));
        assert!(grid.iter().all(|q| q.duration_selectivity == 1.0));
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(selectivity_grid_queries(&Relation::default(), 4).is_err());
        let r = Relation::from_intervals([Interval::new(0, 4)]);
        assert!(selectivity_grid_queries(&r, 0).is_err());
    }
}
