use serde::{Deserialize, Serialize};

use super::grid::SyntheticGrid;
use crate::error::{Error, Result};
use crate::ingest::Instant;

/// Grid index assigned to each raw timestamp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DejitterMapping {
    pub alloc: Vec<i64>,
}

/// Grid points left unallocated between the first and last allocation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DropReport {
    pub dropped_k: Vec<i64>,
    pub count: usize,
}

/// Walks the raw timestamps from last to first and gives each one the highest
/// free grid point not later than it.
///
/// The highest free point is `min(floor(t_i), k_{i+1} - 1)`: every grid point
/// above `k_{i+1}` that is not later than `t_i` was already taken, so the scan
/// collapses to a closed form and the whole pass is O(N).
pub fn allocate(ts: &[Instant], grid: &SyntheticGrid) -> Result<DejitterMapping> {
    let mut alloc = vec![0i64; ts.len()];
    let mut next = i64::MAX;
    for (i, &t) in ts.iter().enumerate().rev() {
        let k = grid
            .floor_index(t)
            .min(grid.k_max)
            .min(next.saturating_sub(1));
        if k < grid.k_min {
            return Err(Error::GridUnderflow { index: i });
        }
        alloc[i] = k;
        next = k;
    }
    Ok(DejitterMapping { alloc })
}

/// Same rule as [`allocate`] without a lower bound on the grid.
pub(crate) fn allocate_unbounded(ts: &[Instant], anchor: f64, period: f64) -> Vec<i64> {
    let grid = SyntheticGrid {
        anchor,
        period,
        k_min: i64::MIN,
        k_max: i64::MAX,
    };
    let mut alloc = vec![0i64; ts.len()];
    let mut next = i64::MAX;
    for (i, &t) in ts.iter().enumerate().rev() {
        let k = grid.floor_index(t).min(next.saturating_sub(1));
        alloc[i] = k;
        next = k;
    }
    alloc
}

pub fn detect_drops(mapping: &DejitterMapping) -> DropReport {
    let dropped_k: Vec<i64> = mapping
        .alloc
        .windows(2)
        .flat_map(|w| (w[0] + 1)..w[1])
        .collect();
    DropReport {
        count: dropped_k.len(),
        dropped_k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timebase::grid::synthesize_grid;

    #[test]
    fn end_to_start_example() {
        let ts = [0.0, 0.012, 0.020, 0.033];
        let grid = SyntheticGrid::spanning(&ts, 0.011, 0.01625, 0.010).unwrap();
        let m = allocate(&ts, &grid).unwrap();
        let pts: Vec<f64> = m.alloc.iter().map(|&k| grid.point(k) * 1e3).collect();
        for (p, want) in pts.iter().zip([-5.75, 5.25, 16.25, 27.25]) {
            assert!((p - want).abs() < 1e-9, "{pts:?}");
        }
        for w in pts.windows(2) {
            assert!((w[1] - w[0] - 11.0).abs() < 1e-9);
        }
    }

    #[test]
    fn equal_value_is_taken() {
        let ts = [0.0, 0.010, 0.020];
        let grid = synthesize_grid(&ts, 0.010, 0.0).unwrap();
        let m = allocate(&ts, &grid).unwrap();
        let pts: Vec<f64> = m.alloc.iter().map(|&k| grid.point(k)).collect();
        assert_eq!(pts, ts);
        assert_eq!(detect_drops(&m).count, 0);
    }

    #[test]
    fn one_missing_sample_leaves_one_hole() {
        let ts: Vec<f64> = (0..21).filter(|&i| i != 7).map(|i| i as f64 * 0.01).collect();
        let grid = synthesize_grid(&ts, 0.01, 0.05).unwrap();
        let m = allocate(&ts, &grid).unwrap();
        let d = detect_drops(&m);
        assert_eq!(d.count, 1);
        assert!(m.alloc[6] < d.dropped_k[0] && d.dropped_k[0] < m.alloc[7]);
    }

    #[test]
    fn underflow_names_index() {
        // four samples squeezed into one period need grid points below the start
        let ts = [0.0, 0.001, 0.002, 0.003, 1.0];
        let grid = SyntheticGrid::spanning(&ts, 0.5, 0.0, 0.0).unwrap();
        match allocate(&ts, &grid) {
            Err(Error::GridUnderflow { index }) => assert_eq!(index, 2),
            other => panic!("{other:?}"),
        }
    }
}
