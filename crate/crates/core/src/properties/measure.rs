//! Empirical measures on grids, induced finite-dimensional estimates, and
//! the marginal consistency check between consecutive orders.

use serde::{Deserialize, Serialize};

use super::grid::PatternGrid;
use crate::error::{invalid, Result};
use crate::pathcore::{tail_estimate, DensityEstimate, OccurrenceSet, Path, TailConfig};

/// `F_n^k` on the cells of a grid: the fraction of the first `n` windows
/// falling in each cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub k: usize,
    pub grid: PatternGrid,
    pub counts: Vec<usize>,
    pub masses: Vec<f64>,
    pub n: usize,
    /// Windows among the first `n` that fall in no cell.
    pub misses: usize,
}

impl EmpiricalMeasure {
    pub fn total_mass(&self) -> f64 {
        self.counts.iter().sum::<usize>() as f64 / self.n as f64
    }
}

pub fn empirical_measure(path: &Path, grid: &PatternGrid, n: usize) -> Result<EmpiricalMeasure> {
    let k = grid.k();
    if k > path.len() {
        return invalid(format!("grid order {k} exceeds path length {}", path.len()));
    }
    let max_n = path.len() - k + 1;
    if n == 0 || n > max_n {
        return invalid(format!("window count {n} outside 1..={max_n}"));
    }
    let labels = grid.label_windows(path)?;
    let mut counts = vec![0usize; grid.num_cells()];
    let mut misses = 0;
    for label in &labels[..n] {
        match label {
            Some(c) => counts[*c] += 1,
            None => misses += 1,
        }
    }
    let masses = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(EmpiricalMeasure {
        k,
        grid: grid.clone(),
        counts,
        masses,
        n,
        misses,
    })
}

/// Grid estimates of the order-`k` laws of the process a path induces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddLevel {
    pub k: usize,
    pub grid: PatternGrid,
    /// Tail-window estimate per cell, from each cell's full-horizon
    /// trajectory.
    pub estimates: Vec<DensityEstimate>,
    /// Raw measure at the matched window count shared by all levels.
    pub matched: EmpiricalMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedFdd {
    pub levels: Vec<FddLevel>,
    pub matched_n: usize,
}

impl InducedFdd {
    pub fn level(&self, k: usize) -> Option<&FddLevel> {
        self.levels.iter().find(|l| l.k == k)
    }
}

/// Builds levels `1..=k_max` on the products of one partition. All levels
/// share the matched window count `L - k_max + 1` so that consistency can
/// be checked on exact counts.
pub fn induced_fdd(
    path: &Path,
    k_max: usize,
    partition: &[f64],
    tail: &TailConfig,
) -> Result<InducedFdd> {
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    if k_max > path.len() {
        return invalid(format!("k_max {k_max} exceeds path length {}", path.len()));
    }
    tail.validate()?;
    let matched_n = path.len() - k_max + 1;
    let mut levels = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let grid = PatternGrid::product(partition, k)?;
        let (per_cell, _) = grid.cell_occurrences(path)?;
        let horizon = path.len() - k + 1;
        let estimates = per_cell
            .into_iter()
            .map(|indices| tail_estimate(&OccurrenceSet::new(indices, horizon)?, tail))
            .collect::<Result<Vec<_>>>()?;
        let matched = empirical_measure(path, &grid, matched_n)?;
        levels.push(FddLevel {
            k,
            grid,
            estimates,
            matched,
        });
    }
    Ok(InducedFdd { levels, matched_n })
}

/// Count-level view of the consistency check between orders `k` and `k+1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyDetail {
    pub k: usize,
    pub n: usize,
    /// `max_c |count_k(c) - sum_j count_{k+1}(c, j)|`.
    pub max_count_gap: usize,
    /// Matched windows of order `k` whose following value misses every
    /// cell of the last coordinate; an upper bound for `max_count_gap`.
    pub trailing_misses: usize,
    pub discrepancy: f64,
}

pub fn consistency_detail(fdd: &InducedFdd, k: usize) -> Result<ConsistencyDetail> {
    let (lower, upper) = match (fdd.level(k), fdd.level(k + 1)) {
        (Some(l), Some(u)) => (l, u),
        _ => return invalid(format!("levels {k} and {} are not both present", k + 1)),
    };
    if upper.grid.prefix(k)? != lower.grid {
        return invalid(format!(
            "grids at levels {k} and {} are incompatible",
            k + 1
        ));
    }
    if lower.matched.n != upper.matched.n {
        return invalid("levels were not computed at a matched window count");
    }
    let last = upper.grid.cells_per_coordinate(k);
    let mut max_gap = 0usize;
    for (cell, &count) in lower.matched.counts.iter().enumerate() {
        let marginal: usize = upper.matched.counts[cell * last..(cell + 1) * last]
            .iter()
            .sum();
        max_gap = max_gap.max(count.abs_diff(marginal));
    }
    let n = lower.matched.n;
    let trailing_misses = upper.matched.misses - lower.matched.misses;
    Ok(ConsistencyDetail {
        k,
        n,
        max_count_gap: max_gap,
        trailing_misses,
        discrepancy: max_gap as f64 / n as f64,
    })
}

/// Largest absolute gap between order-`k` masses and the order-`k+1` masses
/// summed over their last coordinate.
pub fn consistency_check(fdd: &InducedFdd, k: usize) -> Result<f64> {
    consistency_detail(fdd, k).map(|d| d.discrepancy)
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    fn sine400() -> Path {
        Path::new((0..400).map(|n| [0.0, 1.0, 0.0, -1.0][n % 4]).collect()).unwrap()
    }

    #[test]
    fn two_cell_measure() {
        let p = Path::new(vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let g = PatternGrid::new(vec![vec![-0.5, 0.5, 1.5]]).unwrap();
        let m = empirical_measure(&p, &g, 4).unwrap();
        assert_eq!(m.masses, vec![0.5, 0.5]);
        assert_eq!(m.misses, 0);
    }

    #[test]
    fn full_cell_has_unit_mass() {
        let p = Path::new(vec![3.0, -7.0, 0.25]).unwrap();
        let g = PatternGrid::product(&[-INF, INF], 1).unwrap();
        assert_eq!(empirical_measure(&p, &g, 3).unwrap().masses, vec![1.0]);
    }

    #[test]
    fn sine_level_one_masses() {
        let g = PatternGrid::new(vec![vec![-1.5, -0.5, 0.5, 1.5]]).unwrap();
        let m = empirical_measure(&sine400(), &g, 400).unwrap();
        assert_eq!(m.masses, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn window_count_out_of_range() {
        let g = PatternGrid::product(&[-INF, INF], 2).unwrap();
        assert!(empirical_measure(&sine400(), &g, 400).is_err());
        assert!(empirical_measure(&sine400(), &g, 0).is_err());
    }

    #[test]
    fn constant_path_level_one_table() {
        let p = Path::new(vec![2.0; 500]).unwrap();
        let fdd = induced_fdd(&p, 1, &[-INF, 0.0, 1.5, 2.5, INF], &TailConfig::default()).unwrap();
        let values: Vec<f64> = fdd.levels[0].estimates.iter().map(|e| e.value).collect();
        assert_eq!(values, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn sine_transitions_and_zero_discrepancy() {
        let fdd = induced_fdd(
            &sine400(),
            2,
            &[-1.5, -0.5, 0.5, 1.5],
            &TailConfig::default(),
        )
        .unwrap();
        let lvl2 = fdd.level(2).unwrap();
        // realized transitions 0->1, 1->0, 0->-1, -1->0 as (from, to) cells
        let realized = [(1, 2), (2, 1), (1, 0), (0, 1)];
        for cell in 0..9 {
            let coords = lvl2.grid.coords(cell);
            let est = lvl2.estimates[cell].value;
            if realized.contains(&(coords[0], coords[1])) {
                assert!((est - 0.25).abs() < 0.01, "cell {coords:?}: {est}");
            } else {
                assert_eq!(est, 0.0);
            }
        }
        assert_eq!(consistency_check(&fdd, 1).unwrap(), 0.0);
    }

    #[test]
    fn consistency_needs_both_levels() {
        let fdd = induced_fdd(&sine400(), 1, &[-INF, 0.5, INF], &TailConfig::default()).unwrap();
        assert!(consistency_check(&fdd, 1).is_err());
    }

    #[test]
    fn consistency_gap_bounded_by_trailing_misses() {
        // the value 1.0 sits on an edge
        let p = Path::new(vec![0.0, 1.0, 2.0, 0.5, 1.0, 3.0, 0.2]).unwrap();
        let fdd = induced_fdd(&p, 2, &[-INF, 1.0, INF], &TailConfig::default()).unwrap();
        let d = consistency_detail(&fdd, 1).unwrap();
        assert!(d.max_count_gap <= d.trailing_misses);
        assert!(d.max_count_gap > 0);
    }
}
