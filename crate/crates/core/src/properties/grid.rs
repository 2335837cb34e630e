//! Finite families of interval patterns.
//!
//! A [`PatternGrid`] is a product of one-dimensional partitions. Each
//! partition is a strictly increasing list of edges; its cells are the open
//! intervals between consecutive edges. Values equal to an edge, or outside
//! the outermost edges, fall in no cell and are counted as misses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pathcore::{Interval, IntervalPattern, Path};

/// Default number of cells per coordinate for quantile grids.
pub const DEFAULT_GRID_CELLS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternGrid {
    /// One partition per coordinate, in coordinate order.
    #[serde(with = "crate::pathcore::endpoints::nested")]
    edges: Vec<Vec<f64>>,
}

impl PatternGrid {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return invalid("grid needs at least one coordinate");
        }
        for (j, e) in edges.iter().enumerate() {
            validate_edges(e)
                .map_err(|err| crate::Error::InvalidArgument(format!("coordinate {j}: {err}")))?;
        }
        Ok(Self { edges })
    }

    /// The `k`-fold product of a single partition.
    pub fn product(edges: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("grid order k must be at least 1");
        }
        Self::new(vec![edges.to_vec(); k])
    }

    pub fn k(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<f64>] {
        &self.edges
    }

    pub fn cells_per_coordinate(&self, j: usize) -> usize {
        self.edges[j].len() - 1
    }

    pub fn num_cells(&self) -> usize {
        (0..self.k())
            .map(|j| self.cells_per_coordinate(j))
            .product()
    }

    /// Per-coordinate cell positions of a flat cell index (last coordinate
    /// varies fastest).
    pub fn coords(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.k()];
        for j in (0..self.k()).rev() {
            let g = self.cells_per_coordinate(j);
            out[j] = cell % g;
            cell /= g;
        }
        out
    }

    pub fn cell(&self, cell: usize) -> IntervalPattern {
        let intervals = self
            .coords(cell)
            .into_iter()
            .enumerate()
            .map(|(j, c)| {
                Interval::new(self.edges[j][c], self.edges[j][c + 1])
                    .expect("grid edges are strictly increasing")
            })
            .collect();
        IntervalPattern::new(intervals).expect("grid has k >= 1")
    }

    pub fn cells(&self) -> impl Iterator<Item = IntervalPattern> + '_ {
        (0..self.num_cells()).map(move |c| self.cell(c))
    }

    /// The grid on the first `k` coordinates.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k() {
            return invalid(format!("prefix order {k} outside 1..={}", self.k()));
        }
        Ok(Self {
            edges: self.edges[..k].to_vec(),
        })
    }

    /// Cell position of `x` along coordinate `j`, if it is strictly inside
    /// one.
    #[inline]
    pub fn locate(&self, j: usize, x: f64) -> Option<usize> {
        locate_in(&self.edges[j], x)
    }

    /// For each admissible window start `0..=L-k`, the flat cell index the
    /// window falls in, or `None` when some coordinate misses.
    pub fn label_windows(&self, path: &Path) -> Result<Vec<Option<usize>>> {
        let k = self.k();
        if k > path.len() {
            return invalid(format!("grid order {k} exceeds path length {}", path.len()));
        }
        let values = path.values();
        let per_coord: Vec<Vec<Option<usize>>> = (0..k)
            .map(|j| values.iter().map(|&x| self.locate(j, x)).collect())
            .collect();
        let starts = values.len() - k + 1;
        let labels = (0..starts)
            .map(|n| {
                let mut flat = 0usize;
                for (j, bins) in per_coord.iter().enumerate() {
                    flat = flat * self.cells_per_coordinate(j) + bins[n + j]?;
                }
                Some(flat)
            })
            .collect();
        Ok(labels)
    }

    /// Occurrence indices of every cell, plus the number of windows that
    /// fall in no cell.
    pub fn cell_occurrences(&self, path: &Path) -> Result<(Vec<Vec<usize>>, usize)> {
        let labels = self.label_windows(path)?;
        let mut per_cell = vec![Vec::new(); self.num_cells()];
        let mut misses = 0;
        for (n, label) in labels.into_iter().enumerate() {
            match label {
                Some(c) => per_cell[c].push(n),
                None => misses += 1,
            }
        }
        Ok((per_cell, misses))
    }
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return invalid("a partition needs at least two edges");
    }
    if edges.iter().any(|e| e.is_nan()) {
        return invalid("grid edges must not be NaN");
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("grid edges must be strictly increasing");
    }
    if edges[0] == f64::INFINITY || edges[edges.len() - 1] == f64::NEG_INFINITY {
        return invalid("grid edges have an unusable infinite endpoint");
    }
    Ok(())
}

#[inline]
fn locate_in(edges: &[f64], x: f64) -> Option<usize> {
    // number of edges strictly below x
    let below = edges.partition_point(|&e| e < x);
    if below == 0 || below == edges.len() || edges[below] == x {
        return None;
    }
    Some(below - 1)
}

/// Edges `-inf < c_1 < ... < c_{g'-1} < inf` cutting the sample into
/// (up to) `g` cells of roughly equal occupancy.
///
/// Cuts are placed at the midpoint of a gap between adjacent distinct
/// sample values, so no sample value sits on an edge. Values closer than
/// `1e-9 * max(1, max|x|)` are treated as one atom and are never split.
/// Fewer than `g` cells result when the sample has few atoms; a constant
/// sample yields the single cell `(-inf, inf)`.
pub fn quantile_edges(values: &[f64], g: usize) -> Result<Vec<f64>> {
    if g == 0 {
        return invalid("quantile grid needs at least one cell");
    }
    if values.is_empty() {
        return invalid("quantile grid needs a nonempty sample");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let scale = sorted.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let atol = 1e-9 * scale;

    // gaps[i] separates sorted[i] and sorted[i+1]
    let gaps: Vec<usize> = (0..sorted.len() - 1)
        .filter(|&i| sorted[i + 1] - sorted[i] > atol)
        .collect();

    let len = sorted.len();
    let mut cuts: Vec<f64> = Vec::new();
    for q in 1..g {
        // ideal cut sits between rank r-1 and r
        let r = (q * len) / g;
        if r == 0 || r >= len || gaps.is_empty() {
            continue;
        }
        // nearest gap position i (cut between i and i+1) to r-1
        let target = r - 1;
        let pos = gaps.partition_point(|&i| i < target);
        let candidates = [pos.checked_sub(1), Some(pos)];
        let best = candidates
            .into_iter()
            .flatten()
            .filter(|&p| p < gaps.len())
            .min_by_key(|&p| gaps[p].abs_diff(target));
        if let Some(p) = best {
            let i = gaps[p];
            let cut = 0.5 * (sorted[i] + sorted[i + 1]);
            if cuts.last().is_none_or(|&last| cut > last) {
                cuts.push(cut);
            }
        }
    }
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(cuts);
    edges.push(f64::INFINITY);
    Ok(edges)
}

/// A family of one-dimensional partitions; the level-`k` grids are the
/// `k`-fold products of each partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFamily {
    #[serde(with = "crate::pathcore::endpoints::nested")]
    partitions: Vec<Vec<f64>>,
}

impl GridFamily {
    pub fn new(partitions: Vec<Vec<f64>>) -> Result<Self> {
        if partitions.is_empty() {
            return invalid("grid family is empty");
        }
        for p in &partitions {
            validate_edges(p)?;
        }
        Ok(Self { partitions })
    }

    /// Quantile partitions of the path's values, one per requested cell count.
    pub fn quantile(path: &Path, cell_counts: &[usize]) -> Result<Self> {
        let partitions = cell_counts
            .iter()
            .map(|&g| quantile_edges(path.values(), g))
            .collect::<Result<Vec<_>>>()?;
        Self::new(partitions)
    }

    /// The default family: one quantile partition with
    /// [`DEFAULT_GRID_CELLS`] cells.
    pub fn default_for(path: &Path) -> Result<Self> {
        Self::quantile(path, &[DEFAULT_GRID_CELLS])
    }

    pub fn with_partition(mut self, edges: Vec<f64>) -> Result<Self> {
        validate_edges(&edges)?;
        self.partitions.push(edges);
        Ok(self)
    }

    pub fn partitions(&self) -> &[Vec<f64>] {
        &self.partitions
    }

    pub fn grids(&self, k: usize) -> Result<Vec<PatternGrid>> {
        self.partitions
            .iter()
            .map(|p| PatternGrid::product(p, k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn infinite_edges_survive_json() {
        let g = PatternGrid::product(&[-INF, 0.0, INF], 2).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(text, r#"{"edges":[["-inf",0.0,"inf"],["-inf",0.0,"inf"]]}"#);
        assert_eq!(serde_json::from_str::<PatternGrid>(&text).unwrap(), g);
    }

    #[test]
    fn locate_respects_open_cells() {
        let e = [-INF, 0.0, 1.0, INF];
        assert_eq!(locate_in(&e, -5.0), Some(0));
        assert_eq!(locate_in(&e, 0.0), None);
        assert_eq!(locate_in(&e, 0.5), Some(1));
        assert_eq!(locate_in(&e, 1.0), None);
        assert_eq!(locate_in(&e, 2.0), Some(2));
        let bounded = [-1.5, -0.5, 0.5, 1.5];
        assert_eq!(locate_in(&bounded, -2.0), None);
        assert_eq!(locate_in(&bounded, 2.0), None);
        assert_eq!(locate_in(&bounded, 1.0), Some(2));
    }

    #[test]
    fn flat_index_round_trip() {
        let g = PatternGrid::new(vec![vec![-INF, 0.0, INF], vec![-INF, -1.0, 1.0, INF]]).unwrap();
        assert_eq!(g.num_cells(), 6);
        assert_eq!(g.coords(4), vec![1, 1]);
        let cell = g.cell(4);
        assert_eq!(cell.intervals()[0].lo(), 0.0);
        assert_eq!(cell.intervals()[1].hi(), 1.0);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(PatternGrid::new(vec![vec![0.0]]).is_err());
        assert!(PatternGrid::new(vec![vec![1.0, 0.0]]).is_err());
        assert!(PatternGrid::new(vec![]).is_err());
        assert!(PatternGrid::product(&[0.0, 1.0], 0).is_err());
    }

    #[test]
    fn quantile_edges_of_continuous_sample() {
        let v: Vec<f64> = (0..80).map(|i| i as f64).collect();
        let e = quantile_edges(&v, 8).unwrap();
        assert_eq!(e.len(), 9);
        assert_eq!(e[1], 9.5);
        assert_eq!(e[7], 69.5);
    }

    #[test]
    fn quantile_edges_never_split_atoms() {
        let constant = vec![2.0; 100];
        assert_eq!(quantile_edges(&constant, 8).unwrap(), vec![-INF, INF]);

        // period-4 sine values with floating-point dust around zero
        let v: Vec<f64> = (0..400)
            .map(|n| (n as f64 * std::f64::consts::FRAC_PI_2).sin())
            .collect();
        let e = quantile_edges(&v, 8).unwrap();
        assert_eq!(e.len(), 4);
        assert!((e[1] + 0.5).abs() < 1e-12);
        assert!((e[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cell_occurrences_counts_misses() {
        let p = Path::new(vec![0.0, 1.0, 0.5, -1.0]).unwrap();
        let g = PatternGrid::product(&[-INF, 0.0, INF], 1).unwrap();
        let (cells, misses) = g.cell_occurrences(&p).unwrap();
        assert_eq!(cells, vec![vec![3], vec![1, 2]]);
        assert_eq!(misses, 1);
    }
}
