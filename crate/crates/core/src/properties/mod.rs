//! Finite-sample verdicts for Property E (every occurrence set is empty or
//! has positive density) and Property T (tightness), plus the empirical
//! measures and deviation densities built on the same counting machinery.

mod grid;
mod measure;

pub use grid::{quantile_edges, GridFamily, PatternGrid, DEFAULT_GRID_CELLS};
pub use measure::{
    consistency_check, consistency_detail, empirical_measure, induced_fdd, ConsistencyDetail,
    EmpiricalMeasure, FddLevel, InducedFdd,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pathcore::{
    density_trajectory, estimate_limit_density, occurrence_set, pattern_density, tail_estimate,
    DensityEstimate, Interval, IntervalPattern, OccurrenceSet, Path, TailConfig,
};

/// Default `K` ladder for the tightness profile.
pub const DEFAULT_K_LEVELS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyConfig {
    pub tail: TailConfig,
    /// A converged density at or above `positive_floor_count / horizon`
    /// counts as positive.
    pub positive_floor_count: f64,
    /// The decay test needs `d(horizon) < violation_floor_count / horizon`.
    pub violation_floor_count: f64,
    /// Property T passes when the largest-`K` fraction is at least
    /// `1 - t_slack`.
    pub t_slack: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        Self {
            tail: TailConfig::default(),
            positive_floor_count: 10.0,
            violation_floor_count: 5.0,
            t_slack: 0.01,
        }
    }
}

impl PropertyConfig {
    pub fn validate(&self) -> Result<()> {
        self.tail.validate()?;
        if !(self.positive_floor_count > 0.0 && self.violation_floor_count > 0.0) {
            return invalid("density floors must be positive");
        }
        if !(self.t_slack > 0.0 && self.t_slack < 1.0) {
            return invalid(format!("t_slack must lie in (0, 1), got {}", self.t_slack));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropertyEStatus {
    Empty,
    PositiveDensity,
    Violation,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyEVerdict {
    pub k: usize,
    pub pattern: IntervalPattern,
    pub status: PropertyEStatus,
    pub estimate: DensityEstimate,
    pub final_count: usize,
    pub horizon: usize,
    /// `d(horizon)`.
    pub final_ratio: f64,
}

fn verdict_from_occurrences(
    pattern: IntervalPattern,
    occ: &OccurrenceSet,
    cfg: &PropertyConfig,
) -> Result<PropertyEVerdict> {
    let estimate = tail_estimate(occ, &cfg.tail)?;
    let horizon = occ.source_horizon();
    let h = horizon as f64;
    let final_count = occ.len();
    let final_ratio = final_count as f64 / h;
    let status = if final_count == 0 {
        PropertyEStatus::Empty
    } else if final_ratio < cfg.violation_floor_count / h && tail_non_increasing(occ, cfg)? {
        PropertyEStatus::Violation
    } else if estimate.converged && estimate.value >= cfg.positive_floor_count / h {
        PropertyEStatus::PositiveDensity
    } else {
        PropertyEStatus::Inconclusive
    };
    Ok(PropertyEVerdict {
        k: pattern.k(),
        pattern,
        status,
        estimate,
        final_count,
        horizon,
        final_ratio,
    })
}

fn tail_non_increasing(occ: &OccurrenceSet, cfg: &PropertyConfig) -> Result<bool> {
    let traj = density_trajectory(occ, occ.source_horizon())?;
    let range = traj.tail_range(cfg.tail.tail_fraction);
    Ok(traj.ratios()[range.start() - 1..*range.end()]
        .windows(2)
        .all(|w| w[1] <= w[0]))
}

pub fn check_property_e(
    path: &Path,
    pattern: &IntervalPattern,
    cfg: &PropertyConfig,
) -> Result<PropertyEVerdict> {
    cfg.validate()?;
    let occ = occurrence_set(path, pattern)?;
    verdict_from_occurrences(pattern.clone(), &occ, cfg)
}

/// One verdict per cell of every level-`k` grid in the family, `k = 1..=k_max`,
/// in family order and then cell order.
pub fn scan_property_e(
    path: &Path,
    k_max: usize,
    family: &GridFamily,
    cfg: &PropertyConfig,
) -> Result<Vec<PropertyEVerdict>> {
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    cfg.validate()?;
    let mut out = Vec::new();
    for k in 1..=k_max.min(path.len()) {
        for grid in family.grids(k)? {
            let (per_cell, _) = grid.cell_occurrences(path)?;
            let horizon = path.len() - k + 1;
            let verdicts = per_cell
                .into_par_iter()
                .enumerate()
                .map(|(cell, indices)| {
                    let occ = OccurrenceSet::new(indices, horizon)?;
                    verdict_from_occurrences(grid.cell(cell), &occ, cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            out.extend(verdicts);
        }
    }
    Ok(out)
}

/// A scan passes when no cell shows a violation.
pub fn scan_passes(verdicts: &[PropertyEVerdict]) -> bool {
    verdicts
        .iter()
        .all(|v| v.status != PropertyEStatus::Violation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessProfile {
    pub levels: Vec<f64>,
    pub fractions: Vec<f64>,
    pub verdict: bool,
}

/// Tail-window density of `{i : |x_i| < K}` for each `K`.
pub fn check_property_t(
    path: &Path,
    k_levels: &[f64],
    cfg: &PropertyConfig,
) -> Result<TightnessProfile> {
    cfg.validate()?;
    if k_levels.is_empty() {
        return invalid("at least one K level is required");
    }
    if k_levels.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return invalid("K levels must be positive and finite");
    }
    if k_levels.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("K levels must be strictly increasing");
    }
    let fractions = k_levels
        .iter()
        .map(|&k| {
            let pattern = IntervalPattern::single(Interval::symmetric(k)?);
            let (_, _, est) = pattern_density(path, &pattern, &cfg.tail)?;
            Ok(est.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let top = *fractions.last().expect("nonempty");
    Ok(TightnessProfile {
        levels: k_levels.to_vec(),
        fractions,
        verdict: top >= 1.0 - cfg.t_slack,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    /// Local averaging window length.
    pub window: usize,
    pub epsilon: f64,
    /// The limit-density estimate local averages are compared with.
    pub p_hat: f64,
    pub deviation_density: f64,
}

/// Density of the starts `n` whose local occurrence frequency over
/// `[n, n+N-1]` differs from the global estimate by more than `epsilon`.
pub fn local_density_deviation(
    path: &Path,
    pattern: &IntervalPattern,
    window: usize,
    epsilon: f64,
    tail: &TailConfig,
) -> Result<DeviationReport> {
    if window == 0 {
        return invalid("averaging window must be at least 1");
    }
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let (occ, _, est) = pattern_density(path, pattern, tail)?;
    let horizon = occ.source_horizon();
    if window > horizon {
        return invalid(format!(
            "averaging window {window} exceeds the {horizon} admissible starts"
        ));
    }
    let p_hat = est.value;
    let flags = occ.indicator();
    let mut prefix = Vec::with_capacity(horizon + 1);
    prefix.push(0usize);
    for &f in &flags {
        prefix.push(prefix.last().unwrap() + usize::from(f));
    }
    let deviating: Vec<bool> = (0..=horizon - window)
        .map(|n| {
            let local = (prefix[n + window] - prefix[n]) as f64 / window as f64;
            (local - p_hat).abs() > epsilon
        })
        .collect();
    let dev = OccurrenceSet::from_indicator(&deviating);
    let traj = density_trajectory(&dev, dev.source_horizon())?;
    let dev_est = estimate_limit_density(&traj, tail.tail_fraction, tail.tolerance)?;
    Ok(DeviationReport {
        window,
        epsilon,
        p_hat,
        deviation_density: dev_est.value,
    })
}
