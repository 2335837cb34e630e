//! Asymptotically proportional contractions of the index set.
//!
//! A contraction keeps a union of ordered integer blocks whose lengths grow
//! without bound and whose running coverage tends to a positive constant.
//! A path is (evidently) ergodic when every contraction we try leaves its
//! pattern densities unchanged; the adversarial construction searches for
//! a contraction that concentrates on windows where a pattern is locally
//! over-represented, which succeeds only when the path mixes distinct
//! regimes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pathcore::{
    density_trajectory, estimate_limit_density, occurrence_set, pattern_density, tail_estimate,
    DensityEstimate, IntervalPattern, OccurrenceSet, Path, TailConfig,
};
use crate::properties::{GridFamily, PatternGrid};

pub const DEFAULT_ERGODICITY_TOLERANCE: f64 = 0.05;
pub const DEFAULT_M_SCHEDULE: [usize; 4] = [4, 8, 16, 32];
pub const DEFAULT_FAMILY_DENSITIES: [f64; 3] = [0.2, 0.5, 0.8];
/// Supply retention required of adversarial members of the default family.
pub const FAMILY_SUPPLY_RETENTION: f64 = 0.5;

/// Inclusive block `[start, end]`.
pub type Block = [usize; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contraction {
    blocks: Vec<Block>,
    target_density: f64,
}

impl Contraction {
    /// Blocks need `start <= end`; ordering is left to
    /// [`validate_contraction`].
    pub fn new(blocks: Vec<Block>, target_density: f64) -> Result<Self> {
        if !(target_density > 0.0 && target_density <= 1.0) {
            return invalid(format!(
                "target density must lie in (0, 1], got {target_density}"
            ));
        }
        if let Some(b) = blocks.iter().find(|b| b[0] > b[1]) {
            return invalid(format!("block [{}, {}] is reversed", b[0], b[1]));
        }
        Ok(Self {
            blocks,
            target_density,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn target_density(&self) -> f64 {
        self.target_density
    }

    pub fn num_indices(&self) -> usize {
        self.blocks.iter().map(|b| b[1] - b[0] + 1).sum()
    }

    /// The kept indices below `horizon`, sorted and deduplicated.
    pub fn index_set(&self, horizon: usize) -> OccurrenceSet {
        let mut idx: Vec<usize> = self
            .blocks
            .iter()
            .flat_map(|b| b[0]..=b[1])
            .filter(|&i| i < horizon)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        OccurrenceSet::new(idx, horizon).expect("sorted, deduplicated and bounded")
    }
}

/// Blocks of length `round(m c / (1 - c))` alternating with gaps of length
/// `m`, `m = 1, 2, ...`; `phase = 1` starts with the gap. A block that would
/// cross the horizon is dropped. `target_c = 1` gives the single block
/// `[0, horizon - 1]`.
pub fn build_alternating_contraction(
    target_c: f64,
    horizon: usize,
    phase: usize,
) -> Result<Contraction> {
    if !(target_c > 0.0 && target_c <= 1.0) {
        return invalid(format!("target density must lie in (0, 1], got {target_c}"));
    }
    if horizon < 10 {
        return invalid(format!("horizon {horizon} is too short (need at least 10)"));
    }
    if phase > 1 {
        return invalid(format!("phase must be 0 or 1, got {phase}"));
    }
    if target_c == 1.0 {
        return Contraction::new(vec![[0, horizon - 1]], 1.0);
    }
    let ratio = target_c / (1.0 - target_c);
    let mut blocks = Vec::new();
    let mut pos = 0usize;
    let mut m = 1usize;
    'outer: while pos < horizon {
        let block_len = (m as f64 * ratio).round() as usize;
        let parts = if phase == 0 {
            [(true, block_len), (false, m)]
        } else {
            [(false, m), (true, block_len)]
        };
        for (keep, len) in parts {
            if keep && len > 0 {
                if pos + len > horizon {
                    break 'outer;
                }
                blocks.push([pos, pos + len - 1]);
            }
            pos += len;
        }
        m += 1;
    }
    if blocks.is_empty() {
        return invalid(format!(
            "density {target_c} is infeasible at horizon {horizon}"
        ));
    }
    Contraction::new(blocks, target_c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub tail: TailConfig,
    /// Leading share of blocks exempt from the nondecreasing-length check.
    pub burn_in_fraction: f64,
    /// The last block must be at least this many times the first.
    pub growth_factor: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            tail: TailConfig::default(),
            burn_in_fraction: 0.1,
            growth_factor: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionValidation {
    pub ordering: bool,
    pub growth: bool,
    pub coverage: bool,
    pub coverage_estimate: Option<DensityEstimate>,
}

impl ContractionValidation {
    pub fn passes(&self) -> bool {
        self.ordering && self.growth && self.coverage
    }
}

pub fn validate_contraction(
    g: &Contraction,
    horizon: usize,
    cfg: &ValidationConfig,
) -> ContractionValidation {
    let blocks = g.blocks();
    let ordering = !blocks.is_empty()
        && blocks.windows(2).all(|w| w[1][0] > w[0][1])
        && blocks.last().is_some_and(|b| b[1] < horizon);

    let lengths: Vec<usize> = blocks.iter().map(|b| b[1] - b[0] + 1).collect();
    let growth = match lengths.as_slice() {
        [] => false,
        // one block running to the horizon is as long as it can be
        [_] => blocks[0][1] + 1 == horizon,
        [first, .., last] => {
            let burn = (cfg.burn_in_fraction * lengths.len() as f64).floor() as usize;
            lengths[burn..].windows(2).all(|w| w[1] >= w[0])
                && *last as f64 >= cfg.growth_factor * *first as f64
        }
    };

    let coverage_estimate = if horizon > 0 {
        let occ = g.index_set(horizon);
        density_trajectory(&occ, horizon)
            .and_then(|t| estimate_limit_density(&t, cfg.tail.tail_fraction, cfg.tail.tolerance))
            .ok()
    } else {
        None
    };
    let coverage = coverage_estimate
        .is_some_and(|e| e.converged && (e.value - g.target_density()).abs() <= cfg.tail.tolerance);

    ContractionValidation {
        ordering,
        growth,
        coverage,
        coverage_estimate,
    }
}

/// The subsequence of values at the kept indices, block by block.
pub fn contract_path(path: &Path, g: &Contraction) -> Result<Path> {
    let values = path.values();
    let mut out = Vec::with_capacity(g.num_indices());
    for b in g.blocks() {
        if b[1] >= values.len() {
            return invalid(format!(
                "block [{}, {}] exceeds path length {}",
                b[0],
                b[1],
                values.len()
            ));
        }
        out.extend_from_slice(&values[b[0]..=b[1]]);
    }
    Path::new(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErgodicityStatus {
    ConsistentWithErgodic,
    NonErgodicEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offending {
    /// Position of the contraction in the family.
    pub contraction: usize,
    pub pattern: IntervalPattern,
    pub original_density: f64,
    pub contracted_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityVerdict {
    pub worst_discrepancy: f64,
    pub offending: Option<Offending>,
    pub verdict: ErgodicityStatus,
    pub contractions_evaluated: usize,
}

fn cell_estimates(path: &Path, grid: &PatternGrid, tail: &TailConfig) -> Result<Vec<f64>> {
    let (per_cell, _) = grid.cell_occurrences(path)?;
    let horizon = path.len() - grid.k() + 1;
    per_cell
        .into_iter()
        .map(|indices| Ok(tail_estimate(&OccurrenceSet::new(indices, horizon)?, tail)?.value))
        .collect()
}

/// Compares every grid cell's density on each contracted path with its
/// density on the path itself; the largest gap decides.
pub fn ergodicity_diagnostic(
    path: &Path,
    family: &[Contraction],
    grids: &GridFamily,
    k_max: usize,
    tolerance: f64,
    tail: &TailConfig,
) -> Result<ErgodicityVerdict> {
    if k_max == 0 {
        return invalid("k_max must be at least 1");
    }
    if !(tolerance > 0.0) {
        return invalid(format!("tolerance must be positive, got {tolerance}"));
    }
    tail.validate()?;
    let mut levels = Vec::new();
    for k in 1..=k_max.min(path.len()) {
        for grid in grids.grids(k)? {
            let base = cell_estimates(path, &grid, tail)?;
            levels.push((grid, base));
        }
    }

    let per_contraction: Vec<Option<(f64, Offending)>> = family
        .par_iter()
        .enumerate()
        .map(|(ci, g)| -> Result<Option<(f64, Offending)>> {
            let contracted = contract_path(path, g)?;
            let mut worst: Option<(f64, Offending)> = None;
            for (grid, base) in &levels {
                if grid.k() > contracted.len() {
                    continue;
                }
                let est = cell_estimates(&contracted, grid, tail)?;
                for (cell, (&a, &b)) in base.iter().zip(&est).enumerate() {
                    let gap = (a - b).abs();
                    if worst.as_ref().is_none_or(|(w, _)| gap > *w) {
                        worst = Some((
                            gap,
                            Offending {
                                contraction: ci,
                                pattern: grid.cell(cell),
                                original_density: a,
                                contracted_density: b,
                            },
                        ));
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;

    let mut worst_discrepancy = 0.0;
    let mut offending = None;
    for (gap, off) in per_contraction.into_iter().flatten() {
        if offending.is_none() || gap > worst_discrepancy {
            worst_discrepancy = gap;
            offending = Some(off);
        }
    }
    let verdict = if worst_discrepancy > tolerance {
        ErgodicityStatus::NonErgodicEvidence
    } else {
        ErgodicityStatus::ConsistentWithErgodic
    };
    Ok(ErgodicityVerdict {
        worst_discrepancy,
        offending,
        verdict,
        contractions_evaluated: family.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    /// `epsilon_m = epsilon_1 / m` bounds the coverage error at each join.
    pub epsilon_1: f64,
    /// Density `d` every `H(m)` is thinned to. Defaults to
    /// `supply_fraction` times the smallest block supply over the schedule.
    pub target_density: Option<f64>,
    pub supply_fraction: f64,
    /// The construction fails when some `m` cannot supply blocks of at
    /// least this density.
    pub min_supply: f64,
    /// The supply at the largest `m` must keep at least this share of the
    /// supply at the smallest. Local over-representation that fades as the
    /// window grows is a fluctuation, not a regime.
    pub min_supply_retention: f64,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self {
            epsilon_1: 0.1,
            target_density: None,
            supply_fraction: 0.9,
            min_supply: 0.02,
            min_supply_retention: 0.0,
        }
    }
}

/// Midpoint between `p_hat` and 1, at most `p_hat + 0.25`.
pub fn default_threshold(p_hat: f64) -> f64 {
    (0.5 * (p_hat + 1.0)).min(p_hat + 0.25)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialStep {
    pub m: usize,
    /// Starts of length-`m` windows whose local pattern frequency reaches
    /// the threshold.
    pub v0: Vec<usize>,
    /// Every `m`-th element of `v0`.
    pub v1: Vec<usize>,
    /// `v1` thinned to density `d / m`.
    pub v2: Vec<usize>,
    /// `[j, j + m - 1]` for `j` in `v2`.
    pub h_blocks: Vec<Block>,
    /// Join point after which the next `m` takes over, if one was needed.
    pub n_marker: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialTrace {
    pub m_schedule: Vec<usize>,
    pub threshold: f64,
    pub target_density: f64,
    pub steps: Vec<AdversarialStep>,
    pub n_markers: Vec<usize>,
    pub result: Contraction,
    pub global_density: f64,
    /// Pattern density on the contracted path.
    pub contracted_density: f64,
}

/// Builds a contraction concentrated on windows where `pattern` occurs with
/// local frequency at least `threshold`, joining the block sets `H(m)` of
/// successive `m` at points where their running coverage is within
/// `epsilon_m / 3` of the common density.
pub fn adversarial_contraction(
    path: &Path,
    pattern: &IntervalPattern,
    m_schedule: &[usize],
    threshold: f64,
    cfg: &AdversarialConfig,
    tail: &TailConfig,
) -> Result<AdversarialTrace> {
    if m_schedule.is_empty() {
        return invalid("m schedule is empty");
    }
    if m_schedule[0] == 0 || m_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("m schedule must be positive and strictly increasing");
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return invalid(format!("threshold must lie in (0, 1], got {threshold}"));
    }
    if !(cfg.epsilon_1 > 0.0) {
        return invalid("epsilon_1 must be positive");
    }
    let (occ, _, global) = pattern_density(path, pattern, tail)?;
    let horizon = occ.source_horizon();
    if *m_schedule.last().unwrap() > horizon {
        return invalid(format!(
            "largest m exceeds the {horizon} admissible pattern starts"
        ));
    }
    let mut prefix = Vec::with_capacity(horizon + 1);
    prefix.push(0usize);
    for f in occ.indicator() {
        prefix.push(prefix.last().unwrap() + usize::from(f));
    }

    // V0, V1 and the block supply m |V1| / horizon for every m
    let mut steps = Vec::with_capacity(m_schedule.len());
    let mut last_feasible = None;
    let mut min_supply = f64::INFINITY;
    let mut supplies = Vec::with_capacity(m_schedule.len());
    for &m in m_schedule {
        let needed = threshold * m as f64;
        let v0: Vec<usize> = (0..=horizon - m)
            .filter(|&j| (prefix[j + m] - prefix[j]) as f64 >= needed)
            .collect();
        if v0.is_empty() {
            return Err(Error::ConstructionFailed {
                failed_m: m,
                last_feasible_m: last_feasible,
                reason: format!("no window of length {m} reaches local density {threshold}"),
            });
        }
        let v1: Vec<usize> = v0.iter().copied().step_by(m).collect();
        let supply = (m * v1.len()) as f64 / horizon as f64;
        if supply < cfg.min_supply {
            return Err(Error::ConstructionFailed {
                failed_m: m,
                last_feasible_m: last_feasible,
                reason: format!(
                    "blocks of length {m} cover only {supply:.4} of the horizon (floor {})",
                    cfg.min_supply
                ),
            });
        }
        min_supply = min_supply.min(supply);
        supplies.push(supply);
        last_feasible = Some(m);
        steps.push(AdversarialStep {
            m,
            v0,
            v1,
            v2: Vec::new(),
            h_blocks: Vec::new(),
            n_marker: None,
        });
    }

    let (first, last) = (supplies[0], *supplies.last().unwrap());
    if last < cfg.min_supply_retention * first {
        return Err(Error::ConstructionFailed {
            failed_m: *m_schedule.last().unwrap(),
            last_feasible_m: m_schedule.len().checked_sub(2).map(|i| m_schedule[i]),
            reason: format!("block supply fades from {first:.4} to {last:.4} as m grows"),
        });
    }

    let d = match cfg.target_density {
        Some(d) if d > 0.0 && d <= 1.0 => d,
        Some(d) => return invalid(format!("target density must lie in (0, 1], got {d}")),
        None => cfg.supply_fraction * min_supply,
    };

    // V2: earliest-first, take a block while the running coverage is below d
    for step in &mut steps {
        let m = step.m;
        let mut covered = 0usize;
        for &j in &step.v1 {
            if (covered as f64) < d * (j + m) as f64 {
                step.v2.push(j);
                step.h_blocks.push([j, j + m - 1]);
                covered += m;
            }
        }
    }

    // inductive join G(m') = (G(m) ∩ [0, N(m)]) ∪ {whole H(m') blocks after N(m)}
    let mut g: Vec<Block> = steps[0].h_blocks.clone();
    let mut n_prev: Option<usize> = None;
    let mut n_markers = Vec::new();
    for idx in 0..steps.len() - 1 {
        let m = steps[idx].m;
        let eps = cfg.epsilon_1 / m as f64;
        let mut covered = 0usize;
        let mut marker = None;
        for b in &g {
            covered += b[1] - b[0] + 1;
            if n_prev.is_some_and(|n| b[1] <= n) {
                continue;
            }
            let coverage = covered as f64 / (b[1] + 1) as f64;
            if (coverage - d).abs() <= eps / 3.0 {
                marker = Some(b[1]);
                break;
            }
        }
        let Some(n_m) = marker else {
            return Err(Error::ConstructionFailed {
                failed_m: steps[idx + 1].m,
                last_feasible_m: Some(m),
                reason: format!(
                    "coverage of the length-{m} blocks never settles within {:.5} of {d:.5}",
                    eps / 3.0
                ),
            });
        };
        steps[idx].n_marker = Some(n_m);
        n_markers.push(n_m);
        g.retain(|b| b[1] <= n_m);
        g.extend(
            steps[idx + 1]
                .h_blocks
                .iter()
                .filter(|b| b[0] > n_m)
                .copied(),
        );
        n_prev = Some(n_m);
    }

    let result = Contraction::new(g, d)?;
    let contracted = contract_path(path, &result)?;
    let contracted_density = if contracted.len() >= pattern.k() {
        pattern_density(&contracted, pattern, tail)?.2.value
    } else {
        0.0
    };
    Ok(AdversarialTrace {
        m_schedule: m_schedule.to_vec(),
        threshold,
        target_density: d,
        steps,
        n_markers,
        result,
        global_density: global.value,
        contracted_density,
    })
}

/// Alternating contractions at each density and phase, plus one adversarial
/// contraction per level-1 cell (of every partition in `grids`) whose
/// density lies in `(0.05, 0.95)`. Cells where the adversarial construction
/// fails, or where its block supply fades with `m`, contribute nothing.
pub fn default_contraction_family(
    path: &Path,
    grids: &GridFamily,
    tail: &TailConfig,
) -> Result<Vec<Contraction>> {
    let horizon = path.len();
    let mut family = Vec::new();
    if horizon >= 10 {
        for c in DEFAULT_FAMILY_DENSITIES {
            for phase in [0, 1] {
                family.push(build_alternating_contraction(c, horizon, phase)?);
            }
        }
    }
    let schedule: Vec<usize> = DEFAULT_M_SCHEDULE
        .iter()
        .copied()
        .filter(|&m| m <= horizon)
        .collect();
    if schedule.is_empty() {
        return Ok(family);
    }
    for grid in grids.grids(1)? {
        for pattern in grid.cells() {
            let occ = occurrence_set(path, &pattern)?;
            let traj = density_trajectory(&occ, occ.source_horizon())?;
            let p_hat = estimate_limit_density(&traj, tail.tail_fraction, tail.tolerance)?.value;
            if !(p_hat > 0.05 && p_hat < 0.95) {
                continue;
            }
            match adversarial_contraction(
                path,
                &pattern,
                &schedule,
                default_threshold(p_hat),
                &AdversarialConfig {
                    min_supply_retention: FAMILY_SUPPLY_RETENTION,
                    ..AdversarialConfig::default()
                },
                tail,
            ) {
                Ok(trace) => family.push(trace.result),
                Err(Error::ConstructionFailed { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(family)
}
