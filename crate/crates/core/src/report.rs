//! The full diagnostic suite on one path and its machine-readable report.

use serde::{Deserialize, Serialize};

use crate::contraction::{
    default_contraction_family, ergodicity_diagnostic, ErgodicityStatus, ErgodicityVerdict,
    DEFAULT_ERGODICITY_TOLERANCE,
};
use crate::error::{invalid, Result};
use crate::generators::RNG_VERSION;
use crate::pathcore::{density_trajectory, IntervalPattern, OccurrenceSet, Path};
use crate::properties::{
    check_property_e, check_property_t, consistency_detail, induced_fdd, scan_property_e,
    ConsistencyDetail, GridFamily, PropertyConfig, PropertyEStatus, DEFAULT_GRID_CELLS,
    DEFAULT_K_LEVELS,
};

pub const DEFAULT_K_MAX: usize = 2;
/// Extra quantile partitions used only by the ergodicity diagnostic. A
/// coarse split keeps whole regimes of a mixture inside one cell.
pub const DEFAULT_ERGODICITY_PARTITIONS: [usize; 1] = [2];
/// Trajectory CSVs keep at most this many rows.
pub const TRAJECTORY_ROWS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub grid_cells: usize,
    pub k_max: usize,
    pub property: PropertyConfig,
    pub k_levels: Vec<f64>,
    pub ergodicity_tolerance: f64,
    #[serde(default = "default_ergodicity_partitions")]
    pub ergodicity_partitions: Vec<usize>,
    /// Patterns checked for Property E on top of the grid cells.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probe_cells: Vec<IntervalPattern>,
}

fn default_ergodicity_partitions() -> Vec<usize> {
    DEFAULT_ERGODICITY_PARTITIONS.to_vec()
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid_cells: DEFAULT_GRID_CELLS,
            k_max: DEFAULT_K_MAX,
            property: PropertyConfig::default(),
            k_levels: DEFAULT_K_LEVELS.to_vec(),
            ergodicity_tolerance: DEFAULT_ERGODICITY_TOLERANCE,
            ergodicity_partitions: default_ergodicity_partitions(),
            probe_cells: Vec::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_cells == 0 {
            return invalid("grid_cells must be at least 1");
        }
        if self.ergodicity_partitions.contains(&0) {
            return invalid("ergodicity partitions need at least 1 cell");
        }
        if self.k_max == 0 {
            return invalid("k_max must be at least 1");
        }
        if !(self.ergodicity_tolerance > 0.0) {
            return invalid("ergodicity tolerance must be positive");
        }
        self.property.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub k: usize,
    /// Cell index within the level-`k` grid; `None` for probe cells.
    pub cell: Option<usize>,
    pub pattern: IntervalPattern,
    pub status: PropertyEStatus,
    pub value: f64,
    pub oscillation: f64,
    pub final_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyESection {
    pub verdicts: Vec<VerdictRow>,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyTSection {
    pub levels: Vec<f64>,
    pub fractions: Vec<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencySection {
    pub matched_n: usize,
    pub levels: Vec<ConsistencyDetail>,
    /// Every count gap is explained by windows whose next value misses the
    /// partition.
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgodicitySection {
    #[serde(flatten)]
    pub verdict: ErgodicityVerdict,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub rng_version: String,
    pub input: String,
    pub seed: Option<u64>,
    pub horizon: usize,
    pub config: AnalysisConfig,
    #[serde(with = "crate::pathcore::endpoints")]
    pub partition: Vec<f64>,
    #[serde(rename = "propertyE")]
    pub property_e: PropertyESection,
    #[serde(rename = "propertyT")]
    pub property_t: PropertyTSection,
    pub consistency: ConsistencySection,
    pub ergodicity: ErgodicitySection,
    pub pass: bool,
}

/// Runs Property E over the quantile grid cells up to `k_max`, Property T,
/// the marginal consistency of the induced distributions and the
/// ergodicity diagnostic over the default contraction family.
pub fn analyze(
    path: &Path,
    input: &str,
    seed: Option<u64>,
    cfg: &AnalysisConfig,
) -> Result<AnalysisReport> {
    cfg.validate()?;
    let grids = GridFamily::quantile(path, &[cfg.grid_cells])?;
    let partition = grids.partitions()[0].clone();
    let k_max = cfg.k_max.min(path.len());

    let verdicts = scan_property_e(path, k_max, &grids, &cfg.property)?;
    let mut rows = Vec::with_capacity(verdicts.len());
    let mut cell = 0;
    let mut last_k = 0;
    for v in verdicts {
        if v.k != last_k {
            cell = 0;
            last_k = v.k;
        }
        rows.push(VerdictRow {
            k: v.k,
            cell: Some(cell),
            status: v.status,
            value: v.estimate.value,
            oscillation: v.estimate.oscillation,
            final_count: v.final_count,
            pattern: v.pattern,
        });
        cell += 1;
    }
    for pattern in &cfg.probe_cells {
        if pattern.k() > path.len() {
            return invalid(format!(
                "probe cell of order {} is longer than the path",
                pattern.k()
            ));
        }
        let v = check_property_e(path, pattern, &cfg.property)?;
        rows.push(VerdictRow {
            k: v.k,
            cell: None,
            status: v.status,
            value: v.estimate.value,
            oscillation: v.estimate.oscillation,
            final_count: v.final_count,
            pattern: v.pattern,
        });
    }
    let violations = rows
        .iter()
        .filter(|r| r.status == PropertyEStatus::Violation)
        .count();
    let property_e = PropertyESection {
        verdicts: rows,
        violations,
        pass: violations == 0,
    };

    let t = check_property_t(path, &cfg.k_levels, &cfg.property)?;
    let property_t = PropertyTSection {
        levels: t.levels,
        fractions: t.fractions,
        pass: t.verdict,
    };

    let fdd = induced_fdd(path, k_max, &partition, &cfg.property.tail)?;
    let levels = (1..k_max)
        .map(|k| consistency_detail(&fdd, k))
        .collect::<Result<Vec<_>>>()?;
    let consistency = ConsistencySection {
        matched_n: fdd.matched_n,
        pass: levels.iter().all(|d| d.max_count_gap <= d.trailing_misses),
        levels,
    };

    let mut cells = vec![cfg.grid_cells];
    cells.extend(&cfg.ergodicity_partitions);
    let erg_grids = GridFamily::quantile(path, &cells)?;
    let family = default_contraction_family(path, &erg_grids, &cfg.property.tail)?;
    let verdict = ergodicity_diagnostic(
        path,
        &family,
        &erg_grids,
        k_max,
        cfg.ergodicity_tolerance,
        &cfg.property.tail,
    )?;
    let ergodicity = ErgodicitySection {
        pass: verdict.verdict == ErgodicityStatus::ConsistentWithErgodic,
        tolerance: cfg.ergodicity_tolerance,
        verdict,
    };

    let pass = property_e.pass && property_t.pass && consistency.pass && ergodicity.pass;
    Ok(AnalysisReport {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_version: RNG_VERSION.to_string(),
        input: input.to_string(),
        seed,
        horizon: path.len(),
        config: cfg.clone(),
        partition,
        property_e,
        property_t,
        consistency,
        ergodicity,
        pass,
    })
}

/// Whether the path passes every diagnostic at `cfg`.
pub fn suite_passes(path: &Path, cfg: &AnalysisConfig) -> Result<bool> {
    Ok(analyze(path, "", None, cfg)?.pass)
}

/// Density trajectories of the level-1 cells and of `{|x| < K}` for each
/// tightness level, sampled at no more than [`TRAJECTORY_ROWS`] values of
/// `n` (always including the horizon).
pub fn write_trajectories_csv<W: std::io::Write>(
    path: &Path,
    report: &AnalysisReport,
    mut out: W,
) -> Result<()> {
    let horizon = path.len();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    let grid = crate::properties::PatternGrid::product(&report.partition, 1)?;
    let (per_cell, _) = grid.cell_occurrences(path)?;
    for (c, indices) in per_cell.into_iter().enumerate() {
        let traj = density_trajectory(&OccurrenceSet::new(indices, horizon)?, horizon)?;
        columns.push((format!("cell{c}"), traj.ratios().to_vec()));
    }
    for &k in &report.property_t.levels {
        let flags: Vec<bool> = path.values().iter().map(|x| x.abs() < k).collect();
        let traj = density_trajectory(&OccurrenceSet::from_indicator(&flags), horizon)?;
        columns.push((format!("abs_lt_{k}"), traj.ratios().to_vec()));
    }
    write!(out, "n")?;
    for (name, _) in &columns {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    let step = horizon.div_ceil(TRAJECTORY_ROWS).max(1);
    let mut ns: Vec<usize> = (1..=horizon).step_by(step).collect();
    if ns.last() != Some(&horizon) {
        ns.push(horizon);
    }
    for n in ns {
        write!(out, "{n}")?;
        for (_, r) in &columns {
            write!(out, ",{}", r[n - 1])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
