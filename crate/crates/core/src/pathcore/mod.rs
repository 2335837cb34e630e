//! Paths, open-interval patterns, occurrence sets and their counting
//! functions.
//!
//! Everything here works at a finite horizon. A path of length `L` admits
//! pattern starts `0..=L-k` for a pattern of order `k`; limits of running
//! ratios are replaced by tail-window statistics (see
//! [`estimate_limit_density`]).

mod io;

pub use io::{parse_path, read_path_file, write_path};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tail window used when a running ratio stands in for its limit.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
/// Maximum oscillation of the tail window for a ratio to count as converged.
pub const DEFAULT_TOLERANCE: f64 = 0.02;

/// A finite real-valued sequence `x_0, ..., x_{L-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Path {
    values: Vec<f64>,
}

impl Path {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("path must contain at least one value");
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("path value at index {pos} is not finite"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The horizon `L`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for Path {
    type Error = crate::Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Path::new(values)
    }
}

impl From<Path> for Vec<f64> {
    fn from(path: Path) -> Self {
        path.values
    }
}

/// An open interval `(lo, hi)` with `lo` possibly `-inf` and `hi` possibly
/// `+inf`. Endpoints never match.
///
/// Serialized as a two-element array; infinite endpoints are written as the
/// strings `"-inf"` and `"inf"` since JSON has no infinities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return invalid("interval endpoints must not be NaN");
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return invalid(format!(
                "interval ({lo}, {hi}) has an unusable infinite endpoint"
            ));
        }
        if lo >= hi {
            return invalid(format!("interval ({lo}, {hi}) is empty"));
        }
        Ok(Self { lo, hi })
    }

    /// `(-inf, +inf)`.
    pub fn full() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// `(-k, k)`, the tightness window.
    pub fn symmetric(k: f64) -> Result<Self> {
        Self::new(-k, k)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Endpoint {
    Num(f64),
    Text(String),
}

impl From<f64> for Endpoint {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Endpoint::Num(v)
        } else if v > 0.0 {
            Endpoint::Text("inf".into())
        } else {
            Endpoint::Text("-inf".into())
        }
    }
}

impl TryFrom<Endpoint> for f64 {
    type Error = String;

    fn try_from(e: Endpoint) -> std::result::Result<f64, String> {
        match e {
            Endpoint::Num(v) => Ok(v),
            Endpoint::Text(t) => match t.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(format!("unrecognised endpoint {other:?}")),
            },
        }
    }
}

/// Serde helpers writing infinite edges as `"-inf"` / `"inf"`, which JSON
/// numbers cannot express.
pub mod endpoints {
    use super::Endpoint;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    fn decode<E: serde::de::Error>(v: Vec<Endpoint>) -> Result<Vec<f64>, E> {
        v.into_iter()
            .map(|e| f64::try_from(e).map_err(E::custom))
            .collect()
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| Endpoint::from(x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        decode(Vec::<Endpoint>::deserialize(d)?)
    }

    /// The same for a list of edge lists.
    pub mod nested {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|row| row.iter().map(|&x| Endpoint::from(x)).collect::<Vec<_>>())
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<Endpoint>>::deserialize(d)?
                .into_iter()
                .map(decode::<D::Error>)
                .collect::<Result<_, _>>()
                .map_err(D::Error::custom)
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (Endpoint::from(self.lo), Endpoint::from(self.hi)).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let (lo, hi) = <(Endpoint, Endpoint)>::deserialize(d)?;
        let lo = f64::try_from(lo).map_err(D::Error::custom)?;
        let hi = f64::try_from(hi).map_err(D::Error::custom)?;
        Interval::new(lo, hi).map_err(D::Error::custom)
    }
}

/// A product `I_0 x ... x I_{k-1}` of open intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalPattern {
    intervals: Vec<Interval>,
}

impl IntervalPattern {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return invalid("pattern order k must be at least 1");
        }
        Ok(Self { intervals })
    }

    pub fn single(interval: Interval) -> Self {
        Self {
            intervals: vec![interval],
        }
    }

    /// Builds a pattern from `(lo, hi)` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let intervals = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Self::new(intervals)
    }

    pub fn k(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// True when `window[j]` lies in `I_j` for every `j`. `window` must hold
    /// at least `k` values.
    #[inline]
    pub fn matches(&self, window: &[f64]) -> bool {
        self.intervals
            .iter()
            .zip(window)
            .all(|(interval, &x)| interval.contains(x))
    }

    pub fn is_subset_of(&self, other: &IntervalPattern) -> bool {
        self.k() == other.k()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(a, b)| a.is_subset_of(b))
    }
}

/// Start indices of a pattern on a path, `S_k^I` truncated at the horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceSet {
    indices: Vec<usize>,
    source_horizon: usize,
}

impl OccurrenceSet {
    /// `source_horizon` is the number of admissible start indices; every
    /// index must be below it and the list must be strictly increasing.
    pub fn new(indices: Vec<usize>, source_horizon: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("occurrence indices must be strictly increasing");
        }
        if let Some(&last) = indices.last() {
            if last >= source_horizon {
                return invalid(format!(
                    "occurrence index {last} is outside the source horizon {source_horizon}"
                ));
            }
        }
        Ok(Self {
            indices,
            source_horizon,
        })
    }

    /// Builds the set from a 0/1 membership sequence over `0..flags.len()`.
    pub fn from_indicator(flags: &[bool]) -> Self {
        let indices = flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect();
        Self {
            indices,
            source_horizon: flags.len(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn source_horizon(&self) -> usize {
        self.source_horizon
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Membership flags over `0..source_horizon`.
    pub fn indicator(&self) -> Vec<bool> {
        let mut flags = vec![false; self.source_horizon];
        for &i in &self.indices {
            flags[i] = true;
        }
        flags
    }
}

/// Running ratios `d(n) = N(n) / n` for `n = 1..=horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityTrajectory {
    ratios: Vec<f64>,
    final_count: usize,
}

impl DensityTrajectory {
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn horizon(&self) -> usize {
        self.ratios.len()
    }

    pub fn final_count(&self) -> usize {
        self.final_count
    }

    /// `d(n)` for `1 <= n <= horizon`.
    pub fn at(&self, n: usize) -> f64 {
        self.ratios[n - 1]
    }

    pub fn last(&self) -> f64 {
        self.ratios.last().copied().unwrap_or(0.0)
    }

    /// The `n` values (1-based) covered by the tail window of the given
    /// fraction: the last `ceil(fraction * horizon)` points.
    pub fn tail_range(&self, tail_fraction: f64) -> std::ops::RangeInclusive<usize> {
        let h = self.horizon();
        let width = ((tail_fraction * h as f64).ceil() as usize).clamp(1, h.max(1));
        (h - width + 1)..=h
    }
}

/// Finite-horizon stand-in for the limit of a density trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub oscillation: f64,
    pub converged: bool,
    pub tail_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailConfig {
    pub tail_fraction: f64,
    pub tolerance: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl TailConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return invalid(format!(
                "tail_fraction must lie in (0, 1], got {}",
                self.tail_fraction
            ));
        }
        if !(self.tolerance > 0.0) {
            return invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            ));
        }
        Ok(())
    }
}

/// Start indices `n` in `0..=L-k` where `x_{n+j}` lies in `I_j` for every `j`.
pub fn occurrence_set(path: &Path, pattern: &IntervalPattern) -> Result<OccurrenceSet> {
    let k = pattern.k();
    if k > path.len() {
        return invalid(format!(
            "pattern order {k} exceeds path length {}",
            path.len()
        ));
    }
    let source_horizon = path.len() - k + 1;
    let indices = path
        .values()
        .windows(k)
        .enumerate()
        .filter_map(|(n, w)| pattern.matches(w).then_some(n))
        .collect();
    Ok(OccurrenceSet {
        indices,
        source_horizon,
    })
}

/// `N(n)`: the number of occurrences strictly below `n`.
pub fn counting_prefix(occ: &OccurrenceSet, n: usize) -> usize {
    occ.indices.partition_point(|&i| i < n)
}

pub fn density_trajectory(occ: &OccurrenceSet, horizon: usize) -> Result<DensityTrajectory> {
    if horizon == 0 {
        return invalid("trajectory horizon must be at least 1");
    }
    if horizon > occ.source_horizon {
        return invalid(format!(
            "horizon {horizon} exceeds the source horizon {}",
            occ.source_horizon
        ));
    }
    let mut ratios = Vec::with_capacity(horizon);
    let mut count = 0usize;
    let mut next = occ.indices.iter().peekable();
    for n in 1..=horizon {
        // index n-1 enters the prefix [0, n-1]
        if next.next_if(|&&i| i == n - 1).is_some() {
            count += 1;
        }
        ratios.push(count as f64 / n as f64);
    }
    Ok(DensityTrajectory {
        ratios,
        final_count: count,
    })
}

/// Mean and spread of `d(n)` over the last `ceil(tail_fraction * horizon)`
/// points.
pub fn estimate_limit_density(
    traj: &DensityTrajectory,
    tail_fraction: f64,
    tolerance: f64,
) -> Result<DensityEstimate> {
    TailConfig {
        tail_fraction,
        tolerance,
    }
    .validate()?;
    if traj.ratios.is_empty() {
        return invalid("density trajectory is empty");
    }
    let range = traj.tail_range(tail_fraction);
    let tail = &traj.ratios[range.start() - 1..*range.end()];
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &d in tail {
        lo = lo.min(d);
        hi = hi.max(d);
        sum += d;
    }
    let value = (sum / tail.len() as f64).clamp(lo, hi);
    let oscillation = hi - lo;
    Ok(DensityEstimate {
        value,
        oscillation,
        converged: oscillation <= tolerance,
        tail_fraction,
    })
}

/// Same result as [`estimate_limit_density`] over the full-horizon
/// trajectory of `occ`, without materializing the trajectory.
pub fn tail_estimate(occ: &OccurrenceSet, tail: &TailConfig) -> Result<DensityEstimate> {
    tail.validate()?;
    let h = occ.source_horizon;
    if h == 0 {
        return invalid("density trajectory is empty");
    }
    let width = ((tail.tail_fraction * h as f64).ceil() as usize).clamp(1, h);
    let first = h - width + 1;
    // occurrences in [0, first - 2] precede the window
    let mut count = occ.indices.partition_point(|&i| i + 1 < first);
    let mut next = occ.indices[count..].iter().peekable();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for n in first..=h {
        if next.next_if(|&&i| i == n - 1).is_some() {
            count += 1;
        }
        let d = count as f64 / n as f64;
        lo = lo.min(d);
        hi = hi.max(d);
        sum += d;
    }
    let value = (sum / width as f64).clamp(lo, hi);
    let oscillation = hi - lo;
    Ok(DensityEstimate {
        value,
        oscillation,
        converged: oscillation <= tail.tolerance,
        tail_fraction: tail.tail_fraction,
    })
}

/// Shorthand: occurrence set, full-horizon trajectory, tail estimate.
pub fn pattern_density(
    path: &Path,
    pattern: &IntervalPattern,
    tail: &TailConfig,
) -> Result<(OccurrenceSet, DensityTrajectory, DensityEstimate)> {
    let occ = occurrence_set(path, pattern)?;
    let traj = density_trajectory(&occ, occ.source_horizon())?;
    let est = estimate_limit_density(&traj, tail.tail_fraction, tail.tolerance)?;
    Ok((occ, traj, est))
}

/// The window `(x_i, ..., x_{i+n-1})`.
pub fn window_projection(path: &Path, n: usize, i: usize) -> Result<&[f64]> {
    if n == 0 {
        return invalid("window size must be at least 1");
    }
    match i.checked_add(n) {
        Some(end) if end <= path.len() => Ok(&path.values()[i..end]),
        _ => invalid(format!(
            "window of size {n} at offset {i} does not fit a path of length {}",
            path.len()
        )),
    }
}
