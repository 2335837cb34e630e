//! Stationarity tests as window decision functions.
//!
//! A test maps a window of `n` consecutive values to accept (0) or reject
//! (1). Sliding it along a path gives a rejection indicator sequence whose
//! upper density is bounded by the test's size on paths that are essentially
//! stationary; the estimate here takes the largest tail average over a
//! dyadic ladder of tails as the finite-horizon stand-in for the limsup.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generators::{generate, rng_for, GeneratorSpec};
use crate::pathcore::Path;

/// Tails of the offset sequence used by [`rejection_upper_density`].
pub const TAIL_LADDER: [f64; 3] = [0.5, 0.25, 0.125];
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MIN_CALIBRATION_REPLICATES: usize = 1000;
pub const DEFAULT_CALIBRATION_REPLICATES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Window mean.
    ThresholdExceedance,
    /// `|mean(first half) - mean(second half)|`.
    MeanSplit,
    /// `|var(first half) - var(second half)|`, population variances.
    VarianceSplit,
    /// `sum S_t^2 / (n^2 s^2)` with `S_t` the partial sums of the demeaned
    /// window and `s^2` its population variance; 0 on a constant window.
    KpssLike,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [
        TestKind::ThresholdExceedance,
        TestKind::MeanSplit,
        TestKind::VarianceSplit,
        TestKind::KpssLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::ThresholdExceedance => "threshold_exceedance",
            TestKind::MeanSplit => "mean_split",
            TestKind::VarianceSplit => "variance_split",
            TestKind::KpssLike => "kpss_like",
        }
    }

    pub fn min_window(self) -> usize {
        match self {
            TestKind::ThresholdExceedance => 1,
            TestKind::MeanSplit | TestKind::KpssLike => 2,
            TestKind::VarianceSplit => 4,
        }
    }

    pub fn statistic(self, w: &[f64]) -> f64 {
        match self {
            TestKind::ThresholdExceedance => mean(w),
            TestKind::MeanSplit => {
                let (a, b) = w.split_at(w.len() / 2);
                (mean(a) - mean(b)).abs()
            }
            TestKind::VarianceSplit => {
                let (a, b) = w.split_at(w.len() / 2);
                (variance(a) - variance(b)).abs()
            }
            TestKind::KpssLike => {
                let m = mean(w);
                let n = w.len() as f64;
                let mut s = 0.0;
                let mut sum_sq_partial = 0.0;
                let mut sum_sq = 0.0;
                for &x in w {
                    let e = x - m;
                    s += e;
                    sum_sq_partial += s * s;
                    sum_sq += e * e;
                }
                if sum_sq == 0.0 {
                    0.0
                } else {
                    sum_sq_partial / (n * sum_sq)
                }
            }
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown test kind {s:?}")))
    }
}

// Shifting by the first value makes constant windows come out exact.
fn mean(w: &[f64]) -> f64 {
    let x0 = w[0];
    x0 + w.iter().map(|x| x - x0).sum::<f64>() / w.len() as f64
}

fn variance(w: &[f64]) -> f64 {
    let m = mean(w);
    w.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / w.len() as f64
}

/// Which of the two alternative regularity conditions on the critical
/// region the test's author vouches for. Built-in tests reject on a strict
/// inequality of a continuous statistic, so their boundary is null under
/// continuous laws. Nothing here is checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    NullBoundary,
    ClosedCriticalRegion,
    Unasserted,
}

/// A deterministic decision on a window of fixed size; `true` rejects.
pub trait WindowDecision: Send + Sync {
    fn decide(&self, window: &[f64]) -> bool;
}

impl<F> WindowDecision for F
where
    F: Fn(&[f64]) -> bool + Send + Sync,
{
    fn decide(&self, window: &[f64]) -> bool {
        self(window)
    }
}

struct Builtin {
    kind: TestKind,
    tau: f64,
}

impl WindowDecision for Builtin {
    fn decide(&self, window: &[f64]) -> bool {
        self.kind.statistic(window) > self.tau
    }
}

#[derive(Clone)]
pub struct StationarityTest {
    name: String,
    window_size: usize,
    nominal_size: f64,
    kind: Option<TestKind>,
    tau: Option<f64>,
    boundary: BoundaryCondition,
    decision: Arc<dyn WindowDecision>,
}

impl fmt::Debug for StationarityTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StationarityTest")
            .field("name", &self.name)
            .field("window_size", &self.window_size)
            .field("nominal_size", &self.nominal_size)
            .field("tau", &self.tau)
            .field("boundary", &self.boundary)
            .finish()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        invalid(format!("nominal size must lie in (0, 1), got {alpha}"))
    }
}

impl StationarityTest {
    /// Wraps a user decision function. Its compliance with `boundary` is
    /// taken on trust.
    pub fn custom(
        name: impl Into<String>,
        window_size: usize,
        nominal_size: f64,
        boundary: BoundaryCondition,
        decision: impl WindowDecision + 'static,
    ) -> Result<Self> {
        if window_size == 0 {
            return invalid("window size must be at least 1");
        }
        check_alpha(nominal_size)?;
        Ok(Self {
            name: name.into(),
            window_size,
            nominal_size,
            kind: None,
            tau: None,
            boundary,
            decision: Arc::new(decision),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn nominal_size(&self) -> f64 {
        self.nominal_size
    }

    pub fn kind(&self) -> Option<TestKind> {
        self.kind
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn decide(&self, window: &[f64]) -> bool {
        self.decision.decide(window)
    }

    /// Same built-in test with a different threshold.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        match self.kind {
            Some(kind) => make_builtin_test(kind, self.window_size, tau, self.nominal_size),
            None => invalid(format!("{} is not a built-in test", self.name)),
        }
    }
}

/// Rejects when the statistic of `kind` strictly exceeds `tau`.
pub fn make_builtin_test(
    kind: TestKind,
    window_size: usize,
    tau: f64,
    nominal_size: f64,
) -> Result<StationarityTest> {
    if window_size < kind.min_window() {
        return invalid(format!(
            "{kind} needs a window of at least {}, got {window_size}",
            kind.min_window()
        ));
    }
    if !tau.is_finite() {
        return invalid(format!("threshold must be finite, got {tau}"));
    }
    check_alpha(nominal_size)?;
    Ok(StationarityTest {
        name: kind.name().to_string(),
        window_size,
        nominal_size,
        kind: Some(kind),
        tau: Some(tau),
        boundary: BoundaryCondition::NullBoundary,
        decision: Arc::new(Builtin { kind, tau }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub window_size: usize,
    pub start: usize,
    pub stride: usize,
    /// Decision at offset `start + i * stride`, 1 for reject.
    pub indicators: Vec<u8>,
    pub upper_density: f64,
    /// Running max of the tail averages along [`TAIL_LADDER`].
    pub tail_profile: Vec<f64>,
}

impl RejectionRecord {
    pub fn offset(&self, i: usize) -> usize {
        self.start + i * self.stride
    }

    pub fn rejections(&self) -> usize {
        self.indicators.iter().map(|&b| b as usize).sum()
    }

    /// `offset,indicator` rows under a header.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "offset,indicator")?;
        for (i, b) in self.indicators.iter().enumerate() {
            writeln!(out, "{},{}", self.offset(i), b)?;
        }
        Ok(())
    }
}

fn tail_profile(indicators: &[u8]) -> Vec<f64> {
    let len = indicators.len();
    let mut best: f64 = 0.0;
    TAIL_LADDER
        .iter()
        .map(|f| {
            let t = ((len as f64 * f).ceil() as usize).clamp(1, len);
            let ones: usize = indicators[len - t..].iter().map(|&b| b as usize).sum();
            best = best.max(ones as f64 / t as f64);
            best
        })
        .collect()
}

/// Largest mean over the last 1/2, 1/4 and 1/8 of the indicators; 0 when
/// there are none.
pub fn rejection_upper_density(indicators: &[u8]) -> f64 {
    if indicators.is_empty() {
        return 0.0;
    }
    *tail_profile(indicators).last().unwrap()
}

/// Decides every window `start + i * stride` that fits in the path.
pub fn apply_moving_window(
    path: &Path,
    test: &StationarityTest,
    start: usize,
    stride: usize,
) -> Result<RejectionRecord> {
    let n = test.window_size();
    if stride == 0 {
        return invalid("stride must be at least 1");
    }
    if start + n > path.len() {
        return invalid(format!(
            "window of size {n} at offset {start} does not fit a path of length {}",
            path.len()
        ));
    }
    let count = (path.len() - n - start) / stride + 1;
    let values = path.values();
    let indicators: Vec<u8> = (0..count)
        .into_par_iter()
        .map(|i| {
            let s = start + i * stride;
            test.decide(&values[s..s + n]) as u8
        })
        .collect();
    let profile = tail_profile(&indicators);
    Ok(RejectionRecord {
        window_size: n,
        start,
        stride,
        upper_density: *profile.last().unwrap(),
        tail_profile: profile,
        indicators,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    /// Slack over the nominal size tolerated by the trend summary.
    pub epsilon: f64,
    pub start: usize,
    pub stride: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            start: 0,
            stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub window_size: usize,
    pub nominal_size: f64,
    pub tau: Option<f64>,
    pub record: RejectionRecord,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    /// Smallest window size from which on every upper density stays within
    /// `nominal size + epsilon`.
    pub stable_from: Option<usize>,
    pub all_within_bound: bool,
    pub nondecreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    pub summary: SuiteSummary,
}

/// Runs tests of increasing window size along one path.
pub fn asymptotic_suite(
    path: &Path,
    tests: &[StationarityTest],
    cfg: &SuiteConfig,
) -> Result<SuiteReport> {
    if tests
        .windows(2)
        .any(|w| w[0].window_size() > w[1].window_size())
    {
        return invalid("tests must be sorted by window size");
    }
    if !(cfg.epsilon >= 0.0) {
        return invalid(format!("epsilon must be nonnegative, got {}", cfg.epsilon));
    }
    let mut entries = Vec::with_capacity(tests.len());
    for test in tests {
        let record = apply_moving_window(path, test, cfg.start, cfg.stride)?;
        entries.push(SuiteEntry {
            name: test.name().to_string(),
            window_size: test.window_size(),
            nominal_size: test.nominal_size(),
            tau: test.tau(),
            within_bound: record.upper_density <= test.nominal_size() + cfg.epsilon,
            record,
        });
    }
    let mut stable_from = None;
    for e in entries.iter().rev() {
        if !e.within_bound {
            break;
        }
        stable_from = Some(e.window_size);
    }
    let summary = SuiteSummary {
        stable_from,
        all_within_bound: entries.iter().all(|e| e.within_bound),
        nondecreasing: entries
            .windows(2)
            .all(|w| w[1].record.upper_density >= w[0].record.upper_density),
    };
    Ok(SuiteReport { entries, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tau: f64,
    /// Half the spread between the order statistics one binomial standard
    /// deviation either side of the quantile.
    pub standard_error: f64,
    pub alpha: f64,
    pub window_size: usize,
    pub replicates: usize,
    pub seed: u64,
    pub generator: GeneratorSpec,
}

/// Seed of replicate `r`, independent of evaluation order.
pub fn replicate_seed(seed: u64, r: u64) -> u64 {
    rng_for(seed, r).next_u64()
}

/// Empirical `1 - alpha` quantile of `statistic` over independent windows of
/// length `window_size` drawn from `generator`, re-seeded per replicate.
pub fn calibrate_statistic(
    statistic: impl Fn(&[f64]) -> f64 + Sync,
    window_size: usize,
    alpha: f64,
    generator: &GeneratorSpec,
    mc: &MonteCarlo,
) -> Result<Calibration> {
    check_alpha(alpha)?;
    if window_size == 0 {
        return invalid("window size must be at least 1");
    }
    if mc.replicates < MIN_CALIBRATION_REPLICATES {
        return invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_REPLICATES} replicates, got {}",
            mc.replicates
        ));
    }
    let base = generator.with_length(window_size);
    base.validate()?;
    let mut stats: Vec<f64> = (0..mc.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let spec = base.with_seed(replicate_seed(mc.seed, r));
            generate(&spec).map(|p| statistic(p.values()))
        })
        .collect::<Result<_>>()?;
    if stats.iter().any(|s| !s.is_finite()) {
        return Err(Error::CalibrationFailed("statistic is not finite".into()));
    }
    stats.sort_by(f64::total_cmp);
    let r = stats.len();
    if stats[0] == stats[r - 1] {
        return Err(Error::CalibrationFailed(format!(
            "statistic is constant ({}) under {base}",
            stats[0]
        )));
    }
    let q = 1.0 - alpha;
    let at = |p: f64| {
        let i = ((p * r as f64).ceil() as usize).clamp(1, r) - 1;
        stats[i]
    };
    let sd = (q * (1.0 - q) / r as f64).sqrt();
    Ok(Calibration {
        tau: at(q),
        standard_error: 0.5 * (at((q + sd).min(1.0)) - at((q - sd).max(0.0))),
        alpha,
        window_size,
        replicates: mc.replicates,
        seed: mc.seed,
        generator: base,
    })
}

/// Calibrates a built-in test to size `alpha` under `generator`.
pub fn calibrate_test_size(
    kind: TestKind,
    window_size: usize,
    alpha: f64,
    generator: &GeneratorSpec,
    mc: &MonteCarlo,
) -> Result<(StationarityTest, Calibration)> {
    if window_size < kind.min_window() {
        return invalid(format!(
            "{kind} needs a window of at least {}, got {window_size}",
            kind.min_window()
        ));
    }
    let cal = calibrate_statistic(|w| kind.statistic(w), window_size, alpha, generator, mc)?;
    let test = make_builtin_test(kind, window_size, cal.tau, alpha)?;
    Ok((test, cal))
}

/// A generator written either as text (`iid_normal(0,1,0)`) or as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorRef {
    Text(String),
    Spec(GeneratorSpec),
}

impl GeneratorRef {
    pub fn resolve(&self) -> Result<GeneratorSpec> {
        match self {
            GeneratorRef::Text(s) => s.parse(),
            GeneratorRef::Spec(s) => Ok(*s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub generator: GeneratorRef,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_replicates() -> usize {
    DEFAULT_CALIBRATION_REPLICATES
}

/// `{kind, n, tau | alpha, calibration: {generator, replicates, seed}}`.
/// With `tau` the test is used as given; otherwise it is calibrated, under
/// `iid_normal(0,1)` unless a generator is named.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
}

impl TestSpec {
    /// `fallback_seed` seeds calibrations that do not carry their own.
    pub fn build(&self, fallback_seed: u64) -> Result<(StationarityTest, Option<Calibration>)> {
        let kind: TestKind = self.kind.parse()?;
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        if let Some(tau) = self.tau {
            return Ok((make_builtin_test(kind, self.n, tau, alpha)?, None));
        }
        let (generator, replicates, seed) = match &self.calibration {
            Some(c) => (
                c.generator.resolve()?,
                c.replicates,
                c.seed.unwrap_or(fallback_seed),
            ),
            None => (
                "iid_normal(0,1,0)".parse()?,
                DEFAULT_CALIBRATION_REPLICATES,
                fallback_seed,
            ),
        };
        let (test, cal) = calibrate_test_size(
            kind,
            self.n,
            alpha,
            &generator,
            &MonteCarlo { replicates, seed },
        )?;
        Ok((test, Some(cal)))
    }
}
