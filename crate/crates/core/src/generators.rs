//! Synthetic paths: the textbook examples (increasing path, unique peak,
//! constant, sinusoid) and a small zoo of ergodic and non-ergodic sources.
//!
//! Randomness comes from ChaCha20 (`rand_chacha` 0.3) seeded with
//! `seed_from_u64(seed)`. Independent replicates use distinct ChaCha stream
//! ids on the same key, see [`rng_for`]; a path generated from
//! `(spec, seed)` is identical across runs and platforms.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::pathcore::{Interval, IntervalPattern, Path};

/// Identifies the random stream layout. Bump when generated values change.
pub const RNG_VERSION: &str = "chacha20-stream/1";

/// Noise in `unique_peak` is truncated to `(-NOISE_BOUND, NOISE_BOUND)`.
pub const NOISE_BOUND: f64 = 4.0;
pub const DEFAULT_PEAK_HEIGHT: f64 = 10.0;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Constant {
        c: f64,
    },
    Monotone {
        slope: f64,
    },
    UniquePeak {
        seed: u64,
        peak_height: f64,
    },
    Sine {
        theta: f64,
        phi0: f64,
    },
    RandomPhaseSine {
        theta: f64,
        seed: u64,
    },
    IidNormal {
        mu: f64,
        sigma: f64,
        seed: u64,
    },
    Ar1 {
        rho: f64,
        sigma: f64,
        seed: u64,
    },
    BlockMixture {
        level_a: f64,
        level_b: f64,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub length: usize,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, length: usize) -> Self {
        Self { kind, length }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            GeneratorKind::Constant { .. } => "constant",
            GeneratorKind::Monotone { .. } => "monotone",
            GeneratorKind::UniquePeak { .. } => "unique_peak",
            GeneratorKind::Sine { .. } => "sine",
            GeneratorKind::RandomPhaseSine { .. } => "random_phase_sine",
            GeneratorKind::IidNormal { .. } => "iid_normal",
            GeneratorKind::Ar1 { .. } => "ar1",
            GeneratorKind::BlockMixture { .. } => "block_mixture",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            GeneratorKind::UniquePeak { seed, .. }
            | GeneratorKind::RandomPhaseSine { seed, .. }
            | GeneratorKind::IidNormal { seed, .. }
            | GeneratorKind::Ar1 { seed, .. }
            | GeneratorKind::BlockMixture { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn is_random(&self) -> bool {
        self.seed().is_some()
    }

    /// Same spec with a different seed; deterministic kinds are unchanged.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self.kind {
            GeneratorKind::UniquePeak { seed, .. }
            | GeneratorKind::RandomPhaseSine { seed, .. }
            | GeneratorKind::IidNormal { seed, .. }
            | GeneratorKind::Ar1 { seed, .. }
            | GeneratorKind::BlockMixture { seed, .. } => *seed = new_seed,
            _ => {}
        }
        self
    }

    pub fn with_length(mut self, length: usize) -> Self {
        self.length = length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return invalid("generator length must be at least 1");
        }
        let finite = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                invalid(format!("{name} must be finite"))
            }
        };
        match self.kind {
            GeneratorKind::Constant { c } => finite("c", c),
            GeneratorKind::Monotone { slope } => {
                finite("slope", slope)?;
                if slope == 0.0 {
                    return invalid("monotone slope must be nonzero");
                }
                Ok(())
            }
            GeneratorKind::UniquePeak { peak_height, .. } => {
                finite("peak_height", peak_height)?;
                if peak_height <= NOISE_BOUND {
                    return invalid(format!(
                        "peak_height must exceed the noise bound {NOISE_BOUND}"
                    ));
                }
                Ok(())
            }
            GeneratorKind::Sine { theta, phi0 } => {
                check_theta(theta)?;
                finite("phi0", phi0)
            }
            GeneratorKind::RandomPhaseSine { theta, .. } => check_theta(theta),
            GeneratorKind::IidNormal { mu, sigma, .. } => {
                finite("mu", mu)?;
                check_sigma(sigma)
            }
            GeneratorKind::Ar1 { rho, sigma, .. } => {
                if !(rho.abs() < 1.0) {
                    return invalid(format!("ar1 requires |rho| < 1, got {rho}"));
                }
                check_sigma(sigma)
            }
            GeneratorKind::BlockMixture {
                level_a, level_b, ..
            } => {
                finite("level_a", level_a)?;
                finite("level_b", level_b)?;
                if level_a == level_b {
                    return invalid("block_mixture levels must differ");
                }
                Ok(())
            }
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < TAU {
        Ok(())
    } else {
        invalid(format!("theta must lie in (0, 2*pi), got {theta}"))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        invalid(format!("sigma must be positive, got {sigma}"))
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Path> {
    spec.validate()?;
    let len = spec.length;
    let values: Vec<f64> = match spec.kind {
        GeneratorKind::Constant { c } => vec![c; len],
        GeneratorKind::Monotone { slope } => (0..len).map(|n| slope * n as f64).collect(),
        GeneratorKind::UniquePeak { seed, peak_height } => {
            let mut rng = rng_for(seed, 0);
            let mut v: Vec<f64> = (0..len).map(|_| truncated_normal(&mut rng)).collect();
            v[len / 2] = peak_height;
            v
        }
        GeneratorKind::Sine { theta, phi0 } => sine(len, theta, phi0),
        GeneratorKind::RandomPhaseSine { theta, seed } => {
            let phi0 = rng_for(seed, 0).gen_range(0.0..TAU);
            sine(len, theta, phi0)
        }
        GeneratorKind::IidNormal { mu, sigma, seed } => {
            let mut rng = rng_for(seed, 0);
            (0..len)
                .map(|_| mu + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        GeneratorKind::Ar1 { rho, sigma, seed } => {
            let mut rng = rng_for(seed, 0);
            let stationary_sd = sigma / (1.0 - rho * rho).sqrt();
            let mut x = stationary_sd * rng.sample::<f64, _>(StandardNormal);
            let mut v = Vec::with_capacity(len);
            v.push(x);
            for _ in 1..len {
                x = rho * x + sigma * rng.sample::<f64, _>(StandardNormal);
                v.push(x);
            }
            v
        }
        GeneratorKind::BlockMixture {
            level_a,
            level_b,
            seed,
        } => {
            let mut rng = rng_for(seed, 0);
            block_levels(len, level_a, level_b)
                .into_iter()
                .map(|level| level + rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };
    Path::new(values)
}

fn sine(len: usize, theta: f64, phi0: f64) -> Vec<f64> {
    (0..len).map(|n| (n as f64 * theta + phi0).sin()).collect()
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() < NOISE_BOUND {
            return z;
        }
    }
}

/// Noise-free block layout of `block_mixture`: the `m`-th pair is `m`
/// copies of `level_a` followed by `m` copies of `level_b`, `m = 1, 2, ...`.
pub fn block_levels(len: usize, level_a: f64, level_b: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut m = 1;
    while out.len() < len {
        for level in [level_a, level_b] {
            let take = m.min(len - out.len());
            out.extend(std::iter::repeat_n(level, take));
        }
        m += 1;
    }
    out
}

/// What the diagnostics are expected to report for a generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedProfile {
    pub property_e_pass: bool,
    pub property_t_pass: bool,
    pub ergodicity_pass: bool,
    /// Cells where the expected failure shows, if any.
    pub probe_cells: Vec<IntervalPattern>,
    /// Lower bound on the ergodicity discrepancy at the first probe cell.
    pub min_discrepancy: Option<f64>,
}

impl ExpectedProfile {
    pub fn passes_all(&self) -> bool {
        self.property_e_pass && self.property_t_pass && self.ergodicity_pass
    }

    fn pass_all() -> Self {
        Self {
            property_e_pass: true,
            property_t_pass: true,
            ergodicity_pass: true,
            probe_cells: Vec::new(),
            min_discrepancy: None,
        }
    }
}

pub fn expected_profile(spec: &GeneratorSpec) -> Result<ExpectedProfile> {
    spec.validate()?;
    let cell = |lo: f64, hi: f64| -> Result<IntervalPattern> {
        Ok(IntervalPattern::single(Interval::new(lo, hi)?))
    };
    Ok(match spec.kind {
        GeneratorKind::Constant { .. }
        | GeneratorKind::Sine { .. }
        | GeneratorKind::RandomPhaseSine { .. }
        | GeneratorKind::IidNormal { .. }
        | GeneratorKind::Ar1 { .. } => ExpectedProfile::pass_all(),
        GeneratorKind::Monotone { slope } => {
            // x_3 alone falls in this cell
            let (lo, hi) = if slope > 0.0 {
                (2.5 * slope, 3.5 * slope)
            } else {
                (3.5 * slope, 2.5 * slope)
            };
            ExpectedProfile {
                property_e_pass: false,
                property_t_pass: false,
                ergodicity_pass: true,
                probe_cells: vec![cell(lo, hi)?],
                min_discrepancy: None,
            }
        }
        GeneratorKind::UniquePeak { .. } => ExpectedProfile {
            property_e_pass: false,
            property_t_pass: true,
            ergodicity_pass: true,
            probe_cells: vec![cell(NOISE_BOUND, f64::INFINITY)?],
            min_discrepancy: None,
        },
        GeneratorKind::BlockMixture {
            level_a, level_b, ..
        } => {
            let half_gap = 0.5 * (level_b - level_a).abs();
            let probe = cell(level_b - half_gap, level_b + half_gap)?;
            // contraction onto the level_b blocks versus the global density
            let z = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let inside_b = z.cdf(half_gap) - z.cdf(-half_gap);
            let inside_a = z.cdf(3.0 * half_gap) - z.cdf(half_gap);
            let gap = 0.5 * (inside_b - inside_a);
            ExpectedProfile {
                property_e_pass: true,
                property_t_pass: true,
                ergodicity_pass: false,
                probe_cells: vec![probe],
                min_discrepancy: Some(gap - 0.05),
            }
        }
    })
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GeneratorKind::Constant { c } => write!(f, "constant({c})"),
            GeneratorKind::Monotone { slope } => write!(f, "monotone({slope})"),
            GeneratorKind::UniquePeak { seed, peak_height } => {
                write!(f, "unique_peak(seed={seed},peak_height={peak_height})")
            }
            GeneratorKind::Sine { theta, phi0 } => write!(f, "sine({theta},{phi0})"),
            GeneratorKind::RandomPhaseSine { theta, seed } => {
                write!(f, "random_phase_sine({theta},seed={seed})")
            }
            GeneratorKind::IidNormal { mu, sigma, seed } => {
                write!(f, "iid_normal({mu},{sigma},seed={seed})")
            }
            GeneratorKind::Ar1 { rho, sigma, seed } => write!(f, "ar1({rho},{sigma},seed={seed})"),
            GeneratorKind::BlockMixture {
                level_a,
                level_b,
                seed,
            } => write!(f, "block_mixture({level_a},{level_b},seed={seed})"),
        }?;
        write!(f, ",L={}", self.length)
    }
}

/// Parses `kind(args)[,L=n]`, e.g. `constant(2),L=1000`,
/// `ar1(0.5,1,seed=7),L=100000` or `sine(pi/2,0),L=8`.
///
/// Arguments are positional in the documented order or `name=value`.
/// Omitted arguments take defaults (`seed=0`, `sigma=1`, `mu=0`,
/// `phi0=0`, `peak_height=10`, `level_a=0`, `level_b=5`, `theta=1`).
/// The literal `pi` may appear as `pi`, `pi/k` or `k*pi`. Without `L=` the
/// length defaults to 1000.
impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let s = s.strip_prefix("generate:").unwrap_or(s);
        let open = s
            .find('(')
            .ok_or_else(|| Error::InvalidArgument(format!("generator {s:?} needs (args)")))?;
        let close = s
            .rfind(')')
            .ok_or_else(|| Error::InvalidArgument(format!("generator {s:?} is missing ')'")))?;
        let name = s[..open].trim();
        let args = &s[open + 1..close];
        let rest = s[close + 1..].trim().trim_start_matches(',').trim();
        let mut length = 1000usize;
        if !rest.is_empty() {
            let value = rest
                .strip_prefix("L=")
                .ok_or_else(|| Error::InvalidArgument(format!("unexpected suffix {rest:?}")))?;
            length = parse_count(value)?;
        }

        let order: &[&str] = match name {
            "constant" => &["c"],
            "monotone" => &["slope"],
            "unique_peak" => &["seed", "peak_height"],
            "sine" => &["theta", "phi0"],
            "random_phase_sine" => &["theta", "seed"],
            "iid_normal" => &["mu", "sigma", "seed"],
            "ar1" => &["rho", "sigma", "seed"],
            "block_mixture" => &["level_a", "level_b", "seed"],
            other => return invalid(format!("unknown generator kind {other:?}")),
        };
        let mut named: Vec<(String, String)> = Vec::new();
        let mut positional = 0;
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            if let Some((k, v)) = arg.split_once('=') {
                named.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                let key = order.get(positional).ok_or_else(|| {
                    Error::InvalidArgument(format!("too many arguments for {name}"))
                })?;
                named.push((key.to_string(), arg.to_string()));
                positional += 1;
            }
        }
        for (k, _) in &named {
            if !order.contains(&k.as_str()) {
                return invalid(format!("{name} has no parameter {k:?}"));
            }
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            match named.iter().rev().find(|(k, _)| k == key) {
                Some((_, v)) => parse_real(v),
                None => {
                    default.ok_or_else(|| Error::InvalidArgument(format!("{name} requires {key}")))
                }
            }
        };
        let seed = || -> Result<u64> {
            match named.iter().rev().find(|(k, _)| k == "seed") {
                Some((_, v)) => v
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad seed {v:?}"))),
                None => Ok(0),
            }
        };
        let kind = match name {
            "constant" => GeneratorKind::Constant { c: get("c", None)? },
            "monotone" => GeneratorKind::Monotone {
                slope: get("slope", Some(1.0))?,
            },
            "unique_peak" => GeneratorKind::UniquePeak {
                seed: seed()?,
                peak_height: get("peak_height", Some(DEFAULT_PEAK_HEIGHT))?,
            },
            "sine" => GeneratorKind::Sine {
                theta: get("theta", Some(1.0))?,
                phi0: get("phi0", Some(0.0))?,
            },
            "random_phase_sine" => GeneratorKind::RandomPhaseSine {
                theta: get("theta", Some(1.0))?,
                seed: seed()?,
            },
            "iid_normal" => GeneratorKind::IidNormal {
                mu: get("mu", Some(0.0))?,
                sigma: get("sigma", Some(1.0))?,
                seed: seed()?,
            },
            "ar1" => GeneratorKind::Ar1 {
                rho: get("rho", None)?,
                sigma: get("sigma", Some(1.0))?,
                seed: seed()?,
            },
            "block_mixture" => GeneratorKind::BlockMixture {
                level_a: get("level_a", Some(0.0))?,
                level_b: get("level_b", Some(5.0))?,
                seed: seed()?,
            },
            _ => unreachable!("name checked above"),
        };
        let spec = GeneratorSpec { kind, length };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_count(s: &str) -> Result<usize> {
    let v = parse_real(s)?;
    if v >= 1.0 && v.fract() == 0.0 && v <= 1e12 {
        Ok(v as usize)
    } else {
        invalid(format!("bad length {s:?}"))
    }
}

/// Reals with optional `pi` factors: `1.5`, `1e5`, `pi`, `pi/2`, `2*pi`, `-pi/4`.
fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(b) => (-1.0, b.trim()),
        None => (1.0, s),
    };
    let bad = || Error::InvalidArgument(format!("cannot parse {s:?} as a number"));
    let value = if body == "pi" {
        PI
    } else if let Some(d) = body.strip_prefix("pi/") {
        PI / d.trim().parse::<f64>().map_err(|_| bad())?
    } else if let Some(m) = body.strip_suffix("*pi") {
        m.trim().parse::<f64>().map_err(|_| bad())? * PI
    } else {
        return Err(bad());
    };
    Ok(sign * value)
}
