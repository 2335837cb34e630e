//! Command-line front end. Exit codes: 0 when every diagnostic passes,
//! 2 when violations were found, 1 on any error (including usage errors).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contraction::{
    adversarial_contraction, default_threshold, validate_contraction, AdversarialConfig,
    ContractionValidation, ValidationConfig, DEFAULT_M_SCHEDULE,
};
use crate::error::{invalid, Error, Result};
use crate::generators::{generate, GeneratorSpec};
use crate::pathcore::{
    pattern_density, read_path_file, write_path, Interval, IntervalPattern, Path, TailConfig,
};
use crate::properties::PropertyConfig;
use crate::report::{analyze, write_trajectories_csv, AnalysisConfig, AnalysisReport};
use crate::stattests::{apply_moving_window, Calibration, TestSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pathstat",
    version,
    about = "Path-level stationarity diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic path, one value per line.
    Generate(GenerateArgs),
    /// Run the diagnostic suite on a path and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Slide stationarity tests along a path and summarize rejections.
    Testbench(TestbenchArgs),
    /// Fraction of seeds passing the full suite, per generator.
    Montecarlo(MontecarloArgs),
    /// Build an adversarial contraction for one pattern and dump its trace.
    Contract(ContractArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file whose fields override the command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random generators; overrides the seed inside a generator spec.
    #[arg(long, env = "PATHSTAT_SEED")]
    seed: Option<u64>,
    /// Output directory. Without it the JSON result goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalysisFlags {
    #[arg(long, default_value_t = crate::properties::DEFAULT_GRID_CELLS)]
    grid_cells: usize,
    #[arg(long, default_value_t = crate::report::DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = crate::pathcore::DEFAULT_TAIL_FRACTION)]
    tail_fraction: f64,
    #[arg(long, default_value_t = crate::pathcore::DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = 10.0)]
    positive_floor: f64,
    #[arg(long, default_value_t = 5.0)]
    violation_floor: f64,
    #[arg(long, default_value_t = 0.01)]
    t_slack: f64,
    #[arg(long, default_value_t = crate::contraction::DEFAULT_ERGODICITY_TOLERANCE)]
    ergodicity_tolerance: f64,
    /// Tightness ladder, e.g. `1,10,100,1000`.
    #[arg(long, value_delimiter = ',')]
    k_levels: Option<Vec<f64>>,
    /// Extra Property E pattern, `lo:hi[;lo:hi...]`; repeatable.
    #[arg(long = "probe", value_parser = parse_pattern)]
    probes: Vec<IntervalPattern>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generator, e.g. `ar1(0.5,1,7),L=100000`.
    spec: String,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long, env = "PATHSTAT_SEED")]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Path file or `generate:<spec>`.
    input: Option<String>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
struct TestbenchArgs {
    input: Option<String>,
    #[command(flatten)]
    common: Common,
    /// JSON file with a list of test specs (or `{"tests": [...]}`).
    #[arg(long)]
    tests: Option<PathBuf>,
    /// Inline test `kind:n:tau`; repeatable.
    #[arg(long = "test", value_parser = parse_inline_test)]
    inline: Vec<TestSpec>,
    #[arg(long, default_value_t = 0)]
    start: usize,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Slack over the nominal size before a test counts as non-compliant.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct MontecarloArgs {
    /// Generator spec; repeatable. Replicate `r` uses seed `seed + r`.
    #[arg(long = "generator")]
    generators: Vec<String>,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    /// Overrides the length in every generator spec.
    #[arg(long)]
    length: Option<usize>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
struct ContractArgs {
    input: Option<String>,
    #[command(flatten)]
    common: Common,
    /// Target pattern `lo:hi[;lo:hi...]`.
    #[arg(long, value_parser = parse_pattern)]
    cell: Option<IntervalPattern>,
    /// Local-frequency threshold; defaults to the midpoint between the
    /// pattern density and 1 (at most density + 0.25).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    m_schedule: Option<Vec<usize>>,
    /// Include V0, V1, V2 and H(m) for every m.
    #[arg(long)]
    trace: bool,
    #[arg(long, default_value_t = crate::pathcore::DEFAULT_TAIL_FRACTION)]
    tail_fraction: f64,
    #[arg(long, default_value_t = crate::pathcore::DEFAULT_TOLERANCE)]
    tolerance: f64,
}

/// Fields of `--config`; any field present overrides the matching flag.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid_cells: Option<usize>,
    pub k_max: Option<usize>,
    pub tail_fraction: Option<f64>,
    pub tolerance: Option<f64>,
    pub positive_floor: Option<f64>,
    pub violation_floor: Option<f64>,
    pub t_slack: Option<f64>,
    pub ergodicity_tolerance: Option<f64>,
    pub k_levels: Option<Vec<f64>>,
    pub probe_cells: Option<Vec<IntervalPattern>>,
    pub tests: Option<Vec<TestSpec>>,
    pub start: Option<usize>,
    pub stride: Option<usize>,
    pub epsilon: Option<f64>,
    pub generators: Option<Vec<String>>,
    pub replicates: Option<usize>,
    pub length: Option<usize>,
    pub cell: Option<IntervalPattern>,
    pub threshold: Option<f64>,
    pub m_schedule: Option<Vec<usize>>,
    pub trace: Option<bool>,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => Ok(RunConfig::default()),
    }
}

fn parse_bound(s: &str) -> std::result::Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t.parse().map_err(|_| format!("bad bound {t:?}")),
    }
}

/// `lo:hi` per coordinate, coordinates separated by `;`.
pub fn parse_pattern(s: &str) -> std::result::Result<IntervalPattern, String> {
    let intervals = s
        .split(';')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| format!("interval {part:?} is not lo:hi"))?;
            Interval::new(parse_bound(lo)?, parse_bound(hi)?).map_err(|e| e.to_string())
        })
        .collect::<std::result::Result<Vec<_>, String>>()?;
    IntervalPattern::new(intervals).map_err(|e| e.to_string())
}

fn parse_inline_test(s: &str) -> std::result::Result<TestSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, n, tau] = parts.as_slice() else {
        return Err(format!("test {s:?} is not kind:n:tau"));
    };
    Ok(TestSpec {
        kind: kind.to_string(),
        n: n.parse().map_err(|_| format!("bad window size {n:?}"))?,
        tau: Some(tau.parse().map_err(|_| format!("bad threshold {tau:?}"))?),
        alpha: None,
        calibration: None,
    })
}

/// Reads a path file, or generates one from `generate:<spec>`. Returns the
/// path and the seed actually used, if any.
pub fn load_input(input: &str, seed: Option<u64>) -> Result<(Path, Option<u64>)> {
    if input.trim_start().starts_with("generate:") {
        let mut spec: GeneratorSpec = input.parse()?;
        if let Some(s) = seed {
            spec = spec.with_seed(s);
        }
        Ok((generate(&spec)?, spec.seed()))
    } else {
        Ok((read_path_file(std::path::Path::new(input))?, None))
    }
}

fn analysis_config(flags: &AnalysisFlags, rc: &RunConfig) -> AnalysisConfig {
    let mut cfg = AnalysisConfig {
        grid_cells: rc.grid_cells.unwrap_or(flags.grid_cells),
        k_max: rc.k_max.unwrap_or(flags.k_max),
        property: PropertyConfig {
            tail: TailConfig {
                tail_fraction: rc.tail_fraction.unwrap_or(flags.tail_fraction),
                tolerance: rc.tolerance.unwrap_or(flags.tolerance),
            },
            positive_floor_count: rc.positive_floor.unwrap_or(flags.positive_floor),
            violation_floor_count: rc.violation_floor.unwrap_or(flags.violation_floor),
            t_slack: rc.t_slack.unwrap_or(flags.t_slack),
        },
        ergodicity_tolerance: rc
            .ergodicity_tolerance
            .unwrap_or(flags.ergodicity_tolerance),
        probe_cells: rc
            .probe_cells
            .clone()
            .unwrap_or_else(|| flags.probes.clone()),
        ..AnalysisConfig::default()
    };
    if let Some(k) = rc.k_levels.clone().or_else(|| flags.k_levels.clone()) {
        cfg.k_levels = k;
    }
    cfg
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(out: &Option<PathBuf>, name: &str, json: &str) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), json)?;
        }
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn required_input(arg: &Option<String>, rc: &RunConfig) -> Result<String> {
    rc.input.clone().or_else(|| arg.clone()).ok_or_else(|| {
        Error::InvalidArgument("an input file or generate:<spec> is required".into())
    })
}

fn cmd_generate(a: GenerateArgs) -> Result<i32> {
    let mut spec: GeneratorSpec = a.spec.parse()?;
    if let Some(l) = a.length {
        spec = spec.with_length(l);
    }
    if let Some(s) = a.seed {
        spec = spec.with_seed(s);
    }
    let path = generate(&spec)?;
    match a.output {
        Some(file) => write_path(&mut std::io::BufWriter::new(fs::File::create(file)?), &path)?,
        None => write_path(&mut std::io::stdout().lock(), &path)?,
    }
    Ok(EXIT_PASS)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<i32> {
    let rc = load_config(&a.common.config)?;
    let input = required_input(&a.input, &rc)?;
    let (path, seed) = load_input(&input, rc.seed.or(a.common.seed))?;
    let cfg = analysis_config(&a.analysis, &rc);
    let report = analyze(&path, &input, seed, &cfg)?;
    let out = rc.out.clone().or(a.common.out);
    emit(&out, "report.json", &to_json(&report)?)?;
    if let Some(dir) = &out {
        let file = fs::File::create(dir.join("trajectories.csv"))?;
        write_trajectories_csv(&path, &report, std::io::BufWriter::new(file))?;
    }
    Ok(exit_for(&report))
}

fn exit_for(report: &AnalysisReport) -> i32 {
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_VIOLATIONS
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TestList {
    Plain(Vec<TestSpec>),
    Wrapped { tests: Vec<TestSpec> },
}

#[derive(Debug, Serialize)]
struct TestSummary {
    name: String,
    window_size: usize,
    nominal_size: f64,
    tau: Option<f64>,
    calibration: Option<Calibration>,
    windows: usize,
    rejections: usize,
    upper_density: f64,
    tail_profile: Vec<f64>,
    bound: f64,
    compliant: bool,
    csv: Option<String>,
}

#[derive(Debug, Serialize)]
struct TestbenchSummary {
    input: String,
    seed: Option<u64>,
    horizon: usize,
    start: usize,
    stride: usize,
    epsilon: f64,
    tests: Vec<TestSummary>,
    compliant: bool,
}

fn cmd_testbench(a: TestbenchArgs) -> Result<i32> {
    let rc = load_config(&a.common.config)?;
    let input = required_input(&a.input, &rc)?;
    let seed = rc.seed.or(a.common.seed);
    let (path, path_seed) = load_input(&input, seed)?;
    let mut specs = match &rc.tests {
        Some(t) => t.clone(),
        None => match &a.tests {
            Some(file) => match serde_json::from_str(&fs::read_to_string(file)?)? {
                TestList::Plain(v) | TestList::Wrapped { tests: v } => v,
            },
            None => Vec::new(),
        },
    };
    if rc.tests.is_none() {
        specs.extend(a.inline.iter().cloned());
    }
    if specs.is_empty() {
        return invalid("no tests given (use --tests FILE or --test kind:n:tau)");
    }
    let start = rc.start.unwrap_or(a.start);
    let stride = rc.stride.unwrap_or(a.stride);
    let epsilon = rc.epsilon.unwrap_or(a.epsilon);
    let out = rc.out.clone().or(a.common.out);
    let mut tests = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let (test, calibration) = spec.build(seed.unwrap_or(0))?;
        let record = apply_moving_window(&path, &test, start, stride)?;
        let csv = match &out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let name = format!("test{i}_{}_n{}.csv", test.name(), test.window_size());
                let file = fs::File::create(dir.join(&name))?;
                record.write_csv(std::io::BufWriter::new(file))?;
                Some(name)
            }
            None => None,
        };
        let bound = test.nominal_size() + epsilon;
        tests.push(TestSummary {
            name: test.name().to_string(),
            window_size: test.window_size(),
            nominal_size: test.nominal_size(),
            tau: test.tau(),
            calibration,
            windows: record.indicators.len(),
            rejections: record.rejections(),
            upper_density: record.upper_density,
            tail_profile: record.tail_profile.clone(),
            bound,
            compliant: record.upper_density <= bound,
            csv,
        });
    }
    let summary = TestbenchSummary {
        input,
        seed: path_seed,
        horizon: path.len(),
        start,
        stride,
        epsilon,
        compliant: tests.iter().all(|t| t.compliant),
        tests,
    };
    emit(&out, "summary.json", &to_json(&summary)?)?;
    Ok(if summary.compliant {
        EXIT_PASS
    } else {
        EXIT_VIOLATIONS
    })
}

#[derive(Debug, Serialize)]
pub struct CoverageRow {
    pub generator: String,
    pub replicates: usize,
    pub first_seed: u64,
    pub passes: usize,
    pub pass_fraction: f64,
    pub standard_error: f64,
}

#[derive(Debug, Serialize)]
struct CoverageTable {
    seed: u64,
    config: AnalysisConfig,
    rows: Vec<CoverageRow>,
}

/// Runs the full suite on `replicates` seeds (`seed + r`) of `spec`.
pub fn coverage(
    spec: &GeneratorSpec,
    replicates: usize,
    seed: u64,
    cfg: &AnalysisConfig,
) -> Result<CoverageRow> {
    if replicates == 0 {
        return invalid("replicates must be at least 1");
    }
    let passed: Vec<bool> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let s = spec.with_seed(seed + r);
            let path = generate(&s)?;
            Ok(analyze(&path, "", s.seed(), cfg)?.pass)
        })
        .collect::<Result<_>>()?;
    let passes = passed.iter().filter(|&&p| p).count();
    let p = passes as f64 / replicates as f64;
    Ok(CoverageRow {
        generator: spec.with_seed(seed).to_string(),
        replicates,
        first_seed: seed,
        passes,
        pass_fraction: p,
        standard_error: (p * (1.0 - p) / replicates as f64).sqrt(),
    })
}

fn cmd_montecarlo(a: MontecarloArgs) -> Result<i32> {
    let rc = load_config(&a.common.config)?;
    let generators = rc.generators.clone().unwrap_or(a.generators.clone());
    if generators.is_empty() {
        return invalid("no generators given (use --generator SPEC)");
    }
    let replicates = rc.replicates.unwrap_or(a.replicates);
    let length = rc.length.or(a.length);
    let seed = rc.seed.or(a.common.seed).unwrap_or(0);
    let cfg = analysis_config(&a.analysis, &rc);
    let mut rows = Vec::with_capacity(generators.len());
    for g in &generators {
        let mut spec: GeneratorSpec = g.parse()?;
        if let Some(l) = length {
            spec = spec.with_length(l);
        }
        rows.push(coverage(&spec, replicates, seed, &cfg)?);
    }
    let out = rc.out.clone().or(a.common.out);
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        let mut csv = String::from("generator,replicates,passes,pass_fraction,standard_error\n");
        for r in &rows {
            csv.push_str(&format!(
                "\"{}\",{},{},{},{}\n",
                r.generator, r.replicates, r.passes, r.pass_fraction, r.standard_error
            ));
        }
        fs::write(dir.join("coverage.csv"), csv)?;
    }
    let table = CoverageTable {
        seed,
        config: cfg,
        rows,
    };
    emit(&out, "coverage.json", &to_json(&table)?)?;
    Ok(EXIT_PASS)
}

#[derive(Debug, Serialize)]
struct ContractOutput {
    input: String,
    seed: Option<u64>,
    pattern: IntervalPattern,
    threshold: f64,
    m_schedule: Vec<usize>,
    target_density: f64,
    n_markers: Vec<usize>,
    global_density: f64,
    contracted_density: f64,
    validation: ContractionValidation,
    contraction: crate::contraction::Contraction,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<crate::contraction::AdversarialStep>>,
}

fn cmd_contract(a: ContractArgs) -> Result<i32> {
    let rc = load_config(&a.common.config)?;
    let input = required_input(&a.input, &rc)?;
    let (path, seed) = load_input(&input, rc.seed.or(a.common.seed))?;
    let pattern = rc
        .cell
        .clone()
        .or(a.cell.clone())
        .ok_or_else(|| Error::InvalidArgument("--cell lo:hi is required".into()))?;
    let tail = TailConfig {
        tail_fraction: rc.tail_fraction.unwrap_or(a.tail_fraction),
        tolerance: rc.tolerance.unwrap_or(a.tolerance),
    };
    let threshold = match rc.threshold.or(a.threshold) {
        Some(t) => t,
        None => default_threshold(pattern_density(&path, &pattern, &tail)?.2.value),
    };
    let schedule = rc
        .m_schedule
        .clone()
        .or(a.m_schedule.clone())
        .unwrap_or_else(|| DEFAULT_M_SCHEDULE.to_vec());
    let trace = adversarial_contraction(
        &path,
        &pattern,
        &schedule,
        threshold,
        &AdversarialConfig::default(),
        &tail,
    )?;
    let validation = validate_contraction(
        &trace.result,
        path.len(),
        &ValidationConfig {
            tail,
            ..ValidationConfig::default()
        },
    );
    let output = ContractOutput {
        input,
        seed,
        pattern,
        threshold,
        m_schedule: trace.m_schedule,
        target_density: trace.target_density,
        n_markers: trace.n_markers,
        global_density: trace.global_density,
        contracted_density: trace.contracted_density,
        validation,
        contraction: trace.result,
        steps: rc.trace.unwrap_or(a.trace).then_some(trace.steps),
    };
    emit(
        &rc.out.clone().or(a.common.out),
        "contraction.json",
        &to_json(&output)?,
    )?;
    Ok(EXIT_PASS)
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Testbench(a) => cmd_testbench(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Contract(a) => cmd_contract(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
