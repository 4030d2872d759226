//! Batch command-line front end.
//!
//! Every subcommand reads an optional TOML file (`--config`), applies flag
//! overrides on top, validates the result and writes its artifacts into the
//! output directory: CSV tables with `#` provenance lines, a JSON report, an
//! echo of the effective configuration and plot data under `plots/`.
//!
//! Exit codes: 0 on success, 2 on any validation or I/O error, 3 when a
//! checked inequality or assertion fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{full_chain, signed_lumped_chain, unsigned_projection, ChainKind, FiniteKernel};
use crate::model::{ModelKind, ModelSpec};
use crate::sim::{cost_profile, run_many, Observable, OrbitSampler, RunConfig, RunStats};
use crate::spectral::{
    cheeger_interval, conductance_exact, gap_report, interval_conductance, summarize, BoundRecord,
    MAX_EXACT_CONDUCTANCE,
};
use crate::verify::{
    gap_scan, unimodality_scan, verify_beg_fast, verify_beg_slow, verify_ising_fast, verify_ising_slow,
    verify_warmup, BoundReport, ScanGrid, UnimodalityReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEFECT: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "EQUIMIX_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "equimix-out";
const REPORT_SCHEMA: &str = "equimix-report/1";
const CSV_SCHEMA: &str = "1";

#[derive(Debug, Parser)]
#[command(name = "equimix", version, about = "Exact spectral analysis and simulation of equi-energy samplers")]
pub struct Cli {
    /// Output directory (default: $EQUIMIX_OUT_DIR, else ./equimix-out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for independent grid cells and replicas
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Master seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact gaps over a parameter grid
    GapScan(GridArgs),
    /// Check one of the mixing results against exact gaps
    Verify {
        #[arg(value_enum)]
        target: Target,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Shape of the Ising level or BEG row profiles
    UnimodalityScan(GridArgs),
    /// Monte Carlo estimate with batch-means error bars
    Simulate(SimArgs),
    /// Conductance and Cheeger interval of one chain
    Conductance(KernelArgs),
    /// Write one transition matrix
    ExportKernel(KernelArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    IsingFast,
    IsingSlow,
    Warmup,
    BegSlow,
    BegFast,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::IsingFast => "ising-fast",
            Target::IsingSlow => "ising-slow",
            Target::Warmup => "warmup",
            Target::BegSlow => "beg-slow",
            Target::BegFast => "beg-fast",
        }
    }

    fn model(self) -> &'static str {
        match self {
            Target::IsingFast | Target::IsingSlow => "ising",
            Target::Warmup => "warmup",
            Target::BegSlow | Target::BegFast => "beg",
        }
    }
}

/// Lists accept `a,b,c`, ranges `lo..hi` and `lo..hi..step` (inclusive).
#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub p1: Option<String>,
    #[arg(long)]
    pub p2: Option<String>,
    /// Scales `a` for the N-dependent mixture weights (Ising)
    #[arg(long)]
    pub a: Option<String>,
    /// Chains for gap-scan, comma separated
    #[arg(long)]
    pub chain: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub chain: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Total steps; scientific notation such as 1e6 is accepted
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub burn_in: Option<String>,
    #[arg(long)]
    pub thinning: Option<u64>,
    /// Stream of the first replica
    #[arg(long)]
    pub stream: Option<u64>,
    /// Independent replicas on consecutive streams
    #[arg(long)]
    pub replicas: Option<u64>,
    /// One of 1, S/N, |S|/N, R/N, S>0
    #[arg(long)]
    pub observable: Option<String>,
    /// unranking or bose-einstein
    #[arg(long)]
    pub sampler: Option<String>,
    /// Record visits per signed class
    #[arg(long)]
    pub histogram: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct KernelArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// lumped (signed classes), projected (unsigned levels) or full
    #[arg(long)]
    pub space: Option<String>,
}

/// Scalar or list entry of a configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Int(v) => v.to_string(),
            Scalar::Num(v) => v.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

/// A list written as a scalar, a range string or an array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ListValue {
    One(Scalar),
    Many(Vec<Scalar>),
}

impl ListValue {
    fn text(&self) -> String {
        match self {
            ListValue::One(s) => s.text(),
            ListValue::Many(v) => v.iter().map(Scalar::text).collect::<Vec<_>>().join(","),
        }
    }
}

/// Top level of a configuration file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub output: Option<OutputSection>,
    pub grid: Option<GridSection>,
    pub model: Option<ModelSection>,
    pub simulate: Option<SimSection>,
    pub kernel: Option<KernelSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub model: Option<String>,
    pub n: Option<ListValue>,
    pub beta: Option<ListValue>,
    pub k: Option<ListValue>,
    pub theta: Option<ListValue>,
    pub epsilon: Option<ListValue>,
    pub p1: Option<ListValue>,
    pub p2: Option<ListValue>,
    pub a: Option<ListValue>,
    pub chains: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub model: Option<String>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub k: Option<f64>,
    pub theta: Option<f64>,
    pub epsilon: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub a: Option<f64>,
    pub chain: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub steps: Option<Scalar>,
    pub burn_in: Option<Scalar>,
    pub thinning: Option<u64>,
    pub stream: Option<u64>,
    pub replicas: Option<u64>,
    pub observable: Option<String>,
    pub sampler: Option<String>,
    pub initial: Option<Vec<i32>>,
    pub histogram: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub space: Option<String>,
}

/// Parses a configuration file, reporting the offending key or line.
pub fn load_config(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
}

fn parse_f64(name: &'static str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::param(name, format!("`{s}` is not a finite number")))
}

/// Expands `a,b`, `lo..hi` and `lo..hi..step` into values.
pub fn parse_list(name: &'static str, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split("..").collect();
        match parts.as_slice() {
            [v] => out.push(parse_f64(name, v)?),
            [lo, hi] | [lo, hi, _] => {
                let lo = parse_f64(name, lo)?;
                let hi = parse_f64(name, hi)?;
                let step = match parts.get(2) {
                    Some(s) => parse_f64(name, s)?,
                    None => 1.0,
                };
                if !(step > 0.0) || hi < lo {
                    return Err(Error::param(name, format!("bad range `{item}`")));
                }
                let count = ((hi - lo) / step * (1.0 + 1e-12) + 1e-9).floor() as usize;
                if count > 1_000_000 {
                    return Err(Error::param(name, format!("range `{item}` is too long")));
                }
                out.extend((0..=count).map(|i| lo + i as f64 * step));
            }
            _ => return Err(Error::param(name, format!("bad range `{item}`"))),
        }
    }
    if out.is_empty() {
        return Err(Error::param(name, "empty list"));
    }
    Ok(out)
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    parse_list("n", text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::param("n", format!("`{v}` is not a nonnegative integer")))
            }
        })
        .collect()
}

fn parse_count(name: &'static str, text: &str) -> Result<u64> {
    let v = parse_f64(name, text)?;
    if v < 0.0 || v.fract() != 0.0 || v > 1e18 {
        return Err(Error::param(name, format!("`{text}` is not a nonnegative integer")));
    }
    Ok(v as u64)
}

fn pick<T: Clone>(flag: &Option<T>, file: Option<&T>) -> Option<T> {
    flag.clone().or_else(|| file.cloned())
}

/// Grid from the `[grid]` section with flag overrides.
pub fn build_grid(args: &GridArgs, file: Option<&GridSection>) -> Result<ScanGrid> {
    let f = file.cloned().unwrap_or_default();
    let model: ModelKind = pick(&args.model, f.model.as_ref())
        .ok_or_else(|| Error::Config("missing `model`".into()))?
        .parse()?;
    let list = |name: &'static str, flag: &Option<String>, v: &Option<ListValue>| -> Result<Option<Vec<f64>>> {
        match flag.clone().or_else(|| v.as_ref().map(ListValue::text)) {
            Some(t) => parse_list(name, &t).map(Some),
            None => Ok(None),
        }
    };
    let n = match args.n.clone().or_else(|| f.n.as_ref().map(ListValue::text)) {
        Some(t) => parse_sizes(&t)?,
        None => return Err(Error::Config("missing `n`".into())),
    };
    let mut g = ScanGrid::new(model, n);
    if let Some(v) = list("beta", &args.beta, &f.beta)? {
        g.beta = v;
    }
    if let Some(v) = list("k", &args.k, &f.k)? {
        g.k = v;
    }
    if let Some(v) = list("theta", &args.theta, &f.theta)? {
        g.theta = v;
    }
    if let Some(v) = list("epsilon", &args.epsilon, &f.epsilon)? {
        g.epsilon = v;
    }
    if let Some(v) = list("p1", &args.p1, &f.p1)? {
        g.p1 = v;
    }
    if let Some(v) = list("p2", &args.p2, &f.p2)? {
        g.p2 = v;
    }
    if let Some(v) = list("a", &args.a, &f.a)? {
        g.a = v;
    }
    let chains: Option<Vec<String>> = match &args.chain {
        Some(t) => Some(t.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
        None => f.chains.clone(),
    };
    if let Some(c) = chains {
        g.chains = c.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    }
    Ok(g)
}

/// Model and chain from the `[model]` section with flag overrides.
pub fn build_model(args: &ModelArgs, file: Option<&ModelSection>) -> Result<(ModelSpec, ChainKind)> {
    let f = file.cloned().unwrap_or_default();
    let kind: ModelKind = pick(&args.model, f.model.as_ref())
        .ok_or_else(|| Error::Config("missing `model`".into()))?
        .parse()?;
    let n = pick(&args.n, f.n.as_ref()).ok_or_else(|| Error::Config("missing `n`".into()))?;
    let beta = pick(&args.beta, f.beta.as_ref()).unwrap_or(1.0);
    let p1 = pick(&args.p1, f.p1.as_ref());
    let p2 = pick(&args.p2, f.p2.as_ref());
    let a = pick(&args.a, f.a.as_ref());
    let mixture = |m: ModelSpec| -> Result<ModelSpec> {
        match (a, p1, p2) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                Err(Error::Config("`a` and `p1`/`p2` are mutually exclusive".into()))
            }
            (Some(a), None, None) => m.with_scaled(a),
            (None, p1, p2) => {
                let (d1, d2) = (m.p1, m.p2);
                m.with_mixture(p1.unwrap_or(d1), p2.unwrap_or(d2))
            }
        }
    };
    let m = match kind {
        ModelKind::Warmup => ModelSpec::warmup(
            n,
            pick(&args.theta, f.theta.as_ref()).unwrap_or(2.0),
            pick(&args.epsilon, f.epsilon.as_ref()).unwrap_or(0.3),
        )?,
        ModelKind::Ising => mixture(ModelSpec::ising(n, beta)?)?,
        ModelKind::Beg => mixture(ModelSpec::beg(n, beta, pick(&args.k, f.k.as_ref()).unwrap_or(1.0))?)?,
    };
    let chain = match pick(&args.chain, f.chain.as_ref()) {
        Some(c) => c.parse()?,
        None if kind == ModelKind::Warmup => ChainKind::SmallWorld,
        None => ChainKind::EquiEnergy,
    };
    Ok((m, chain))
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub seed: u64,
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let output = file.output.clone().unwrap_or_default();
    let out = cli
        .out
        .clone()
        .or(output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let seed = cli.seed.or(output.seed).unwrap_or(0);
    let jobs = cli.jobs.or(output.jobs).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let writer = Writer::new(&out, seed)?;
    pool.install(|| dispatch(&cli.command, &file, &writer))
}

fn dispatch(cmd: &Command, file: &ConfigFile, w: &Writer) -> Result<i32> {
    match cmd {
        Command::GapScan(g) => {
            let grid = build_grid(g, file.grid.as_ref())?;
            grid.validate()?;
            let rep = gap_scan(&grid)?;
            w.report("gap-scan", &grid, &rep)?;
            Ok(EXIT_OK)
        }
        Command::Verify { target, grid } => {
            let mut args = grid.clone();
            if args.model.is_none() && file.grid.as_ref().and_then(|g| g.model.as_ref()).is_none() {
                args.model = Some(target.model().into());
            }
            let grid = build_grid(&args, file.grid.as_ref())?;
            grid.validate()?;
            let rep = match target {
                Target::IsingFast => verify_ising_fast(&grid)?,
                Target::IsingSlow => verify_ising_slow(&grid)?,
                Target::Warmup => verify_warmup(&grid)?,
                Target::BegSlow => verify_beg_slow(&grid)?,
                Target::BegFast => verify_beg_fast(&grid)?,
            };
            let name = format!("verify-{}", target.name());
            w.report(&name, &grid, &rep)?;
            for a in &rep.assertions {
                println!("{} {} [{}]: {}", if a.passed { "pass" } else { "FAIL" }, a.name, a.group, a.detail);
            }
            let defects = rep.defects();
            for d in &defects {
                eprintln!("defect: {d}");
            }
            println!(
                "{}: {} cells, {} audits, {} assertions, {} defects",
                name,
                rep.cells.len(),
                rep.audits.len(),
                rep.assertions.len(),
                defects.len()
            );
            Ok(if defects.is_empty() { EXIT_OK } else { EXIT_DEFECT })
        }
        Command::UnimodalityScan(g) => {
            let grid = build_grid(g, file.grid.as_ref())?;
            let rep = unimodality_scan(&grid)?;
            w.unimodality(&grid, &rep)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(s) => simulate(s, file, w),
        Command::Conductance(k) => conductance(k, file, w),
        Command::ExportKernel(k) => export_kernel(k, file, w),
    }
}

#[derive(Debug, Clone, Serialize)]
struct SimEcho {
    model: ModelSpec,
    chain: ChainKind,
    replicas: u64,
    run: RunConfig,
}

fn simulate(s: &SimArgs, file: &ConfigFile, w: &Writer) -> Result<i32> {
    let (m, chain) = build_model(&s.model, file.model.as_ref())?;
    let f = file.simulate.clone().unwrap_or_default();
    let steps = match s.steps.clone().or_else(|| f.steps.as_ref().map(Scalar::text)) {
        Some(t) => parse_count("steps", &t)?,
        None => return Err(Error::Config("missing `steps`".into())),
    };
    let observable: Observable = match pick(&s.observable, f.observable.as_ref()) {
        Some(o) => o.parse()?,
        None => Observable::AbsMagnetization,
    };
    let mut cfg = RunConfig::new(steps, w.seed, observable);
    if let Some(t) = s.burn_in.clone().or_else(|| f.burn_in.as_ref().map(Scalar::text)) {
        cfg.burn_in = parse_count("burn_in", &t)?;
    }
    cfg.thinning = pick(&s.thinning, f.thinning.as_ref()).unwrap_or(1);
    cfg.stream = pick(&s.stream, f.stream.as_ref()).unwrap_or(0);
    if let Some(x) = pick(&s.sampler, f.sampler.as_ref()) {
        cfg.sampler = x.parse::<OrbitSampler>()?;
    }
    cfg.initial = f.initial.clone();
    cfg.histogram = s.histogram || f.histogram.unwrap_or(false);
    cfg.validate()?;
    observable.check(&m)?;
    let replicas = pick(&s.replicas, f.replicas.as_ref()).unwrap_or(1);
    if replicas == 0 {
        return Err(Error::param("replicas", "need at least one replica"));
    }
    let jobs: Vec<(ModelSpec, ChainKind, RunConfig)> = (0..replicas)
        .map(|i| {
            let mut c = cfg.clone();
            c.stream = cfg.stream + i;
            (m.clone(), chain, c)
        })
        .collect();
    let runs: Vec<RunStats> = run_many(&jobs).into_iter().collect::<Result<_>>()?;
    let echo = SimEcho {
        model: m,
        chain,
        replicas,
        run: cfg,
    };
    w.simulate(&echo, &runs)?;
    for r in &runs {
        println!(
            "stream {}: {} = {:.10} +- {:.3e} (avar {:.6e}, {} samples)",
            r.config.stream,
            r.config.observable,
            r.estimate,
            r.standard_error,
            r.avar,
            r.samples
        );
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Space {
    Lumped,
    Projected,
    Full,
}

fn space_of(k: &KernelArgs, file: &ConfigFile) -> Result<Space> {
    let text = pick(&k.space, file.kernel.as_ref().and_then(|s| s.space.as_ref()));
    match text.as_deref() {
        None | Some("lumped") => Ok(Space::Lumped),
        Some("projected") => Ok(Space::Projected),
        Some("full") => Ok(Space::Full),
        Some(other) => Err(Error::param("space", format!("unknown space `{other}`"))),
    }
}

fn build_kernel(m: &ModelSpec, chain: ChainKind, space: Space) -> Result<FiniteKernel> {
    match (space, m.kind) {
        (Space::Full, _) | (_, ModelKind::Warmup) => full_chain(m, chain),
        (Space::Lumped, _) => signed_lumped_chain(m, chain),
        (Space::Projected, _) => unsigned_projection(&signed_lumped_chain(m, chain)?),
    }
}

#[derive(Debug, Clone, Serialize)]
struct KernelEcho {
    model: ModelSpec,
    chain: ChainKind,
    space: Space,
}

#[derive(Debug, Clone, Serialize)]
struct ConductanceOut {
    states: usize,
    /// `exact` over all subsets, or `interval` over prefixes and suffixes.
    method: &'static str,
    conductance: f64,
    set: Vec<String>,
    one_minus_lambda1: f64,
    gap: f64,
    cheeger_lower: f64,
    cheeger_upper: f64,
    audits: Vec<BoundRecord>,
}

fn conductance(k: &KernelArgs, file: &ConfigFile, w: &Writer) -> Result<i32> {
    let (m, chain) = build_model(&k.model, file.model.as_ref())?;
    let space = space_of(k, file)?;
    let p = build_kernel(&m, chain, space)?;
    let (method, c) = if p.len() <= MAX_EXACT_CONDUCTANCE {
        ("exact", conductance_exact(&p)?)
    } else {
        ("interval", interval_conductance(&p)?)
    };
    let h = c.h.clamp(0.0, 1.0);
    let (lo, hi) = cheeger_interval(h)?;
    let r = gap_report(&p)?;
    let mut audits = vec![BoundRecord::upper("cheeger_upper", true, hi, r.lambda1, 1e-10)];
    // h from a restricted family only bounds the conductance from above
    audits.push(BoundRecord::lower("cheeger_lower", method == "exact", lo, r.lambda1, 1e-10));
    let out = ConductanceOut {
        states: p.len(),
        method,
        conductance: c.h,
        set: c.set.iter().map(|&i| p.labels()[i].to_string()).collect(),
        one_minus_lambda1: r.one_minus_lambda1,
        gap: r.gap,
        cheeger_lower: lo,
        cheeger_upper: hi,
        audits,
    };
    let echo = KernelEcho { model: m, chain, space };
    w.conductance(&echo, &out)?;
    println!(
        "h = {:.10e} ({method}), 1 - lambda1 = {:.10e}, Cheeger interval for lambda1 [{:.6e}, {:.6e}]",
        out.conductance, out.one_minus_lambda1, lo, hi
    );
    let sound = out.audits.iter().all(BoundRecord::is_sound);
    Ok(if sound { EXIT_OK } else { EXIT_DEFECT })
}

fn export_kernel(k: &KernelArgs, file: &ConfigFile, w: &Writer) -> Result<i32> {
    let (m, chain) = build_model(&k.model, file.model.as_ref())?;
    let space = space_of(k, file)?;
    let p = build_kernel(&m, chain, space)?;
    let echo = KernelEcho { model: m, chain, space };
    w.kernel(&echo, &p)?;
    println!("{} states, {} entries", p.len(), p.entry_count());
    Ok(EXIT_OK)
}

/// Formats a float with 17 significant digits.
pub fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn fmt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

fn tag<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// `(name, x label, y label, points)` of one plotted series.
type PlotSeries = (String, String, String, Vec<(f64, f64)>);

/// Serializes every artifact of one invocation.
struct Writer {
    dir: PathBuf,
    seed: u64,
}

impl Writer {
    fn new(dir: &Path, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir.join("plots"))
            .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            seed,
        })
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: self.seed,
        }
    }

    fn write(&self, name: &str, body: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
    }

    fn header<C: Serialize>(&self, command: &str, table: &str, config: &C) -> Result<String> {
        let cfg = serde_json::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
        Ok(format!(
            "# equimix {}\n# command: {command}\n# table: {table} v{CSV_SCHEMA}\n# seed: {}\n# config: {cfg}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed
        ))
    }

    fn csv<C: Serialize>(&self, file: &str, command: &str, config: &C, columns: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(columns).map_err(io)?;
        for r in rows {
            w.write_record(&r).map_err(io)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        let mut out = self.header(command, file.trim_end_matches(".csv"), config)?.into_bytes();
        out.extend(body);
        self.write(file, &out)
    }

    fn json<C: Serialize, R: Serialize>(&self, file: &str, command: &str, config: &C, report: &R) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a, C, R> {
            schema: &'static str,
            provenance: Provenance,
            config: &'a C,
            report: &'a R,
        }
        let doc = Doc {
            schema: REPORT_SCHEMA,
            provenance: self.provenance(command),
            config,
            report,
        };
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        self.write(file, s.as_bytes())
    }

    fn echo<C: Serialize>(&self, command: &str, config: &C) -> Result<()> {
        #[derive(Serialize)]
        struct Echo<'a, C> {
            command: &'a str,
            seed: u64,
            version: &'static str,
            effective: &'a C,
        }
        let e = Echo {
            command,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION"),
            effective: config,
        };
        let text = toml::to_string(&e).map_err(|e| Error::Config(e.to_string()))?;
        self.write(&format!("{command}.config.toml"), text.as_bytes())
    }

    /// One `.dat` file per series plus a gnuplot script drawing them all.
    fn plots(&self, command: &str, series: &[PlotSeries], logscale: &str) -> Result<()> {
        let mut gp = String::new();
        let _ = writeln!(gp, "# gnuplot template for {command}; run from the output directory");
        let _ = writeln!(gp, "set datafile commentschars '#'");
        if !logscale.is_empty() {
            let _ = writeln!(gp, "set logscale {logscale}");
        }
        for (name, x, y, pts) in series {
            let file = format!("plots/{}.dat", slug(name));
            let mut body = format!("# {name}\n# {x} {y}\n");
            for (a, b) in pts {
                let _ = writeln!(body, "{} {}", fmt_f(*a), fmt_f(*b));
            }
            self.write(&file, body.as_bytes())?;
        }
        if !series.is_empty() {
            let items: Vec<String> = series
                .iter()
                .map(|(name, ..)| format!("'plots/{}.dat' using 1:2 with linespoints title '{}'", slug(name), name.replace('\'', "")))
                .collect();
            let _ = writeln!(gp, "plot \\\n  {}", items.join(", \\\n  "));
        }
        self.write(&format!("{command}.gp"), gp.as_bytes())
    }

    fn report(&self, command: &str, grid: &ScanGrid, rep: &BoundReport) -> Result<()> {
        let cells = rep
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.group.clone(),
                    c.model.name().to_string(),
                    c.n.to_string(),
                    fmt_f(c.beta),
                    fmt_f(c.k),
                    fmt_f(c.theta),
                    fmt_f(c.epsilon),
                    fmt_f(c.p1),
                    fmt_f(c.p2),
                    fmt_opt(c.a),
                    c.chain.name().to_string(),
                    c.states.to_string(),
                    fmt_f(c.gap),
                    fmt_f(c.one_minus_lambda1),
                    fmt_f(c.lambda_min),
                    tag(&c.status),
                    fmt_opt(c.bound),
                    fmt_bool(c.holds),
                ]
            })
            .collect();
        self.csv(
            &format!("{command}.csv"),
            command,
            grid,
            &[
                "group", "model", "n", "beta", "k", "theta", "epsilon", "p1", "p2", "a", "chain", "states", "gap",
                "one_minus_lambda1", "lambda_min", "status", "bound", "holds",
            ],
            cells,
        )?;
        let audits = rep
            .audits
            .iter()
            .map(|a| {
                vec![
                    a.group.clone(),
                    a.n.to_string(),
                    a.record.name.clone(),
                    a.record.hypotheses_checked.to_string(),
                    fmt_f(a.record.value),
                    fmt_opt(a.record.compared),
                    fmt_bool(a.record.holds),
                ]
            })
            .collect();
        self.csv(
            &format!("{command}-audits.csv"),
            command,
            grid,
            &["group", "n", "name", "hypotheses_checked", "bound", "compared", "holds"],
            audits,
        )?;
        let fits = rep
            .fits
            .iter()
            .map(|f| {
                let g = |h: fn(&crate::verify::Fit) -> f64| fmt_opt(f.fit.as_ref().map(h));
                vec![
                    f.name.clone(),
                    f.group.clone(),
                    tag(&f.scale),
                    g(|x| x.slope),
                    g(|x| x.slope_lo),
                    g(|x| x.slope_hi),
                    g(|x| x.intercept),
                    f.fit.map_or(0, |x| x.points).to_string(),
                    f.excluded.to_string(),
                ]
            })
            .collect();
        self.csv(
            &format!("{command}-fits.csv"),
            command,
            grid,
            &["name", "group", "scale", "slope", "slope_lo", "slope_hi", "intercept", "points", "excluded"],
            fits,
        )?;
        let asserts = rep
            .assertions
            .iter()
            .map(|a| vec![a.name.clone(), a.group.clone(), a.passed.to_string(), a.detail.clone()])
            .collect();
        self.csv(
            &format!("{command}-assertions.csv"),
            command,
            grid,
            &["name", "group", "passed", "detail"],
            asserts,
        )?;
        self.json(&format!("{command}.json"), command, grid, rep)?;
        self.echo(command, grid)?;
        let series: Vec<_> = rep
            .series
            .iter()
            .map(|s| (format!("{command}_{}", s.name), s.x.clone(), s.y.clone(), s.points.clone()))
            .collect();
        self.plots(command, &series, "xy")
    }

    fn unimodality(&self, grid: &ScanGrid, rep: &UnimodalityReport) -> Result<()> {
        let command = "unimodality-scan";
        let mut rows = Vec::new();
        for p in &rep.profiles {
            for &(x, lq) in &p.profile {
                rows.push(vec![
                    p.model.name().to_string(),
                    p.n.to_string(),
                    fmt_f(p.beta),
                    fmt_opt(p.k),
                    x.to_string(),
                    fmt_f(lq),
                ]);
            }
        }
        self.csv(
            "unimodality-profiles.csv",
            command,
            grid,
            &["model", "n", "beta", "k", "x", "log_q"],
            rows,
        )?;
        let shapes = rep
            .profiles
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    fmt_f(p.beta),
                    fmt_opt(p.k),
                    p.unimodal.to_string(),
                    p.monotone.to_string(),
                    p.peak.to_string(),
                ]
            })
            .collect();
        self.csv(
            "unimodality-shapes.csv",
            command,
            grid,
            &["n", "beta", "k", "unimodal", "monotone", "peak"],
            shapes,
        )?;
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let summary = rep
            .summaries
            .iter()
            .map(|s| {
                vec![
                    fmt_f(s.beta),
                    fmt_opt(s.k),
                    opt(s.n0_unimodal),
                    opt(s.n0_monotone),
                    s.n_max.to_string(),
                ]
            })
            .collect();
        self.csv(
            "unimodality-summary.csv",
            command,
            grid,
            &["beta", "k", "n0_unimodal", "n0_monotone", "n_max"],
            summary,
        )?;
        self.json("unimodality-scan.json", command, grid, rep)?;
        self.echo(command, grid)?;
        let n_max = rep.profiles.iter().map(|p| p.n).max().unwrap_or(0);
        let series: Vec<_> = rep
            .profiles
            .iter()
            .filter(|p| p.n == 15 || p.n == n_max)
            .map(|p| {
                let name = match p.k {
                    Some(k) => format!("profile_{}_N={}_beta={}_K={}", p.model.name(), p.n, p.beta, k),
                    None => format!("profile_{}_N={}_beta={}", p.model.name(), p.n, p.beta),
                };
                let pts = p.profile.iter().map(|&(x, y)| (x as f64, y)).collect();
                (name, "x".to_string(), "log_q".to_string(), pts)
            })
            .collect();
        for s in &rep.summaries {
            println!(
                "beta={}{}: unimodal from N={}, monotone from N={} (scanned to {})",
                s.beta,
                s.k.map(|k| format!(" K={k}")).unwrap_or_default(),
                opt(s.n0_unimodal).if_empty("-"),
                opt(s.n0_monotone).if_empty("-"),
                s.n_max
            );
        }
        self.plots(command, &series, "")
    }

    fn simulate(&self, echo: &SimEcho, runs: &[RunStats]) -> Result<()> {
        let command = "simulate";
        let rate = |c: &crate::sim::ComponentStats| fmt_opt(c.rate());
        let rows = runs
            .iter()
            .map(|r| {
                let cp = cost_profile(r);
                vec![
                    r.config.stream.to_string(),
                    r.samples.to_string(),
                    fmt_f(r.estimate),
                    fmt_f(r.avar),
                    fmt_f(r.avar_se),
                    fmt_f(r.standard_error),
                    r.batch_count.to_string(),
                    r.batch_size.to_string(),
                    rate(&r.local),
                    rate(&r.flip),
                    rate(&r.orbit),
                    r.cost.elementary_ops.to_string(),
                    fmt_f(cp.ops_per_site_step),
                ]
            })
            .collect();
        self.csv(
            "simulate.csv",
            command,
            echo,
            &[
                "stream", "samples", "estimate", "avar", "avar_se", "standard_error", "batch_count", "batch_size",
                "local_rate", "flip_rate", "orbit_rate", "elementary_ops", "ops_per_site_step",
            ],
            rows,
        )?;
        if echo.run.histogram {
            let mut rows = Vec::new();
            for r in runs {
                for c in r.histogram.iter().flatten() {
                    rows.push(vec![
                        r.config.stream.to_string(),
                        c.class.clone(),
                        c.s.to_string(),
                        c.r.to_string(),
                        c.count.to_string(),
                    ]);
                }
            }
            self.csv("simulate-histogram.csv", command, echo, &["stream", "class", "s", "r", "count"], rows)?;
        }
        self.json("simulate.json", command, echo, &runs)?;
        self.echo(command, echo)
    }

    fn conductance(&self, echo: &KernelEcho, out: &ConductanceOut) -> Result<()> {
        let command = "conductance";
        self.csv(
            "conductance.csv",
            command,
            echo,
            &["states", "method", "conductance", "one_minus_lambda1", "gap", "cheeger_lower", "cheeger_upper"],
            vec![vec![
                out.states.to_string(),
                out.method.to_string(),
                fmt_f(out.conductance),
                fmt_f(out.one_minus_lambda1),
                fmt_f(out.gap),
                fmt_f(out.cheeger_lower),
                fmt_f(out.cheeger_upper),
            ]],
        )?;
        self.json("conductance.json", command, echo, out)?;
        self.echo(command, echo)
    }

    fn kernel(&self, echo: &KernelEcho, p: &FiniteKernel) -> Result<()> {
        let command = "export-kernel";
        let labels: Vec<String> = p.labels().iter().map(|l| l.to_string()).collect();
        let mut rows = Vec::new();
        for (i, from) in labels.iter().enumerate() {
            for &(j, v) in p.row(i) {
                rows.push(vec![i.to_string(), from.clone(), j.to_string(), labels[j].clone(), fmt_f(v)]);
            }
        }
        self.csv("kernel.csv", command, echo, &["from", "from_label", "to", "to_label", "probability"], rows)?;
        let pi = p.stationary();
        let states = labels
            .iter()
            .zip(&pi)
            .enumerate()
            .map(|(i, (l, v))| vec![i.to_string(), l.clone(), fmt_f(*v), fmt_f(p.log_weights()[i])])
            .collect();
        self.csv("kernel-states.csv", command, echo, &["index", "label", "stationary", "log_weight"], states)?;
        let mut text = self.header(command, "kernel", echo)?;
        text.push_str(&p.export_text());
        self.write("kernel.txt", text.as_bytes())?;
        let summary = summarize(p)?;
        self.json("export-kernel.json", command, echo, &summary)?;
        self.echo(command, echo)
    }
}

trait IfEmpty {
    fn if_empty(self, alt: &str) -> String;
}

impl IfEmpty for String {
    fn if_empty(self, alt: &str) -> String {
        if self.is_empty() {
            alt.to_string()
        } else {
            self
        }
    }
}
