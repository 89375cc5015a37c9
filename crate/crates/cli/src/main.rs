//! `lorpe`: fit densities from data files, tune `(h, M)`, dump effective
//! kernels and run simulation studies.
//!
//! Exit codes: 0 success, 1 bad flags or I/O, 2 unreadable data, 3 estimator error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lorpe::baselines::{kde_effective_estimate, osde_estimate, select_osde_terms, OsdeConfig, UnitMap, OSDE_GRID, OSDE_J_MAX};
use lorpe::lorpe::{default_grid, effective_kernel, estimate_on_grid, DensityEstimate, LorpeConfig, Support, DEFAULT_GRID_POINTS};
use lorpe::quadrature::linspace;
use lorpe::simlab::{
    alpha_sweep, mise_study, oracle_h_center, oracle_h_grid, oracle_search, CsvRow, DistributionSpec, EstimatorSpec,
    OracleKind, StudyContext,
};
use lorpe::tuning::{
    default_h_grid, default_m_grid, effective_kernel_moments, normal_reference_bandwidth, plug_in, select_by_cv, CvPolicy,
    CvResult, CvTarget, Criterion, DegreeRule, FitPoint, PluginResult, DEFAULT_ALPHA, DEFAULT_R_RANGE,
};
use lorpe::{BoundaryMode, Kernel};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("line {line}: cannot read `{text}` as a finite number")]
    Parse { line: usize, text: String },
    #[error("input contains no data")]
    Empty,
    #[error(transparent)]
    Estimator(#[from] lorpe::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Output(_) => 1,
            CliError::Parse { .. } | CliError::Empty => 2,
            CliError::Estimator(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "lorpe", version, about = "Local orthogonal polynomial expansion density estimation")]
struct Cli {
    /// Worker threads; falls back to LORPE_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a density from a data file and write `grid,value`.
    Fit(FitArgs),
    /// Write the plug-in or cross-validation score table.
    Tune(FitArgs),
    /// Write the effective kernel `u,keff` or the polynomial table at one fit point.
    Effkernel(EffkernelArgs),
    /// Monte-Carlo MISE of one estimator.
    Simulate(SimulateArgs),
    /// MISE surface over an `(h, M)` grid.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitEstimator {
    Lorpe,
    Kde,
    Osde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Plugin,
    Lscv,
    Rlcv,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Clip,
    Mirror,
}

impl From<ModeArg> for BoundaryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Clip => BoundaryMode::ClipPolys,
            ModeArg::Mirror => BoundaryMode::KernelMirror,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    /// `M = r + 1` (even `r`) or `r + 2` (odd `r`).
    Literal,
    /// `M = r - 1`.
    KernelOrder,
    /// `M = r - 2`.
    EvenDegree,
}

impl From<RuleArg> for DegreeRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Literal => DegreeRule::Literal,
            RuleArg::KernelOrder => DegreeRule::KernelOrder,
            RuleArg::EvenDegree => DegreeRule::EvenDegree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimEstimator {
    /// LOrPE at fixed `--h` and `--M`.
    Lorpe,
    /// LOrPE with plug-in `(h, M)`.
    LorpePlugin,
    /// LOrPE tuned by LSCV.
    Lscv,
    /// LOrPE tuned by RLCV.
    Rlcv,
    /// KDE at fixed `--h`, effective kernel of degree `--M` (default 0).
    Kde,
    /// Plain KDE with the order-2 plug-in bandwidth.
    KdePlugin,
    Osde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleEstimator {
    Lorpe,
    Kde,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Plain-text data file, one number per line; blank lines and `#` comments are skipped.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FitEstimator::Lorpe)]
    estimator: FitEstimator,
    /// Tuning method; `fixed` when both `--h` and `--M` are given, `plugin` otherwise.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Bandwidth; overrides the plug-in value, centres the CV grid.
    #[arg(long)]
    h: Option<f64>,
    /// Degree (may be fractional).
    #[arg(long = "M")]
    m: Option<f64>,
    /// RLCV regularization exponent.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value = "quadweight", value_parser = parse_kernel)]
    kernel: Kernel,
    /// `lo,hi`; `inf` allowed. Defaults to the data range.
    #[arg(long, value_parser = parse_support, allow_hyphen_values = true)]
    support: Option<Support>,
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Comma-separated CV bandwidths.
    #[arg(long, value_delimiter = ',')]
    h_grid: Vec<f64>,
    /// Comma-separated CV degrees.
    #[arg(long, value_delimiter = ',')]
    m_grid: Vec<f64>,
    /// Evaluate leave-one-out values at `x_i` instead of the nearest grid point.
    #[arg(long)]
    cv_exact_fitpoint: bool,
    /// Score the clipped, renormalized estimate instead of the raw expansion.
    #[arg(long)]
    cv_normalized: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Clip)]
    boundary_mode: ModeArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Literal)]
    degree_rule: RuleArg,
    /// KDE: reflect the data about the lower support end.
    #[arg(long)]
    mirror: bool,
    /// OSDE: largest number of terms scanned.
    #[arg(long, default_value_t = OSDE_J_MAX)]
    j_max: usize,
}

#[derive(Args, Debug)]
struct EffkernelArgs {
    #[arg(long, default_value = "quadweight", value_parser = parse_kernel)]
    kernel: Kernel,
    #[arg(long = "M", default_value_t = 0.0)]
    m: f64,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    xfit: f64,
    /// `lo,hi`; the real line by default.
    #[arg(long, value_parser = parse_support, allow_hyphen_values = true)]
    support: Option<Support>,
    #[arg(long, value_enum, default_value_t = ModeArg::Clip)]
    boundary_mode: ModeArg,
    #[arg(long, default_value_t = 401)]
    points: usize,
    /// Write `y,weight,P0,...` instead of the effective kernel.
    #[arg(long)]
    polys: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// beta44, normal, mix1, exp1, truncnorm0, truncnormm1, mix2, t:df:lo:hi.
    #[arg(long, value_parser = parse_dist)]
    dist: DistributionSpec,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// 1000 replications.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value_t = SimEstimator::Lorpe)]
    estimator: SimEstimator,
    #[arg(long = "M")]
    m: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    /// KDE: reflect the data about the lower support end.
    #[arg(long)]
    mirror: bool,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// RLCV sweep over comma-separated alphas; the `se` column is then the robust standard error.
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "quadweight", value_parser = parse_kernel)]
    kernel: Kernel,
    #[arg(long, value_enum, default_value_t = ModeArg::Clip)]
    boundary_mode: ModeArg,
    #[arg(long, value_enum, default_value_t = RuleArg::Literal)]
    degree_rule: RuleArg,
    #[arg(long)]
    cv_exact_fitpoint: bool,
    #[arg(long)]
    cv_normalized: bool,
    #[arg(long, default_value_t = OSDE_J_MAX)]
    j_max: usize,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, value_parser = parse_dist)]
    dist: DistributionSpec,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, value_enum, default_value_t = OracleEstimator::Lorpe)]
    estimator: OracleEstimator,
    /// KDE: reflect the data about the lower support end.
    #[arg(long)]
    mirror: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Clip)]
    boundary_mode: ModeArg,
    #[arg(long, default_value = "quadweight", value_parser = parse_kernel)]
    kernel: Kernel,
    /// Centre of the bandwidth grid, which spans `[h/8, 8h]`.
    #[arg(long)]
    h_center: Option<f64>,
    #[arg(long, default_value_t = 30)]
    h_points: usize,
    #[arg(long, default_value_t = 20)]
    m_max: usize,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    /// 1000 replications.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_kernel(s: &str) -> Result<Kernel, String> {
    Kernel::from_str(s).map_err(|e| e.to_string())
}

fn parse_dist(s: &str) -> Result<DistributionSpec, String> {
    DistributionSpec::from_str(s).map_err(|e| e.to_string())
}

fn parse_support(s: &str) -> Result<Support, String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower end `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper end `{hi}`"))?;
    Support::new(lo, hi).map_err(|e| e.to_string())
}

/// Reads one finite number per line.
fn read_sample(path: &Path) -> CliResult<Vec<f64>> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input file `{}` not found", path.display())));
    }
    let text = fs::read_to_string(path)?;
    let mut sample = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => sample.push(v),
            _ => return Err(CliError::Parse { line: i + 1, text: t.to_string() }),
        }
    }
    if sample.is_empty() {
        return Err(CliError::Empty);
    }
    Ok(sample)
}

fn data_range(sample: &[f64]) -> (f64, f64) {
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// A table with named columns, written as CSV or as a JSON array of objects.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

struct Sink {
    format: Format,
    out: Box<dyn Write>,
}

impl Sink {
    fn open(format: Format, path: Option<&Path>) -> CliResult<Self> {
        let out: Box<dyn Write> = match path {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { format, out })
    }

    fn records<T: Serialize>(mut self, rows: &[T]) -> CliResult<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut self.out);
                for r in rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut self.out, rows)?;
                writeln!(self.out)?;
            }
        }
        self.out.flush()?;
        Ok(())
    }

    fn table(mut self, t: &Table) -> CliResult<()> {
        match self.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(&mut self.out);
                w.write_record(&t.headers)?;
                for r in &t.rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            Format::Json => {
                let objects: Vec<serde_json::Map<String, serde_json::Value>> = t
                    .rows
                    .iter()
                    .map(|r| t.headers.iter().cloned().zip(r.iter().map(|&v| serde_json::json!(v))).collect())
                    .collect();
                serde_json::to_writer_pretty(&mut self.out, &objects)?;
                writeln!(self.out)?;
            }
        }
        self.out.flush()?;
        Ok(())
    }
}

fn cv_policy(exact: bool, normalized: bool) -> CvPolicy {
    CvPolicy::new(
        if exact { FitPoint::Exact } else { FitPoint::NearestGrid },
        if normalized { CvTarget::Normalized } else { CvTarget::Raw },
    )
}

/// Outcome of LOrPE tuning for `fit` and `tune`.
struct LorpeChoice {
    cfg: LorpeConfig,
    grid: Vec<f64>,
    method: Method,
    plugin: Option<PluginResult>,
    cv: Option<CvResult>,
}

fn resolve_method(args: &FitArgs) -> Method {
    args.method.unwrap_or(if args.h.is_some() && args.m.is_some() { Method::Fixed } else { Method::Plugin })
}

fn choose_lorpe(sample: &[f64], args: &FitArgs) -> CliResult<LorpeChoice> {
    let method = resolve_method(args);
    let rule = DegreeRule::from(args.degree_rule);
    let plugin = match method {
        Method::Fixed => None,
        Method::Plugin => Some(plug_in(sample, args.kernel, &DEFAULT_R_RANGE, rule)?),
        Method::Lscv | Method::Rlcv if args.h.is_none() && args.h_grid.is_empty() => {
            Some(plug_in(sample, args.kernel, &DEFAULT_R_RANGE, rule)?)
        }
        _ => None,
    };
    let support = match args.support {
        Some(s) => s,
        None => {
            let (lo, hi) = data_range(sample);
            Support::new(lo, hi)?
        }
    };
    let mode = BoundaryMode::from(args.boundary_mode);
    let template = |h: f64, degree: f64| -> CliResult<LorpeConfig> {
        Ok(LorpeConfig::new(h, degree, args.kernel, support)?.with_mode(mode))
    };
    match method {
        Method::Fixed | Method::Plugin => {
            let (h, m) = match (&plugin, args.h, args.m) {
                (_, Some(h), Some(m)) => (h, m),
                (Some(p), h, m) => (h.unwrap_or(p.h_hat), m.unwrap_or(p.m_hat as f64)),
                (None, _, _) => return Err(CliError::Usage("--method fixed needs --h and --M".into())),
            };
            let cfg = template(h, m)?;
            let grid = default_grid(sample, &cfg, args.grid_points);
            Ok(LorpeChoice { cfg, grid, method, plugin, cv: None })
        }
        Method::Lscv | Method::Rlcv => {
            let criterion = if method == Method::Lscv { Criterion::Lscv } else { Criterion::Rlcv { alpha: args.alpha } };
            let h_grid = if args.h_grid.is_empty() {
                default_h_grid(args.h.or(plugin.as_ref().map(|p| p.h_hat)).expect("centre available"))
            } else {
                args.h_grid.clone()
            };
            let m_grid = if args.m_grid.is_empty() { default_m_grid() } else { args.m_grid.clone() };
            let h_max = h_grid.iter().copied().fold(0.0, f64::max);
            let base = template(h_max, 0.0)?;
            let grid = default_grid(sample, &base, args.grid_points);
            let policy = cv_policy(args.cv_exact_fitpoint, args.cv_normalized);
            let cv = select_by_cv(sample, &base, &grid, &h_grid, &m_grid, criterion, policy)?;
            let cfg = template(cv.best_h, cv.best_m)?;
            Ok(LorpeChoice { cfg, grid, method, plugin, cv: Some(cv) })
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Plugin => "plugin",
        Method::Lscv => "lscv",
        Method::Rlcv => "rlcv",
        Method::Fixed => "fixed",
    }
}

#[derive(Serialize)]
struct GridRow {
    grid: f64,
    value: f64,
}

fn density_rows(est: &DensityEstimate) -> Vec<GridRow> {
    est.grid.iter().zip(&est.value).map(|(&grid, &value)| GridRow { grid, value }).collect()
}

fn cmd_fit(args: &FitArgs, sink: Sink) -> CliResult<()> {
    let sample = read_sample(&args.input)?;
    let est = match args.estimator {
        FitEstimator::Lorpe => {
            let choice = choose_lorpe(&sample, args)?;
            let est = estimate_on_grid(&sample, &choice.cfg, &choice.grid)?;
            eprintln!(
                "estimator=lorpe method={} h={} M={}",
                method_name(choice.method),
                choice.cfg.h,
                choice.cfg.degree
            );
            est
        }
        FitEstimator::Kde => {
            let (h, method) = match args.h {
                Some(h) => (h, Method::Fixed),
                None => (plug_in(&sample, args.kernel, &[2], DegreeRule::KernelOrder)?.h_hat, Method::Plugin),
            };
            let degree = args.m.unwrap_or(0.0);
            let (lo, hi) = data_range(&sample);
            let pad = args.kernel.effective_half_width() * h;
            let (glo, ghi) = match args.support {
                Some(s) => (
                    if s.lo.is_finite() { s.lo } else { lo - pad },
                    if s.hi.is_finite() { s.hi } else { hi + pad },
                ),
                None => (if args.mirror { lo } else { lo - pad }, hi + pad),
            };
            let mirror = args.mirror.then_some(glo);
            let grid = linspace(glo, ghi, args.grid_points);
            let est = kde_effective_estimate(&sample, h, args.kernel, degree, mirror, &grid)?;
            eprintln!("estimator=kde method={} h={h} M={degree}", method_name(method));
            est
        }
        FitEstimator::Osde => {
            let terms = select_osde_terms(&sample, args.j_max)?;
            let (lo, hi) = match args.support {
                Some(s) if s.lo.is_finite() && s.hi.is_finite() => (s.lo, s.hi),
                _ => UnitMap::from_sample(&sample)?.support(),
            };
            let grid = linspace(lo, hi, args.grid_points);
            let est = osde_estimate(&sample, &OsdeConfig { terms, grid_size: OSDE_GRID }, Some(&grid))?;
            eprintln!("estimator=osde method=threshold terms={terms}");
            est
        }
    };
    sink.records(&density_rows(&est))
}

fn cmd_tune(args: &FitArgs, sink: Sink) -> CliResult<()> {
    if args.estimator != FitEstimator::Lorpe {
        return Err(CliError::Usage("tune supports --estimator lorpe only".into()));
    }
    let sample = read_sample(&args.input)?;
    let choice = match resolve_method(args) {
        Method::Fixed => return Err(CliError::Usage("tune needs --method plugin, lscv or rlcv".into())),
        _ => choose_lorpe(&sample, args)?,
    };
    eprintln!("estimator=lorpe method={} h={} M={}", method_name(choice.method), choice.cfg.h, choice.cfg.degree);
    if let Some(cv) = &choice.cv {
        let table = Table {
            headers: vec!["h".into(), "M".into(), "score".into()],
            rows: cv.scores.iter().map(|&(h, m, s)| vec![h, m, s]).collect(),
        };
        return sink.table(&table);
    }
    let p = choice.plugin.expect("plug-in result present");
    let rule = DegreeRule::from(args.degree_rule);
    let rows = p
        .amise_curve
        .iter()
        .map(|&(r, amise)| {
            let (mu, rough) = effective_kernel_moments(args.kernel, r)?;
            let h = normal_reference_bandwidth(r, p.sigma, sample.len(), mu, rough);
            Ok(vec![r as f64, amise, h, rule.degree(r) as f64])
        })
        .collect::<CliResult<Vec<_>>>()?;
    sink.table(&Table { headers: vec!["r".into(), "amise".into(), "h".into(), "M".into()], rows })
}

fn cmd_effkernel(args: &EffkernelArgs, sink: Sink) -> CliResult<()> {
    if args.points < 2 {
        return Err(CliError::Usage("--points must be >= 2".into()));
    }
    let support = args.support.unwrap_or_else(Support::real_line);
    let cfg = LorpeConfig::new(args.h, args.m, args.kernel, support)?.with_mode(args.boundary_mode.into());
    let taper = cfg.taper();
    let sys = cfg.system(args.xfit, taper.max_degree())?;
    // the weight vanishes outside `[lo, hi]` in `y = -u`
    let (lo, hi) = sys.effective_interval();
    if args.polys {
        let m = taper.max_degree() + 1;
        let mut headers = vec!["y".to_string(), "weight".to_string()];
        headers.extend((0..m).map(|k| format!("P{k}")));
        let mut buf = vec![0.0; m];
        let rows = linspace(lo, hi, args.points)
            .iter()
            .map(|&y| {
                sys.eval_all(y, &mut buf);
                let mut row = vec![y, sys.weight(y)];
                row.extend_from_slice(&buf);
                row
            })
            .collect();
        return sink.table(&Table { headers, rows });
    }
    let u = linspace(-hi, -lo, args.points);
    let keff = effective_kernel(&cfg, args.xfit, &u)?;
    let rows = u.iter().zip(&keff).map(|(&u, &k)| vec![u, k]).collect();
    sink.table(&Table { headers: vec!["u".into(), "keff".into()], rows })
}

fn need(v: Option<f64>, flag: &str, what: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::Usage(format!("{what} needs {flag}")))
}

fn cmd_simulate(args: &SimulateArgs, sink: Sink) -> CliResult<()> {
    let reps = if args.full { 1000 } else { args.reps };
    let ctx = StudyContext::new(args.dist, args.n);
    let policy = cv_policy(args.cv_exact_fitpoint, args.cv_normalized);
    if !args.alphas.is_empty() {
        let points = alpha_sweep(&ctx, args.kernel, &args.alphas, reps, args.seed, policy)?;
        let rows: Vec<CsvRow> = points
            .iter()
            .map(|p| CsvRow { se: p.robust_se, ..CsvRow::from(&p.result) })
            .collect();
        return sink.records(&rows);
    }
    let kernel = args.kernel;
    let est = match args.estimator {
        SimEstimator::Lorpe => EstimatorSpec::Lorpe {
            kernel,
            h: need(args.h, "--h", "lorpe")?,
            degree: need(args.m, "--M", "lorpe")?,
            mode: args.boundary_mode.into(),
        },
        SimEstimator::LorpePlugin => EstimatorSpec::LorpePlugin { kernel, rule: args.degree_rule.into() },
        SimEstimator::Lscv => EstimatorSpec::LorpeCv { kernel, criterion: Criterion::Lscv, policy },
        SimEstimator::Rlcv => EstimatorSpec::LorpeCv { kernel, criterion: Criterion::Rlcv { alpha: args.alpha }, policy },
        SimEstimator::Kde => EstimatorSpec::Kde {
            kernel,
            h: need(args.h, "--h", "kde")?,
            degree: args.m.unwrap_or(0.0),
            mirror: args.mirror,
        },
        SimEstimator::KdePlugin => EstimatorSpec::KdePlugin { kernel, mirror: args.mirror },
        SimEstimator::Osde => EstimatorSpec::Osde { j_max: args.j_max },
    };
    let result = mise_study(&ctx, &est, reps, args.seed)?;
    if result.dropped > 0 {
        eprintln!("dropped {} of {} replications", result.dropped, reps);
    }
    sink.records(&[CsvRow::from(&result)])
}

fn cmd_oracle(args: &OracleArgs, sink: Sink) -> CliResult<()> {
    if args.h_points == 0 {
        return Err(CliError::Usage("--h-points must be >= 1".into()));
    }
    let reps = if args.full { 1000 } else { args.reps };
    let kind = match args.estimator {
        OracleEstimator::Lorpe => OracleKind::Lorpe { kernel: args.kernel, mode: args.boundary_mode.into() },
        OracleEstimator::Kde => OracleKind::Kde { kernel: args.kernel, mirror: args.mirror },
    };
    let ctx = StudyContext::new(args.dist, args.n);
    let center = args.h_center.unwrap_or_else(|| oracle_h_center(&args.dist, args.n, &kind));
    let h_grid = oracle_h_grid(center, args.h_points);
    let m_grid: Vec<f64> = (0..=args.m_max).map(|m| m as f64).collect();
    let result = oracle_search(&ctx, kind, &h_grid, &m_grid, reps, args.seed)?;
    eprintln!(
        "best M={} h={} log10_mise={:.4} se={:.4}",
        result.best.degree, result.best.h, result.best.log10_mise, result.best.se
    );
    sink.records(&result.rows())
}

fn configure_threads(flag: Option<usize>) -> CliResult<()> {
    let threads = match flag {
        Some(t) => Some(t),
        None => match std::env::var("LORPE_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("LORPE_THREADS: bad value `{v}`")))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("thread count must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    let sink = Sink::open(cli.format, cli.output.as_deref())?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, sink),
        Command::Tune(a) => cmd_tune(a, sink),
        Command::Effkernel(a) => cmd_effkernel(a, sink),
        Command::Simulate(a) => cmd_simulate(a, sink),
        Command::Oracle(a) => cmd_oracle(a, sink),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.exit_code() == 0 { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
