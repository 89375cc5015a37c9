//! Test distributions, ISE/MISE estimation, oracle grid searches and tuning
//! studies.
//!
//! Every replication draws from its own ChaCha8 stream `(seed, rep)`, so a
//! study is a deterministic function of its arguments whatever the thread
//! count, and different estimators or grid cells see the same samples.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::baselines::{
    kde_effective_raw, kde_raw, KdeFit, osde_estimate, select_osde_terms_on, OsdeConfig, OSDE_GRID,
};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lorpe::{degree_cap, DensityEstimate, FitterBank, LorpeConfig, Support, Taper};
use crate::orthopoly::BoundaryMode;
use crate::quadrature::{linspace, logspace, trapezoid};
use crate::tuning::{
    lattice_h_grid, plug_in, select_by_cv_in, CvPolicy, Criterion, DegreeRule, DEFAULT_R_RANGE,
};

/// Grid points used for estimation and ISE in simulations.
pub const SIM_GRID: usize = 1024;
/// Tail probability cut from infinite support ends when integrating ISE.
pub const ISE_TAIL: f64 = 1e-4;
/// Anchor of the bandwidth lattice used by CV inside simulations.
pub const LATTICE_ANCHOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DistributionSpec {
    /// `35/32 (1 - x^2)^3` on [-1, 1].
    Beta44,
    StdNormal,
    /// `3/4 N(0, 1) + 1/4 N(3/2, 1/9)`.
    NormalMix1,
    Exp1,
    /// `N(0, 1)` on `[0, inf)`.
    TruncNormal0,
    /// `N(0, 1)` on `[-1, inf)`.
    TruncNormalM1,
    /// `2/3 N(0, 1) + 1/3 N(0, 1/100)`.
    NormalMix2,
    /// Student t with `df` degrees of freedom truncated to `[lo, hi]`.
    TruncT { df: f64, lo: f64, hi: f64 },
}

fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn big_phi(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

impl DistributionSpec {
    pub fn all_table() -> Vec<DistributionSpec> {
        use DistributionSpec::*;
        vec![Beta44, StdNormal, NormalMix1, Exp1, TruncNormal0, TruncNormalM1, NormalMix2]
    }

    pub fn name(&self) -> String {
        match self {
            DistributionSpec::Beta44 => "beta44".into(),
            DistributionSpec::StdNormal => "normal".into(),
            DistributionSpec::NormalMix1 => "mix1".into(),
            DistributionSpec::Exp1 => "exp1".into(),
            DistributionSpec::TruncNormal0 => "truncnorm0".into(),
            DistributionSpec::TruncNormalM1 => "truncnormm1".into(),
            DistributionSpec::NormalMix2 => "mix2".into(),
            DistributionSpec::TruncT { df, lo, hi } => {
                if *lo == -1.0 && *hi == 2.0 {
                    format!("t{df}")
                } else {
                    format!("t:{df}:{lo}:{hi}")
                }
            }
        }
    }

    pub fn support(&self) -> Support {
        let (lo, hi) = match *self {
            DistributionSpec::Beta44 => (-1.0, 1.0),
            DistributionSpec::Exp1 | DistributionSpec::TruncNormal0 => (0.0, f64::INFINITY),
            DistributionSpec::TruncNormalM1 => (-1.0, f64::INFINITY),
            DistributionSpec::TruncT { lo, hi, .. } => (lo, hi),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        Support { lo, hi }
    }

    /// Finite support end used for KDE data mirroring, if any.
    pub fn mirror_point(&self) -> Option<f64> {
        let s = self.support();
        match (s.lo.is_finite(), s.hi.is_finite()) {
            (true, false) => Some(s.lo),
            (false, true) => Some(s.hi),
            _ => None,
        }
    }

    fn t_dist(df: f64) -> StudentsT {
        StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom")
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.support();
        if x < s.lo || x > s.hi {
            return 0.0;
        }
        match *self {
            DistributionSpec::Beta44 => 35.0 / 32.0 * (1.0 - x * x).powi(3),
            DistributionSpec::StdNormal => phi(x),
            DistributionSpec::NormalMix1 => 0.75 * phi(x) + 0.25 * 3.0 * phi(3.0 * (x - 1.5)),
            DistributionSpec::Exp1 => (-x).exp(),
            DistributionSpec::TruncNormal0 => 2.0 * phi(x),
            DistributionSpec::TruncNormalM1 => phi(x) / big_phi(1.0),
            DistributionSpec::NormalMix2 => 2.0 / 3.0 * phi(x) + 1.0 / 3.0 * 10.0 * phi(10.0 * x),
            DistributionSpec::TruncT { df, lo, hi } => {
                use statrs::distribution::Continuous;
                let t = Self::t_dist(df);
                t.pdf(x) / (t.cdf(hi) - t.cdf(lo))
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.support();
        if x <= s.lo {
            return 0.0;
        }
        if x >= s.hi {
            return 1.0;
        }
        match *self {
            DistributionSpec::Beta44 => {
                0.5 + 35.0 / 32.0 * (x - x.powi(3) + 0.6 * x.powi(5) - x.powi(7) / 7.0)
            }
            DistributionSpec::StdNormal => big_phi(x),
            DistributionSpec::NormalMix1 => 0.75 * big_phi(x) + 0.25 * big_phi(3.0 * (x - 1.5)),
            DistributionSpec::Exp1 => -(-x).exp_m1(),
            DistributionSpec::TruncNormal0 => 2.0 * big_phi(x) - 1.0,
            DistributionSpec::TruncNormalM1 => (big_phi(x) - big_phi(-1.0)) / big_phi(1.0),
            DistributionSpec::NormalMix2 => 2.0 / 3.0 * big_phi(x) + 1.0 / 3.0 * big_phi(10.0 * x),
            DistributionSpec::TruncT { df, lo, hi } => {
                let t = Self::t_dist(df);
                (t.cdf(x) - t.cdf(lo)) / (t.cdf(hi) - t.cdf(lo))
            }
        }
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let s = self.support();
        let mut lo = if s.lo.is_finite() { s.lo } else { -1.0 };
        let mut hi = if s.hi.is_finite() { s.hi } else { 1.0 };
        while self.cdf(lo) > p {
            lo -= 2.0 * (hi - lo);
        }
        while self.cdf(hi) < p {
            hi += 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// ISE integration domain: the support, with an infinite end replaced by
    /// the `ISE_TAIL` (or `1 - ISE_TAIL`) quantile pushed out by one unit.
    pub fn ise_domain(&self) -> (f64, f64) {
        let s = self.support();
        let lo = if s.lo.is_finite() { s.lo } else { self.quantile(ISE_TAIL) - 1.0 };
        let hi = if s.hi.is_finite() { s.hi } else { self.quantile(1.0 - ISE_TAIL) + 1.0 };
        (lo, hi)
    }

    /// Default simulation grid over [`Self::ise_domain`].
    pub fn sim_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.ise_domain();
        linspace(lo, hi, SIM_GRID)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = |rng: &mut R| -> f64 { StandardNormal.sample(rng) };
        match *self {
            DistributionSpec::Beta44 => {
                let b: f64 = Beta::new(4.0, 4.0).expect("valid shape").sample(rng);
                2.0 * b - 1.0
            }
            DistributionSpec::StdNormal => normal(rng),
            DistributionSpec::NormalMix1 => {
                if rng.random::<f64>() < 0.75 {
                    normal(rng)
                } else {
                    1.5 + normal(rng) / 3.0
                }
            }
            DistributionSpec::Exp1 => Exp1.sample(rng),
            DistributionSpec::TruncNormal0 => normal(rng).abs(),
            DistributionSpec::TruncNormalM1 => loop {
                let z = normal(rng);
                if z >= -1.0 {
                    break z;
                }
            },
            DistributionSpec::NormalMix2 => {
                if rng.random::<f64>() < 2.0 / 3.0 {
                    normal(rng)
                } else {
                    normal(rng) / 10.0
                }
            }
            DistributionSpec::TruncT { df, lo, hi } => {
                let t = StudentT::new(df).expect("positive degrees of freedom");
                loop {
                    let x: f64 = t.sample(rng);
                    if x >= lo && x <= hi {
                        break x;
                    }
                }
            }
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let spec = match lower.as_str() {
            "beta44" => DistributionSpec::Beta44,
            "normal" | "stdnormal" => DistributionSpec::StdNormal,
            "mix1" | "normalmix1" => DistributionSpec::NormalMix1,
            "exp1" | "exponential" => DistributionSpec::Exp1,
            "truncnorm0" => DistributionSpec::TruncNormal0,
            "truncnormm1" | "truncnorm-1" => DistributionSpec::TruncNormalM1,
            "mix2" | "normalmix2" => DistributionSpec::NormalMix2,
            other => {
                let bad = || Error::UnknownDistribution(s.to_string());
                if let Some(rest) = other.strip_prefix("t:") {
                    let parts: Vec<f64> = rest
                        .split(':')
                        .map(|p| p.parse::<f64>().map_err(|_| bad()))
                        .collect::<Result<_>>()?;
                    match parts[..] {
                        [df, lo, hi] if df > 0.0 && lo < hi => DistributionSpec::TruncT { df, lo, hi },
                        _ => return Err(bad()),
                    }
                } else if let Some(df) = other.strip_prefix('t').and_then(|d| d.parse::<f64>().ok()) {
                    if !(df > 0.0) {
                        return Err(bad());
                    }
                    DistributionSpec::TruncT { df, lo: -1.0, hi: 2.0 }
                } else {
                    return Err(bad());
                }
            }
        };
        Ok(spec)
    }
}

/// RNG for replication `rep` of a study seeded with `seed`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// `n` draws from stream 0 of `seed`.
pub fn sample_dist(spec: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
    sample_rep(spec, n, seed, 0)
}

/// `n` draws for replication `rep`.
pub fn sample_rep(spec: &DistributionSpec, n: usize, seed: u64, rep: u64) -> Vec<f64> {
    let mut rng = rep_rng(seed, rep);
    (0..n).map(|_| spec.draw(&mut rng)).collect()
}

/// Trapezoid ISE of an estimate against the true density on its own grid.
pub fn ise(est: &DensityEstimate, spec: &DistributionSpec) -> f64 {
    ise_values(&est.grid, &est.value, spec)
}

pub fn ise_values(grid: &[f64], values: &[f64], spec: &DistributionSpec) -> f64 {
    let sq: Vec<f64> = grid.iter().zip(values).map(|(&x, &v)| (v - spec.pdf(x)).powi(2)).collect();
    trapezoid(grid, &sq)
}

/// ISE against the true density on `grid`, interpolating the estimate.
pub fn ise_on(est: &DensityEstimate, spec: &DistributionSpec, grid: &[f64]) -> f64 {
    let values: Vec<f64> = grid.iter().map(|&x| est.interpolate(x)).collect();
    ise_values(grid, &values, spec)
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Density estimator used in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EstimatorSpec {
    Lorpe { kernel: Kernel, h: f64, degree: f64, mode: BoundaryMode },
    /// LOrPE with plug-in `(h, M)`.
    LorpePlugin { kernel: Kernel, rule: DegreeRule },
    /// LOrPE with `(h, M)` chosen by a CV criterion around the plug-in bandwidth.
    LorpeCv { kernel: Kernel, criterion: Criterion, policy: CvPolicy },
    /// KDE with the interior effective kernel of degree `degree` (0 is plain KDE).
    Kde { kernel: Kernel, h: f64, degree: f64, mirror: bool },
    /// Plain KDE with the order-2 plug-in bandwidth.
    KdePlugin { kernel: Kernel, mirror: bool },
    /// Discrete-Legendre OSDE with threshold term selection.
    Osde { j_max: usize },
}

impl EstimatorSpec {
    pub fn name(&self) -> String {
        match self {
            EstimatorSpec::Lorpe { mode: BoundaryMode::KernelMirror, .. } => "lorpe-mirror".into(),
            EstimatorSpec::Lorpe { .. } => "lorpe".into(),
            EstimatorSpec::LorpePlugin { .. } => "lorpe-plugin".into(),
            EstimatorSpec::LorpeCv { criterion: Criterion::Lscv, .. } => "lorpe-lscv".into(),
            EstimatorSpec::LorpeCv { .. } => "lorpe-rlcv".into(),
            EstimatorSpec::Kde { mirror: true, .. } => "kde-mirror".into(),
            EstimatorSpec::Kde { .. } => "kde".into(),
            EstimatorSpec::KdePlugin { mirror: true, .. } => "kde-plugin-mirror".into(),
            EstimatorSpec::KdePlugin { .. } => "kde-plugin".into(),
            EstimatorSpec::Osde { .. } => "osde".into(),
        }
    }

    fn fixed_params(&self) -> (Option<f64>, Option<f64>, Option<f64>) {
        match *self {
            EstimatorSpec::Lorpe { h, degree, .. } | EstimatorSpec::Kde { h, degree, .. } => {
                (Some(degree), Some(h), None)
            }
            EstimatorSpec::LorpeCv { criterion: Criterion::Rlcv { alpha }, .. } => (None, None, Some(alpha)),
            _ => (None, None, None),
        }
    }
}

/// Per-replication outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub ise: f64,
    /// Bandwidth actually used (tuned estimators report their choice).
    pub h: f64,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiseResult {
    pub distribution: String,
    pub n: usize,
    pub estimator: String,
    /// Fixed degree, if the estimator has one.
    pub degree: Option<f64>,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub ise_values: Vec<f64>,
    pub selections: Vec<(f64, f64)>,
    /// Replications dropped because the estimator failed.
    pub dropped: usize,
    pub log10_mise: f64,
    /// Standard error of `log10_mise` (delta method).
    pub se: f64,
}

/// Shared per-study state for one distribution and grid.
pub struct StudyContext {
    pub spec: DistributionSpec,
    pub n: usize,
    pub grid: Vec<f64>,
    lorpe_banks: std::sync::Mutex<Vec<(Kernel, BoundaryMode, usize, std::sync::Arc<FitterBank>)>>,
}

impl StudyContext {
    pub fn new(spec: DistributionSpec, n: usize) -> Self {
        Self::with_grid(spec, n, spec.sim_grid())
    }

    pub fn with_grid(spec: DistributionSpec, n: usize, grid: Vec<f64>) -> Self {
        StudyContext { spec, n, grid, lorpe_banks: Default::default() }
    }

    /// Bank of LOrPE fitters on the study grid, or interior fitters when
    /// `interior` (KDE with effective kernels).
    pub fn bank(&self, kernel: Kernel, mode: BoundaryMode, max_degree: usize, interior: bool) -> std::sync::Arc<FitterBank> {
        let tag = if interior { usize::MAX - max_degree } else { max_degree };
        let mut banks = self.lorpe_banks.lock().unwrap();
        if let Some((_, _, _, b)) = banks.iter().find(|(k, m, d, _)| *k == kernel && *m == mode && *d == tag) {
            return b.clone();
        }
        let bank = if interior {
            FitterBank::interior(kernel, self.grid.clone(), max_degree)
        } else {
            let template = LorpeConfig {
                h: 1.0,
                degree: 0.0,
                kernel,
                support: self.spec.support(),
                boundary_mode: mode,
            };
            FitterBank::new(template, self.grid.clone(), max_degree)
        };
        let bank = std::sync::Arc::new(bank);
        banks.push((kernel, mode, tag, bank.clone()));
        bank
    }

    pub fn sample(&self, seed: u64, rep: u64) -> Vec<f64> {
        sample_rep(&self.spec, self.n, seed, rep)
    }

    fn ise_of_raw(&self, raw: Vec<f64>) -> Result<f64> {
        let est = DensityEstimate::from_raw(self.grid.clone(), raw)?;
        Ok(ise(&est, &self.spec))
    }

    /// One replication of `est`.
    pub fn run_rep(&self, est: &EstimatorSpec, seed: u64, rep: u64) -> Result<RepOutcome> {
        let sample = self.sample(seed, rep);
        self.run_on(est, &sample)
    }

    pub fn run_on(&self, est: &EstimatorSpec, sample: &[f64]) -> Result<RepOutcome> {
        let mirror = |on: bool| if on { self.spec.mirror_point() } else { None };
        match *est {
            EstimatorSpec::Lorpe { kernel, h, degree, mode } => {
                let taper = Taper::from_degree(degree)?;
                let fitter = self.bank(kernel, mode, taper.max_degree(), false).get(h)?;
                let raw = fitter.raw(&fitter.fit(sample), &taper);
                Ok(RepOutcome { ise: self.ise_of_raw(raw)?, h, degree })
            }
            EstimatorSpec::LorpePlugin { kernel, rule } => {
                let p = plug_in(sample, kernel, &DEFAULT_R_RANGE, rule)?;
                let degree = p.m_hat as f64;
                let template = LorpeConfig::new(p.h_hat, degree, kernel, self.spec.support())?;
                let fitter = crate::lorpe::GridFitter::new(&template, self.grid.clone(), degree_cap(degree))?;
                let raw = fitter.raw(&fitter.fit(sample), &template.taper());
                Ok(RepOutcome { ise: self.ise_of_raw(raw)?, h: p.h_hat, degree })
            }
            EstimatorSpec::LorpeCv { kernel, criterion, policy } => {
                let out = self.cv_reps(kernel, sample, &[criterion], policy)?;
                Ok(out[0])
            }
            EstimatorSpec::Kde { kernel, h, degree, mirror: m } => {
                let raw = if degree == 0.0 {
                    kde_raw(sample, h, kernel, mirror(m), &self.grid)?
                } else {
                    let taper = Taper::from_degree(degree)?;
                    let fitter = self.bank(kernel, BoundaryMode::ClipPolys, taper.max_degree(), true).get(h)?;
                    kde_effective_raw(&fitter, sample, &taper, mirror(m))?
                };
                Ok(RepOutcome { ise: self.ise_of_raw(raw)?, h, degree })
            }
            EstimatorSpec::KdePlugin { kernel, mirror: m } => {
                let p = plug_in(sample, kernel, &[2], DegreeRule::KernelOrder)?;
                let raw = kde_raw(sample, p.h_hat, kernel, mirror(m), &self.grid)?;
                Ok(RepOutcome { ise: self.ise_of_raw(raw)?, h: p.h_hat, degree: 0.0 })
            }
            EstimatorSpec::Osde { j_max } => {
                let terms = select_osde_terms_on(sample, j_max, OSDE_GRID)?;
                let cfg = OsdeConfig { terms, grid_size: OSDE_GRID };
                let est = osde_estimate(sample, &cfg, Some(&self.grid))?;
                Ok(RepOutcome { ise: ise(&est, &self.spec), h: f64::NAN, degree: terms as f64 })
            }
        }
    }

    /// CV-tuned LOrPE for several criteria on one sample; the bandwidth lattice
    /// is centred on the plug-in value and the degree grid is the default.
    pub fn cv_reps(&self, kernel: Kernel, sample: &[f64], criteria: &[Criterion], policy: CvPolicy) -> Result<Vec<RepOutcome>> {
        let p = plug_in(sample, kernel, &DEFAULT_R_RANGE, DegreeRule::Literal)?;
        let h_grid = lattice_h_grid(p.h_hat, LATTICE_ANCHOR);
        let m_grid = crate::tuning::default_m_grid();
        let cap = degree_cap(crate::tuning::CV_M_MAX);
        let bank = self.bank(kernel, BoundaryMode::ClipPolys, cap, false);
        let results = select_by_cv_in(&bank, sample, &h_grid, &m_grid, criteria, policy)?;
        results
            .iter()
            .map(|r| {
                let fitter = bank.get(r.best_h)?;
                let taper = Taper::from_degree(r.best_m)?;
                let raw = fitter.raw(&fitter.fit(sample), &taper);
                Ok(RepOutcome { ise: self.ise_of_raw(raw)?, h: r.best_h, degree: r.best_m })
            })
            .collect()
    }
}

fn summarize(ise_values: &[f64]) -> (f64, f64) {
    let k = ise_values.len() as f64;
    let mean = ise_values.iter().sum::<f64>() / k;
    let var = if k > 1.0 {
        ise_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    (mean.log10(), (var / k).sqrt() / (mean * std::f64::consts::LN_10))
}

fn collect_outcomes(results: Vec<Result<RepOutcome>>) -> (Vec<RepOutcome>, usize) {
    let mut ok = Vec::with_capacity(results.len());
    let mut dropped = 0;
    for r in results {
        match r {
            Ok(o) if o.ise.is_finite() => ok.push(o),
            _ => dropped += 1,
        }
    }
    (ok, dropped)
}

/// MISE of `est` over `reps` replications.
pub fn mise_study(ctx: &StudyContext, est: &EstimatorSpec, reps: usize, seed: u64) -> Result<MiseResult> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let results: Vec<Result<RepOutcome>> = (0..reps as u64).into_par_iter().map(|r| ctx.run_rep(est, seed, r)).collect();
    let (ok, dropped) = collect_outcomes(results);
    if ok.is_empty() {
        return Err(Error::AllRejected);
    }
    let ise_values: Vec<f64> = ok.iter().map(|o| o.ise).collect();
    let (log10_mise, se) = summarize(&ise_values);
    let (degree, h, alpha) = est.fixed_params();
    Ok(MiseResult {
        distribution: ctx.spec.name(),
        n: ctx.n,
        estimator: est.name(),
        degree,
        h,
        alpha,
        reps,
        seed,
        selections: ok.iter().map(|o| (o.h, o.degree)).collect(),
        ise_values,
        dropped,
        log10_mise,
        se,
    })
}

/// Estimator family searched by [`oracle_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OracleKind {
    Lorpe { kernel: Kernel, mode: BoundaryMode },
    /// KDE with interior effective kernels, optionally with data mirroring.
    Kde { kernel: Kernel, mirror: bool },
}

impl OracleKind {
    pub fn name(&self) -> String {
        match self {
            OracleKind::Lorpe { mode: BoundaryMode::KernelMirror, .. } => "lorpe-mirror".into(),
            OracleKind::Lorpe { .. } => "lorpe".into(),
            OracleKind::Kde { mirror: true, .. } => "kde-mirror".into(),
            OracleKind::Kde { .. } => "kde".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCell {
    pub h: f64,
    pub degree: f64,
    pub log10_mise: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub distribution: String,
    pub n: usize,
    pub estimator: String,
    pub reps: usize,
    pub seed: u64,
    /// `h`-major surface.
    pub surface: Vec<OracleCell>,
    pub best: OracleCell,
}

/// MISE over every `(h, M)` cell with common random numbers: replication `r`
/// uses the same sample in every cell.
pub fn oracle_search(
    ctx: &StudyContext,
    kind: OracleKind,
    h_grid: &[f64],
    m_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<OracleResult> {
    if h_grid.is_empty() || m_grid.is_empty() || reps == 0 {
        return Err(Error::InvalidArgument("oracle search needs nonempty grids and reps >= 1".into()));
    }
    let tapers = m_grid.iter().map(|&m| Taper::from_degree(m)).collect::<Result<Vec<_>>>()?;
    let cap = tapers.iter().map(Taper::max_degree).max().unwrap_or(0);
    let (kernel, mode, interior, mirror) = match kind {
        OracleKind::Lorpe { kernel, mode } => (kernel, mode, false, None),
        OracleKind::Kde { kernel, mirror } => {
            (kernel, BoundaryMode::ClipPolys, true, if mirror { ctx.spec.mirror_point() } else { None })
        }
    };
    let bank = ctx.bank(kernel, mode, cap, interior);
    let cells = h_grid.len() * m_grid.len();
    // per replication: ISE for every cell, NaN where the estimate failed
    let per_rep: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let sample = ctx.sample(seed, r);
            let mut out = Vec::with_capacity(cells);
            for &h in h_grid {
                let fitter = bank.get(h)?;
                if interior {
                    let fit = KdeFit::new(&fitter, &sample, mirror)?;
                    for taper in &tapers {
                        out.push(ctx.ise_of_raw(fit.raw(&fitter, taper)).unwrap_or(f64::NAN));
                    }
                } else {
                    let fit = fitter.fit(&sample);
                    for taper in &tapers {
                        out.push(ctx.ise_of_raw(fitter.raw(&fit, taper)).unwrap_or(f64::NAN));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut surface = Vec::with_capacity(cells);
    for (hi, &h) in h_grid.iter().enumerate() {
        for (mi, &m) in m_grid.iter().enumerate() {
            let c = hi * m_grid.len() + mi;
            let vals: Vec<f64> = per_rep.iter().map(|v| v[c]).filter(|v| v.is_finite()).collect();
            let (log10_mise, se) = if vals.is_empty() { (f64::INFINITY, f64::NAN) } else { summarize(&vals) };
            surface.push(OracleCell { h, degree: m, log10_mise, se });
        }
    }
    let best = surface
        .iter()
        .min_by(|a, b| a.log10_mise.total_cmp(&b.log10_mise))
        .cloned()
        .expect("nonempty surface");
    Ok(OracleResult {
        distribution: ctx.spec.name(),
        n: ctx.n,
        estimator: kind.name(),
        reps,
        seed,
        surface,
        best,
    })
}

/// Default oracle bandwidths: `points` log-spaced values over `[h0/8, 8 h0]`.
pub fn oracle_h_grid(h0: f64, points: usize) -> Vec<f64> {
    logspace(h0 / 8.0, h0 * 8.0, points)
}

/// Centre of the default oracle bandwidth grid: known optimal quadweight
/// bandwidths at `n = 100, 1000, 10000`, interpolated in `log n`; a quarter of
/// the ISE domain for distributions without a reference.
pub fn oracle_h_center(spec: &DistributionSpec, n: usize, kind: &OracleKind) -> f64 {
    let kde = matches!(kind, OracleKind::Kde { .. });
    let table: Option<[f64; 3]> = match (spec, kde) {
        (DistributionSpec::StdNormal, false) => Some([11.4, 8.2, 7.0]),
        (DistributionSpec::StdNormal, true) => Some([8.3, 8.2, 7.0]),
        (DistributionSpec::NormalMix1, _) => Some([1.0, 1.5, 2.0]),
        (DistributionSpec::NormalMix2, false) => Some([0.25, 0.51, 0.74]),
        (DistributionSpec::NormalMix2, true) => Some([0.43, 0.51, 0.74]),
        (DistributionSpec::TruncNormal0, false) => Some([1.2, 1.9, 2.7]),
        (DistributionSpec::TruncNormal0, true) => Some([9.7, 8.6, 7.5]),
        (DistributionSpec::TruncNormalM1, false) => Some([3.0, 2.1, 1.6]),
        (DistributionSpec::TruncNormalM1, true) => Some([3.9, 0.79, 0.19]),
        (DistributionSpec::Beta44, false) => Some([13.0, 1.5, 11.6]),
        (DistributionSpec::Beta44, true) => Some([2.04, 2.9, 1.5]),
        (DistributionSpec::Exp1, false) => Some([4.1, 13.2, 13.7]),
        (DistributionSpec::Exp1, true) => Some([0.48, 0.16, 0.082]),
        (DistributionSpec::TruncT { .. }, _) => None,
    };
    match table {
        Some(h) => {
            let t = ((n.max(1) as f64).log10() - 2.0).clamp(0.0, 2.0);
            let i = (t.floor() as usize).min(1);
            let f = t - i as f64;
            (h[i].ln() * (1.0 - f) + h[i + 1].ln() * f).exp()
        }
        None => {
            let (lo, hi) = spec.ise_domain();
            0.25 * (hi - lo)
        }
    }
}

/// Default oracle degrees `0..=20`.
pub fn oracle_m_grid() -> Vec<f64> {
    (0..=20).map(f64::from).collect()
}

/// Percentile by linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Robust standard error `(p84.13 - p15.87) / (2 sqrt(k))` of a set of values.
pub fn robust_se(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    (percentile(&s, 84.13) - percentile(&s, 15.87)) / (2.0 * (s.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub log10_mise: f64,
    /// Robust standard error of the ISE mean, converted to log10 units.
    pub robust_se: f64,
    pub result: MiseResult,
}

/// RLCV-tuned LOrPE MISE for each `alpha`, all on the same samples.
pub fn alpha_sweep(ctx: &StudyContext, kernel: Kernel, alphas: &[f64], reps: usize, seed: u64, policy: CvPolicy) -> Result<Vec<AlphaPoint>> {
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidArgument("alphas must lie in (0, 1]".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be >= 1".into()));
    }
    let criteria: Vec<Criterion> = alphas.iter().map(|&alpha| Criterion::Rlcv { alpha }).collect();
    let per_rep: Vec<Result<Vec<RepOutcome>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| ctx.cv_reps(kernel, &ctx.sample(seed, r), &criteria, policy))
        .collect();
    alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let column: Vec<Result<RepOutcome>> = per_rep
                .iter()
                .map(|r| r.as_ref().map(|v| v[a]).map_err(Clone::clone))
                .collect();
            let (ok, dropped) = collect_outcomes(column);
            if ok.is_empty() {
                return Err(Error::AllRejected);
            }
            let ise_values: Vec<f64> = ok.iter().map(|o| o.ise).collect();
            let (log10_mise, se) = summarize(&ise_values);
            let mean = 10f64.powf(log10_mise);
            let rse = robust_se(&ise_values) / (mean * std::f64::consts::LN_10);
            let result = MiseResult {
                distribution: ctx.spec.name(),
                n: ctx.n,
                estimator: "lorpe-rlcv".into(),
                degree: None,
                h: None,
                alpha: Some(alpha),
                reps,
                seed,
                selections: ok.iter().map(|o| (o.h, o.degree)).collect(),
                ise_values,
                dropped,
                log10_mise,
                se,
            };
            Ok(AlphaPoint { alpha, log10_mise, robust_se: rse, result })
        })
        .collect()
}

/// One CSV record: `distribution,n,estimator,M,h,alpha,reps,log10_mise,se,seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub distribution: String,
    pub n: usize,
    pub estimator: String,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    pub reps: usize,
    pub log10_mise: f64,
    pub se: f64,
    pub seed: u64,
}

impl From<&MiseResult> for CsvRow {
    fn from(r: &MiseResult) -> Self {
        CsvRow {
            distribution: r.distribution.clone(),
            n: r.n,
            estimator: r.estimator.clone(),
            m: r.degree,
            h: r.h,
            alpha: r.alpha,
            reps: r.reps,
            log10_mise: r.log10_mise,
            se: r.se,
            seed: r.seed,
        }
    }
}

impl OracleResult {
    pub fn rows(&self) -> Vec<CsvRow> {
        self.surface
            .iter()
            .map(|c| CsvRow {
                distribution: self.distribution.clone(),
                n: self.n,
                estimator: self.estimator.clone(),
                m: Some(c.degree),
                h: Some(c.h),
                alpha: None,
                reps: self.reps,
                log10_mise: c.log10_mise,
                se: c.se,
                seed: self.seed,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_pdf_values() {
        assert_relative_eq!(DistributionSpec::Beta44.pdf(0.0), 1.09375, epsilon = 1e-15);
        assert_relative_eq!(DistributionSpec::TruncNormal0.pdf(0.0), 0.797_884_560_802_865_4, epsilon = 1e-14);
        assert_relative_eq!(DistributionSpec::NormalMix1.pdf(1.5), 0.39634, epsilon = 1e-5);
        assert_eq!(DistributionSpec::Exp1.pdf(-0.1), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for d in DistributionSpec::all_table() {
            assert_eq!(d.name().parse::<DistributionSpec>().unwrap(), d);
        }
        assert_eq!(
            "t3".parse::<DistributionSpec>().unwrap(),
            DistributionSpec::TruncT { df: 3.0, lo: -1.0, hi: 2.0 }
        );
        assert!(matches!("gamma".parse::<DistributionSpec>(), Err(Error::UnknownDistribution(_))));
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in DistributionSpec::all_table() {
            for p in [0.01, 0.5, 0.97] {
                assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-10, "{d} {p}");
            }
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let a = sample_dist(&DistributionSpec::NormalMix2, 50, 9);
        assert_eq!(a, sample_dist(&DistributionSpec::NormalMix2, 50, 9));
        assert_ne!(a, sample_rep(&DistributionSpec::NormalMix2, 50, 9, 1));
    }

    #[test]
    fn robust_se_of_normal_quantiles() {
        let v: Vec<f64> = (1..=999).map(|i| DistributionSpec::StdNormal.quantile(i as f64 / 1000.0)).collect();
        assert_relative_eq!(robust_se(&v) * 2.0 * 999f64.sqrt(), 2.0, epsilon = 1e-2);
    }
}
