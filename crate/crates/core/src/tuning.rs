//! Selection of the bandwidth `h` and degree `M`: a normal-reference AMISE
//! plug-in rule and least-squares / regularized likelihood cross-validation.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{factorial, ln_factorial};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lorpe::{effective_kernel_with, FitterBank, GridFitter, LorpeConfig, Taper};
use crate::orthopoly::{BoundaryMode, PolyCache};
use crate::quadrature::{integrate_panels, linspace, logspace, trapezoid};

/// Default kernel orders tried by the plug-in rule.
pub const DEFAULT_R_RANGE: [usize; 4] = [2, 4, 6, 8];
/// Default RLCV regularization exponent.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Points in the default CV bandwidth grid.
pub const CV_H_POINTS: usize = 25;
/// The default CV bandwidth grid spans `[h/CV_H_SPAN, h*CV_H_SPAN]` around the plug-in value.
pub const CV_H_SPAN: f64 = 8.0;
/// Largest degree in the default CV grid.
pub const CV_M_MAX: f64 = 12.0;
/// Largest degree any search may use.
pub const M_CAP: f64 = 20.0;

/// How the plug-in kernel order maps to a degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DegreeRule {
    /// `M = r + 1` for even `r`, `r + 2` for odd `r`.
    #[default]
    Literal,
    /// `M = r - 1`: the step taper whose effective kernel has order `r`.
    KernelOrder,
    /// `M = r - 2`: the lowest degree whose effective kernel has order `r`.
    EvenDegree,
}

impl DegreeRule {
    pub fn degree(self, r: usize) -> usize {
        match self {
            DegreeRule::Literal if r % 2 == 0 => r + 1,
            DegreeRule::Literal => r + 2,
            DegreeRule::KernelOrder => r - 1,
            DegreeRule::EvenDegree => r - 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginResult {
    pub r_hat: usize,
    pub h_hat: f64,
    pub m_hat: usize,
    pub sigma: f64,
    /// `(r, AMISE(r))` for every order tried.
    pub amise_curve: Vec<(usize, f64)>,
}

/// `mu_r(K_eff)` and `R(K_eff)` for the interior effective kernel of order `r` (`M = r - 1`).
pub fn effective_kernel_moments(kernel: Kernel, r: usize) -> Result<(f64, f64)> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("kernel order must be >= 2, got {r}")));
    }
    static MEMO: OnceLock<RwLock<HashMap<(u64, usize), (f64, f64)>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if let Some(v) = memo.read().unwrap().get(&(kernel.key(), r)) {
        return Ok(*v);
    }
    let v = compute_moments(kernel, r)?;
    memo.write().unwrap().insert((kernel.key(), r), v);
    Ok(v)
}

fn compute_moments(kernel: Kernel, r: usize) -> Result<(f64, f64)> {
    let taper = Taper::step(r - 1);
    let sys = PolyCache::global().get(kernel, f64::NEG_INFINITY, f64::INFINITY, r - 1, BoundaryMode::ClipPolys)?;
    let a = kernel.effective_half_width();
    let panels = if kernel.is_compact() { 8 } else { 96 };
    let keff = |u: f64| effective_kernel_with(&sys, &taper, &[u])[0];
    let mu = integrate_panels(-a, a, panels, 32, |u| u.powi(r as i32) * keff(u));
    let rough = integrate_panels(-a, a, panels, 32, |u| keff(u).powi(2));
    Ok((mu, rough))
}

/// Normal-reference AMISE at the optimal bandwidth for a kernel of order `r`.
pub fn normal_reference_amise(r: usize, sigma: f64, n: usize, mu: f64, rough: f64) -> f64 {
    let rf = r as f64;
    let ln_inner = (2.0 * rf).ln() + ln_factorial(2 * r as u64)
        - 3.0 * ln_factorial(r as u64)
        - 0.5 * std::f64::consts::PI.ln()
        + 2.0 * mu.abs().ln()
        + 2.0 * rf * (rough / n as f64).ln();
    (2.0 * rf + 1.0) / (4.0 * rf * sigma) * (ln_inner / (2.0 * rf + 1.0)).exp()
}

/// Normal-reference optimal bandwidth for a kernel of order `r`.
pub fn normal_reference_bandwidth(r: usize, sigma: f64, n: usize, mu: f64, rough: f64) -> f64 {
    let rf = r as f64;
    let ln_inner = 3.0 * ln_factorial(r as u64) + 0.5 * std::f64::consts::PI.ln()
        - (2.0 * rf).ln()
        - ln_factorial(2 * r as u64)
        - (n as f64).ln()
        + rough.ln()
        - 2.0 * mu.abs().ln();
    2.0 * sigma * (ln_inner / (2.0 * rf + 1.0)).exp()
}

/// `(r!)^2`-form AMISE at the optimum for a known `R(f^(r))`.
pub fn amise_at_optimum(r: usize, n: usize, mu: f64, rough: f64, r_f: f64) -> f64 {
    let rf = r as f64;
    let inner = 2.0 * rf / factorial(r as u64).powi(2) * rough.powf(2.0 * rf) * mu * mu * r_f / (n as f64).powf(2.0 * rf);
    (2.0 * rf + 1.0) / (2.0 * rf) * inner.powf(1.0 / (2.0 * rf + 1.0))
}

/// `R(f^(r))` for a normal density with standard deviation `sigma`.
pub fn normal_roughness(r: usize, sigma: f64) -> f64 {
    let rf = r as f64;
    (ln_factorial(2 * r as u64) - ln_factorial(r as u64) - (2.0 * rf + 1.0) * 2f64.ln()
        - 0.5 * std::f64::consts::PI.ln()
        - (2.0 * rf + 1.0) * sigma.ln())
    .exp()
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_sd(sample: &[f64]) -> f64 {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Plug-in choice of `(h, M)`.
pub fn plug_in(sample: &[f64], kernel: Kernel, r_range: &[usize], rule: DegreeRule) -> Result<PluginResult> {
    if sample.len() < 3 {
        return Err(Error::DegenerateSample(format!("plug-in needs n >= 3, got {}", sample.len())));
    }
    if r_range.is_empty() || r_range.iter().any(|&r| r < 2 || r % 2 != 0) {
        return Err(Error::InvalidArgument("kernel orders must be even and >= 2".into()));
    }
    let sigma = sample_sd(sample);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::DegenerateSample("sample standard deviation is zero".into()));
    }
    let n = sample.len();
    let mut best: Option<(usize, f64, f64, f64)> = None;
    let mut amise_curve = Vec::with_capacity(r_range.len());
    for &r in r_range {
        let (mu, rough) = effective_kernel_moments(kernel, r)?;
        let amise = normal_reference_amise(r, sigma, n, mu, rough);
        amise_curve.push((r, amise));
        if best.is_none_or(|b| amise < b.1) {
            best = Some((r, amise, mu, rough));
        }
    }
    let (r_hat, _, mu, rough) = best.expect("nonempty order range");
    Ok(PluginResult {
        r_hat,
        h_hat: normal_reference_bandwidth(r_hat, sigma, n, mu, rough),
        m_hat: rule.degree(r_hat),
        sigma,
        amise_curve,
    })
}

fn check_loo_args(sample: &[f64], i: usize) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::InvalidArgument("leave-one-out needs n >= 2".into()));
    }
    if i >= sample.len() {
        return Err(Error::InvalidArgument(format!("index {i} out of range for n = {}", sample.len())));
    }
    Ok(())
}

/// Per-point terms `t(k) P_k(0) P_k(y) w(y)` summed over `k`, at fit point `x`.
fn point_terms(sample: &[f64], x: f64, cfg: &LorpeConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let taper = cfg.taper();
    let sys = cfg.system(x, taper.max_degree())?;
    let m = taper.max_degree() + 1;
    let mut p0 = vec![0.0; m];
    sys.eval_all(0.0, &mut p0);
    let mut buf = vec![0.0; m];
    Ok(sample
        .iter()
        .map(|&xi| {
            let y = (xi - x) / cfg.h;
            let w = sys.weight(y);
            if w == 0.0 {
                return 0.0;
            }
            sys.eval_all(y, &mut buf);
            w * (0..m).map(|k| taper.get(k) * p0[k] * buf[k]).sum::<f64>()
        })
        .collect())
}

/// Leave-one-out estimate `f^(-i)(x)` at fit point `x`.
pub fn loo_value(sample: &[f64], i: usize, x: f64, cfg: &LorpeConfig) -> Result<f64> {
    check_loo_args(sample, i)?;
    let terms = point_terms(sample, x, cfg)?;
    let total: f64 = terms.iter().sum();
    Ok((total - terms[i]) / ((sample.len() - 1) as f64 * cfg.h))
}

/// Contribution `f^(+i)(x)` of point `i` at fit point `x`.
pub fn plus_i_value(sample: &[f64], i: usize, x: f64, cfg: &LorpeConfig) -> Result<f64> {
    check_loo_args(sample, i)?;
    let terms = point_terms(sample, x, cfg)?;
    Ok(terms[i] / (sample.len() as f64 * cfg.h))
}

/// Where `f^(-i)(x_i)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitPoint {
    /// The grid point nearest `x_i`.
    #[default]
    NearestGrid,
    /// `x_i` itself.
    Exact,
}

/// Which estimate the CV criteria score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CvTarget {
    /// The raw expansion, unclipped and unnormalized.
    #[default]
    Raw,
    /// The returned estimate: negative parts clipped, divided by the clipped
    /// full-sample integral `Z`; leave-one-out and plus-i values share `Z`.
    Normalized,
}

/// Evaluation choices for cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CvPolicy {
    pub fit_point: FitPoint,
    pub target: CvTarget,
}

impl CvPolicy {
    pub fn new(fit_point: FitPoint, target: CvTarget) -> Self {
        CvPolicy { fit_point, target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Criterion {
    Lscv,
    Rlcv { alpha: f64 },
}

impl Criterion {
    /// Whether `a` is a better score than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self {
            Criterion::Lscv => a < b,
            Criterion::Rlcv { .. } => a > b,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Lscv => f.write_str("lscv"),
            Criterion::Rlcv { alpha } => write!(f, "rlcv({alpha})"),
        }
    }
}

/// Leave-one-out ingredients for one sample at one bandwidth.
///
/// For each point `i` at its fit point: `P_k(0)`, the full-sample coefficients
/// `c_k` and the self term `P_k(y_i) w(y_i) / (n h)`. Any taper then gives
/// `f = sum t p0 c`, `f^(+i) = sum t p0 v` and `f^(-i) = n/(n-1) (f - f^(+i))`.
pub struct LooTable {
    n: usize,
    m: usize,
    p0: Vec<f64>,
    full: Vec<f64>,
    own: Vec<f64>,
    /// Grid coefficients for the `int f^2` term of LSCV.
    grid_fit: crate::lorpe::LocalFit,
}

impl LooTable {
    pub fn new(fitter: &GridFitter, sample: &[f64], policy: FitPoint) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::InvalidArgument("cross-validation needs n >= 2".into()));
        }
        let n = sample.len();
        let m = fitter.max_degree() + 1;
        let h = fitter.h();
        let scale = 1.0 / (n as f64 * h);
        let grid_fit = fitter.fit(sample);
        let mut p0 = vec![0.0; n * m];
        let mut full = vec![0.0; n * m];
        let mut own = vec![0.0; n * m];
        match policy {
            FitPoint::NearestGrid => {
                let grid = fitter.grid();
                for (i, &x) in sample.iter().enumerate() {
                    let g = nearest(grid, x);
                    let sys = fitter.system(g);
                    let row = i * m..(i + 1) * m;
                    p0[row.clone()].copy_from_slice(fitter.p_zero(g));
                    full[row.clone()].copy_from_slice(grid_fit.coefficients(g));
                    let y = (x - grid[g]) / h;
                    let w = sys.weight(y);
                    if w != 0.0 {
                        sys.accumulate(y, w * scale, &mut own[row]);
                    }
                }
            }
            FitPoint::Exact => {
                let template = fitter.template();
                let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = sample
                    .par_iter()
                    .map(|&x| {
                        let cfg = LorpeConfig { h, degree: 0.0, ..template };
                        let sys = cfg.system(x, m - 1)?;
                        let mut p = vec![0.0; m];
                        sys.eval_all(0.0, &mut p);
                        let c = crate::lorpe::coefficients(sample, x, &cfg, &sys);
                        let mut v = vec![0.0; m];
                        sys.accumulate(0.0, sys.weight(0.0) * scale, &mut v);
                        Ok((p, c, v))
                    })
                    .collect::<Result<_>>()?;
                for (i, (p, c, v)) in rows.into_iter().enumerate() {
                    p0[i * m..(i + 1) * m].copy_from_slice(&p);
                    full[i * m..(i + 1) * m].copy_from_slice(&c);
                    own[i * m..(i + 1) * m].copy_from_slice(&v);
                }
            }
        }
        Ok(LooTable { n, m, p0, full, own, grid_fit })
    }

    fn dot(&self, taper: &Taper, table: &[f64], i: usize) -> f64 {
        let row = i * self.m;
        (0..=taper.max_degree())
            .map(|k| taper.get(k) * self.p0[row + k] * table[row + k])
            .sum()
    }

    /// `f(x_i)` at the fit point of `i`.
    pub fn full_value(&self, taper: &Taper, i: usize) -> f64 {
        self.dot(taper, &self.full, i)
    }

    /// `f^(+i)(x_i)`.
    pub fn plus_value(&self, taper: &Taper, i: usize) -> f64 {
        self.dot(taper, &self.own, i)
    }

    /// `f^(-i)(x_i)`.
    pub fn loo_value(&self, taper: &Taper, i: usize) -> f64 {
        let n = self.n as f64;
        n / (n - 1.0) * (self.full_value(taper, i) - self.plus_value(taper, i))
    }

    /// LSCV: `int f^2 - (2/n) sum_i f^(-i)(x_i)`; lower is better.
    pub fn lscv(&self, fitter: &GridFitter, taper: &Taper) -> f64 {
        let raw = fitter.raw(&self.grid_fit, taper);
        let sq: Vec<f64> = raw.iter().map(|r| r * r).collect();
        let loo: f64 = (0..self.n).map(|i| self.loo_value(taper, i)).sum();
        trapezoid(fitter.grid(), &sq) - 2.0 * loo / self.n as f64
    }

    /// Log RLCV: `sum_i log max(f^(-i), f^(+i) / n^alpha)`; higher is better,
    /// `-inf` when both arguments are nonpositive for some `i`.
    pub fn rlcv(&self, taper: &Taper, alpha: f64) -> f64 {
        let damp = (self.n as f64).powf(-alpha);
        let mut total = 0.0;
        for i in 0..self.n {
            let v = self.loo_value(taper, i).max(self.plus_value(taper, i) * damp);
            if !(v > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += v.ln();
        }
        total
    }

    /// Integral `Z` of the clipped full-sample grid estimate.
    pub fn clipped_mass(&self, fitter: &GridFitter, taper: &Taper) -> f64 {
        let pos: Vec<f64> = fitter.raw(&self.grid_fit, taper).iter().map(|r| r.max(0.0)).collect();
        trapezoid(fitter.grid(), &pos)
    }

    /// LSCV of the clipped estimate scaled by `1/Z`; `NaN` when `Z = 0`.
    pub fn lscv_normalized(&self, fitter: &GridFitter, taper: &Taper) -> f64 {
        let raw = fitter.raw(&self.grid_fit, taper);
        let grid = fitter.grid();
        let pos: Vec<f64> = raw.iter().map(|r| r.max(0.0)).collect();
        let z = trapezoid(grid, &pos);
        if !(z > 0.0) {
            return f64::NAN;
        }
        let sq: Vec<f64> = pos.iter().map(|r| r * r).collect();
        let loo: f64 = (0..self.n).map(|i| self.loo_value(taper, i).max(0.0)).sum();
        trapezoid(grid, &sq) / (z * z) - 2.0 * loo / (self.n as f64 * z)
    }

    /// Log RLCV with every value scaled by `1/Z`: the raw score minus `n log Z`.
    pub fn rlcv_normalized(&self, fitter: &GridFitter, taper: &Taper, alpha: f64) -> f64 {
        let z = self.clipped_mass(fitter, taper);
        if !(z > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.rlcv(taper, alpha) - self.n as f64 * z.ln()
    }

    pub fn score(&self, fitter: &GridFitter, taper: &Taper, criterion: Criterion, target: CvTarget) -> f64 {
        match (criterion, target) {
            (Criterion::Lscv, CvTarget::Raw) => self.lscv(fitter, taper),
            (Criterion::Rlcv { alpha }, CvTarget::Raw) => self.rlcv(taper, alpha),
            (Criterion::Lscv, CvTarget::Normalized) => self.lscv_normalized(fitter, taper),
            (Criterion::Rlcv { alpha }, CvTarget::Normalized) => self.rlcv_normalized(fitter, taper, alpha),
        }
    }

    /// Grid estimate coefficients of the full sample.
    pub fn grid_fit(&self) -> &crate::lorpe::LocalFit {
        &self.grid_fit
    }
}

/// Index of the grid point nearest `x` (ties go to the lower point).
pub fn nearest(grid: &[f64], x: f64) -> usize {
    let j = grid.partition_point(|&g| g < x);
    if j == 0 {
        0
    } else if j == grid.len() || x - grid[j - 1] <= grid[j] - x {
        j - 1
    } else {
        j
    }
}

/// LSCV score of `cfg` on `grid`.
pub fn lscv_score(sample: &[f64], cfg: &LorpeConfig, grid: &[f64], policy: FitPoint) -> Result<f64> {
    let taper = cfg.taper();
    let fitter = GridFitter::new(cfg, grid.to_vec(), taper.max_degree())?;
    Ok(LooTable::new(&fitter, sample, policy)?.lscv(&fitter, &taper))
}

/// Log RLCV score of `cfg` on `grid`.
pub fn rlcv_score(sample: &[f64], cfg: &LorpeConfig, alpha: f64, grid: &[f64], policy: FitPoint) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    let taper = cfg.taper();
    let fitter = GridFitter::new(cfg, grid.to_vec(), taper.max_degree())?;
    Ok(LooTable::new(&fitter, sample, policy)?.rlcv(&taper, alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub criterion: Criterion,
    /// `(h, M, score)` for every cell, `h`-major.
    pub scores: Vec<(f64, f64, f64)>,
    pub best_h: f64,
    pub best_m: f64,
    pub best_score: f64,
}

/// Scores every `(h, M)` cell and returns the optimum; ties go to larger `h`,
/// then smaller `M`.
pub fn select_by_cv(
    sample: &[f64],
    template: &LorpeConfig,
    grid: &[f64],
    h_grid: &[f64],
    m_grid: &[f64],
    criterion: Criterion,
    policy: CvPolicy,
) -> Result<CvResult> {
    let cap = m_grid.iter().copied().fold(0.0, f64::max);
    let bank = FitterBank::new(*template, grid.to_vec(), crate::lorpe::degree_cap(cap));
    select_by_cv_in(&bank, sample, h_grid, m_grid, &[criterion], policy).map(|mut v| v.remove(0))
}

/// [`select_by_cv`] for several criteria at once, reusing fitters from `bank`.
pub fn select_by_cv_in(
    bank: &FitterBank,
    sample: &[f64],
    h_grid: &[f64],
    m_grid: &[f64],
    criteria: &[Criterion],
    policy: CvPolicy,
) -> Result<Vec<CvResult>> {
    if h_grid.is_empty() || m_grid.is_empty() {
        return Err(Error::InvalidArgument("empty tuning grid".into()));
    }
    let tapers = m_grid.iter().map(|&m| Taper::from_degree(m)).collect::<Result<Vec<_>>>()?;
    if tapers.iter().any(|t| t.max_degree() > bank.max_degree()) {
        return Err(Error::InvalidArgument("degree grid exceeds the fitter cap".into()));
    }
    let mut all: Vec<Vec<(f64, f64, f64)>> = vec![Vec::with_capacity(h_grid.len() * m_grid.len()); criteria.len()];
    for &h in h_grid {
        let fitter = bank.get(h)?;
        let table = LooTable::new(&fitter, sample, policy.fit_point)?;
        for (taper, &m) in tapers.iter().zip(m_grid) {
            for (c, crit) in criteria.iter().enumerate() {
                all[c].push((h, m, table.score(&fitter, taper, *crit, policy.target)));
            }
        }
    }
    criteria
        .iter()
        .zip(all)
        .map(|(crit, scores)| {
            let mut best: Option<(f64, f64, f64)> = None;
            for &(h, m, s) in &scores {
                if !s.is_finite() {
                    continue;
                }
                let take = match best {
                    None => true,
                    Some((bh, bm, bs)) => {
                        crit.better(s, bs) || (s == bs && (h > bh || (h == bh && m < bm)))
                    }
                };
                if take {
                    best = Some((h, m, s));
                }
            }
            let (best_h, best_m, best_score) = best.ok_or(Error::AllRejected)?;
            Ok(CvResult { criterion: *crit, scores, best_h, best_m, best_score })
        })
        .collect()
}

/// Default CV bandwidths: `CV_H_POINTS` log-spaced values over `[h/8, 8h]`.
pub fn default_h_grid(h_center: f64) -> Vec<f64> {
    logspace(h_center / CV_H_SPAN, h_center * CV_H_SPAN, CV_H_POINTS)
}

/// Default CV degrees: `0, 0.5, ..., 12`.
pub fn default_m_grid() -> Vec<f64> {
    linspace(0.0, CV_M_MAX, 2 * CV_M_MAX as usize + 1)
}

/// Bandwidths on a fixed geometric lattice through `anchor` with the spacing of
/// the default CV grid, covering `[h/8, 8h]` around `h_center`.
///
/// Samples whose plug-in bandwidths differ slightly then share lattice points,
/// so fitters can be reused across replications.
pub fn lattice_h_grid(h_center: f64, anchor: f64) -> Vec<f64> {
    let step = (CV_H_SPAN * CV_H_SPAN).ln() / (CV_H_POINTS - 1) as f64;
    let offset = ((h_center / anchor).ln() / step).round() as i64;
    let half = (CV_H_POINTS as i64 - 1) / 2;
    (offset - half..=offset + half)
        .map(|j| anchor * (j as f64 * step).exp())
        .collect()
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lscv" => Ok(Criterion::Lscv),
            "rlcv" => Ok(Criterion::Rlcv { alpha: DEFAULT_ALPHA }),
            other => Err(Error::InvalidArgument(format!("unknown criterion `{other}`"))),
        }
    }
}
