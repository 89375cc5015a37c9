//! The local orthogonal polynomial expansion estimator.
//!
//! At each fit point the empirical density is projected onto the kernel-weighted
//! orthonormal polynomials of [`crate::orthopoly`]; the tapered expansion is
//! evaluated at the fit point itself. Negative values are clipped and the
//! result renormalized once, after the whole grid has been evaluated.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::orthopoly::{BoundaryMode, PolyCache, PolySystem};
use crate::quadrature::{linspace, trapezoid};

/// Default number of grid points for density estimates.
pub const DEFAULT_GRID_POINTS: usize = 1024;

/// Density support `[lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidArgument(format!("support needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Support { lo, hi })
    }

    pub fn real_line() -> Self {
        Support { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// `(a~, b~)` for a fit point.
    pub fn scaled(&self, x_fit: f64, h: f64) -> (f64, f64) {
        ((self.lo - x_fit) / h, (self.hi - x_fit) / h)
    }
}

/// Step taper with a fractional last term.
///
/// `t(k) = 1` for `k <= floor(M)`, `t(floor(M) + 1) = sqrt(M - floor(M))`,
/// zero beyond, so that `sum t(k)^2 - 1 = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Taper {
    weights: Vec<f64>,
}

impl Taper {
    pub fn from_degree(degree: f64) -> Result<Self> {
        if !(degree >= 0.0) || !degree.is_finite() {
            return Err(Error::InvalidArgument(format!("degree must be >= 0, got {degree}")));
        }
        let m = degree.floor();
        let frac = degree - m;
        let mut weights = vec![1.0; m as usize + 1];
        if frac > 0.0 {
            weights.push(frac.sqrt());
        }
        Ok(Taper { weights })
    }

    /// Sharp cutoff at integer degree `m`.
    pub fn step(m: usize) -> Self {
        Taper { weights: vec![1.0; m + 1] }
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.weights.get(k).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest degree with a nonzero weight.
    pub fn max_degree(&self) -> usize {
        self.weights.len() - 1
    }

    /// `sum t(k)^2 - 1`.
    pub fn effective_dof(&self) -> f64 {
        // the fractional tail is added last so integer parts stay exact
        let tail = self.weights.iter().skip(1).map(|t| t * t).sum::<f64>();
        tail + self.weights[0] * self.weights[0] - 1.0
    }
}

/// Polynomial degree needed to cover a real-valued `M`: `floor(M) + 1`.
pub fn degree_cap(degree: f64) -> usize {
    degree.floor() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorpeConfig {
    pub h: f64,
    /// Effective degrees of freedom `M`; real-valued through the taper.
    pub degree: f64,
    pub kernel: Kernel,
    pub support: Support,
    pub boundary_mode: BoundaryMode,
}

impl LorpeConfig {
    pub fn new(h: f64, degree: f64, kernel: Kernel, support: Support) -> Result<Self> {
        let cfg = LorpeConfig { h, degree, kernel, support, boundary_mode: BoundaryMode::ClipPolys };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {}", self.h)));
        }
        if !(self.degree >= 0.0) || !self.degree.is_finite() {
            return Err(Error::InvalidArgument(format!("degree must be >= 0, got {}", self.degree)));
        }
        if self.support.lo >= self.support.hi {
            return Err(Error::InvalidArgument("empty support".into()));
        }
        Ok(())
    }

    pub fn taper(&self) -> Taper {
        Taper::from_degree(self.degree).expect("validated degree")
    }

    /// System at `x_fit`, from the global cache.
    pub fn system(&self, x_fit: f64, max_degree: usize) -> Result<Arc<PolySystem>> {
        let (a, b) = self.support.scaled(x_fit, self.h);
        PolyCache::global().get(self.kernel, a, b, max_degree, self.boundary_mode)
    }
}

/// Density values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    /// Unclipped values; may be negative.
    pub raw: Vec<f64>,
    /// `max(0, raw) / Z`.
    pub value: Vec<f64>,
    /// `Z`, trapezoid integral of the clipped values.
    pub norm_constant: f64,
}

impl DensityEstimate {
    /// Clips at zero and renormalizes over the grid.
    pub fn from_raw(grid: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        if grid.len() != raw.len() || grid.len() < 2 {
            return Err(Error::InvalidArgument("grid and values must match and have >= 2 points".into()));
        }
        let clipped: Vec<f64> = raw.iter().map(|&r| r.max(0.0)).collect();
        let z = trapezoid(&grid, &clipped);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::AllZeroDensity);
        }
        let value = clipped.into_iter().map(|v| v / z).collect();
        Ok(DensityEstimate { grid, raw, value, norm_constant: z })
    }

    /// Piecewise-linear interpolation of `value`; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let j = g.partition_point(|&v| v <= x);
        if j == 0 {
            return self.value[0];
        }
        if j >= g.len() {
            return self.value[g.len() - 1];
        }
        let t = (x - g[j - 1]) / (g[j] - g[j - 1]);
        self.value[j - 1] * (1.0 - t) + self.value[j] * t
    }
}

/// Expansion coefficients `c_k = (1/(n h)) sum_i P_k(y_i) w(y_i)`, `y_i = (x_i - x_fit)/h`,
/// for `k = 0..=sys.max_degree()`.
pub fn coefficients(sample: &[f64], x_fit: f64, cfg: &LorpeConfig, sys: &PolySystem) -> Vec<f64> {
    let mut acc = vec![0.0; sys.max_degree() + 1];
    let scale = 1.0 / (sample.len() as f64 * cfg.h);
    for &x in sample {
        let y = (x - x_fit) / cfg.h;
        let w = sys.weight(y);
        if w != 0.0 {
            sys.accumulate(y, w * scale, &mut acc);
        }
    }
    acc
}

/// Raw (unclipped) estimate at `x_fit`.
pub fn evaluate_raw(sample: &[f64], x_fit: f64, cfg: &LorpeConfig) -> Result<f64> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let taper = cfg.taper();
    let sys = cfg.system(x_fit, taper.max_degree())?;
    let c = coefficients(sample, x_fit, cfg, &sys);
    let mut p0 = vec![0.0; c.len()];
    sys.eval_all(0.0, &mut p0);
    Ok(c.iter().zip(&p0).enumerate().map(|(k, (c, p))| taper.get(k) * c * p).sum())
}

/// LOrPE estimate on `grid`, clipped and renormalized.
pub fn estimate_on_grid(sample: &[f64], cfg: &LorpeConfig, grid: &[f64]) -> Result<DensityEstimate> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let taper = cfg.taper();
    let fitter = GridFitter::new(cfg, grid.to_vec(), taper.max_degree())?;
    let fit = fitter.fit(sample);
    DensityEstimate::from_raw(grid.to_vec(), fitter.raw(&fit, &taper))
}

/// Effective kernel at `x_fit`: `K_eff(u) = sum_k t(k) P_k(0) P_k(-u) w(-u)`.
///
/// With `u = (x_fit - x_i)/h` the raw estimate is `(1/(n h)) sum_i K_eff(u_i)`.
pub fn effective_kernel(cfg: &LorpeConfig, x_fit: f64, u_grid: &[f64]) -> Result<Vec<f64>> {
    cfg.validate()?;
    let taper = cfg.taper();
    let sys = cfg.system(x_fit, taper.max_degree())?;
    Ok(effective_kernel_with(&sys, &taper, u_grid))
}

pub(crate) fn effective_kernel_with(sys: &PolySystem, taper: &Taper, u_grid: &[f64]) -> Vec<f64> {
    let m = taper.max_degree() + 1;
    let mut p0 = vec![0.0; m];
    sys.eval_all(0.0, &mut p0);
    let tp0: Vec<f64> = (0..m).map(|k| taper.get(k) * p0[k]).collect();
    let mut buf = vec![0.0; m];
    u_grid
        .iter()
        .map(|&u| {
            let w = sys.weight(-u);
            if w == 0.0 {
                return 0.0;
            }
            sys.eval_all(-u, &mut buf);
            w * tp0.iter().zip(&buf).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

/// Default estimation grid: the support, with infinite ends replaced by the
/// sample extremes padded by one kernel window. The estimate is exactly zero
/// beyond that padding.
pub fn default_grid(sample: &[f64], cfg: &LorpeConfig, points: usize) -> Vec<f64> {
    let pad = cfg.kernel.effective_half_width() * cfg.h;
    let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = if cfg.support.lo.is_finite() { cfg.support.lo } else { min - pad };
    let hi = if cfg.support.hi.is_finite() { cfg.support.hi } else { max + pad };
    linspace(lo, hi, points)
}

/// Polynomial systems for every point of a fixed grid.
///
/// Building the systems is the expensive part of an estimate; a fitter can be
/// reused for any number of samples at the same bandwidth and grid, and for
/// any taper up to `max_degree`.
pub struct GridFitter {
    template: LorpeConfig,
    kernel: Kernel,
    h: f64,
    grid: Vec<f64>,
    max_degree: usize,
    systems: Vec<Arc<PolySystem>>,
    /// `P_k(0)` per grid point, row-major `[g * (max_degree + 1) + k]`
    p_zero: Vec<f64>,
}

impl GridFitter {
    pub fn new(cfg: &LorpeConfig, grid: Vec<f64>, max_degree: usize) -> Result<Self> {
        cfg.validate()?;
        check_grid(&grid)?;
        if grid.iter().any(|&x| !cfg.support.contains(x)) {
            return Err(Error::InvalidArgument("grid must lie inside the support".into()));
        }
        let systems = grid
            .par_iter()
            .map(|&x| cfg.system(x, max_degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_systems(*cfg, grid, max_degree, systems))
    }

    /// Every grid point uses the interior system, ignoring any support
    /// boundary; this is the high-order KDE with the interior effective kernel.
    pub fn interior(kernel: Kernel, h: f64, grid: Vec<f64>, max_degree: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
        }
        check_grid(&grid)?;
        let sys = PolyCache::global().get(kernel, f64::NEG_INFINITY, f64::INFINITY, max_degree, BoundaryMode::ClipPolys)?;
        let systems = vec![sys; grid.len()];
        let template = LorpeConfig {
            h,
            degree: 0.0,
            kernel,
            support: Support::real_line(),
            boundary_mode: BoundaryMode::ClipPolys,
        };
        Ok(Self::from_systems(template, grid, max_degree, systems))
    }

    fn from_systems(template: LorpeConfig, grid: Vec<f64>, max_degree: usize, systems: Vec<Arc<PolySystem>>) -> Self {
        let m = max_degree + 1;
        let mut p_zero = vec![0.0; grid.len() * m];
        for (g, sys) in systems.iter().enumerate() {
            sys.eval_all(0.0, &mut p_zero[g * m..(g + 1) * m]);
        }
        GridFitter { template, kernel: template.kernel, h: template.h, grid, max_degree, systems, p_zero }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Configuration the systems were built for (degree is unused).
    pub fn template(&self) -> LorpeConfig {
        self.template
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn system(&self, g: usize) -> &PolySystem {
        &self.systems[g]
    }

    pub fn p_zero(&self, g: usize) -> &[f64] {
        let m = self.max_degree + 1;
        &self.p_zero[g * m..(g + 1) * m]
    }

    /// Expansion coefficients at every grid point, for every degree up to the cap.
    pub fn fit(&self, sample: &[f64]) -> LocalFit {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = self.max_degree + 1;
        let n = sorted.len();
        let scale = 1.0 / (n as f64 * self.h);
        let reach = self.kernel.effective_half_width() * self.h;
        let mut coeffs = vec![0.0; self.grid.len() * m];
        coeffs
            .par_chunks_mut(m)
            .zip(self.grid.par_iter())
            .zip(self.systems.par_iter())
            .for_each(|((acc, &x_fit), sys)| {
                // mirrored weights can reach further than the plain kernel
                let (lo, hi) = match sys.mode() {
                    BoundaryMode::ClipPolys => (x_fit - reach, x_fit + reach),
                    BoundaryMode::KernelMirror => (x_fit - 3.0 * reach, x_fit + 3.0 * reach),
                };
                let start = sorted.partition_point(|&v| v < lo);
                let end = sorted.partition_point(|&v| v <= hi);
                for &x in &sorted[start..end] {
                    let y = (x - x_fit) / self.h;
                    let w = sys.weight(y);
                    if w != 0.0 {
                        sys.accumulate(y, w * scale, acc);
                    }
                }
            });
        LocalFit { n, h: self.h, max_degree: self.max_degree, coeffs }
    }

    /// Raw estimate for one taper, straight from fitted coefficients.
    pub fn raw(&self, fit: &LocalFit, taper: &Taper) -> Vec<f64> {
        fit.raw_with(self, taper)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("grid must be strictly increasing with >= 2 points".into()));
    }
    Ok(())
}

/// Grid fitters for one grid and configuration template, keyed by bandwidth.
///
/// Simulations and bandwidth searches revisit the same few bandwidths over and
/// over; the bank builds each fitter once.
pub struct FitterBank {
    template: LorpeConfig,
    interior: bool,
    grid: Vec<f64>,
    max_degree: usize,
    fitters: RwLock<HashMap<u64, Arc<GridFitter>>>,
}

impl FitterBank {
    /// `template.h` and `template.degree` are ignored.
    pub fn new(template: LorpeConfig, grid: Vec<f64>, max_degree: usize) -> Self {
        FitterBank { template, interior: false, grid, max_degree, fitters: RwLock::new(HashMap::new()) }
    }

    /// Bank of interior-kernel fitters (see [`GridFitter::interior`]).
    pub fn interior(kernel: Kernel, grid: Vec<f64>, max_degree: usize) -> Self {
        let template = LorpeConfig {
            h: 1.0,
            degree: 0.0,
            kernel,
            support: Support::real_line(),
            boundary_mode: BoundaryMode::ClipPolys,
        };
        FitterBank { template, interior: true, grid, max_degree, fitters: RwLock::new(HashMap::new()) }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn template(&self) -> &LorpeConfig {
        &self.template
    }

    pub fn get(&self, h: f64) -> Result<Arc<GridFitter>> {
        if let Some(f) = self.fitters.read().unwrap().get(&h.to_bits()) {
            return Ok(f.clone());
        }
        let fitter = if self.interior {
            GridFitter::interior(self.template.kernel, h, self.grid.clone(), self.max_degree)?
        } else {
            let cfg = LorpeConfig { h, degree: 0.0, ..self.template };
            GridFitter::new(&cfg, self.grid.clone(), self.max_degree)?
        };
        let fitter = Arc::new(fitter);
        Ok(self.fitters.write().unwrap().entry(h.to_bits()).or_insert(fitter).clone())
    }
}

/// Coefficients from [`GridFitter::fit`].
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub n: usize,
    pub h: f64,
    pub max_degree: usize,
    /// `c_k` per grid point, row-major.
    pub coeffs: Vec<f64>,
}

impl LocalFit {
    pub fn coefficients(&self, g: usize) -> &[f64] {
        let m = self.max_degree + 1;
        &self.coeffs[g * m..(g + 1) * m]
    }

    fn raw_with(&self, fitter: &GridFitter, taper: &Taper) -> Vec<f64> {
        assert!(taper.max_degree() <= self.max_degree, "taper exceeds fitted degree");
        let terms = taper.max_degree() + 1;
        (0..fitter.grid.len())
            .map(|g| {
                let c = self.coefficients(g);
                let p = fitter.p_zero(g);
                (0..terms).map(|k| taper.get(k) * c[k] * p[k]).sum()
            })
            .collect()
    }

    pub fn raw(&self, fitter: &GridFitter, taper: &Taper) -> Vec<f64> {
        self.raw_with(fitter, taper)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gauss_cfg(h: f64, m: f64) -> LorpeConfig {
        LorpeConfig::new(h, m, Kernel::gaussian(), Support::real_line()).unwrap()
    }

    #[test]
    fn taper_shapes() {
        assert_eq!(Taper::from_degree(2.0).unwrap().weights(), &[1.0, 1.0, 1.0]);
        let t = Taper::from_degree(2.5).unwrap();
        assert_eq!(t.weights().len(), 4);
        assert_relative_eq!(t.get(3), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(t.get(4), 0.0);
        assert_relative_eq!(t.effective_dof(), 2.5, epsilon = 1e-12);
        assert_eq!(Taper::from_degree(0.0).unwrap().weights(), &[1.0]);
        assert!(Taper::from_degree(-1.0).is_err());
    }

    #[test]
    fn single_point_coefficients() {
        let cfg = gauss_cfg(1.0, 4.0);
        let sys = cfg.system(0.3, 5).unwrap();
        let c = coefficients(&[0.3], 0.3, &cfg, &sys);
        assert_relative_eq!(c[0], 0.398_942_280_401_432_7 * sys.eval(0, 0.0).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(sys.eval(0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        for k in [1, 3, 5] {
            assert!(c[k].abs() < 1e-14, "c_{k} = {}", c[k]);
        }
    }

    #[test]
    fn degree_zero_interior_is_kde() {
        let sample = [-0.4, 0.1, 0.2, 1.3];
        let cfg = gauss_cfg(0.7, 0.0);
        let raw = evaluate_raw(&sample, 0.05, &cfg).unwrap();
        let k = Kernel::gaussian();
        let kde: f64 = sample.iter().map(|&x| k.eval((0.05 - x) / 0.7)).sum::<f64>() / (4.0 * 0.7);
        assert_relative_eq!(raw, kde, epsilon = 1e-12);
    }

    #[test]
    fn empty_window_is_zero() {
        let cfg = LorpeConfig::new(0.1, 2.0, Kernel::epanechnikov(), Support::real_line()).unwrap();
        assert_eq!(evaluate_raw(&[5.0, 6.0], 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn estimate_is_normalized() {
        let sample: Vec<f64> = (0..50).map(|i| ((i as f64 + 0.5) / 50.0).powi(2) * 3.0).collect();
        let cfg = LorpeConfig::new(0.8, 2.0, Kernel::gaussian(), Support::new(0.0, f64::INFINITY).unwrap()).unwrap();
        let grid = default_grid(&sample, &cfg, 256);
        let est = estimate_on_grid(&sample, &cfg, &grid).unwrap();
        assert!((trapezoid(&est.grid, &est.value) - 1.0).abs() < 1e-9);
        assert!(est.value.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn grid_outside_support_rejected() {
        let cfg = LorpeConfig::new(0.5, 1.0, Kernel::gaussian(), Support::new(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(
            estimate_on_grid(&[0.5], &cfg, &[-0.1, 0.5]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn all_negative_is_error() {
        assert_eq!(
            DensityEstimate::from_raw(vec![0.0, 1.0], vec![-1.0, 0.0]),
            Err(Error::AllZeroDensity)
        );
    }

    #[test]
    fn fitter_matches_pointwise_evaluation() {
        let sample = [0.05, 0.2, 0.21, 0.5, 0.9, 0.93];
        let cfg = LorpeConfig::new(0.3, 3.5, Kernel::biweight(), Support::new(0.0, 1.0).unwrap()).unwrap();
        let grid = linspace(0.0, 1.0, 9);
        let fitter = GridFitter::new(&cfg, grid.clone(), 4).unwrap();
        let raw = fitter.fit(&sample).raw(&fitter, &cfg.taper());
        for (x, r) in grid.iter().zip(&raw) {
            assert_relative_eq!(*r, evaluate_raw(&sample, *x, &cfg).unwrap(), epsilon = 1e-12);
        }
    }
}
