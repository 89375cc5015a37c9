//! Reference estimators: KDE (optionally with data mirroring or a high-order
//! effective kernel) and orthogonal series estimation in Legendre polynomials.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lorpe::{DensityEstimate, GridFitter, LocalFit, Taper};
use crate::quadrature::linspace;

/// Default size of the discrete Legendre grid.
pub const OSDE_GRID: usize = 2048;
/// Default cap on the number of series terms.
pub const OSDE_J_MAX: usize = 48;
/// Term `j` is kept while `n theta_j^2 > OSDE_THRESHOLD * var(phi_j)`.
pub const OSDE_THRESHOLD: f64 = 2.0;

/// Plain KDE on `grid`.
///
/// With `mirror = Some(c)` every point also contributes its reflection
/// `2c - x_i`, and grid points on the far side of `c` (the side without data)
/// are set to zero.
pub fn kde_estimate(sample: &[f64], h: f64, kernel: Kernel, mirror: Option<f64>, grid: &[f64]) -> Result<DensityEstimate> {
    let raw = kde_raw(sample, h, kernel, mirror, grid)?;
    DensityEstimate::from_raw(grid.to_vec(), raw)
}

/// Unnormalized KDE values on `grid`.
pub fn kde_raw(sample: &[f64], h: f64, kernel: Kernel, mirror: Option<f64>, grid: &[f64]) -> Result<Vec<f64>> {
    check_kde_args(sample, h)?;
    let (points, side) = with_reflections(sample, mirror);
    let reach = kernel.effective_half_width() * h;
    let scale = 1.0 / (sample.len() as f64 * h);
    Ok(grid
        .par_iter()
        .map(|&x| {
            if side.is_some_and(|s| !s.keeps(x)) {
                return 0.0;
            }
            let lo = points.partition_point(|&v| v < x - reach);
            let hi = points.partition_point(|&v| v <= x + reach);
            scale * points[lo..hi].iter().map(|&xi| kernel.eval((x - xi) / h)).sum::<f64>()
        })
        .collect())
}

/// KDE with the interior effective kernel of order `order` (even, >= 2).
///
/// Order `r` corresponds to degree `M = r - 2`; odd terms vanish in the
/// interior so `M = r - 1` gives the same kernel.
pub fn kde_highorder_estimate(
    sample: &[f64],
    h: f64,
    kernel: Kernel,
    order: usize,
    mirror: Option<f64>,
    grid: &[f64],
) -> Result<DensityEstimate> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::InvalidArgument(format!("kernel order must be even and >= 2, got {order}")));
    }
    kde_effective_estimate(sample, h, kernel, (order - 2) as f64, mirror, grid)
}

/// KDE with the interior effective kernel of real degree `degree`.
pub fn kde_effective_estimate(
    sample: &[f64],
    h: f64,
    kernel: Kernel,
    degree: f64,
    mirror: Option<f64>,
    grid: &[f64],
) -> Result<DensityEstimate> {
    let taper = Taper::from_degree(degree)?;
    let fitter = GridFitter::interior(kernel, h, grid.to_vec(), taper.max_degree())?;
    let raw = kde_effective_raw(&fitter, sample, &taper, mirror)?;
    DensityEstimate::from_raw(grid.to_vec(), raw)
}

/// Raw high-order KDE values from an interior fitter (see [`GridFitter::interior`]).
pub fn kde_effective_raw(fitter: &GridFitter, sample: &[f64], taper: &Taper, mirror: Option<f64>) -> Result<Vec<f64>> {
    Ok(KdeFit::new(fitter, sample, mirror)?.raw(fitter, taper))
}

/// Interior-kernel fit of a (possibly mirrored) sample, reusable for any taper.
pub struct KdeFit {
    fit: LocalFit,
    boost: f64,
    side: Option<Side>,
}

impl KdeFit {
    pub fn new(fitter: &GridFitter, sample: &[f64], mirror: Option<f64>) -> Result<Self> {
        check_kde_args(sample, fitter.h())?;
        let (points, side) = with_reflections(sample, mirror);
        // the fit divides by the reflected count; undo that
        let boost = points.len() as f64 / sample.len() as f64;
        Ok(KdeFit { fit: fitter.fit(&points), boost, side })
    }

    pub fn raw(&self, fitter: &GridFitter, taper: &Taper) -> Vec<f64> {
        let mut raw = fitter.raw(&self.fit, taper);
        for (r, &x) in raw.iter_mut().zip(fitter.grid()) {
            *r = if self.side.is_some_and(|s| !s.keeps(x)) { 0.0 } else { *r * self.boost };
        }
        raw
    }
}

fn check_kde_args(sample: &[f64], h: f64) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Side {
    Above(f64),
    Below(f64),
}

impl Side {
    fn keeps(self, x: f64) -> bool {
        match self {
            Side::Above(c) => x >= c,
            Side::Below(c) => x <= c,
        }
    }
}

/// Sorted sample plus reflections about `mirror`, and the side the data lie on.
fn with_reflections(sample: &[f64], mirror: Option<f64>) -> (Vec<f64>, Option<Side>) {
    let mut points = sample.to_vec();
    let side = mirror.map(|c| {
        let above = sample.iter().filter(|&&x| x >= c).count();
        if 2 * above >= sample.len() {
            Side::Above(c)
        } else {
            Side::Below(c)
        }
    });
    if let Some(c) = mirror {
        points.extend(sample.iter().map(|&x| 2.0 * c - x));
    }
    points.sort_by(f64::total_cmp);
    (points, side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsdeConfig {
    /// Number of terms beyond the constant.
    pub terms: usize,
    pub grid_size: usize,
}

impl Default for OsdeConfig {
    fn default() -> Self {
        OsdeConfig { terms: 0, grid_size: OSDE_GRID }
    }
}

/// Linear map of the sample into `[0, 1]`: the extremes go to `1/(2n)` and `1 - 1/(2n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitMap {
    pub offset: f64,
    pub scale: f64,
}

impl UnitMap {
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::DegenerateSample("at least two points required".into()));
        }
        let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::DegenerateSample("all points are equal".into()));
        }
        let n = sample.len() as f64;
        let scale = (1.0 - 1.0 / n) / (max - min);
        Ok(UnitMap { offset: 0.5 / n - scale * min, scale })
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        self.offset + self.scale * x
    }

    pub fn from_unit(&self, z: f64) -> f64 {
        (z - self.offset) / self.scale
    }

    /// Estimated support: the preimage of `[0, 1]`.
    pub fn support(&self) -> (f64, f64) {
        (self.from_unit(0.0), self.from_unit(1.0))
    }
}

/// Orthonormal polynomials on `[0, 1]` given by a three-term recurrence.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    p0: f64,
    alpha: Vec<f64>,
    sqrt_beta: Vec<f64>,
}

impl LegendreBasis {
    /// Discrete Legendre polynomials: orthonormal under the uniform weight on
    /// the `points` midpoints `(j + 1/2)/points`, built by Gram-Schmidt
    /// (in its three-term Stieltjes form) with one re-orthogonalization pass.
    pub fn discrete(points: usize, degree: usize) -> Result<Self> {
        if degree >= points {
            return Err(Error::InvalidArgument(format!("degree {degree} needs more than {points} grid points")));
        }
        let z: Vec<f64> = (0..points).map(|j| (j as f64 + 0.5) / points as f64).collect();
        let w = 1.0 / points as f64;
        let mut prev = vec![0.0; points];
        let mut cur = vec![1.0; points];
        let mut next = vec![0.0; points];
        let mut alpha = Vec::with_capacity(degree);
        let mut sqrt_beta = Vec::with_capacity(degree);
        let mut sb = 0.0;
        for _ in 0..degree {
            let a: f64 = w * z.iter().zip(&cur).map(|(z, p)| z * p * p).sum::<f64>();
            for j in 0..points {
                next[j] = (z[j] - a) * cur[j] - sb * prev[j];
            }
            let c1: f64 = w * next.iter().zip(&cur).map(|(q, p)| q * p).sum::<f64>();
            let c0: f64 = w * next.iter().zip(&prev).map(|(q, p)| q * p).sum::<f64>();
            for j in 0..points {
                next[j] -= c1 * cur[j] + c0 * prev[j];
            }
            let norm = (w * next.iter().map(|q| q * q).sum::<f64>()).sqrt();
            alpha.push(a + c1);
            sqrt_beta.push(norm);
            sb = norm;
            for j in 0..points {
                prev[j] = cur[j];
                cur[j] = next[j] / norm;
            }
        }
        Ok(LegendreBasis { p0: 1.0, alpha, sqrt_beta })
    }

    /// Shifted Legendre polynomials `sqrt(2k+1) P_k(2z - 1)`, orthonormal on `[0, 1]`.
    pub fn continuous(degree: usize) -> Self {
        let alpha = vec![0.5; degree];
        let sqrt_beta = (1..=degree)
            .map(|k| {
                let k = k as f64;
                0.5 * k / ((2.0 * k - 1.0) * (2.0 * k + 1.0)).sqrt()
            })
            .collect();
        LegendreBasis { p0: 1.0, alpha, sqrt_beta }
    }

    pub fn degree(&self) -> usize {
        self.alpha.len()
    }

    /// Fills `out[j] = phi_j(z)` for `j < out.len()`.
    pub fn eval_all(&self, z: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let mut prev = 0.0;
        let mut cur = self.p0;
        out[0] = cur;
        for j in 1..out.len() {
            let sb = if j >= 2 { self.sqrt_beta[j - 2] } else { 0.0 };
            let next = ((z - self.alpha[j - 1]) * cur - sb * prev) / self.sqrt_beta[j - 1];
            prev = cur;
            cur = next;
            out[j] = cur;
        }
    }

    /// `theta_j = (1/n) sum_i phi_j(z_i)` for `j = 0..=degree`.
    pub fn coefficients(&self, z: &[f64]) -> Vec<f64> {
        let m = self.degree() + 1;
        let mut theta = vec![0.0; m];
        let mut buf = vec![0.0; m];
        for &zi in z {
            self.eval_all(zi, &mut buf);
            for (t, b) in theta.iter_mut().zip(&buf) {
                *t += b;
            }
        }
        theta.iter_mut().for_each(|t| *t /= z.len() as f64);
        theta
    }

    /// `sum_j theta_j phi_j(z)`.
    pub fn series(&self, theta: &[f64], z: f64) -> f64 {
        let mut buf = vec![0.0; theta.len()];
        self.eval_all(z, &mut buf);
        theta.iter().zip(&buf).map(|(t, b)| t * b).sum()
    }
}

/// OSDE with `cfg.terms` discrete Legendre terms, evaluated on `grid`
/// (defaults to `cfg.grid_size` points over the estimated support).
pub fn osde_estimate(sample: &[f64], cfg: &OsdeConfig, grid: Option<&[f64]>) -> Result<DensityEstimate> {
    let map = UnitMap::from_sample(sample)?;
    let basis = LegendreBasis::discrete(cfg.grid_size, cfg.terms)?;
    let z: Vec<f64> = sample.iter().map(|&x| map.to_unit(x)).collect();
    let theta = basis.coefficients(&z);
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => {
            let (lo, hi) = map.support();
            linspace(lo, hi, cfg.grid_size)
        }
    };
    let raw = grid
        .iter()
        .map(|&x| {
            let zx = map.to_unit(x);
            if (0.0..=1.0).contains(&zx) {
                map.scale * basis.series(&theta, zx)
            } else {
                0.0
            }
        })
        .collect();
    DensityEstimate::from_raw(grid, raw)
}

/// Number of OSDE terms by a risk-threshold scan.
///
/// Term `j` passes when `n theta_j^2 > OSDE_THRESHOLD * s_j^2`, with `s_j^2`
/// the sample variance of `phi_j(z_i)`; the scan stops after two consecutive
/// failures and returns the last passing `j` (0 if none).
pub fn select_osde_terms(sample: &[f64], j_max: usize) -> Result<usize> {
    select_osde_terms_on(sample, j_max, OSDE_GRID)
}

pub fn select_osde_terms_on(sample: &[f64], j_max: usize, grid_size: usize) -> Result<usize> {
    if j_max < 1 {
        return Err(Error::InvalidArgument("j_max must be >= 1".into()));
    }
    let map = UnitMap::from_sample(sample)?;
    let basis = LegendreBasis::discrete(grid_size, j_max)?;
    let n = sample.len() as f64;
    let mut sum = vec![0.0; j_max + 1];
    let mut sum_sq = vec![0.0; j_max + 1];
    let mut buf = vec![0.0; j_max + 1];
    for &x in sample {
        basis.eval_all(map.to_unit(x), &mut buf);
        for j in 0..=j_max {
            sum[j] += buf[j];
            sum_sq[j] += buf[j] * buf[j];
        }
    }
    let mut chosen = 0;
    let mut misses = 0;
    for j in 1..=j_max {
        let theta = sum[j] / n;
        let var = (sum_sq[j] - n * theta * theta) / (n - 1.0);
        if n * theta * theta > OSDE_THRESHOLD * var {
            chosen = j;
            misses = 0;
        } else {
            misses += 1;
            if misses == 2 {
                break;
            }
        }
    }
    Ok(chosen)
}

/// OSDE with continuous Legendre polynomials on a known interval `[a, b]`.
pub fn legendre_osde_raw(sample: &[f64], a: f64, b: f64, terms: usize, grid: &[f64]) -> Result<Vec<f64>> {
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("need a < b, got [{a}, {b}]")));
    }
    let basis = LegendreBasis::continuous(terms);
    let scale = 1.0 / (b - a);
    let z: Vec<f64> = sample.iter().map(|&x| (x - a) * scale).collect();
    let theta = basis.coefficients(&z);
    Ok(grid.iter().map(|&x| scale * basis.series(&theta, (x - a) * scale)).collect())
}
