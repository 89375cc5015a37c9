//! Kernel-weighted orthonormal polynomial systems.
//!
//! For a fit point the polynomials `P_0, P_1, ...` are orthonormal under the
//! kernel weight on the scaled interval `[a~, b~] = [(a - x_fit)/h, (b - x_fit)/h]`.
//! Integration runs over that interval intersected with the kernel support,
//! so the polynomials reshape themselves near the ends of the density support.
//!
//! Construction is the discretized Stieltjes procedure: the weight is sampled
//! on a Gauss-Legendre rule (512 nodes to start), the three-term recurrence
//! coefficients are generated directly on the discrete measure, and the node
//! count is doubled until the coefficients stop moving.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::{beta_normalization, Kernel};
use crate::quadrature::GaussLegendre;

const START_NODES: usize = 512;
const MAX_NODES: usize = 16384;
const COEFF_TOL: f64 = 1e-12;
const MIN_INTERVAL: f64 = 1e-12;
const MAX_RESIDUAL: f64 = 1e-6;

/// How the weight is treated where the kernel hangs over a support end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BoundaryMode {
    /// Integrate the plain kernel over the clipped interval.
    #[default]
    ClipPolys,
    /// Fold the overhanging part of the kernel back into the interval:
    /// `K(y) + K(2a~ - y) + K(2b~ - y)`.
    KernelMirror,
}

/// Orthonormal polynomial family for one fit point.
#[derive(Debug, Clone)]
pub struct PolySystem {
    kernel: Kernel,
    mode: BoundaryMode,
    a_tilde: f64,
    b_tilde: f64,
    lo: f64,
    hi: f64,
    max_degree: usize,
    /// `alpha[k]`, k = 0..max_degree
    alpha: Vec<f64>,
    /// `sqrt_beta[k]` multiplies `P_{k+1}`, k = 0..max_degree
    sqrt_beta: Vec<f64>,
    inv_sqrt_beta: Vec<f64>,
    p0: f64,
    norm_residual: f64,
    nodes: usize,
}

impl PolySystem {
    /// Builds `P_0..P_{max_degree}` on `[a_tilde, b_tilde]` (either end may be infinite).
    pub fn build(kernel: Kernel, a_tilde: f64, b_tilde: f64, max_degree: usize) -> Result<Self> {
        Self::build_with_mode(kernel, a_tilde, b_tilde, max_degree, BoundaryMode::ClipPolys)
    }

    pub fn build_with_mode(
        kernel: Kernel,
        a_tilde: f64,
        b_tilde: f64,
        max_degree: usize,
        mode: BoundaryMode,
    ) -> Result<Self> {
        if a_tilde.is_nan() || b_tilde.is_nan() || a_tilde >= b_tilde {
            return Err(Error::InvalidArgument(format!(
                "orthogonalization interval needs a~ < b~, got [{a_tilde}, {b_tilde}]"
            )));
        }
        let (lo, hi) = effective_interval(&kernel, a_tilde, b_tilde);
        if !(hi - lo >= MIN_INTERVAL) {
            return Err(Error::DegenerateInterval { lo, hi });
        }
        let weight = Weight { kernel, mode, a_tilde, b_tilde };
        let scale = hi - lo;

        let mut n = START_NODES;
        let mut cur = stieltjes(&weight, lo, hi, n, max_degree);
        loop {
            if n >= MAX_NODES {
                break;
            }
            let next = stieltjes(&weight, lo, hi, 2 * n, max_degree);
            n *= 2;
            let stable = (next.mu0 - cur.mu0).abs() <= COEFF_TOL * next.mu0
                && next
                    .alpha
                    .iter()
                    .zip(&cur.alpha)
                    .chain(next.sqrt_beta.iter().zip(&cur.sqrt_beta))
                    .all(|(a, b)| (a - b).abs() <= COEFF_TOL * scale);
            cur = next;
            if stable {
                break;
            }
        }

        let mut sys = PolySystem {
            kernel,
            mode,
            a_tilde,
            b_tilde,
            lo,
            hi,
            max_degree,
            alpha: cur.alpha,
            inv_sqrt_beta: cur.sqrt_beta.iter().map(|b| 1.0 / b).collect(),
            sqrt_beta: cur.sqrt_beta,
            p0: 1.0 / cur.mu0.sqrt(),
            norm_residual: 0.0,
            nodes: n,
        };
        sys.norm_residual = sys.orthonormality_residual(n);
        if !(sys.norm_residual <= MAX_RESIDUAL) {
            return Err(Error::IllConditioned(sys.norm_residual));
        }
        Ok(sys)
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    /// The requested interval `(a~, b~)`.
    pub fn interval(&self) -> (f64, f64) {
        (self.a_tilde, self.b_tilde)
    }

    /// Interval actually integrated over.
    pub fn effective_interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn norm_residual(&self) -> f64 {
        self.norm_residual
    }

    /// Gauss-Legendre node count the recurrence settled on.
    pub fn quadrature_nodes(&self) -> usize {
        self.nodes
    }

    /// Recurrence coefficients `(alpha_k, sqrt(beta_{k+1}))`.
    pub fn recurrence(&self) -> (&[f64], &[f64]) {
        (&self.alpha, &self.sqrt_beta)
    }

    /// Orthogonalization weight at `y` (kernel plus any mirrored parts); zero
    /// outside `[a~, b~]`.
    #[inline]
    pub fn weight(&self, y: f64) -> f64 {
        if y < self.a_tilde || y > self.b_tilde {
            return 0.0;
        }
        self.weight_fn().eval(y)
    }

    #[inline]
    fn weight_fn(&self) -> Weight {
        Weight {
            kernel: self.kernel,
            mode: self.mode,
            a_tilde: self.a_tilde,
            b_tilde: self.b_tilde,
        }
    }

    /// Quadrature nodes and weights (weights include the kernel) for this system.
    pub fn quadrature(&self) -> (Vec<f64>, Vec<f64>) {
        let weight = self.weight_fn();
        let (y, w) = weight.rule(self.lo, self.hi, self.nodes);
        let w = y.iter().zip(w).map(|(&y, w)| w * weight.eval(y)).collect();
        (y, w)
    }

    /// `P_k(y)`; outside the interval the same coefficients are used.
    pub fn eval(&self, k: usize, y: f64) -> Result<f64> {
        if k > self.max_degree {
            return Err(Error::DegreeOutOfRange { k, max: self.max_degree });
        }
        let mut prev = 0.0;
        let mut cur = self.p0;
        for j in 0..k {
            let next = ((y - self.alpha[j]) * cur - self.sb_prev(j) * prev) / self.sqrt_beta[j];
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Fills `out[k] = P_k(y)` for `k < out.len()`.
    #[inline]
    pub fn eval_all(&self, y: f64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.max_degree + 1);
        if out.is_empty() {
            return;
        }
        let mut prev = 0.0;
        let mut cur = self.p0;
        out[0] = cur;
        for j in 1..out.len() {
            let next = ((y - self.alpha[j - 1]) * cur - self.sb_prev(j - 1) * prev) / self.sqrt_beta[j - 1];
            prev = cur;
            cur = next;
            out[j] = cur;
        }
    }

    /// Adds `scale * P_k(y)` to `acc[k]` for `k < acc.len()`.
    #[inline]
    pub fn accumulate(&self, y: f64, scale: f64, acc: &mut [f64]) {
        let m = acc.len();
        if m == 0 {
            return;
        }
        let mut prev = 0.0;
        let mut cur = self.p0;
        acc[0] += scale * cur;
        let mut sb = 0.0;
        for j in 1..m {
            let next = ((y - self.alpha[j - 1]) * cur - sb * prev) * self.inv_sqrt_beta[j - 1];
            sb = self.sqrt_beta[j - 1];
            prev = cur;
            cur = next;
            acc[j] += scale * cur;
        }
    }

    #[inline]
    fn sb_prev(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.sqrt_beta[j - 1]
        }
    }

    /// Monomial coefficients (ascending powers) of `P_k`.
    pub fn monomial_coefficients(&self, k: usize) -> Result<Vec<f64>> {
        if k > self.max_degree {
            return Err(Error::DegreeOutOfRange { k, max: self.max_degree });
        }
        let mut prev: Vec<f64> = vec![];
        let mut cur = vec![self.p0];
        for j in 0..k {
            let mut next = vec![0.0; cur.len() + 1];
            for (i, &c) in cur.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= self.alpha[j] * c;
            }
            for (i, &c) in prev.iter().enumerate() {
                next[i] -= self.sb_prev(j) * c;
            }
            for c in next.iter_mut() {
                *c /= self.sqrt_beta[j];
            }
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// `max_{j,k} |int P_j P_k w - delta_jk|` on an `n`-node rule.
    pub fn orthonormality_residual(&self, n: usize) -> f64 {
        let (y, w) = self.weight_fn().rule(self.lo, self.hi, n);
        let m = self.max_degree + 1;
        let mut table = vec![0.0; m * y.len()];
        let mut buf = vec![0.0; m];
        for (q, &yq) in y.iter().enumerate() {
            self.eval_all(yq, &mut buf);
            let wq = w[q] * self.weight(yq);
            let s = wq.sqrt();
            for k in 0..m {
                table[k * y.len() + q] = buf[k] * s;
            }
        }
        let len = y.len();
        let mut worst: f64 = 0.0;
        for j in 0..m {
            let rj = &table[j * len..(j + 1) * len];
            for k in j..m {
                let rk = &table[k * len..(k + 1) * len];
                let g: f64 = rj.iter().zip(rk).map(|(a, b)| a * b).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// `[max(a~, -a_K), min(b~, a_K)]`, with the Gaussian clipped at 12.
pub fn effective_interval(kernel: &Kernel, a_tilde: f64, b_tilde: f64) -> (f64, f64) {
    let ak = kernel.effective_half_width();
    (a_tilde.max(-ak), b_tilde.min(ak))
}

#[derive(Clone, Copy)]
struct Weight {
    kernel: Kernel,
    mode: BoundaryMode,
    a_tilde: f64,
    b_tilde: f64,
}

impl Weight {
    #[inline]
    fn eval(&self, y: f64) -> f64 {
        let mut w = self.kernel.eval(y);
        if self.mode == BoundaryMode::KernelMirror {
            if self.a_tilde.is_finite() {
                w += self.kernel.eval(2.0 * self.a_tilde - y);
            }
            if self.b_tilde.is_finite() {
                w += self.kernel.eval(2.0 * self.b_tilde - y);
            }
        }
        w
    }

    /// Points inside `(lo, hi)` where the weight is not smooth.
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![];
        if self.mode == BoundaryMode::KernelMirror && self.kernel.is_compact() {
            let a = self.kernel.half_width();
            for c in [0.0, 2.0 * self.a_tilde, 2.0 * self.b_tilde] {
                if c.is_finite() {
                    pts.extend([c - a, c + a]);
                }
            }
        }
        pts.retain(|&p| p > lo && p < hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Gauss-Legendre rule with about `n` nodes, split at the breakpoints.
    fn rule(&self, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let breaks = self.breakpoints(lo, hi);
        if breaks.is_empty() {
            return GaussLegendre::cached(n).mapped(lo, hi);
        }
        let edges: Vec<f64> = std::iter::once(lo).chain(breaks).chain(std::iter::once(hi)).collect();
        let per = n.div_ceil(edges.len() - 1);
        let rule = GaussLegendre::cached(per);
        let mut y = Vec::with_capacity(per * (edges.len() - 1));
        let mut w = Vec::with_capacity(y.capacity());
        for e in edges.windows(2) {
            let (py, pw) = rule.mapped(e[0], e[1]);
            y.extend(py);
            w.extend(pw);
        }
        (y, w)
    }
}

struct Recurrence {
    mu0: f64,
    alpha: Vec<f64>,
    sqrt_beta: Vec<f64>,
}

fn stieltjes(weight: &Weight, lo: f64, hi: f64, n: usize, max_degree: usize) -> Recurrence {
    let (y, gl) = weight.rule(lo, hi, n);
    let n = y.len();
    let w: Vec<f64> = y.iter().zip(&gl).map(|(&y, g)| g * weight.eval(y)).collect();
    let mu0: f64 = w.iter().sum();
    let mut p_prev = vec![0.0; n];
    let mut p = vec![1.0 / mu0.sqrt(); n];
    let mut q = vec![0.0; n];
    let mut alpha = Vec::with_capacity(max_degree);
    let mut sqrt_beta = Vec::with_capacity(max_degree);
    let mut sb = 0.0;
    for _ in 0..max_degree {
        let a: f64 = (0..n).map(|i| w[i] * y[i] * p[i] * p[i]).sum();
        for i in 0..n {
            q[i] = (y[i] - a) * p[i] - sb * p_prev[i];
        }
        // one re-orthogonalization pass against the last two members
        let c1: f64 = (0..n).map(|i| w[i] * q[i] * p[i]).sum();
        let c0: f64 = (0..n).map(|i| w[i] * q[i] * p_prev[i]).sum();
        for i in 0..n {
            q[i] -= c1 * p[i] + c0 * p_prev[i];
        }
        let norm = (0..n).map(|i| w[i] * q[i] * q[i]).sum::<f64>().sqrt();
        alpha.push(a + c1);
        sqrt_beta.push(norm);
        sb = norm;
        for i in 0..n {
            p_prev[i] = p[i];
            p[i] = q[i] / norm;
        }
    }
    Recurrence { mu0, alpha, sqrt_beta }
}

/// Monomial coefficients (ascending) of the degree-`k` Gegenbauer polynomial
/// `C_k^(alpha)` scaled to be orthonormal under the symmetric beta kernel
/// `c_alpha (1 - x^2)^(alpha - 1/2)` on [-1, 1].
pub fn closed_form_gegenbauer(alpha: f64, k: usize) -> Vec<f64> {
    assert!(alpha >= 0.5, "alpha must be at least 1/2");
    let lam = alpha;
    let kf = k as f64;
    // ln of int C_k^2 (1-x^2)^(lam-1/2) dx
    let ln_norm = std::f64::consts::PI.ln() + (1.0 - 2.0 * lam) * 2f64.ln() + ln_gamma(kf + 2.0 * lam)
        - ln_gamma(kf + 1.0)
        - (kf + lam).ln()
        - 2.0 * ln_gamma(lam);
    let ln_scale = -0.5 * (ln_norm + beta_normalization(alpha).ln());
    let mut coeffs = vec![0.0; k + 1];
    for m in 0..=k / 2 {
        let p = k - 2 * m;
        let ln_mag = ln_gamma(kf - m as f64 + lam) - ln_gamma(lam) - ln_gamma(m as f64 + 1.0)
            - ln_gamma(p as f64 + 1.0)
            + p as f64 * 2f64.ln();
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[p] = sign * (ln_mag + ln_scale).exp();
    }
    coeffs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    kernel: u64,
    mode: BoundaryMode,
    lo: i64,
    hi: i64,
    exponent: i32,
    mirror_lo: i64,
    mirror_hi: i64,
    max_degree: usize,
}

/// Concurrent cache of polynomial systems.
///
/// Intervals are quantized to 1e-9 of their own length, so every interior
/// fit point maps onto one shared system.
#[derive(Default)]
pub struct PolyCache {
    map: RwLock<HashMap<CacheKey, Arc<PolySystem>>>,
}

impl PolyCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static PolyCache {
        static CACHE: OnceLock<PolyCache> = OnceLock::new();
        CACHE.get_or_init(PolyCache::new)
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.map.write().unwrap().clear();
    }

    pub fn get(
        &self,
        kernel: Kernel,
        a_tilde: f64,
        b_tilde: f64,
        max_degree: usize,
        mode: BoundaryMode,
    ) -> Result<Arc<PolySystem>> {
        let key = cache_key(&kernel, a_tilde, b_tilde, max_degree, mode);
        if let Some(sys) = self.map.read().unwrap().get(&key) {
            return Ok(sys.clone());
        }
        let sys = Arc::new(PolySystem::build_with_mode(kernel, a_tilde, b_tilde, max_degree, mode)?);
        Ok(self.map.write().unwrap().entry(key).or_insert(sys).clone())
    }
}

fn cache_key(kernel: &Kernel, a_tilde: f64, b_tilde: f64, max_degree: usize, mode: BoundaryMode) -> CacheKey {
    let (lo, hi) = effective_interval(kernel, a_tilde, b_tilde);
    let len = (hi - lo).max(MIN_INTERVAL);
    let exponent = len.log2().floor() as i32;
    let quantum = 1e-9 * 2f64.powi(exponent);
    let q = |v: f64| (v / quantum).round() as i64;
    let ak = kernel.effective_half_width();
    // mirrored parts only matter when the reflected kernel reaches back inside
    let (mirror_lo, mirror_hi) = match mode {
        BoundaryMode::KernelMirror => (
            if a_tilde > -2.0 * ak { q(a_tilde) } else { i64::MIN },
            if b_tilde < 2.0 * ak { q(b_tilde) } else { i64::MAX },
        ),
        BoundaryMode::ClipPolys => (0, 0),
    };
    CacheKey {
        kernel: kernel.key(),
        mode,
        lo: q(lo),
        hi: q(hi),
        exponent,
        mirror_lo,
        mirror_hi,
        max_degree,
    }
}
