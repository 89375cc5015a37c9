//! Symmetric weight kernels.
//!
//! The same kernels serve as the orthogonalization weight for the local
//! polynomial systems and as the smoothing kernel of the KDE baselines. All
//! kernels are normalized densities in the scaled coordinate `y = (x - x_fit) / h`.
//!
//! | name       | family                 | K(0)      | support  |
//! |------------|------------------------|-----------|----------|
//! | gauss      | Gaussian               | 1/sqrt(2pi) | R (clipped to [-12, 12]) |
//! | epan       | symmetric beta, a=3/2  | 3/4       | [-1, 1]  |
//! | biweight   | symmetric beta, a=5/2  | 15/16     | [-1, 1]  |
//! | triweight  | symmetric beta, a=7/2  | 35/32     | [-1, 1]  |
//! | quadweight | symmetric beta, a=9/2  | 315/256   | [-1, 1]  |
//! | uniform    | uniform                | 1/2       | [-1, 1]  |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Gaussian tails beyond this many standard deviations are dropped.
pub const GAUSS_CLIP: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    Gaussian,
    /// `c_alpha (1 - y^2)^(alpha - 1/2)` on [-1, 1].
    SymmetricBeta { alpha: f64 },
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    // cached c_alpha and exponent for the beta family
    norm: f64,
    power: f64,
}

impl Kernel {
    pub fn gaussian() -> Self {
        Kernel {
            family: KernelFamily::Gaussian,
            norm: 1.0 / (2.0 * PI).sqrt(),
            power: 0.0,
        }
    }

    pub fn uniform() -> Self {
        Kernel {
            family: KernelFamily::Uniform,
            norm: 0.5,
            power: 0.0,
        }
    }

    pub fn symmetric_beta(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.5) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "symmetric beta kernel needs alpha >= 1/2, got {alpha}"
            )));
        }
        Ok(Kernel {
            family: KernelFamily::SymmetricBeta { alpha },
            norm: beta_normalization(alpha),
            power: alpha - 0.5,
        })
    }

    pub fn epanechnikov() -> Self {
        Self::symmetric_beta(1.5).unwrap()
    }

    pub fn biweight() -> Self {
        Self::symmetric_beta(2.5).unwrap()
    }

    pub fn triweight() -> Self {
        Self::symmetric_beta(3.5).unwrap()
    }

    pub fn quadweight() -> Self {
        Self::symmetric_beta(4.5).unwrap()
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Support half-width `a_K`; infinite for the Gaussian.
    pub fn half_width(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => f64::INFINITY,
            _ => 1.0,
        }
    }

    /// Half-width actually used for quadrature and data windows.
    pub fn effective_half_width(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => GAUSS_CLIP,
            _ => 1.0,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self.family, KernelFamily::Gaussian)
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                if y.abs() > GAUSS_CLIP {
                    0.0
                } else {
                    self.norm * (-0.5 * y * y).exp()
                }
            }
            KernelFamily::Uniform => {
                if y.abs() <= 1.0 {
                    self.norm
                } else {
                    0.0
                }
            }
            KernelFamily::SymmetricBeta { .. } => {
                let s = 1.0 - y * y;
                if s < 0.0 {
                    0.0
                } else if self.power == 0.0 {
                    self.norm
                } else if self.power.fract() == 0.0 {
                    self.norm * s.powi(self.power as i32)
                } else {
                    self.norm * s.powf(self.power)
                }
            }
        }
    }

    /// Integral of `y^j K(y)` over the support, by quadrature.
    pub fn moment(&self, j: u32) -> f64 {
        let a = self.effective_half_width();
        GaussLegendre::cached(256).integrate(-a, a, |y| y.powi(j as i32) * self.eval(y))
    }

    /// Integral of `K(y)^2`.
    pub fn roughness(&self) -> f64 {
        let a = self.effective_half_width();
        GaussLegendre::cached(256).integrate(-a, a, |y| self.eval(y).powi(2))
    }

    /// Numerical integral of `K` over its support.
    ///
    /// The rule is doubled from 32 nodes until two successive estimates agree
    /// to 1e-14; beta kernels with a non-integer exponent converge slowly and
    /// may exhaust the node budget.
    pub fn norm_check(&self) -> Result<f64> {
        let a = self.effective_half_width();
        let mut n = 32;
        let mut prev = GaussLegendre::cached(n).integrate(-a, a, |y| self.eval(y));
        while n < 16384 {
            n *= 2;
            let cur = GaussLegendre::cached(n).integrate(-a, a, |y| self.eval(y));
            if (cur - prev).abs() <= 1e-14 {
                return Ok(cur);
            }
            prev = cur;
        }
        Err(Error::QuadratureFailure(format!(
            "kernel {self} norm still changing at {n} nodes"
        )))
    }

    /// Short CLI name.
    pub fn name(&self) -> String {
        match self.family {
            KernelFamily::Gaussian => "gauss".into(),
            KernelFamily::Uniform => "uniform".into(),
            KernelFamily::SymmetricBeta { alpha } => match alpha {
                a if a == 1.5 => "epan".into(),
                a if a == 2.5 => "biweight".into(),
                a if a == 3.5 => "triweight".into(),
                a if a == 4.5 => "quadweight".into(),
                a => format!("symbeta({a})"),
            },
        }
    }

    /// Stable identity used in cache keys.
    pub(crate) fn key(&self) -> u64 {
        match self.family {
            KernelFamily::Gaussian => 0,
            KernelFamily::Uniform => 1,
            KernelFamily::SymmetricBeta { alpha } => alpha.to_bits(),
        }
    }
}

/// `c_alpha = Gamma(alpha + 1) / (sqrt(pi) Gamma(alpha + 1/2))`.
pub fn beta_normalization(alpha: f64) -> f64 {
    let m = alpha - 0.5;
    if m.fract() == 0.0 && m <= 64.0 {
        // exact product (2m+1)!! / (2^(m+1) m!) for half-integer alpha
        return (1..=m as u32).fold(0.5, |c, j| c * (2 * j + 1) as f64 / (2 * j) as f64);
    }
    (ln_gamma(alpha + 1.0) - ln_gamma(alpha + 0.5)).exp() / PI.sqrt()
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss" | "gaussian" | "normal" => Ok(Kernel::gaussian()),
            "epan" | "epanechnikov" => Ok(Kernel::epanechnikov()),
            "biweight" => Ok(Kernel::biweight()),
            "triweight" => Ok(Kernel::triweight()),
            "quadweight" => Ok(Kernel::quadweight()),
            "uniform" => Ok(Kernel::uniform()),
            other => Err(Error::UnknownKernel(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all() -> Vec<Kernel> {
        vec![
            Kernel::gaussian(),
            Kernel::epanechnikov(),
            Kernel::biweight(),
            Kernel::triweight(),
            Kernel::quadweight(),
            Kernel::uniform(),
            Kernel::symmetric_beta(1.0).unwrap(),
        ]
    }

    #[test]
    fn point_values() {
        assert_relative_eq!(Kernel::epanechnikov().eval(0.0), 0.75, epsilon = 1e-15);
        assert_relative_eq!(Kernel::gaussian().eval(0.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_eq!(Kernel::biweight().eval(1.5), 0.0);
        assert_relative_eq!(Kernel::biweight().eval(0.0), 15.0 / 16.0, epsilon = 1e-14);
        assert_relative_eq!(Kernel::triweight().eval(0.0), 35.0 / 32.0, epsilon = 1e-14);
        assert_relative_eq!(Kernel::quadweight().eval(0.0), 315.0 / 256.0, epsilon = 1e-14);
        // alpha = 1/2 collapses to the uniform density
        assert_relative_eq!(Kernel::symmetric_beta(0.5).unwrap().eval(0.3), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_small_alpha() {
        assert!(Kernel::symmetric_beta(0.25).is_err());
        assert!(Kernel::symmetric_beta(f64::NAN).is_err());
    }

    #[test]
    fn norms() {
        for k in [Kernel::epanechnikov(), Kernel::biweight(), Kernel::triweight(), Kernel::quadweight()] {
            assert!((k.norm_check().unwrap() - 1.0).abs() < 1e-10, "{k}");
        }
        assert!((Kernel::uniform().norm_check().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_norm_matches_erf() {
        let expected = statrs::function::erf::erf(GAUSS_CLIP / 2f64.sqrt());
        let got = Kernel::gaussian().norm_check().unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn sqrt_beta_kernel_exhausts_budget() {
        // (1 - y^2)^(1/2) has an endpoint singularity in its derivative
        let k = Kernel::symmetric_beta(1.0).unwrap();
        match k.norm_check() {
            Ok(v) => assert!((v - 1.0).abs() < 1e-9),
            Err(Error::QuadratureFailure(_)) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn known_moments() {
        let g = Kernel::gaussian();
        assert_relative_eq!(g.moment(2), 1.0, epsilon = 1e-13);
        assert_relative_eq!(g.roughness(), 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-13);
        let e = Kernel::epanechnikov();
        assert_relative_eq!(e.moment(2), 0.2, epsilon = 1e-13);
        assert_relative_eq!(e.roughness(), 0.6, epsilon = 1e-13);
    }

    #[test]
    fn parse_names() {
        for k in all().into_iter().take(6) {
            let parsed: Kernel = k.name().parse().unwrap();
            assert_eq!(parsed, k);
        }
        assert!(matches!("cosine".parse::<Kernel>(), Err(Error::UnknownKernel(_))));
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(y in -15.0f64..15.0) {
            for k in all() {
                prop_assert_eq!(k.eval(y), k.eval(-y));
                prop_assert!(k.eval(y) >= 0.0);
            }
        }
    }
}
