//! Smoothing kernels for quantile-density estimation.
//!
//! Every kernel is a nonnegative Lipschitz density supported on `[-1, 1]`:
//!
//! ```text
//! kernel        K(z) on [-1,1]        R_K = int K^2    Lipschitz bound
//! Epanechnikov  0.75 (1 - z^2)        3/5              3/2
//! Triweight     (35/32) (1 - z^2)^3   350/429          21/(5 sqrt(5))
//! ```
//!
//! The scaled version used by the estimators is `K_h(z) = K(z/h)/h`, which
//! integrates to one for any bandwidth `h > 0`.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Compactly supported smoothing kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `K(z) = 0.75 (1 - z^2)` on `[-1, 1]`; the default.
    Epanechnikov,
    /// `K(z) = (35/32) (1 - z^2)^3` on `[-1, 1]`.
    Triweight,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Epanechnikov
    }
}

impl Kernel {
    /// Kernel value at `z`; zero outside `[-1, 1]`.
    pub fn evaluate<T: Real>(self, z: T) -> T {
        let one = T::one();
        if z.abs() > one {
            return T::zero();
        }
        let w = one - z * z;
        match self {
            Kernel::Epanechnikov => T::from_f64_lossy(0.75) * w,
            Kernel::Triweight => T::from_f64_lossy(35.0 / 32.0) * w * w * w,
        }
    }

    /// Scaled kernel `K_h(z) = K(z/h)/h`.
    pub fn evaluate_scaled<T: Real>(self, z: T, h: T) -> T {
        self.evaluate(z / h) / h
    }

    /// Roughness `R_K = int K(z)^2 dz`.
    pub fn roughness<T: Real>(self) -> T {
        match self {
            Kernel::Epanechnikov => T::from_f64_lossy(0.6),
            Kernel::Triweight => T::from_f64_lossy(350.0 / 429.0),
        }
    }

    /// Upper bound on `|K'(z)|` over the support.
    pub fn lipschitz_bound<T: Real>(self) -> T {
        match self {
            Kernel::Epanechnikov => T::from_f64_lossy(1.5),
            // max of |K'| at z^2 = 1/5: (105/16) (4/5)^2 / sqrt(5).
            Kernel::Triweight => T::from_f64_lossy(21.0 / (5.0 * 5.0_f64.sqrt())),
        }
    }

    /// Canonical lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Triweight => "triweight",
        }
    }

    /// All supported kernels.
    pub fn all() -> &'static [Kernel] {
        &[Kernel::Epanechnikov, Kernel::Triweight]
    }
}

impl std::str::FromStr for Kernel {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "triweight" => Ok(Kernel::Triweight),
            other => Err(crate::Error::Config(format!(
                "unknown kernel '{other}', expected one of: epanechnikov, triweight"
            ))),
        }
    }
}

impl std::fmt::Display for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
