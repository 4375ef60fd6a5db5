//! Order-statistic machinery: empirical bid quantiles, spacings, and kernel
//! quantile-density estimation on the canonical grid `{i/n}`.
//!
//! The quantile-density estimator is a weighted sum of bid spacings,
//!
//! ```text
//! q_hat_h(u) = sum_{i=1}^{n-1} K_h(u - i/n) (b_(i+1) - b_(i)),
//! ```
//!
//! which on the canonical grid is a discrete convolution of the spacings
//! vector with the sampled kernel filter. [`kernel_quantile_density`] runs
//! that convolution through an FFT; [`kernel_quantile_density_direct`] is
//! the independent double-loop evaluation kept for cross-checking, and
//! arbitrary off-grid points go through direct summation. The reciprocal
//! KDE estimator [`reciprocal_kde_quantile_density`] is provided only as a
//! benchmark competitor.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::kernel::Kernel;
use crate::scalar::Real;
use crate::{Error, Result};

/// Validated, ascending-sorted sample of bids.
#[derive(Clone, Debug, PartialEq)]
pub struct BidSample<T> {
    bids: Vec<T>,
}

impl<T: Real> BidSample<T> {
    /// Builds a sample from bids in any order; sorts them ascending.
    pub fn new(mut bids: Vec<T>) -> Result<Self> {
        Self::validate_values(&bids)?;
        bids.sort_by(|a, b| a.partial_cmp(b).expect("finite bids are comparable"));
        Ok(Self { bids })
    }

    /// Builds a sample from bids already sorted ascending.
    pub fn from_sorted(bids: Vec<T>) -> Result<Self> {
        Self::validate_values(&bids)?;
        if bids.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain(
                "from_sorted requires nondecreasing bids".into(),
            ));
        }
        Ok(Self { bids })
    }

    fn validate_values(bids: &[T]) -> Result<()> {
        if bids.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a bid sample needs at least 2 bids, got {}",
                bids.len()
            )));
        }
        if bids.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("bids must all be finite".into()));
        }
        Ok(())
    }

    /// Number of bids.
    pub fn n(&self) -> usize {
        self.bids.len()
    }

    /// Sorted bids, ascending.
    pub fn bids(&self) -> &[T] {
        &self.bids
    }

    /// Smallest bid.
    pub fn min(&self) -> T {
        self.bids[0]
    }

    /// Largest bid.
    pub fn max(&self) -> T {
        *self.bids.last().expect("sample is nonempty")
    }

    /// `max - min`.
    pub fn range(&self) -> T {
        self.max() - self.min()
    }

    /// Sample mean.
    pub fn mean(&self) -> T {
        self.bids.iter().copied().sum::<T>() / T::from_usize_exact(self.n())
    }

    /// Sample standard deviation (denominator `n - 1`).
    pub fn std_dev(&self) -> T {
        let mean = self.mean();
        let ss = self
            .bids
            .iter()
            .map(|&b| (b - mean) * (b - mean))
            .sum::<T>();
        (ss / T::from_usize_exact(self.n() - 1)).sqrt()
    }

    /// Empirical bid quantile `Q_hat(u) = b_(floor(nu)+1)`, with `Q_hat(1)`
    /// equal to the largest bid.
    pub fn empirical_quantile(&self, u: T) -> Result<T> {
        Ok(self.bids[self.order_index(u)?])
    }

    /// Index of the order statistic `b_(floor(nu)+1)` (0-based).
    pub fn order_index(&self, u: T) -> Result<usize> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::Domain(format!(
                "quantile level must lie in [0, 1], got {u}"
            )));
        }
        Ok(floor_level_index(T::from_usize_exact(self.n()) * u).min(self.n() - 1))
    }

    /// Consecutive differences of the ordered bids.
    pub fn spacings(&self) -> Spacings<T> {
        let diffs = self.bids.windows(2).map(|w| w[1] - w[0]).collect();
        Spacings {
            diffs,
            n: self.n(),
        }
    }
}

/// Consecutive differences of ordered bids; entry `i` is
/// `b_(i+2) - b_(i+1)` in order-statistic numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct Spacings<T> {
    diffs: Vec<T>,
    n: usize,
}

impl<T: Real> Spacings<T> {
    /// Wraps a raw spacings vector for a sample of size `diffs.len() + 1`.
    pub fn from_diffs(diffs: Vec<T>) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::InsufficientData(
                "spacings require a sample of at least 2 bids".into(),
            ));
        }
        if diffs.iter().any(|d| !d.is_finite() || *d < T::zero()) {
            return Err(Error::Domain(
                "spacings must be finite and nonnegative".into(),
            ));
        }
        let n = diffs.len() + 1;
        Ok(Self { diffs, n })
    }

    /// The differences, length `n - 1`.
    pub fn diffs(&self) -> &[T] {
        &self.diffs
    }

    /// Size of the originating sample.
    pub fn n(&self) -> usize {
        self.n
    }
}

/// Computes the spacings of a sorted sample; requires `n >= 2`.
pub fn compute_spacings<T: Real>(sample: &BidSample<T>) -> Result<Spacings<T>> {
    if sample.n() < 2 {
        return Err(Error::InsufficientData(
            "spacings require at least 2 bids".into(),
        ));
    }
    Ok(sample.spacings())
}

/// How a bandwidth value was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// Fixed by the caller.
    Manual,
    /// `h = 1.06 s n^(-0.34)`, clamped to `(1/n, 0.49)`.
    UndersmoothedRuleOfThumb,
}

/// Which dispersion measure feeds the rule of thumb.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthScale {
    /// Sample standard deviation of the bids; the default.
    Bids,
    /// Sample standard deviation of the bid spacings. Spacings scale like
    /// `1/n`, so this variant produces bandwidths near the `1/n` floor; it
    /// is exposed for comparison only.
    Spacings,
}

/// Smoothing bandwidth on the quantile scale, `0 < h < 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth<T> {
    h: T,
    rule: BandwidthRule,
}

impl<T: Real> Bandwidth<T> {
    /// Fixed bandwidth; must lie strictly inside `(0, 1/2)`.
    pub fn manual(h: T) -> Result<Self> {
        if !h.is_finite() || h <= T::zero() || h >= T::from_f64_lossy(0.5) {
            return Err(Error::Config(format!(
                "bandwidth must lie in (0, 0.5), got {h}"
            )));
        }
        Ok(Self {
            h,
            rule: BandwidthRule::Manual,
        })
    }

    /// The bandwidth value.
    pub fn value(&self) -> T {
        self.h
    }

    /// How the value was chosen.
    pub fn rule(&self) -> BandwidthRule {
        self.rule
    }
}

/// Rule-of-thumb bandwidth `1.06 s n^(-0.34)` from the bid standard
/// deviation, clamped to `(1/n, 0.49)`.
pub fn rule_of_thumb_bandwidth<T: Real>(sample: &BidSample<T>) -> Result<Bandwidth<T>> {
    rule_of_thumb_bandwidth_scaled(sample, BandwidthScale::Bids)
}

/// Rule-of-thumb bandwidth with an explicit choice of dispersion scale.
pub fn rule_of_thumb_bandwidth_scaled<T: Real>(
    sample: &BidSample<T>,
    scale: BandwidthScale,
) -> Result<Bandwidth<T>> {
    let s = match scale {
        BandwidthScale::Bids => sample.std_dev(),
        BandwidthScale::Spacings => {
            let spacing_sample = BidSample::new(sample.spacings().diffs().to_vec())?;
            spacing_sample.std_dev()
        }
    };
    rule_of_thumb_from(s, sample.n())
}

/// Rule-of-thumb bandwidth from precomputed dispersion `s` and size `n`.
pub fn rule_of_thumb_from<T: Real>(s: T, n: usize) -> Result<Bandwidth<T>> {
    if n < 2 {
        return Err(Error::InsufficientData(
            "bandwidth rule requires at least 2 bids".into(),
        ));
    }
    if !s.is_finite() || s <= T::zero() {
        return Err(Error::DegenerateSample(
            "bandwidth rule requires a sample with positive dispersion".into(),
        ));
    }
    let nf = T::from_usize_exact(n);
    let raw = T::from_f64_lossy(1.06) * s * nf.powf(T::from_f64_lossy(-0.34));
    let h = raw
        .max(nf.recip())
        .min(T::from_f64_lossy(0.49));
    Ok(Bandwidth {
        h,
        rule: BandwidthRule::UndersmoothedRuleOfThumb,
    })
}

/// The canonical grid `{i/n}`, `i = 1..n-1` (length `n - 1`).
pub fn canonical_grid<T: Real>(n: usize) -> Vec<T> {
    let nf = T::from_usize_exact(n);
    (1..n).map(|i| T::from_usize_exact(i) / nf).collect()
}

/// `floor(nu)` with a 1e-9 guard against representation error.
///
/// A level stored as `j/n` can round to `j - epsilon` when scaled back by
/// `n`, which would floor to `j - 1` and silently shift every
/// order-statistic index by one. The guard restores the mathematical value;
/// it cannot capture a genuinely distinct level because grid increments
/// scale like 1, far above 1e-9.
pub(crate) fn floor_level_index<T: Real>(nu: T) -> usize {
    (nu + T::from_f64_lossy(1e-9))
        .floor()
        .to_usize()
        .expect("scaled level fits usize")
}

/// Quantile-density estimates on an increasing grid of levels.
#[derive(Clone, Debug, Serialize)]
pub struct QuantileEstimates<T> {
    grid: Vec<T>,
    q_hat: Vec<T>,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    trim: T,
    n: usize,
    fft: bool,
}

impl<T: Real> QuantileEstimates<T> {
    /// Grid of quantile levels.
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    /// Estimated quantile density at each grid point.
    pub fn q_hat(&self) -> &[T] {
        &self.q_hat
    }

    /// The bandwidth used.
    pub fn bandwidth(&self) -> Bandwidth<T> {
        self.bandwidth
    }

    /// The kernel used.
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// Size of the originating sample.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the FFT convolution path produced the values.
    pub fn used_fft(&self) -> bool {
        self.fft
    }

    /// Extra trimming parameter `tau` (defaults to the bandwidth).
    pub fn trim(&self) -> T {
        self.trim
    }

    /// Overrides the trimming parameter; `0 <= tau < 1/2`.
    pub fn set_trim(&mut self, tau: T) -> Result<()> {
        if !tau.is_finite() || tau < T::zero() || tau >= T::from_f64_lossy(0.5) {
            return Err(Error::Config(format!(
                "trim must lie in [0, 0.5), got {tau}"
            )));
        }
        self.trim = tau;
        Ok(())
    }

    /// The trimmed interval `[max(h, tau), 1 - max(h, tau)]`.
    pub fn trim_bounds(&self) -> (T, T) {
        let lo = self.bandwidth.value().max(self.trim);
        (lo, T::one() - lo)
    }

    /// Indices into the grid whose levels fall inside the trimmed interval.
    ///
    /// Boundary comparisons carry a 1e-12 slack so that levels like 0.93
    /// and `1.0 - 0.07` count as equal; grid spacings are many orders of
    /// magnitude wider.
    pub fn trimmed_indices(&self) -> Result<std::ops::Range<usize>> {
        let (lo, hi) = self.trim_bounds();
        trimmed_indices_for(&self.grid, lo, hi)
    }

    /// Whether grid point `k` lies within one bandwidth of an endpoint,
    /// where boundary bias makes the estimate unreliable.
    pub fn in_boundary_region(&self, k: usize) -> bool {
        let h = self.bandwidth.value();
        self.grid[k] < h || self.grid[k] > T::one() - h
    }
}

/// Indices of an increasing grid falling inside `[lo, hi]`.
///
/// Boundary comparisons carry a 1e-12 slack so that levels like 0.93 and
/// `1.0 - 0.07` count as equal; grid spacings are many orders of magnitude
/// wider. Every consumer of the trimmed interval must come through here so
/// bands, simulated processes and coverage checks agree on the grid.
pub(crate) fn trimmed_indices_for<T: Real>(
    grid: &[T],
    lo: T,
    hi: T,
) -> Result<std::ops::Range<usize>> {
    let eps = T::from_f64_lossy(1e-12);
    let mut start = grid.len();
    for (k, &u) in grid.iter().enumerate() {
        if u >= lo - eps {
            start = k;
            break;
        }
    }
    let mut end = start;
    for (k, &u) in grid.iter().enumerate().skip(start) {
        if u <= hi + eps {
            end = k + 1;
        } else {
            break;
        }
    }
    if start >= end {
        return Err(Error::Trim(format!(
            "trimmed interval [{lo}, {hi}] contains no grid points"
        )));
    }
    Ok(start..end)
}

/// Reusable FFT convolution plan for a fixed `(n, kernel, h)` triple.
///
/// Holds the planned transforms and the spectrum of the sampled kernel
/// filter, so repeated applications (the simulation inner loop) only pay two
/// FFTs of the new spacings vector.
pub struct GridConvolver<T: Real> {
    n: usize,
    half_width: usize,
    padded: usize,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    filter_spectrum: Vec<Complex<T>>,
}

impl<T: Real> GridConvolver<T> {
    /// Plans a convolver for samples of size `n`.
    pub fn new(n: usize, kernel: Kernel, bandwidth: Bandwidth<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientData(
                "convolution grid requires n >= 2".into(),
            ));
        }
        let h = bandwidth.value();
        let nf = T::from_usize_exact(n);
        let half_width = (nf * h)
            .ceil()
            .to_usize()
            .expect("ceil(n*h) fits usize");
        let conv_len = (n - 1) + 2 * half_width;
        let padded = conv_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(padded);
        let ifft = planner.plan_fft_inverse(padded);

        // Filter g[m] = K_h((m - L)/n), m = 0..2L; support is |z| <= h.
        let mut filter = vec![Complex::new(T::zero(), T::zero()); padded];
        for (m, slot) in filter.iter_mut().enumerate().take(2 * half_width + 1) {
            let lag = T::from_usize_exact(m) - T::from_usize_exact(half_width);
            slot.re = kernel.evaluate_scaled(lag / nf, h);
        }
        fft.process(&mut filter);

        Ok(Self {
            n,
            half_width,
            padded,
            fft,
            ifft,
            filter_spectrum: filter,
        })
    }

    /// Sample size the plan was built for.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Convolves a spacings vector of length `n - 1` with the kernel
    /// filter, returning the quantile density on the canonical grid.
    pub fn apply(&self, diffs: &[T]) -> Result<Vec<T>> {
        if diffs.len() != self.n - 1 {
            return Err(Error::Domain(format!(
                "convolver planned for {} spacings, got {}",
                self.n - 1,
                diffs.len()
            )));
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.padded];
        for (slot, &d) in buf.iter_mut().zip(diffs) {
            slot.re = d;
        }
        self.fft.process(&mut buf);
        for (slot, &f) in buf.iter_mut().zip(&self.filter_spectrum) {
            *slot = *slot * f;
        }
        self.ifft.process(&mut buf);
        let scale = T::from_usize_exact(self.padded).recip();
        // Output j (grid level (j+1)/n) sits at lag offset L in the full
        // linear convolution.
        Ok(buf[self.half_width..self.half_width + self.n - 1]
            .iter()
            .map(|c| c.re * scale)
            .collect())
    }
}

fn validate_estimation_inputs<T: Real>(spacings: &Spacings<T>) -> Result<()> {
    if spacings.n() < 2 {
        return Err(Error::InsufficientData(
            "quantile density requires n >= 2".into(),
        ));
    }
    Ok(())
}

/// Kernel quantile-density estimate on the canonical grid `{i/n}` via FFT
/// convolution.
pub fn kernel_quantile_density<T: Real>(
    spacings: &Spacings<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
) -> Result<QuantileEstimates<T>> {
    validate_estimation_inputs(spacings)?;
    let convolver = GridConvolver::new(spacings.n(), kernel, bandwidth)?;
    let q_hat = convolver.apply(spacings.diffs())?;
    Ok(QuantileEstimates {
        grid: canonical_grid(spacings.n()),
        q_hat,
        bandwidth,
        kernel,
        trim: bandwidth.value(),
        n: spacings.n(),
        fft: true,
    })
}

/// Independent double-loop evaluation of the estimator on the canonical
/// grid; the cross-check oracle for the FFT path.
pub fn kernel_quantile_density_direct<T: Real>(
    spacings: &Spacings<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
) -> Result<QuantileEstimates<T>> {
    validate_estimation_inputs(spacings)?;
    let n = spacings.n();
    let h = bandwidth.value();
    let nf = T::from_usize_exact(n);
    let grid: Vec<T> = canonical_grid(n);
    let q_hat = grid
        .iter()
        .map(|&u| {
            let mut acc = T::zero();
            for (i, &d) in spacings.diffs().iter().enumerate() {
                let center = T::from_usize_exact(i + 1) / nf;
                acc = acc + kernel.evaluate_scaled(u - center, h) * d;
            }
            acc
        })
        .collect();
    Ok(QuantileEstimates {
        grid,
        q_hat,
        bandwidth,
        kernel,
        trim: bandwidth.value(),
        n,
        fft: false,
    })
}

/// Estimator evaluated on an arbitrary increasing grid of levels.
///
/// If the grid is exactly the canonical `{i/n}` the FFT path runs;
/// otherwise the operation falls back to direct summation and records
/// `used_fft() == false` in the result.
pub fn kernel_quantile_density_on_grid<T: Real>(
    spacings: &Spacings<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    grid: &[T],
) -> Result<QuantileEstimates<T>> {
    validate_estimation_inputs(spacings)?;
    if grid.is_empty() {
        return Err(Error::Domain("evaluation grid is empty".into()));
    }
    if grid
        .iter()
        .any(|&u| !u.is_finite() || u < T::zero() || u > T::one())
    {
        return Err(Error::Domain(
            "evaluation grid must lie within [0, 1]".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "evaluation grid must be strictly increasing".into(),
        ));
    }
    let canonical = canonical_grid::<T>(spacings.n());
    if grid == canonical.as_slice() {
        return kernel_quantile_density(spacings, kernel, bandwidth);
    }
    let q_hat = kernel_quantile_density_at(spacings, kernel, bandwidth, grid);
    Ok(QuantileEstimates {
        grid: grid.to_vec(),
        q_hat,
        bandwidth,
        kernel,
        trim: bandwidth.value(),
        n: spacings.n(),
        fft: false,
    })
}

/// Raw estimator values at arbitrary levels (windowed direct summation).
///
/// Only spacings with `|u - i/n| <= h` contribute; the window arithmetic
/// changes nothing relative to the full sum because the kernel vanishes
/// outside its support.
pub fn kernel_quantile_density_at<T: Real>(
    spacings: &Spacings<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    points: &[T],
) -> Vec<T> {
    let n = spacings.n();
    let h = bandwidth.value();
    let nf = T::from_usize_exact(n);
    points
        .iter()
        .map(|&u| {
            let lo = ((u - h) * nf).ceil().to_f64().expect("finite level").max(1.0) as usize;
            let hi_f = ((u + h) * nf)
                .floor()
                .to_f64()
                .expect("finite level")
                .min((n - 1) as f64);
            let mut acc = T::zero();
            if hi_f >= lo as f64 {
                for i in lo..=hi_f as usize {
                    let z = u - T::from_usize_exact(i) / nf;
                    acc = acc + kernel.evaluate_scaled(z, h) * spacings.diffs()[i - 1];
                }
            }
            acc
        })
        .collect()
}

/// Reciprocal-KDE quantile-density estimate at a single level `u`.
///
/// Estimates the bid density at `Q_hat(u)` by a kernel density estimate
/// with bandwidth `l` on the bid scale, and returns its reciprocal. Kept
/// for benchmark comparison; each evaluation is O(n).
pub fn reciprocal_kde_quantile_density<T: Real>(
    sample: &BidSample<T>,
    l: T,
    u: T,
) -> Result<T> {
    if sample.range() == T::zero() {
        return Err(Error::InfiniteEstimate(
            "sample of identical bids has zero quantile-density mass".into(),
        ));
    }
    if !l.is_finite() || l <= T::zero() || l >= sample.range() {
        return Err(Error::Domain(format!(
            "reciprocal-KDE bandwidth must lie in (0, range(bids)), got {l}"
        )));
    }
    let b = sample.empirical_quantile(u)?;
    let n = T::from_usize_exact(sample.n());
    let mut density = T::zero();
    for &bi in sample.bids() {
        density = density + Kernel::Epanechnikov.evaluate((b - bi) / l);
    }
    density = density / (n * l);
    if density <= T::zero() {
        return Err(Error::InfiniteEstimate(format!(
            "zero density estimate at u = {u}"
        )));
    }
    Ok(density.recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;

    fn uniform_sample(n: usize, seed: u64) -> BidSample<f64> {
        BidSample::from_sorted(rng::sorted_uniforms(n, &mut rng::stream(seed, &[0]))).unwrap()
    }

    #[test]
    fn empirical_quantile_matches_order_statistics() {
        let s = BidSample::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(s.empirical_quantile(0.5).unwrap(), 0.2);
        assert_eq!(s.empirical_quantile(1.0).unwrap(), 0.3);
        let s = BidSample::new(vec![5.0, 1.0, 9.0]).unwrap();
        assert_eq!(s.empirical_quantile(0.0).unwrap(), 1.0);
        assert!(s.empirical_quantile(1.5).is_err());
        assert!(s.empirical_quantile(-0.1).is_err());
    }

    #[test]
    fn empirical_quantile_is_nondecreasing() {
        let s = uniform_sample(500, 3);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let q = s.empirical_quantile(i as f64 / 1000.0).unwrap();
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn spacings_match_definition() {
        let s = BidSample::new(vec![1.0, 3.0, 6.0]).unwrap();
        assert_eq!(compute_spacings(&s).unwrap().diffs(), &[2.0, 3.0]);
        let s = BidSample::new(vec![2.0, 2.0, 5.0]).unwrap();
        assert_eq!(compute_spacings(&s).unwrap().diffs(), &[0.0, 3.0]);
        let n = 11;
        let s = BidSample::new((0..n).map(|i| i as f64 / (n - 1) as f64).collect()).unwrap();
        for &d in compute_spacings(&s).unwrap().diffs() {
            assert_abs_diff_eq!(d, 1.0 / (n - 1) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn spacings_sum_to_range() {
        let s = uniform_sample(2000, 8);
        let total: f64 = s.spacings().diffs().iter().sum();
        assert_abs_diff_eq!(total, s.range(), epsilon = 1e-12 * s.range().abs());
    }

    #[test]
    fn sample_validation() {
        assert!(BidSample::new(vec![1.0]).is_err());
        assert!(BidSample::new(vec![1.0, f64::NAN]).is_err());
        assert!(BidSample::from_sorted(vec![2.0, 1.0]).is_err());
        assert!(Spacings::from_diffs(vec![-0.5]).is_err());
    }

    #[test]
    fn equally_spaced_bids_give_unit_density() {
        let n = 1000;
        let s = BidSample::new((0..n).map(|i| i as f64 / (n - 1) as f64).collect()).unwrap();
        let bw = Bandwidth::manual(0.05).unwrap();
        let est = kernel_quantile_density(&s.spacings(), Kernel::Epanechnikov, bw).unwrap();
        // Grid point u = 0.5 is index 499 (level 500/1000).
        let mid = est.q_hat()[499];
        assert!((mid - 1.0).abs() < 0.01, "q_hat(0.5) = {mid}");
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        for &(n, h) in &[(50usize, 0.1), (333, 0.05), (1000, 0.01)] {
            let s = uniform_sample(n, n as u64);
            let bw = Bandwidth::manual(h).unwrap();
            for &kernel in Kernel::all() {
                let fft = kernel_quantile_density(&s.spacings(), kernel, bw).unwrap();
                let naive = kernel_quantile_density_direct(&s.spacings(), kernel, bw).unwrap();
                assert!(fft.used_fft());
                assert!(!naive.used_fft());
                for (a, b) in fft.q_hat().iter().zip(naive.q_hat()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn on_grid_detects_canonical_levels() {
        let s = uniform_sample(64, 1);
        let bw = Bandwidth::manual(0.1).unwrap();
        let canonical = canonical_grid::<f64>(64);
        let est =
            kernel_quantile_density_on_grid(&s.spacings(), Kernel::Epanechnikov, bw, &canonical)
                .unwrap();
        assert!(est.used_fft());
        let off = vec![0.25, 0.5, 0.75];
        let est =
            kernel_quantile_density_on_grid(&s.spacings(), Kernel::Epanechnikov, bw, &off).unwrap();
        assert!(!est.used_fft());
        assert_eq!(est.q_hat().len(), 3);
        let direct = kernel_quantile_density_at(&s.spacings(), Kernel::Epanechnikov, bw, &off);
        assert_eq!(est.q_hat(), direct.as_slice());
    }

    #[test]
    fn off_grid_points_match_full_summation() {
        let s = uniform_sample(200, 17);
        let bw = Bandwidth::manual(0.07).unwrap();
        let points = vec![0.0814, 0.3331, 0.52, 0.9];
        let windowed = kernel_quantile_density_at(&s.spacings(), Kernel::Epanechnikov, bw, &points);
        for (&u, &got) in points.iter().zip(&windowed) {
            let mut full = 0.0;
            for (i, &d) in s.spacings().diffs().iter().enumerate() {
                let z = u - (i + 1) as f64 / 200.0;
                full += Kernel::Epanechnikov.evaluate_scaled(z, 0.07) * d;
            }
            assert_abs_diff_eq!(got, full, epsilon = 1e-12);
        }
    }

    #[test]
    fn estimates_are_nonnegative() {
        let s = uniform_sample(400, 9);
        let bw = rule_of_thumb_bandwidth(&s).unwrap();
        let est = kernel_quantile_density(&s.spacings(), Kernel::Epanechnikov, bw).unwrap();
        assert!(est.q_hat().iter().all(|&q| q >= -1e-12));
    }

    #[test]
    fn mass_is_preserved_away_from_boundary() {
        // For equally spaced bids, the Riemann sum of q_hat over the trimmed
        // grid approximates (1 - 2h) * range within 2%.
        let n = 2000;
        let s = BidSample::new((0..n).map(|i| i as f64 * 2.0 / (n - 1) as f64).collect()).unwrap();
        let bw = Bandwidth::manual(0.05).unwrap();
        let est = kernel_quantile_density(&s.spacings(), Kernel::Epanechnikov, bw).unwrap();
        let idx = est.trimmed_indices().unwrap();
        let mass: f64 = est.q_hat()[idx].iter().sum::<f64>() / n as f64;
        let expected = (1.0 - 2.0 * 0.05) * s.range();
        assert!(
            (mass - expected).abs() / expected < 0.02,
            "mass {mass}, expected {expected}"
        );
    }

    #[test]
    fn trimmed_indices_cover_exactly_the_trim_interval() {
        let s = uniform_sample(100, 12);
        let bw = Bandwidth::manual(0.07).unwrap();
        let mut est = kernel_quantile_density(&s.spacings(), Kernel::Epanechnikov, bw).unwrap();
        let idx = est.trimmed_indices().unwrap();
        // Grid is i/100; [0.07, 0.93] covers i = 7..=93.
        assert_eq!(idx, 6..93);
        assert!(est.in_boundary_region(0));
        assert!(!est.in_boundary_region(50));
        est.set_trim(0.25).unwrap();
        let idx = est.trimmed_indices().unwrap();
        assert_eq!(idx, 24..75);
        assert!(est.set_trim(0.5).is_err());
    }

    #[test]
    fn rule_of_thumb_reproduces_reported_bandwidths() {
        let h = rule_of_thumb_from(0.22_f64, 10_328).unwrap().value();
        assert!((h - 0.0101).abs() < 3e-4, "h = {h}");
        let h = rule_of_thumb_from(0.238_f64, 60_758).unwrap().value();
        assert!((h - 0.006).abs() < 3e-4, "h = {h}");
    }

    #[test]
    fn rule_of_thumb_rejects_degenerate_samples() {
        let s = BidSample::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            rule_of_thumb_bandwidth(&s),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn rule_of_thumb_clamps_into_valid_range() {
        let h = rule_of_thumb_from(1e-9_f64, 1000).unwrap().value();
        assert_eq!(h, 1e-3);
        let h = rule_of_thumb_from(100.0_f64, 100).unwrap().value();
        assert_eq!(h, 0.49);
    }

    #[test]
    fn spacings_scale_gives_near_floor_bandwidths() {
        let s = uniform_sample(1000, 21);
        let bids = rule_of_thumb_bandwidth_scaled(&s, BandwidthScale::Bids)
            .unwrap()
            .value();
        let spac = rule_of_thumb_bandwidth_scaled(&s, BandwidthScale::Spacings)
            .unwrap()
            .value();
        assert!(spac < bids / 10.0);
    }

    #[test]
    fn manual_bandwidth_validation() {
        assert!(Bandwidth::manual(0.0).is_err());
        assert!(Bandwidth::manual(0.5).is_err());
        assert!(Bandwidth::manual(-0.1).is_err());
        assert!(Bandwidth::manual(0.25).is_ok());
    }

    #[test]
    fn reciprocal_kde_tracks_convolution_estimator() {
        for seed in 0..3 {
            let s = uniform_sample(10_000, 100 + seed);
            let bw = rule_of_thumb_bandwidth(&s).unwrap();
            let est = kernel_quantile_density(&s.spacings(), Kernel::Epanechnikov, bw).unwrap();
            let q_conv = est.q_hat()[4999];
            // Match-up bandwidth on the bid scale: l = h * range.
            let l = bw.value() * s.range();
            let q_rec = reciprocal_kde_quantile_density(&s, l, 0.5).unwrap();
            assert!(
                (q_rec - q_conv).abs() / q_conv < 0.10,
                "reciprocal {q_rec} vs convolution {q_conv}"
            );
        }
    }

    #[test]
    fn reciprocal_kde_degenerate_sample_errors() {
        let s = BidSample::new(vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(
            reciprocal_kde_quantile_density(&s, 0.1, 0.5),
            Err(Error::InfiniteEstimate(_))
        ));
    }

    #[test]
    fn reciprocal_kde_validates_bandwidth() {
        let s = BidSample::new(vec![0.0, 0.5, 1.0]).unwrap();
        assert!(reciprocal_kde_quantile_density(&s, 0.0, 0.5).is_err());
        assert!(reciprocal_kde_quantile_density(&s, 1.5, 0.5).is_err());
        assert!(reciprocal_kde_quantile_density(&s, 0.3, 0.5).is_ok());
    }

    #[test]
    fn convolver_is_reusable_and_linear() {
        let n = 256;
        let conv = GridConvolver::new(n, Kernel::Epanechnikov, Bandwidth::manual(0.06).unwrap())
            .unwrap();
        let a: Vec<f64> = rng::uniforms(n - 1, &mut rng::stream(4, &[1]));
        let b: Vec<f64> = rng::uniforms(n - 1, &mut rng::stream(4, &[2]));
        let qa = conv.apply(&a).unwrap();
        let qb = conv.apply(&b).unwrap();
        let combined: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| 0.3 * x + 1.7 * y)
            .collect();
        let qc = conv.apply(&combined).unwrap();
        for i in 0..n - 1 {
            assert_abs_diff_eq!(qc[i], 0.3 * qa[i] + 1.7 * qb[i], epsilon = 1e-12);
        }
        assert!(conv.apply(&a[..10]).is_err());
    }
}
