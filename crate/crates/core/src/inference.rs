//! Simulation-based inference: pointwise intervals for the value quantile,
//! uniform confidence bands for `q`, `v` and T-type counterfactuals,
//! Gaussian multiplier bands for S-type counterfactuals, and the
//! reserve-price-optimality test.
//!
//! The estimators do not converge weakly as processes, so classical
//! functional limit theory gives no critical values. Instead the supremum
//! statistics are *pivotal*: their distributions do not depend on the bid
//! distribution. Critical values are therefore simulated, either from the
//! linear term of the Bahadur-Kiefer expansion,
//!
//! ```text
//! Z*(u) = -A(u) G_nh(u),    G_nh(u) = sqrt(nh) (1/n) sum_i [K_h(u - U_i) - 1],
//! ```
//!
//! or by recomputing the full studentized statistic on pseudo-samples of
//! n iid uniform[0,1] bids, for which `Q = v - A = u` and `q = 1` are known
//! exactly. Both routes are exposed; they must and do agree.

use rayon::prelude::*;
use serde::Serialize;

use crate::beliefs::{value_quantile, AFunction, BeliefFunctions, ValueQuantileEstimate};
use crate::counterfactual::{estimate_s_curve, revenue_delta_curve, CounterfactualSpec};
use crate::kernel::Kernel;
use crate::quantile::{
    canonical_grid, kernel_quantile_density, trimmed_indices_for, Bandwidth, BidSample,
    GridConvolver,
};
use crate::rng;
use crate::scalar::Real;
use crate::special;
use crate::{Error, Result};

const LANE_LINEAR: u64 = 0x4c49_4e45_4152;
const LANE_PSEUDO: u64 = 0x5053_4555_444f;
const LANE_SBAND: u64 = 0x5342_414e_44;

/// Which pivotal approximation generates the critical values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Approximation {
    /// Simulate the linear term `Z* = -A G_nh` directly.
    LinearTerm,
    /// Recompute the full statistic on uniform[0,1] pseudo-samples.
    UniformPseudoBids,
}

impl std::str::FromStr for Approximation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear-term" | "linear" => Ok(Self::LinearTerm),
            "uniform-pseudo-bids" | "pseudo" => Ok(Self::UniformPseudoBids),
            other => Err(Error::Config(format!(
                "unknown approximation '{other}', expected linear-term or uniform-pseudo-bids"
            ))),
        }
    }
}

/// Band sidedness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Symmetric band `center +- half * c` with `c` the `(1 - alpha)`
    /// quantile of the absolute supremum.
    TwoSided,
    /// Upper bound only; the lower endpoint is `-inf`.
    UpperOneSided,
    /// Lower bound only; the upper endpoint is `+inf`.
    LowerOneSided,
}

impl Side {
    /// The simulated statistic already encodes the sidedness (absolute
    /// supremum for two-sided bands, signed supremum one-sided), so the
    /// critical value is the `(1 - alpha)` quantile in every case. The
    /// alternative of a signed supremum at `1 - alpha/2` is not
    /// equivalent here: the studentized processes are visibly asymmetric
    /// in finite samples (dividing by `q_hat` bounds the upper tail at
    /// `sqrt(nh)` while fattening the lower one), and only the absolute
    /// form controls both band violations.
    fn quantile_level<T: Real>(self, alpha: T) -> T {
        T::one() - alpha
    }
}

/// Whether simulated statistics divide by the pseudo-sample's own `q_hat`.
///
/// The studentized form mirrors the statistic the band inverts and is the
/// default; the raw form matches the displayed definition of
/// `Z^{U[0,1]}(u) = sqrt(nh)(v_hat(u) - u - A(u))`, which replaces the
/// asymptotically negligible denominator by 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Studentization {
    ByQhat,
    Off,
}

/// Settings for a batch of critical-value simulations.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SimConfig {
    n_sims: usize,
    seed: u64,
    approximation: Approximation,
    side: Side,
    studentization: Studentization,
}

impl SimConfig {
    /// At least 100 replications are required for a usable quantile.
    pub fn new(n_sims: usize, seed: u64) -> Result<Self> {
        if n_sims < 100 {
            return Err(Error::Config(format!(
                "n_sims must be at least 100, got {n_sims}"
            )));
        }
        Ok(Self {
            n_sims,
            seed,
            approximation: Approximation::UniformPseudoBids,
            side: Side::TwoSided,
            studentization: Studentization::ByQhat,
        })
    }

    pub fn with_approximation(mut self, approximation: Approximation) -> Self {
        self.approximation = approximation;
        self
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn with_studentization(mut self, studentization: Studentization) -> Self {
        self.studentization = studentization;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_sims(&self) -> usize {
        self.n_sims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn approximation(&self) -> Approximation {
        self.approximation
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn studentization(&self) -> Studentization {
        self.studentization
    }
}

/// One simulated path of a pivotal process on the trimmed grid.
#[derive(Clone, Debug, Serialize)]
pub struct PivotalDraw<T> {
    values: Vec<T>,
    supremum: T,
}

impl<T: Real> PivotalDraw<T> {
    /// Process values at the trimmed grid points, in grid order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// The side-adjusted supremum over the trimmed grid.
    pub fn supremum(&self) -> T {
        self.supremum
    }
}

/// A uniform confidence band on the trimmed grid.
#[derive(Clone, Debug, Serialize)]
pub struct ConfidenceBand<T> {
    grid: Vec<T>,
    center: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    iota: Vec<T>,
    alpha: T,
    side: Side,
    critical_value: T,
    bandwidth: Bandwidth<T>,
    trim: (T, T),
    n_sims: usize,
    seed: u64,
    approximation: Approximation,
}

impl<T: Real> ConfidenceBand<T> {
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Shape-function values, all 1 unless a shaped band was requested.
    pub fn iota(&self) -> &[T] {
        &self.iota
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn critical_value(&self) -> T {
        self.critical_value
    }

    pub fn bandwidth(&self) -> Bandwidth<T> {
        self.bandwidth
    }

    /// The trimmed interval `[max(h, tau), 1 - max(h, tau)]`.
    pub fn trim(&self) -> (T, T) {
        self.trim
    }

    /// Whether `curve`, aligned with the band grid, lies inside the band
    /// at every grid point.
    pub fn covers(&self, curve: &[T]) -> Result<bool> {
        if curve.len() != self.grid.len() {
            return Err(Error::Domain(
                "curve length does not match the band grid".into(),
            ));
        }
        Ok(curve
            .iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((&y, &lo), &hi)| y >= lo && y <= hi))
    }
}

/// The reserve-price-optimality test outcome.
#[derive(Clone, Debug, Serialize)]
pub struct TestResult<T> {
    statistic: T,
    optimal_exclusion: T,
    reject: bool,
    alpha: T,
    critical_value: T,
    bandwidth: T,
    n_sims: usize,
    seed: u64,
}

impl<T: Real> TestResult<T> {
    /// Max over the trimmed grid of the lower band endpoint.
    pub fn statistic(&self) -> T {
        self.statistic
    }

    /// The grid argmax of the lower endpoint (first on ties).
    pub fn optimal_exclusion(&self) -> T {
        self.optimal_exclusion
    }

    /// True iff the statistic is strictly positive.
    pub fn reject(&self) -> bool {
        self.reject
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn critical_value(&self) -> T {
        self.critical_value
    }
}

/// A pointwise confidence interval.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointwiseInterval<T> {
    center: T,
    lower: T,
    upper: T,
    alpha: T,
}

impl<T: Real> PointwiseInterval<T> {
    pub fn center(&self) -> T {
        self.center
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

/// Conservative simulated quantile: the `ceil(B p)`-th order statistic of
/// the draws (1-based).
///
/// Requires `B (1 - p) >= 1` so at least one draw lies above the order
/// statistic; otherwise the batch is too small to estimate the level.
pub fn simulated_quantile<T: Real>(draws: &[T], p: T) -> Result<T> {
    if draws.is_empty() {
        return Err(Error::Config("no simulated draws".into()));
    }
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Config(format!(
            "quantile level must lie in (0, 1), got {p}"
        )));
    }
    let b = T::from_usize_exact(draws.len());
    if b * (T::one() - p) < T::one() {
        return Err(Error::Config(format!(
            "{} draws are too few for the {p} quantile",
            draws.len()
        )));
    }
    let index = (b * p)
        .ceil()
        .to_usize()
        .expect("quantile index fits usize")
        .clamp(1, draws.len());
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("suprema are comparable"));
    Ok(sorted[index - 1])
}

/// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
pub fn two_sample_ks<T: Real>(a: &[T], b: &[T]) -> T {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    let (na, nb) = (
        T::from_usize_exact(a.len()),
        T::from_usize_exact(b.len()),
    );
    let (mut i, mut j) = (0usize, 0usize);
    let mut dist = T::zero();
    while i < a.len() && j < b.len() {
        let x = if a[i] < b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let gap = (T::from_usize_exact(i) / na - T::from_usize_exact(j) / nb).abs();
        if gap > dist {
            dist = gap;
        }
    }
    dist
}

/// Folds one process value into the recorded supremum statistic: the
/// absolute supremum for two-sided bands, the signed supremum oriented so
/// that larger means a worse band violation for one-sided ones.
fn side_fold<T: Real>(side: Side, sup: &mut T, z: T) {
    let candidate = match side {
        Side::TwoSided => z.abs(),
        Side::LowerOneSided => z,
        Side::UpperOneSided => T::zero() - z,
    };
    if candidate > *sup {
        *sup = candidate;
    }
}

fn initial_sup<T: Real>() -> T {
    T::neg_infinity()
}

fn trim_lo<T: Real>(bandwidth: Bandwidth<T>, tau: T) -> T {
    bandwidth.value().max(tau)
}

/// Simulates `B` suprema of `weight(u) G_nh(u)` over the trimmed grid.
///
/// `G_nh(u) = sqrt(nh) (1/n) sum_i [K_h(u - U_i) - 1]` uses the exact fact
/// that `E K_h(u - U) = 1` for `u` at least one bandwidth from the
/// boundary, so no quadrature enters. The extra trim `tau` widens the
/// excluded boundary to `max(h, tau)`; pass `h` for the plain `[h, 1-h]`.
pub fn simulate_linear_term<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    weight: impl Fn(T) -> T,
    tau: T,
    config: &SimConfig,
) -> Result<Vec<T>> {
    let (grid, idx) = trimmed_grid(n, bandwidth, tau)?;
    let points = &grid[idx.clone()];
    let weights: Vec<T> = points.iter().map(|&u| weight(u)).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain(
            "weight function must be finite on the trimmed grid".into(),
        ));
    }
    let draws: Vec<T> = (0..config.n_sims)
        .into_par_iter()
        .map(|b| {
            let mut sup = initial_sup();
            linear_term_values(n, bandwidth, kernel, points, config.seed, b as u64, |g, z| {
                side_fold(config.side, &mut sup, weights[g] * z)
            });
            sup
        })
        .collect();
    Ok(draws)
}

/// One recorded path of the weighted linear-term process.
pub fn linear_term_draw<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    weight: impl Fn(T) -> T,
    tau: T,
    config: &SimConfig,
    draw_index: usize,
) -> Result<PivotalDraw<T>> {
    let (grid, idx) = trimmed_grid(n, bandwidth, tau)?;
    let points = &grid[idx];
    let mut values = vec![T::zero(); points.len()];
    let mut sup = initial_sup();
    linear_term_values(
        n,
        bandwidth,
        kernel,
        points,
        config.seed,
        draw_index as u64,
        |g, z| {
            values[g] = weight(points[g]) * z;
            side_fold(config.side, &mut sup, values[g]);
        },
    );
    Ok(PivotalDraw {
        values,
        supremum: sup,
    })
}

fn trimmed_grid<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    tau: T,
) -> Result<(Vec<T>, std::ops::Range<usize>)> {
    if n < 2 {
        return Err(Error::InsufficientData(
            "simulation needs a sample size of at least 2".into(),
        ));
    }
    let grid = canonical_grid::<T>(n);
    let lo = trim_lo(bandwidth, tau);
    let idx = trimmed_indices_for(&grid, lo, T::one() - lo)?;
    Ok((grid, idx))
}

/// Evaluates `G_nh` at the given sorted grid points for one draw, invoking
/// `visit(point_index, value)` per point. Window membership advances with
/// two monotone pointers over the sorted uniforms; each member contributes
/// one kernel evaluation, keeping the pass numerically direct.
fn linear_term_values<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    points: &[T],
    seed: u64,
    draw: u64,
    mut visit: impl FnMut(usize, T),
) {
    let h = bandwidth.value();
    let mut gen = rng::stream(seed, &[LANE_LINEAR, draw]);
    let u = rng::sorted_uniforms::<T>(n, &mut gen);
    let nf = T::from_usize_exact(n);
    let scale = (nf * h).sqrt();
    let mut lo = 0usize;
    let mut hi = 0usize;
    for (g, &point) in points.iter().enumerate() {
        while lo < n && u[lo] < point - h {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < n && u[hi] <= point + h {
            hi += 1;
        }
        let mut sum = T::zero();
        for &ui in &u[lo..hi] {
            sum = sum + kernel.evaluate((point - ui) / h);
        }
        let g_val = scale * (sum / (nf * h) - T::one());
        visit(g, g_val);
    }
}

/// What statistic a pseudo-sample replication reproduces.
#[derive(Clone, Copy)]
pub enum PseudoTarget<'a, T> {
    /// `sqrt(nh)(q_hat - 1)`, optionally studentized.
    QuantileDensity,
    /// `sqrt(nh)(v_hat(u) - u - A(u))`, optionally studentized.
    ValueQuantile(&'a BeliefFunctions<T>),
    /// `phi(u) A(u) sqrt(nh)(q_hat - 1)`, optionally studentized: the
    /// first-order T-type shape with the pseudo q-process as its core.
    /// This is the default critical-value route for T-type bands.
    TShape(&'a CounterfactualSpec<T>),
    /// The first-order T-type shape reweighted by `1/iota`, with the shape
    /// function given by its values on the trimmed grid.
    TShapeIota {
        spec: &'a CounterfactualSpec<T>,
        iota: &'a [T],
    },
    /// `sqrt(nh)(T_hat(u) - T_U(u))`, optionally studentized, with the
    /// population `T_U` of the uniform pseudo-DGP as the centering. The
    /// full plug-in recomputation: unlike [`PseudoTarget::TShape`] it also
    /// carries the S-part and `Q_hat` noise of the estimator, so it is the
    /// heavier, more conservative cross-check route.
    TType(&'a CounterfactualSpec<T>),
    /// The full T-type statistic divided by a shape function, given by its
    /// values on the trimmed grid.
    TTypeShaped {
        spec: &'a CounterfactualSpec<T>,
        iota: &'a [T],
    },
    /// The raw band shape `q_hat - 1`: no scaling, no studentization,
    /// signed supremum. Drives the reserve-price test.
    ReserveShape,
}

enum Prepared<T> {
    Q,
    V {
        a: Vec<T>,
    },
    W {
        w: Vec<T>,
    },
    T {
        a: Vec<T>,
        phi: Vec<T>,
        apsi: Vec<T>,
        w_cells: Vec<T>,
        end_coeff: T,
        t_true: Vec<T>,
        iota: Vec<T>,
    },
    Reserve,
}

fn prepare_target<T: Real>(
    target: &PseudoTarget<'_, T>,
    points: &[T],
    k_range: &std::ops::Range<usize>,
    n: usize,
) -> Result<Prepared<T>> {
    // A1' > 0 away from zero for non-degenerate beliefs, so A is finite on
    // the trimmed grid; evaluation cannot fail below.
    match target {
        PseudoTarget::QuantileDensity => Ok(Prepared::Q),
        PseudoTarget::ReserveShape => Ok(Prepared::Reserve),
        PseudoTarget::ValueQuantile(beliefs) => {
            let a = points
                .iter()
                .map(|&u| beliefs.a(u))
                .collect::<Result<Vec<T>>>()?;
            Ok(Prepared::V { a })
        }
        PseudoTarget::TShape(spec) => {
            let beliefs = spec.beliefs();
            let w = points
                .iter()
                .map(|&u| Ok(spec.phi(u) * beliefs.a(u)?))
                .collect::<Result<Vec<T>>>()?;
            Ok(Prepared::W { w })
        }
        PseudoTarget::TShapeIota { spec, iota } => {
            if iota.len() != points.len() {
                return Err(Error::Shape(
                    "shape function values must align with the trimmed grid".into(),
                ));
            }
            if iota.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
                return Err(Error::Shape(
                    "shape function must be positive and finite on the trimmed grid".into(),
                ));
            }
            let beliefs = spec.beliefs();
            let w = points
                .iter()
                .zip(*iota)
                .map(|(&u, &i)| Ok(spec.phi(u) * beliefs.a(u)? / i))
                .collect::<Result<Vec<T>>>()?;
            Ok(Prepared::W { w })
        }
        PseudoTarget::TType(spec) | PseudoTarget::TTypeShaped { spec, .. } => {
            let iota = match target {
                PseudoTarget::TTypeShaped { iota, .. } => {
                    if iota.len() != points.len() {
                        return Err(Error::Shape(
                            "shape function values must align with the trimmed grid".into(),
                        ));
                    }
                    if iota.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
                        return Err(Error::Shape(
                            "shape function must be positive and finite on the trimmed grid"
                                .into(),
                        ));
                    }
                    iota.to_vec()
                }
                _ => vec![T::one(); points.len()],
            };
            let beliefs = spec.beliefs();
            let nf = T::from_usize_exact(n);
            let a = points
                .iter()
                .map(|&u| beliefs.a(u))
                .collect::<Result<Vec<T>>>()?;
            let phi: Vec<T> = points.iter().map(|&u| spec.phi(u)).collect();
            let apsi: Vec<T> = points
                .iter()
                .zip(&a)
                .map(|(&u, &a_u)| a_u * spec.psi(u))
                .collect();
            let mut w_cells = vec![T::zero(); n];
            for (j, w) in w_cells.iter_mut().enumerate().skip(k_range.start + 1) {
                let left = T::from_usize_exact(j) / nf;
                let right = T::from_usize_exact(j + 1) / nf;
                let mid = (left + right) * T::from_f64_lossy(0.5);
                *w = spec.chi(mid)? * (right - left);
            }
            let end_coeff = beliefs.a(T::one())? * spec.psi(T::one());
            let t_true = population_t_on_grid(spec, n, k_range)?;
            Ok(Prepared::T {
                a,
                phi,
                apsi,
                w_cells,
                end_coeff,
                t_true,
                iota,
            })
        }
    }
}

/// Population `T(u) = phi(u) v_U(u) + int_u^1 psi v_U` for the uniform
/// pseudo-DGP `v_U(x) = x + A(x)`, evaluated at the grid points
/// `{k/n, k in k_range}` by aligned midpoint quadrature at resolution 10n.
fn population_t_on_grid<T: Real>(
    spec: &CounterfactualSpec<T>,
    n: usize,
    k_range: &std::ops::Range<usize>,
) -> Result<Vec<T>> {
    let beliefs = spec.beliefs();
    let ratio = 10usize;
    let r = ratio * n;
    let rf = T::from_usize_exact(r);
    let half = T::from_f64_lossy(0.5);
    let k_lo = k_range.start + 1;
    let k_hi = k_range.end;
    let mut out = vec![T::zero(); k_range.len()];
    let mut suffix = T::zero();
    let mut j = r;
    while j > ratio * k_lo {
        j -= 1;
        let left = T::from_usize_exact(j) / rf;
        let right = T::from_usize_exact(j + 1) / rf;
        let mid = (left + right) * half;
        suffix = suffix + spec.psi(mid) * (mid + beliefs.a(mid)?) * (right - left);
        if j % ratio == 0 {
            let k = j / ratio;
            if k >= k_lo && k <= k_hi {
                out[k - k_lo] = spec.phi(left) * (left + beliefs.a(left)?) + suffix;
            }
        }
    }
    Ok(out)
}

/// Simulates `B` suprema of one pseudo-sample statistic.
pub fn simulate_uniform_pseudo<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    target: PseudoTarget<'_, T>,
    tau: T,
    config: &SimConfig,
) -> Result<Vec<T>> {
    let mut batches = simulate_uniform_pseudo_multi(n, bandwidth, kernel, &[target], tau, config)?;
    Ok(batches.pop().expect("one target requested"))
}

/// One recorded path of a pseudo-sample statistic.
pub fn uniform_pseudo_draw<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    target: PseudoTarget<'_, T>,
    tau: T,
    config: &SimConfig,
    draw_index: usize,
) -> Result<PivotalDraw<T>> {
    let (grid, idx) = trimmed_grid(n, bandwidth, tau)?;
    let points = &grid[idx.clone()];
    let prepared = prepare_target(&target, points, &idx, n)?;
    let convolver = GridConvolver::new(n, kernel, bandwidth)?;
    let mut values = vec![T::zero(); points.len()];
    let mut sup = initial_sup();
    pseudo_draw(
        n,
        bandwidth,
        &convolver,
        &prepared,
        points,
        &idx,
        config,
        draw_index as u64,
        |g, z| {
            values[g] = z;
            side_fold(effective_side(&prepared, config), &mut sup, z);
        },
    )?;
    Ok(PivotalDraw {
        values,
        supremum: sup,
    })
}

/// Simulates all `targets` from shared pseudo-samples: each replication
/// draws one pseudo-sample and evaluates every requested statistic on it,
/// so an n-point kernel pass is paid once per replication, not per target.
/// Returns one vector of `B` suprema per target, in input order.
pub fn simulate_uniform_pseudo_multi<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    kernel: Kernel,
    targets: &[PseudoTarget<'_, T>],
    tau: T,
    config: &SimConfig,
) -> Result<Vec<Vec<T>>> {
    let (grid, idx) = trimmed_grid(n, bandwidth, tau)?;
    let points = &grid[idx.clone()];
    let prepared: Vec<Prepared<T>> = targets
        .iter()
        .map(|t| prepare_target(t, points, &idx, n))
        .collect::<Result<_>>()?;
    let convolver = GridConvolver::new(n, kernel, bandwidth)?;

    let per_draw: Vec<Vec<T>> = (0..config.n_sims)
        .into_par_iter()
        .map(|b| -> Result<Vec<T>> {
            let mut sups = Vec::with_capacity(prepared.len());
            for prep in &prepared {
                let side = effective_side(prep, config);
                let mut sup = initial_sup();
                pseudo_draw(
                    n,
                    bandwidth,
                    &convolver,
                    prep,
                    points,
                    &idx,
                    config,
                    b as u64,
                    |_, z| side_fold(side, &mut sup, z),
                )?;
                sups.push(sup);
            }
            Ok(sups)
        })
        .collect::<Result<_>>()?;

    let mut out = vec![Vec::with_capacity(config.n_sims); targets.len()];
    for sups in per_draw {
        for (t, s) in sups.into_iter().enumerate() {
            out[t].push(s);
        }
    }
    Ok(out)
}

/// The reserve-band shape is a signed one-sided supremum by construction;
/// every other target honors the configured side.
fn effective_side<T>(prep: &Prepared<T>, config: &SimConfig) -> Side {
    match prep {
        Prepared::Reserve => Side::LowerOneSided,
        _ => config.side,
    }
}

#[allow(clippy::too_many_arguments)]
fn pseudo_draw<T: Real>(
    n: usize,
    bandwidth: Bandwidth<T>,
    convolver: &GridConvolver<T>,
    prep: &Prepared<T>,
    points: &[T],
    idx: &std::ops::Range<usize>,
    config: &SimConfig,
    draw: u64,
    mut visit: impl FnMut(usize, T),
) -> Result<()> {
    let mut gen = rng::stream(config.seed, &[LANE_PSEUDO, draw]);
    let pseudo = rng::sorted_uniforms::<T>(n, &mut gen);
    let sample = BidSample::from_sorted(pseudo)?;
    let spacings = sample.spacings();
    let q_hat = convolver.apply(spacings.diffs())?;
    let bids = sample.bids();
    let nf = T::from_usize_exact(n);
    let scale = (nf * bandwidth.value()).sqrt();
    let denom = |q: T| match config.studentization {
        Studentization::ByQhat => q,
        Studentization::Off => T::one(),
    };
    let k_lo = idx.start + 1;
    let k_hi = idx.end;
    match prep {
        Prepared::Q => {
            for (g, k) in (k_lo..=k_hi).enumerate() {
                let q = q_hat[k - 1];
                visit(g, scale * (q - T::one()) / denom(q));
            }
        }
        Prepared::Reserve => {
            for (g, k) in (k_lo..=k_hi).enumerate() {
                visit(g, q_hat[k - 1] - T::one());
            }
        }
        Prepared::V { a } => {
            for (g, k) in (k_lo..=k_hi).enumerate() {
                let q = q_hat[k - 1];
                let v_hat = bids[k] + a[g] * q;
                visit(g, scale * (v_hat - points[g] - a[g]) / denom(q));
            }
        }
        Prepared::W { w } => {
            for (g, k) in (k_lo..=k_hi).enumerate() {
                let q = q_hat[k - 1];
                visit(g, w[g] * scale * (q - T::one()) / denom(q));
            }
        }
        Prepared::T {
            a,
            phi,
            apsi,
            w_cells,
            end_coeff,
            t_true,
            iota,
        } => {
            let end_term = *end_coeff * bids[n - 1];
            let mut suffix = T::zero();
            let mut j = n;
            while j > k_lo {
                j -= 1;
                suffix = suffix + bids[j] * w_cells[j];
                if j <= k_hi {
                    let g = j - k_lo;
                    let q = q_hat[j - 1];
                    let v_hat = bids[j] + a[g] * q;
                    let t_hat = phi[g] * v_hat + (suffix - apsi[g] * bids[j] + end_term);
                    visit(g, scale * (t_hat - t_true[g]) / (iota[g] * denom(q)));
                }
            }
        }
    }
    Ok(())
}

/// Pointwise interval for the value quantile at level `u`:
/// `v_hat(u) +- A(u) q_hat(u) sqrt(R_K / (nh)) z_{1-alpha/2}`.
///
/// The level snaps to the estimation grid like every pointwise evaluation
/// of `v_hat`.
pub fn pointwise_ci_value<T: Real>(
    v_est: &ValueQuantileEstimate<T>,
    u: T,
    alpha: T,
) -> Result<PointwiseInterval<T>> {
    check_alpha(alpha)?;
    let q_est = v_est.q_estimates();
    let (lo, hi) = q_est.trim_bounds();
    let eps = T::from_f64_lossy(1e-12);
    if !(u >= lo - eps && u <= hi + eps) {
        return Err(Error::Trim(format!(
            "level {u} outside the trimmed interval [{lo}, {hi}]"
        )));
    }
    let n = q_est.n();
    let k = crate::quantile::floor_level_index(T::from_usize_exact(n) * u).clamp(1, n - 1);
    let u_snap = q_est.grid()[k - 1];
    let center = v_est.v_hat()[k - 1];
    let q = q_est.q_hat()[k - 1];
    let a = v_est.beliefs().a(u_snap)?;
    let h = q_est.bandwidth().value();
    let r_k = q_est.kernel().roughness::<T>();
    let z = T::from_f64_lossy(special::normal_quantile(
        (T::one() - alpha / T::from_f64_lossy(2.0))
            .to_f64()
            .expect("level converts to f64"),
    )?);
    let half = a * q * (r_k / (T::from_usize_exact(n) * h)).sqrt() * z;
    Ok(PointwiseInterval {
        center,
        lower: center - half,
        upper: center + half,
        alpha,
    })
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::Config(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Critical value at the side-adjusted level, degenerating to zero at
/// `alpha = 1` (a zero-width band that covers nothing).
pub(crate) fn critical_value<T: Real>(sups: &[T], alpha: T, side: Side) -> Result<T> {
    critical_value_at(sups, alpha, side.quantile_level(alpha))
}

/// Critical value at an explicit quantile level, with the same `alpha = 1`
/// degeneracy as [`critical_value`].
pub(crate) fn critical_value_at<T: Real>(sups: &[T], alpha: T, level: T) -> Result<T> {
    if alpha >= T::one() {
        return Ok(T::zero());
    }
    simulated_quantile(sups, level)
}

#[allow(clippy::too_many_arguments)]
fn assemble_band<T: Real>(
    grid: Vec<T>,
    center: Vec<T>,
    unit_half: Vec<T>,
    iota: Vec<T>,
    alpha: T,
    c: T,
    bandwidth: Bandwidth<T>,
    trim: (T, T),
    config: &SimConfig,
) -> ConfidenceBand<T> {
    let len = grid.len();
    let mut lower = Vec::with_capacity(len);
    let mut upper = Vec::with_capacity(len);
    for g in 0..len {
        let half = unit_half[g] * c;
        match config.side {
            Side::TwoSided => {
                lower.push(center[g] - half);
                upper.push(center[g] + half);
            }
            Side::LowerOneSided => {
                lower.push(center[g] - half);
                upper.push(T::infinity());
            }
            Side::UpperOneSided => {
                lower.push(T::neg_infinity());
                upper.push(center[g] + half);
            }
        }
    }
    ConfidenceBand {
        grid,
        center,
        lower,
        upper,
        iota,
        alpha,
        side: config.side,
        critical_value: c,
        bandwidth,
        trim,
        n_sims: config.n_sims,
        seed: config.seed,
        approximation: config.approximation,
    }
}

/// Uniform band for the value quantile function:
/// `v_hat(u) +- q_hat(u) c / sqrt(nh)` on the trimmed grid.
pub fn uniform_band_value<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    let mut v_est = value_quantile(sample, beliefs, kernel, bandwidth)?;
    v_est.set_trim(tau)?;
    uniform_band_value_from(&v_est, alpha, config)
}

/// [`uniform_band_value`] reusing a prepared estimate (and its stored trim).
pub fn uniform_band_value_from<T: Real>(
    v_est: &ValueQuantileEstimate<T>,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let q_est = v_est.q_estimates();
    let idx = q_est.trimmed_indices()?;
    let n = q_est.n();
    let bandwidth = q_est.bandwidth();
    let beliefs = v_est.beliefs();
    let sups = match config.approximation {
        Approximation::LinearTerm => simulate_linear_term(
            n,
            bandwidth,
            q_est.kernel(),
            // Z* = -A G; A is finite away from zero on the trimmed grid.
            |u| T::zero() - beliefs.a(u).expect("A finite on trimmed grid"),
            q_est.trim(),
            config,
        )?,
        Approximation::UniformPseudoBids => simulate_uniform_pseudo(
            n,
            bandwidth,
            q_est.kernel(),
            PseudoTarget::ValueQuantile(beliefs),
            q_est.trim(),
            config,
        )?,
    };
    let c = critical_value(&sups, alpha, config.side)?;
    let scale = (T::from_usize_exact(n) * bandwidth.value()).sqrt();
    let grid: Vec<T> = idx.clone().map(|g| q_est.grid()[g]).collect();
    let center: Vec<T> = idx.clone().map(|g| v_est.v_hat()[g]).collect();
    let unit_half: Vec<T> = idx.clone().map(|g| q_est.q_hat()[g] / scale).collect();
    let iota = vec![T::one(); grid.len()];
    Ok(assemble_band(
        grid,
        center,
        unit_half,
        iota,
        alpha,
        c,
        bandwidth,
        q_est.trim_bounds(),
        config,
    ))
}

/// Uniform band for the quantile density itself:
/// `q_hat(u) +- q_hat(u) c / sqrt(nh)`.
pub fn uniform_band_q<T: Real>(
    sample: &BidSample<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    let spacings = sample.spacings();
    let mut q_est = kernel_quantile_density(&spacings, kernel, bandwidth)?;
    q_est.set_trim(tau)?;
    uniform_band_q_from(&q_est, alpha, config)
}

/// [`uniform_band_q`] reusing prepared estimates (and their stored trim).
pub fn uniform_band_q_from<T: Real>(
    q_est: &crate::quantile::QuantileEstimates<T>,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let idx = q_est.trimmed_indices()?;
    let n = q_est.n();
    let bandwidth = q_est.bandwidth();
    let sups = match config.approximation {
        Approximation::LinearTerm => simulate_linear_term(
            n,
            bandwidth,
            q_est.kernel(),
            |_| T::zero() - T::one(),
            q_est.trim(),
            config,
        )?,
        Approximation::UniformPseudoBids => simulate_uniform_pseudo(
            n,
            bandwidth,
            q_est.kernel(),
            PseudoTarget::QuantileDensity::<T>,
            q_est.trim(),
            config,
        )?,
    };
    let c = critical_value(&sups, alpha, config.side)?;
    let scale = (T::from_usize_exact(n) * bandwidth.value()).sqrt();
    let grid: Vec<T> = idx.clone().map(|g| q_est.grid()[g]).collect();
    let center: Vec<T> = idx.clone().map(|g| q_est.q_hat()[g]).collect();
    let unit_half: Vec<T> = center.iter().map(|&q| q / scale).collect();
    let iota = vec![T::one(); grid.len()];
    Ok(assemble_band(
        grid,
        center,
        unit_half,
        iota,
        alpha,
        c,
        bandwidth,
        q_est.trim_bounds(),
        config,
    ))
}

/// Uniform band for a T-type counterfactual:
/// `T_hat(u) +- q_hat(u) c / sqrt(nh)`.
///
/// Specs with `phi = 0` are S-type; their point term carries no
/// nonparametric noise and this band degenerates, so they are rejected in
/// favor of [`uniform_band_s`].
pub fn uniform_band_t<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    uniform_band_t_impl(sample, spec, kernel, bandwidth, tau, alpha, config, None)
}

/// [`uniform_band_t`] with half-width reshaped pointwise by `iota`:
/// `T_hat(u) +- iota(u) q_hat(u) c / sqrt(nh)`, the critical value taken
/// from the matching `iota`-weighted process.
#[allow(clippy::too_many_arguments)]
pub fn uniform_band_t_shaped<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
    iota: impl Fn(T) -> T,
) -> Result<ConfidenceBand<T>> {
    uniform_band_t_impl(sample, spec, kernel, bandwidth, tau, alpha, config, Some(&iota))
}

#[allow(clippy::too_many_arguments)]
fn uniform_band_t_impl<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
    iota: Option<&dyn Fn(T) -> T>,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let mut v_est = value_quantile(sample, spec.beliefs(), kernel, bandwidth)?;
    v_est.set_trim(tau)?;
    uniform_band_t_from(sample, &v_est, spec, alpha, config, iota)
}

/// T-type band reusing a prepared value-quantile estimate (and its trim).
pub(crate) fn uniform_band_t_from<T: Real>(
    sample: &BidSample<T>,
    v_est: &ValueQuantileEstimate<T>,
    spec: &CounterfactualSpec<T>,
    alpha: T,
    config: &SimConfig,
    iota: Option<&dyn Fn(T) -> T>,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let q_est = v_est.q_estimates();
    let idx = q_est.trimmed_indices()?;
    let n = q_est.n();
    let bandwidth = q_est.bandwidth();
    let grid: Vec<T> = idx.clone().map(|g| q_est.grid()[g]).collect();

    let iota_vals: Vec<T> = match iota {
        Some(f) => grid.iter().map(|&u| f(u)).collect(),
        None => vec![T::one(); grid.len()],
    };
    if iota_vals.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Shape(
            "shape function must be positive and finite on the trimmed grid".into(),
        ));
    }
    if grid.iter().all(|&u| spec.phi(u) == T::zero()) {
        return Err(Error::DegenerateTarget(
            "phi vanishes on the trimmed grid: the T-type band degenerates, use the S-type band"
                .into(),
        ));
    }

    let t_curve = crate::counterfactual::estimate_t_curve_from(sample, v_est, spec)?;
    let beliefs = spec.beliefs();
    let sups = match config.approximation {
        Approximation::LinearTerm => {
            let iota_ref = &iota_vals;
            let grid_ref = &grid;
            simulate_linear_term(
                n,
                bandwidth,
                q_est.kernel(),
                // W^T weight: -phi A / iota, with iota looked up by grid
                // position (the closure is only evaluated at grid points).
                |u| {
                    let g = grid_ref
                        .iter()
                        .position(|&x| x == u)
                        .expect("weight evaluated on the trimmed grid");
                    T::zero()
                        - spec.phi(u) * beliefs.a(u).expect("A finite on trimmed grid")
                            / iota_ref[g]
                },
                q_est.trim(),
                config,
            )?
        }
        Approximation::UniformPseudoBids => {
            let target = if iota.is_some() {
                PseudoTarget::TShapeIota {
                    spec,
                    iota: &iota_vals,
                }
            } else {
                PseudoTarget::TShape(spec)
            };
            simulate_uniform_pseudo(n, bandwidth, q_est.kernel(), target, q_est.trim(), config)?
        }
    };
    let c = critical_value(&sups, alpha, config.side)?;
    let scale = (T::from_usize_exact(n) * bandwidth.value()).sqrt();
    let center = t_curve.values().to_vec();
    let unit_half: Vec<T> = idx
        .clone()
        .zip(&iota_vals)
        .map(|(g, &i)| i * q_est.q_hat()[g] / scale)
        .collect();
    Ok(assemble_band(
        grid,
        center,
        unit_half,
        iota_vals,
        alpha,
        c,
        bandwidth,
        q_est.trim_bounds(),
        config,
    ))
}

/// Data for one S-type multiplier band: the per-cell integrand weights and
/// point-term coefficients of the estimated influence function.
struct SBandPrecompute<T> {
    w_cells: Vec<T>,
    apsi_q: Vec<T>,
    k_lo: usize,
    k_hi: usize,
}

fn s_band_precompute<T: Real>(
    spec: &CounterfactualSpec<T>,
    q_est: &crate::quantile::QuantileEstimates<T>,
    idx: &std::ops::Range<usize>,
) -> Result<SBandPrecompute<T>> {
    let n = q_est.n();
    let nf = T::from_usize_exact(n);
    let q_hat = q_est.q_hat();
    let beliefs = spec.beliefs();
    let k_lo = idx.start + 1;
    let k_hi = idx.end;
    // Cell j carries chi(mid) q_hat(left) / n with the left grid point
    // clamped to 1/n for the first cell; only cells right of the lowest
    // trimmed point enter the suffix.
    let mut w_cells = vec![T::zero(); n];
    for (j, w) in w_cells.iter_mut().enumerate().skip(k_lo) {
        let left = T::from_usize_exact(j) / nf;
        let right = T::from_usize_exact(j + 1) / nf;
        let mid = (left + right) * T::from_f64_lossy(0.5);
        let q_cell = q_hat[j.max(1) - 1];
        *w = spec.chi(mid)? * q_cell * (right - left);
    }
    let mut apsi_q = vec![T::zero(); k_hi - k_lo + 1];
    for (g, k) in (k_lo..=k_hi).enumerate() {
        let u = q_est.grid()[k - 1];
        apsi_q[g] = beliefs.a(u)? * spec.psi(u) * q_hat[k - 1];
    }
    Ok(SBandPrecompute {
        w_cells,
        apsi_q,
        k_lo,
        k_hi,
    })
}

/// One multiplier draw of the estimated S-process, visiting
/// `(grid_position, G_hat(u))`. O(n) per draw: fresh uniforms are bucketed
/// into grid cells and the integral accumulates as a suffix sum of the
/// precomputed weights times the centered counting process.
fn s_band_draw<T: Real>(
    n: usize,
    pre: &SBandPrecompute<T>,
    seed: u64,
    draw: u64,
    mut visit: impl FnMut(usize, T),
) {
    let mut gen = rng::stream(seed, &[LANE_SBAND, draw]);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        let u: T = rng::standard_uniform(&mut gen);
        let cell = crate::quantile::floor_level_index(T::from_usize_exact(n) * u).min(n - 1);
        counts[cell] += 1;
    }
    // d[j] = #{U_i < j/n} - n (j/n), exact in integer arithmetic.
    let mut cumulative = 0u32;
    let mut d = vec![T::zero(); n + 1];
    for j in 1..=n {
        cumulative += counts[j - 1];
        d[j] = T::from_f64_lossy(f64::from(cumulative)) - T::from_usize_exact(j);
    }
    let sqrt_n = T::from_usize_exact(n).sqrt();
    let mut suffix = T::zero();
    let mut j = n;
    while j > pre.k_lo {
        j -= 1;
        suffix = suffix + pre.w_cells[j] * d[j];
        if j <= pre.k_hi {
            let g = j - pre.k_lo;
            visit(g, (T::zero() - suffix + pre.apsi_q[g] * d[j]) / sqrt_n);
        }
    }
}

/// Gaussian multiplier band for an S-type counterfactual:
/// `S_hat(u) +- c / sqrt(n)` with `c` simulated from the estimated
/// influence process.
pub fn uniform_band_s<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    tau: T,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let spacings = sample.spacings();
    let mut q_est = kernel_quantile_density(&spacings, kernel, bandwidth)?;
    q_est.set_trim(tau)?;
    uniform_band_s_from(sample, &q_est, spec, alpha, config)
}

/// S-type band reusing prepared quantile-density estimates.
pub(crate) fn uniform_band_s_from<T: Real>(
    sample: &BidSample<T>,
    q_est: &crate::quantile::QuantileEstimates<T>,
    spec: &CounterfactualSpec<T>,
    alpha: T,
    config: &SimConfig,
) -> Result<ConfidenceBand<T>> {
    check_alpha(alpha)?;
    let idx = q_est.trimmed_indices()?;
    let n = q_est.n();
    let pre = s_band_precompute(spec, q_est, &idx)?;
    let sups: Vec<T> = (0..config.n_sims)
        .into_par_iter()
        .map(|b| {
            let mut sup = initial_sup();
            s_band_draw(n, &pre, config.seed, b as u64, |_, z| {
                side_fold(config.side, &mut sup, z)
            });
            sup
        })
        .collect();
    // The S-type band pairs sup |G_hat| with the (1 - alpha/2) quantile,
    // a deliberately conservative construction: G_hat estimates the
    // influence function with the same q_hat plug-in that the centering
    // uses, and the extra margin absorbs that first-stage error.
    let level = match config.side {
        Side::TwoSided => T::one() - alpha / T::from_f64_lossy(2.0),
        _ => T::one() - alpha,
    };
    let c = critical_value_at(&sups, alpha, level)?;
    let s_curve = estimate_s_curve(sample, spec)?;
    let grid: Vec<T> = idx.clone().map(|g| q_est.grid()[g]).collect();
    let center: Vec<T> = idx.clone().map(|g| s_curve.values()[g]).collect();
    let sqrt_n = T::from_usize_exact(n).sqrt();
    let unit_half = vec![T::one() / sqrt_n; grid.len()];
    let iota = vec![T::one(); grid.len()];
    Ok(assemble_band(
        grid,
        center,
        unit_half,
        iota,
        alpha,
        c,
        q_est.bandwidth(),
        q_est.trim_bounds(),
        config,
    ))
}

/// The reserve-price-optimality test of `H0: sup Delta = 0` against
/// `H1: sup Delta > 0`.
///
/// The critical value is the `(1-alpha)` simulated quantile of the raw
/// shape `sup (q_hat^U - 1)`; the lower envelope is
/// `Delta_hat(u) - M a A3(u) A(u) q_hat(u) c` on `[h, 1-h]`; the statistic
/// is its grid maximum, attained at the estimated optimal exclusion level.
pub fn reserve_price_test<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    alpha: T,
    config: &SimConfig,
) -> Result<TestResult<T>> {
    reserve_price_test_with_envelope(sample, beliefs, kernel, bandwidth, alpha, config)
        .map(|(result, _, _)| result)
}

/// [`reserve_price_test`] returning the trimmed grid and the lower
/// envelope alongside the verdict, for plotting.
pub fn reserve_price_test_with_envelope<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    alpha: T,
    config: &SimConfig,
) -> Result<(TestResult<T>, Vec<T>, Vec<T>)> {
    check_alpha(alpha)?;
    let delta = revenue_delta_curve(sample, beliefs, kernel, bandwidth)?;
    let spacings = sample.spacings();
    let q_est = kernel_quantile_density(&spacings, kernel, bandwidth)?;
    let idx = q_est.trimmed_indices()?;
    let n = q_est.n();
    let sups = simulate_uniform_pseudo(
        n,
        bandwidth,
        kernel,
        PseudoTarget::ReserveShape::<T>,
        q_est.trim(),
        config,
    )?;
    let c = if alpha >= T::one() {
        T::zero()
    } else {
        simulated_quantile(&sups, T::one() - alpha)?
    };
    let m = T::from_usize_exact(beliefs.m_max());
    let a_check = beliefs.a_check();
    let mut grid = Vec::new();
    let mut envelope = Vec::new();
    let mut statistic = T::neg_infinity();
    let mut at = delta.grid()[0];
    for (g, k) in idx.enumerate() {
        let u = delta.grid()[g];
        let iota = m * a_check * beliefs.eval(AFunction::A3, u)? * beliefs.a(u)?;
        let lo = delta.values()[g] - iota * q_est.q_hat()[k] * c;
        if lo > statistic {
            statistic = lo;
            at = u;
        }
        grid.push(u);
        envelope.push(lo);
    }
    let result = TestResult {
        statistic,
        optimal_exclusion: at,
        reject: statistic > T::zero(),
        alpha,
        critical_value: c,
        bandwidth: bandwidth.value(),
        n_sims: config.n_sims,
        seed: config.seed,
    };
    Ok((result, grid, envelope))
}
