//! Counterfactual functionals of the value quantile function.
//!
//! Every counterfactual of interest at exclusion level `u*` has the form
//!
//! ```text
//! T(u*) = phi(u*) v(u*) + int_{u*}^1 psi(z) v(z) dz,
//! ```
//!
//! with the `(phi, psi)` pairs of [`make_spec`] covering expected total
//! surplus, bidder surplus, and revenue. Substituting `v = Q + A q` and
//! integrating by parts turns the integral into a weighted sum of order
//! statistics with weights
//!
//! ```text
//! chi_psi(u) = (1 - A'(u)) psi(u) - A(u) psi'(u),
//! ```
//!
//! which is what the tuning-free estimator [`estimate_s`] evaluates: no
//! bandwidth enters. Counterfactuals with a nonzero `phi` term additionally
//! need the value quantile at `u*` itself and are estimated by
//! [`estimate_t`], which plugs in the kernel estimate `v_hat`. The module
//! also houses the revenue difference `Delta(u*) = Rev(u*) - Rev(0)` in the
//! prefix-integral orientation used by the reserve-price test, optimal bids,
//! participation probabilities, and slow-grid population evaluators used as
//! oracles by the test suite.

use serde::Serialize;
use std::sync::Arc;

use crate::beliefs::{BeliefFunctions, Poly, ValueQuantileEstimate};
use crate::kernel::Kernel;
use crate::quantile::{
    canonical_grid, floor_level_index, kernel_quantile_density_at, Bandwidth, BidSample,
};
use crate::scalar::Real;
use crate::{Error, Result};

/// Named counterfactual functionals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterfactualKind {
    /// Expected total surplus; `phi = 0`, `psi = A2'`.
    TotalSurplus,
    /// Expected bidder surplus; `phi = -a A3`, `psi = -a A3'`.
    BidderSurplus,
    /// Expected revenue; `phi = M a A3`, `psi = A2' + M a A3'`.
    Revenue,
    /// Revenue gain over the non-binding reserve, `Rev(u*) - Rev(0)`.
    RevenueDelta,
    /// Equilibrium bid of a bidder with value `v(u)` under exclusion `u*`.
    OptimalBid,
    /// Caller-supplied `(phi, psi, psi')`.
    Custom,
}

impl std::str::FromStr for CounterfactualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "total-surplus" | "ts" => Ok(Self::TotalSurplus),
            "bidder-surplus" | "bs" => Ok(Self::BidderSurplus),
            "revenue" | "rev" => Ok(Self::Revenue),
            "revenue-delta" | "delta" => Ok(Self::RevenueDelta),
            other => Err(Error::Config(format!(
                "unknown counterfactual '{other}', expected one of: \
                 total-surplus, bidder-surplus, revenue, revenue-delta"
            ))),
        }
    }
}

/// Which estimator produced a curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorFlavor {
    /// Tuning-free order-statistic estimator.
    SType,
    /// Kernel-plug-in estimator.
    TType,
}

/// Quadrature rule for the per-cell integrals.
///
/// The midpoint rule is the default; the five-point Gauss-Legendre rule
/// exists to measure how little the choice matters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrationRule {
    Midpoint,
    GaussLegendre5,
}

/// Gauss-Legendre nodes and weights on [-1, 1], five points.
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Scalar function stored either as exact polynomial coefficients or as a
/// caller-supplied closure.
#[derive(Clone)]
enum FnRepr<T> {
    Poly(Poly<T>),
    Func(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> FnRepr<T> {
    fn eval(&self, u: T) -> T {
        match self {
            FnRepr::Poly(p) => p.eval(u),
            FnRepr::Func(f) => f(u),
        }
    }
}

impl<T> std::fmt::Debug for FnRepr<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FnRepr::Poly(_) => f.write_str("Poly"),
            FnRepr::Func(_) => f.write_str("Func"),
        }
    }
}

/// A `(phi, psi, psi')` triple together with the beliefs that shape it.
#[derive(Clone, Debug)]
pub struct CounterfactualSpec<T> {
    kind: CounterfactualKind,
    phi: FnRepr<T>,
    psi: FnRepr<T>,
    psi_prime: FnRepr<T>,
    beliefs: BeliefFunctions<T>,
}

impl<T: Real> CounterfactualSpec<T> {
    /// Custom spec; the derivative `psi'` must be supplied analytically,
    /// the library never differentiates numerically.
    pub fn custom(
        beliefs: BeliefFunctions<T>,
        phi: impl Fn(T) -> T + Send + Sync + 'static,
        psi: impl Fn(T) -> T + Send + Sync + 'static,
        psi_prime: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: CounterfactualKind::Custom,
            phi: FnRepr::Func(Arc::new(phi)),
            psi: FnRepr::Func(Arc::new(psi)),
            psi_prime: FnRepr::Func(Arc::new(psi_prime)),
            beliefs,
        }
    }

    /// The named functional this spec encodes.
    pub fn kind(&self) -> CounterfactualKind {
        self.kind
    }

    /// The beliefs the spec was built from.
    pub fn beliefs(&self) -> &BeliefFunctions<T> {
        &self.beliefs
    }

    /// `phi(u)`.
    pub fn phi(&self, u: T) -> T {
        self.phi.eval(u)
    }

    /// `psi(u)`.
    pub fn psi(&self, u: T) -> T {
        self.psi.eval(u)
    }

    /// `psi'(u)`.
    pub fn psi_prime(&self, u: T) -> T {
        self.psi_prime.eval(u)
    }

    /// The integration-by-parts weight
    /// `chi_psi(u) = (1 - A'(u)) psi(u) - A(u) psi'(u)`.
    pub fn chi(&self, u: T) -> Result<T> {
        let a = self.beliefs.a(u)?;
        let a_prime = self.beliefs.a_prime(u)?;
        Ok((T::one() - a_prime) * self.psi.eval(u) - a * self.psi_prime.eval(u))
    }
}

/// Builds the `(phi, psi)` pair for a named kind.
///
/// All members are exact coefficient arrays derived from the beliefs'
/// polynomial family; `RevenueDelta` shares the revenue pair and only
/// reorients the estimator (see [`revenue_delta`]).
pub fn make_spec<T: Real>(
    kind: CounterfactualKind,
    beliefs: &BeliefFunctions<T>,
) -> Result<CounterfactualSpec<T>> {
    let m = T::from_usize_exact(beliefs.m_max());
    let a_check = beliefs.a_check();
    let zero = Poly::new(vec![T::zero()]);
    let a2_d1 = beliefs.a2_poly().derivative();
    let a3 = beliefs.a3_poly().clone();
    let a3_d1 = a3.derivative();
    let (phi, psi) = match kind {
        CounterfactualKind::TotalSurplus => (zero, a2_d1),
        CounterfactualKind::BidderSurplus => {
            let neg_a = T::zero() - a_check;
            (
                a3.combine(neg_a, &zero, T::zero()),
                a3_d1.combine(neg_a, &zero, T::zero()),
            )
        }
        CounterfactualKind::Revenue | CounterfactualKind::RevenueDelta => {
            let ma = m * a_check;
            (
                a3.combine(ma, &zero, T::zero()),
                a2_d1.combine(T::one(), &a3_d1, ma),
            )
        }
        CounterfactualKind::OptimalBid | CounterfactualKind::Custom => {
            return Err(Error::Config(format!(
                "{kind:?} has no (phi, psi) representation; use the dedicated entry point"
            )));
        }
    };
    let psi_prime = psi.derivative();
    Ok(CounterfactualSpec {
        kind,
        phi: FnRepr::Poly(phi),
        psi: FnRepr::Poly(psi),
        psi_prime: FnRepr::Poly(psi_prime),
        beliefs: beliefs.clone(),
    })
}

/// A counterfactual evaluated over a grid of exclusion levels.
#[derive(Clone, Debug, Serialize)]
pub struct CounterfactualCurve<T> {
    kind: CounterfactualKind,
    estimator: EstimatorFlavor,
    grid: Vec<T>,
    values: Vec<T>,
    bandwidth: Option<Bandwidth<T>>,
}

impl<T: Real> CounterfactualCurve<T> {
    fn new(
        kind: CounterfactualKind,
        estimator: EstimatorFlavor,
        grid: Vec<T>,
        values: Vec<T>,
        bandwidth: Option<Bandwidth<T>>,
    ) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Domain(
                "curve grid and values must have equal length".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("curve values must be finite".into()));
        }
        Ok(Self {
            kind,
            estimator,
            grid,
            values,
            bandwidth,
        })
    }

    /// Exclusion levels.
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    /// Counterfactual values, aligned with [`grid`](Self::grid).
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// The functional the curve estimates.
    pub fn kind(&self) -> CounterfactualKind {
        self.kind
    }

    /// Which estimator produced the curve.
    pub fn estimator(&self) -> EstimatorFlavor {
        self.estimator
    }

    /// Bandwidth, present for T-type curves.
    pub fn bandwidth(&self) -> Option<Bandwidth<T>> {
        self.bandwidth
    }

    /// Grid position and level of the largest value (first on ties).
    pub fn argmax(&self) -> (usize, T) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        (best, self.grid[best])
    }
}

/// Integral of `chi_psi` over `[a, b]` by the requested rule.
fn chi_cell_integral<T: Real>(
    spec: &CounterfactualSpec<T>,
    a: T,
    b: T,
    rule: IntegrationRule,
) -> Result<T> {
    let len = b - a;
    if len <= T::zero() {
        return Ok(T::zero());
    }
    match rule {
        IntegrationRule::Midpoint => {
            Ok(spec.chi((a + b) * T::from_f64_lossy(0.5))? * len)
        }
        IntegrationRule::GaussLegendre5 => {
            let mid = (a + b) * T::from_f64_lossy(0.5);
            let half = len * T::from_f64_lossy(0.5);
            let mut acc = T::zero();
            for (&x, &w) in GL5_NODES.iter().zip(&GL5_WEIGHTS) {
                acc = acc
                    + T::from_f64_lossy(w) * spec.chi(mid + half * T::from_f64_lossy(x))?;
            }
            Ok(acc * half)
        }
    }
}

/// Tuning-free estimator of `S_psi(u*) = int_{u*}^1 psi v` with the default
/// midpoint rule.
pub fn estimate_s<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    u_star: T,
) -> Result<T> {
    estimate_s_with(sample, spec, u_star, IntegrationRule::Midpoint)
}

/// [`estimate_s`] with an explicit quadrature rule.
///
/// Implements the order-statistic form
///
/// ```text
/// S_hat(u*) = sum_{i=floor(n u*)}^{n-1} b_(i+1) int_{max(i/n, u*)}^{(i+1)/n} chi_psi
///             - A(u*) psi(u*) b_(floor(n u*)+1) + A(1) psi(1) b_(n).
/// ```
///
/// Cells accumulate from the right so that the scalar value at a grid level
/// reproduces [`estimate_s_curve`] bit for bit.
pub fn estimate_s_with<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    u_star: T,
    rule: IntegrationRule,
) -> Result<T> {
    if !(u_star >= T::zero() && u_star <= T::one()) {
        return Err(Error::Domain(format!(
            "exclusion level must lie in [0, 1], got {u_star}"
        )));
    }
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let bids = sample.bids();
    let beliefs = spec.beliefs();
    let k = floor_level_index(nf * u_star).min(n);

    let mut integral = T::zero();
    let mut i = n;
    while i > k {
        i -= 1;
        let left_edge = T::from_usize_exact(i) / nf;
        let left = if i == k { left_edge.max(u_star) } else { left_edge };
        let right = T::from_usize_exact(i + 1) / nf;
        integral = integral + bids[i] * chi_cell_integral(spec, left, right, rule)?;
    }

    let point_idx = k.min(n - 1);
    Ok(
        integral - beliefs.a(u_star)? * spec.psi(u_star) * bids[point_idx]
            + beliefs.a(T::one())? * spec.psi(T::one()) * bids[n - 1],
    )
}

/// S-type estimates over the whole canonical grid in one O(n) pass.
pub fn estimate_s_curve<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
) -> Result<CounterfactualCurve<T>> {
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let bids = sample.bids();
    let beliefs = spec.beliefs();
    let end_term = beliefs.a(T::one())? * spec.psi(T::one()) * bids[n - 1];

    let mut values = vec![T::zero(); n - 1];
    let mut suffix = T::zero();
    let mut j = n;
    while j > 0 {
        j -= 1;
        let left = T::from_usize_exact(j) / nf;
        let right = T::from_usize_exact(j + 1) / nf;
        suffix = suffix + bids[j] * chi_cell_integral(spec, left, right, IntegrationRule::Midpoint)?;
        if j >= 1 {
            values[j - 1] = suffix - beliefs.a(left)? * spec.psi(left) * bids[j] + end_term;
        }
    }
    CounterfactualCurve::new(
        spec.kind(),
        EstimatorFlavor::SType,
        canonical_grid(n),
        values,
        None,
    )
}

fn check_trim<T: Real>(u_star: T, h: T) -> Result<()> {
    let eps = T::from_f64_lossy(1e-12);
    if u_star < h - eps || u_star > T::one() - h + eps {
        return Err(Error::Trim(format!(
            "exclusion level {u_star} outside the trimmed interval [{h}, {}]",
            T::one() - h
        )));
    }
    Ok(())
}

/// T-type estimator `T_hat(u*) = phi(u*) v_hat(u*) + S_hat(u*)`.
///
/// The level is snapped to the estimation grid, `u* -> floor(n u*)/n`; the
/// kernel estimate `v_hat` only exists on grid points.
pub fn estimate_t<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    u_star: T,
) -> Result<T> {
    check_trim(u_star, bandwidth.value())?;
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let k = floor_level_index(nf * u_star).clamp(1, n - 1);
    let u = T::from_usize_exact(k) / nf;
    let q_at = kernel_quantile_density_at(&sample.spacings(), kernel, bandwidth, &[u])[0];
    let v_at = sample.bids()[k] + spec.beliefs().a(u)? * q_at;
    let s = estimate_s(sample, spec, u)?;
    Ok(spec.phi(u) * v_at + s)
}

/// T-type estimates over the trimmed canonical grid.
pub fn estimate_t_curve<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
) -> Result<CounterfactualCurve<T>> {
    let v_est = crate::beliefs::value_quantile(sample, spec.beliefs(), kernel, bandwidth)?;
    estimate_t_curve_from(sample, &v_est, spec)
}

/// [`estimate_t_curve`] reusing a precomputed value-quantile estimate, so
/// several specs can share one kernel pass. The estimate must come from
/// `sample` with the spec's beliefs.
pub fn estimate_t_curve_from<T: Real>(
    sample: &BidSample<T>,
    v_est: &ValueQuantileEstimate<T>,
    spec: &CounterfactualSpec<T>,
) -> Result<CounterfactualCurve<T>> {
    let n = sample.n();
    if v_est.q_estimates().n() != n {
        return Err(Error::Domain(
            "value-quantile estimate does not match the sample size".into(),
        ));
    }
    let s_curve = estimate_s_curve(sample, spec)?;
    let idx = v_est.q_estimates().trimmed_indices()?;
    let mut grid = Vec::with_capacity(idx.len());
    let mut values = Vec::with_capacity(idx.len());
    for k in idx {
        let u = v_est.grid()[k];
        grid.push(u);
        values.push(spec.phi(u) * v_est.v_hat()[k] + s_curve.values()[k]);
    }
    CounterfactualCurve::new(
        spec.kind(),
        EstimatorFlavor::TType,
        grid,
        values,
        Some(v_est.q_estimates().bandwidth()),
    )
}

/// Revenue gain `Delta_hat(u*)` over the non-binding reserve.
///
/// Evaluates the prefix orientation
///
/// ```text
/// Delta_hat(u*) = phi(u*) v_hat(u*)
///   - [ int_0^{u*} chi_psi Q_hat + A(u*) psi(u*) Q_hat(u*) - A(0) psi(0) Q_hat(0) ]
/// ```
///
/// with the revenue pair `phi = M a A3`, `psi = A2' + M a A3'`. The level
/// snaps to the grid like every T-type quantity.
pub fn revenue_delta<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
    u_star: T,
) -> Result<T> {
    check_trim(u_star, bandwidth.value())?;
    let spec = make_spec(CounterfactualKind::RevenueDelta, beliefs)?;
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let k = floor_level_index(nf * u_star).clamp(1, n - 1);
    let u = T::from_usize_exact(k) / nf;
    let q_at = kernel_quantile_density_at(&sample.spacings(), kernel, bandwidth, &[u])[0];
    delta_at_grid_index(sample, &spec, k, q_at, None)
}

/// `Delta_hat` over the trimmed canonical grid, sharing one kernel pass.
pub fn revenue_delta_curve<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
) -> Result<CounterfactualCurve<T>> {
    let spec = make_spec(CounterfactualKind::RevenueDelta, beliefs)?;
    let spacings = sample.spacings();
    let q_est = crate::quantile::kernel_quantile_density(&spacings, kernel, bandwidth)?;
    let idx = q_est.trimmed_indices()?;
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let bids = sample.bids();

    // Prefix integral int_0^{k/n} chi Q_hat, extended cell by cell from the
    // left so every grid level sees the identical partial sum the scalar
    // entry point computes.
    let mut grid = Vec::with_capacity(idx.len());
    let mut values = Vec::with_capacity(idx.len());
    let mut prefix = T::zero();
    let mut covered = 0usize;
    for g in idx {
        let k = g + 1;
        while covered < k {
            let left = T::from_usize_exact(covered) / nf;
            let right = T::from_usize_exact(covered + 1) / nf;
            prefix = prefix
                + bids[covered] * chi_cell_integral(&spec, left, right, IntegrationRule::Midpoint)?;
            covered += 1;
        }
        let u = q_est.grid()[g];
        grid.push(u);
        values.push(delta_from_parts(
            sample,
            &spec,
            k,
            q_est.q_hat()[g],
            prefix,
        )?);
    }
    CounterfactualCurve::new(
        CounterfactualKind::RevenueDelta,
        EstimatorFlavor::TType,
        grid,
        values,
        Some(bandwidth),
    )
}

/// Scalar `Delta_hat` at grid index `k`, recomputing the prefix integral
/// unless one is supplied.
fn delta_at_grid_index<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    k: usize,
    q_at: T,
    prefix: Option<T>,
) -> Result<T> {
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let bids = sample.bids();
    let prefix = match prefix {
        Some(p) => p,
        None => {
            let mut acc = T::zero();
            for i in 0..k {
                let left = T::from_usize_exact(i) / nf;
                let right = T::from_usize_exact(i + 1) / nf;
                acc = acc
                    + bids[i] * chi_cell_integral(spec, left, right, IntegrationRule::Midpoint)?;
            }
            acc
        }
    };
    delta_from_parts(sample, spec, k, q_at, prefix)
}

fn delta_from_parts<T: Real>(
    sample: &BidSample<T>,
    spec: &CounterfactualSpec<T>,
    k: usize,
    q_at: T,
    prefix: T,
) -> Result<T> {
    let n = sample.n();
    let nf = T::from_usize_exact(n);
    let bids = sample.bids();
    let beliefs = spec.beliefs();
    let u = T::from_usize_exact(k) / nf;
    let v_at = bids[k] + beliefs.a(u)? * q_at;
    let point = beliefs.a(u)? * spec.psi(u) * bids[k];
    let origin = beliefs.a(T::zero())? * spec.psi(T::zero()) * bids[0];
    Ok(spec.phi(u) * v_at - (prefix + point - origin))
}

/// Equilibrium bid of a bidder with value `v(u)` when types below `u*` are
/// excluded:
///
/// ```text
/// beta(u) = (A1(u*) / A1(u)) v(u*) + int_{u*}^{u} (A1'(z) / A1(u)) v(z) dz.
/// ```
///
/// The integral uses midpoint values of `A1'` and the left-gridpoint value
/// of `v_hat` on each cell (the cell touching zero uses `v_hat(1/n)`).
pub fn optimal_bid<T: Real>(
    v_est: &ValueQuantileEstimate<T>,
    beliefs: &BeliefFunctions<T>,
    u_star: T,
    u: T,
) -> Result<T> {
    if !(u_star >= T::zero() && u_star <= T::one()) || !(u >= T::zero() && u <= T::one()) {
        return Err(Error::Domain(
            "optimal bid levels must lie in [0, 1]".into(),
        ));
    }
    if u < u_star {
        return Err(Error::Domain(format!(
            "bidder level {u} must be at least the exclusion level {u_star}"
        )));
    }
    let a1_at_u = beliefs.eval(crate::beliefs::AFunction::A1, u)?;
    if a1_at_u <= T::zero() {
        return Err(Error::Singularity(format!("A1({u}) = 0")));
    }
    let n = v_est.q_estimates().n();
    let nf = T::from_usize_exact(n);
    let v_hat = v_est.v_hat();
    let v_at = |cell: usize| v_hat[cell.max(1) - 1];

    let k_star = floor_level_index(nf * u_star).min(n - 1);
    let k = floor_level_index(nf * u).min(n - 1);
    let half = T::from_f64_lossy(0.5);
    let mut integral = T::zero();
    for i in k_star..=k {
        let left = (T::from_usize_exact(i) / nf).max(u_star);
        let right = (T::from_usize_exact(i + 1) / nf).min(u);
        let len = right - left;
        if len <= T::zero() {
            continue;
        }
        let mid = (left + right) * half;
        let a1_d1 = beliefs.eval(crate::beliefs::AFunction::A1Prime, mid)?;
        integral = integral + a1_d1 * v_at(i) * len;
    }
    let a1_at_star = beliefs.eval(crate::beliefs::AFunction::A1, u_star)?;
    Ok((a1_at_star * v_at(k_star) + integral) / a1_at_u)
}

/// Probability that exactly `m` bidders remain active when types below
/// `u*` are excluded:
///
/// ```text
/// P(m | u*) = sum_{i=m}^{M} p_i C(i, m) (1 - u*)^m (u*)^(i - m).
/// ```
pub fn participation_probability<T: Real>(
    beliefs: &BeliefFunctions<T>,
    m: usize,
    u_star: T,
) -> Result<T> {
    let m_max = beliefs.m_max();
    if m > m_max {
        return Err(Error::Domain(format!(
            "active count {m} exceeds the maximum bidder count {m_max}"
        )));
    }
    if !(u_star >= T::zero() && u_star <= T::one()) {
        return Err(Error::Domain(format!(
            "exclusion level must lie in [0, 1], got {u_star}"
        )));
    }
    let keep = (T::one() - u_star).powi(m as i32);
    let mut acc = T::zero();
    for i in 1..=m_max {
        if i < m {
            continue;
        }
        let p_i = beliefs.p_check()[i - 1];
        acc = acc + p_i * binomial::<T>(i, m) * keep * u_star.powi((i - m) as i32);
    }
    Ok(acc)
}

/// Binomial coefficient as a scalar, multiplicative form.
fn binomial<T: Real>(n: usize, k: usize) -> T {
    let k = k.min(n - k);
    let mut acc = T::one();
    for t in 1..=k {
        acc = acc * T::from_usize_exact(n - k + t) / T::from_usize_exact(t);
    }
    acc
}

/// Population value `T(u*) = phi(u*) v(u*) + int_{u*}^1 psi v` for a known
/// value quantile function, by the midpoint rule on an aligned grid of
/// `resolution` cells. Quadrature error decays like `resolution^-2`.
pub fn population_functional<T: Real>(
    spec: &CounterfactualSpec<T>,
    v: impl Fn(T) -> T,
    u_star: T,
    resolution: usize,
) -> Result<T> {
    if !(u_star >= T::zero() && u_star <= T::one()) {
        return Err(Error::Domain(format!(
            "exclusion level must lie in [0, 1], got {u_star}"
        )));
    }
    if resolution < 2 {
        return Err(Error::Config(
            "population grid needs at least 2 cells".into(),
        ));
    }
    let rf = T::from_usize_exact(resolution);
    let half = T::from_f64_lossy(0.5);
    let k = floor_level_index(rf * u_star).min(resolution);
    let mut integral = T::zero();
    let mut i = resolution;
    while i > k {
        i -= 1;
        let left_edge = T::from_usize_exact(i) / rf;
        let left = if i == k { left_edge.max(u_star) } else { left_edge };
        let right = T::from_usize_exact(i + 1) / rf;
        let len = right - left;
        if len > T::zero() {
            let mid = (left + right) * half;
            integral = integral + spec.psi(mid) * v(mid) * len;
        }
    }
    Ok(spec.phi(u_star) * v(u_star) + integral)
}

/// Population curve of `T(u*)` on the grid `{j/resolution}`, `j = 0..=resolution`,
/// via one right-to-left pass.
pub fn population_functional_curve<T: Real>(
    spec: &CounterfactualSpec<T>,
    v: impl Fn(T) -> T,
    resolution: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    if resolution < 2 {
        return Err(Error::Config(
            "population grid needs at least 2 cells".into(),
        ));
    }
    let rf = T::from_usize_exact(resolution);
    let half = T::from_f64_lossy(0.5);
    let grid: Vec<T> = (0..=resolution)
        .map(|j| T::from_usize_exact(j) / rf)
        .collect();
    let mut values = vec![T::zero(); resolution + 1];
    values[resolution] = spec.phi(T::one()) * v(T::one());
    let mut suffix = T::zero();
    let mut j = resolution;
    while j > 0 {
        j -= 1;
        let left = T::from_usize_exact(j) / rf;
        let right = T::from_usize_exact(j + 1) / rf;
        let mid = (left + right) * half;
        suffix = suffix + spec.psi(mid) * v(mid) * (right - left);
        values[j] = spec.phi(left) * v(left) + suffix;
    }
    Ok((grid, values))
}

/// Population revenue difference `Delta(u*) = Rev(u*) - Rev(0)`.
pub fn population_revenue_delta<T: Real>(
    beliefs: &BeliefFunctions<T>,
    v: impl Fn(T) -> T,
    u_star: T,
    resolution: usize,
) -> Result<T> {
    let spec = make_spec(CounterfactualKind::Revenue, beliefs)?;
    let at_star = population_functional(&spec, &v, u_star, resolution)?;
    let at_zero = population_functional(&spec, &v, T::zero(), resolution)?;
    Ok(at_star - at_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::estimate_beliefs;
    use crate::beliefs::AuctionCounts;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn two_bidder() -> BeliefFunctions<f64> {
        BeliefFunctions::two_bidder()
    }

    fn uniform_sample(n: usize, seed: u64) -> BidSample<f64> {
        BidSample::from_sorted(rng::sorted_uniforms(n, &mut rng::stream(seed, &[0]))).unwrap()
    }

    #[test]
    fn revenue_spec_matches_hand_substitution() {
        // p_2 = 1, M = 2: A3 = u(1-u), A2' = 2u, a = 1, so
        // phi = 2u(1-u) and psi = 2u + 2(1-2u) = 2 - 2u.
        let spec = make_spec(CounterfactualKind::Revenue, &two_bidder()).unwrap();
        for &u in &[0.0, 0.21, 0.5, 0.83, 1.0] {
            assert_abs_diff_eq!(spec.phi(u), 2.0 * u * (1.0 - u), epsilon = 1e-12);
            assert_abs_diff_eq!(spec.psi(u), 2.0 - 2.0 * u, epsilon = 1e-12);
            assert_abs_diff_eq!(spec.psi_prime(u), -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn total_surplus_has_no_point_term() {
        for beliefs in [two_bidder(), estimate_beliefs(&AuctionCounts::new(vec![2, 3, 5]).unwrap()).unwrap()] {
            let spec = make_spec(CounterfactualKind::TotalSurplus, &beliefs).unwrap();
            for &u in &[0.0, 0.4, 1.0] {
                assert_eq!(spec.phi(u), 0.0);
            }
        }
    }

    #[test]
    fn revenue_decomposes_into_surpluses() {
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 2, 3, 4, 4, 5]).unwrap()).unwrap();
        let m = beliefs.m_max() as f64;
        let rev = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let ts = make_spec(CounterfactualKind::TotalSurplus, &beliefs).unwrap();
        let bs = make_spec(CounterfactualKind::BidderSurplus, &beliefs).unwrap();
        let mut r = rng::stream(13, &[0]);
        for _ in 0..40 {
            let u: f64 = r.random();
            assert_abs_diff_eq!(rev.phi(u), ts.phi(u) - m * bs.phi(u), epsilon = 1e-12);
            assert_abs_diff_eq!(rev.psi(u), ts.psi(u) - m * bs.psi(u), epsilon = 1e-12);
        }
    }

    #[test]
    fn chi_matches_symbolic_two_bidder_forms() {
        // With A = u, A' = 1: chi = -u psi'. TS: psi = 2u -> chi = -2u;
        // BS: psi = 2u - 1 -> chi = -2u; Rev: psi = 2 - 2u -> chi = 2u.
        let b = two_bidder();
        let cases = [
            (CounterfactualKind::TotalSurplus, -2.0),
            (CounterfactualKind::BidderSurplus, -2.0),
            (CounterfactualKind::Revenue, 2.0),
        ];
        for (kind, slope) in cases {
            let spec = make_spec(kind, &b).unwrap();
            for &u in &[0.13, 0.5, 0.77, 1.0] {
                assert_abs_diff_eq!(spec.chi(u).unwrap(), slope * u, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn chi_matches_composition_for_general_beliefs() {
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 3, 4, 6, 6]).unwrap()).unwrap();
        let spec = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let mut r = rng::stream(29, &[0]);
        for _ in 0..30 {
            let u = 0.01 + 0.99 * r.random::<f64>();
            let oracle = (1.0 - beliefs.a_prime(u).unwrap()) * spec.psi(u)
                - beliefs.a(u).unwrap() * spec.psi_prime(u);
            assert_abs_diff_eq!(spec.chi(u).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn zero_psi_spec_estimates_zero() {
        let spec = CounterfactualSpec::custom(two_bidder(), |_| 0.0, |_| 0.0, |_| 0.0);
        let sample = uniform_sample(200, 5);
        for &u in &[0.0, 0.3, 0.77, 1.0] {
            assert_eq!(estimate_s(&sample, &spec, u).unwrap(), 0.0);
        }
    }

    #[test]
    fn s_vanishes_at_full_exclusion() {
        let sample = uniform_sample(150, 6);
        for kind in [
            CounterfactualKind::TotalSurplus,
            CounterfactualKind::BidderSurplus,
            CounterfactualKind::Revenue,
        ] {
            let spec = make_spec(kind, &two_bidder()).unwrap();
            assert_eq!(estimate_s(&sample, &spec, 1.0).unwrap(), 0.0);
        }
    }

    /// Literal transcription of the order-statistic sum, written
    /// independently (ascending loop, no shared helpers).
    fn s_oracle(
        sample: &BidSample<f64>,
        spec: &CounterfactualSpec<f64>,
        u_star: f64,
    ) -> f64 {
        let n = sample.n();
        let bids = sample.bids();
        let b = spec.beliefs();
        let k = (n as f64 * u_star + 1e-9).floor() as usize;
        let mut total = 0.0;
        for i in k..n {
            if i >= n {
                break;
            }
            let left = (i as f64 / n as f64).max(u_star);
            let right = (i + 1) as f64 / n as f64;
            if right > left {
                let mid = 0.5 * (left + right);
                let chi = (1.0 - b.a_prime(mid).unwrap()) * spec.psi(mid)
                    - b.a(mid).unwrap() * spec.psi_prime(mid);
                total += bids[i] * chi * (right - left);
            }
        }
        let point = bids[k.min(n - 1)];
        total - b.a(u_star).unwrap() * spec.psi(u_star) * point
            + b.a(1.0).unwrap() * spec.psi(1.0) * bids[n - 1]
    }

    #[test]
    fn s_matches_independent_oracle() {
        let sample = uniform_sample(97, 7);
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 2, 3, 3, 4]).unwrap()).unwrap();
        let mut r = rng::stream(31, &[0]);
        for kind in [
            CounterfactualKind::TotalSurplus,
            CounterfactualKind::BidderSurplus,
            CounterfactualKind::Revenue,
        ] {
            let spec = make_spec(kind, &beliefs).unwrap();
            for _ in 0..25 {
                let u: f64 = r.random();
                let got = estimate_s(&sample, &spec, u).unwrap();
                let want = s_oracle(&sample, &spec, u);
                assert_abs_diff_eq!(got, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn s_scalar_reproduces_curve_bitwise() {
        let sample = uniform_sample(64, 11);
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 3, 2]).unwrap()).unwrap();
        let spec = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let curve = estimate_s_curve(&sample, &spec).unwrap();
        for (g, &u) in curve.grid().iter().enumerate() {
            let scalar = estimate_s(&sample, &spec, u).unwrap();
            assert_eq!(scalar, curve.values()[g], "grid point {u}");
        }
    }

    #[test]
    fn s_is_exactly_homogeneous_in_bids() {
        let sample = uniform_sample(120, 3);
        let doubled =
            BidSample::from_sorted(sample.bids().iter().map(|&b| 2.0 * b).collect()).unwrap();
        let spec = make_spec(CounterfactualKind::TotalSurplus, &two_bidder()).unwrap();
        for &u in &[0.0, 0.25, 0.6] {
            let base = estimate_s(&sample, &spec, u).unwrap();
            let scaled = estimate_s(&doubled, &spec, u).unwrap();
            assert_eq!(scaled, 2.0 * base);
        }
    }

    #[test]
    fn s_is_right_continuous_at_grid_points() {
        let sample = uniform_sample(50, 19);
        let spec = make_spec(CounterfactualKind::Revenue, &two_bidder()).unwrap();
        for j in [1usize, 10, 25, 49] {
            let u = j as f64 / 50.0;
            let at = estimate_s(&sample, &spec, u).unwrap();
            let after = estimate_s(&sample, &spec, u + 1e-9).unwrap();
            assert_abs_diff_eq!(at, after, epsilon = 1e-7);
        }
    }

    #[test]
    fn gauss_legendre_barely_moves_s() {
        let sample = uniform_sample(1000, 23);
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 4, 2, 3]).unwrap()).unwrap();
        let spec = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        for &u in &[0.0, 0.2, 0.5, 0.8] {
            let mid = estimate_s_with(&sample, &spec, u, IntegrationRule::Midpoint).unwrap();
            let gl = estimate_s_with(&sample, &spec, u, IntegrationRule::GaussLegendre5).unwrap();
            assert!(
                (mid - gl).abs() < 1e-6 * sample.range(),
                "midpoint {mid} vs GL5 {gl}"
            );
        }
    }

    #[test]
    fn total_surplus_t_equals_s_exactly() {
        let sample = uniform_sample(300, 2);
        let spec = make_spec(CounterfactualKind::TotalSurplus, &two_bidder()).unwrap();
        let bw = Bandwidth::manual(0.05).unwrap();
        for &u in &[0.1_f64, 0.5, 0.9] {
            let k = (300.0 * u + 1e-9).floor() as usize;
            let snapped = k as f64 / 300.0;
            let t = estimate_t(&sample, &spec, Kernel::Epanechnikov, bw, u).unwrap();
            let s = estimate_s(&sample, &spec, snapped).unwrap();
            assert_eq!(t, s);
        }
    }

    #[test]
    fn estimator_level_revenue_identity() {
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 3, 4, 2, 4]).unwrap()).unwrap();
        let m = beliefs.m_max() as f64;
        let rev = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let ts = make_spec(CounterfactualKind::TotalSurplus, &beliefs).unwrap();
        let bs = make_spec(CounterfactualKind::BidderSurplus, &beliefs).unwrap();
        let bw = Bandwidth::manual(0.08).unwrap();
        for seed in 0..5 {
            let sample = uniform_sample(400, 40 + seed);
            for &u in &[0.1, 0.33, 0.5, 0.71] {
                let s_identity = estimate_s(&sample, &rev, u).unwrap()
                    - (estimate_s(&sample, &ts, u).unwrap()
                        - m * estimate_s(&sample, &bs, u).unwrap());
                assert_abs_diff_eq!(s_identity, 0.0, epsilon = 1e-9);
                let t_identity = estimate_t(&sample, &rev, Kernel::Epanechnikov, bw, u).unwrap()
                    - (estimate_t(&sample, &ts, Kernel::Epanechnikov, bw, u).unwrap()
                        - m * estimate_t(&sample, &bs, Kernel::Epanechnikov, bw, u).unwrap());
                assert_abs_diff_eq!(t_identity, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn t_respects_the_trimmed_interval() {
        let sample = uniform_sample(100, 1);
        let spec = make_spec(CounterfactualKind::Revenue, &two_bidder()).unwrap();
        let bw = Bandwidth::manual(0.1).unwrap();
        assert!(matches!(
            estimate_t(&sample, &spec, Kernel::Epanechnikov, bw, 0.05),
            Err(Error::Trim(_))
        ));
        assert!(matches!(
            estimate_t(&sample, &spec, Kernel::Epanechnikov, bw, 0.95),
            Err(Error::Trim(_))
        ));
        assert!(estimate_t(&sample, &spec, Kernel::Epanechnikov, bw, 0.1).is_ok());
    }

    #[test]
    fn t_curve_matches_scalar_calls() {
        let sample = uniform_sample(250, 14);
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 2, 5]).unwrap()).unwrap();
        let spec = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let bw = Bandwidth::manual(0.06).unwrap();
        let curve = estimate_t_curve(&sample, &spec, Kernel::Epanechnikov, bw).unwrap();
        assert_eq!(curve.estimator(), EstimatorFlavor::TType);
        assert!(curve.bandwidth().is_some());
        for (g, &u) in curve.grid().iter().enumerate().step_by(40) {
            let scalar = estimate_t(&sample, &spec, Kernel::Epanechnikov, bw, u).unwrap();
            assert_abs_diff_eq!(scalar, curve.values()[g], epsilon = 1e-10);
        }
    }

    #[test]
    fn delta_curve_matches_scalar_calls() {
        let sample = uniform_sample(200, 33);
        let beliefs = two_bidder();
        let bw = Bandwidth::manual(0.06).unwrap();
        let curve = revenue_delta_curve(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        for (g, &u) in curve.grid().iter().enumerate().step_by(23) {
            let scalar = revenue_delta(&sample, &beliefs, Kernel::Epanechnikov, bw, u).unwrap();
            assert_abs_diff_eq!(scalar, curve.values()[g], epsilon = 1e-10);
        }
        assert!(matches!(
            revenue_delta(&sample, &beliefs, Kernel::Epanechnikov, bw, 0.01),
            Err(Error::Trim(_))
        ));
    }

    #[test]
    fn optimal_bid_at_margin_is_the_value() {
        let sample = uniform_sample(500, 8);
        let beliefs = two_bidder();
        let bw = Bandwidth::manual(0.05).unwrap();
        let v_est =
            crate::beliefs::value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        for &u in &[0.2, 0.5, 0.8] {
            let bid = optimal_bid(&v_est, &beliefs, u, u).unwrap();
            let k = (500.0 * u + 1e-9).floor() as usize;
            assert_abs_diff_eq!(bid, v_est.v_hat()[k.max(1) - 1], epsilon = 1e-12);
        }
    }

    #[test]
    fn optimal_bid_recovers_half_value_rule() {
        // Two-bidder uniform values: equilibrium bids are v/2, so feed
        // bids U[0, 1/2]; with u* = 0 the optimal bid at level u is u/2.
        let n = 20_000;
        let bids: Vec<f64> = rng::sorted_uniforms::<f64>(n, &mut rng::stream(77, &[1]))
            .into_iter()
            .map(|u| 0.5 * u)
            .collect();
        let sample = BidSample::from_sorted(bids).unwrap();
        let beliefs = two_bidder();
        let bw = crate::quantile::rule_of_thumb_bandwidth(&sample).unwrap();
        let v_est =
            crate::beliefs::value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        for &u in &[0.3, 0.5, 0.8] {
            let bid = optimal_bid(&v_est, &beliefs, 0.0, u).unwrap();
            assert!((bid - u / 2.0).abs() < 0.02, "beta({u}) = {bid}");
        }
    }

    #[test]
    fn optimal_bid_is_monotone_for_monotone_values() {
        // Exact monotonicity holds for the continuum bid; the discretized
        // bid can dip by the midpoint-rule defect on A1', which is
        // O(n^-2) per unit of level, so allow that much slack.
        let sample = uniform_sample(300, 55);
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 4]).unwrap()).unwrap();
        let bw = Bandwidth::manual(0.1).unwrap();
        let v_est =
            crate::beliefs::value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        let u_star = 0.2;
        let slack = 1e-4;
        let mut prev = f64::NEG_INFINITY;
        let mut monotone_v = true;
        let mut prev_v = f64::NEG_INFINITY;
        for j in 60..300 {
            let u = j as f64 / 300.0;
            let v = v_est.v_hat()[j - 1];
            if v < prev_v {
                monotone_v = false;
            }
            prev_v = v;
            let bid = optimal_bid(&v_est, &beliefs, u_star, u).unwrap();
            if monotone_v {
                assert!(bid >= prev - slack, "bid dropped at u = {u}");
            }
            prev = bid;
        }
    }

    #[test]
    fn optimal_bid_validates_levels() {
        let sample = uniform_sample(50, 2);
        let beliefs = two_bidder();
        let bw = Bandwidth::manual(0.2).unwrap();
        let v_est =
            crate::beliefs::value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        assert!(optimal_bid(&v_est, &beliefs, 0.5, 0.4).is_err());
        assert!(optimal_bid(&v_est, &beliefs, 0.0, 1.2).is_err());
        // A1(0) = 0 for the two-bidder family.
        assert!(matches!(
            optimal_bid(&v_est, &beliefs, 0.0, 0.0),
            Err(Error::Singularity(_))
        ));
    }

    #[test]
    fn participation_probabilities_match_known_cases() {
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 2, 3, 5, 5, 5]).unwrap()).unwrap();
        for m in 1..=5usize {
            let p = participation_probability(&beliefs, m, 0.0).unwrap();
            assert_abs_diff_eq!(p, beliefs.p_check()[m - 1], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            participation_probability(&beliefs, 0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(participation_probability(&beliefs, 6, 0.5).is_err());
    }

    #[test]
    fn participation_probabilities_sum_to_one() {
        let mut r = rng::stream(45, &[0]);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..4).map(|_| r.random::<f64>() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let beliefs =
                BeliefFunctions::from_probabilities(raw.iter().map(|x| x / total).collect())
                    .unwrap();
            let u: f64 = r.random();
            let mut mass = 0.0;
            for m in 0..=beliefs.m_max() {
                let p = participation_probability(&beliefs, m, u).unwrap();
                assert!((0.0..=1.0 + 1e-12).contains(&p));
                mass += p;
            }
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn population_revenue_matches_closed_form() {
        // Two-bidder uniform values: Rev(u*) = 1/3 + u*^2 - (4/3) u*^3.
        let beliefs = two_bidder();
        let spec = make_spec(CounterfactualKind::Revenue, &beliefs).unwrap();
        let v = |u: f64| u;
        for &(u, want) in &[(0.0, 1.0 / 3.0), (0.5, 5.0 / 12.0), (0.25, 1.0 / 3.0 + 0.0625 - 4.0 / 3.0 * 0.015625)]
        {
            let got = population_functional(&spec, v, u, 10_000).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
        let delta = population_revenue_delta(&beliefs, v, 0.5, 10_000).unwrap();
        assert_abs_diff_eq!(delta, 1.0 / 12.0, epsilon = 1e-6);
    }

    #[test]
    fn population_curve_agrees_with_scalar_evaluator() {
        let beliefs =
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![2, 3, 3]).unwrap()).unwrap();
        let spec = make_spec(CounterfactualKind::TotalSurplus, &beliefs).unwrap();
        let v = |u: f64| 2.0 * u * u + 0.3;
        let (grid, values) = population_functional_curve(&spec, v, 500).unwrap();
        assert_eq!(grid.len(), 501);
        for j in [0usize, 123, 250, 499, 500] {
            let scalar = population_functional(&spec, v, grid[j], 500).unwrap();
            assert_abs_diff_eq!(values[j], scalar, epsilon = 1e-12);
        }
    }

    #[test]
    fn make_spec_rejects_non_functional_kinds() {
        let b = two_bidder();
        assert!(make_spec(CounterfactualKind::OptimalBid, &b).is_err());
        assert!(make_spec(CounterfactualKind::Custom, &b).is_err());
    }
}
