//! Participation beliefs and the value-quantile estimator.
//!
//! From per-auction bidder counts the module builds the empirical
//! participation frequencies `p_m` and the polynomial family
//!
//! ```text
//! A1(u) = sum_m p_m u^(m-1),   A2(u) = u A1(u),   A3(u) = (1-u) A1(u),
//! A(u)  = A1(u) / A1'(u),      a = (1/M) sum_m m p_m,
//! ```
//!
//! all with analytic derivatives obtained by coefficient manipulation and
//! the quotient rule. No numerical differentiation happens anywhere: the
//! counterfactual weights need `A'` and `psi'`, and finite differences
//! would pollute the parametric-rate estimators built on top.
//!
//! The value quantile estimator combines the pieces as
//! `v_hat(u) = Q_hat(u) + A(u) q_hat(u)`.

use serde::Serialize;

use crate::kernel::Kernel;
use crate::quantile::{Bandwidth, BidSample, QuantileEstimates};
use crate::scalar::Real;
use crate::{Error, Result};

/// Per-auction bidder counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuctionCounts {
    counts: Vec<u32>,
}

impl AuctionCounts {
    /// Wraps a vector with one bidder count per auction.
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InsufficientData(
                "need bidder counts for at least one auction".into(),
            ));
        }
        if counts.iter().any(|&m| m == 0) {
            return Err(Error::Domain(
                "every auction must have at least one bidder".into(),
            ));
        }
        Ok(Self { counts })
    }

    /// Number of auctions `L`.
    pub fn n_auctions(&self) -> usize {
        self.counts.len()
    }

    /// Pooled number of bids `sum_l m_l`.
    pub fn total_bids(&self) -> usize {
        self.counts.iter().map(|&m| m as usize).sum()
    }

    /// Largest observed bidder count `M`.
    pub fn m_max(&self) -> u32 {
        *self.counts.iter().max().expect("counts are nonempty")
    }

    /// The raw counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Dense polynomial in ascending powers; the backbone of the `A` family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub(crate) struct Poly<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Poly<T> {
    pub(crate) fn new(coeffs: Vec<T>) -> Self {
        Self { coeffs }
    }

    pub(crate) fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub(crate) fn eval(&self, u: T) -> T {
        let mut acc = T::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    /// Coefficient array of the derivative.
    pub(crate) fn derivative(&self) -> Poly<T> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * T::from_usize_exact(k))
            .collect();
        Poly { coeffs }
    }

    /// Coefficients of `u * p(u)`.
    pub(crate) fn times_u(&self) -> Poly<T> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(T::zero());
        coeffs.extend_from_slice(&self.coeffs);
        Poly { coeffs }
    }

    /// Coefficients of `(1 - u) * p(u)`.
    pub(crate) fn times_one_minus_u(&self) -> Poly<T> {
        let mut coeffs = vec![T::zero(); self.coeffs.len() + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            coeffs[k] = coeffs[k] + c;
            coeffs[k + 1] = coeffs[k + 1] - c;
        }
        Poly { coeffs }
    }

    /// Linear combination `alpha * self + beta * other`.
    pub(crate) fn combine(&self, alpha: T, other: &Poly<T>, beta: T) -> Poly<T> {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![T::zero(); len];
        for (k, &c) in self.coeffs.iter().enumerate() {
            coeffs[k] = coeffs[k] + alpha * c;
        }
        for (k, &c) in other.coeffs.iter().enumerate() {
            coeffs[k] = coeffs[k] + beta * c;
        }
        Poly { coeffs }
    }
}

/// Member selector for [`eval_A`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum AFunction {
    A1,
    A1Prime,
    A2,
    A2Prime,
    A3,
    A3Prime,
    A,
    APrime,
}

/// Participation frequencies with the derived `A` family.
#[derive(Clone, Debug, Serialize)]
pub struct BeliefFunctions<T> {
    p_check: Vec<T>,
    a_check: T,
    m_max: usize,
    #[serde(skip)]
    a1: Poly<T>,
    #[serde(skip)]
    a1_d1: Poly<T>,
    #[serde(skip)]
    a1_d2: Poly<T>,
    #[serde(skip)]
    a2: Poly<T>,
    #[serde(skip)]
    a2_d1: Poly<T>,
    #[serde(skip)]
    a3: Poly<T>,
    #[serde(skip)]
    a3_d1: Poly<T>,
}

impl<T: Real> BeliefFunctions<T> {
    /// Beliefs from explicit probabilities `(p_1, ..., p_M)`.
    ///
    /// The vector must sum to one within 1e-9; it is renormalized exactly
    /// so downstream identities hold at full precision.
    pub fn from_probabilities(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Domain("belief vector is empty".into()));
        }
        if p.iter().any(|&x| !x.is_finite() || x < T::zero()) {
            return Err(Error::Domain(
                "belief probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: T = p.iter().copied().sum();
        if (total - T::one()).abs() > T::from_f64_lossy(1e-9) {
            return Err(Error::Domain(format!(
                "belief probabilities must sum to 1, got {total}"
            )));
        }
        let p: Vec<T> = p.into_iter().map(|x| x / total).collect();
        if p.iter().skip(1).copied().sum::<T>() <= T::zero() {
            return Err(Error::DegenerateSample(
                "all probability mass on single-bidder auctions".into(),
            ));
        }
        Ok(Self::from_valid_probabilities(p))
    }

    /// The two-bidder special case `p_2 = 1`.
    pub fn two_bidder() -> Self {
        Self::from_valid_probabilities(vec![T::zero(), T::one()])
    }

    fn from_valid_probabilities(p: Vec<T>) -> Self {
        let m_max = p.len();
        let a1 = Poly::new(p.clone());
        let a1_d1 = a1.derivative();
        let a1_d2 = a1_d1.derivative();
        let a2 = a1.times_u();
        let a2_d1 = a2.derivative();
        let a3 = a1.times_one_minus_u();
        let a3_d1 = a3.derivative();
        let a_check = p
            .iter()
            .enumerate()
            .map(|(idx, &pm)| T::from_usize_exact(idx + 1) * pm)
            .sum::<T>()
            / T::from_usize_exact(m_max);
        Self {
            p_check: p,
            a_check,
            m_max,
            a1,
            a1_d1,
            a1_d2,
            a2,
            a2_d1,
            a3,
            a3_d1,
        }
    }

    /// Empirical frequencies `(p_1, ..., p_M)`; index `m-1` holds `p_m`.
    pub fn p_check(&self) -> &[T] {
        &self.p_check
    }

    /// Participation rate `a = (1/M) sum_m m p_m`.
    pub fn a_check(&self) -> T {
        self.a_check
    }

    /// Largest bidder count `M`.
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    fn check_unit_interval(u: T) -> Result<()> {
        if !(u >= T::zero() && u <= T::one()) {
            return Err(Error::Domain(format!(
                "belief functions are defined on [0, 1], got {u}"
            )));
        }
        Ok(())
    }

    /// Evaluates one member of the `A` family at `u` in `[0, 1]`.
    pub fn eval(&self, which: AFunction, u: T) -> Result<T> {
        Self::check_unit_interval(u)?;
        Ok(match which {
            AFunction::A1 => self.a1.eval(u),
            AFunction::A1Prime => self.a1_d1.eval(u),
            AFunction::A2 => self.a2.eval(u),
            AFunction::A2Prime => self.a2_d1.eval(u),
            AFunction::A3 => self.a3.eval(u),
            AFunction::A3Prime => self.a3_d1.eval(u),
            AFunction::A => return self.a(u),
            AFunction::APrime => return self.a_prime(u),
        })
    }

    /// `A(u) = A1(u) / A1'(u)`.
    pub fn a(&self, u: T) -> Result<T> {
        Self::check_unit_interval(u)?;
        let d = self.a1_d1.eval(u);
        if d <= T::zero() {
            return Err(Error::Singularity(format!("A1'({u}) = 0")));
        }
        Ok(self.a1.eval(u) / d)
    }

    /// `A'(u) = 1 - A1(u) A1''(u) / A1'(u)^2` by the quotient rule.
    pub fn a_prime(&self, u: T) -> Result<T> {
        Self::check_unit_interval(u)?;
        let d = self.a1_d1.eval(u);
        if d <= T::zero() {
            return Err(Error::Singularity(format!("A1'({u}) = 0")));
        }
        Ok(T::one() - self.a1.eval(u) * self.a1_d2.eval(u) / (d * d))
    }

    pub(crate) fn a1_poly(&self) -> &Poly<T> {
        &self.a1
    }

    pub(crate) fn a2_poly(&self) -> &Poly<T> {
        &self.a2
    }

    pub(crate) fn a3_poly(&self) -> &Poly<T> {
        &self.a3
    }
}

/// Empirical participation frequencies from auction counts.
pub fn estimate_beliefs<T: Real>(counts: &AuctionCounts) -> Result<BeliefFunctions<T>> {
    let m_max = counts.m_max() as usize;
    let l = counts.n_auctions();
    let mut tally = vec![0usize; m_max];
    for &m in counts.counts() {
        tally[m as usize - 1] += 1;
    }
    if tally.iter().skip(1).sum::<usize>() == 0 {
        return Err(Error::DegenerateSample(
            "every auction has a single bidder; beliefs are degenerate".into(),
        ));
    }
    let lf = T::from_usize_exact(l);
    let p = tally
        .into_iter()
        .map(|c| T::from_usize_exact(c) / lf)
        .collect();
    Ok(BeliefFunctions::from_valid_probabilities(p))
}

/// Evaluates one member of the `A` family; thin wrapper over
/// [`BeliefFunctions::eval`].
#[allow(non_snake_case)]
pub fn eval_A<T: Real>(beliefs: &BeliefFunctions<T>, which: AFunction, u: T) -> Result<T> {
    beliefs.eval(which, u)
}

/// Value-quantile estimates `v_hat = Q_hat + A q_hat` on the canonical grid.
#[derive(Clone, Debug, Serialize)]
pub struct ValueQuantileEstimate<T> {
    grid: Vec<T>,
    v_hat: Vec<T>,
    q_estimates: QuantileEstimates<T>,
    beliefs: BeliefFunctions<T>,
}

impl<T: Real> ValueQuantileEstimate<T> {
    /// Grid of quantile levels `{i/n}`.
    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    /// Estimated value quantiles on the grid.
    pub fn v_hat(&self) -> &[T] {
        &self.v_hat
    }

    /// The underlying quantile-density estimates.
    pub fn q_estimates(&self) -> &QuantileEstimates<T> {
        &self.q_estimates
    }

    /// The beliefs used.
    pub fn beliefs(&self) -> &BeliefFunctions<T> {
        &self.beliefs
    }

    /// Indices of grid points inside the trimmed interval.
    pub fn trimmed_indices(&self) -> Result<std::ops::Range<usize>> {
        self.q_estimates.trimmed_indices()
    }

    /// Overrides the extra trimming parameter on the inner estimates.
    pub fn set_trim(&mut self, tau: T) -> Result<()> {
        self.q_estimates.set_trim(tau)
    }
}

/// The value-quantile estimator on the canonical grid.
///
/// `Q_hat` at the grid level `i/n` is the order statistic `b_(i+1)`, taken
/// by index rather than through floating-point `floor(n u)` so that exact
/// grid levels never round down to the previous order statistic.
pub fn value_quantile<T: Real>(
    sample: &BidSample<T>,
    beliefs: &BeliefFunctions<T>,
    kernel: Kernel,
    bandwidth: Bandwidth<T>,
) -> Result<ValueQuantileEstimate<T>> {
    let spacings = sample.spacings();
    let q_estimates = crate::quantile::kernel_quantile_density(&spacings, kernel, bandwidth)?;
    let mut v_hat = Vec::with_capacity(q_estimates.grid().len());
    for (k, (&u, &q)) in q_estimates
        .grid()
        .iter()
        .zip(q_estimates.q_hat())
        .enumerate()
    {
        let q_check = sample.bids()[k + 1];
        v_hat.push(q_check + beliefs.a(u)? * q);
    }
    Ok(ValueQuantileEstimate {
        grid: q_estimates.grid().to_vec(),
        v_hat,
        q_estimates,
        beliefs: beliefs.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn beliefs_from(counts: &[u32]) -> BeliefFunctions<f64> {
        estimate_beliefs(&AuctionCounts::new(counts.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn two_bidder_beliefs_are_identity_like() {
        let b = beliefs_from(&[2, 2, 2]);
        assert_eq!(b.p_check(), &[0.0, 1.0]);
        assert_eq!(b.a_check(), 1.0);
        for &u in &[0.0, 0.3, 0.5, 1.0] {
            assert_abs_diff_eq!(b.eval(AFunction::A1, u).unwrap(), u, epsilon = 1e-15);
            assert_abs_diff_eq!(b.a(u).unwrap(), u, epsilon = 1e-15);
            assert_abs_diff_eq!(b.a_prime(u).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mixed_counts_match_hand_arithmetic() {
        let b = beliefs_from(&[2, 2, 3, 3]);
        assert_eq!(b.p_check(), &[0.0, 0.5, 0.5]);
        assert_abs_diff_eq!(b.a_check(), 5.0 / 6.0, epsilon = 1e-15);
        // A1(u) = 0.5 u + 0.5 u^2; A1'(1) = 1.5; A(1) = 1/1.5.
        assert_abs_diff_eq!(
            b.eval(AFunction::A1, 0.4).unwrap(),
            0.5 * 0.4 + 0.5 * 0.16,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(b.a(1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_counts_are_rejected() {
        assert!(matches!(
            estimate_beliefs::<f64>(&AuctionCounts::new(vec![1, 1, 1]).unwrap()),
            Err(Error::DegenerateSample(_))
        ));
        assert!(AuctionCounts::new(vec![]).is_err());
        assert!(AuctionCounts::new(vec![2, 0]).is_err());
    }

    #[test]
    fn counts_accessors() {
        let c = AuctionCounts::new(vec![2, 3, 5, 2]).unwrap();
        assert_eq!(c.n_auctions(), 4);
        assert_eq!(c.total_bids(), 12);
        assert_eq!(c.m_max(), 5);
    }

    #[test]
    fn family_identities_hold() {
        for counts in [vec![2u32; 5], vec![2, 2, 3, 3], vec![1, 2, 3, 4, 5, 5, 2]] {
            let b = beliefs_from(&counts);
            assert_abs_diff_eq!(b.eval(AFunction::A1, 1.0).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.eval(AFunction::A2, 1.0).unwrap(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(b.eval(AFunction::A3, 1.0).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(
                b.eval(AFunction::A3, 0.0).unwrap(),
                b.p_check()[0],
                epsilon = 1e-12
            );
            let total: f64 = b.p_check().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn a2_prime_matches_product_rule_expansion() {
        let b = beliefs_from(&[2, 3, 3, 4, 6]);
        let mut rng = rng::stream(2, &[0]);
        for _ in 0..20 {
            let u: f64 = rng.random();
            let lhs = b.eval(AFunction::A2Prime, u).unwrap();
            let rhs = b.eval(AFunction::A1, u).unwrap()
                + u * b.eval(AFunction::A1Prime, u).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let b = beliefs_from(&[2, 2, 3, 4, 4, 5, 6, 6]);
        let pairs = [
            (AFunction::A1, AFunction::A1Prime),
            (AFunction::A2, AFunction::A2Prime),
            (AFunction::A3, AFunction::A3Prime),
            (AFunction::A, AFunction::APrime),
        ];
        let mut rng = rng::stream(7, &[1]);
        for _ in 0..50 {
            let u: f64 = 0.05 + 0.9 * rng.random::<f64>();
            let step = 1e-5;
            for (value, deriv) in pairs {
                let fd = (b.eval(value, u + step).unwrap() - b.eval(value, u - step).unwrap())
                    / (2.0 * step);
                let exact = b.eval(deriv, u).unwrap();
                assert_abs_diff_eq!(exact, fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn singularity_only_at_zero_without_two_bidder_mass() {
        // p_1 = p_3 = 0.5: A1'(0) = 0 but A1'(u) > 0 for u > 0.
        let b = BeliefFunctions::from_probabilities(vec![0.5, 0.0, 0.5]).unwrap();
        assert!(matches!(b.a(0.0), Err(Error::Singularity(_))));
        assert!(b.a(0.01).is_ok());
        assert!(b.a_prime(0.5).is_ok());
    }

    #[test]
    fn probability_vector_validation() {
        assert!(BeliefFunctions::<f64>::from_probabilities(vec![]).is_err());
        assert!(BeliefFunctions::from_probabilities(vec![0.5, 0.4]).is_err());
        assert!(BeliefFunctions::from_probabilities(vec![-0.1, 1.1]).is_err());
        assert!(matches!(
            BeliefFunctions::from_probabilities(vec![1.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(BeliefFunctions::from_probabilities(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn eval_rejects_levels_outside_unit_interval() {
        let b = BeliefFunctions::<f64>::two_bidder();
        assert!(b.eval(AFunction::A1, -0.2).is_err());
        assert!(b.eval(AFunction::A, 1.4).is_err());
    }

    #[test]
    fn value_quantile_composes_components() {
        let sample = BidSample::new(vec![0.2, 0.4, 0.9]).unwrap();
        let beliefs = BeliefFunctions::two_bidder();
        let bw = Bandwidth::manual(0.3).unwrap();
        let est = value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        // Grid is {1/3, 2/3}; at u = 2/3 the order statistic is b_(3) = 0.9.
        let q = est.q_estimates().q_hat()[1];
        assert_abs_diff_eq!(est.v_hat()[1], 0.9 + (2.0 / 3.0) * q, epsilon = 1e-15);
    }

    #[test]
    fn value_quantile_dominates_bid_quantile() {
        let bids = rng::sorted_uniforms(500, &mut rng::stream(3, &[9]));
        let sample = BidSample::from_sorted(bids).unwrap();
        let beliefs = beliefs_from(&[2, 3, 2, 4, 3]);
        let bw = crate::quantile::rule_of_thumb_bandwidth(&sample).unwrap();
        let est = value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        for (k, &v) in est.v_hat().iter().enumerate() {
            assert!(v >= sample.bids()[k + 1] - 1e-12);
        }
    }

    #[test]
    fn zero_spacings_collapse_to_bid_quantile() {
        let sample = BidSample::new(vec![2.0; 50]).unwrap();
        let beliefs = BeliefFunctions::two_bidder();
        let bw = Bandwidth::manual(0.1).unwrap();
        let est = value_quantile(&sample, &beliefs, Kernel::Epanechnikov, bw).unwrap();
        for &v in est.v_hat() {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }
    }
}
