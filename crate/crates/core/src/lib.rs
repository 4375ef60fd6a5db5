//! Quantile-based estimation and inference for first-price sealed-bid auctions.
//!
//! The library recovers the bidders' value quantile function from observed
//! bids via the identity `v(u) = Q(u) + A(u) q(u)`, where `Q` is the bid
//! quantile function, `q = Q'` its density, and `A` encodes participation
//! beliefs. The quantile density is estimated from bid spacings by kernel
//! smoothing on the grid `{i/n}`, which turns the estimator into a discrete
//! convolution. On top of the point estimators sit:
//!
//! - counterfactual functionals of the value quantile function (expected
//!   revenue, bidder and total surplus, optimal bids) at a counterfactual
//!   reserve price, in both tuning-free (`S`-type) and kernel-based
//!   (`T`-type) flavors;
//! - simulation-based pointwise intervals and uniform confidence bands built
//!   from pivotal processes that can be drawn from uniform pseudo-bids;
//! - a one-sided test for the existence of a revenue-improving reserve price;
//! - a Monte Carlo coverage engine and a CSV residualization pipeline for
//!   real auction data.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); the aliases below fix `f64` for the
//! common case.

pub mod beliefs;
pub mod counterfactual;
pub mod error;
pub mod inference;
pub mod kernel;
pub mod pipeline;
pub mod quantile;
pub mod rng;
pub mod scalar;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
pub use kernel::Kernel;
pub use scalar::Real;

/// Sorted bid sample over `f64`.
pub type BidSample = quantile::BidSample<f64>;
/// Bid spacings over `f64`.
pub type Spacings = quantile::Spacings<f64>;
/// Bandwidth over `f64`.
pub type Bandwidth = quantile::Bandwidth<f64>;
/// Grid-aligned quantile density estimates over `f64`.
pub type QuantileEstimates = quantile::QuantileEstimates<f64>;
/// Participation beliefs over `f64`.
pub type BeliefFunctions = beliefs::BeliefFunctions<f64>;
/// Value quantile estimates over `f64`.
pub type ValueQuantileEstimate = beliefs::ValueQuantileEstimate<f64>;
/// Counterfactual specification over `f64`.
pub type CounterfactualSpec = counterfactual::CounterfactualSpec<f64>;
/// Counterfactual curve over `f64`.
pub type CounterfactualCurve = counterfactual::CounterfactualCurve<f64>;
/// Confidence band over `f64`.
pub type ConfidenceBand = inference::ConfidenceBand<f64>;
/// Pointwise confidence interval over `f64`.
pub type PointwiseInterval = inference::PointwiseInterval<f64>;
/// Reserve-price test result over `f64`.
pub type TestResult = inference::TestResult<f64>;
/// Simulation DGP over `f64`.
pub type Dgp = simulation::Dgp<f64>;
/// Coverage report over `f64`.
pub type CoverageReport = simulation::CoverageReport<f64>;
/// Residualization output over `f64`.
pub type Residualized = pipeline::Residualized<f64>;
/// Homogenized-bid subsample over `f64`.
pub type ResidualSample = pipeline::ResidualSample<f64>;
