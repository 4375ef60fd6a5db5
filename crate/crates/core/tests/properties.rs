//! Randomized invariants spanning the estimator stack: dual-path
//! agreement, linearity and monotonicity properties, and probability
//! identities of the belief machinery.

use auctionfolio_core::beliefs::AFunction;
use auctionfolio_core::counterfactual::{
    estimate_s_curve, make_spec, participation_probability, CounterfactualKind,
};
use auctionfolio_core::inference::simulated_quantile;
use auctionfolio_core::quantile::rule_of_thumb_bandwidth;
use auctionfolio_core::quantile::{kernel_quantile_density, kernel_quantile_density_direct};
use auctionfolio_core::{Bandwidth, BeliefFunctions, BidSample, Kernel};
use proptest::prelude::*;

fn bids_strategy(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..100.0, 2..max_n)
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![Just(Kernel::Epanechnikov), Just(Kernel::Triweight)]
}

fn kind_strategy() -> impl Strategy<Value = CounterfactualKind> {
    prop_oneof![
        Just(CounterfactualKind::BidderSurplus),
        Just(CounterfactualKind::Revenue),
        Just(CounterfactualKind::TotalSurplus),
    ]
}

/// Belief vectors with strictly positive mass above m = 1, normalized.
fn beliefs_strategy() -> impl Strategy<Value = BeliefFunctions> {
    (
        proptest::collection::vec(0.0f64..1.0, 1..7),
        0.05f64..1.0,
    )
        .prop_map(|(mut raw, tail)| {
            raw.push(tail);
            let total: f64 = raw.iter().sum();
            BeliefFunctions::from_probabilities(raw.into_iter().map(|p| p / total).collect())
                .expect("normalized vector with mass above m = 1")
        })
}

proptest! {
    #[test]
    fn fft_and_direct_paths_agree(
        bids in bids_strategy(200),
        h in 0.01f64..0.45,
        kernel in kernel_strategy(),
    ) {
        let sample = BidSample::new(bids).unwrap();
        let spacings = sample.spacings();
        let bw = Bandwidth::manual(h).unwrap();
        let fft = kernel_quantile_density(&spacings, kernel, bw).unwrap();
        let direct = kernel_quantile_density_direct(&spacings, kernel, bw).unwrap();
        prop_assert!(fft.used_fft());
        prop_assert!(!direct.used_fft());
        let scale = sample.range().max(1.0);
        for (g, (a, b)) in fft.q_hat().iter().zip(direct.q_hat()).enumerate() {
            prop_assert!(
                (a - b).abs() <= 1e-10 * scale,
                "grid point {g}: fft {a} vs direct {b}"
            );
        }
    }

    #[test]
    fn q_hat_is_linear_in_the_bid_scale(
        bids in bids_strategy(150),
        c in 0.1f64..20.0,
        shift in 0.0f64..50.0,
        h in 0.02f64..0.4,
    ) {
        let bw = Bandwidth::manual(h).unwrap();
        let base = BidSample::new(bids.clone()).unwrap();
        let scaled = BidSample::new(bids.iter().map(|b| b * c).collect()).unwrap();
        let shifted = BidSample::new(bids.iter().map(|b| b + shift).collect()).unwrap();
        let q = kernel_quantile_density(&base.spacings(), Kernel::Epanechnikov, bw).unwrap();
        let qc = kernel_quantile_density(&scaled.spacings(), Kernel::Epanechnikov, bw).unwrap();
        let qs = kernel_quantile_density(&shifted.spacings(), Kernel::Epanechnikov, bw).unwrap();
        let scale = base.range().max(1.0);
        for g in 0..q.q_hat().len() {
            prop_assert!(
                (qc.q_hat()[g] - c * q.q_hat()[g]).abs() <= 1e-9 * c * scale,
                "scaling broke linearity at {g}"
            );
            prop_assert!(
                (qs.q_hat()[g] - q.q_hat()[g]).abs() <= 1e-9 * (scale + shift),
                "translation leaked into the spacings at {g}"
            );
        }
    }

    #[test]
    fn empirical_quantile_is_monotone(
        bids in bids_strategy(300),
        u1 in 0.0f64..=1.0,
        u2 in 0.0f64..=1.0,
    ) {
        let sample = BidSample::new(bids).unwrap();
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(
            sample.empirical_quantile(lo).unwrap() <= sample.empirical_quantile(hi).unwrap()
        );
    }

    #[test]
    fn participation_probabilities_sum_to_one(
        beliefs in beliefs_strategy(),
        u in 0.0f64..=1.0,
    ) {
        let total: f64 = (0..=beliefs.m_max())
            .map(|m| participation_probability(&beliefs, m, u).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-12, "masses sum to {total}");
        for m in 0..=beliefs.m_max() {
            prop_assert!(participation_probability(&beliefs, m, u).unwrap() >= 0.0);
        }
    }

    #[test]
    fn a_family_identities_hold(
        beliefs in beliefs_strategy(),
        u in 0.02f64..0.98,
    ) {
        let a1 = beliefs.eval(AFunction::A1, u).unwrap();
        let a1_prime = beliefs.eval(AFunction::A1Prime, u).unwrap();
        let a = beliefs.a(u).unwrap();
        prop_assert!(a1 > 0.0 || u == 0.0);
        prop_assert!(a1_prime > 0.0);
        prop_assert!(
            (a - a1 / a1_prime).abs() <= 1e-12 * (1.0 + a.abs()),
            "A != A1/A1' at {u}"
        );
        let eps = 1e-6;
        let fd = (beliefs.a(u + eps).unwrap() - beliefs.a(u - eps).unwrap()) / (2.0 * eps);
        let a_prime = beliefs.a_prime(u).unwrap();
        prop_assert!(
            (fd - a_prime).abs() <= 1e-4 * (1.0 + a_prime.abs()),
            "A' {a_prime} vs central difference {fd} at {u}"
        );
    }

    #[test]
    fn s_curve_is_linear_in_the_bids(
        bids in bids_strategy(120),
        c in 0.1f64..10.0,
        kind in kind_strategy(),
    ) {
        let beliefs = BeliefFunctions::two_bidder();
        let spec = make_spec(kind, &beliefs).unwrap();
        let base = BidSample::new(bids.clone()).unwrap();
        let scaled = BidSample::new(bids.iter().map(|b| b * c).collect()).unwrap();
        let s = estimate_s_curve(&base, &spec).unwrap();
        let sc = estimate_s_curve(&scaled, &spec).unwrap();
        for g in 0..s.values().len() {
            let want = c * s.values()[g];
            prop_assert!(
                (sc.values()[g] - want).abs() <= 1e-10 * (1.0 + want.abs()),
                "S-curve not homogeneous at {g}"
            );
        }
    }

    #[test]
    fn simulated_quantile_is_the_ceiling_order_statistic(
        draws in proptest::collection::vec(-100.0f64..100.0, 2..400),
        p1 in 0.001f64..0.999,
        p2 in 0.001f64..0.999,
    ) {
        let b = draws.len() as f64;
        prop_assume!(b * (1.0 - p1.max(p2)) >= 1.0);
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q1 = simulated_quantile(&draws, p1).unwrap();
        let idx = (b * p1).ceil() as usize;
        prop_assert_eq!(q1, sorted[idx - 1]);
        let q2 = simulated_quantile(&draws, p2).unwrap();
        if p1 <= p2 {
            prop_assert!(q1 <= q2);
        } else {
            prop_assert!(q2 <= q1);
        }
    }

    #[test]
    fn kernels_are_symmetric_nonnegative_and_supported_on_the_unit_interval(
        z in -2.0f64..2.0,
        kernel in kernel_strategy(),
    ) {
        let k = kernel.evaluate(z);
        prop_assert!(k >= 0.0);
        prop_assert_eq!(k, kernel.evaluate(-z));
        if z.abs() > 1.0 {
            prop_assert_eq!(k, 0.0);
        }
    }

    #[test]
    fn rule_of_thumb_bandwidth_respects_its_clamp(
        bids in bids_strategy(400),
    ) {
        let sample = BidSample::new(bids).unwrap();
        prop_assume!(sample.range() > 0.0);
        let h = rule_of_thumb_bandwidth(&sample).unwrap().value();
        let n = sample.n() as f64;
        // The upper clamp wins when 1/n itself exceeds 0.49 (n = 2).
        prop_assert!(h >= (1.0 / n).min(0.49) - 1e-15);
        prop_assert!(h <= 0.49);
    }

    #[test]
    fn estimated_values_dominate_the_bids(
        bids in bids_strategy(150),
        h in 0.02f64..0.4,
    ) {
        // v_hat = Q_hat + A q_hat with A, q_hat >= 0: values never fall
        // below the bids that generated them (bid shading).
        let sample = BidSample::new(bids).unwrap();
        let beliefs = BeliefFunctions::two_bidder();
        let bw = Bandwidth::manual(h).unwrap();
        let v = auctionfolio_core::beliefs::value_quantile(
            &sample,
            &beliefs,
            Kernel::Epanechnikov,
            bw,
        )
        .unwrap();
        for (k, &v_k) in v.v_hat().iter().enumerate() {
            prop_assert!(v_k >= sample.bids()[k + 1]);
        }
    }
}
