//! Sum-rate curves against direct evaluations on the two-dimensional real
//! model, and the closed-form slopes against the curves.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::{prop_assert, proptest, ProptestConfig};
use rand::Rng;
use wbslope_core::alignment::{rsum_one_dim, slope_one_dim, PhaseVector};
use wbslope_core::channel::{sample_random, Channel};
use wbslope_core::rng::stream;
use wbslope_core::slope::{
    rsum_tdma, rsum_tin, slope_from_rate_curve, slope_no_interference, slope_tdma, slope_tin, RateCurve,
};

fn random_channel(k: usize, rng: &mut impl Rng) -> Channel {
    let gain = (0..k * k)
        .map(|n| if n % (k + 1) == 0 { rng.random_range(0.5..2.0) } else { rng.random_range(0.0..1.0) })
        .collect();
    let phase = (0..k * k)
        .map(|n| if n % (k + 1) == 0 { 0.0 } else { rng.random_range(-PI..PI) })
        .collect();
    Channel::new(k, gain, phase).unwrap()
}

/// Rate of real signaling along `e^{i theta_i}`: receiver `j` sees the real
/// vectors `|C_ji| (cos, sin)(theta_i + phi_ji)` with per-user variance
/// `P/K` in noise of covariance `I/2`.
fn one_dim_oracle(ch: &Channel, theta: &[f64], p_sum: f64) -> f64 {
    let k = ch.k();
    let p = p_sum / k as f64;
    (0..k)
        .map(|j| {
            let mut noise = Matrix2::identity() * 0.5;
            let mut total = Matrix2::identity() * 0.5;
            for i in 0..k {
                let ang = theta[i] + ch.phase(j, i);
                let h = Vector2::new(ang.cos(), ang.sin()) * ch.gain_sq(j, i).sqrt();
                let cov = h * h.transpose() * p;
                total += cov;
                if i != j {
                    noise += cov;
                }
            }
            0.5 * (total.determinant() / noise.determinant()).log2()
        })
        .sum()
}

#[test]
fn one_dim_rate_matches_direct_evaluation() {
    let mut rng = stream(41);
    for _ in 0..50 {
        let k = rng.random_range(2..=7);
        let ch = random_channel(k, &mut rng);
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-PI..PI)).collect();
        for p in [0.01, 0.5, 3.0, 40.0] {
            let got = rsum_one_dim(&ch, &PhaseVector(theta.clone()), p).unwrap();
            let want = one_dim_oracle(&ch, &theta, p);
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "p={p}: {got} vs {want}");
        }
    }
}

#[test]
fn tin_and_tdma_rates_match_scalar_formulas() {
    let mut rng = stream(42);
    for _ in 0..50 {
        let k = rng.random_range(2..=7);
        let ch = random_channel(k, &mut rng);
        let p = rng.random_range(0.0..10.0) / k as f64;
        let tin: f64 = (0..k)
            .map(|j| {
                let interference: f64 = (0..k).filter(|&i| i != j).map(|i| ch.gain_sq(j, i) * p).sum();
                (1.0 + ch.gain_sq(j, j) * p / (1.0 + interference)).log2()
            })
            .sum();
        let tdma: f64 = (0..k).map(|j| (1.0 + ch.gain_sq(j, j) * p * k as f64).log2() / k as f64).sum();
        let p_sum = p * k as f64;
        assert!((rsum_tin(&ch, p_sum) - tin).abs() <= 1e-12 * tin.max(1.0));
        assert!((rsum_tdma(&ch, p_sum) - tdma).abs() <= 1e-12 * tdma.max(1.0));
    }
}

#[test]
fn finite_difference_slopes_match_closed_forms() {
    let mut rng = stream(43);
    for _ in 0..30 {
        let k = rng.random_range(2..=6);
        let ch = random_channel(k, &mut rng);
        let theta = PhaseVector((0..k).map(|_| rng.random_range(-PI..PI)).collect());
        let one_dim = RateCurve::new("inta", |p| rsum_one_dim(&ch, &theta, p).unwrap());
        for (curve, closed) in [
            (RateCurve::tin(&ch), slope_tin(&ch)),
            (RateCurve::tdma(&ch), slope_tdma(&ch)),
            (one_dim, slope_one_dim(&ch, &theta).unwrap()),
        ] {
            let point = slope_from_rate_curve(&curve, 1e-4).unwrap();
            assert!((point.s0 - closed).abs() <= 1e-3 * closed, "{}: {} vs {closed}", curve.label, point.s0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn baseline_slopes_are_ordered(seed in 0u64..u64::MAX, k in 2usize..9, a in 0.0f64..1.0) {
        let ch = sample_random(k, a, seed).unwrap();
        let free = slope_no_interference(&ch);
        prop_assert!(slope_tin(&ch) <= free * (1.0 + 1e-12));
        prop_assert!((slope_tdma(&ch) * k as f64 - free).abs() <= 1e-12 * free);
    }

    #[test]
    fn one_dim_slope_stays_in_range(seed in 0u64..u64::MAX, k in 2usize..7, a in 0.0f64..1.0, shift in -PI..PI) {
        // Real signaling gets at most half the interference-free slope, and
        // the worst phases cost at most the full cross term once more.
        let ch = sample_random(k, a, seed).unwrap();
        let theta = PhaseVector((0..k).map(|m| shift * m as f64).collect());
        let s = slope_one_dim(&ch, &theta).unwrap();
        let free = slope_no_interference(&ch);
        prop_assert!(s <= free / 2.0 * (1.0 + 1e-12));
        let kf = k as f64;
        prop_assert!(s >= kf * kf / (kf + 2.0 * kf * (kf - 1.0) * a) * (1.0 - 1e-12));
    }
}
