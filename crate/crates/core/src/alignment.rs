//! One-dimensional Gaussian signaling with interference alignment.
//!
//! Transmitter `j` sends real Gaussian symbols along the fixed complex
//! direction `e^{i theta_j}`; receivers treat interference as noise. The sum
//! slope depends on the phases only through the alignment cost
//!
//! ```text
//! f(theta) = sum_j sum_{i != j} |C_jj|^2 |C_ji|^2 cos 2(phi_ji - theta_j + theta_i)
//! ```
//!
//! which is minimized here by multi-start safeguarded Newton descent.

use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn zeros(k: usize) -> Self {
        PhaseVector(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Every entry wrapped to `[-pi, pi)`.
    pub fn wrapped(&self) -> PhaseVector {
        PhaseVector(self.0.iter().map(|&t| wrap_angle(t)).collect())
    }
}

pub fn wrap_angle(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

fn check_len(ch: &Channel, theta: &PhaseVector) -> Result<()> {
    if theta.len() != ch.k() {
        return Err(Error::DimensionMismatch { expected: ch.k(), got: theta.len() });
    }
    Ok(())
}

/// `M = sum_j sum_{i != j} |C_jj|^2 |C_ji|^2`, the largest possible `|f|`.
pub fn cross_weight(ch: &Channel) -> f64 {
    let k = ch.k();
    (0..k)
        .flat_map(|j| (0..k).filter(move |&i| i != j).map(move |i| (j, i)))
        .map(|(j, i)| ch.gain_sq(j, j) * ch.gain_sq(j, i))
        .sum()
}

pub fn phase_cost(ch: &Channel, theta: &PhaseVector) -> Result<f64> {
    check_len(ch, theta)?;
    Ok(cost_and_gradient(ch, theta.as_slice(), None))
}

pub fn phase_cost_gradient(ch: &Channel, theta: &PhaseVector) -> Result<Vec<f64>> {
    check_len(ch, theta)?;
    let mut grad = vec![0.0; ch.k()];
    cost_and_gradient(ch, theta.as_slice(), Some(&mut grad));
    Ok(grad)
}

/// Cost, and optionally its gradient, in one pass over the link pairs.
fn cost_and_gradient(ch: &Channel, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
    let k = ch.k();
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|x| *x = 0.0);
    }
    let mut cost = 0.0;
    for j in 0..k {
        let djj = ch.gain_sq(j, j);
        for i in 0..k {
            if i == j {
                continue;
            }
            let w = djj * ch.gain_sq(j, i);
            if w == 0.0 {
                continue;
            }
            let arg = 2.0 * (ch.phase(j, i) - theta[j] + theta[i]);
            let (s, c) = arg.sin_cos();
            cost += w * c;
            if let Some(g) = grad.as_deref_mut() {
                g[j] += 2.0 * w * s;
                g[i] -= 2.0 * w * s;
            }
        }
    }
    cost
}

/// Sum slope of one-dimensional signaling at phases `theta`:
/// `(sum |C_jj|^2)^2 / (sum |C_jj|^4 + M + f(theta))`.
pub fn slope_one_dim(ch: &Channel, theta: &PhaseVector) -> Result<f64> {
    let f = phase_cost(ch, theta)?;
    slope_from_cost(ch, f)
}

pub(crate) fn slope_from_cost(ch: &Channel, f: f64) -> Result<f64> {
    let (s1, s2) = ch.direct_gains().fold((0.0, 0.0), |(a, b), g| (a + g, b + g * g));
    let denom = s2 + cross_weight(ch) + f;
    if denom <= 0.0 {
        return Err(Error::Degenerate(denom));
    }
    Ok(s1 * s1 / denom)
}

/// Normalized rank-one input covariance along `theta`.
pub fn direction_covariance(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c * c, s * c, s * c, s * s)
}

/// `ln det(I + x M)` for a 2x2 `M`, accurate for small `x`.
fn ln_det_i_plus(x: f64, m: &Matrix2<f64>) -> f64 {
    (x * m.trace() + x * x * m.determinant()).ln_1p()
}

/// Sum rate in bits of one-dimensional signaling, treating interference as
/// noise, on the two-dimensional real model with noise covariance `I/2`.
pub fn rsum_one_dim(ch: &Channel, theta: &PhaseVector, p_sum: f64) -> Result<f64> {
    check_len(ch, theta)?;
    let k = ch.k();
    let x = 2.0 * p_sum / k as f64;
    let received: Vec<Vec<Matrix2<f64>>> = (0..k)
        .map(|j| {
            (0..k)
                .map(|i| direction_covariance(theta.0[i] + ch.phase(j, i)) * ch.gain_sq(j, i))
                .collect()
        })
        .collect();
    let total: f64 = (0..k)
        .map(|j| {
            let interference: Matrix2<f64> =
                (0..k).filter(|&i| i != j).map(|i| received[j][i]).sum();
            let signal_plus = interference + received[j][j];
            0.5 * (ln_det_i_plus(x, &signal_plus) - ln_det_i_plus(x, &interference))
        })
        .sum();
    Ok(total / LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Gradient-norm stopping tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { restarts: 32, seed: 0, tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    pub theta_star: PhaseVector,
    pub cost_star: f64,
    pub slope: f64,
    pub grad_norm: f64,
    pub restarts_used: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct LocalRun {
    theta: Vec<f64>,
    cost: f64,
    grad_norm: f64,
    converged: bool,
}

/// Hessian of the alignment cost restricted to `theta[1..]`.
fn reduced_hessian(ch: &Channel, theta: &[f64]) -> DMatrix<f64> {
    let k = theta.len();
    let mut h = DMatrix::zeros(k, k);
    for j in 0..k {
        let djj = ch.gain_sq(j, j);
        for i in (0..k).filter(|&i| i != j) {
            let w = djj * ch.gain_sq(j, i);
            if w == 0.0 {
                continue;
            }
            let c = 4.0 * w * (2.0 * (ch.phase(j, i) - theta[j] + theta[i])).cos();
            h[(j, j)] -= c;
            h[(i, i)] -= c;
            h[(j, i)] += c;
            h[(i, j)] += c;
        }
    }
    h.remove_row(0).remove_column(0)
}

/// Newton direction on `theta[1..]` with every Hessian eigenvalue replaced
/// by its absolute value, floored at `floor`, so that negative curvature is
/// followed downhill instead of toward the saddle.
fn newton_direction(ch: &Channel, theta: &[f64], grad: &[f64], floor: f64) -> Option<Vec<f64>> {
    let g = DVector::from_column_slice(&grad[1..]);
    let eig = reduced_hessian(ch, theta).symmetric_eigen();
    let coeffs = eig.eigenvectors.tr_mul(&g);
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| -c / l.abs().max(floor)),
    );
    let d = &eig.eigenvectors * scaled;
    (d.dot(&g) < 0.0 && d.iter().all(|x| x.is_finite())).then(|| d.iter().copied().collect())
}

/// Descent over `theta[1..]` with `theta[0]` pinned. Each iteration tries
/// the curvature-corrected Newton step and falls back to a Barzilai-Borwein
/// scaled gradient step; either is accepted by Armijo backtracking
/// (sufficient decrease `1e-4`, halving).
fn descend(ch: &Channel, mut theta: Vec<f64>, tol: f64, max_iter: usize) -> LocalRun {
    const ARMIJO: f64 = 1e-4;
    let k = theta.len();
    let mut grad = vec![0.0; k];
    let mut cost = cost_and_gradient(ch, &theta, Some(&mut grad));
    let scale = cross_weight(ch).max(f64::MIN_POSITIVE);
    let mut bb_step = 1.0 / (8.0 * scale);
    let noise = 64.0 * f64::EPSILON * scale;
    let mut trial = vec![0.0; k];
    let mut trial_grad = vec![0.0; k];

    for _ in 0..max_iter {
        let grad_norm = norm(&grad);
        if grad_norm <= tol {
            return LocalRun { theta, cost, grad_norm, converged: true };
        }
        let (dir, mut t) = match newton_direction(ch, &theta, &grad, 1e-6 * scale) {
            Some(d) => (d, 1.0),
            None => (grad[1..].iter().map(|g| -g).collect::<Vec<_>>(), bb_step),
        };
        let decrease: f64 = -dir.iter().zip(&grad[1..]).map(|(d, g)| d * g).sum::<f64>();
        let mut accepted = false;
        while t * norm(&dir) > 1e-16 {
            trial[0] = theta[0];
            for m in 1..k {
                trial[m] = theta[m] + t * dir[m - 1];
            }
            let trial_cost = cost_and_gradient(ch, &trial, Some(&mut trial_grad));
            // Near a minimizer the expected decrease drops below the rounding
            // noise of the cost; there, a step that shrinks the gradient
            // without measurably raising the cost is accepted instead.
            let armijo = trial_cost <= cost - ARMIJO * t * decrease;
            let flat = trial_cost <= cost + noise && norm(&trial_grad) < grad_norm;
            if armijo || flat {
                let (mut ss, mut sy) = (0.0, 0.0);
                for m in 1..k {
                    let s = trial[m] - theta[m];
                    ss += s * s;
                    sy += s * (trial_grad[m] - grad[m]);
                }
                std::mem::swap(&mut theta, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                cost = trial_cost;
                bb_step = if sy > 0.0 { (ss / sy).min(1e3 / scale) } else { 2.0 * bb_step };
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = norm(&grad);
    LocalRun { theta, cost, grad_norm, converged: grad_norm <= tol }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Starting point `r`: all zeros for `r = 0`, otherwise `theta_1 = 0` and the
/// rest uniform on `[-pi, pi)` from a stream derived from `(seed, r)`.
pub fn starting_point(k: usize, seed: u64, r: usize) -> Vec<f64> {
    let mut theta = vec![0.0; k];
    if r > 0 {
        let mut rng = rng::stream(rng::derive_seed(seed, &[r as u64]));
        for t in theta.iter_mut().skip(1) {
            *t = rng.random_range(-PI..PI);
        }
    }
    theta
}

/// Multi-start minimization of the alignment cost.
///
/// Returns the lowest-cost stationary point among starts that reached the
/// gradient tolerance; if none did, the lowest-cost iterate overall with
/// `converged = false`. Equal costs (within `1e-12` of `M`) resolve to the
/// lexicographically smallest wrapped phase vector.
pub fn optimize_phases(ch: &Channel, opts: &AlignOptions) -> Result<AlignmentResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {} must be positive", opts.tol)));
    }
    let k = ch.k();
    let tie = 1e-12 * cross_weight(ch).max(1.0);
    let mut best: Option<LocalRun> = None;
    for r in 0..opts.restarts {
        let mut run = descend(ch, starting_point(k, opts.seed, r), opts.tol, opts.max_iter);
        run.theta = PhaseVector(run.theta).wrapped().0;
        let better = match &best {
            None => true,
            Some(b) if run.converged != b.converged => run.converged,
            Some(b) if (run.cost - b.cost).abs() <= tie => {
                lexicographic(&run.theta, &b.theta) == Ordering::Less
            }
            Some(b) => run.cost < b.cost,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    // Wrapping by multiples of 2*pi leaves the cost unchanged up to rounding;
    // recompute so cost, slope and theta agree exactly.
    let theta_star = PhaseVector(best.theta);
    let cost_star = phase_cost(ch, &theta_star)?;
    Ok(AlignmentResult {
        slope: slope_from_cost(ch, cost_star)?,
        theta_star,
        cost_star,
        grad_norm: best.grad_norm,
        restarts_used: opts.restarts,
        converged: best.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_symmetric, sample_random};
    use crate::slope::slope_no_interference;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::{any, prop_assert, proptest};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn cost_hand_examples() {
        let ch = make_symmetric(2, 0.25, None).unwrap();
        assert_abs_diff_eq!(phase_cost(&ch, &PhaseVector::zeros(2)).unwrap(), 0.5, epsilon = 1e-15);
        let aligned = PhaseVector(vec![0.0, FRAC_PI_2]);
        assert_abs_diff_eq!(phase_cost(&ch, &aligned).unwrap(), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn cost_rejects_wrong_length() {
        let ch = make_symmetric(3, 0.25, None).unwrap();
        assert!(matches!(
            phase_cost(&ch, &PhaseVector::zeros(2)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(phase_cost_gradient(&ch, &PhaseVector::zeros(4)).is_err());
        assert!(slope_one_dim(&ch, &PhaseVector::zeros(1)).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        for t in [-7.0, -PI, 0.0, PI, 3.0 * PI, 100.0] {
            let w = wrap_angle(t);
            assert!((-PI..PI).contains(&w), "{t} -> {w}");
            assert_abs_diff_eq!((t - w).rem_euclid(2.0 * PI).min(2.0 * PI - (t - w).rem_euclid(2.0 * PI)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn slope_at_perfect_alignment_k2() {
        for a in [0.1, 0.5, 0.9] {
            let ch = make_symmetric(2, a, None).unwrap();
            let s = slope_one_dim(&ch, &PhaseVector(vec![0.0, FRAC_PI_2])).unwrap();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn slope_extremes_ten_users() {
        let ch = make_symmetric(10, 0.1, None).unwrap();
        let m = cross_weight(&ch);
        assert_relative_eq!(m, 9.0, max_relative = 1e-14);
        assert_relative_eq!(slope_from_cost(&ch, m).unwrap(), 100.0 / 28.0, max_relative = 1e-14);
        assert_relative_eq!(slope_from_cost(&ch, -m).unwrap(), 10.0, max_relative = 1e-14);
        assert_relative_eq!(slope_from_cost(&ch, -m).unwrap(), slope_no_interference(&ch) / 2.0, max_relative = 1e-14);
        assert!(matches!(slope_from_cost(&ch, -100.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rate_at_zero_power_and_interference_free() {
        let ch = sample_random(4, 0.4, 9).unwrap();
        let theta = PhaseVector(vec![0.1, -0.3, 2.0, 1.0]);
        assert_eq!(rsum_one_dim(&ch, &theta, 0.0).unwrap(), 0.0);
        let free = make_symmetric(3, 0.0, None).unwrap();
        let p = 0.7;
        let parallel = 3.0 * 0.5 * (1.0 + 2.0 * p / 3.0f64).log2();
        assert_relative_eq!(rsum_one_dim(&free, &PhaseVector(vec![0.3, 1.0, -2.0]), p).unwrap(), parallel, max_relative = 1e-14);
    }

    #[test]
    fn grid_minimum_k2_is_stationary() {
        let ch = sample_random(2, 0.6, 21).unwrap();
        let n = 100_000;
        let (mut best_t, mut best_f) = (0.0, f64::INFINITY);
        for s in 0..n {
            let t = -PI + 2.0 * PI * s as f64 / n as f64;
            let f = phase_cost(&ch, &PhaseVector(vec![0.0, t])).unwrap();
            if f < best_f {
                best_f = f;
                best_t = t;
            }
        }
        // Refine by golden-section search on the bracketing grid cells.
        let h = 2.0 * PI / n as f64;
        let (mut lo, mut hi) = (best_t - h, best_t + h);
        let g = |t: f64| phase_cost(&ch, &PhaseVector(vec![0.0, t])).unwrap();
        for _ in 0..100 {
            let m1 = lo + (hi - lo) * 0.381966;
            let m2 = hi - (hi - lo) * 0.381966;
            if g(m1) < g(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let grad = phase_cost_gradient(&ch, &PhaseVector(vec![0.0, 0.5 * (lo + hi)])).unwrap();
        assert!(norm(&grad) <= 1e-6, "{grad:?}");
    }

    #[test]
    fn optimizer_k2_symmetric() {
        let ch = make_symmetric(2, 0.25, None).unwrap();
        let res = optimize_phases(&ch, &AlignOptions::default()).unwrap();
        assert!(res.converged);
        assert_abs_diff_eq!(res.cost_star, -0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(res.slope, 2.0, epsilon = 1e-6);
        assert_eq!(res.restarts_used, 32);
    }

    #[test]
    fn optimizer_without_interference() {
        let ch = make_symmetric(4, 0.0, None).unwrap();
        let res = optimize_phases(&ch, &AlignOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.cost_star, 0.0);
        assert_eq!(res.slope, slope_no_interference(&ch) / 2.0);
    }

    #[test]
    fn optimizer_is_deterministic_and_stable_across_restart_counts() {
        let ch = sample_random(3, 0.7, 5).unwrap();
        let o32 = AlignOptions { restarts: 32, seed: 1, ..Default::default() };
        let a = optimize_phases(&ch, &o32).unwrap();
        assert_eq!(a, optimize_phases(&ch, &o32).unwrap());
        let b = optimize_phases(&ch, &AlignOptions { restarts: 64, seed: 2, ..Default::default() }).unwrap();
        assert!((a.cost_star - b.cost_star).abs() <= 1e-4);
    }

    #[test]
    fn optimizer_rejects_bad_options() {
        let ch = make_symmetric(2, 0.5, None).unwrap();
        assert!(optimize_phases(&ch, &AlignOptions { restarts: 0, ..Default::default() }).is_err());
        assert!(optimize_phases(&ch, &AlignOptions { tol: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn optimizer_beats_random_probes() {
        let ch = sample_random(5, 0.8, 17).unwrap();
        let res = optimize_phases(&ch, &AlignOptions::default()).unwrap();
        let mut r = rng::stream(99);
        for _ in 0..10_000 {
            let probe = PhaseVector((0..5).map(|_| r.random_range(-PI..PI)).collect());
            assert!(res.cost_star <= phase_cost(&ch, &probe).unwrap() + 1e-12);
        }
        assert!(res.cost_star <= phase_cost(&ch, &PhaseVector::zeros(5)).unwrap());
    }

    fn random_theta(k: usize, seed: u64) -> PhaseVector {
        let mut r = rng::stream(seed);
        PhaseVector((0..k).map(|_| r.random_range(-PI..PI)).collect())
    }

    proptest! {
        #[test]
        fn gauge_and_half_turn_invariance(k in 2usize..8, a in 0.0f64..1.0, seed in any::<u64>(), c in -10.0f64..10.0, m in 0usize..8) {
            let ch = sample_random(k, a, seed).unwrap();
            let theta = random_theta(k, seed ^ 1);
            let f = phase_cost(&ch, &theta).unwrap();
            let shifted = PhaseVector(theta.0.iter().map(|t| t + c).collect());
            prop_assert!((phase_cost(&ch, &shifted).unwrap() - f).abs() <= 1e-12 * (1.0 + cross_weight(&ch)));
            let mut flipped = theta.clone();
            flipped.0[m % k] += PI;
            prop_assert!((phase_cost(&ch, &flipped).unwrap() - f).abs() <= 1e-12 * (1.0 + cross_weight(&ch)));
            prop_assert!(f.abs() <= cross_weight(&ch) + 1e-12);
        }

        #[test]
        fn gradient_sums_to_zero(k in 2usize..10, a in 0.0f64..1.0, seed in any::<u64>()) {
            let ch = sample_random(k, a, seed).unwrap();
            let g = phase_cost_gradient(&ch, &random_theta(k, seed ^ 2)).unwrap();
            prop_assert!(g.iter().sum::<f64>().abs() <= 1e-10);
        }
    }
}
