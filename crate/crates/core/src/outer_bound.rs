//! Generalized Z-channel outer bound on the sum slope.
//!
//! Three pieces:
//! - the side-information covariances `K_Sj` assembled from the `A_jp`
//!   blocks, and their PSD test (the channel condition under which the
//!   bound holds);
//! - the bound denominator, a quadratic in the normalized input covariances,
//!   minimized by multi-start projected gradient with a KKT certificate;
//! - the closed form for symmetric channels.
//!
//! User indices `j`, `p` in this module are 1-based, matching the block
//! numbering of `K_Sj` (a `2j x 2j` matrix).

use nalgebra::{DMatrix, Matrix2, Vector2};
use rand::Rng;

use crate::channel::{rotation, Channel};
use crate::error::{Error, Result};
use crate::linalg::eigenvalues_symmetric;
use crate::rng;

/// Default PSD tolerance, relative to the matrix 2-norm.
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// Symmetric 2x2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: f64,
}

impl Sym2 {
    pub const HALF_IDENTITY: Sym2 = Sym2 { a11: 0.5, a22: 0.5, a12: 0.0 };

    /// Trace-one covariance from `(k1, k3)` with `k2 = 1 - k1`.
    pub fn from_k(k1: f64, k3: f64) -> Self {
        Sym2 { a11: k1, a22: 1.0 - k1, a12: k3 }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a11, self.a12, self.a12, self.a22)
    }

    /// Trace one, nonnegative diagonal, `a12^2 <= a11 a22`, all within `tol`.
    pub fn is_normalized_covariance(&self, tol: f64) -> bool {
        (self.a11 + self.a22 - 1.0).abs() <= tol
            && self.a11 >= -tol
            && self.a22 >= -tol
            && self.a12 * self.a12 - self.a11 * self.a22 <= tol
    }
}

/// One normalized covariance per user.
#[derive(Debug, Clone, PartialEq)]
pub struct CovProfile {
    mats: Vec<Sym2>,
}

impl CovProfile {
    pub fn new(mats: Vec<Sym2>) -> Result<Self> {
        for (j, m) in mats.iter().enumerate() {
            if !m.is_normalized_covariance(1e-12) {
                return Err(Error::InvariantViolation(format!(
                    "covariance of user {} is not trace-one PSD: {m:?}",
                    j + 1
                )));
            }
        }
        Ok(CovProfile { mats })
    }

    pub fn half_identity(k: usize) -> Self {
        CovProfile { mats: vec![Sym2::HALF_IDENTITY; k] }
    }

    pub fn mats(&self) -> &[Sym2] {
        &self.mats
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Actual covariances `V_i = power * V̂_i`.
    pub fn scaled(&self, power: f64) -> Vec<Matrix2<f64>> {
        self.mats.iter().map(|m| m.matrix() * power).collect()
    }
}

fn check_users(ch: &Channel, covariances: &[Matrix2<f64>]) -> Result<()> {
    if covariances.len() != ch.k() {
        return Err(Error::DimensionMismatch { expected: ch.k(), got: covariances.len() });
    }
    Ok(())
}

/// Cross-covariance block `A_jp` between receiver `j`'s noise and the genie
/// noise `W_jp`, for `1 <= p < j <= K`. `covariances` are the un-normalized
/// input covariances `V_i`.
pub fn build_a_jp(ch: &Channel, covariances: &[Matrix2<f64>], j: usize, p: usize) -> Result<Matrix2<f64>> {
    check_users(ch, covariances)?;
    let k = ch.k();
    if !(1 <= p && p < j && j <= k) {
        return Err(Error::InvalidArgument(format!("need 1 <= p < j <= {k}, got j={j}, p={p}")));
    }
    let (j, p) = (j - 1, p - 1);
    let ratio = ch.gain_sq(p, j) / ch.gain_sq(j, j);
    let phi_pj = ch.phase(p, j);
    let mut a = rotation(-phi_pj) * ratio;
    for i in j + 1..k {
        let phi_ji = ch.phase(j, i);
        let rotated = rotation(phi_ji) * covariances[i];
        a += rotated * rotation(-phi_pj - phi_ji) * (ratio * ch.gain_sq(j, i));
        a -= rotated * rotation(-ch.phase(p, i)) * (ch.gain_sq(j, i) * ch.gain_sq(p, i));
    }
    Ok(a)
}

/// Side-information covariance `K_Sj` (size `2j x 2j`) of
/// `(Z_j, W_j(j-1), ..., W_j1)`: identity diagonal blocks and, above the
/// diagonal, block `(r, c) = A_{j-r, j-c}` (0-based block coordinates); the
/// lower triangle holds the transposes.
pub fn build_ks(ch: &Channel, covariances: &[Matrix2<f64>], j: usize) -> Result<DMatrix<f64>> {
    check_users(ch, covariances)?;
    if !(2..=ch.k()).contains(&j) {
        return Err(Error::InvalidArgument(format!("need 2 <= j <= {}, got j={j}", ch.k())));
    }
    let mut ks = DMatrix::identity(2 * j, 2 * j);
    for r in 0..j {
        for c in r + 1..j {
            let a = build_a_jp(ch, covariances, j - r, j - c)?;
            ks.fixed_view_mut::<2, 2>(2 * r, 2 * c).copy_from(&a);
            ks.fixed_view_mut::<2, 2>(2 * c, 2 * r).copy_from(&a.transpose());
        }
    }
    Ok(ks)
}

/// Eigenvalue evidence that `K_Sj` is (or is not) PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCertificate {
    pub j_index: usize,
    /// Ascending; `2j` of them.
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    /// Absolute tolerance: the relative tolerance times the 2-norm of `K_Sj`.
    pub tolerance: f64,
}

impl PsdCertificate {
    fn from_eigenvalues(j_index: usize, eigenvalues: Vec<f64>, rel_tol: f64) -> Self {
        let min_eigenvalue = eigenvalues[0];
        let spectral_norm = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tolerance = rel_tol * spectral_norm;
        PsdCertificate {
            j_index,
            eigenvalues,
            min_eigenvalue,
            is_psd: min_eigenvalue >= -tolerance,
            tolerance,
        }
    }

    /// Passes only by virtue of the tolerance.
    pub fn is_marginal(&self) -> bool {
        self.is_psd && self.min_eigenvalue < 0.0
    }

    /// Positive definite with margin beyond the tolerance.
    pub fn is_strictly_positive(&self) -> bool {
        self.min_eigenvalue > self.tolerance
    }
}

/// Certificates for `K_Sj`, `j = 2..=K`, with `V_i = per_user_power * V̂_i`
/// (`V̂_i = I/2` when no profile is given).
pub fn check_membership(
    ch: &Channel,
    per_user_power: f64,
    profile: Option<&CovProfile>,
    rel_tol: f64,
) -> Result<Vec<PsdCertificate>> {
    if !(per_user_power >= 0.0) {
        return Err(Error::InvalidArgument(format!("power {per_user_power} must be >= 0")));
    }
    let covariances = match profile {
        Some(p) => p.scaled(per_user_power),
        None => CovProfile::half_identity(ch.k()).scaled(per_user_power),
    };
    (2..=ch.k())
        .map(|j| {
            let ks = build_ks(ch, &covariances, j)?;
            let eig = eigenvalues_symmetric(&ks)?;
            Ok(PsdCertificate::from_eigenvalues(j, eig, rel_tol))
        })
        .collect()
}

pub fn all_psd(certificates: &[PsdCertificate]) -> bool {
    certificates.iter().all(|c| c.is_psd)
}

/// The operative membership test for the outer bound: every `K_Sj` is
/// positive definite (beyond tolerance) at zero power, so by continuity of
/// eigenvalues it stays PSD on some interval of positive power.
pub fn is_member(ch: &Channel, rel_tol: f64) -> Result<bool> {
    Ok(check_membership(ch, 0.0, None, rel_tol)?
        .iter()
        .all(PsdCertificate::is_strictly_positive))
}

/// Largest per-user power in `[0, p_hi]` at which membership still holds,
/// by bisection to absolute precision `1e-8`. Returns 0 when the channel
/// already fails at zero power.
pub fn max_power_epsilon(ch: &Channel, rel_tol: f64, p_hi: f64) -> Result<f64> {
    if !(p_hi > 0.0 && p_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("p_hi = {p_hi} must be positive")));
    }
    let passes = |p: f64| -> Result<bool> { Ok(all_psd(&check_membership(ch, p, None, rel_tol)?)) };
    if !passes(0.0)? {
        return Ok(0.0);
    }
    if passes(p_hi)? {
        return Err(Error::BracketTooSmall { p_hi });
    }
    let (mut lo, mut hi) = (0.0, p_hi);
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Cross terms of the bound denominator: `(j, i, weight, U_ji)` for
/// `j < i`, with `weight = 2 |C_jj|^2 |C_ji|^2`.
struct Quadratic {
    direct: Vec<f64>,
    pairs: Vec<(usize, usize, f64, Matrix2<f64>)>,
}

impl Quadratic {
    fn new(ch: &Channel) -> Self {
        let k = ch.k();
        let direct = (0..k).map(|j| ch.gain_sq(j, j).powi(2)).collect();
        let pairs = (0..k)
            .flat_map(|j| (j + 1..k).map(move |i| (j, i)))
            .map(|(j, i)| (j, i, 2.0 * ch.gain_sq(j, j) * ch.gain_sq(j, i), ch.rotation(j, i)))
            .filter(|&(_, _, w, _)| w != 0.0)
            .collect();
        Quadratic { direct, pairs }
    }

    fn value(&self, v: &[Matrix2<f64>]) -> f64 {
        let own: f64 = self.direct.iter().zip(v).map(|(c, m)| c * (m * m).trace()).sum();
        let cross: f64 = self
            .pairs
            .iter()
            .map(|&(j, i, w, u)| w * (v[j] * u * v[i] * u.transpose()).trace())
            .sum();
        own + cross
    }

    /// Value and gradient with respect to `(k1, k3)` of every user.
    fn value_and_gradient(&self, z: &[Vector2<f64>], grad: &mut [Vector2<f64>]) -> f64 {
        let v: Vec<Matrix2<f64>> = z.iter().map(|x| Sym2::from_k(x[0], x[1]).matrix()).collect();
        let mut g: Vec<Matrix2<f64>> = self.direct.iter().zip(&v).map(|(c, m)| m * (2.0 * c)).collect();
        for &(j, i, w, u) in &self.pairs {
            g[j] += u * v[i] * u.transpose() * w;
            g[i] += u.transpose() * v[j] * u * w;
        }
        for (out, gm) in grad.iter_mut().zip(&g) {
            *out = Vector2::new(gm[(0, 0)] - gm[(1, 1)], gm[(0, 1)] + gm[(1, 0)]);
        }
        self.value(&v)
    }
}

pub fn bound_denominator(ch: &Channel, profile: &CovProfile) -> Result<f64> {
    if profile.len() != ch.k() {
        return Err(Error::DimensionMismatch { expected: ch.k(), got: profile.len() });
    }
    let v: Vec<Matrix2<f64>> = profile.mats().iter().map(Sym2::matrix).collect();
    Ok(Quadratic::new(ch).value(&v))
}

/// Euclidean projection of `(k1, k3)` onto `k3^2 <= k1 (1 - k1)`, the disk of
/// radius 1/2 centred at `(1/2, 0)`.
fn project(z: Vector2<f64>) -> Vector2<f64> {
    let centre = Vector2::new(0.5, 0.0);
    let b = z - centre;
    let r = b.norm();
    if r > 0.5 {
        centre + b * (0.5 / r)
    } else {
        z
    }
}

/// First-order optimality evidence for a profile.
///
/// With `k2 = 1 - k1` substituted, each user keeps one inequality
/// `g_j = k3^2 - k1 (1 - k1) <= 0` (nonnegativity of `k1`, `k2` follows from
/// it). `multipliers[j]` is the least-squares `u_j >= 0` for that constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    pub multipliers: Vec<f64>,
    /// `max_j |grad_j D + u_j grad_j g_j|`.
    pub stationarity: f64,
    /// `max_j |u_j g_j|`.
    pub complementarity: f64,
}

impl KktCertificate {
    pub fn residual(&self) -> f64 {
        self.stationarity.max(self.complementarity)
    }
}

const ACTIVE: f64 = 1e-12;

fn kkt(z: &[Vector2<f64>], grad: &[Vector2<f64>]) -> KktCertificate {
    let mut cert = KktCertificate { multipliers: Vec::with_capacity(z.len()), stationarity: 0.0, complementarity: 0.0 };
    for (x, g) in z.iter().zip(grad) {
        let constraint = x[1] * x[1] - x[0] * (1.0 - x[0]);
        let normal = Vector2::new(2.0 * x[0] - 1.0, 2.0 * x[1]);
        let u = if constraint >= -ACTIVE && normal.norm_squared() > 0.0 {
            (-g.dot(&normal) / normal.norm_squared()).max(0.0)
        } else {
            0.0
        };
        cert.stationarity = cert.stationarity.max((g + normal * u).norm());
        cert.complementarity = cert.complementarity.max((u * constraint).abs());
        cert.multipliers.push(u);
    }
    cert
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    /// KKT residual tolerance.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { tol: 1e-9, restarts: 32, seed: 0, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorMin {
    pub profile: CovProfile,
    pub value: f64,
    pub kkt: KktCertificate,
    pub converged: bool,
}

struct Descent {
    z: Vec<Vector2<f64>>,
    value: f64,
    kkt: KktCertificate,
    converged: bool,
}

/// Projected gradient with backtracking on the quadratic upper model and
/// Barzilai-Borwein trial steps.
fn projected_descent(q: &Quadratic, mut z: Vec<Vector2<f64>>, tol: f64, max_iter: usize) -> Descent {
    let n = z.len();
    let mut grad = vec![Vector2::zeros(); n];
    let mut value = q.value_and_gradient(&z, &mut grad);
    let mut step = 0.1;
    let mut trial = vec![Vector2::zeros(); n];
    let mut trial_grad = vec![Vector2::zeros(); n];
    for _ in 0..max_iter {
        let cert = kkt(&z, &grad);
        if cert.residual() <= tol {
            return Descent { z, value, kkt: cert, converged: true };
        }
        let mut accepted = false;
        while step > 1e-16 {
            let mut model = 0.0;
            for m in 0..n {
                trial[m] = project(z[m] - grad[m] * step);
                let d = trial[m] - z[m];
                model += grad[m].dot(&d) + d.norm_squared() / (2.0 * step);
            }
            let trial_value = q.value_and_gradient(&trial, &mut trial_grad);
            if trial_value <= value + model + 1e-15 * value.abs() {
                let (mut ss, mut sy) = (0.0, 0.0);
                for m in 0..n {
                    let s = trial[m] - z[m];
                    ss += s.norm_squared();
                    sy += s.dot(&(trial_grad[m] - grad[m]));
                }
                std::mem::swap(&mut z, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                value = trial_value;
                step = if sy > 0.0 { (ss / sy).clamp(1e-6, 1e3) } else { 2.0 * step };
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let cert = kkt(&z, &grad);
    let converged = cert.residual() <= tol;
    Descent { z, value, kkt: cert, converged }
}

/// Minimizes the bound denominator over trace-one PSD profiles.
///
/// Start 0 is `V̂_j = I/2` for every user (the KKT point of symmetric
/// channels); the others are uniform on the feasible disks. The best
/// converged start wins, earlier starts keeping ties.
pub fn minimize_denominator(ch: &Channel, opts: &BoundOptions) -> Result<DenominatorMin> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol = {} must be positive", opts.tol)));
    }
    let k = ch.k();
    let q = Quadratic::new(ch);
    let tie_scale = 1e-12 * q.direct.iter().sum::<f64>().max(1.0);
    let mut best: Option<Descent> = None;
    for r in 0..opts.restarts {
        let start: Vec<Vector2<f64>> = if r == 0 {
            vec![Vector2::new(0.5, 0.0); k]
        } else {
            let mut rng = rng::stream(rng::derive_seed(opts.seed, &[r as u64]));
            (0..k)
                .map(|_| {
                    let rho = 0.5 * rng.random::<f64>().sqrt();
                    let psi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                    Vector2::new(0.5 + rho * psi.cos(), rho * psi.sin())
                })
                .collect()
        };
        let run = projected_descent(&q, start, opts.tol, opts.max_iter);
        let better = match &best {
            None => true,
            Some(b) if run.converged != b.converged => run.converged,
            Some(b) => run.value < b.value - tie_scale,
        };
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let profile = CovProfile::new(best.z.iter().map(|x| Sym2::from_k(x[0], x[1])).collect())?;
    Ok(DenominatorMin { profile, value: best.value, kkt: best.kkt, converged: best.converged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterBound {
    pub slope: f64,
    pub denominator: DenominatorMin,
    /// Whether the channel passed the membership test; when false the slope
    /// is the formula value only, not a proven bound.
    pub verified: bool,
}

/// `(sum |C_jj|^2)^2 / min denominator`.
pub fn slope_outer_bound(ch: &Channel, opts: &BoundOptions, psd_tol: f64) -> Result<OuterBound> {
    let denominator = minimize_denominator(ch, opts)?;
    let s1: f64 = ch.direct_gains().sum();
    Ok(OuterBound {
        slope: s1 * s1 / denominator.value,
        denominator,
        verified: is_member(ch, psd_tol)?,
    })
}

/// Closed form for unit direct gains and cross gains `alpha`:
/// `2K / (alpha K + 1 - alpha)`.
pub fn symmetric_bound(k: usize, alpha: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}; need at least 2 users")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let k = k as f64;
    Ok(2.0 * k / (alpha * k + 1.0 - alpha))
}
