//! Closed-form low-SNR metrics under the equal-power constraint, the
//! baseline sum-rate curves, and a finite-difference slope extractor.
//!
//! Rates are in bits per channel use with `N0 * B = 1`; `p_sum` is the total
//! transmit power and each user gets `p_sum / K`.

use std::f64::consts::LN_2;
use std::fmt;

use crate::channel::Channel;
use crate::error::{Error, Result};

/// Default finite-difference step for [`slope_from_rate_curve`].
pub const DEFAULT_FD_STEP: f64 = 1e-4;

fn direct_sums(ch: &Channel) -> (f64, f64) {
    ch.direct_gains().fold((0.0, 0.0), |(s1, s2), g| (s1 + g, s2 + g * g))
}

/// `K ln 2 / sum_j |C_jj|^2`.
pub fn ebno_min_equal_power(ch: &Channel) -> f64 {
    let (s1, _) = direct_sums(ch);
    ch.k() as f64 * LN_2 / s1
}

/// Interference-free sum slope `2 (sum |C_jj|^2)^2 / sum |C_jj|^4`.
pub fn slope_no_interference(ch: &Channel) -> f64 {
    let (s1, s2) = direct_sums(ch);
    2.0 * s1 * s1 / s2
}

pub fn slope_tdma(ch: &Channel) -> f64 {
    let (s1, s2) = direct_sums(ch);
    2.0 * s1 * s1 / (ch.k() as f64 * s2)
}

/// Treating interference as noise. Phases do not enter.
pub fn slope_tin(ch: &Channel) -> f64 {
    let k = ch.k();
    let (s1, _) = direct_sums(ch);
    let denom: f64 = (0..k)
        .map(|j| {
            let d = ch.gain_sq(j, j);
            let cross: f64 = (0..k).filter(|&i| i != j).map(|i| ch.gain_sq(j, i)).sum();
            d * d + 2.0 * cross * d
        })
        .sum();
    2.0 * s1 * s1 / denom
}

pub fn rsum_tin(ch: &Channel, p_sum: f64) -> f64 {
    let k = ch.k();
    (0..k)
        .map(|j| {
            let cross: f64 = (0..k).filter(|&i| i != j).map(|i| ch.gain_sq(j, i)).sum();
            let sinr = ch.gain_sq(j, j) * p_sum / (k as f64 + p_sum * cross);
            sinr.ln_1p()
        })
        .sum::<f64>()
        / LN_2
}

pub fn rsum_tdma(ch: &Channel, p_sum: f64) -> f64 {
    let k = ch.k() as f64;
    ch.direct_gains().map(|g| (g * p_sum).ln_1p()).sum::<f64>() / (k * LN_2)
}

/// A labelled sum-rate curve `p_sum -> R_sum` in bits.
pub struct RateCurve<'a> {
    pub label: String,
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync + 'a>,
}

impl<'a> RateCurve<'a> {
    pub fn new(label: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'a) -> Self {
        RateCurve { label: label.into(), eval: Box::new(eval) }
    }

    pub fn tin(ch: &'a Channel) -> Self {
        Self::new("tin", move |p| rsum_tin(ch, p))
    }

    pub fn tdma(ch: &'a Channel) -> Self {
        Self::new("tdma", move |p| rsum_tdma(ch, p))
    }

    pub fn eval(&self, p_sum: f64) -> f64 {
        (self.eval)(p_sum)
    }
}

impl fmt::Debug for RateCurve<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateCurve").field("label", &self.label).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrPoint {
    pub ebno_min: f64,
    pub s0: f64,
}

/// Extracts `E_b/N0|min` and `S0` from a bit-valued rate curve.
///
/// The low-SNR formulas `ln 2 / R'(0)` and `-2 R'(0)^2 / R''(0)` hold for
/// rates in nats, so the curve is rescaled by `ln 2` first. Derivatives use
/// one-sided second-order stencils on `R(0), R(h), R(2h), R(3h)`.
pub fn slope_from_rate_curve(curve: &RateCurve<'_>, step: f64) -> Result<LowSnrPoint> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step {step} must be positive")));
    }
    let r: [f64; 4] = std::array::from_fn(|n| curve.eval(n as f64 * step) * LN_2);
    let d1 = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * step);
    let d2 = (2.0 * r[0] - 5.0 * r[1] + 4.0 * r[2] - r[3]) / (step * step);
    // Roundoff in the second difference is about eps * |R'| / h.
    let noise_floor = (64.0 * f64::EPSILON * d1.abs() / step).max(1e-12);
    if d2.abs() <= noise_floor {
        return Err(Error::IllConditioned(d2));
    }
    Ok(LowSnrPoint { ebno_min: LN_2 / d1, s0: -2.0 * d1 * d1 / d2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    NoInterference,
    Tdma,
    Tin,
    Inta,
    OuterBound,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::NoInterference => "no_interference",
            Scheme::Tdma => "tdma",
            Scheme::Tin => "tin",
            Scheme::Inta => "inta",
            Scheme::OuterBound => "outer_bound",
        }
    }
}

/// Low-SNR summary for one channel realization. The alignment and
/// outer-bound slopes are filled in only when computed.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeReport {
    pub ebno_min: f64,
    pub s0_no_interference: f64,
    pub s0_tdma: f64,
    pub s0_tin: f64,
    pub s0_inta: Option<f64>,
    pub s0_outer_bound: Option<f64>,
}

impl SlopeReport {
    pub fn baseline(ch: &Channel) -> Self {
        SlopeReport {
            ebno_min: ebno_min_equal_power(ch),
            s0_no_interference: slope_no_interference(ch),
            s0_tdma: slope_tdma(ch),
            s0_tin: slope_tin(ch),
            s0_inta: None,
            s0_outer_bound: None,
        }
    }

    pub fn slopes(&self) -> Vec<(Scheme, f64)> {
        let mut v = vec![
            (Scheme::NoInterference, self.s0_no_interference),
            (Scheme::Tdma, self.s0_tdma),
            (Scheme::Tin, self.s0_tin),
        ];
        v.extend(self.s0_inta.map(|s| (Scheme::Inta, s)));
        v.extend(self.s0_outer_bound.map(|s| (Scheme::OuterBound, s)));
        v
    }

    /// `S0 / S0_no_interference` for every available scheme.
    pub fn delta_s0(&self) -> Vec<(Scheme, f64)> {
        self.slopes()
            .into_iter()
            .map(|(s, v)| (s, v / self.s0_no_interference))
            .collect()
    }
}
