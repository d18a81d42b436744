//! K-user interference channel model.
//!
//! A channel is stored as magnitude-squared gains `|C_ji|^2` and phases
//! `phi_ji`, row `j` = receiver, column `i` = transmitter. Receivers are
//! phase-synchronized to their own transmitter, so `phi_jj = 0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Matrix2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::format::fmt17;
use crate::rng;

pub const DOCUMENT_HEADER: &str = "wbslope-channel v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    k: usize,
    gain_sq: Vec<f64>,
    phase: Vec<f64>,
}

impl Channel {
    /// Builds a channel from row-major `k*k` gain and phase tables,
    /// validating every invariant.
    pub fn new(k: usize, gain_sq: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        for len in [gain_sq.len(), phase.len()] {
            if len != k * k {
                return Err(Error::DimensionMismatch { expected: k * k, got: len });
            }
        }
        let ch = Channel { k, gain_sq, phase };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        let k = self.k;
        for j in 0..k {
            for i in 0..k {
                let g = self.gain_sq(j, i);
                let p = self.phase(j, i);
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::InvariantViolation(format!(
                        "gain_sq[{}][{}] = {g} must be finite and nonnegative",
                        j + 1,
                        i + 1
                    )));
                }
                if !(-PI..PI).contains(&p) {
                    return Err(Error::InvariantViolation(format!(
                        "phase[{}][{}] = {p} outside [-pi, pi)",
                        j + 1,
                        i + 1
                    )));
                }
            }
            if self.gain_sq(j, j) <= 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "direct gain gain_sq[{0}][{0}] must be positive",
                    j + 1
                )));
            }
            if self.phase(j, j) != 0.0 {
                return Err(Error::InvariantViolation(format!(
                    "diagonal phase[{0}][{0}] = {1} must be 0",
                    j + 1,
                    self.phase(j, j)
                )));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `|C_ji|^2`, zero-based receiver `j` and transmitter `i`.
    #[inline]
    pub fn gain_sq(&self, j: usize, i: usize) -> f64 {
        self.gain_sq[j * self.k + i]
    }

    /// `phi_ji`, zero-based.
    #[inline]
    pub fn phase(&self, j: usize, i: usize) -> f64 {
        self.phase[j * self.k + i]
    }

    pub fn gain_sq_table(&self) -> &[f64] {
        &self.gain_sq
    }

    pub fn phase_table(&self) -> &[f64] {
        &self.phase
    }

    pub fn direct_gains(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.k).map(move |j| self.gain_sq(j, j))
    }

    /// `U_ji`, the rotation by `phi_ji`.
    pub fn rotation(&self, j: usize, i: usize) -> Matrix2<f64> {
        rotation(self.phase(j, i))
    }

    /// Same gains with every phase set to zero.
    pub fn magnitudes_only(&self) -> Channel {
        Channel {
            k: self.k,
            gain_sq: self.gain_sq.clone(),
            phase: vec![0.0; self.k * self.k],
        }
    }
}

/// Symmetric channel: unit direct gains, `a` on every cross link.
/// `phases`, when given, is a row-major `k*k` table with zero diagonal.
pub fn make_symmetric(k: usize, a: f64, phases: Option<Vec<f64>>) -> Result<Channel> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k}; need at least 2 users")));
    }
    if !a.is_finite() || a < 0.0 {
        return Err(Error::InvalidArgument(format!("cross gain a = {a} must be >= 0")));
    }
    let gain_sq = (0..k * k)
        .map(|idx| if idx / k == idx % k { 1.0 } else { a })
        .collect();
    let phase = phases.unwrap_or_else(|| vec![0.0; k * k]);
    Channel::new(k, gain_sq, phase)
}

/// The simulated family: unit direct gains, cross gains `a`, and cross
/// phases i.i.d. uniform on `[-pi, pi)` drawn from a ChaCha8 stream seeded
/// by `seed`, in row-major order.
pub fn sample_random(k: usize, a: f64, seed: u64) -> Result<Channel> {
    let mut rng = rng::stream(seed);
    let mut phase = vec![0.0; k * k];
    for j in 0..k {
        for i in 0..k {
            if i != j {
                phase[j * k + i] = rng.random_range(-PI..PI);
            }
        }
    }
    make_symmetric(k, a, Some(phase))
}

/// `[[cos phi, -sin phi], [sin phi, cos phi]]`.
pub fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn save_channel(channel: &Channel) -> String {
    let k = channel.k;
    let mut out = String::new();
    let _ = writeln!(out, "{DOCUMENT_HEADER}");
    let _ = writeln!(out, "k={k}");
    for j in 0..k {
        for i in 0..k {
            let _ = writeln!(out, "g {} {} {}", j + 1, i + 1, fmt17(channel.gain_sq(j, i)));
        }
    }
    for j in 0..k {
        for i in 0..k {
            let _ = writeln!(out, "p {} {} {}", j + 1, i + 1, fmt17(channel.phase(j, i)));
        }
    }
    out
}

/// Parses a channel document. Entry lines may appear in any order but each
/// `(j, i)` must be given exactly once per block. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_channel(text: &str) -> Result<Channel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    match lines.next() {
        Some((_, l)) if l == DOCUMENT_HEADER => {}
        Some((n, l)) => {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected header `{DOCUMENT_HEADER}`, found `{l}`"),
            })
        }
        None => return Err(Error::Parse { line: 1, msg: "empty document".into() }),
    }

    let k: usize = match lines.next() {
        Some((n, l)) => l
            .strip_prefix("k=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::Parse { line: n, msg: format!("expected `k=<positive int>`, found `{l}`") })?,
        None => return Err(Error::Parse { line: 2, msg: "missing `k=` line".into() }),
    };

    let mut gain: Vec<Option<f64>> = vec![None; k * k];
    let mut phase: Vec<Option<f64>> = vec![None; k * k];
    for (n, l) in lines {
        let parse_err = |msg: String| Error::Parse { line: n, msg };
        let fields: Vec<&str> = l.split_whitespace().collect();
        let [tag, j, i, v] = fields[..] else {
            return Err(parse_err(format!("expected `<g|p> <j> <i> <value>`, found `{l}`")));
        };
        let table = match tag {
            "g" => &mut gain,
            "p" => &mut phase,
            _ => return Err(parse_err(format!("unknown entry tag `{tag}`"))),
        };
        let index = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&x| (1..=k).contains(&x))
                .map(|x| x - 1)
                .ok_or_else(|| parse_err(format!("index `{s}` not in 1..={k}")))
        };
        let (j, i) = (index(j)?, index(i)?);
        let v: f64 = v.parse().map_err(|_| parse_err(format!("bad number `{v}`")))?;
        if table[j * k + i].replace(v).is_some() {
            return Err(parse_err(format!("duplicate `{tag} {} {}` entry", j + 1, i + 1)));
        }
    }

    let collect = |table: Vec<Option<f64>>, tag: &str| -> Result<Vec<f64>> {
        table
            .into_iter()
            .enumerate()
            .map(|(idx, v)| {
                v.ok_or_else(|| Error::Parse {
                    line: text.lines().count(),
                    msg: format!("missing `{tag} {} {}` entry", idx / k + 1, idx % k + 1),
                })
            })
            .collect()
    };
    Channel::new(k, collect(gain, "g")?, collect(phase, "p")?)
}
