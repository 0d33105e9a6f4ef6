//! Angular arithmetic on the circle.
//!
//! Angles are plain `f64` radians internally; the [`Angle`] newtype marks a
//! value that has been wrapped into `[0, 2π)`. A [`Configuration`] is the
//! state of the Lloyd dynamical system: `n ≥ 2` strictly increasing wrapped
//! angles.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two points closer than this (along the circle) are treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// A point on the circle, stored as radians in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    /// Wraps an arbitrary finite angle.
    pub fn new(x: f64) -> Result<Self> {
        wrap_2pi(x)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {x} is not finite")))
    }
}

// `rem_euclid` can round up to exactly 2π for tiny negative inputs.
pub(crate) fn wrap_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub(crate) fn wrap_signed(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU);
    let r = if r >= TAU { 0.0 } else { r };
    r - PI
}

/// Reduces `x` modulo 2π into `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> Result<Angle> {
    check_finite(x)?;
    Ok(Angle(wrap_tau(x)))
}

/// Signed angular difference `((x + π) mod 2π) − π`, in `[−π, π)`.
pub fn wrap_pi(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(wrap_signed(x))
}

/// Shortest arc length between two points, in `[0, π]`.
pub fn geodesic(a: Angle, b: Angle) -> f64 {
    let d = (a.0 - b.0).abs();
    d.min(TAU - d)
}

/// Bisector of the counterclockwise arc running from `a` to `b`.
pub fn circular_midpoint(a: Angle, b: Angle) -> Result<Angle> {
    let arc = wrap_tau(b.0 - a.0);
    if arc == 0.0 {
        return Err(Error::Degenerate(format!(
            "midpoint of coincident points {}",
            a.0
        )));
    }
    Ok(Angle(wrap_tau(a.0 + 0.5 * arc)))
}

/// Ordered codebook of `n ≥ 2` distinct points on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Configuration {
    points: Vec<f64>,
}

impl Configuration {
    /// Validates an already sorted, wrapped point list.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate(format!(
                "a configuration needs at least 2 points, got {}",
                points.len()
            )));
        }
        for &p in &points {
            check_finite(p)?;
            if !(0.0..TAU).contains(&p) {
                return Err(Error::Domain(format!("point {p} is outside [0, 2pi)")));
            }
        }
        let config = Configuration { points };
        for (j, gap) in config.gaps().into_iter().enumerate() {
            if gap <= DUPLICATE_TOL || gap >= TAU {
                return Err(Error::Degenerate(format!(
                    "points {} and {} are not strictly increasing",
                    j,
                    (j + 1) % config.len()
                )));
            }
        }
        Ok(config)
    }

    /// The symmetric configuration `q_j = 2πj/n`.
    pub fn equally_spaced(n: usize) -> Result<Self> {
        let step = TAU / n as f64;
        Self::new((0..n).map(|j| j as f64 * step).collect())
    }

    /// Draws `n` uniform points, redrawing while any gap is below `2π/(100n)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "a configuration needs at least 2 points, got {n}"
            )));
        }
        let floor = TAU / (100.0 * n as f64);
        loop {
            let mut pts: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
            pts.sort_by(f64::total_cmp);
            if let Ok(config) = Self::new(pts) {
                if config.min_gap() >= floor {
                    return Ok(config);
                }
            }
        }
    }

    pub(crate) fn from_sorted_unchecked(points: Vec<f64>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
        Configuration { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<f64> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `gaps()[j]` is the counterclockwise arc from point `j` to point `j+1 mod n`.
    pub fn gaps(&self) -> Vec<f64> {
        cyclic_gaps(&self.points)
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps().into_iter().fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<f64>> for Configuration {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Configuration::new(points)
    }
}

impl From<Configuration> for Vec<f64> {
    fn from(c: Configuration) -> Vec<f64> {
        c.points
    }
}

/// Forward gaps of a cyclically ordered point list (not necessarily wrapped).
pub(crate) fn cyclic_gaps(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|j| wrap_tau(points[(j + 1) % n] - points[j]))
        .collect()
}

/// Wraps and sorts an unordered list of angles.
pub fn sort_config(points: &[f64]) -> Result<Configuration> {
    let mut pts = Vec::with_capacity(points.len());
    for &p in points {
        pts.push(wrap_2pi(p)?.value());
    }
    pts.sort_by(f64::total_cmp);
    Configuration::new(pts)
}

/// Subtracts the arithmetic mean of the `[0, 2π)` representatives, then
/// wraps and re-sorts.
///
/// The mean is taken literally over the stored representatives, so the
/// result is not rotation-equivariant when points straddle the 0/2π seam.
pub fn remove_drift(config: &Configuration) -> Configuration {
    let mean = config.points.iter().sum::<f64>() / config.len() as f64;
    let mut pts: Vec<f64> = config.points.iter().map(|&p| wrap_tau(p - mean)).collect();
    pts.sort_by(f64::total_cmp);
    Configuration::from_sorted_unchecked(pts)
}

/// Euclidean norm of coordinatewise `wrap_pi` differences, minimised over
/// cyclic relabelings of `a`.
///
/// Sorting after a step can rotate the labels when a point crosses the seam,
/// so residuals compare configurations under the best cyclic alignment.
pub fn aligned_distance(a: &Configuration, b: &Configuration) -> Result<f64> {
    let n = b.len();
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.len(),
        });
    }
    let best = (0..n)
        .map(|shift| {
            (0..n)
                .map(|j| {
                    let d = wrap_signed(a.points[(j + shift) % n] - b.points[j]);
                    d * d
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best.sqrt())
}
