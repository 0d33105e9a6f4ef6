//! Densities on the circle and their arc integrals.
//!
//! All arc queries take a forward (counterclockwise) arc `(a, b)`. If
//! `0 < b − a ≤ 2π` the arc length is `b − a`, so `(0, 2π)` is the whole
//! circle; otherwise the length is `(b − a) mod 2π`. Arcs crossing the 0/2π
//! seam are split there before integrating.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::angle::{wrap_signed, wrap_tau};
use crate::error::{Error, Result};
use crate::quadrature::{rule, MAX_PANEL};

/// Largest concentration accepted; `e^κ` overflows just above 709.
pub const KAPPA_MAX: f64 = 700.0;

/// Slack on the "cell shorter than π" requirement.
pub const CELL_SLACK: f64 = 1e-9;

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa.is_finite() && (0.0..=KAPPA_MAX).contains(&kappa) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "concentration {kappa} outside [0, {KAPPA_MAX}]"
        )))
    }
}

/// Modified Bessel function `I₀` by its power series.
pub fn bessel_i0(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term <= 1e-16 * sum {
            return Ok(sum);
        }
    }
}

/// Modified Bessel function `I₁` by its power series.
pub fn bessel_i1(kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let q = 0.25 * kappa * kappa;
    let mut term = 0.5 * kappa;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + 1.0));
        sum += term;
        if term <= 1e-16 * sum {
            return Ok(sum);
        }
    }
}

/// A strictly positive density on the circle.
///
/// Normalisation is not required: every quantity the stability analysis
/// uses is a ratio of integrals of the same density.
pub trait Density: Sync {
    fn eval(&self, theta: f64) -> f64;

    /// Direction about which the density is mirror-symmetric. The reference
    /// Voronoi cell of the symmetric configuration is centred here.
    fn axis(&self) -> f64 {
        0.0
    }

    fn concentration(&self) -> Option<f64> {
        None
    }
}

impl<D: Density + ?Sized> Density for &D {
    fn eval(&self, theta: f64) -> f64 {
        (**self).eval(theta)
    }

    fn axis(&self) -> f64 {
        (**self).axis()
    }

    fn concentration(&self) -> Option<f64> {
        (**self).concentration()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesParams {
    pub kappa: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Uniform,
    VonMises(VonMisesParams),
}

/// Uniform or von Mises density, `h(θ) = e^{κ cos(θ−μ)} / normalization`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub family: Family,
    /// `2π·I₀(κ)` (or `2π`) for a probability density, 1 for the raw kernel.
    pub normalization: f64,
}

impl DensityModel {
    pub fn uniform() -> Self {
        DensityModel {
            family: Family::Uniform,
            normalization: TAU,
        }
    }

    pub fn von_mises(kappa: f64, mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::Domain(format!("mean direction {mu} is not finite")));
        }
        let normalization = TAU * bessel_i0(kappa)?;
        Ok(DensityModel {
            family: Family::VonMises(VonMisesParams {
                kappa,
                mu: wrap_tau(mu),
            }),
            normalization,
        })
    }

    /// Same shape without the normalising constant (`h = e^{κ cos(θ−μ)}`).
    pub fn unnormalized(self) -> Self {
        DensityModel {
            normalization: 1.0,
            ..self
        }
    }

    pub fn kappa(&self) -> f64 {
        match self.family {
            Family::Uniform => 0.0,
            Family::VonMises(p) => p.kappa,
        }
    }
}

impl Density for DensityModel {
    fn eval(&self, theta: f64) -> f64 {
        match self.family {
            Family::Uniform => 1.0 / self.normalization,
            Family::VonMises(VonMisesParams { kappa, mu }) => {
                (kappa * (theta - mu).cos()).exp() / self.normalization
            }
        }
    }

    fn axis(&self) -> f64 {
        match self.family {
            Family::Uniform => 0.0,
            Family::VonMises(p) => p.mu,
        }
    }

    fn concentration(&self) -> Option<f64> {
        Some(self.kappa())
    }
}

/// Integrals of a density over one arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    /// `∫ h`
    pub mass: f64,
    /// `∫ wrap_pi(θ − c) h`
    pub local_first: f64,
    /// `∫ wrap_pi(θ − c)² h`
    pub local_second: f64,
    /// `(∫ cos θ h, ∫ sin θ h)`
    pub circular_first: (f64, f64),
}

/// Resolves `(a, b)` to `(start in [0, 2π), length in (0, 2π])`.
pub(crate) fn forward_arc(a: f64, b: f64) -> Result<(f64, f64)> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("arc ({a}, {b}) is not finite")));
    }
    let d = b - a;
    let len = if d > 0.0 && d <= TAU { d } else { wrap_tau(d) };
    if len <= 0.0 {
        return Err(Error::Degenerate(format!("arc ({a}, {b}) has zero length")));
    }
    Ok((wrap_tau(a), len))
}

fn visit_arc(start: f64, len: f64, mut visit: impl FnMut(f64, f64)) {
    let end = start + len;
    let gl = rule();
    if end > TAU {
        gl.visit_panels(start, TAU, MAX_PANEL, &mut visit);
        gl.visit_panels(0.0, end - TAU, MAX_PANEL, &mut visit);
    } else {
        gl.visit_panels(start, end, MAX_PANEL, &mut visit);
    }
}

/// Probability of the forward arc from `a` to `b`.
pub fn arc_mass<D: Density + ?Sized>(density: &D, a: f64, b: f64) -> Result<f64> {
    let (start, len) = forward_arc(a, b)?;
    let mut acc = 0.0;
    visit_arc(start, len, |x, w| acc += w * density.eval(x));
    Ok(acc)
}

/// `∫ e^{iθ} h(θ) dθ` over the forward arc, as `(re, im)`.
pub fn arc_circular_first_moment<D: Density + ?Sized>(
    density: &D,
    a: f64,
    b: f64,
) -> Result<(f64, f64)> {
    let (start, len) = forward_arc(a, b)?;
    let (mut re, mut im) = (0.0, 0.0);
    visit_arc(start, len, |x, w| {
        let h = w * density.eval(x);
        re += h * x.cos();
        im += h * x.sin();
    });
    Ok((re, im))
}

/// `∫ wrap_pi(θ − center) h(θ) dθ` over an arc shorter than π containing
/// `center`.
pub fn arc_local_first_moment<D: Density + ?Sized>(
    density: &D,
    a: f64,
    b: f64,
    center: f64,
) -> Result<f64> {
    Ok(cell_moments(density, a, b, center)?.local_first)
}

/// All moments of the arc about `center` in one quadrature pass.
pub fn cell_moments<D: Density + ?Sized>(
    density: &D,
    a: f64,
    b: f64,
    center: f64,
) -> Result<CellMoments> {
    let (start, len) = forward_arc(a, b)?;
    if len > PI + CELL_SLACK {
        return Err(Error::CellTooLarge { length: len });
    }
    if !center.is_finite() || wrap_tau(center - start) > len {
        return Err(Error::Domain(format!(
            "center {center} lies outside the arc ({a}, {b})"
        )));
    }
    let mut m = CellMoments {
        mass: 0.0,
        local_first: 0.0,
        local_second: 0.0,
        circular_first: (0.0, 0.0),
    };
    visit_arc(start, len, |x, w| {
        let h = w * density.eval(x);
        let u = wrap_signed(x - center);
        m.mass += h;
        m.local_first += u * h;
        m.local_second += u * u * h;
        m.circular_first.0 += h * x.cos();
        m.circular_first.1 += h * x.sin();
    });
    Ok(m)
}
