//! Linear stability of the equally spaced codebook.
//!
//! With `F = π h(π/n) / (nM)` the circulant eigenvalues read
//! `λ_m = 1 − F (1 − cos(2πm/n))`. The smallest sits at the critical mode
//! `m* = ⌊n/2⌋`, and it reaches −1 (a flip) exactly when
//! `F = 2 / (1 − cos(2πm*/n))`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::density::{Density, DensityModel, KAPPA_MAX};
use crate::error::{Error, Result};
use crate::linearization::reference_cell;

/// `|F − bound|` at or below this is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-12;

/// Grid size used to bracket a critical concentration.
pub const SCAN_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    pub kappa: Option<f64>,
    #[serde(rename = "F")]
    pub f: f64,
    pub bound: f64,
    pub m_star: usize,
    pub lambda_min: f64,
    pub verdict: Verdict,
    /// `bound − F`
    pub margin: f64,
}

/// Fourier mode carrying the smallest eigenvalue.
pub fn m_star(n: usize) -> usize {
    if n % 2 == 0 {
        n / 2
    } else {
        // ⌊n/2⌋ minimises cos(2πm/n) for every odd n ≥ 3
        (n - 1) / 2
    }
}

fn mode_factor(n: usize, m: usize) -> f64 {
    1.0 - (TAU * m as f64 / n as f64).cos()
}

/// Value of `F` at which `λ_{m*}` reaches −1.
pub fn flip_bound(n: usize) -> f64 {
    2.0 / mode_factor(n, m_star(n))
}

/// `F = (π / (nM)) h(π/n)` on the reference cell centred on the density's axis.
pub fn stability_functional<D: Density + ?Sized>(n: usize, density: &D) -> Result<f64> {
    let (edge, mass) = reference_cell(n, density)?;
    Ok(PI / (n as f64 * mass) * edge)
}

/// Builds the report for a known value of `F`.
pub fn classify_functional(n: usize, kappa: Option<f64>, f: f64) -> StabilityReport {
    let bound = flip_bound(n);
    let m = m_star(n);
    let verdict = if (f - bound).abs() <= MARGINAL_BAND {
        Verdict::Marginal
    } else if f < bound {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    StabilityReport {
        n,
        kappa,
        f,
        bound,
        m_star: m,
        lambda_min: 1.0 - f * mode_factor(n, m),
        verdict,
        margin: bound - f,
    }
}

pub fn classify<D: Density + ?Sized>(n: usize, density: &D) -> Result<StabilityReport> {
    let f = stability_functional(n, density)?;
    Ok(classify_functional(n, density.concentration(), f))
}

/// Outcome of the search for `F(κ_c) = flip_bound(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CriticalKappa {
    Root {
        kappa_c: f64,
        bound: f64,
    },
    NoRoot {
        #[serde(rename = "max_F")]
        max_f: f64,
        bound: f64,
    },
}

/// Critical concentration for the von Mises family with `μ = 0`.
pub fn critical_kappa(n: usize, range: (f64, f64), tol: f64) -> Result<CriticalKappa> {
    critical_kappa_by(n, range, tol, |kappa| {
        stability_functional(n, &DensityModel::von_mises(kappa, 0.0)?)
    })
}

/// Brackets a sign change of `F(κ) − bound` on a 256-point grid, then
/// bisects to `tol`.
pub fn critical_kappa_by(
    n: usize,
    (lo, hi): (f64, f64),
    tol: f64,
    functional: impl Fn(f64) -> Result<f64> + Sync,
) -> Result<CriticalKappa> {
    if n < 2 {
        return Err(Error::Degenerate(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=KAPPA_MAX).contains(&lo) || !(lo..=KAPPA_MAX).contains(&hi) || lo >= hi {
        return Err(Error::Domain(format!(
            "concentration range [{lo}, {hi}] must lie in [0, {KAPPA_MAX}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let bound = flip_bound(n);
    let step = (hi - lo) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i + 1 == SCAN_POINTS { hi } else { lo + i as f64 * step })
        .collect();
    let values = grid
        .iter()
        .map(|&k| Ok(functional(k)? - bound))
        .collect::<Result<Vec<f64>>>()?;

    for i in 0..SCAN_POINTS {
        if values[i] == 0.0 {
            return Ok(CriticalKappa::Root {
                kappa_c: grid[i],
                bound,
            });
        }
        if i + 1 < SCAN_POINTS && values[i].signum() != values[i + 1].signum() && values[i + 1] != 0.0 {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let mut ga = values[i];
            while b - a > tol {
                let mid = 0.5 * (a + b);
                let gm = functional(mid)? - bound;
                if gm == 0.0 {
                    return Ok(CriticalKappa::Root { kappa_c: mid, bound });
                }
                if gm.signum() == ga.signum() {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            return Ok(CriticalKappa::Root {
                kappa_c: 0.5 * (a + b),
                bound,
            });
        }
    }
    let max_f = values.iter().fold(f64::NEG_INFINITY, |m, &g| m.max(g + bound));
    Ok(CriticalKappa::NoRoot { max_f, bound })
}
