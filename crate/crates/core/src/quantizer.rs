//! Voronoi partitions on the circle and the Lloyd map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle::{aligned_distance, cyclic_gaps, remove_drift, sort_config, wrap_signed, wrap_tau};
use crate::angle::Configuration;
use crate::density::{cell_moments, Density, CELL_SLACK};
use crate::error::{Error, Result};

/// Generators closer than this cannot be partitioned.
pub const MIN_GAP: f64 = 1e-10;

/// Below this the circular mean of a cell has no direction.
pub const MIN_RESULTANT: f64 = 1e-14;

/// How a cell's centroid is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMode {
    /// `q_j + N_j / D_j`: the minimiser of `∫ d_G(θ, q)² h` over the cell.
    #[default]
    Intrinsic,
    /// `arg ∫ e^{iθ} h` over the cell.
    Extrinsic,
}

/// Boundaries of the Voronoi cells of a configuration.
///
/// `boundaries[j]` bisects the arc from point `j` to point `j+1 mod n`, so
/// cell `j` is the forward arc `(boundaries[j-1], boundaries[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    pub boundaries: Vec<f64>,
}

impl VoronoiPartition {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    pub fn cell(&self, j: usize) -> (f64, f64) {
        let n = self.len();
        (self.boundaries[(j + n - 1) % n], self.boundaries[j])
    }

    pub fn cell_length(&self, j: usize) -> f64 {
        let (a, b) = self.cell(j);
        let len = wrap_tau(b - a);
        // n = 2 with both boundaries coincident would read as zero
        if len == 0.0 {
            2.0 * PI
        } else {
            len
        }
    }

    /// Index of the cell whose arc contains `theta`.
    pub fn locate(&self, theta: f64) -> usize {
        (0..self.len())
            .find(|&j| {
                let (a, _) = self.cell(j);
                wrap_tau(theta - a) < self.cell_length(j)
            })
            .unwrap_or(0)
    }
}

// Cells in local unwrapped coordinates: (q_j − g_{j−1}/2, q_j + g_j/2).
fn cells_raw(points: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = points.len();
    let gaps = cyclic_gaps(points);
    if let Some(g) = gaps.iter().copied().find(|&g| g <= MIN_GAP) {
        return Err(Error::Degenerate(format!("generators {g:e} apart")));
    }
    (0..n)
        .map(|j| {
            let left = 0.5 * gaps[(j + n - 1) % n];
            let right = 0.5 * gaps[j];
            if left + right > PI + CELL_SLACK {
                return Err(Error::CellTooLarge {
                    length: left + right,
                });
            }
            Ok((points[j] - left, points[j] + right))
        })
        .collect()
}

pub fn voronoi(config: &Configuration) -> Result<VoronoiPartition> {
    let cells = cells_raw(config.points())?;
    Ok(VoronoiPartition {
        boundaries: cells.into_iter().map(|(_, b)| wrap_tau(b)).collect(),
    })
}

/// One Lloyd update keeping labels: entry `j` is the centroid of the cell of
/// `points[j]`, expressed near `points[j]` and left unwrapped.
///
/// `points` must be in cyclic order but need not be wrapped or sorted, which
/// is what finite differencing needs.
pub fn lloyd_map_labeled<D: Density + ?Sized>(
    points: &[f64],
    density: &D,
    mode: CentroidMode,
) -> Result<Vec<f64>> {
    let cells = cells_raw(points)?;
    points
        .iter()
        .zip(cells)
        .enumerate()
        .map(|(j, (&q, (a, b)))| {
            let m = cell_moments(density, a, b, q)?;
            if !(m.mass > 0.0) {
                return Err(Error::UndefinedCentroid {
                    cell: j,
                    modulus: 0.0,
                });
            }
            match mode {
                CentroidMode::Intrinsic => Ok(q + m.local_first / m.mass),
                CentroidMode::Extrinsic => {
                    let (re, im) = m.circular_first;
                    let modulus = re.hypot(im) / m.mass;
                    if modulus < MIN_RESULTANT {
                        return Err(Error::UndefinedCentroid { cell: j, modulus });
                    }
                    Ok(q + wrap_signed(im.atan2(re) - q))
                }
            }
        })
        .collect()
}

/// The Lloyd map: centroid update, then wrap and sort.
pub fn lloyd_step<D: Density + ?Sized>(
    config: &Configuration,
    density: &D,
    mode: CentroidMode,
) -> Result<Configuration> {
    sort_config(&lloyd_map_labeled(config.points(), density, mode)?)
}

/// Expected squared geodesic distance to the nearest codepoint.
pub fn distortion<D: Density + ?Sized>(config: &Configuration, density: &D) -> Result<f64> {
    let cells = cells_raw(config.points())?;
    let mut total = 0.0;
    for (&q, (a, b)) in config.points().iter().zip(cells) {
        total += cell_moments(density, a, b, q)?.local_second;
    }
    Ok(total)
}

/// Distance between `T(Q)` and `Q` under the best cyclic alignment.
pub fn fixed_point_residual<D: Density + ?Sized>(
    config: &Configuration,
    density: &D,
    mode: CentroidMode,
) -> Result<f64> {
    aligned_distance(&lloyd_step(config, density, mode)?, config)
}

/// A computed trajectory of the Lloyd map.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub states: Vec<Configuration>,
    /// `residuals[t]` is the distance from `states[t]` to `states[t+1]`.
    pub residuals: Vec<f64>,
    /// `distortions[t]` belongs to `states[t]`.
    pub distortions: Vec<f64>,
    /// Set when a step failed; the orbit holds everything computed before it.
    pub failure: Option<Error>,
}

impl Orbit {
    pub fn last(&self) -> &Configuration {
        self.states.last().expect("an orbit holds its initial state")
    }
}

/// Runs `t_max` Lloyd steps from `q0`.
///
/// With `normalize` set, each new state is drift-corrected after the
/// wrap/sort that `lloyd_step` already performs.
pub fn iterate<D: Density + ?Sized>(
    q0: &Configuration,
    density: &D,
    mode: CentroidMode,
    t_max: usize,
    normalize: bool,
) -> Orbit {
    let mut orbit = Orbit {
        states: vec![q0.clone()],
        residuals: Vec::with_capacity(t_max),
        distortions: Vec::with_capacity(t_max + 1),
        failure: None,
    };
    match distortion(q0, density) {
        Ok(d) => orbit.distortions.push(d),
        Err(e) => {
            orbit.failure = Some(e.at_step(0));
            return orbit;
        }
    }
    for t in 0..t_max {
        let current = orbit.last();
        let step = lloyd_step(current, density, mode).and_then(|next| {
            let next = if normalize { remove_drift(&next) } else { next };
            let residual = aligned_distance(&next, current)?;
            let d = distortion(&next, density)?;
            Ok((next, residual, d))
        });
        match step {
            Ok((next, residual, d)) => {
                orbit.states.push(next);
                orbit.residuals.push(residual);
                orbit.distortions.push(d);
            }
            Err(e) => {
                log::debug!("orbit aborted at step {}: {e}", t + 1);
                orbit.failure = Some(e.at_step(t + 1));
                break;
            }
        }
    }
    orbit
}
