//! Jacobians of the Lloyd map and circulant spectra.
//!
//! At the equally spaced configuration the Jacobian is the periodic
//! tridiagonal circulant with diagonal `α = 1 − π h(π/n) / (nM)` and
//! neighbour coupling `β = π h(π/n) / (2nM)`, where `M` is the mass of the
//! reference cell `(−π/n, π/n)`. Its eigenvalues are
//! `λ_m = α + 2β cos(2πm/n)`. Anywhere else the Jacobian is estimated by
//! centred finite differences.

use std::f64::consts::{PI, TAU};
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::angle::{cyclic_gaps, wrap_signed};
use crate::density::{arc_mass, Density};
use crate::error::{Error, Result};
use crate::quantizer::{lloyd_map_labeled, CentroidMode};

pub const DEFAULT_FD_EPS: f64 = 1e-6;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn matvec(a: &DenseMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if a.cols != v.len() {
        return Err(Error::DimensionMismatch {
            expected: a.cols,
            found: v.len(),
        });
    }
    Ok((0..a.rows)
        .map(|i| a.row(i).iter().zip(v).map(|(x, y)| x * y).sum())
        .collect())
}

/// Linearisation of the Lloyd map at the equally spaced configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculantJacobian {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl CirculantJacobian {
    /// Builds `(1 − F, F/2)`; `F = 2β` is the stability functional.
    pub fn from_functional(n: usize, f: f64) -> Self {
        CirculantJacobian {
            n,
            alpha: 1.0 - f,
            beta: 0.5 * f,
        }
    }
}

/// `(h(c + π/n), M)` for the reference cell `(c − π/n, c + π/n)` centred on
/// the density's symmetry axis `c`.
pub(crate) fn reference_cell<D: Density + ?Sized>(n: usize, density: &D) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::Degenerate(format!("need n >= 2, got {n}")));
    }
    let half = PI / n as f64;
    let c = density.axis();
    let mass = arc_mass(density, c - half, c + half)?;
    Ok((density.eval(c + half), mass))
}

pub fn symmetric_jacobian<D: Density + ?Sized>(n: usize, density: &D) -> Result<CirculantJacobian> {
    let (edge, mass) = reference_cell(n, density)?;
    let f = PI / (n as f64 * mass) * edge;
    Ok(CirculantJacobian::from_functional(n, f))
}

/// Periodic tridiagonal matrix of a circulant Jacobian. For `n = 2` both
/// neighbours are the same index, so the coupling is `2β`.
pub fn expand(jac: &CirculantJacobian) -> DenseMatrix {
    let n = jac.n;
    let mut m = DenseMatrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] += jac.alpha;
        m[(j, (j + 1) % n)] += jac.beta;
        m[(j, (j + n - 1) % n)] += jac.beta;
    }
    m
}

/// Eigenvalues of a circulant Jacobian by Fourier mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub modes: Vec<usize>,
    pub eigenvalues: Vec<f64>,
}

pub fn circulant_eigenvalues(jac: &CirculantJacobian) -> ModeSpectrum {
    let n = jac.n;
    let eigenvalues = (0..n)
        .map(|m| {
            // fold onto m ≤ n/2 so that λ_m and λ_{n−m} agree bitwise
            let k = m.min(n - m);
            jac.alpha + 2.0 * jac.beta * (TAU * k as f64 / n as f64).cos()
        })
        .collect();
    ModeSpectrum {
        modes: (0..n).collect(),
        eigenvalues,
    }
}

/// Centred finite-difference Jacobian of the label-preserving Lloyd map.
///
/// Perturbed configurations are not re-sorted; column `k` is
/// `wrap_pi(T(Q + εe_k) − T(Q − εe_k)) / 2ε`.
pub fn fd_jacobian<D: Density + ?Sized>(
    points: &[f64],
    density: &D,
    mode: CentroidMode,
    eps: f64,
) -> Result<DenseMatrix> {
    if !(1e-9..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!(
            "finite-difference step {eps} outside [1e-9, 1e-3]"
        )));
    }
    let n = points.len();
    let gap = cyclic_gaps(points).into_iter().fold(f64::INFINITY, f64::min);
    if gap < 2.0 * eps {
        return Err(Error::PerturbationTooLarge { eps, gap });
    }
    let mut jac = DenseMatrix::zeros(n, n);
    let mut shifted = points.to_vec();
    for k in 0..n {
        shifted[k] = points[k] + eps;
        let plus = lloyd_map_labeled(&shifted, density, mode)?;
        shifted[k] = points[k] - eps;
        let minus = lloyd_map_labeled(&shifted, density, mode)?;
        shifted[k] = points[k];
        for j in 0..n {
            jac[(j, k)] = wrap_signed(plus[j] - minus[j]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::Configuration;
    use crate::density::DensityModel;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_entries() {
        for n in 2..10 {
            let j = symmetric_jacobian(n, &DensityModel::uniform()).unwrap();
            assert_abs_diff_eq!(j.alpha, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(j.beta, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn row_sum_identity() {
        for kappa in [0.0, 0.5, 1.0, 5.0, 50.0] {
            for n in [2, 3, 4, 7, 16] {
                let vm = DensityModel::von_mises(kappa, 0.4).unwrap();
                let j = symmetric_jacobian(n, &vm).unwrap();
                assert!((j.alpha + 2.0 * j.beta - 1.0).abs() < 1e-12);
                assert!(j.beta > 0.0);
            }
        }
    }

    #[test]
    fn von_mises_entries_from_direct_integration() {
        // independent route: trapezoid rule on the unnormalised kernel
        let (kappa, n) = (1.0_f64, 4usize);
        let half = PI / n as f64;
        let m = 20000;
        let h = 2.0 * half / m as f64;
        let mut mass = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            mass += w * (kappa * (-half + i as f64 * h).cos()).exp();
        }
        mass *= h;
        let beta = 0.5 * PI / (n as f64 * mass) * (kappa * half.cos()).exp();
        let j = symmetric_jacobian(n, &DensityModel::von_mises(kappa, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(j.beta, beta, epsilon = 1e-8);
    }

    #[test]
    fn expand_structure() {
        let j3 = CirculantJacobian { n: 3, alpha: 0.5, beta: 0.25 };
        let m = expand(&j3);
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == c { 0.5 } else { 0.25 };
                assert_eq!(m[(r, c)], expected);
            }
        }
        let m4 = expand(&CirculantJacobian { n: 4, alpha: 0.5, beta: 0.25 });
        assert_eq!(m4[(0, 2)], 0.0);
        for r in 1..4 {
            for c in 0..4 {
                assert_eq!(m4[(r, c)], m4[(r - 1, (c + 3) % 4)]);
            }
        }
        for r in 0..4 {
            assert_abs_diff_eq!(m4.row(r).iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
        let m2 = expand(&CirculantJacobian { n: 2, alpha: 0.5, beta: 0.25 });
        assert_eq!(m2.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn spectrum_examples() {
        let u = DensityModel::uniform();
        let s4 = circulant_eigenvalues(&symmetric_jacobian(4, &u).unwrap());
        for (got, want) in s4.eigenvalues.iter().zip([1.0, 0.5, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        let s3 = circulant_eigenvalues(&symmetric_jacobian(3, &u).unwrap());
        for (got, want) in s3.eigenvalues.iter().zip([1.0, 0.25, 0.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn matvec_examples() {
        let v = [1.0, -2.0, 3.5];
        assert_eq!(matvec(&DenseMatrix::identity(3), &v).unwrap(), v.to_vec());
        assert_eq!(matvec(&DenseMatrix::zeros(3, 3), &v).unwrap(), vec![0.0; 3]);
        assert!(matvec(&DenseMatrix::identity(2), &v).is_err());
        let jac = symmetric_jacobian(6, &DensityModel::von_mises(2.0, 0.0).unwrap()).unwrap();
        let spec = circulant_eigenvalues(&jac);
        let a = expand(&jac);
        for m in 0..6 {
            let mode: Vec<f64> = (0..6).map(|k| (TAU * (m * k) as f64 / 6.0).cos()).collect();
            let av = matvec(&a, &mode).unwrap();
            for (x, y) in av.iter().zip(&mode) {
                assert_abs_diff_eq!(*x, spec.eigenvalues[m] * y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fd_matches_circulant_for_uniform() {
        let u = DensityModel::uniform();
        for n in 2..=8 {
            let q = Configuration::equally_spaced(n).unwrap();
            let fd = fd_jacobian(q.points(), &u, CentroidMode::Intrinsic, 1e-6).unwrap();
            let exact = expand(&symmetric_jacobian(n, &u).unwrap());
            assert!(fd.max_abs_diff(&exact).unwrap() < 1e-6, "n = {n}");
        }
    }

    #[test]
    fn fd_neutral_mode_along_uniform_orbit() {
        let u = DensityModel::uniform();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let q = Configuration::random(5, &mut rng).unwrap();
            let fd = fd_jacobian(q.points(), &u, CentroidMode::Intrinsic, 1e-6).unwrap();
            for x in matvec(&fd, &[1.0; 5]).unwrap() {
                assert_abs_diff_eq!(x, 1.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn fd_second_order() {
        let vm = DensityModel::von_mises(3.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = Configuration::random(4, &mut rng).unwrap();
        let coarse = fd_jacobian(q.points(), &vm, CentroidMode::Intrinsic, 1e-3).unwrap();
        let mid = fd_jacobian(q.points(), &vm, CentroidMode::Intrinsic, 5e-4).unwrap();
        let fine = fd_jacobian(q.points(), &vm, CentroidMode::Intrinsic, 2.5e-4).unwrap();
        let d1 = coarse.max_abs_diff(&mid).unwrap();
        let d2 = mid.max_abs_diff(&fine).unwrap();
        // halving ε divides the truncation change by about four
        assert!(d2 < 0.4 * d1, "{d1:e} -> {d2:e}");
    }

    #[test]
    fn fd_rejects_bad_steps() {
        let u = DensityModel::uniform();
        let q = [0.0, 1e-4, 3.0];
        assert!(matches!(
            fd_jacobian(&q, &u, CentroidMode::Intrinsic, 1e-3),
            Err(Error::PerturbationTooLarge { .. })
        ));
        assert!(fd_jacobian(&q, &u, CentroidMode::Intrinsic, 1e-2).is_err());
    }

    #[test]
    fn mode_symmetry_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.gen_range(2..20);
            let jac = CirculantJacobian::from_functional(n, rng.gen_range(0.0..2.0));
            let s = circulant_eigenvalues(&jac);
            for m in 1..n {
                assert_eq!(s.eigenvalues[m], s.eigenvalues[n - m]);
            }
            let bound = (jac.alpha.abs() + 2.0 * jac.beta).max(1.0);
            assert!(s.eigenvalues.iter().all(|l| l.abs() <= bound + 1e-12));
        }
    }
}
