//! Lyapunov spectra by repeated QR re-orthonormalisation.
//!
//! A tangent basis is pushed through the Jacobian at every step of an orbit
//! and re-orthonormalised; the logs of the diagonal of `R` accumulate into
//! the exponents.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{wrap_tau, Configuration};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::linearization::{fd_jacobian, DenseMatrix};
use crate::quantizer::{lloyd_map_labeled, CentroidMode};

/// Per-step floor on `log R_jj`.
pub const LOG_FLOOR: f64 = -50.0;

/// Largest matrix accepted by [`qr_decompose`].
pub const MAX_QR_DIM: usize = 64;

const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct QrPair {
    pub q: DenseMatrix,
    /// Upper triangular with non-negative diagonal.
    pub r: DenseMatrix,
    /// Columns whose diagonal entry fell below the rank tolerance and was
    /// set to zero.
    pub rank_deficient: Vec<bool>,
}

/// Householder QR of a square matrix, signs chosen so that `diag(R) ≥ 0`.
pub fn qr_decompose(a: &DenseMatrix) -> Result<QrPair> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    if n > MAX_QR_DIM {
        return Err(Error::Domain(format!(
            "QR limited to {MAX_QR_DIM} dimensions, got {n}"
        )));
    }
    let mut r = a.clone();
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let x = r[(i, j)];
            if !x.is_finite() {
                return Err(Error::Domain("QR input is not finite".into()));
            }
            scale = scale.max(x.abs());
        }
    }
    let mut q = DenseMatrix::identity(n);
    let mut v = vec![0.0; n];

    for k in 0..n {
        let norm = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        for i in k..n {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vv: f64 = (k..n).map(|i| v[i] * v[i]).sum();
        if vv == 0.0 {
            continue;
        }
        // R ← (I − 2vvᵀ/vᵀv) R
        for j in k..n {
            let s = 2.0 * (k..n).map(|i| v[i] * r[(i, j)]).sum::<f64>() / vv;
            for i in k..n {
                r[(i, j)] -= s * v[i];
            }
        }
        // Q ← Q (I − 2vvᵀ/vᵀv)
        for i in 0..n {
            let s = 2.0 * (k..n).map(|l| q[(i, l)] * v[l]).sum::<f64>() / vv;
            for l in k..n {
                q[(i, l)] -= s * v[l];
            }
        }
    }

    let mut rank_deficient = vec![false; n];
    let tol = RANK_TOL * scale.max(f64::MIN_POSITIVE);
    for k in 0..n {
        for i in k + 1..n {
            r[(i, k)] = 0.0;
        }
        if r[(k, k)] < 0.0 {
            for j in k..n {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
        if r[(k, k)] <= tol {
            r[(k, k)] = 0.0;
            rank_deficient[k] = true;
        }
    }
    Ok(QrPair {
        q,
        r,
        rank_deficient,
    })
}

/// A map together with its Jacobian along orbits.
pub trait TangentMap {
    type State: Clone;

    fn dim(&self) -> usize;
    fn jacobian(&self, state: &Self::State) -> Result<DenseMatrix>;
    fn advance(&self, state: &Self::State) -> Result<Self::State>;
}

/// The Lloyd map on labelled points.
///
/// `advance` applies the raw centroid update and wraps each coordinate
/// without sorting, so a point keeps its label (and its tangent direction)
/// when it crosses the seam.
#[derive(Debug, Clone, Copy)]
pub struct LloydTangentMap<'a, D: ?Sized> {
    pub density: &'a D,
    pub n: usize,
    pub mode: CentroidMode,
    pub eps: f64,
}

impl<D: Density + ?Sized> TangentMap for LloydTangentMap<'_, D> {
    type State = Vec<f64>;

    fn dim(&self) -> usize {
        self.n
    }

    fn jacobian(&self, state: &Vec<f64>) -> Result<DenseMatrix> {
        fd_jacobian(state, self.density, self.mode, self.eps)
    }

    fn advance(&self, state: &Vec<f64>) -> Result<Vec<f64>> {
        let next = lloyd_map_labeled(state, self.density, self.mode)?;
        Ok(next.into_iter().map(wrap_tau).collect())
    }
}

/// A linear map with a fixed Jacobian.
#[derive(Debug, Clone)]
pub struct ConstantJacobianMap {
    pub matrix: DenseMatrix,
}

impl TangentMap for ConstantJacobianMap {
    type State = ();

    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn jacobian(&self, _: &()) -> Result<DenseMatrix> {
        Ok(self.matrix.clone())
    }

    fn advance(&self, _: &()) -> Result<()> {
        Ok(())
    }
}

/// Running sums of `log R_jj` for one tangent basis.
#[derive(Debug, Clone)]
pub struct QrAccumulator {
    basis: DenseMatrix,
    sums: Vec<f64>,
    floored: Vec<bool>,
    steps: usize,
}

impl QrAccumulator {
    pub fn new(dim: usize) -> Self {
        QrAccumulator {
            basis: DenseMatrix::identity(dim),
            sums: vec![0.0; dim],
            floored: vec![false; dim],
            steps: 0,
        }
    }

    pub fn push(&mut self, jacobian: &DenseMatrix) -> Result<()> {
        let qr = qr_decompose(&jacobian.matmul(&self.basis)?)?;
        for (j, sum) in self.sums.iter_mut().enumerate() {
            let d = qr.r[(j, j)];
            if d > LOG_FLOOR.exp() {
                *sum += d.ln();
            } else {
                *sum += LOG_FLOOR;
                self.floored[j] = true;
            }
        }
        self.basis = qr.q;
        self.steps += 1;
        Ok(())
    }

    /// Keeps the basis, drops everything accumulated so far.
    pub fn reset_sums(&mut self) {
        self.sums.iter_mut().for_each(|s| *s = 0.0);
        self.floored.iter_mut().for_each(|f| *f = false);
        self.steps = 0;
    }

    /// Exponents sorted descending, each with its floor flag.
    pub fn finish(&self) -> (Vec<f64>, Vec<bool>) {
        let steps = self.steps.max(1) as f64;
        let mut pairs: Vec<(f64, bool)> = self
            .sums
            .iter()
            .zip(&self.floored)
            .map(|(&s, &f)| (s / steps, f))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        pairs.into_iter().unzip()
    }
}

/// Orthonormal basis of the complement of `(1, …, 1)`, one column per
/// Helmert contrast.
pub fn helmert_basis(n: usize) -> DenseMatrix {
    let mut h = DenseMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            h[(i, k - 1)] = 1.0 / norm;
        }
        h[(k, k - 1)] = -(k as f64) / norm;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentRun {
    pub exponents: Vec<f64>,
    pub floored: Vec<bool>,
    /// Exponents of the Jacobian compressed onto the complement of
    /// `(1, …, 1)`, when requested.
    pub transverse: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TangentOptions {
    /// Also track the Jacobian compressed onto the complement of `(1, …, 1)`.
    pub transverse: bool,
    /// Propagate the tangent basis through the transient and discard its
    /// sums, so sampling starts from an aligned basis rather than `I`.
    pub warm_basis: bool,
}

impl Default for TangentOptions {
    fn default() -> Self {
        TangentOptions {
            transverse: false,
            warm_basis: true,
        }
    }
}

/// Runs `n_trans` transient steps, then `n_iter` sampled tangent steps.
pub fn run_tangent<M: TangentMap>(
    map: &M,
    state: M::State,
    n_trans: usize,
    n_iter: usize,
    opts: TangentOptions,
) -> Result<TangentRun> {
    if n_iter == 0 {
        return Err(Error::Domain("need at least one sampled iteration".into()));
    }
    let n = map.dim();
    let mut state = state;
    let mut full = QrAccumulator::new(n);
    let mut reduced = opts
        .transverse
        .then(|| (helmert_basis(n), QrAccumulator::new(n - 1)));
    for t in 0..n_trans + n_iter {
        let step = t + 1;
        if t == n_trans {
            full.reset_sums();
            if let Some((_, acc)) = reduced.as_mut() {
                acc.reset_sums();
            }
        }
        if t >= n_trans || opts.warm_basis {
            let jac = map.jacobian(&state).map_err(|e| e.at_step(step))?;
            full.push(&jac)?;
            if let Some((h, acc)) = reduced.as_mut() {
                acc.push(&h.transpose().matmul(&jac)?.matmul(h)?)?;
            }
        }
        state = map.advance(&state).map_err(|e| e.at_step(step))?;
    }
    let (exponents, floored) = full.finish();
    Ok(TangentRun {
        exponents,
        floored,
        transverse: reduced.map(|(_, acc)| acc.finish().0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Nats per iteration, sorted descending.
    pub exponents: Vec<f64>,
    pub n_iter: usize,
    pub n_trans: usize,
    pub kappa: Option<f64>,
    pub seed: u64,
    pub floored: Vec<bool>,
    /// Largest exponent transverse to rigid rotation.
    pub transverse_max: f64,
}

impl LyapunovReport {
    pub fn max_exponent(&self) -> f64 {
        self.exponents[0]
    }
}

/// Lyapunov spectrum of the Lloyd map from a seeded random start.
pub fn lyapunov_spectrum<D: Density + ?Sized>(
    density: &D,
    n: usize,
    n_trans: usize,
    n_iter: usize,
    eps: f64,
    seed: u64,
    mode: CentroidMode,
) -> Result<LyapunovReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q0 = Configuration::random(n, &mut rng)?;
    let map = LloydTangentMap {
        density,
        n,
        mode,
        eps,
    };
    let opts = TangentOptions {
        transverse: true,
        warm_basis: true,
    };
    let run = run_tangent(&map, q0.into_points(), n_trans, n_iter, opts)?;
    let transverse_max = run
        .transverse
        .as_ref()
        .and_then(|t| t.first().copied())
        .unwrap_or(f64::NEG_INFINITY);
    Ok(LyapunovReport {
        exponents: run.exponents,
        n_iter,
        n_trans,
        kappa: density.concentration(),
        seed,
        floored: run.floored,
        transverse_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensityModel;
    use crate::linearization::DEFAULT_FD_EPS;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        DenseMatrix::from_rows(&rows).unwrap()
    }

    fn check_qr(a: &DenseMatrix, qr: &QrPair) {
        let n = a.rows();
        let qtq = qr.q.transpose().matmul(&qr.q).unwrap();
        assert!(qtq.max_abs_diff(&DenseMatrix::identity(n)).unwrap() < 1e-10);
        assert!(qr.q.matmul(&qr.r).unwrap().max_abs_diff(a).unwrap() < 1e-10);
        for i in 0..n {
            assert!(qr.r[(i, i)] >= 0.0);
            for j in 0..i {
                assert!(qr.r[(i, j)].abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn qr_trivial_cases() {
        let qr = qr_decompose(&DenseMatrix::identity(4)).unwrap();
        assert_eq!(qr.q, DenseMatrix::identity(4));
        assert_eq!(qr.r, DenseMatrix::identity(4));
        let d = DenseMatrix::from_diagonal(&[2.0, 3.0]);
        let qr = qr_decompose(&d).unwrap();
        assert!(qr.q.max_abs_diff(&DenseMatrix::identity(2)).unwrap() < 1e-15);
        assert!(qr.r.max_abs_diff(&d).unwrap() < 1e-15);
    }

    #[test]
    fn qr_random_matrix() {
        let a = random_matrix(5, 11);
        let qr = qr_decompose(&a).unwrap();
        check_qr(&a, &qr);
        assert!(qr.rank_deficient.iter().all(|&f| !f));
    }

    #[test]
    fn qr_negative_diagonal_flipped() {
        let a = DenseMatrix::from_diagonal(&[-2.0, 3.0, -0.5]);
        let qr = qr_decompose(&a).unwrap();
        check_qr(&a, &qr);
        assert_abs_diff_eq!(qr.r[(0, 0)], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.r[(2, 2)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn qr_rank_deficient() {
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 1.0],
            vec![3.0, 6.0, 0.0],
        ])
        .unwrap();
        let qr = qr_decompose(&a).unwrap();
        assert_eq!(qr.rank_deficient, vec![false, true, false]);
        let qtq = qr.q.transpose().matmul(&qr.q).unwrap();
        assert!(qtq.max_abs_diff(&DenseMatrix::identity(3)).unwrap() < 1e-10);
        assert!(qr.q.matmul(&qr.r).unwrap().max_abs_diff(&a).unwrap() < 1e-10);

        let qr = qr_decompose(&DenseMatrix::zeros(3, 3)).unwrap();
        assert_eq!(qr.q, DenseMatrix::identity(3));
        assert!(qr.rank_deficient.iter().all(|&f| f));
    }

    #[test]
    fn qr_rejects_bad_input() {
        assert!(qr_decompose(&DenseMatrix::zeros(2, 3)).is_err());
        let mut a = DenseMatrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(qr_decompose(&a).is_err());
        assert!(qr_decompose(&DenseMatrix::identity(MAX_QR_DIM + 1)).is_err());
    }

    proptest! {
        #[test]
        fn qr_invariants(n in 1usize..9, seed in any::<u64>()) {
            let a = random_matrix(n, seed);
            check_qr(&a, &qr_decompose(&a).unwrap());
        }
    }

    #[test]
    fn helmert_is_orthonormal_complement() {
        for n in 2..9 {
            let h = helmert_basis(n);
            let hth = h.transpose().matmul(&h).unwrap();
            assert!(hth.max_abs_diff(&DenseMatrix::identity(n - 1)).unwrap() < 1e-14);
            for k in 0..n - 1 {
                assert!(h.column(k).iter().sum::<f64>().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn diagonal_stub_exact() {
        let map = ConstantJacobianMap {
            matrix: DenseMatrix::from_diagonal(&[0.25, 0.5]),
        };
        let run = run_tangent(&map, (), 0, 100, TangentOptions::default()).unwrap();
        assert_abs_diff_eq!(run.exponents[0], 0.5f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(run.exponents[1], 0.25f64.ln(), epsilon = 1e-10);
        assert!(run.transverse.is_none());
    }

    #[test]
    fn triangular_stub_and_sum_rule() {
        // eigenvalues are the diagonal; det is their product
        let matrix = DenseMatrix::from_rows(&[
            vec![0.9, 0.3, -0.2],
            vec![0.0, 0.4, 0.5],
            vec![0.0, 0.0, -1.5],
        ])
        .unwrap();
        let map = ConstantJacobianMap { matrix };
        let run = run_tangent(&map, (), 0, 1000, TangentOptions::default()).unwrap();
        let expected = [1.5f64.ln(), 0.9f64.ln(), 0.4f64.ln()];
        for (got, want) in run.exponents.iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        let log_det = (0.9f64 * 0.4 * 1.5).ln();
        assert_abs_diff_eq!(run.exponents.iter().sum::<f64>(), log_det, epsilon = 1e-6);
    }

    #[test]
    fn singular_stub_is_floored() {
        let map = ConstantJacobianMap {
            matrix: DenseMatrix::from_diagonal(&[0.5, 0.0]),
        };
        let run = run_tangent(&map, (), 0, 10, TangentOptions::default()).unwrap();
        assert_abs_diff_eq!(run.exponents[1], LOG_FLOOR, epsilon = 1e-12);
        assert_eq!(run.floored, vec![false, true]);
    }

    #[test]
    fn uniform_three_points() {
        let r = lyapunov_spectrum(
            &DensityModel::uniform(),
            3,
            200,
            500,
            DEFAULT_FD_EPS,
            5,
            CentroidMode::Intrinsic,
        )
        .unwrap();
        let quarter = 0.25f64.ln();
        assert_abs_diff_eq!(r.exponents[0], 0.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.exponents[1], quarter, epsilon = 1e-3);
        assert_abs_diff_eq!(r.exponents[2], quarter, epsilon = 1e-3);
        assert_abs_diff_eq!(r.transverse_max, quarter, epsilon = 1e-3);
        assert!(r.exponents.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn uniform_four_points_hits_floor() {
        let r = lyapunov_spectrum(
            &DensityModel::uniform(),
            4,
            100,
            50,
            DEFAULT_FD_EPS,
            1,
            CentroidMode::Intrinsic,
        )
        .unwrap();
        // the zero eigenvalue survives only as finite-difference noise
        assert!(r.exponents.iter().all(|&e| e >= LOG_FLOOR));
        assert!(r.exponents[3] < -10.0);
        assert_abs_diff_eq!(r.transverse_max, 0.5f64.ln(), epsilon = 1e-3);
    }

    #[test]
    fn cold_basis_carries_alignment_bias() {
        // starting from e_1, the neutral direction (1,1,1)/√3 is reached with
        // total log-growth log(1/√3)
        let d = DensityModel::uniform();
        let map = LloydTangentMap {
            density: &d,
            n: 3,
            mode: CentroidMode::Intrinsic,
            eps: DEFAULT_FD_EPS,
        };
        let q = Configuration::equally_spaced(3).unwrap().into_points();
        let cold = TangentOptions {
            transverse: false,
            warm_basis: false,
        };
        let run = run_tangent(&map, q.clone(), 0, 500, cold).unwrap();
        assert_abs_diff_eq!(run.exponents[0] * 500.0, -(3f64.sqrt().ln()), epsilon = 1e-5);
        let warm = run_tangent(&map, q, 200, 500, TangentOptions::default()).unwrap();
        assert_abs_diff_eq!(warm.exponents[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn deterministic() {
        let vm = DensityModel::von_mises(3.0, 0.0).unwrap();
        let run = |seed| {
            lyapunov_spectrum(&vm, 5, 30, 40, DEFAULT_FD_EPS, seed, CentroidMode::Intrinsic).unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9).exponents, run(10).exponents);
    }

    #[test]
    fn von_mises_negative_transverse() {
        for kappa in [0.5, 4.0, 10.0] {
            let vm = DensityModel::von_mises(kappa, 0.0).unwrap();
            let r = lyapunov_spectrum(&vm, 8, 100, 100, DEFAULT_FD_EPS, 3, CentroidMode::Intrinsic)
                .unwrap();
            assert!(r.max_exponent() <= 1e-3, "kappa {kappa}: {:?}", r.exponents);
            assert!(r.transverse_max < 0.0);
        }
    }

    #[test]
    fn rejects_zero_iterations() {
        let map = ConstantJacobianMap {
            matrix: DenseMatrix::identity(2),
        };
        assert!(run_tangent(&map, (), 0, 0, TangentOptions::default()).is_err());
    }
}
