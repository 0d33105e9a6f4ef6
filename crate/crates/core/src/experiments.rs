//! Batch drivers: stability sweeps, eigenvalue scans, Lyapunov scans and
//! SALA residual traces.
//!
//! Grid points are independent. They run on a dedicated rayon pool and are
//! merged in grid order, so output never depends on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::Configuration;
use crate::density::{DensityModel, KAPPA_MAX};
use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov_spectrum, LyapunovReport};
use crate::quantizer::{iterate, CentroidMode};
use crate::sala::{sala_run, SalaConfig, SalaTrace};
use crate::stability::classify;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityFamily {
    Uniform,
    VonMises { mu: f64 },
}

impl Default for DensityFamily {
    fn default() -> Self {
        DensityFamily::VonMises { mu: 0.0 }
    }
}

impl DensityFamily {
    /// The uniform family ignores `kappa`.
    pub fn model(&self, kappa: f64) -> Result<DensityModel> {
        match *self {
            DensityFamily::Uniform => Ok(DensityModel::uniform()),
            DensityFamily::VonMises { mu } => DensityModel::von_mises(kappa, mu),
        }
    }
}

/// SplitMix64 finaliser, used to derive independent per-item seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n_kappa` evenly spaced values from `kappa_min` to `kappa_max`.
pub fn kappa_grid(kappa_min: f64, kappa_max: f64, n_kappa: usize) -> Result<Vec<f64>> {
    if n_kappa < 2 {
        return Err(Error::Domain(format!("need at least 2 grid points, got {n_kappa}")));
    }
    if !(0.0..=KAPPA_MAX).contains(&kappa_min)
        || !(kappa_min..=KAPPA_MAX).contains(&kappa_max)
    {
        return Err(Error::Domain(format!(
            "concentration range [{kappa_min}, {kappa_max}] must be ordered within [0, {KAPPA_MAX}]"
        )));
    }
    let step = (kappa_max - kappa_min) / (n_kappa - 1) as f64;
    Ok((0..n_kappa)
        .map(|i| {
            if i + 1 == n_kappa {
                kappa_max
            } else {
                kappa_min + i as f64 * step
            }
        })
        .collect())
}

fn check_grid(kappas: &[f64]) -> Result<()> {
    match kappas.iter().find(|k| !(0.0..=KAPPA_MAX).contains(*k)) {
        Some(k) => Err(Error::Domain(format!(
            "concentration {k} outside [0, {KAPPA_MAX}]"
        ))),
        None => Ok(()),
    }
}

/// Maps `f` over `items` on a pool of `threads` workers, keeping input order.
pub fn par_map_ordered<T, U, F>(threads: usize, items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if threads == 0 {
        return Err(Error::Domain("thread count must be at least 1".into()));
    }
    if threads == 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub n_kappa: usize,
    pub n: usize,
    pub n_iter: usize,
    pub n_trans: usize,
    pub seed: u64,
    pub family: DensityFamily,
    pub trials: usize,
    pub mode: CentroidMode,
}

impl SweepParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Degenerate(format!("need n >= 2, got {}", self.n)));
        }
        if self.n_trans >= self.n_iter {
            return Err(Error::Domain(format!(
                "transient {} must be shorter than the run {}",
                self.n_trans, self.n_iter
            )));
        }
        if self.trials == 0 {
            return Err(Error::Domain("need at least one trial".into()));
        }
        kappa_grid(self.kappa_min, self.kappa_max, self.n_kappa).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kappa: f64,
    pub t: usize,
    pub j: usize,
    pub angle: f64,
    pub trial: usize,
    pub trial_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepRow {
    Record(SweepRecord),
    /// Stands in for every record of a failed `(κ, trial)` run.
    Failed { kappa: f64, trial: usize, error: String },
}

impl SweepRow {
    pub fn kappa(&self) -> f64 {
        match self {
            SweepRow::Record(r) => r.kappa,
            SweepRow::Failed { kappa, .. } => *kappa,
        }
    }
}

/// Post-transient codepoints of normalised Lloyd orbits across a κ grid.
pub fn stability_sweep(params: &SweepParams, threads: usize) -> Result<Vec<SweepRow>> {
    params.validate()?;
    let grid = kappa_grid(params.kappa_min, params.kappa_max, params.n_kappa)?;
    let items: Vec<(usize, f64, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| (0..params.trials).map(move |trial| (i, k, trial)))
        .collect();
    let blocks = par_map_ordered(threads, &items, |&(i, kappa, trial)| {
        let index = (i * params.trials + trial) as u64;
        let trial_seed = derive_seed(params.seed, index);
        sweep_one(params, kappa, trial, trial_seed).unwrap_or_else(|e| {
            log::info!("sweep: kappa = {kappa}, trial {trial} failed: {e}");
            vec![SweepRow::Failed {
                kappa,
                trial,
                error: e.to_string(),
            }]
        })
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

fn sweep_one(params: &SweepParams, kappa: f64, trial: usize, trial_seed: u64) -> Result<Vec<SweepRow>> {
    let model = params.family.model(kappa)?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let q0 = Configuration::random(params.n, &mut rng)?;
    let orbit = iterate(&q0, &model, params.mode, params.n_iter, true);
    if let Some(e) = orbit.failure {
        return Err(e);
    }
    let mut rows = Vec::with_capacity((params.n_iter - params.n_trans) * params.n);
    for (t, state) in orbit.states.iter().enumerate().skip(params.n_trans + 1) {
        for (j, &angle) in state.points().iter().enumerate() {
            rows.push(SweepRow::Record(SweepRecord {
                kappa,
                t,
                j,
                angle,
                trial,
                trial_seed,
            }));
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub kappa: f64,
    pub lambda_min: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub bound: f64,
}

/// Smallest circulant eigenvalue, `F` and the flip bound for von Mises
/// densities over a κ grid.
pub fn eigen_scan(n: usize, kappas: &[f64]) -> Result<Vec<ScanRecord>> {
    check_grid(kappas)?;
    kappas
        .iter()
        .map(|&kappa| {
            let r = classify(n, &DensityModel::von_mises(kappa, 0.0)?)?;
            Ok(ScanRecord {
                kappa,
                lambda_min: r.lambda_min,
                f: r.f,
                bound: r.bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub n: usize,
    pub n_trans: usize,
    pub n_iter: usize,
    pub eps: f64,
    pub seed: u64,
    pub mode: CentroidMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub kappa: f64,
    pub report: Option<LyapunovReport>,
    pub error: Option<String>,
}

/// One Lyapunov spectrum per κ, all from the same seed.
pub fn lyapunov_scan(
    kappas: &[f64],
    params: &LyapunovParams,
    family: DensityFamily,
    threads: usize,
) -> Result<Vec<LyapunovRow>> {
    check_grid(kappas)?;
    par_map_ordered(threads, kappas, |&kappa| {
        let run = family.model(kappa).and_then(|model| {
            lyapunov_spectrum(
                &model,
                params.n,
                params.n_trans,
                params.n_iter,
                params.eps,
                params.seed,
                params.mode,
            )
        });
        match run {
            Ok(report) => LyapunovRow {
                kappa,
                report: Some(report),
                error: None,
            },
            Err(e) => {
                log::info!("lyapunov: kappa = {kappa} failed: {e}");
                LyapunovRow {
                    kappa,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub residual: f64,
    /// NaN where the indicator is undefined.
    pub rho: f64,
    pub perturbed: bool,
}

pub fn trace_rows(trace: &SalaTrace) -> Vec<TraceRow> {
    trace
        .residuals
        .iter()
        .zip(&trace.rhos)
        .enumerate()
        .map(|(t, (&residual, rho))| TraceRow {
            t,
            residual,
            rho: rho.unwrap_or(f64::NAN),
            perturbed: trace.perturbed_at(t),
        })
        .collect()
}

/// Runs SALA and flattens its trace; a mid-run failure is returned as an error.
pub fn residual_trace(model: &DensityModel, n: usize, cfg: &SalaConfig) -> Result<(SalaTrace, Vec<TraceRow>)> {
    let trace = sala_run(model, n, cfg)?;
    if let Some(e) = &trace.failure {
        return Err(e.clone());
    }
    let rows = trace_rows(&trace);
    Ok((trace, rows))
}

/// Least-squares slope of `ln r_t` against `t` over `residuals[from..]`,
/// skipping non-positive entries.
pub fn log_residual_slope(residuals: &[f64], from: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = residuals
        .iter()
        .enumerate()
        .skip(from)
        .filter(|(_, &r)| r > 0.0)
        .map(|(t, &r)| (t as f64, r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / m, b + y / m));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
    });
    Some(sxy / sxx)
}
