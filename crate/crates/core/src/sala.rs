//! Lloyd iteration with period-2 detection and random escape.
//!
//! Each step is a normalised Lloyd update. A step whose result returns to
//! the state two steps back (`ρ_t < ε`) while still moving (`r_t > η`) is
//! read as a period-2 oscillation, and the state is nudged by zero-mean noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::angle::{aligned_distance, remove_drift, sort_config, Configuration};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::quantizer::{lloyd_step, CentroidMode};

const INIT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalaConfig {
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    pub window: usize,
    pub t_max: usize,
    pub seed: u64,
    pub mode: CentroidMode,
}

impl Default for SalaConfig {
    fn default() -> Self {
        SalaConfig {
            epsilon: 1e-9,
            eta: 1e-4,
            delta: 1e-3,
            window: 5,
            t_max: 10_000,
            seed: 0,
            mode: CentroidMode::Intrinsic,
        }
    }
}

impl SalaConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.eta > self.epsilon
            && self.delta > 0.0
            && self.delta.is_finite()
            && self.eta.is_finite()
            && self.window >= 1
            && self.t_max >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "invalid SALA settings: need 0 < epsilon < eta, delta > 0, window >= 1, t_max >= 1 (got {self:?})"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalaStatus {
    Converged,
    MaxIterations,
    Failed,
}

#[derive(Debug, Clone)]
pub struct SalaTrace {
    /// `residuals[t] = ‖Q(t+1) − Q(t)‖`, taken before any perturbation.
    pub residuals: Vec<f64>,
    /// `rhos[t] = ‖Q(t+1) − Q(t−1)‖`, defined from `t = 2`.
    pub rhos: Vec<Option<f64>>,
    /// Steps `t` after which a perturbation was applied.
    pub perturbations: Vec<usize>,
    /// `Q(0), Q(1), …` as carried into the next step.
    pub states: Vec<Configuration>,
    pub status: SalaStatus,
    pub failure: Option<Error>,
}

impl SalaTrace {
    pub fn terminal(&self) -> &Configuration {
        self.states.last().expect("a trace holds its initial state")
    }

    pub fn perturbed_at(&self, t: usize) -> bool {
        self.perturbations.binary_search(&t).is_ok()
    }
}

/// Aligned wrapped distance between `Q(t+1)` and `Q(t−1)`.
pub fn oscillation_indicator(next: &Configuration, prev2: &Configuration) -> Result<f64> {
    aligned_distance(next, prev2)
}

/// Uniform `[−δ, δ]` draws shifted to zero sample mean.
pub fn zero_mean_noise<R: Rng + ?Sized>(n: usize, delta: f64, rng: &mut R) -> Vec<f64> {
    let mut xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let mean = xi.iter().sum::<f64>() / n as f64;
    for x in &mut xi {
        *x = delta * (*x - mean);
    }
    xi
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs from a random configuration drawn from `cfg.seed`.
pub fn sala_run<D: Density + ?Sized>(density: &D, n: usize, cfg: &SalaConfig) -> Result<SalaTrace> {
    cfg.validate()?;
    let q0 = Configuration::random(n, &mut stream_rng(cfg.seed, INIT_STREAM))?;
    sala_run_from(&q0, density, cfg)
}

pub fn sala_run_from<D: Density + ?Sized>(
    q0: &Configuration,
    density: &D,
    cfg: &SalaConfig,
) -> Result<SalaTrace> {
    sala_with_step(q0, cfg, |q| Ok(remove_drift(&lloyd_step(q, density, cfg.mode)?)))
}

pub(crate) fn sala_with_step(
    q0: &Configuration,
    cfg: &SalaConfig,
    mut step: impl FnMut(&Configuration) -> Result<Configuration>,
) -> Result<SalaTrace> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, NOISE_STREAM);
    let mut trace = SalaTrace {
        residuals: Vec::new(),
        rhos: Vec::new(),
        perturbations: Vec::new(),
        states: vec![q0.clone()],
        status: SalaStatus::MaxIterations,
        failure: None,
    };
    let mut quiet = 0usize;
    for t in 0..cfg.t_max {
        let current = trace.terminal();
        let measured = step(current).and_then(|next| {
            let r = aligned_distance(&next, current)?;
            let rho = if t >= 2 {
                Some(oscillation_indicator(&next, &trace.states[t - 1])?)
            } else {
                None
            };
            Ok((next, r, rho))
        });
        let (mut next, r, rho) = match measured {
            Ok(v) => v,
            Err(e) => {
                log::debug!("SALA aborted at step {}: {e}", t + 1);
                trace.failure = Some(e.at_step(t + 1));
                trace.status = SalaStatus::Failed;
                return Ok(trace);
            }
        };
        trace.residuals.push(r);
        trace.rhos.push(rho);

        quiet = if r < cfg.epsilon { quiet + 1 } else { 0 };
        if quiet >= cfg.window {
            trace.states.push(next);
            trace.status = SalaStatus::Converged;
            return Ok(trace);
        }

        if rho.is_some_and(|rho| rho < cfg.epsilon) && r > cfg.eta {
            let xi = zero_mean_noise(next.len(), cfg.delta, &mut rng);
            let shifted: Vec<f64> = next.points().iter().zip(&xi).map(|(q, x)| q + x).collect();
            match sort_config(&shifted) {
                Ok(p) => next = p,
                Err(e) => {
                    trace.states.push(next);
                    trace.failure = Some(e.at_step(t + 1));
                    trace.status = SalaStatus::Failed;
                    return Ok(trace);
                }
            }
            log::debug!("SALA perturbed at step {t} (r = {r:e})");
            trace.perturbations.push(t);
            quiet = 0;
        }
        trace.states.push(next);
    }
    Ok(trace)
}
