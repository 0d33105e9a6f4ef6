//! `circloyd`: command-line driver for the circle Lloyd-map library.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or I/O failure.

mod svg;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use circloyd::angle::{sort_config, Configuration};
use circloyd::experiments::{
    eigen_scan, kappa_grid, lyapunov_scan, residual_trace, stability_sweep, DensityFamily,
    LyapunovParams, LyapunovRow, ScanRecord, SweepParams, SweepRow,
};
use circloyd::export;
use circloyd::linearization::{
    circulant_eigenvalues, expand, fd_jacobian, symmetric_jacobian, DEFAULT_FD_EPS,
};
use circloyd::quantizer::{fixed_point_residual, iterate, lloyd_step, CentroidMode};
use circloyd::sala::{SalaConfig, SalaStatus};
use circloyd::stability::{classify, critical_kappa, CriticalKappa};
use circloyd::DensityModel;

use svg::{PlotKind, PlotSpec};

/// A request the user has to fix; reported with exit code 1.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "circloyd", version, about = "Lloyd quantization on the circle as a dynamical system")]
struct Cli {
    /// Worker threads for grid experiments.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Post-transient codepoints of normalised Lloyd orbits over a κ grid.
    Sweep(SweepArgs),
    /// Circulant spectrum at the equally spaced codebook, or a κ scan of λ_min.
    Eigen(EigenArgs),
    /// λ_min against the ±1 references over a κ grid.
    Fscan(FscanArgs),
    /// Lyapunov spectra for one κ or a κ grid.
    Lyapunov(LyapunovArgs),
    /// Stability-aware Lloyd run and its residual trace.
    Sala(SalaArgs),
    /// Finite-difference and analytic Jacobians.
    Jacobian(JacobianArgs),
    /// Search for a flip of the critical mode in κ.
    CriticalKappa(CriticalArgs),
    /// Distortion and residual along a Lloyd orbit.
    Distortion(DistortionArgs),
    /// A single Lloyd step.
    Step(StepArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DensityArg {
    Uniform,
    VonMises,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Intrinsic,
    Extrinsic,
}

impl From<ModeArg> for CentroidMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Intrinsic => CentroidMode::Intrinsic,
            ModeArg::Extrinsic => CentroidMode::Extrinsic,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct DensityOpts {
    #[arg(long, value_enum, default_value = "von-mises")]
    density: DensityArg,
    /// Mean direction (radians).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, value_enum, default_value = "intrinsic")]
    mode: ModeArg,
}

impl DensityOpts {
    fn family(&self) -> DensityFamily {
        match self.density {
            DensityArg::Uniform => DensityFamily::Uniform,
            DensityArg::VonMises => DensityFamily::VonMises { mu: self.mu },
        }
    }
}

#[derive(Args, Debug)]
struct GridOpts {
    #[arg(long = "kappa-min", default_value_t = 0.0)]
    kappa_min: f64,
    #[arg(long = "kappa-max", default_value_t = 10.0)]
    kappa_max: f64,
    /// Number of κ grid points.
    #[arg(long, default_value_t = 20)]
    nk: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 200)]
    trans: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[command(flatten)]
    density: DensityOpts,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct EigenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[command(flatten)]
    density: DensityOpts,
    /// Scan this many κ values between --kappa-min and --kappa-max instead.
    #[arg(long)]
    nk: Option<usize>,
    #[arg(long = "kappa-min", default_value_t = 0.0)]
    kappa_min: f64,
    #[arg(long = "kappa-max", default_value_t = 50.0)]
    kappa_max: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct FscanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "kappa-min", default_value_t = 0.0)]
    kappa_min: f64,
    #[arg(long = "kappa-max", default_value_t = 50.0)]
    kappa_max: f64,
    #[arg(long, default_value_t = 51)]
    nk: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LyapunovArgs {
    #[arg(long)]
    n: usize,
    /// Single concentration; overrides the grid.
    #[arg(long)]
    kappa: Option<f64>,
    #[command(flatten)]
    grid: GridOpts,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 200)]
    trans: usize,
    #[arg(long = "eps-fd", default_value_t = DEFAULT_FD_EPS)]
    eps_fd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    density: DensityOpts,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SalaArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[command(flatten)]
    density: DensityOpts,
    #[arg(long, default_value_t = 1e-9)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    eta: f64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 10_000)]
    tmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct JacobianArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[command(flatten)]
    density: DensityOpts,
    /// Comma-separated angles; the equally spaced codebook when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    points: Option<Vec<f64>>,
    #[arg(long = "eps-fd", default_value_t = DEFAULT_FD_EPS)]
    eps_fd: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "kappa-min", default_value_t = 0.0)]
    kappa_min: f64,
    #[arg(long = "kappa-max", default_value_t = 100.0)]
    kappa_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct DistortionArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[command(flatten)]
    density: DensityOpts,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    points: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Apply drift removal after every step.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct StepArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[command(flatten)]
    density: DensityOpts,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    points: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

/// Where a command's bytes go, plus the format they are in.
struct Sink<'a> {
    output: &'a Output,
    format: Format,
}

impl<'a> Sink<'a> {
    fn new(output: &'a Output, default: Format, allowed: &[Format]) -> Result<Self> {
        let format = output.format.unwrap_or(default);
        if !allowed.contains(&format) {
            return Err(usage(format!(
                "format {format:?} is not available here (choose from {allowed:?})"
            )));
        }
        Ok(Sink { output, format })
    }

    fn write(&self, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        match &self.output.out {
            Some(path) => {
                let file = File::create(path)
                    .with_context(|| format!("cannot create {}", path.display()))?;
                let mut w = BufWriter::new(file);
                f(&mut w)?;
                w.flush().with_context(|| format!("cannot write {}", path.display()))?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                f(&mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&self, value: &T) -> Result<()> {
        self.write(|w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn svg(&self, spec: &PlotSpec) -> Result<()> {
        let rendered = svg::render(spec);
        if rendered.dropped > 0 {
            log::warn!("dropped {} non-finite points from the plot", rendered.dropped);
        }
        self.write(|w| Ok(w.write_all(rendered.svg.as_bytes())?))
    }
}

fn model(family: DensityFamily, kappa: f64) -> Result<DensityModel> {
    Ok(family.model(kappa)?)
}

fn start_config(points: &Option<Vec<f64>>, n: usize, seed: u64) -> Result<Configuration> {
    match points {
        Some(p) => {
            if p.len() != n {
                return Err(usage(format!("--points has {} entries but --n is {n}", p.len())));
            }
            Ok(sort_config(p)?)
        }
        None => Ok(Configuration::random(n, &mut ChaCha8Rng::seed_from_u64(seed))?),
    }
}

fn run_sweep(a: &SweepArgs, threads: usize) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let params = SweepParams {
        kappa_min: a.grid.kappa_min,
        kappa_max: a.grid.kappa_max,
        n_kappa: a.grid.nk,
        n: a.n,
        n_iter: a.iters,
        n_trans: a.trans,
        seed: a.seed,
        family: a.density.family(),
        trials: a.trials,
        mode: a.density.mode.into(),
    };
    let rows = stability_sweep(&params, threads)?;
    let failed = rows.iter().filter(|r| matches!(r, SweepRow::Failed { .. })).count();
    if failed > 0 {
        log::warn!("{failed} sweep runs failed and were replaced by marker rows");
    }
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_sweep(w, &rows)?)),
        Format::Json => sink.json(&rows),
        Format::Svg => {
            let points = rows
                .iter()
                .filter_map(|r| match r {
                    SweepRow::Record(r) => Some((r.kappa, r.angle)),
                    SweepRow::Failed { .. } => None,
                })
                .collect();
            sink.svg(
                &PlotSpec::new(PlotKind::Scatter, "Stability diagram", "kappa", "codepoint angle")
                    .with_series("codepoints", points),
            )
        }
    }
}

#[derive(Serialize)]
struct EigenReport {
    n: usize,
    kappa: f64,
    alpha: f64,
    beta: f64,
    modes: Vec<usize>,
    eigenvalues: Vec<f64>,
    stability: circloyd::StabilityReport,
}

fn eigen_scan_plot(rows: &[ScanRecord], title: &str) -> PlotSpec {
    PlotSpec::new(PlotKind::Line, title, "kappa", "lambda_min")
        .with_series("lambda_min", rows.iter().map(|r| (r.kappa, r.lambda_min)).collect())
        .with_reference(-1.0, "flip boundary")
}

fn run_eigen(a: &EigenArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Json, &[Format::Csv, Format::Json, Format::Svg])?;
    if let Some(nk) = a.nk {
        let rows = eigen_scan(a.n, &kappa_grid(a.kappa_min, a.kappa_max, nk)?)?;
        return match sink.format {
            Format::Csv => sink.write(|w| Ok(export::write_eigen(w, &rows)?)),
            Format::Json => sink.json(&rows),
            Format::Svg => sink.svg(&eigen_scan_plot(&rows, "Smallest eigenvalue")),
        };
    }
    let density = model(a.density.family(), a.kappa)?;
    let jac = symmetric_jacobian(a.n, &density)?;
    let spectrum = circulant_eigenvalues(&jac);
    let report = EigenReport {
        n: a.n,
        kappa: density.kappa(),
        alpha: jac.alpha,
        beta: jac.beta,
        modes: spectrum.modes.clone(),
        eigenvalues: spectrum.eigenvalues.clone(),
        stability: classify(a.n, &density)?,
    };
    match sink.format {
        Format::Json => sink.json(&report),
        Format::Csv => sink.write(|w| {
            writeln!(w, "m,lambda")?;
            for (m, l) in spectrum.modes.iter().zip(&spectrum.eigenvalues) {
                writeln!(w, "{m},{}", export::fmt_f64(*l))?;
            }
            Ok(())
        }),
        Format::Svg => sink.svg(
            &PlotSpec::new(PlotKind::Scatter, "Circulant spectrum", "mode m", "lambda_m")
                .with_series(
                    "eigenvalues",
                    spectrum
                        .modes
                        .iter()
                        .zip(&spectrum.eigenvalues)
                        .map(|(&m, &l)| (m as f64, l))
                        .collect(),
                )
                .with_reference(-1.0, "flip boundary"),
        ),
    }
}

fn run_fscan(a: &FscanArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let rows = eigen_scan(a.n, &kappa_grid(a.kappa_min, a.kappa_max, a.nk)?)?;
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_fscan(w, &rows)?)),
        Format::Json => sink.json(&rows),
        Format::Svg => {
            sink.svg(&eigen_scan_plot(&rows, "Stability boundary").with_reference(1.0, "neutral"))
        }
    }
}

fn run_lyapunov(a: &LyapunovArgs, threads: usize) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let kappas = match a.kappa {
        Some(k) => vec![k],
        None => kappa_grid(a.grid.kappa_min, a.grid.kappa_max, a.grid.nk)?,
    };
    let params = LyapunovParams {
        n: a.n,
        n_trans: a.trans,
        n_iter: a.iters,
        eps: a.eps_fd,
        seed: a.seed,
        mode: a.density.mode.into(),
    };
    let rows = lyapunov_scan(&kappas, &params, a.density.family(), threads)?;
    if rows.iter().all(|r| r.report.is_none()) {
        let err = rows.first().and_then(|r| r.error.clone()).unwrap_or_default();
        return Err(anyhow!("every Lyapunov run failed: {err}"));
    }
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_lyapunov(w, a.n, &rows)?)),
        Format::Json => sink.json(&rows),
        Format::Svg => sink.svg(&lyapunov_plot(&rows, a.n)),
    }
}

fn lyapunov_plot(rows: &[LyapunovRow], n: usize) -> PlotSpec {
    let mut spec = PlotSpec::new(PlotKind::Line, "Lyapunov spectrum", "kappa", "exponent");
    for j in 0..n {
        let pts = rows
            .iter()
            .map(|r| (r.kappa, r.report.as_ref().map_or(f64::NAN, |rep| rep.exponents[j])))
            .collect();
        spec = spec.with_series(&format!("lambda_{}", j + 1), pts);
    }
    spec.with_reference(0.0, "zero")
}

#[derive(Serialize)]
struct SalaSummary<'a> {
    status: SalaStatus,
    iterations: usize,
    terminal: &'a Configuration,
    fixed_point_residual: f64,
    perturbations: &'a [usize],
    rows: &'a [circloyd::experiments::TraceRow],
}

fn run_sala(a: &SalaArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let cfg = SalaConfig {
        epsilon: a.epsilon,
        eta: a.eta,
        delta: a.delta,
        window: a.window,
        t_max: a.tmax,
        seed: a.seed,
        mode: a.density.mode.into(),
    };
    let density = model(a.density.family(), a.kappa)?;
    let (trace, rows) = residual_trace(&density, a.n, &cfg)?;
    log::info!("SALA finished: {:?} after {} steps", trace.status, rows.len());
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_trace(w, &rows)?)),
        Format::Json => sink.json(&SalaSummary {
            status: trace.status,
            iterations: rows.len(),
            terminal: trace.terminal(),
            fixed_point_residual: fixed_point_residual(trace.terminal(), &density, cfg.mode)?,
            perturbations: &trace.perturbations,
            rows: &rows,
        }),
        Format::Svg => sink.svg(
            &PlotSpec::new(PlotKind::Line, "SALA residuals", "iteration t", "log10 residual")
                .with_series(
                    "residual",
                    rows.iter().map(|r| (r.t as f64, r.residual.log10())).collect(),
                )
                .with_reference(cfg.epsilon.log10(), "epsilon"),
        ),
    }
}

#[derive(Serialize)]
struct JacobianReport {
    points: Vec<f64>,
    eps: f64,
    finite_difference: Vec<Vec<f64>>,
    /// Present only at the equally spaced codebook.
    analytic: Option<Vec<Vec<f64>>>,
    max_abs_diff: Option<f64>,
}

fn run_jacobian(a: &JacobianArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Json, &[Format::Csv, Format::Json])?;
    let density = model(a.density.family(), a.kappa)?;
    let (config, symmetric) = match &a.points {
        Some(_) => (start_config(&a.points, a.n, 0)?, false),
        None => (Configuration::equally_spaced(a.n)?, true),
    };
    // the circulant form assumes the codebook is centred on the density axis
    let symmetric = symmetric && a.density.mu == 0.0;
    let fd = fd_jacobian(config.points(), &density, a.density.mode.into(), a.eps_fd)?;
    let analytic = if symmetric {
        Some(expand(&symmetric_jacobian(a.n, &density)?))
    } else {
        None
    };
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_matrix(w, &fd)?)),
        _ => sink.json(&JacobianReport {
            points: config.points().to_vec(),
            eps: a.eps_fd,
            finite_difference: fd.to_rows(),
            max_abs_diff: analytic.as_ref().map(|m| m.max_abs_diff(&fd)).transpose()?,
            analytic: analytic.map(|m| m.to_rows()),
        }),
    }
}

fn run_critical(a: &CriticalArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Json, &[Format::Csv, Format::Json])?;
    let result = critical_kappa(a.n, (a.kappa_min, a.kappa_max), a.tol)?;
    match sink.format {
        Format::Csv => sink.write(|w| {
            writeln!(w, "status,kappa_c,max_F,bound")?;
            let (status, kc, mf, bound) = match result {
                CriticalKappa::Root { kappa_c, bound } => ("root", kappa_c, f64::NAN, bound),
                CriticalKappa::NoRoot { max_f, bound } => ("no_root", f64::NAN, max_f, bound),
            };
            writeln!(
                w,
                "{status},{},{},{}",
                export::fmt_f64(kc),
                export::fmt_f64(mf),
                export::fmt_f64(bound)
            )?;
            Ok(())
        }),
        _ => sink.write(|w| {
            serde_json::to_writer(&mut *w, &result)?;
            writeln!(w)?;
            Ok(())
        }),
    }
}

fn run_distortion(a: &DistortionArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Csv, &[Format::Csv, Format::Json, Format::Svg])?;
    let density = model(a.density.family(), a.kappa)?;
    let q0 = start_config(&a.points, a.n, a.seed)?;
    let orbit = iterate(&q0, &density, a.density.mode.into(), a.iters, a.normalize);
    if let Some(e) = &orbit.failure {
        log::warn!("orbit stopped early: {e}");
    }
    match sink.format {
        Format::Csv => sink.write(|w| Ok(export::write_orbit(w, &orbit)?))?,
        Format::Json => {
            #[derive(Serialize)]
            struct OrbitJson<'a> {
                states: &'a [Configuration],
                residuals: &'a [f64],
                distortions: &'a [f64],
                failure: Option<String>,
            }
            sink.json(&OrbitJson {
                states: &orbit.states,
                residuals: &orbit.residuals,
                distortions: &orbit.distortions,
                failure: orbit.failure.as_ref().map(ToString::to_string),
            })?
        }
        Format::Svg => sink.svg(
            &PlotSpec::new(PlotKind::Line, "Distortion along the orbit", "iteration t", "distortion")
                .with_series(
                    "distortion",
                    orbit.distortions.iter().enumerate().map(|(t, &d)| (t as f64, d)).collect(),
                ),
        )?,
    }
    match orbit.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct StepReport<'a> {
    input: &'a Configuration,
    output: &'a Configuration,
    residual: f64,
}

fn run_step(a: &StepArgs) -> Result<()> {
    let sink = Sink::new(&a.output, Format::Json, &[Format::Csv, Format::Json])?;
    let density = model(a.density.family(), a.kappa)?;
    let q = start_config(&a.points, a.n, a.seed)?;
    let mode = a.density.mode.into();
    let next = lloyd_step(&q, &density, mode)?;
    let residual = fixed_point_residual(&q, &density, mode)?;
    match sink.format {
        Format::Csv => sink.write(|w| {
            writeln!(w, "j,angle")?;
            for (j, &p) in next.points().iter().enumerate() {
                writeln!(w, "{j},{}", export::fmt_f64(p))?;
            }
            Ok(())
        }),
        _ => sink.json(&StepReport {
            input: &q,
            output: &next,
            residual,
        }),
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        bail!(UsageError("--threads must be at least 1".into()));
    }
    match &cli.command {
        Command::Sweep(a) => run_sweep(a, cli.threads),
        Command::Eigen(a) => run_eigen(a),
        Command::Fscan(a) => run_fscan(a),
        Command::Lyapunov(a) => run_lyapunov(a, cli.threads),
        Command::Sala(a) => run_sala(a),
        Command::Jacobian(a) => run_jacobian(a),
        Command::CriticalKappa(a) => run_critical(a),
        Command::Distortion(a) => run_distortion(a),
        Command::Step(a) => run_step(a),
    }
}

/// A closed stdout (e.g. piping into `head`) is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<io::Error>().or(match c.downcast_ref::<export::ExportError>() {
            Some(export::ExportError::Io(io)) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CIRCLOYD_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
