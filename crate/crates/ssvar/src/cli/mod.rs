//! `ssvar` command-line front end.
//!
//! Every command reads an optional TOML config (see [`config::RunConfig`]),
//! applies `--set section.key=value` overrides and the named flags (flags win),
//! writes its results and a run manifest with SHA-256 digests of every input
//! and output file.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

pub mod config;
pub mod manifest;
pub mod output;
pub mod sweep;

use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::ols_var_fit;
use crate::error::{Error, Result};
use crate::granger::{gc_trace, gc_window, GcMethod, GcReport};
use crate::model::{build_lag_design, BivariateSeries, Design, IterationRecord, Orders, VarCoefficients};
use crate::simulate::simulate;
use crate::ss_admm::fit_unrestricted;
use crate::ssd_admm::denoise_series;
use config::RunConfig;
use manifest::ManifestBuilder;
use output::{write_json, Csv, Field};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "SSVAR_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ssvar", version, about = "Sparse, stationary and denoising VAR fits with Granger-causality tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a bivariate series; writes the noisy CSV and a ground-truth JSON.
    Simulate(SimulateArgs),
    /// Fit a model to a two-column CSV.
    Fit(FitArgs),
    /// Granger-causality tests over sliding windows.
    Gc(GcArgs),
    /// Coefficient NMSE against measurement-noise variance.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override `section.key=value` (repeatable), e.g. `params.lambda=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Manifest path (default: next to the main output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ParamFlags {
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda_prime: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_prime: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho3: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub zero_tol: Option<f64>,
    /// `uniform` or `sqrt_size`.
    #[arg(long)]
    pub weighting: Option<String>,
}

impl ParamFlags {
    fn overrides(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut f = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push(format!("params.{k}={v}"));
            }
        };
        let num = |v: Option<f64>| v.map(toml_float);
        f("lambda", num(self.lambda));
        f("lambda_prime", num(self.lambda_prime));
        f("gamma", num(self.gamma));
        f("gamma_prime", num(self.gamma_prime));
        f("kappa", num(self.kappa));
        f("alpha", num(self.alpha));
        f("rho1", num(self.rho1));
        f("rho2", num(self.rho2));
        f("rho3", num(self.rho3));
        f("max_iters", self.max_iters.map(|v| v.to_string()));
        f("tol", num(self.tol));
        f("zero_tol", num(self.zero_tol));
        f("weighting", self.weighting.as_ref().map(|w| format!("\"{w}\"")));
        out
    }
}

fn toml_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    pub measurement_var: Option<f64>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Noisy series, CSV with columns `y,x`.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON (default: `<out>.truth.json`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Also write the noiseless series here.
    #[arg(long)]
    pub clean: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Ss,
    Ssd,
    Ols,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "ss")]
    pub method: FitMethod,
    #[arg(long)]
    pub m_bar: Option<usize>,
    /// Result JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GcArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated subset of `ss`, `ssd`, `blockwise`.
    #[arg(long, value_delimiter = ',', default_value = "ss")]
    pub method: Vec<String>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub m_bar: Option<usize>,
    /// Directory receiving `gc_trace.csv` and `gc_summary.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Mean NMSE per grid point and method.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-seed NMSE (optional).
    #[arg(long)]
    pub runs_out: Option<PathBuf>,
}

/// Maps library errors to exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::Divergence { .. } => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`] when set.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Gc(a) => cmd_gc(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn load(common: &Common, extra: Vec<String>) -> Result<RunConfig> {
    let mut sets = common.set.clone();
    sets.extend(extra);
    RunConfig::load(common.config.as_deref(), &sets)
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn manifest_path(common: &Common, main_output: &Path) -> PathBuf {
    common
        .manifest
        .clone()
        .unwrap_or_else(|| with_suffix(main_output, ".manifest.json"))
}

fn read_series(path: &Path) -> Result<BivariateSeries> {
    let f = std::fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    BivariateSeries::read_csv(BufReader::new(f))
}

fn write_series(path: &Path, s: &BivariateSeries) -> Result<()> {
    let mut csv = Csv::new(&["y", "x"]);
    for (a, b) in s.y().iter().zip(s.x()) {
        csv.row(&[Field::F(*a), Field::F(*b)]);
    }
    csv.write(path)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(s) = a.seed {
        extra.push(format!("simulation.seed={s}"));
    }
    if let Some(v) = a.measurement_var {
        extra.push(format!("simulation.measurement_var={}", toml_float(v)));
    }
    if let Some(n) = a.n_samples {
        extra.push(format!("simulation.n_samples={n}"));
    }
    let cfg = load(&a.common, extra)?;
    let mut man = ManifestBuilder::new("simulate", &cfg);
    if let Some(p) = &a.common.config {
        man.input(p);
    }
    let obs = simulate(&cfg.simulation)?;
    write_series(&a.out, &obs.noisy)?;
    man.output(&a.out);
    let truth_path = a.truth.clone().unwrap_or_else(|| with_suffix(&a.out, ".truth.json"));
    write_json(&truth_path, &obs.truth)?;
    man.output(&truth_path);
    if let Some(p) = &a.clean {
        write_series(p, &obs.clean)?;
        man.output(p);
    }
    man.finish(&manifest_path(&a.common, &a.out))?;
    Ok(())
}

/// Denoising diagnostics included in `fit --method ssd` output.
#[derive(Debug, Clone, Serialize)]
pub struct DenoiseSummary {
    pub kappa: f64,
    pub oscillated: bool,
    pub returned_iteration: usize,
    pub regularized: bool,
    pub max_decomposition_error: f64,
    /// `‖ΔY‖_F / ‖Ŷ‖_F`.
    pub measurement_noise_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub method: FitMethod,
    pub m_bar: usize,
    pub n_samples: usize,
    pub orders: Orders,
    pub coefficients: VarCoefficients,
    pub rss: [f64; 2],
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    /// File name of the per-iteration residual trace, next to the result.
    pub trace_file: Option<String>,
    pub denoise: Option<DenoiseSummary>,
    /// Least squares needed a ridge on a singular Gram matrix.
    pub regularized: Option<bool>,
}

fn write_trace(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut csv = Csv::new(&["iteration", "primal_az", "primal_c", "primal_pq", "objective"]);
    for (i, r) in history.iter().enumerate() {
        csv.row(&[Field::U(i + 1), Field::F(r.primal_az), Field::F(r.primal_c), Field::F(r.primal_pq), Field::F(r.objective)]);
    }
    csv.write(path)
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let mut extra = a.params.overrides();
    if let Some(m) = a.m_bar {
        extra.push(format!("fit.m_bar={m}"));
    }
    let cfg = load(&a.common, extra)?;
    let mut man = ManifestBuilder::new("fit", &cfg);
    man.input(&a.input);
    if let Some(p) = &a.common.config {
        man.input(p);
    }
    let series = read_series(&a.input)?;
    let m = cfg.fit.m_bar;
    let design = build_lag_design(&series, m)?;

    let (fit, denoise, regularized) = match a.method {
        FitMethod::Ss => (fit_unrestricted(&design, &cfg.params)?, None, None),
        FitMethod::Ssd => {
            let r = denoise_series(&series, m, &cfg.params)?;
            let summary = DenoiseSummary {
                kappa: r.kappa,
                oscillated: r.oscillated,
                returned_iteration: r.returned_iteration,
                regularized: r.regularized,
                max_decomposition_error: r.max_decomposition_error,
                measurement_noise_ratio: r.state.dy.norm() / r.state.y_hat.norm(),
            };
            (r.fit, Some(summary), None)
        }
        FitMethod::Ols => {
            let ols = ols_var_fit(&design)?;
            let rss = design.rss(&ols.coefficients);
            let orders = ols.coefficients.support_orders(0.0);
            let out = FitOutput {
                method: a.method,
                m_bar: m,
                n_samples: series.n_samples(),
                orders,
                coefficients: ols.coefficients,
                rss: [rss.0, rss.1],
                n_obs: design.n_obs(),
                iterations: 0,
                converged: true,
                trace_file: None,
                denoise: None,
                regularized: Some(ols.regularized),
            };
            write_json(&a.out, &out)?;
            man.output(&a.out);
            man.finish(&manifest_path(&a.common, &a.out))?;
            return Ok(());
        }
    };

    let trace_path = with_suffix(&a.out, ".trace.csv");
    write_trace(&trace_path, &fit.residual_history)?;
    let out = FitOutput {
        method: a.method,
        m_bar: m,
        n_samples: series.n_samples(),
        orders: fit.orders,
        coefficients: fit.coefficients,
        rss: [fit.rss.0, fit.rss.1],
        n_obs: fit.n_obs,
        iterations: fit.iterations,
        converged: fit.converged,
        trace_file: trace_path.file_name().map(|f| f.to_string_lossy().into_owned()),
        denoise,
        regularized,
    };
    write_json(&a.out, &out)?;
    man.output(&a.out);
    man.output(&trace_path);
    man.finish(&manifest_path(&a.common, &a.out))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GcMethodSummary {
    pub method: String,
    pub windows: usize,
    pub valid_x_to_y: usize,
    pub valid_y_to_x: usize,
    pub significant_x_to_y: usize,
    pub significant_y_to_x: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GcSummary {
    pub n_samples: usize,
    pub window: usize,
    pub stride: usize,
    pub m_bar: usize,
    pub confidence: f64,
    pub methods: Vec<GcMethodSummary>,
}

fn method_name(m: GcMethod) -> &'static str {
    match m {
        GcMethod::SsAdmm => "ss_admm",
        GcMethod::SsdAdmm => "ssd_admm",
        GcMethod::Blockwise => "blockwise",
    }
}

pub fn cmd_gc(a: &GcArgs) -> Result<()> {
    let mut extra = a.params.overrides();
    if let Some(w) = a.window {
        extra.push(format!("gc.window={w}"));
    }
    if let Some(s) = a.stride {
        extra.push(format!("gc.stride={s}"));
    }
    if let Some(c) = a.confidence {
        extra.push(format!("gc.confidence={}", toml_float(c)));
    }
    if let Some(m) = a.m_bar {
        extra.push(format!("gc.m_bar={m}"));
    }
    let cfg = load(&a.common, extra)?;
    let methods = a
        .method
        .iter()
        .map(|s| s.trim().parse::<GcMethod>())
        .collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Parameter("no GC method given".into()));
    }
    let mut man = ManifestBuilder::new("gc", &cfg);
    man.input(&a.input);
    if let Some(p) = &a.common.config {
        man.input(p);
    }
    let series = read_series(&a.input)?;
    let g = &cfg.gc;
    let window = g.window.unwrap_or(series.n_samples());

    let mut csv = Csv::new(&[
        "method", "window_start", "direction", "f", "critical_value", "df_num", "df_den", "significant", "valid",
    ]);
    let mut summaries = Vec::new();
    for m in methods {
        let (starts, reports): (Vec<usize>, Vec<GcReport>) = if window == series.n_samples() && g.window.is_none() {
            (vec![0], vec![gc_window(&series, m, g.m_bar, &cfg.params, g.confidence)?])
        } else {
            let t = gc_trace(&series, m, window, g.stride, g.m_bar, &cfg.params, g.confidence)?;
            (t.window_starts, t.reports)
        };
        for (s, r) in starts.iter().zip(&reports) {
            for (dir, t) in [("x_to_y", &r.x_to_y), ("y_to_x", &r.y_to_x)] {
                csv.row(&[
                    Field::S(method_name(m).into()),
                    Field::U(*s),
                    Field::S(dir.into()),
                    Field::OptF(t.f),
                    Field::OptF(t.critical_value),
                    Field::U(t.df_num),
                    Field::U(t.df_den),
                    Field::B(t.significant),
                    Field::B(t.is_valid()),
                ]);
            }
        }
        summaries.push(GcMethodSummary {
            method: method_name(m).into(),
            windows: reports.len(),
            valid_x_to_y: reports.iter().filter(|r| r.x_to_y.is_valid()).count(),
            valid_y_to_x: reports.iter().filter(|r| r.y_to_x.is_valid()).count(),
            significant_x_to_y: reports.iter().filter(|r| r.significant_x_to_y()).count(),
            significant_y_to_x: reports.iter().filter(|r| r.significant_y_to_x()).count(),
        });
    }
    std::fs::create_dir_all(&a.out_dir)?;
    let trace_path = a.out_dir.join("gc_trace.csv");
    let summary_path = a.out_dir.join("gc_summary.json");
    csv.write(&trace_path)?;
    write_json(
        &summary_path,
        &GcSummary {
            n_samples: series.n_samples(),
            window,
            stride: g.stride,
            m_bar: g.m_bar,
            confidence: g.confidence,
            methods: summaries,
        },
    )?;
    man.output(&trace_path);
    man.output(&summary_path);
    let mp = a.common.manifest.clone().unwrap_or_else(|| a.out_dir.join("manifest.json"));
    man.finish(&mp)?;
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut extra = a.params.overrides();
    if let Some(s) = a.seeds {
        extra.push(format!("sweep.seeds={s}"));
    }
    if let Some(g) = a.grid_points {
        extra.push(format!("sweep.grid_points={g}"));
    }
    let cfg = load(&a.common, extra)?;
    let mut man = ManifestBuilder::new("sweep", &cfg);
    if let Some(p) = &a.common.config {
        man.input(p);
    }
    let result = sweep::run_noise_sweep(&cfg.simulation, &cfg.params, &cfg.sweep)?;
    result.to_csv().write(&a.out)?;
    man.output(&a.out);
    if let Some(p) = &a.runs_out {
        let mut csv = Csv::new(&["noise_var", "method", "seed", "nmse"]);
        for r in &result.runs {
            csv.row(&[Field::F(r.noise_var), Field::S(r.method.name().into()), Field::U(r.seed as usize), Field::F(r.nmse)]);
        }
        csv.write(p)?;
        man.output(p);
    }
    man.finish(&manifest_path(&a.common, &a.out))?;
    Ok(())
}
