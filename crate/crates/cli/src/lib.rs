//! Command-line front end for the `lwlab` library.
//!
//! Every invocation resolves its options (defaults included) into a [`Command`],
//! writes CSV tables and a single JSON summary into the output directory, and
//! maps the outcome to an exit code: `0` on success, `1` when a `verify-bounds`
//! criterion fails, `2` on usage or library errors.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use lwlab::asymptotics::{activation_summary, check_coro_a7, check_thm_a3, check_thm_a4, KernelCoeffs, XyGrid};
use lwlab::experiments::{
    algebraic_tail_perturbation, decay_csv, default_positive_mass_perturbation, default_zero_mass_perturbation, format_float,
    grid_csv, largest_converging_size, measure_semigroup_decay, profile_family_csv, reproduce_profile_family, run_orbital_stability, snapshot_run,
    stability_csv, two_wave_perturbation, write_csv,
};
use lwlab::greens::{derivative_green, temporal_green, verify_derivative_bounds, verify_green_bounds, GreenField, GreenKind};
use lwlab::model::{make_shock_config, Flux, ShockConfig, SpectralParams};
use lwlab::profiles::profile_with_mass;
use lwlab::spectral::{
    alpha_m_for_delta_prime_zero, alpha_m_for_delta_zero, count_zeros, kappa_roots, lopatinskii, lopatinskii_derivative_at_one,
    Side,
};

/// Exit code for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code when a checked criterion fails.
pub const EXIT_CRITERION_FAILED: i32 = 1;
/// Exit code for usage and library errors.
pub const EXIT_ERROR: i32 = 2;

/// Largest relative change of a fitted constant accepted under refinement.
pub const REFINEMENT_TOLERANCE: f64 = 0.15;

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested explicitly.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Library(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

fn lib_err(e: impl std::fmt::Display) -> CliError {
    CliError::Library(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "lwlab", version, about = "Lax-Wendroff discrete shock laboratory", after_help = EXAMPLES_HELP)]
struct Cli {
    #[command(subcommand)]
    verb: VerbArgs,
}

const EXAMPLES_HELP: &str = "Examples:
  lwlab profile --theta 0.5
  lwlab spectrum --alpha-l 0.333333 --alpha-r -0.666667 --alpha-m auto-unstable --z0 2
  lwlab green --kind full --j0 10 --n 9
  lwlab activation --n-max 512
  lwlab decay --gamma1 0 --gamma2 1 --n-max 4096
  lwlab simulate --mass zero --n 2000
  lwlab verify-bounds --suite greens --n-max 256";

/// Argument vectors (without the program name) of the examples shown in `--help`.
pub fn help_examples() -> Vec<Vec<String>> {
    EXAMPLES_HELP
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().skip(1).map(str::to_string).collect())
        .collect()
}

#[derive(Subcommand, Debug, Clone, Serialize)]
enum VerbArgs {
    /// Stationary discrete shock profile of a given excess mass.
    #[command(allow_negative_numbers = true)]
    Profile(ProfileArgs),
    /// Lopatinskii determinant, roots of the dispersion relation and zero count.
    #[command(allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Temporal Green's function rows.
    #[command(allow_negative_numbers = true)]
    Green(GreenArgs),
    /// Activation function along the lattice and its saturation.
    #[command(allow_negative_numbers = true)]
    Activation(ActivationArgs),
    /// Decay of the linearized semigroup in weighted norms.
    #[command(allow_negative_numbers = true)]
    Decay(DecayArgs),
    /// Nonlinear run from a perturbed step shock.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Fitted constants of the pointwise and asymptotic kernel bounds.
    #[command(name = "verify-bounds", allow_negative_numbers = true)]
    VerifyBounds(VerifyArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum FluxName {
    Burgers,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ConfigArgs {
    #[arg(long, value_enum, default_value = "burgers")]
    flux: FluxName,
    #[arg(long = "u-l", default_value_t = 0.5)]
    u_l: f64,
    #[arg(long = "u-r", default_value_t = -0.5)]
    u_r: f64,
    /// Ratio Δt/Δx.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long = "output-dir", default_value = ".")]
    #[serde(skip)]
    output_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct TripleArgs {
    #[arg(long = "alpha-l")]
    alpha_l: Option<f64>,
    #[arg(long = "alpha-r")]
    alpha_r: Option<f64>,
    /// A number, `auto-unstable` (Δ(z0) = 0) or `auto-degenerate` (Δ′(1) = 0).
    #[arg(long = "alpha-m")]
    alpha_m: Option<String>,
    /// Real point used by `auto-unstable` and for the reported roots.
    #[arg(long, default_value_t = 2.0)]
    z0: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ProfileArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long = "half-width", default_value_t = 200)]
    half_width: i64,
    /// Also tabulate (θ, v₀, v₁) on this many points of [family-min, family-max].
    #[arg(long = "family-points", default_value_t = 0)]
    family_points: usize,
    #[arg(long = "family-min", default_value_t = -2.0)]
    family_min: f64,
    #[arg(long = "family-max", default_value_t = 2.0)]
    family_max: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SpectrumArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    triple: TripleArgs,
    #[arg(long = "r-outer", default_value_t = lwlab::spectral::DEFAULT_OUTER_RADIUS)]
    r_outer: f64,
    #[arg(long, default_value_t = lwlab::spectral::DEFAULT_EXCLUSION_RADIUS)]
    exclusion: f64,
    #[arg(long, default_value_t = lwlab::spectral::DEFAULT_CONTOUR_POINTS)]
    points: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum KindArg {
    Full,
    FreeLeft,
    FreeRight,
    Derivative,
}

#[derive(Args, Debug, Clone, Serialize)]
struct GreenArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    triple: TripleArgs,
    #[arg(long, value_enum, default_value = "full")]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    j0: i64,
    #[arg(long, default_value_t = 10)]
    n: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ActivationArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Courant number on the right; defaults to the one of the configuration.
    #[arg(long = "alpha-r")]
    alpha_r: Option<f64>,
    #[arg(long = "n-max", default_value_t = 512)]
    n_max: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct DecayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 0.0)]
    gamma1: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma2: f64,
    #[arg(long = "n-max", default_value_t = 4096)]
    n_max: u64,
    /// Apply Id − S to the data first.
    #[arg(long)]
    shift: bool,
    /// Exponent s of the data h_j = sgn(j)(1+|j|)^{-s}; defaults to γ₂ + 1.25.
    #[arg(long = "tail-exponent")]
    tail_exponent: Option<f64>,
    /// Half width of the data window; defaults to n-max.
    #[arg(long = "half-width")]
    half_width: Option<i64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum MassArg {
    Zero,
    Positive,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "zero")]
    mass: MassArg,
    #[arg(long, default_value_t = 2000)]
    n: u64,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value_t = 0.12)]
    sigma: f64,
    /// ‖h‖ in ℓ¹_γ with γ = σ + β + 1/8.
    #[arg(long, default_value_t = 0.01)]
    size: f64,
    #[arg(long = "j1", default_value_t = -20)]
    j1: i64,
    #[arg(long = "j2", default_value_t = 30)]
    j2: i64,
    /// Comma-separated snapshot times; defaults to 0, n/20, n/4, n.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<u64>>,
    /// Comma-separated sizes; reports the largest one whose run converged.
    #[arg(long, value_delimiter = ',')]
    size_scan: Option<Vec<f64>>,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum Suite {
    Greens,
    Derivative,
    Asymptotics,
    Activation,
    All,
}

#[derive(Args, Debug, Clone, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_enum, default_value = "greens")]
    suite: Suite,
    #[arg(long = "n-max", default_value_t = 256)]
    n_max: usize,
    /// Decay constant in the exponential factors of the envelopes.
    #[arg(long, default_value_t = 0.05)]
    c: f64,
    /// Also rerun at doubled resolution and require relative changes below 15%.
    #[arg(long)]
    refine: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Profile,
    Spectrum,
    Green,
    Activation,
    Decay,
    Simulate,
    VerifyBounds,
}

impl Verb {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verb::Profile => "profile",
            Verb::Spectrum => "spectrum",
            Verb::Green => "green",
            Verb::Activation => "activation",
            Verb::Decay => "decay",
            Verb::Simulate => "simulate",
            Verb::VerifyBounds => "verify-bounds",
        }
    }
}

/// A validated invocation with every option resolved.
#[derive(Clone, Debug)]
pub struct Command {
    pub verb: Verb,
    /// Every option of the verb, keyed by flag name, defaults included.
    pub options: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    args: VerbArgs,
}

/// Parses an argument vector that excludes the program name.
pub fn parse_command<S: AsRef<str>>(argv: &[S]) -> Result<Command, CliError> {
    let full = std::iter::once("lwlab").chain(argv.iter().map(|s| s.as_ref()));
    let cli = Cli::try_parse_from(full).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.render().to_string()),
        _ => CliError::Usage(e.render().to_string()),
    })?;
    let args = cli.verb;
    let (verb, config) = match &args {
        VerbArgs::Profile(a) => (Verb::Profile, &a.config),
        VerbArgs::Spectrum(a) => (Verb::Spectrum, &a.config),
        VerbArgs::Green(a) => (Verb::Green, &a.config),
        VerbArgs::Activation(a) => (Verb::Activation, &a.config),
        VerbArgs::Decay(a) => (Verb::Decay, &a.config),
        VerbArgs::Simulate(a) => (Verb::Simulate, &a.config),
        VerbArgs::VerifyBounds(a) => (Verb::VerifyBounds, &a.config),
    };
    let output_dir = config.output_dir.clone();
    build_config(config)?;
    validate(&args)?;
    let mut options = BTreeMap::new();
    if let Value::Object(map) = serde_json::to_value(&args).map_err(lib_err)? {
        if let Some(Value::Object(fields)) = map.into_iter().next().map(|(_, v)| v) {
            flatten_options(&fields, &mut options);
        }
    }
    Ok(Command {
        verb,
        options,
        output_dir,
        args,
    })
}

fn flatten_options(fields: &serde_json::Map<String, Value>, out: &mut BTreeMap<String, String>) {
    for (k, v) in fields {
        match v {
            Value::Object(inner) => flatten_options(inner, out),
            Value::Null => {}
            Value::String(s) => {
                out.insert(k.replace('_', "-"), s.clone());
            }
            other => {
                out.insert(k.replace('_', "-"), other.to_string());
            }
        }
    }
}

fn validate(args: &VerbArgs) -> Result<(), CliError> {
    let usage = |m: &str| Err(CliError::Usage(m.to_string()));
    match args {
        VerbArgs::Profile(a) => {
            if a.half_width < 4 {
                return usage("--half-width must be at least 4");
            }
            if a.family_points == 1 || !(a.family_max >= a.family_min) {
                return usage("--family-points must be 0 or at least 2 with --family-min ≤ --family-max");
            }
        }
        VerbArgs::Spectrum(a) => {
            resolve_triple(&a.config, &a.triple)?;
        }
        VerbArgs::Green(a) => {
            if a.kind == KindArg::Derivative && (a.triple.alpha_l.is_some() || a.triple.alpha_r.is_some()) {
                return usage("--kind derivative is built from the flux configuration, not from a Courant triple");
            }
            resolve_triple(&a.config, &a.triple)?;
        }
        VerbArgs::Activation(a) => {
            if a.n_max == 0 {
                return usage("--n-max must be positive");
            }
        }
        VerbArgs::Decay(a) => {
            if a.n_max < 4 {
                return usage("--n-max must be at least 4");
            }
        }
        VerbArgs::Simulate(a) => {
            if !(a.size > 0.0) {
                return usage("--size must be positive");
            }
            if a.j1 == a.j2 {
                return usage("--j1 and --j2 must differ");
            }
        }
        VerbArgs::VerifyBounds(a) => {
            if a.n_max == 0 || !(a.c > 0.0) {
                return usage("--n-max and --c must be positive");
            }
        }
    }
    Ok(())
}

fn build_config(a: &ConfigArgs) -> Result<ShockConfig, CliError> {
    let flux = match a.flux {
        FluxName::Burgers => Flux::burgers(),
    };
    make_shock_config(flux, a.u_l, a.u_r, a.lambda).map_err(|e| CliError::Usage(format!("invalid shock configuration: {e}")))
}

fn resolve_triple(config: &ConfigArgs, t: &TripleArgs) -> Result<SpectralParams, CliError> {
    let base = build_config(config)?.spectral_params();
    let (alpha_l, alpha_r) = match (t.alpha_l, t.alpha_r) {
        (None, None) => (base.alpha_l, base.alpha_r),
        (Some(l), Some(r)) => (l, r),
        _ => return Err(CliError::Usage("--alpha-l and --alpha-r must be given together".into())),
    };
    let alpha_m = match t.alpha_m.as_deref() {
        None if t.alpha_l.is_none() => base.alpha_m,
        None => return Err(CliError::Usage("--alpha-m is required with --alpha-l/--alpha-r".into())),
        Some("auto-unstable") => {
            let m = alpha_m_for_delta_zero(alpha_l, alpha_r, Complex64::new(t.z0, 0.0)).map_err(|e| CliError::Usage(e.to_string()))?;
            if m.im.abs() > 1e-12 * (1.0 + m.re.abs()) {
                return Err(CliError::Usage(format!("auto-unstable gives a non-real alpha_m = {m}")));
            }
            m.re
        }
        Some("auto-degenerate") => alpha_m_for_delta_prime_zero(alpha_l, alpha_r).map_err(|e| CliError::Usage(e.to_string()))?,
        Some(s) => s
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--alpha-m expects a number, auto-unstable or auto-degenerate, got {s:?}")))?,
    };
    SpectralParams::new(alpha_l, alpha_r, alpha_m).map_err(|e| CliError::Usage(e.to_string()))
}

fn config_json(cfg: &ShockConfig) -> Value {
    json!({
        "flux": cfg.flux().label(),
        "u_l": cfg.u_l(),
        "u_r": cfg.u_r(),
        "lambda": cfg.lambda(),
        "alpha_l": cfg.alpha_l(),
        "alpha_r": cfg.alpha_r(),
        "alpha_m": cfg.alpha_m(),
    })
}

fn complex_json(z: Complex64) -> Value {
    json!({"re": z.re, "im": z.im})
}

struct Output<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Output<'a> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value).map_err(lib_err)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.files.push(name.to_string());
        Ok(())
    }
}

/// Runs a command inside a thread pool capped by `LWLAB_THREADS` and returns the exit code.
pub fn execute(cmd: &Command) -> i32 {
    let threads = std::env::var("LWLAB_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| run(cmd)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CRITERION_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Parses and executes, printing usage errors to stderr.
pub fn main_with_args<S: AsRef<str>>(argv: &[S]) -> i32 {
    match parse_command(argv) {
        Ok(cmd) => execute(&cmd),
        Err(CliError::Help(text)) => {
            print!("{text}");
            EXIT_OK
        }
        Err(CliError::Usage(text)) => {
            eprintln!("{}", text.trim_end());
            EXIT_ERROR
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run(cmd: &Command) -> Result<bool, CliError> {
    fs::create_dir_all(&cmd.output_dir).map_err(|e| CliError::Io {
        path: cmd.output_dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut out = Output {
        dir: &cmd.output_dir,
        files: Vec::new(),
    };
    let (summary_name, mut summary, passed) = match &cmd.args {
        VerbArgs::Profile(a) => ("profile_report.json", run_profile(a, &mut out)?, true),
        VerbArgs::Spectrum(a) => ("spectrum_report.json", run_spectrum(a, &mut out)?, true),
        VerbArgs::Green(a) => ("green_report.json", run_green(a, &mut out)?, true),
        VerbArgs::Activation(a) => ("activation_report.json", run_activation(a, &mut out)?, true),
        VerbArgs::Decay(a) => ("decay_report.json", run_decay(a, &mut out)?, true),
        VerbArgs::Simulate(a) => ("stability_report.json", run_simulate(a, &mut out)?, true),
        VerbArgs::VerifyBounds(a) => {
            let (value, ok) = run_verify(a)?;
            ("bound_report.json", value, ok)
        }
    };
    summary["command"] = json!(cmd.verb.as_str());
    summary["options"] = json!(cmd.options);
    summary["files"] = json!(out.files.clone());
    out.json(summary_name, &summary)?;
    Ok(passed)
}

fn run_profile(a: &ProfileArgs, out: &mut Output) -> Result<Value, CliError> {
    let cfg = build_config(&a.config)?;
    let p = profile_with_mass(&cfg, a.theta, a.half_width).map_err(lib_err)?;
    grid_csv(out.create("profile.csv")?, &p.grid).map_err(lib_err)?;
    let mut value = json!({
        "config": config_json(&cfg),
        "tolerances": {"mass": 1e-8, "stationarity": 1e-10},
        "results": {
            "theta": p.theta,
            "anchor": p.anchor,
            "translation": p.translation,
            "residual": p.residual,
            "decay_rate": if p.decay_rate.is_finite() { json!(p.decay_rate) } else { json!("infinite") },
            "v0": p.grid.get(0),
            "v1": p.grid.get(1),
            "j_min": p.grid.j_min(),
            "j_max": p.grid.j_max(),
        },
        "criteria": {"stationary": p.residual <= 1e-10},
    });
    if a.family_points >= 2 {
        let m = a.family_points;
        let grid: Vec<f64> = (0..m)
            .map(|k| a.family_min + (a.family_max - a.family_min) * k as f64 / (m - 1) as f64)
            .collect();
        let rows = reproduce_profile_family(&cfg, &grid).map_err(lib_err)?;
        profile_family_csv(out.create("profile_family.csv")?, &rows).map_err(lib_err)?;
        value["results"]["family_max_residual"] = json!(rows.iter().map(|r| r.residual).fold(0.0, f64::max));
    }
    Ok(value)
}

fn run_spectrum(a: &SpectrumArgs, out: &mut Output) -> Result<Value, CliError> {
    let params = resolve_triple(&a.config, &a.triple)?;
    let z0 = Complex64::new(a.triple.z0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let delta_one = lopatinskii(&params, one).map_err(lib_err)?;
    let delta_z0 = lopatinskii(&params, z0).map_err(lib_err)?;
    let kl = kappa_roots(params.alpha_l, z0, Side::Left).map_err(lib_err)?;
    let kr = kappa_roots(params.alpha_r, z0, Side::Right).map_err(lib_err)?;
    let scan = count_zeros(&params, a.r_outer, a.exclusion, a.points).map_err(lib_err)?;
    write_csv(
        out.create("spectrum.csv")?,
        &["z_re", "z_im", "delta_re", "delta_im"],
        scan.contour
            .iter()
            .zip(&scan.delta_values)
            .map(|(z, d)| vec![format_float(z.re), format_float(z.im), format_float(d.re), format_float(d.im)]),
    )
    .map_err(lib_err)?;
    Ok(json!({
        "config": {"alpha_l": params.alpha_l, "alpha_r": params.alpha_r, "alpha_m": params.alpha_m, "z0": a.triple.z0},
        "tolerances": {"r_outer": a.r_outer, "exclusion_radius": a.exclusion, "points_per_loop": a.points},
        "results": {
            "delta_at_one": complex_json(delta_one),
            "derivative_at_one": lopatinskii_derivative_at_one(&params),
            "delta_at_z0": complex_json(delta_z0),
            "kappa_left_z0": {"stable": complex_json(kl.stable), "unstable": complex_json(kl.unstable)},
            "kappa_right_z0": {"stable": complex_json(kr.stable), "unstable": complex_json(kr.unstable)},
            "zero_count": scan.zero_count,
            "verdict": scan.verdict,
            "inner_radius": scan.inner_radius,
            "points_used": scan.points_per_loop,
        },
        "criteria": {"delta_one_vanishes": delta_one.norm() <= 1e-12},
    }))
}

fn green_csv(out: &mut Output, field: &GreenField) -> Result<(), CliError> {
    let rows = field.rows.iter().enumerate().flat_map(|(n, _)| {
        let n_i = n as i64;
        ((field.j0 - n_i - 1)..=(field.j0 + n_i)).map(move |j| (n, j))
    });
    write_csv(
        out.create("green.csv")?,
        &["n", "j", "value"],
        rows.map(|(n, j)| vec![n.to_string(), j.to_string(), format_float(field.value(n, j))]),
    )
    .map_err(lib_err)
}

fn run_green(a: &GreenArgs, out: &mut Output) -> Result<Value, CliError> {
    let cfg = build_config(&a.config)?;
    let field = match a.kind {
        KindArg::Derivative => derivative_green(&cfg, a.j0, a.n).map_err(lib_err)?,
        other => {
            let params = resolve_triple(&a.config, &a.triple)?;
            let kind = match other {
                KindArg::Full => GreenKind::Full,
                KindArg::FreeLeft => GreenKind::FreeLeft,
                _ => GreenKind::FreeRight,
            };
            temporal_green(kind, &params, a.j0, a.n).map_err(lib_err)?
        }
    };
    green_csv(out, &field)?;
    let sums: Vec<f64> = field.rows.iter().map(|r| r.window_sum()).collect();
    let expected = if a.kind == KindArg::Derivative { 0.0 } else { 1.0 };
    let worst = sums.iter().map(|s| (s - expected).abs()).fold(0.0, f64::max);
    let support = field.rows.iter().enumerate().all(|(n, r)| {
        r.iter()
            .all(|(j, v)| v == 0.0 || (j - a.j0).abs() <= n as i64 || (a.kind == KindArg::Derivative && j - a.j0 == -(n as i64) - 1))
    });
    Ok(json!({
        "config": config_json(&cfg),
        "tolerances": {"conservation": 1e-13},
        "results": {"kind": field.kind, "j0": a.j0, "n_max": a.n, "row_sums_max_error": worst},
        "criteria": {"conservation": worst <= 1e-13, "support_cone": support},
    }))
}

fn run_activation(a: &ActivationArgs, out: &mut Output) -> Result<Value, CliError> {
    let cfg = build_config(&a.config)?;
    let alpha_r = a.alpha_r.unwrap_or(cfg.alpha_r());
    let s = activation_summary(alpha_r, a.n_max).map_err(lib_err)?;
    write_csv(
        out.create("activation_saturation.csv")?,
        &["n", "saturation"],
        s.saturation.iter().map(|(n, v)| vec![n.to_string(), format_float(*v)]),
    )
    .map_err(lib_err)?;
    Ok(json!({
        "config": {"alpha_r": alpha_r},
        "tolerances": {},
        "results": {
            "n_max": s.n_max,
            "sup_abs": s.sup_abs,
            "sup_abs_coarse": s.sup_abs_coarse,
            "saturation_rate": s.saturation_rate,
        },
        "criteria": {"bounded": s.sup_abs.is_finite(), "saturation_decays": s.saturation_rate > 0.0},
    }))
}

fn run_decay(a: &DecayArgs, out: &mut Output) -> Result<Value, CliError> {
    let cfg = build_config(&a.config)?;
    let s = a.tail_exponent.unwrap_or(a.gamma2 + 1.25);
    let half = a.half_width.unwrap_or(a.n_max as i64);
    let h = algebraic_tail_perturbation(s, half);
    let r = measure_semigroup_decay(&cfg, &h, a.gamma1, a.gamma2, a.n_max, a.shift).map_err(lib_err)?;
    decay_csv(out.create("decay.csv")?, &r).map_err(lib_err)?;
    Ok(json!({
        "config": config_json(&cfg),
        "tolerances": {"exponent": 0.1, "r_squared": 0.98},
        "results": {
            "tail_exponent": s,
            "half_width": half,
            "report": r,
        },
        "criteria": {
            "exponent": r.fitted_exponent >= r.theory_exponent - 0.1,
            "fit_quality": r.r_squared >= 0.98,
        },
    }))
}

fn run_simulate(a: &SimulateArgs, out: &mut Output) -> Result<Value, CliError> {
    let cfg = build_config(&a.config)?;
    let gamma = a.sigma + a.beta + 0.125;
    let h = match (a.mass, a.j1, a.j2, a.size) {
        (MassArg::Zero, -20, 30, size) if size == 0.01 => default_zero_mass_perturbation(gamma),
        (MassArg::Positive, -20, 30, size) if size == 0.01 => default_positive_mass_perturbation(gamma),
        (MassArg::Zero, j1, j2, size) => two_wave_perturbation(j1, 1.0, j2, -1.0, gamma, size).map_err(lib_err)?,
        (MassArg::Positive, j1, j2, size) => two_wave_perturbation(j1, 1.0, j2, 1.0, gamma, size).map_err(lib_err)?,
    };
    let report = run_orbital_stability(&cfg, &h, a.beta, a.sigma, a.n).map_err(lib_err)?;
    stability_csv(out.create("stability.csv")?, &report).map_err(lib_err)?;
    let times = a.snapshots.clone().unwrap_or_else(|| {
        let mut t = vec![0, a.n / 20, a.n / 4, a.n];
        t.dedup();
        t
    });
    let snaps = snapshot_run(&cfg, &h, &times).map_err(lib_err)?;
    for (t, s) in times.iter().zip(&snaps) {
        grid_csv(out.create(&format!("snapshot_{t:06}.csv"))?, s).map_err(lib_err)?;
    }
    let largest = match &a.size_scan {
        Some(sizes) => largest_converging_size(&cfg, &h, sizes, a.beta, a.sigma, a.n).map_err(lib_err)?,
        None => report.converged.then_some(a.size),
    };
    let mut results = serde_json::to_value(&report).map_err(lib_err)?;
    results["largest_converging_size"] = json!(largest);
    Ok(json!({
        "config": config_json(&cfg),
        "tolerances": {"converged": 1e-6, "mass_drift": 1e-10, "exponent": 0.15},
        "results": results,
        "criteria": {
            "converged": report.converged,
            "mass_conserved": report.mass_drift <= 1e-10,
            "linf_beta_exponent": report.linf_fitted_exponent >= report.linf_theory_exponent - 0.15,
        },
        "converged": report.converged,
    }))
}

fn stable(a: f64, b: f64) -> (f64, bool) {
    let change = if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    (change, a.is_finite() && b.is_finite() && change < REFINEMENT_TOLERANCE)
}

fn run_verify(a: &VerifyArgs) -> Result<(Value, bool), CliError> {
    let cfg = build_config(&a.config)?;
    let mut results = serde_json::Map::new();
    let mut criteria = serde_json::Map::new();
    let suites: &[Suite] = match a.suite {
        Suite::All => &[Suite::Greens, Suite::Derivative, Suite::Asymptotics, Suite::Activation],
        ref s => std::slice::from_ref(s),
    };
    for suite in suites {
        match suite {
            Suite::Greens | Suite::Derivative => {
                let verify = |n| {
                    if *suite == Suite::Greens {
                        verify_green_bounds(&cfg, n, a.c)
                    } else {
                        verify_derivative_bounds(&cfg, n, a.c)
                    }
                };
                let name = if *suite == Suite::Greens { "greens" } else { "derivative" };
                let base = verify(a.n_max).map_err(lib_err)?;
                criteria.insert(format!("{name}_finite"), json!(base.fitted_c.is_finite()));
                let mut entry = json!({"base": base});
                if a.refine {
                    let fine = verify(2 * a.n_max).map_err(lib_err)?;
                    let (change, ok) = stable(base.fitted_c, fine.fitted_c);
                    entry["refined"] = json!(fine);
                    entry["relative_change"] = json!(change);
                    criteria.insert(format!("{name}_stable"), json!(ok));
                }
                results.insert(name.into(), entry);
            }
            Suite::Asymptotics => {
                let grid = XyGrid::default();
                for side in [Side::Left, Side::Right] {
                    let coeffs = KernelCoeffs::for_side(side, &cfg.spectral_params());
                    let tag = if side == Side::Left { "left" } else { "right" };
                    let mut reports = vec![("a3".to_string(), check_thm_a3(&coeffs, a.c, &grid).map_err(lib_err)?)];
                    for p in 1..=3 {
                        reports.push((format!("a4_p{p}"), check_thm_a4(&coeffs, p, a.c, &grid).map_err(lib_err)?));
                    }
                    for (name, report) in reports {
                        let key = format!("{name}_{tag}");
                        criteria.insert(format!("{key}_finite"), json!(report.all_finite()));
                        let mut entry = json!({"base": report});
                        if a.refine {
                            let fine = if name == "a3" {
                                check_thm_a3(&coeffs, a.c, &grid.refined())
                            } else {
                                check_thm_a4(&coeffs, name.as_bytes()[4] as u32 - b'0' as u32, a.c, &grid.refined())
                            }
                            .map_err(lib_err)?;
                            let change = report.max_relative_change(&fine);
                            criteria.insert(format!("{key}_stable"), json!(fine.all_finite() && change < REFINEMENT_TOLERANCE));
                            entry["relative_change"] = json!(change);
                        }
                        results.insert(key, entry);
                    }
                }
                let ns: Vec<u64> = (0..=4).map(|k| (a.n_max as u64 / 16).max(1) << k).collect();
                let a7 = check_coro_a7(cfg.alpha_r(), a.c, &ns).map_err(lib_err)?;
                criteria.insert("a7_finite".into(), json!(a7.all_finite()));
                results.insert("a7".into(), json!(a7));
            }
            Suite::Activation => {
                let s = activation_summary(cfg.alpha_r(), a.n_max as u64).map_err(lib_err)?;
                let (change, ok) = stable(s.sup_abs, s.sup_abs_coarse);
                criteria.insert("activation_bounded".into(), json!(ok));
                criteria.insert("activation_saturation".into(), json!(s.saturation_rate > 0.0));
                results.insert("activation".into(), json!({"summary": s, "grid_change": change}));
            }
            Suite::All => unreachable!("expanded above"),
        }
    }
    let passed = criteria.values().all(|v| v.as_bool() == Some(true));
    Ok((
        json!({
            "config": config_json(&cfg),
            "tolerances": {"decay_c": a.c, "refinement_change": REFINEMENT_TOLERANCE},
            "results": results,
            "criteria": criteria,
            "passed": passed,
        }),
        passed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_example_resolves_the_unstable_triple() {
        let cmd = parse_command(&["spectrum", "--alpha-l", "0.333333", "--alpha-r", "-0.666667", "--alpha-m", "auto-unstable", "--z0", "2"]).unwrap();
        assert_eq!(cmd.verb, Verb::Spectrum);
        let VerbArgs::Spectrum(a) = &cmd.args else { panic!("wrong verb") };
        let p = resolve_triple(&a.config, &a.triple).unwrap();
        assert_eq!((p.alpha_l, p.alpha_r), (0.333333, -0.666667));
        let d = lopatinskii(&p, Complex64::new(2.0, 0.0)).unwrap();
        assert!(d.norm() < 1e-10);
        assert_eq!(cmd.options["alpha-m"], "auto-unstable");
    }

    #[test]
    fn profile_defaults_are_filled() {
        let cmd = parse_command(&["profile", "--theta", "0.5"]).unwrap();
        assert_eq!(cmd.verb, Verb::Profile);
        assert_eq!(cmd.options["theta"], "0.5");
        assert_eq!(cmd.options["u-l"], "0.5");
        assert_eq!(cmd.options["u-r"], "-0.5");
        assert_eq!(cmd.options["lambda"], "0.5");
        assert_eq!(cmd.options["flux"], "burgers");
        assert_eq!(cmd.output_dir, PathBuf::from("."));
    }

    #[test]
    fn unknown_verbs_and_flags_are_rejected() {
        assert!(matches!(parse_command(&["frobnicate"]), Err(CliError::Usage(_))));
        assert!(matches!(parse_command(&["profile", "--bogus", "1"]), Err(CliError::Usage(_))));
        assert!(matches!(parse_command::<&str>(&[]), Err(CliError::Usage(_))));
    }

    #[test]
    fn inconsistent_options_are_usage_errors() {
        assert!(parse_command(&["profile", "--u-r", "-0.25"]).is_err());
        assert!(parse_command(&["spectrum", "--alpha-l", "0.3"]).is_err());
        assert!(parse_command(&["spectrum", "--alpha-l", "0.3", "--alpha-r", "-0.2"]).is_err());
        assert!(parse_command(&["spectrum", "--alpha-l", "0.3", "--alpha-r", "-0.2", "--alpha-m", "x"]).is_err());
        assert!(parse_command(&["green", "--kind", "derivative", "--alpha-l", "0.3", "--alpha-r", "-0.2", "--alpha-m", "0"]).is_err());
        assert!(parse_command(&["simulate", "--size", "0"]).is_err());
    }

    #[test]
    fn help_examples_all_parse() {
        let examples = help_examples();
        assert_eq!(examples.len(), 7);
        for argv in examples {
            parse_command(&argv).unwrap_or_else(|e| panic!("{argv:?}: {e}"));
        }
    }

    #[test]
    fn every_verb_has_a_name() {
        let names: Vec<&str> = [
            Verb::Profile,
            Verb::Spectrum,
            Verb::Green,
            Verb::Activation,
            Verb::Decay,
            Verb::Simulate,
            Verb::VerifyBounds,
        ]
        .iter()
        .map(Verb::as_str)
        .collect();
        assert_eq!(names, ["profile", "spectrum", "green", "activation", "decay", "simulate", "verify-bounds"]);
    }
}
