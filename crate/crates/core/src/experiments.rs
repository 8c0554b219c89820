//! Decay measurements for the linearized semigroup, nonlinear orbital stability
//! runs, profile-family tables and solution snapshots, with CSV and JSON output.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{weighted_norm, GridFunction, ModelError, NormKind, ShockConfig};
use crate::profiles::{profile_with_mass, stationarity_residual, ProfileError, DEFAULT_HALF_WIDTH};
use crate::scheme::{apply_id_minus_shift, clamp_window, numerical_flux, step_nonlinear, LinearOperator};

/// Norms below this fraction of the initial norm are treated as rounding noise and left out of fits.
pub const NOISE_FLOOR: f64 = 1e-13;
/// Tolerance on `|Σ h|` for data declared to have zero mass.
pub const ZERO_MASS_TOLERANCE: f64 = 1e-12;
/// Window length beyond which nonlinear runs drop cells equal to the end states.
pub const DEFAULT_MAX_WINDOW: usize = 1 << 18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("perturbation must have zero mass, got Σh = {0:e}")]
    NonzeroMass(f64),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("output error: {0}")]
    Output(String),
}

/// Log-log fit of a norm history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    /// Decay exponent `p` in `‖·‖ ≈ C (1+n)^{-p}`; growth gives a negative value.
    pub exponent: f64,
    pub r_squared: f64,
    /// Number of points used.
    pub points: usize,
}

/// Least-squares fit of `log norm` against `log(1+n)` over the upper half of the
/// sampled `n` (in log scale), skipping values under the noise floor.
pub fn fit_decay_exponent(n_values: &[u64], norms: &[f64]) -> PowerFit {
    let reference = norms.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let n_max = n_values.iter().copied().max().unwrap_or(1).max(1) as f64;
    let cut = n_max.sqrt();
    let pts: Vec<(f64, f64)> = n_values
        .iter()
        .zip(norms)
        .filter(|(&n, &v)| n as f64 >= cut && n > 0 && v > NOISE_FLOOR * reference)
        .map(|(&n, &v)| ((1.0 + n as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return PowerFit {
            exponent: f64::NAN,
            r_squared: f64::NAN,
            points: pts.len(),
        };
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    PowerFit {
        exponent: -slope,
        r_squared,
        points: pts.len(),
    }
}

/// `{0, 1, 2, 4, …, 2^k}` up to `n_max`, with `n_max` appended when it is not a power of two.
pub fn geometric_times(n_max: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut n = 1;
    while n <= n_max {
        out.push(n);
        n *= 2;
    }
    if *out.last().unwrap() != n_max {
        out.push(n_max);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub gamma1: f64,
    pub gamma2: f64,
    pub with_shift: bool,
    pub norm_kind: String,
    pub n_values: Vec<u64>,
    /// `‖𝓛ⁿ h‖_{ℓ¹_{γ₁}}` (or of `𝓛ⁿ(Id − S)h`).
    pub norms: Vec<f64>,
    pub fitted_exponent: f64,
    pub r_squared: f64,
    pub theory_exponent: f64,
    pub sup_norms: Vec<f64>,
    pub sup_fitted_exponent: f64,
    pub sup_r_squared: f64,
    pub sup_theory_exponent: f64,
}

/// Decay exponents predicted for `𝓛ⁿ` on zero-mass data or for `𝓛ⁿ(Id − S)` on `ℓ¹_{γ₂}` data:
/// `(ℓ¹ exponent, ℓ^∞ exponent)`.
pub fn theory_exponents(gamma1: f64, gamma2: f64, with_shift: bool) -> (f64, f64) {
    let d = gamma2 - gamma1;
    if with_shift {
        (d + 0.125, d + 1.0 / 3.0 + gamma1.min(0.25))
    } else {
        (d - 0.125, d + gamma1.min(1.0 / 3.0))
    }
}

/// Iterates the linearization around the step shock on `h` (or on `(Id − S)h`)
/// and records weighted norms at geometrically spaced times.
pub fn measure_semigroup_decay(
    cfg: &ShockConfig,
    h: &GridFunction,
    gamma1: f64,
    gamma2: f64,
    n_max: u64,
    with_shift: bool,
) -> Result<DecayReport, ExperimentError> {
    if !(gamma2 >= gamma1 && gamma1 >= 0.0) {
        return Err(ExperimentError::InvalidArgument(format!("need γ₂ ≥ γ₁ ≥ 0, got ({gamma1}, {gamma2})")));
    }
    if !h.has_zero_tails() {
        return Err(ExperimentError::InvalidArgument("perturbation must have zero tails".into()));
    }
    let mass = h.window_sum();
    if !with_shift && mass.abs() > ZERO_MASS_TOLERANCE * (1.0 + weighted_norm(h, 0.0, NormKind::One)?) {
        return Err(ExperimentError::NonzeroMass(mass));
    }
    let op = LinearOperator::full_shock(&cfg.spectral_params());
    let times = geometric_times(n_max);
    let mut w = if with_shift { apply_id_minus_shift(h) } else { h.clone() };
    let (mut norms, mut sup_norms) = (Vec::new(), Vec::new());
    let mut next = 0;
    for n in 0..=n_max {
        if times[next] == n {
            norms.push(weighted_norm(&w, gamma1, NormKind::One)?);
            sup_norms.push(weighted_norm(&w, gamma1, NormKind::Infinity)?);
            next += 1;
            if next == times.len() {
                break;
            }
        }
        w = op.apply(&w).trimmed(0.0);
    }
    let fit = fit_decay_exponent(&times, &norms);
    let sup_fit = fit_decay_exponent(&times, &sup_norms);
    let (theory, sup_theory) = theory_exponents(gamma1, gamma2, with_shift);
    Ok(DecayReport {
        gamma1,
        gamma2,
        with_shift,
        norm_kind: NormKind::One.to_string(),
        n_values: times,
        norms,
        fitted_exponent: fit.exponent,
        r_squared: fit.r_squared,
        theory_exponent: theory,
        sup_norms,
        sup_fitted_exponent: sup_fit.exponent,
        sup_r_squared: sup_fit.r_squared,
        sup_theory_exponent: sup_theory,
    })
}

/// Perturbation `h_j = sgn(j) (1+|j|)^{-s}` on `[-J, J]` (zero at `j = 0`), which
/// has zero mass and lies in `ℓ¹_γ` exactly when `γ < s − 1`.
pub fn algebraic_tail_perturbation(s: f64, half_width: i64) -> GridFunction {
    GridFunction::from_fn(-half_width, half_width, 0.0, 0.0, |j| {
        (j.signum() as f64) * (1.0 + j.unsigned_abs() as f64).powf(-s)
    })
}

/// Nonnegative perturbation `h_j = (1+|j|)^{-s}` on `[-J, J]`.
pub fn algebraic_bump(s: f64, half_width: i64) -> GridFunction {
    GridFunction::from_fn(-half_width, half_width, 0.0, 0.0, |j| (1.0 + j.unsigned_abs() as f64).powf(-s))
}

/// `a δ_{j1} + b δ_{j2}` rescaled to `‖h‖_{ℓ¹_γ} = size`.
pub fn two_wave_perturbation(j1: i64, a: f64, j2: i64, b: f64, gamma: f64, size: f64) -> Result<GridFunction, ExperimentError> {
    let lo = j1.min(j2);
    let hi = j1.max(j2);
    let raw = GridFunction::from_fn(lo, hi, 0.0, 0.0, |j| {
        let mut v = 0.0;
        if j == j1 {
            v += a;
        }
        if j == j2 {
            v += b;
        }
        v
    });
    let norm = weighted_norm(&raw, gamma, NormKind::One)?;
    if norm == 0.0 {
        return Err(ExperimentError::InvalidArgument("perturbation vanishes".into()));
    }
    Ok(raw.map(|v| v * size / norm))
}

/// Zero-mass perturbation `δ_{-20} − δ_{30}` with `‖h‖_{ℓ¹_γ} = 0.01`.
pub fn default_zero_mass_perturbation(gamma: f64) -> GridFunction {
    two_wave_perturbation(-20, 1.0, 30, -1.0, gamma, 0.01).expect("nonzero data")
}

/// Positive-mass perturbation `δ_{-20} + δ_{30}` with `‖h‖_{ℓ¹_γ} = 0.01`.
pub fn default_positive_mass_perturbation(gamma: f64) -> GridFunction {
    two_wave_perturbation(-20, 1.0, 30, 1.0, gamma, 0.01).expect("nonzero data")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub theta: f64,
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub n_values: Vec<u64>,
    pub l1_beta_norms: Vec<f64>,
    pub linf_beta_norms: Vec<f64>,
    /// `‖uⁿ − v^θ‖_∞` at the recorded times.
    pub sup_distances: Vec<f64>,
    /// `max_n |Σ(uⁿ − ū) − θ| / max(‖h‖_{ℓ¹}, |θ|)`, including mass dropped by window clamping.
    pub mass_drift: f64,
    pub converged: bool,
    /// First recorded time at which `‖pⁿ‖_{ℓ^∞_β}` fell below `1e-6`.
    pub converged_at: Option<u64>,
    pub linf_fitted_exponent: f64,
    pub linf_r_squared: f64,
    pub l1_fitted_exponent: f64,
    pub linf_theory_exponent: f64,
}

/// Runs the nonlinear scheme from `ū + h` and measures `pⁿ = uⁿ − v^θ` with `θ = Σh`.
pub fn run_orbital_stability(cfg: &ShockConfig, h: &GridFunction, beta: f64, sigma: f64, n_max: u64) -> Result<StabilityReport, ExperimentError> {
    if !(beta >= 0.0 && sigma >= 0.0 && beta + sigma >= 5.0 / 12.0 - 1e-15 && sigma < beta + 0.125) {
        return Err(ExperimentError::InvalidArgument(format!(
            "need β + σ ≥ 5/12 and 0 ≤ σ < β + 1/8, got (β, σ) = ({beta}, {sigma})"
        )));
    }
    if !h.has_zero_tails() {
        return Err(ExperimentError::InvalidArgument("perturbation must have zero tails".into()));
    }
    let theta = h.window_sum();
    let half_width = DEFAULT_HALF_WIDTH.max(h.j_min().abs()).max(h.j_max().abs());
    let target = profile_with_mass(cfg, theta, half_width)?.grid;
    let step = GridFunction::step_shock(cfg.u_l(), cfg.u_r());
    let mut w = h.trimmed(0.0);
    let scale = weighted_norm(h, 0.0, NormKind::One)?.max(theta.abs()).max(f64::MIN_POSITIVE);

    let times = geometric_times(n_max);
    let (mut l1, mut linf, mut sup) = (Vec::new(), Vec::new(), Vec::new());
    let mut drift: f64 = 0.0;
    let mut dropped = 0.0;
    let mut converged_at = None;
    let mut next = 0;
    for n in 0..=n_max {
        drift = drift.max((w.window_sum() + dropped - theta).abs() / scale);
        if times[next] == n {
            let lo = w.j_min().min(target.j_min());
            let hi = w.j_max().max(target.j_max());
            let p = GridFunction::from_fn(lo, hi, 0.0, 0.0, |j| (step.get(j) + w.get(j)) - target.get(j));
            l1.push(weighted_norm(&p, beta, NormKind::One)?);
            let norm = weighted_norm(&p, beta, NormKind::Infinity)?;
            linf.push(norm);
            sup.push(p.sup_norm());
            if converged_at.is_none() && norm < 1e-6 && n > 0 {
                converged_at = Some(n);
            }
            next += 1;
            if next == times.len() {
                break;
            }
        }
        let (clamped, lost) = clamp_window(&step_deviation(cfg, &step, &w).trimmed(0.0), DEFAULT_MAX_WINDOW);
        dropped += lost;
        w = clamped;
    }
    let linf_fit = fit_decay_exponent(&times, &linf);
    let l1_fit = fit_decay_exponent(&times, &l1);
    Ok(StabilityReport {
        theta,
        beta,
        sigma,
        gamma: sigma + beta + 0.125,
        n_values: times,
        l1_beta_norms: l1,
        linf_beta_norms: linf,
        sup_distances: sup,
        mass_drift: drift,
        converged: converged_at.is_some(),
        converged_at,
        linf_fitted_exponent: linf_fit.exponent,
        linf_r_squared: linf_fit.r_squared,
        l1_fitted_exponent: l1_fit.exponent,
        linf_theory_exponent: sigma + 11.0 / 24.0,
    })
}

/// Rescales `h` to each size in `sizes`, measured in ℓ¹_γ with γ = σ + β + 1/8, and returns the largest one whose orbital run converged.
pub fn largest_converging_size(
    cfg: &ShockConfig,
    h: &GridFunction,
    sizes: &[f64],
    beta: f64,
    sigma: f64,
    n_max: u64,
) -> Result<Option<f64>, ExperimentError> {
    let base = weighted_norm(h, sigma + beta + 0.125, NormKind::One)?;
    if base == 0.0 {
        return Err(ExperimentError::InvalidArgument("perturbation is identically zero".into()));
    }
    let mut best: Option<f64> = None;
    for &size in sizes {
        if !(size > 0.0 && size.is_finite()) {
            return Err(ExperimentError::InvalidArgument(format!("size must be positive, got {size}")));
        }
        let scaled = h.map(|x| x * size / base);
        if run_orbital_stability(cfg, &scaled, beta, sigma, n_max)?.converged {
            best = Some(best.map_or(size, |b| b.max(size)));
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub theta: f64,
    pub v0: f64,
    pub v1: f64,
    pub residual: f64,
}

/// One step of the nonlinear scheme written for the deviation `w = u − ū` from a stationary state `ū`.
/// Updating `w` rather than `u` keeps the rounding error of each cell proportional to `|w_j|`.
fn step_deviation(cfg: &ShockConfig, base: &GridFunction, w: &GridFunction) -> GridFunction {
    let lambda = cfg.lambda();
    let (lo, hi) = (w.j_min() - 1, w.j_max() + 1);
    let u = |j: i64| base.get(j) + w.get(j);
    let reference = |j: i64| numerical_flux(cfg, base.get(j), base.get(j + 1));
    let mut prev = numerical_flux(cfg, u(lo - 1), u(lo)) - reference(lo - 1);
    let values = (lo..=hi)
        .map(|j| {
            let next = numerical_flux(cfg, u(j), u(j + 1)) - reference(j);
            let v = w.get(j) - lambda * (next - prev);
            prev = next;
            v
        })
        .collect();
    GridFunction::new(lo, values, 0.0, 0.0).expect("nonempty window")
}

/// `(θ, v₀^θ, v₁^θ, residual)` for each requested excess mass.
pub fn reproduce_profile_family(cfg: &ShockConfig, theta_grid: &[f64]) -> Result<Vec<ProfileRow>, ExperimentError> {
    theta_grid
        .par_iter()
        .map(|&theta| {
            let p = profile_with_mass(cfg, theta, DEFAULT_HALF_WIDTH)?;
            Ok(ProfileRow {
                theta,
                v0: p.grid.get(0),
                v1: p.grid.get(1),
                residual: stationarity_residual(cfg, &p.grid),
            })
        })
        .collect()
}

/// Solution states of the nonlinear scheme from `ū + h` at the requested (sorted) times,
/// trimmed to the cells that differ from the end states by more than `1e-14`.
pub fn snapshot_run(cfg: &ShockConfig, h: &GridFunction, snapshot_times: &[u64]) -> Result<Vec<GridFunction>, ExperimentError> {
    if snapshot_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(ExperimentError::InvalidArgument("snapshot times must be sorted".into()));
    }
    if !h.has_zero_tails() {
        return Err(ExperimentError::InvalidArgument("perturbation must have zero tails".into()));
    }
    let step = GridFunction::step_shock(cfg.u_l(), cfg.u_r());
    let mut u = GridFunction::from_fn(h.j_min().min(0), h.j_max().max(1), cfg.u_l(), cfg.u_r(), |j| step.get(j) + h.get(j));
    let mut out = Vec::with_capacity(snapshot_times.len());
    let mut n = 0;
    for &t in snapshot_times {
        while n < t {
            u = step_nonlinear(cfg, &u).trimmed(0.0);
            n += 1;
        }
        out.push(u.trimmed(1e-14));
    }
    Ok(out)
}

/// Formats a float with 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV table with a header row and LF line endings.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(|e| ExperimentError::Output(e.to_string()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| ExperimentError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| ExperimentError::Output(e.to_string()))
}

pub fn decay_csv<W: Write>(out: W, report: &DecayReport) -> Result<(), ExperimentError> {
    write_csv(
        out,
        &["n", "l1_norm", "linf_norm"],
        report
            .n_values
            .iter()
            .zip(&report.norms)
            .zip(&report.sup_norms)
            .map(|((n, a), b)| vec![n.to_string(), format_float(*a), format_float(*b)]),
    )
}

pub fn stability_csv<W: Write>(out: W, report: &StabilityReport) -> Result<(), ExperimentError> {
    write_csv(
        out,
        &["n", "l1_beta", "linf_beta", "sup_distance"],
        (0..report.n_values.len()).map(|k| {
            vec![
                report.n_values[k].to_string(),
                format_float(report.l1_beta_norms[k]),
                format_float(report.linf_beta_norms[k]),
                format_float(report.sup_distances[k]),
            ]
        }),
    )
}

pub fn profile_family_csv<W: Write>(out: W, rows: &[ProfileRow]) -> Result<(), ExperimentError> {
    write_csv(
        out,
        &["theta", "v0", "v1", "residual"],
        rows.iter()
            .map(|r| vec![format_float(r.theta), format_float(r.v0), format_float(r.v1), format_float(r.residual)]),
    )
}

/// Writes a grid function as `j,value` rows.
pub fn grid_csv<W: Write>(out: W, v: &GridFunction) -> Result<(), ExperimentError> {
    write_csv(out, &["j", "value"], v.iter().map(|(j, x)| vec![j.to_string(), format_float(x)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{excess_mass, make_shock_config, Flux};

    fn burgers() -> ShockConfig {
        ShockConfig::burgers_default()
    }

    #[test]
    fn geometric_grid() {
        assert_eq!(geometric_times(8), vec![0, 1, 2, 4, 8]);
        assert_eq!(geometric_times(10), vec![0, 1, 2, 4, 8, 10]);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let n: Vec<u64> = geometric_times(4096);
        let v: Vec<f64> = n.iter().map(|&k| 3.0 * (1.0 + k as f64).powf(-0.7)).collect();
        let fit = fit_decay_exponent(&n, &v);
        assert!((fit.exponent - 0.7).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_floor_values_are_skipped() {
        let n: Vec<u64> = geometric_times(1024);
        let v: Vec<f64> = n.iter().map(|&k| if k < 256 { (1.0 + k as f64).powf(-1.0) } else { 1e-20 }).collect();
        let fit = fit_decay_exponent(&n, &v);
        assert_eq!(fit.points, 3);
        assert!((fit.exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theory_exponent_table() {
        assert_eq!(theory_exponents(0.0, 1.0, false), (0.875, 1.0));
        assert_eq!(theory_exponents(0.0, 0.0, true), (0.125, 1.0 / 3.0));
        assert_eq!(theory_exponents(0.5, 1.0, false).1, 0.5 + 1.0 / 3.0);
    }

    #[test]
    fn nonzero_mass_is_rejected() {
        let h = GridFunction::delta(3);
        assert!(matches!(
            measure_semigroup_decay(&burgers(), &h, 0.0, 1.0, 16, false),
            Err(ExperimentError::NonzeroMass(_))
        ));
        assert!(measure_semigroup_decay(&burgers(), &h, 0.0, 0.0, 16, true).is_ok());
        assert!(measure_semigroup_decay(&burgers(), &h, 1.0, 0.0, 16, true).is_err());
    }

    #[test]
    fn algebraic_perturbation_has_zero_mass() {
        let h = algebraic_tail_perturbation(2.5, 500);
        assert_eq!(h.window_sum(), 0.0);
        assert_eq!(h.get(0), 0.0);
        assert!(h.get(3) > 0.0 && h.get(-3) < 0.0);
    }

    #[test]
    fn default_perturbations() {
        let h = default_zero_mass_perturbation(0.545);
        assert!(h.window_sum().abs() < 1e-18);
        assert!((weighted_norm(&h, 0.545, NormKind::One).unwrap() - 0.01).abs() < 1e-15);
        assert!(default_positive_mass_perturbation(0.545).window_sum() > 0.0);
    }

    #[test]
    fn decay_report_is_deterministic() {
        let h = algebraic_tail_perturbation(2.5, 256);
        let a = measure_semigroup_decay(&burgers(), &h, 0.0, 1.0, 256, false).unwrap();
        let b = measure_semigroup_decay(&burgers(), &h, 0.0, 1.0, 256, false).unwrap();
        assert_eq!(a, b);
        assert!(a.norms.iter().all(|&v| v > 0.0));
        assert!(a.n_values.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn profile_family_rows() {
        let rows = reproduce_profile_family(&burgers(), &[0.0, 0.25, 1.0, 1.25]).unwrap();
        assert_eq!((rows[0].v0, rows[0].v1), (0.5, -0.5));
        assert!((rows[2].v0 - 0.5).abs() < 1e-8 && (rows[2].v1 - 0.5).abs() < 1e-8);
        let shifted = profile_with_mass(&burgers(), 0.25, DEFAULT_HALF_WIDTH).unwrap();
        assert!((rows[3].v1 - shifted.grid.get(0)).abs() < 1e-8);
        assert!(rows.iter().all(|r| r.residual <= 1e-10));
    }

    #[test]
    fn snapshots_conserve_mass() {
        let cfg = burgers();
        let h = default_zero_mass_perturbation(0.545);
        let snaps = snapshot_run(&cfg, &h, &[0, 40, 150, 400]).unwrap();
        let step = GridFunction::step_shock(0.5, -0.5);
        assert_eq!(snaps[0], GridFunction::from_fn(-20, 30, 0.5, -0.5, |j| step.get(j) + h.get(j)).trimmed(1e-14));
        for s in &snaps {
            assert!(excess_mass(s, &step).unwrap().abs() < 1e-12);
        }
        assert!(snapshot_run(&cfg, &h, &[5, 2]).is_err());
    }

    #[test]
    fn zero_mass_run_approaches_the_step() {
        let cfg = burgers();
        let h = default_zero_mass_perturbation(0.545);
        let step = GridFunction::step_shock(0.5, -0.5);
        let snaps = snapshot_run(&cfg, &h, &[200, 1500]).unwrap();
        let dist = |u: &GridFunction| (u.j_min().min(-5)..=u.j_max().max(5)).map(|j| (u.get(j) - step.get(j)).abs()).fold(0.0, f64::max);
        assert!(dist(&snaps[1]) < dist(&snaps[0]));
    }

    #[test]
    fn size_scan_keeps_the_largest_converging_size() {
        let h = default_zero_mass_perturbation(0.545);
        let best = largest_converging_size(&burgers(), &h, &[0.005, 0.01], 0.3, 0.12, 2000).unwrap();
        assert_eq!(best, Some(0.01));
        assert!(largest_converging_size(&burgers(), &h, &[-1.0], 0.3, 0.12, 10).is_err());
    }

    #[test]
    fn stability_preconditions() {
        let h = default_zero_mass_perturbation(0.545);
        assert!(run_orbital_stability(&burgers(), &h, 0.1, 0.1, 10).is_err());
        assert!(run_orbital_stability(&burgers(), &h, 0.3, 0.5, 10).is_err());
        let cubic = Flux::new("cubic", |u: f64| u * u * u / 3.0 - u, |u: f64| u * u - 1.0);
        let cfg = make_shock_config(cubic, 0.0, 0.0, 0.5);
        assert!(cfg.is_err());
    }

    #[test]
    fn deviation_step_matches_the_scheme() {
        let cfg = burgers();
        let step = GridFunction::step_shock(0.5, -0.5);
        let h = default_positive_mass_perturbation(0.3);
        let u = GridFunction::from_fn(-20, 30, 0.5, -0.5, |j| step.get(j) + h.get(j));
        let direct = step_nonlinear(&cfg, &u);
        let dev = step_deviation(&cfg, &step, &h);
        for j in -25..=35 {
            assert!((direct.get(j) - (step.get(j) + dev.get(j))).abs() < 1e-15);
        }
    }

    #[test]
    fn orbital_runs_converge_with_conserved_mass() {
        let cfg = burgers();
        for h in [default_zero_mass_perturbation(0.545), default_positive_mass_perturbation(0.545)] {
            let r = run_orbital_stability(&cfg, &h, 0.3, 0.12, 2000).unwrap();
            assert!(r.converged);
            assert!(r.mass_drift <= 1e-10);
            assert!((r.gamma - 0.545).abs() < 1e-15);
            assert_eq!(r.n_values.len(), r.linf_beta_norms.len());
            assert!(r.linf_fitted_exponent >= r.linf_theory_exponent - 0.15);
        }
    }

    #[test]
    fn csv_has_fixed_precision() {
        let mut buf = Vec::new();
        grid_csv(&mut buf, &GridFunction::from_fn(0, 1, 0.0, 0.0, |j| 0.1 * j as f64)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "j,value\n0,0.0000000000000000e0\n1,1.0000000000000001e-1\n");
        assert_eq!(format_float(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
