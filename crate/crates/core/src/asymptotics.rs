//! Dispersive approximate Green's kernel `G(x,y)`, its correctors `G_p`, the
//! oscillatory profile `𝔤`, and the activation functions, together with
//! empirical checks of their pointwise bounds.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::greens::envelope_m;
use crate::model::SpectralParams;
use crate::quadrature::{integrate, NonConvergence, QuadOptions};
use crate::spectral::Side;

/// Exponent budget for truncating Gaussian-type tails: `e^{-44} < 1e-19`.
const TAIL_EXPONENT: f64 = 44.0;
const MAX_INITIAL_PANELS: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error(transparent)]
    QuadratureNonConvergence(#[from] NonConvergence),
    #[error("activation depends on the contour abscissa: {at_eta} at η vs {at_double_eta} at 2η")]
    EtaDependence { at_eta: f64, at_double_eta: f64 },
    #[error("imaginary residue {imag:e} of a real kernel exceeds tolerance (real part {real:e})")]
    ImaginaryResidue { real: f64, imag: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Coefficients of the cubic and quartic terms in the expansion of the
/// amplification factor of the free scheme with Courant number `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelCoeffs {
    pub c3: f64,
    pub c4: f64,
    pub alpha: f64,
}

impl KernelCoeffs {
    pub fn from_alpha(alpha: f64) -> Result<Self, AsymptoticsError> {
        if !(alpha.abs() < 1.0 && alpha != 0.0) {
            return Err(AsymptoticsError::InvalidArgument(format!("alpha = {alpha} must lie in (-1,1)\\{{0}}")));
        }
        let s = 1.0 - alpha * alpha;
        Ok(Self {
            c3: alpha * s / 6.0,
            c4: alpha * alpha * s / 8.0,
            alpha,
        })
    }

    pub fn for_side(side: Side, params: &SpectralParams) -> Self {
        let alpha = match side {
            Side::Left => params.alpha_l,
            Side::Right => params.alpha_r,
        };
        Self::from_alpha(alpha).expect("validated Courant numbers")
    }

    /// Coefficients whose activation describes the mass a source on the given
    /// side has transmitted across the shock. On the left this is the mirror
    /// image `α ↦ −α_ℓ` of the left kernel, so that `A(x,y)` rises from 0 to 1
    /// as `x = j0 + nα_ℓ` increases through the shock.
    pub fn transmission(side: Side, params: &SpectralParams) -> Self {
        match side {
            Side::Left => Self::from_alpha(-params.alpha_l).expect("validated Courant numbers"),
            Side::Right => Self::for_side(Side::Right, params),
        }
    }

    /// Truncation half-width for `θ` so that `e^{-c₄ y θ⁴} < e^{-44}`.
    pub fn theta_cut(&self, y: f64) -> f64 {
        (TAIL_EXPONENT / (self.c4 * y)).powf(0.25)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Abscissa of the vertical contour; `None` selects `1/y`.
    pub eta: Option<f64>,
    /// Truncation half-width; `None` selects the quartic-damping rule.
    pub theta_cut: Option<f64>,
    pub rel_tol: f64,
    pub max_refinement: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            eta: None,
            theta_cut: None,
            rel_tol: 1e-9,
            max_refinement: 20,
        }
    }
}

impl QuadratureSpec {
    fn options(&self, panels: usize) -> QuadOptions {
        QuadOptions {
            rel_tol: self.rel_tol,
            abs_tol: 0.0,
            max_level: self.max_refinement,
            initial_panels: panels.clamp(8, MAX_INITIAL_PANELS),
        }
    }
}

/// A value together with its quadrature error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn check_y(y: f64) -> Result<(), AsymptoticsError> {
    if y.is_finite() && y >= 1e-3 {
        Ok(())
    } else {
        Err(AsymptoticsError::InvalidArgument(format!("y = {y} must be at least 1e-3")))
    }
}

fn real_part(value: Complex64, error: f64, rel_tol: f64) -> Result<f64, AsymptoticsError> {
    if value.im.abs() > rel_tol * (1.0 + value.re.abs()) + 2.0 * error {
        return Err(AsymptoticsError::ImaginaryResidue {
            real: value.re,
            imag: value.im,
        });
    }
    Ok(value.re)
}

/// `G_p(x,y) = (1/2π) ∫ (iθ)^p e^{ixθ + ic₃yθ³ − c₄yθ⁴} dθ` with its error estimate.
pub fn corrector_g_estimate(coeffs: &KernelCoeffs, p: u32, x: f64, y: f64, spec: &QuadratureSpec) -> Result<Estimate, AsymptoticsError> {
    check_y(y)?;
    let cut = spec.theta_cut.unwrap_or_else(|| coeffs.theta_cut(y));
    let phase = 2.0 * x.abs() * cut + 2.0 * coeffs.c3.abs() * y * cut.powi(3);
    let panels = (phase / PI).ceil() as usize;
    let (c3y, c4y) = (coeffs.c3 * y, coeffs.c4 * y);
    let ip = Complex64::i().powu(p);
    let r = integrate(
        |t| {
            let t2 = t * t;
            let e = Complex64::new(-c4y * t2 * t2, x * t + c3y * t2 * t).exp();
            if p == 0 {
                e
            } else {
                e * ip * t.powi(p as i32)
            }
        },
        -cut,
        cut,
        &spec.options(panels),
    )?;
    let value = r.value / (2.0 * PI);
    let error = r.error / (2.0 * PI);
    Ok(Estimate {
        value: real_part(value, error, spec.rel_tol)?,
        error,
    })
}

/// `G_p(x,y)`; `p = 0` is the approximate Green's kernel `G`.
pub fn corrector_g(coeffs: &KernelCoeffs, p: u32, x: f64, y: f64) -> Result<f64, AsymptoticsError> {
    corrector_g_estimate(coeffs, p, x, y, &QuadratureSpec::default()).map(|e| e.value)
}

/// Approximate Green's kernel `G(x,y)`.
pub fn kernel_g(coeffs: &KernelCoeffs, x: f64, y: f64) -> Result<f64, AsymptoticsError> {
    corrector_g(coeffs, 0, x, y)
}

/// Approximate free Green's function `𝔾_j^n = G(j − αn, n)`.
pub fn free_green_asymptotic(coeffs: &KernelCoeffs, j: i64, n: u64) -> Result<f64, AsymptoticsError> {
    if n == 0 {
        return Err(AsymptoticsError::InvalidArgument("n must be positive".into()));
    }
    kernel_g(coeffs, j as f64 - coeffs.alpha * n as f64, n as f64)
}

/// Oscillatory profile `𝔤(x,y)` describing `G` on the side where `x` has the sign opposite to `c₃`.
pub fn oscillatory_profile(coeffs: &KernelCoeffs, x: f64, y: f64) -> Result<Complex64, AsymptoticsError> {
    check_y(y)?;
    let c3a = coeffs.c3.abs();
    let ax = x.abs();
    let half = (2.0 * ax / (3.0 * c3a * y)).sqrt();
    if half == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let width = (3.0 * c3a * ax * y).sqrt();
    let cubic = Complex64::from_polar(coeffs.c3 * y, -FRAC_PI_4);
    let spec = QuadratureSpec::default();
    let r = integrate(
        |t| (cubic * t.powi(3) - width * t * t).exp(),
        -half,
        half,
        &spec.options(8),
    )?;
    let prefactor = (-coeffs.c4 * x * x / (9.0 * coeffs.c3 * coeffs.c3 * y)).exp() / (2.0 * PI);
    let phase = 2.0 * ax.powf(1.5) / (3.0 * (3.0 * c3a * y).sqrt()) - FRAC_PI_4;
    Ok(Complex64::from_polar(prefactor, phase) * r.value)
}

fn activation_cut(coeffs: &KernelCoeffs, y: f64, eta: f64) -> f64 {
    let a = coeffs.c4 * y;
    let b = 3.0 * coeffs.c3.abs() * y * eta + 6.0 * coeffs.c4 * y * eta * eta;
    ((b + (b * b + 4.0 * a * TAIL_EXPONENT).sqrt()) / (2.0 * a)).sqrt()
}

fn activation_at(coeffs: &KernelCoeffs, x: f64, y: f64, eta: f64, spec: &QuadratureSpec) -> Result<Estimate, AsymptoticsError> {
    let cut = spec.theta_cut.unwrap_or_else(|| activation_cut(coeffs, y, eta));
    let phase = 2.0 * x.abs() * cut + 2.0 * coeffs.c3.abs() * y * cut.powi(3);
    let panels = (phase / PI).ceil() as usize;
    let (c3y, c4y) = (coeffs.c3 * y, coeffs.c4 * y);
    let r = integrate(
        |t| {
            let s = Complex64::new(eta, t);
            let s2 = s * s;
            (x * s - c3y * s2 * s - c4y * s2 * s2).exp() / s
        },
        -cut,
        cut,
        &spec.options(panels),
    )?;
    let value = r.value / (2.0 * PI);
    let error = r.error / (2.0 * PI);
    Ok(Estimate {
        value: real_part(value, error, spec.rel_tol)?,
        error,
    })
}

/// Activation function `A(x,y)` by quadrature along the vertical line
/// `Re s = η`; the value is recomputed at `2η` and compared.
pub fn activation_estimate(coeffs: &KernelCoeffs, x: f64, y: f64, spec: &QuadratureSpec) -> Result<Estimate, AsymptoticsError> {
    if !(y >= 1.0) {
        return Err(AsymptoticsError::InvalidArgument(format!("y = {y} must be at least 1")));
    }
    let eta = spec.eta.unwrap_or(1.0 / y);
    let first = activation_at(coeffs, x, y, eta, spec)?;
    let second = activation_at(coeffs, x, y, 2.0 * eta, spec)?;
    if (first.value - second.value).abs() > 10.0 * spec.rel_tol * (1.0 + first.value.abs()) {
        return Err(AsymptoticsError::EtaDependence {
            at_eta: first.value,
            at_double_eta: second.value,
        });
    }
    Ok(first)
}

pub fn activation(coeffs: &KernelCoeffs, x: f64, y: f64, spec: &QuadratureSpec) -> Result<f64, AsymptoticsError> {
    activation_estimate(coeffs, x, y, spec).map(|e| e.value)
}

/// Activation on one side of the shock, built from [`KernelCoeffs::transmission`].
pub fn activation_side(side: Side, params: &SpectralParams, x: f64, y: f64, spec: &QuadratureSpec) -> Result<f64, AsymptoticsError> {
    activation(&KernelCoeffs::transmission(side, params), x, y, spec)
}

/// Point below which `∫_{-∞}^{x₀} |G(ξ,y)| dξ` is negligible (below `1e-9`).
pub fn primitive_cutoff(y: f64) -> f64 {
    -(12.0 * y.sqrt() + 12.0)
}

/// `∫_{-∞}^x G(ξ,y) dξ` at every point of `xs` (in any order), accumulated along
/// the sorted points starting from the tail cutoff.
pub fn primitive_on_grid(coeffs: &KernelCoeffs, xs: &[f64], y: f64) -> Result<Vec<Estimate>, AsymptoticsError> {
    check_y(y)?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![Estimate { value: 0.0, error: 0.0 }; xs.len()];
    let start = primitive_cutoff(y).min(xs.iter().copied().fold(f64::INFINITY, f64::min));
    let spec = QuadratureSpec::default();
    let inner = QuadratureSpec {
        rel_tol: 1e-12,
        ..spec
    };
    let mut left = start;
    let mut acc = 0.0;
    let mut acc_err = 0.0;
    for &k in &order {
        let right = xs[k];
        if right > left {
            let panels = ((right - left) / y.cbrt()).ceil() as usize;
            let mut failure = None;
            let r = integrate(
                |xi| match corrector_g_estimate(coeffs, 0, xi, y, &inner) {
                    Ok(e) => Complex64::new(e.value, 0.0),
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                },
                left,
                right,
                &QuadOptions {
                    rel_tol: 1e-11,
                    abs_tol: 1e-14,
                    max_level: spec.max_refinement,
                    initial_panels: panels.clamp(1, MAX_INITIAL_PANELS),
                },
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            acc += r.value.re;
            acc_err += r.error;
            left = right;
        }
        out[k] = Estimate {
            value: acc,
            error: acc_err + 1e-9,
        };
    }
    Ok(out)
}

/// Activation by integrating the kernel in space, independently of the contour route.
pub fn activation_via_primitive(coeffs: &KernelCoeffs, x: f64, y: f64) -> Result<f64, AsymptoticsError> {
    if !(y >= 1.0) {
        return Err(AsymptoticsError::InvalidArgument(format!("y = {y} must be at least 1")));
    }
    Ok(primitive_on_grid(coeffs, &[x], y)?[0].value)
}

/// `A(x₀ + m, y)` for `m = 0, …, count − 1`, from a single FFT of the contour
/// integrand sampled on a uniform `θ` grid. The trapezoidal sum is exact up to
/// aliasing terms of size `e^{-36}` relative to `max |A|`.
pub fn activation_lattice(coeffs: &KernelCoeffs, x0: f64, count: usize, y: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let eta = 1.0 / y;
    let band = activation_cut(coeffs, y, eta);
    let q = (band / PI).ceil().max(1.0) as usize;
    let period = (count as f64 - 1.0) + 36.0 / eta;
    let n = ((period * q as f64).ceil() as usize).next_power_of_two();
    let dx = 1.0 / q as f64;
    let h = 2.0 * PI / (n as f64 * dx);
    let (c3y, c4y) = (coeffs.c3 * y, coeffs.c4 * y);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let kk = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            let t = kk * h;
            let s = Complex64::new(eta, t);
            let s2 = s * s;
            (-c3y * s2 * s - c4y * s2 * s2).exp() / s * Complex64::from_polar(1.0, x0 * t)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    (0..count)
        .map(|m| {
            let x = x0 + m as f64;
            ((x * eta).exp() * buf[m * q] * (h / (2.0 * PI))).re
        })
        .collect()
}

/// `𝔅_r^n(j₀)` by direct quadrature of `(1/2π)∫ e^{int − j₀ φ_r(it)} dt`.
pub fn relation_bg_direct(alpha_r: f64, j0: u64, n: u64) -> Result<f64, AsymptoticsError> {
    if !(alpha_r < 0.0 && alpha_r > -1.0) || j0 == 0 {
        return Err(AsymptoticsError::InvalidArgument("need alpha_r in (-1,0) and j0 ≥ 1".into()));
    }
    let (a, j0f, nf) = (alpha_r, j0 as f64, n as f64);
    let s = 1.0 - a * a;
    let quartic = j0f * s / (8.0 * a.abs().powi(3));
    let cut = (TAIL_EXPONENT / quartic).powf(0.25);
    let phase = 2.0 * (nf + j0f / a.abs()) * cut + 2.0 * j0f * s / (6.0 * a.abs().powi(3)) * cut.powi(3);
    let spec = QuadratureSpec::default();
    let r = integrate(
        |t| {
            let tau = Complex64::new(0.0, t);
            let phi = -tau / a + s * tau.powu(3) / (6.0 * a.powi(3)) - s * tau.powu(4) / (8.0 * a.powi(3));
            (nf * tau - j0f * phi).exp()
        },
        -cut,
        cut,
        &spec.options((phase / PI).ceil() as usize),
    )?;
    real_part(r.value / (2.0 * PI), r.error, spec.rel_tol)
}

/// `|α_r| · G_r(−j₀ + n|α_r|, j₀/|α_r|)`.
pub fn relation_bg_kernel(alpha_r: f64, j0: u64, n: u64) -> Result<f64, AsymptoticsError> {
    let coeffs = KernelCoeffs::from_alpha(alpha_r)?;
    let a = alpha_r.abs();
    Ok(a * kernel_g(&coeffs, -(j0 as f64) + n as f64 * a, j0 as f64 / a)?)
}

/// Sampling grid in `(x, y)` used by the kernel bound checks. Refinement keeps
/// every previous sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct XyGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub y_count: usize,
    pub x_per_regime: usize,
    /// The constant `𝐜` separating the near and far regimes.
    pub c_split: f64,
}

impl Default for XyGrid {
    fn default() -> Self {
        Self {
            y_min: 1.0,
            y_max: 1024.0,
            y_count: 6,
            x_per_regime: 9,
            c_split: 0.1,
        }
    }
}

impl XyGrid {
    pub fn refined(&self) -> Self {
        Self {
            y_count: 2 * self.y_count - 1,
            x_per_regime: 2 * self.x_per_regime - 1,
            ..*self
        }
    }

    pub fn ys(&self) -> Vec<f64> {
        if self.y_count == 1 {
            return vec![self.y_min];
        }
        let r = (self.y_max / self.y_min).ln() / (self.y_count - 1) as f64;
        (0..self.y_count).map(|k| self.y_min * (r * k as f64).exp()).collect()
    }

    fn xs(&self, lo: f64, hi: f64) -> Vec<f64> {
        if !(hi > lo) {
            return Vec::new();
        }
        let m = self.x_per_regime.max(2);
        (0..m).map(|k| lo + (hi - lo) * k as f64 / (m - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegimeFit {
    pub regime: String,
    pub fitted_c: f64,
    pub worst_x: f64,
    pub worst_y: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub coeffs: KernelCoeffs,
    pub decay_c_used: f64,
    pub regimes: Vec<RegimeFit>,
}

impl AsymptoticReport {
    pub fn regime(&self, name: &str) -> Option<&RegimeFit> {
        self.regimes.iter().find(|r| r.regime == name)
    }

    /// Every fitted constant is finite.
    pub fn all_finite(&self) -> bool {
        self.regimes.iter().all(|r| r.fitted_c.is_finite())
    }

    /// Largest relative change of a fitted constant between two reports on nested grids.
    pub fn max_relative_change(&self, refined: &AsymptoticReport) -> f64 {
        self.regimes
            .iter()
            .filter_map(|r| refined.regime(&r.regime).map(|s| (r.fitted_c, s.fitted_c)))
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
            .fold(0.0, f64::max)
    }
}

struct Sample {
    x: f64,
    y: f64,
    excess: f64,
    envelope: f64,
}

fn fit_regime(name: &str, samples: Vec<Sample>) -> RegimeFit {
    let mut fit = RegimeFit {
        regime: name.to_string(),
        fitted_c: 0.0,
        worst_x: f64::NAN,
        worst_y: f64::NAN,
        samples: samples.len(),
    };
    for s in samples {
        let ratio = s.excess.max(0.0) / s.envelope;
        if ratio > fit.fitted_c || !ratio.is_finite() {
            fit.fitted_c = ratio;
            fit.worst_x = s.x;
            fit.worst_y = s.y;
        }
    }
    fit
}

fn corrector_bounds_on_grid(
    coeffs: &KernelCoeffs,
    p: u32,
    c: f64,
    grid: &XyGrid,
) -> Result<Vec<(&'static str, Vec<Sample>)>, AsymptoticsError> {
    let s = coeffs.c3.signum();
    let cs = grid.c_split;
    let pf = p as f64;
    let spec = QuadratureSpec::default();
    type Env = fn(f64, f64, f64, f64) -> f64;
    let regimes: [(&'static str, fn(f64, f64) -> (f64, f64), Env); 5] = [
        ("fast_far", |y, cs| (cs * y, cs * y + 3.0 * y), |x, y, c, p| {
            y.powf(-(p + 1.0) / 4.0) * (-c * x.abs().powf(4.0 / 3.0) / y.cbrt()).exp()
        }),
        ("fast_near", |y, cs| (0.0, cs * y), |x, y, c, p| {
            y.powf(-1.0 / 3.0 - p / 4.0) * (-c * x.abs().powf(1.5) / y.sqrt()).exp()
        }),
        ("middle", |y, _| (-y.cbrt(), 0.0), |_, y, _, p| y.powf(-1.0 / 3.0 - p / 4.0)),
        ("oscillating_near", |y, cs| (-cs * y, -y.cbrt()), |x, y, c, p| {
            x.abs().powf(-0.25) * y.powf(-(p + 1.0) / 4.0) * (-c * x * x / y).exp()
        }),
        ("oscillating_far", |y, cs| (-cs * y - 3.0 * y, -cs * y), |x, y, c, p| {
            y.powf(-(p + 1.0) / 4.0) * (-c * x.abs().powf(4.0 / 3.0) / y.cbrt()).exp()
        }),
    ];
    let mut out = Vec::new();
    for (name, range, env) in regimes {
        if p == 0 && name == "oscillating_near" {
            continue;
        }
        let points: Vec<(f64, f64)> = grid
            .ys()
            .into_iter()
            .flat_map(|y| {
                let (lo, hi) = range(y, cs);
                grid.xs(lo, hi).into_iter().map(move |xp| (xp, y))
            })
            .collect();
        let samples: Result<Vec<Sample>, AsymptoticsError> = points
            .par_iter()
            .map(|&(xp, y)| {
                let e = corrector_g_estimate(coeffs, p, s * xp, y, &spec)?;
                Ok(Sample {
                    x: s * xp,
                    y,
                    excess: e.value.abs() - e.error,
                    envelope: env(xp, y, c, pf),
                })
            })
            .collect();
        out.push((name, samples?));
    }
    Ok(out)
}

/// Fitted constants for the pointwise bounds on `G`, on `G − 2 Re 𝔤`, and on
/// the primitive of `G`, regime by regime, for the decay constant `c`.
pub fn check_thm_a3(coeffs: &KernelCoeffs, c: f64, grid: &XyGrid) -> Result<AsymptoticReport, AsymptoticsError> {
    let mut regimes: Vec<RegimeFit> = corrector_bounds_on_grid(coeffs, 0, c, grid)?
        .into_iter()
        .map(|(name, samples)| fit_regime(name, samples))
        .collect();
    let s = coeffs.c3.signum();
    let cs = grid.c_split;
    let spec = QuadratureSpec::default();

    let osc_points: Vec<(f64, f64)> = grid
        .ys()
        .into_iter()
        .flat_map(|y| grid.xs(-cs * y, -y.cbrt()).into_iter().map(move |xp| (xp, y)))
        .collect();
    let osc: Result<Vec<Sample>, AsymptoticsError> = osc_points
        .par_iter()
        .map(|&(xp, y)| {
            let x = s * xp;
            let g = corrector_g_estimate(coeffs, 0, x, y, &spec)?;
            let frak = oscillatory_profile(coeffs, x, y)?;
            let env = y.powf(-1.0 / 3.0) * (-c * xp.abs().powf(1.5) / y.sqrt()).exp() + y.powf(-0.5) * (-c * xp * xp / y).exp();
            Ok(Sample {
                x,
                y,
                excess: (g.value - 2.0 * frak.re).abs() - g.error,
                envelope: env,
            })
        })
        .collect();
    regimes.push(fit_regime("oscillatory_profile", osc?));

    let per_y: Result<Vec<[Vec<Sample>; 3]>, AsymptoticsError> = grid
        .ys()
        .par_iter()
        .map(|&y| {
            let far_left = grid.xs(-cs * y - 3.0 * y, -cs * y);
            let middle = grid.xs(-cs * y, cs * y);
            let far_right = grid.xs(cs * y, cs * y + 3.0 * y);
            let all: Vec<f64> = far_left.iter().chain(&middle).chain(&far_right).copied().collect();
            let prim = primitive_on_grid(coeffs, &all, y)?;
            let (a, b) = (far_left.len(), far_left.len() + middle.len());
            let tail = |x: f64| (-c * x.abs().powf(4.0 / 3.0) / y.cbrt()).exp();
            let mk = |range: std::ops::Range<usize>, f: &dyn Fn(f64, Estimate) -> Sample| -> Vec<Sample> {
                range.map(|k| f(all[k], prim[k])).collect()
            };
            Ok([
                mk(0..a, &|x, e| Sample {
                    x,
                    y,
                    excess: e.value.abs() - e.error,
                    envelope: tail(x),
                }),
                mk(a..b, &|x, e| Sample {
                    x,
                    y,
                    excess: e.value.abs() - e.error,
                    envelope: 1.0,
                }),
                mk(b..all.len(), &|x, e| Sample {
                    x,
                    y,
                    excess: (1.0 - e.value).abs() - e.error,
                    envelope: tail(x),
                }),
            ])
        })
        .collect();
    let mut buckets: [Vec<Sample>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for group in per_y? {
        for (bucket, part) in buckets.iter_mut().zip(group) {
            bucket.extend(part);
        }
    }
    let [left, middle, right] = buckets;
    regimes.push(fit_regime("primitive_far_left", left));
    regimes.push(fit_regime("primitive_middle", middle));
    regimes.push(fit_regime("primitive_far_right", right));
    Ok(AsymptoticReport {
        coeffs: *coeffs,
        decay_c_used: c,
        regimes,
    })
}

/// Fitted constants for the five-regime bounds on the corrector `G_p`.
pub fn check_thm_a4(coeffs: &KernelCoeffs, p: u32, c: f64, grid: &XyGrid) -> Result<AsymptoticReport, AsymptoticsError> {
    if !(1..=3).contains(&p) {
        return Err(AsymptoticsError::InvalidArgument(format!("p = {p} must be 1, 2 or 3")));
    }
    let regimes = corrector_bounds_on_grid(coeffs, p, c, grid)?
        .into_iter()
        .map(|(name, samples)| fit_regime(name, samples))
        .collect();
    Ok(AsymptoticReport {
        coeffs: *coeffs,
        decay_c_used: c,
        regimes,
    })
}

/// Fitted constant for `|A_r(x, j₀/|α_r|) − A_r(x, n)| ≤ C M_r(c, x, n)`, with
/// `x = −j₀ + n|α_r|` and `j₀ ∈ [n|α_r|/2, n]`.
pub fn check_coro_a7(alpha_r: f64, c: f64, n_values: &[u64]) -> Result<AsymptoticReport, AsymptoticsError> {
    let coeffs = KernelCoeffs::from_alpha(alpha_r)?;
    let a = alpha_r.abs();
    let spec = QuadratureSpec::default();
    let mut samples = Vec::new();
    for &n in n_values {
        let nf = n as f64;
        let lo = (nf * a / 2.0).ceil().max(1.0) as u64;
        let at_n = activation_lattice(&coeffs, -(n as f64) + nf * a, (n - lo + 1) as usize, nf);
        let rows: Result<Vec<Sample>, AsymptoticsError> = (lo..=n)
            .into_par_iter()
            .map(|j0| {
                let x = -(j0 as f64) + nf * a;
                let shifted = activation_estimate(&coeffs, x, j0 as f64 / a, &spec)?;
                let base = at_n[(j0 - lo) as usize..].first().copied().unwrap_or(f64::NAN);
                let base = at_n.get((n - j0) as usize).copied().unwrap_or(base);
                Ok(Sample {
                    x,
                    y: nf,
                    excess: (shifted.value - base).abs() - shifted.error - 1e-12,
                    envelope: envelope_m(Side::Right, c, x, nf),
                })
            })
            .collect();
        samples.extend(rows?);
    }
    Ok(AsymptoticReport {
        coeffs,
        decay_c_used: c,
        regimes: vec![fit_regime("activation_difference", samples)],
    })
}

/// Summary of the activation along the lattice `x = −j₀ + n|α_r|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivationSummary {
    pub n_max: u64,
    /// `sup |A_r(−j₀ + n|α_r|, n)|` over `1 ≤ n ≤ n_max`, `1 ≤ j₀ ≤ 2n`.
    pub sup_abs: f64,
    /// The same supremum over even `n` only.
    pub sup_abs_coarse: f64,
    /// `(n, max_{j₀ ≤ n|α_r|/2} |1 − A_r|)`.
    pub saturation: Vec<(u64, f64)>,
    /// Fitted `c` in `|1 − A_r| ≤ C e^{-cn}` over `n ≥ n_max/4`, excluding values under the rounding floor.
    pub saturation_rate: f64,
}

pub fn activation_summary(alpha_r: f64, n_max: u64) -> Result<ActivationSummary, AsymptoticsError> {
    let coeffs = KernelCoeffs::from_alpha(alpha_r)?;
    let a = alpha_r.abs();
    let rows: Vec<(u64, f64, f64)> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let nf = n as f64;
            let count = 2 * n as usize;
            let vals = activation_lattice(&coeffs, nf * a - 2.0 * nf, count, nf);
            let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let limit = (nf * a / 2.0).floor() as usize;
            let sat = (1..=limit).map(|j0| (1.0 - vals[count - j0]).abs()).fold(0.0, f64::max);
            (n, sup, sat)
        })
        .collect();
    let sup_abs = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let sup_abs_coarse = rows.iter().filter(|r| r.0 % 2 == 0).map(|r| r.1).fold(0.0, f64::max);
    let saturation: Vec<(u64, f64)> = rows.iter().filter(|r| (r.0 as f64 * a / 2.0) >= 1.0).map(|r| (r.0, r.2)).collect();
    let fit: Vec<(f64, f64)> = saturation
        .iter()
        .filter(|s| 4 * s.0 >= n_max && s.1 > 1e-12)
        .map(|s| (s.0 as f64, s.1.ln()))
        .collect();
    let saturation_rate = if fit.len() >= 3 {
        -crate::profiles::least_squares_slope(&fit)
    } else {
        f64::NAN
    };
    Ok(ActivationSummary {
        n_max,
        sup_abs,
        sup_abs_coarse,
        saturation,
        saturation_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn burgers_left() -> KernelCoeffs {
        KernelCoeffs::from_alpha(0.25).unwrap()
    }

    fn burgers_right() -> KernelCoeffs {
        KernelCoeffs::from_alpha(-0.25).unwrap()
    }

    #[test]
    fn coefficients() {
        let k = KernelCoeffs::from_alpha(0.5).unwrap();
        assert!((k.c3 - 0.5 * 0.75 / 6.0).abs() < 1e-15);
        assert!((k.c4 - 0.25 * 0.75 / 8.0).abs() < 1e-15);
        assert!(KernelCoeffs::from_alpha(0.0).is_err());
        assert!(KernelCoeffs::from_alpha(1.0).is_err());
    }

    #[test]
    fn kernel_has_unit_mass() {
        let k = burgers_left();
        for y in [1.0, 10.0, 100.0] {
            let l = 40.0 * f64::sqrt(y);
            let r = integrate(|x| Complex64::new(kernel_g(&k, x, y).unwrap(), 0.0), -l, l, &QuadOptions {
                rel_tol: 1e-10,
                abs_tol: 1e-12,
                max_level: 20,
                initial_panels: 64,
            })
            .unwrap();
            assert!((r.value.re - 1.0).abs() < 1e-6, "y = {y}: {}", r.value.re);
        }
    }

    #[test]
    fn first_corrector_is_the_space_derivative() {
        let k = burgers_left();
        for (x, y) in [(-3.0, 8.0), (0.5, 2.0), (4.0, 30.0)] {
            let h = 1e-4;
            let fd = (kernel_g(&k, x + h, y).unwrap() - kernel_g(&k, x - h, y).unwrap()) / (2.0 * h);
            let g1 = corrector_g(&k, 1, x, y).unwrap();
            assert!((fd - g1).abs() <= 1e-4 * g1.abs().max(1e-3), "{fd} vs {g1}");
        }
    }

    #[test]
    fn sign_flip_symmetry() {
        let (l, r) = (burgers_left(), burgers_right());
        for (x, y) in [(-5.0, 20.0), (2.0, 3.0), (7.5, 64.0)] {
            assert!((kernel_g(&r, x, y).unwrap() - kernel_g(&l, -x, y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillatory_profile_vanishes_at_the_origin() {
        assert_eq!(oscillatory_profile(&burgers_left(), 0.0, 5.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn oscillatory_profile_prefactor_bound() {
        let k = burgers_left();
        let mut worst: f64 = 0.0;
        for y in [10.0, 100.0, 1000.0] {
            for i in 1..20 {
                let x = -(i as f64) * y / 20.0;
                let g = oscillatory_profile(&k, x, y).unwrap().norm();
                let pref = (-k.c4 * x * x / (9.0 * k.c3 * k.c3 * y)).exp();
                worst = worst.max(g / pref);
            }
        }
        assert!(worst.is_finite() && worst < 10.0);
    }

    #[test]
    fn activation_limits_and_derivative() {
        let k = burgers_right();
        let spec = QuadratureSpec::default();
        let y: f64 = 64.0;
        assert!(activation(&k, -40.0 * y.sqrt(), y, &spec).unwrap().abs() < 1e-6);
        assert!((activation(&k, 40.0 * y.sqrt(), y, &spec).unwrap() - 1.0).abs() < 1e-6);
        let h = 1e-3;
        let x = 3.0;
        let fd = (activation(&k, x + h, y, &spec).unwrap() - activation(&k, x - h, y, &spec).unwrap()) / (2.0 * h);
        assert!((fd - kernel_g(&k, x, y).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn activation_is_eta_independent() {
        let k = burgers_left();
        let y = 50.0;
        for x in [-8.0, 0.0, 5.0, 20.0] {
            let vals: Vec<f64> = [0.5, 1.0, 2.0]
                .iter()
                .map(|m| {
                    activation(&k, x, y, &QuadratureSpec {
                        eta: Some(m / y),
                        ..Default::default()
                    })
                    .unwrap()
                })
                .collect();
            assert!((vals[0] - vals[1]).abs() < 1e-8 && (vals[2] - vals[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn activation_matches_primitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let spec = QuadratureSpec::default();
        for k in [burgers_left(), burgers_right()] {
            for _ in 0..5 {
                let y: f64 = rng.gen_range(4.0..256.0);
                let x = rng.gen_range(-0.5..0.5) * y;
                let a = activation(&k, x, y, &spec).unwrap();
                let b = activation_via_primitive(&k, x, y).unwrap();
                assert!((a - b).abs() < 1e-6, "({x}, {y}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn primitive_derivative_is_the_kernel() {
        let k = burgers_right();
        let (x, y, h) = (2.0, 30.0, 1e-3);
        let p = primitive_on_grid(&k, &[x - h, x + h], y).unwrap();
        let fd = (p[1].value - p[0].value) / (2.0 * h);
        assert!((fd - kernel_g(&k, x, y).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn lattice_matches_pointwise_activation() {
        let spec = QuadratureSpec::default();
        for k in [burgers_left(), burgers_right(), KernelCoeffs::from_alpha(-2.0 / 3.0).unwrap()] {
            for n in [1u64, 7, 40, 200] {
                let nf = n as f64;
                let x0 = -1.5 * nf - 3.0;
                let count = 3 * n as usize + 6;
                let lat = activation_lattice(&k, x0, count, nf);
                for m in (0..count).step_by((count / 7).max(1)) {
                    let a = activation(&k, x0 + m as f64, nf, &spec).unwrap();
                    assert!((lat[m] - a).abs() < 1e-9, "alpha {} n {n} m {m}: {} vs {a}", k.alpha, lat[m]);
                }
            }
        }
    }

    #[test]
    fn time_derivative_of_activation() {
        let k = burgers_right();
        let spec = QuadratureSpec {
            rel_tol: 1e-11,
            ..Default::default()
        };
        for (x, y) in [(2.0, 20.0), (-3.0, 40.0), (6.0, 15.0)] {
            let h = 1e-2;
            let fd = (activation(&k, x, y + h, &spec).unwrap() - activation(&k, x, y - h, &spec).unwrap()) / (2.0 * h);
            let rhs = -k.c3 * corrector_g(&k, 2, x, y).unwrap() - k.c4 * corrector_g(&k, 3, x, y).unwrap();
            assert!((fd - rhs).abs() <= 1e-3 * rhs.abs().max(1e-4), "{fd} vs {rhs}");
        }
    }

    #[test]
    fn change_of_variables_for_b() {
        for (j0, n) in [(1u64, 1u64), (5, 8), (30, 64), (100, 90)] {
            let direct = relation_bg_direct(-0.25, j0, n).unwrap();
            let via = relation_bg_kernel(-0.25, j0, n).unwrap();
            assert!((direct - via).abs() < 1e-8, "{direct} vs {via}");
        }
    }

    #[test]
    fn uniform_kernel_bound() {
        let k = burgers_left();
        let mut worst: f64 = 0.0;
        for y in [1.0f64, 8.0, 64.0, 512.0] {
            for i in -20..=20 {
                let x = i as f64 * y.cbrt();
                worst = worst.max(kernel_g(&k, x, y).unwrap().abs() * y.cbrt());
            }
        }
        assert!(worst.is_finite() && worst < 1.0);
    }

    #[test]
    fn inputs_are_validated() {
        let k = burgers_left();
        assert!(kernel_g(&k, 0.0, 0.0).is_err());
        assert!(activation(&k, 0.0, 0.5, &QuadratureSpec::default()).is_err());
        assert!(check_thm_a4(&k, 4, 0.02, &XyGrid::default()).is_err());
    }
}
