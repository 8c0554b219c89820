//! Green's functions of the linearized scheme: explicit resolvent kernels,
//! temporal fields by exact iteration, the derivative field, the envelope
//! functions and empirical fits of the pointwise bounds.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{activation_lattice, KernelCoeffs};
use crate::model::{ComplexGridFunction, Grid, GridFunction, ShockConfig, SpectralParams};
use crate::scheme::LinearOperator;
use crate::spectral::{kappa_roots, kernel_eigenvector, lopatinskii, Side, SpectralError};

/// Distance to `z = 1` below which the resolvent is considered singular.
pub const EIGENVALUE_EXCLUSION: f64 = 1e-8;
pub const LOPATINSKII_FLOOR: f64 = 1e-12;
/// Absolute noise level subtracted from every residual before it is compared with an envelope.
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error("z = {0} is within 1e-8 of the eigenvalue 1")]
    AtEigenvalue(Complex64),
    #[error("Lopatinskii determinant |Δ({z})| = {modulus:e} is too small")]
    LopatinskiiZero { z: Complex64, modulus: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenKind {
    Full,
    FreeLeft,
    FreeRight,
    Derivative,
}

/// The rows `n = 0, …, n_max` of a temporal Green's function for a source at `j0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenField {
    pub j0: i64,
    pub n_max: usize,
    pub rows: Vec<GridFunction>,
    pub kind: GreenKind,
}

impl GreenField {
    /// `𝒢^n(j, j0)`, zero outside the stored window.
    pub fn value(&self, n: usize, j: i64) -> f64 {
        self.rows[n].get(j)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub fitted_c: f64,
    pub decay_c_used: f64,
    /// `(n, j, j0)` of the largest ratio.
    pub max_violation_location: (usize, i64, i64),
    pub samples: u64,
}

impl BoundReport {
    fn empty(c: f64) -> Self {
        Self {
            fitted_c: 0.0,
            decay_c_used: c,
            max_violation_location: (0, 0, 0),
            samples: 0,
        }
    }

    fn record(&mut self, ratio: f64, at: (usize, i64, i64)) {
        self.samples += 1;
        if ratio > self.fitted_c || ratio.is_nan() {
            self.fitted_c = ratio;
            self.max_violation_location = at;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if other.fitted_c > self.fitted_c || other.fitted_c.is_nan() {
            self.fitted_c = other.fitted_c;
            self.max_violation_location = other.max_violation_location;
        }
        self.samples += other.samples;
        self
    }
}

fn check_z(params: &SpectralParams, z: Complex64) -> Result<Complex64, GreenError> {
    if (z - 1.0).norm() < EIGENVALUE_EXCLUSION {
        return Err(GreenError::AtEigenvalue(z));
    }
    let delta = lopatinskii(params, z)?;
    if delta.norm() <= LOPATINSKII_FLOOR {
        return Err(GreenError::LopatinskiiZero { z, modulus: delta.norm() });
    }
    Ok(delta)
}

fn check_window(window: (i64, i64)) -> Result<(), GreenError> {
    if window.0 > window.1 {
        return Err(GreenError::InvalidArgument(format!("empty window {window:?}")));
    }
    Ok(())
}

/// Roots and prefactor of the free resolvent kernel: `(κ_big, κ_small, −2/(α(1−α)(κ_big − κ_small)))`.
fn free_parts(alpha: f64, z: Complex64) -> Result<(Complex64, Complex64, Complex64), GreenError> {
    let side = if alpha > 0.0 { Side::Left } else { Side::Right };
    let pair = kappa_roots(alpha, z, side)?;
    let (big, small) = match side {
        Side::Left => (pair.stable, pair.unstable),
        Side::Right => (pair.unstable, pair.stable),
    };
    Ok((big, small, -2.0 / (alpha * (1.0 - alpha) * (big - small))))
}

fn free_value(parts: (Complex64, Complex64, Complex64), j: i64) -> Complex64 {
    let (big, small, pre) = parts;
    if j <= 0 {
        pre * big.powi(j as i32)
    } else {
        pre * small.powi(j as i32)
    }
}

/// Resolvent kernel `𝒢̄_j(z)` of the constant-coefficient operator with Courant number `alpha`.
pub fn spatial_green_free(alpha: f64, z: Complex64, window: (i64, i64)) -> Result<ComplexGridFunction, GreenError> {
    check_window(window)?;
    if !(alpha.abs() < 1.0 && alpha != 0.0) {
        return Err(GreenError::InvalidArgument(format!("alpha = {alpha}")));
    }
    let parts = free_parts(alpha, z)?;
    let zero = Complex64::new(0.0, 0.0);
    Ok(Grid::from_fn(window.0, window.1, zero, zero, |j| free_value(parts, j)))
}

struct Resolvent {
    params: SpectralParams,
    delta: Complex64,
    kl: Complex64,
    klu: Complex64,
    kr: Complex64,
    kru: Complex64,
}

impl Resolvent {
    fn new(params: &SpectralParams, z: Complex64) -> Result<Self, GreenError> {
        let delta = check_z(params, z)?;
        let l = kappa_roots(params.alpha_l, z, Side::Left)?;
        let r = kappa_roots(params.alpha_r, z, Side::Right)?;
        Ok(Self {
            params: *params,
            delta,
            kl: l.stable,
            klu: l.unstable,
            kr: r.stable,
            kru: r.unstable,
        })
    }

    fn free_right(&self) -> Complex64 {
        let a = self.params.alpha_r;
        2.0 / (a * (1.0 - a) * (self.kru - self.kr))
    }

    fn free_left(&self) -> Complex64 {
        let a = self.params.alpha_l;
        2.0 / (a * (1.0 - a) * (self.kl - self.klu))
    }

    fn full(&self, j0: i64, j: i64) -> Complex64 {
        let SpectralParams { alpha_l, alpha_r, alpha_m } = self.params;
        let d = self.delta;
        let p = |k: Complex64, e: i64| k.powi(e as i32);
        if j0 >= 1 {
            let lead = p(self.kru, 1 - j0);
            if j <= 0 {
                return -2.0 * (1.0 - alpha_m) / (alpha_l * d) * lead * p(self.kl, j);
            }
            let a_l = alpha_l - alpha_m + (1.0 - alpha_l) * self.kl;
            let first = -2.0 * a_l / (alpha_r * d) * lead * p(self.kr, j - 1);
            let tail = if j <= j0 { p(self.kru, j - j0) } else { p(self.kr, j - j0) };
            first + self.free_right() * (lead * p(self.kr, j - 1) - tail)
        } else {
            let lead = p(self.klu, -j0);
            if j >= 1 {
                return 2.0 * (1.0 + alpha_m) / (alpha_r * d) * lead * p(self.kr, j - 1);
            }
            let a_r = alpha_r - alpha_m - (1.0 + alpha_r) / self.kr;
            let first = -2.0 * a_r / (alpha_l * d) * lead * p(self.kl, j);
            let tail = if j >= j0 { p(self.klu, j - j0) } else { p(self.kl, j - j0) };
            first + self.free_left() * (lead * p(self.kl, j) - tail)
        }
    }

    fn reduced(&self, j0: i64, j: i64) -> Complex64 {
        let g = self.full(j0, j);
        let p = |k: Complex64, e: i64| k.powi(e as i32);
        if j0 >= 1 && j >= 1 {
            let k = if j <= j0 { self.kru } else { self.kr };
            g + self.free_right() * p(k, j - j0)
        } else if j0 <= 0 && j <= 0 {
            let k = if j >= j0 { self.klu } else { self.kl };
            g + self.free_left() * p(k, j - j0)
        } else {
            g
        }
    }
}

/// Resolvent kernel `𝒢^{j0}_j(z)` of the full linearized operator on the given window.
pub fn spatial_green(params: &SpectralParams, z: Complex64, j0: i64, window: (i64, i64)) -> Result<ComplexGridFunction, GreenError> {
    check_window(window)?;
    let r = Resolvent::new(params, z)?;
    let zero = Complex64::new(0.0, 0.0);
    Ok(Grid::from_fn(window.0, window.1, zero, zero, |j| r.full(j0, j)))
}

/// Reduced kernel `𝒢̃^{j0}_j(z)`, with the free part of the source side removed.
pub fn reduced_green(params: &SpectralParams, z: Complex64, j0: i64, j: i64) -> Result<Complex64, GreenError> {
    Ok(Resolvent::new(params, z)?.reduced(j0, j))
}

/// The reduced kernel as `𝒢 − 𝒢̄` with the free kernel of the source side recentred at `j0`.
pub fn reduced_green_by_subtraction(params: &SpectralParams, z: Complex64, j0: i64, j: i64) -> Result<Complex64, GreenError> {
    let g = spatial_green(params, z, j0, (j, j))?.get(j);
    if j0 >= 1 && j >= 1 {
        Ok(g - spatial_green_free(params.alpha_r, z, (j - j0, j - j0))?.get(j - j0))
    } else if j0 <= 0 && j <= 0 {
        Ok(g - spatial_green_free(params.alpha_l, z, (j - j0, j - j0))?.get(j - j0))
    } else {
        Ok(g)
    }
}

/// `(1/2πi)∮ zⁿ 𝒢^{j0}(z) dz` on the circle of the given radius with the trapezoidal rule.
pub fn temporal_green_by_contour(
    params: &SpectralParams,
    j0: i64,
    n: u32,
    radius: f64,
    nodes: usize,
    window: (i64, i64),
) -> Result<ComplexGridFunction, GreenError> {
    check_window(window)?;
    let len = (window.1 - window.0 + 1) as usize;
    let partial: Result<Vec<Vec<Complex64>>, GreenError> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let z = Complex64::from_polar(radius, 2.0 * PI * k as f64 / nodes as f64);
            let r = Resolvent::new(params, z)?;
            let w = z.powu(n + 1) / nodes as f64;
            Ok((window.0..=window.1).map(|j| w * r.full(j0, j)).collect())
        })
        .collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); len];
    for row in partial? {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    Ok(Grid::new(window.0, acc, zero, zero).expect("nonempty window"))
}

/// Successive images `𝓛ⁿ w` of a zero-tail sequence, produced lazily.
pub struct GreenRows {
    op: LinearOperator,
    next: Option<GridFunction>,
}

impl GreenRows {
    pub fn new(op: LinearOperator, initial: GridFunction) -> Self {
        Self {
            op,
            next: Some(initial),
        }
    }
}

impl Iterator for GreenRows {
    type Item = GridFunction;

    fn next(&mut self) -> Option<GridFunction> {
        let current = self.next.take()?;
        self.next = Some(self.op.apply(&current));
        Some(current)
    }
}

fn operator_for(kind: GreenKind, params: &SpectralParams) -> Result<LinearOperator, GreenError> {
    match kind {
        GreenKind::Full | GreenKind::Derivative => Ok(LinearOperator::full_shock(params)),
        GreenKind::FreeLeft => Ok(LinearOperator::free(params.alpha_l)),
        GreenKind::FreeRight => Ok(LinearOperator::free(params.alpha_r)),
    }
}

/// Lazy rows of the temporal Green's function `𝒢ⁿ(·, j0)` (or of the derivative field).
pub fn temporal_green_rows(kind: GreenKind, params: &SpectralParams, j0: i64) -> GreenRows {
    let op = operator_for(kind, params).expect("every kind has an operator");
    let initial = match kind {
        GreenKind::Derivative => GridFunction::from_fn(j0 - 1, j0, 0.0, 0.0, |j| if j == j0 { 1.0 } else { -1.0 }),
        _ => GridFunction::delta(j0),
    };
    GreenRows::new(op, initial)
}

/// Temporal Green's function by exact iteration of the operator of the given kind.
pub fn temporal_green(kind: GreenKind, params: &SpectralParams, j0: i64, n_max: usize) -> Result<GreenField, GreenError> {
    if n_max < 1 {
        return Err(GreenError::InvalidArgument("n_max must be at least 1".into()));
    }
    if kind == GreenKind::Derivative {
        return Err(GreenError::InvalidArgument("use derivative_green for the derivative field".into()));
    }
    Ok(GreenField {
        j0,
        n_max,
        rows: temporal_green_rows(kind, params, j0).take(n_max + 1).collect(),
        kind,
    })
}

/// `𝒟ⁿ(j, j0) = 𝒢ⁿ(j, j0) − 𝒢ⁿ(j, j0 − 1)` from two temporal fields of the full operator.
pub fn derivative_green(cfg: &ShockConfig, j0: i64, n_max: usize) -> Result<GreenField, GreenError> {
    let params = cfg.spectral_params();
    let a = temporal_green(GreenKind::Full, &params, j0, n_max)?;
    let b = temporal_green(GreenKind::Full, &params, j0 - 1, n_max)?;
    let rows = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| GridFunction::from_fn(rb.j_min(), ra.j_max(), 0.0, 0.0, |j| ra.get(j) - rb.get(j)))
        .collect();
    Ok(GreenField {
        j0,
        n_max,
        rows,
        kind: GreenKind::Derivative,
    })
}

fn envelope(side: Side, c: f64, x: f64, y: f64, power_mid: f64, gaussian: impl Fn(f64) -> f64) -> f64 {
    let x = match side {
        Side::Left => -x,
        Side::Right => x,
    };
    let cube = y.cbrt();
    let middle = y.powf(-power_mid);
    let airy = |x: f64| middle * (-c * x.abs().powf(1.5) / y.sqrt()).exp();
    if x < 0.0 {
        airy(x)
    } else if x == 0.0 {
        middle.max(airy(x))
    } else if x < cube {
        middle
    } else if x == cube {
        middle.max(gaussian(x))
    } else {
        gaussian(x)
    }
}

/// `𝐌_ℓ(c,x,y)` or `𝐌_r(c,x,y)`; at a branch junction the larger branch is used.
pub fn envelope_m(side: Side, c: f64, x: f64, y: f64) -> f64 {
    envelope(side, c, x, y, 1.0 / 3.0, |x| (x * y).powf(-0.25) * (-c * x * x / y).exp())
}

/// `𝐊_ℓ(c,x,y)` or `𝐊_r(c,x,y)`.
pub fn envelope_k(side: Side, c: f64, x: f64, y: f64) -> f64 {
    envelope(side, c, x, y, 7.0 / 12.0, |x| y.powf(-0.625) * (-c * x * x / y).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Quantity {
    Green,
    Derivative,
}

/// Transmission activations `A_ℓ(j0 + nα_ℓ, n)` for `j0 = −n..=0` and `A_r(−j0 + n|α_r|, n)`
/// for `j0 = 1..=n`, indexed by `j0 + n`.
fn activation_rows(params: &SpectralParams, n_max: usize) -> Vec<Vec<f64>> {
    let left = KernelCoeffs::transmission(Side::Left, params);
    let right = KernelCoeffs::transmission(Side::Right, params);
    (0..=n_max)
        .into_par_iter()
        .map(|n| {
            if n == 0 {
                return vec![0.0];
            }
            let nf = n as f64;
            let mut row = activation_lattice(&left, -nf + nf * params.alpha_l, n + 1, nf);
            let mut r = activation_lattice(&right, nf * params.alpha_r.abs() - nf, n, nf);
            r.reverse();
            row.extend(r);
            row
        })
        .collect()
}

fn verify(cfg: &ShockConfig, n_max: usize, c: f64, quantity: Quantity) -> Result<BoundReport, GreenError> {
    if n_max < 1 || !(c > 0.0) {
        return Err(GreenError::InvalidArgument(format!("n_max = {n_max}, c = {c}")));
    }
    let params = cfg.spectral_params();
    let h = kernel_eigenvector(&params, 2 * n_max as i64 + 2)?;
    let act = if quantity == Quantity::Green {
        activation_rows(&params, n_max)
    } else {
        Vec::new()
    };
    let (al, ar) = (params.alpha_l, params.alpha_r.abs());
    let n_i = n_max as i64;
    let report = (-n_i..=n_i)
        .into_par_iter()
        .map(|j0| {
            let mut report = BoundReport::empty(c);
            let kind = match quantity {
                Quantity::Green => GreenKind::Full,
                Quantity::Derivative => GreenKind::Derivative,
            };
            let start = j0.unsigned_abs().max(1) as usize;
            for (n, row) in temporal_green_rows(kind, &params, j0).enumerate().take(n_max + 1).skip(start) {
                let nf = n as f64;
                let (side, centre) = if j0 <= 0 {
                    (Side::Left, j0 as f64 + nf * al)
                } else {
                    (Side::Right, -(j0 as f64) + nf * ar)
                };
                let a = match quantity {
                    Quantity::Green => act[n][(j0 + n as i64) as usize],
                    Quantity::Derivative => 0.0,
                };
                let m_centre = envelope_m(side, c, centre, nf);
                let (lo, hi) = match quantity {
                    Quantity::Green => (j0 - n as i64, j0 + n as i64),
                    Quantity::Derivative => (j0 - n as i64 - 1, j0 + n as i64),
                };
                for j in lo..=hi {
                    let g = row.get(j);
                    let hj = h.get(j);
                    let diff = (g - hj * a).abs();
                    let jf = j as f64;
                    let first = match side {
                        Side::Left if j <= 0 => {
                            let x = (j0 - j) as f64 + nf * al;
                            match quantity {
                                Quantity::Green => envelope_m(side, c, x, nf),
                                Quantity::Derivative => envelope_k(side, c, x, nf),
                            }
                        }
                        Side::Right if j >= 1 => {
                            let x = (j - j0) as f64 + nf * ar;
                            match quantity {
                                Quantity::Green => envelope_m(side, c, x, nf),
                                Quantity::Derivative => envelope_k(side, c, x, nf),
                            }
                        }
                        _ => 0.0,
                    };
                    let third = match quantity {
                        Quantity::Green => (-c * (nf + jf.abs() + j0.abs() as f64)).exp(),
                        Quantity::Derivative => (-c * (nf + (j - j0).abs() as f64)).exp(),
                    };
                    let env = first + (-c * jf.abs()).exp() * m_centre + third;
                    let excess = (diff - RESIDUAL_NOISE_FLOOR * (1.0 + hj.abs())).max(0.0);
                    report.record(excess / env, (n, j, j0));
                }
            }
            report
        })
        .reduce(|| BoundReport::empty(c), BoundReport::merge);
    Ok(report)
}

/// Fitted constant in the pointwise bound on `𝒢ⁿ(j,j0) − 𝓗_j A(±j0 + n|α|, n)`
/// over `1 ≤ n ≤ n_max`, `|j0| ≤ n` and `|j − j0| ≤ n`, for the decay constant `c`.
pub fn verify_green_bounds(cfg: &ShockConfig, n_max: usize, c: f64) -> Result<BoundReport, GreenError> {
    verify(cfg, n_max, c, Quantity::Green)
}

/// Fitted constant in the pointwise bound on the derivative field `𝒟ⁿ(j,j0)`.
pub fn verify_derivative_bounds(cfg: &ShockConfig, n_max: usize, c: f64) -> Result<BoundReport, GreenError> {
    verify(cfg, n_max, c, Quantity::Derivative)
}
