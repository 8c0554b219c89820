//! Shock configurations, grid functions on ℤ, weighted norms and the
//! admissibility checks (Rankine-Hugoniot, Lax entropy, CFL).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `|f(u_l) - f(u_r)|`.
pub const RH_TOLERANCE: f64 = 1e-12;

/// Step used for the centered difference of `f'` when no `f''` is supplied.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-5;

/// Errors raised while building configurations or evaluating norms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("Rankine-Hugoniot violated: |f(u_l) - f(u_r)| = {residual:e} > {RH_TOLERANCE:e}")]
    RankineHugoniotViolation { residual: f64 },
    #[error("entropy condition f'(u_r) < 0 < f'(u_l) violated: f'(u_l) = {fp_l}, f'(u_r) = {fp_r}")]
    EntropyViolation { fp_l: f64, fp_r: f64 },
    #[error("CFL condition max(alpha_l, |alpha_r|) < 1 violated: max = {max_courant}")]
    CflViolation { max_courant: f64 },
    #[error("CFL ratio lambda must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("invalid spectral parameters: {0}")]
    InvalidSpectralParams(String),
    #[error("weighted norm diverges: {0}")]
    DivergentNorm(String),
    #[error("tail mismatch: v tails ({v_left}, {v_right}) vs reference tails ({r_left}, {r_right})")]
    TailMismatch { v_left: f64, v_right: f64, r_left: f64, r_right: f64 },
    #[error("empty grid window")]
    EmptyWindow,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A smooth scalar flux with its analytic derivative.
#[derive(Clone)]
pub struct Flux {
    label: String,
    f: ScalarFn,
    df: ScalarFn,
    d2f: Option<ScalarFn>,
}

impl Flux {
    pub fn new<F, D>(label: impl Into<String>, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: None,
        }
    }

    /// Attaches an analytic second derivative, used by the profile linearization.
    pub fn with_second_derivative<D2>(mut self, d2f: D2) -> Self
    where
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.d2f = Some(Arc::new(d2f));
        self
    }

    /// Burgers flux `f(u) = u²/2`.
    pub fn burgers() -> Self {
        Self::new("burgers", |u| 0.5 * u * u, |u| u).with_second_derivative(|_| 1.0)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn deriv(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    /// `f''(u)`, analytic when available, otherwise a centered difference of `f'`.
    pub fn second_deriv(&self, u: f64) -> f64 {
        match &self.d2f {
            Some(d2f) => d2f(u),
            None => {
                let h = SECOND_DERIVATIVE_STEP;
                ((self.df)(u + h) - (self.df)(u - h)) / (2.0 * h)
            }
        }
    }

    pub fn has_analytic_second_derivative(&self) -> bool {
        self.d2f.is_some()
    }
}

impl fmt::Debug for Flux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Flux")
            .field("label", &self.label)
            .field("analytic_f2", &self.d2f.is_some())
            .finish()
    }
}

/// An admissible stationary shock `(u_l, u_r)` for the Lax-Wendroff scheme with CFL ratio `λ`.
#[derive(Clone, Debug)]
pub struct ShockConfig {
    flux: Flux,
    u_l: f64,
    u_r: f64,
    lambda: f64,
    alpha_l: f64,
    alpha_r: f64,
    alpha_m: f64,
}

/// Builds a [`ShockConfig`], checking Rankine-Hugoniot, entropy and CFL in that order.
pub fn make_shock_config(flux: Flux, u_l: f64, u_r: f64, lambda: f64) -> Result<ShockConfig, ModelError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(ModelError::InvalidLambda(lambda));
    }
    let residual = (flux.eval(u_l) - flux.eval(u_r)).abs();
    if !(residual <= RH_TOLERANCE) {
        return Err(ModelError::RankineHugoniotViolation { residual });
    }
    let fp_l = flux.deriv(u_l);
    let fp_r = flux.deriv(u_r);
    if !(fp_r < 0.0 && 0.0 < fp_l) {
        return Err(ModelError::EntropyViolation { fp_l, fp_r });
    }
    let alpha_l = lambda * fp_l;
    let alpha_r = lambda * fp_r;
    let alpha_m = lambda * flux.deriv(0.5 * (u_l + u_r));
    let max_courant = alpha_l.max(alpha_r.abs());
    if !(max_courant < 1.0) {
        return Err(ModelError::CflViolation { max_courant });
    }
    Ok(ShockConfig {
        flux,
        u_l,
        u_r,
        lambda,
        alpha_l,
        alpha_r,
        alpha_m,
    })
}

impl ShockConfig {
    /// Burgers with `u_l = 1/2`, `u_r = -1/2`, `λ = 1/2`.
    pub fn burgers_default() -> Self {
        make_shock_config(Flux::burgers(), 0.5, -0.5, 0.5).expect("default Burgers configuration is admissible")
    }

    pub fn flux(&self) -> &Flux {
        &self.flux
    }
    pub fn u_l(&self) -> f64 {
        self.u_l
    }
    pub fn u_r(&self) -> f64 {
        self.u_r
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn alpha_l(&self) -> f64 {
        self.alpha_l
    }
    pub fn alpha_r(&self) -> f64 {
        self.alpha_r
    }
    pub fn alpha_m(&self) -> f64 {
        self.alpha_m
    }

    /// Common flux value `f(u_l)` carried by every stationary profile.
    pub fn flux_level(&self) -> f64 {
        self.flux.eval(self.u_l)
    }

    /// Mass gained by a translation of one cell to the right, `u_l - u_r`.
    pub fn jump(&self) -> f64 {
        self.u_l - self.u_r
    }

    pub fn spectral_params(&self) -> SpectralParams {
        SpectralParams {
            alpha_l: self.alpha_l,
            alpha_r: self.alpha_r,
            alpha_m: self.alpha_m,
        }
    }
}

/// The Courant triple `(α_l, α_r, α_m)` detached from any flux.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub alpha_l: f64,
    pub alpha_r: f64,
    pub alpha_m: f64,
}

impl SpectralParams {
    pub fn new(alpha_l: f64, alpha_r: f64, alpha_m: f64) -> Result<Self, ModelError> {
        if !(alpha_l > 0.0 && alpha_l < 1.0) {
            return Err(ModelError::InvalidSpectralParams(format!("alpha_l = {alpha_l} not in (0,1)")));
        }
        if !(alpha_r > -1.0 && alpha_r < 0.0) {
            return Err(ModelError::InvalidSpectralParams(format!("alpha_r = {alpha_r} not in (-1,0)")));
        }
        if !alpha_m.is_finite() {
            return Err(ModelError::InvalidSpectralParams(format!("alpha_m = {alpha_m} is not finite")));
        }
        Ok(Self {
            alpha_l,
            alpha_r,
            alpha_m,
        })
    }
}

impl From<&ShockConfig> for SpectralParams {
    fn from(cfg: &ShockConfig) -> Self {
        cfg.spectral_params()
    }
}

/// A sequence on ℤ stored on the window `j_min..=j_max`, extended by constants outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    j_min: i64,
    values: Vec<T>,
    tail_left: T,
    tail_right: T,
}

pub type GridFunction = Grid<f64>;
pub type ComplexGridFunction = Grid<Complex64>;

impl<T: Copy> Grid<T> {
    pub fn new(j_min: i64, values: Vec<T>, tail_left: T, tail_right: T) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::EmptyWindow);
        }
        Ok(Self {
            j_min,
            values,
            tail_left,
            tail_right,
        })
    }

    /// Samples `f` on `j_min..=j_max`.
    pub fn from_fn(j_min: i64, j_max: i64, tail_left: T, tail_right: T, f: impl FnMut(i64) -> T) -> Self {
        assert!(j_min <= j_max, "empty window {j_min}..={j_max}");
        Self {
            j_min,
            values: (j_min..=j_max).map(f).collect(),
            tail_left,
            tail_right,
        }
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_min + self.values.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tail_left(&self) -> T {
        self.tail_left
    }

    pub fn tail_right(&self) -> T {
        self.tail_right
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Value at `j`, using the constant tails outside the window.
    #[inline]
    pub fn get(&self, j: i64) -> T {
        if j < self.j_min {
            self.tail_left
        } else {
            let k = (j - self.j_min) as usize;
            if k < self.values.len() {
                self.values[k]
            } else {
                self.tail_right
            }
        }
    }

    /// Iterates over `(j, value)` pairs of the window.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        self.values.iter().enumerate().map(move |(k, &v)| (self.j_min + k as i64, v))
    }

    /// Same sequence on the window `lo..=hi`; values outside the old window come from the tails.
    pub fn rewindow(&self, lo: i64, hi: i64) -> Self {
        Self::from_fn(lo, hi, self.tail_left, self.tail_right, |j| self.get(j))
    }

    /// Translation `(τ_k v)_j = v_{j-k}`: positive `k` moves the sequence to the right.
    pub fn translate(&self, k: i64) -> Self {
        Self {
            j_min: self.j_min + k,
            values: self.values.clone(),
            tail_left: self.tail_left,
            tail_right: self.tail_right,
        }
    }

    pub fn map<U: Copy>(&self, mut f: impl FnMut(T) -> U) -> Grid<U> {
        Grid {
            j_min: self.j_min,
            values: self.values.iter().map(|&v| f(v)).collect(),
            tail_left: f(self.tail_left),
            tail_right: f(self.tail_right),
        }
    }

    /// Pointwise combination on the union of both windows.
    pub fn zip_with<U: Copy, V: Copy>(&self, other: &Grid<U>, mut f: impl FnMut(T, U) -> V) -> Grid<V> {
        let lo = self.j_min.min(other.j_min);
        let hi = self.j_max().max(other.j_max());
        Grid {
            j_min: lo,
            values: (lo..=hi).map(|j| f(self.get(j), other.get(j))).collect(),
            tail_left: f(self.tail_left, other.tail_left),
            tail_right: f(self.tail_right, other.tail_right),
        }
    }
}

impl GridFunction {
    pub fn zeros(j_min: i64, j_max: i64) -> Self {
        Self::from_fn(j_min, j_max, 0.0, 0.0, |_| 0.0)
    }

    /// Kronecker sequence `δ_{j0}` on the one-cell window `{j0}`.
    pub fn delta(j0: i64) -> Self {
        Self::from_fn(j0, j0, 0.0, 0.0, |_| 1.0)
    }

    /// Step shock: `u_l` for `j ≤ 0`, `u_r` for `j ≥ 1`.
    pub fn step_shock(u_l: f64, u_r: f64) -> Self {
        Self::from_fn(0, 1, u_l, u_r, |j| if j <= 0 { u_l } else { u_r })
    }

    pub fn has_zero_tails(&self) -> bool {
        self.tail_left == 0.0 && self.tail_right == 0.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(self.tail_left.abs().max(self.tail_right.abs()), |m, v| m.max(v.abs()))
    }

    /// `Σ_j v_j` over the window (compensated summation).
    pub fn window_sum(&self) -> f64 {
        neumaier_sum(self.values.iter().copied())
    }

    /// Shrinks the window to the cells whose distance to the adjacent tail exceeds `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let first = self.values.iter().position(|&v| (v - self.tail_left).abs() > tol);
        let last = self.values.iter().rposition(|&v| (v - self.tail_right).abs() > tol);
        match (first, last) {
            (Some(a), Some(b)) if a <= b => Self {
                j_min: self.j_min + a as i64,
                values: self.values[a..=b].to_vec(),
                tail_left: self.tail_left,
                tail_right: self.tail_right,
            },
            _ => {
                let anchor = self.j_min.max(0).min(self.j_max());
                Self::from_fn(anchor, anchor, self.tail_left, self.tail_right, |_| self.get(anchor))
            }
        }
    }

    pub fn to_complex(&self) -> ComplexGridFunction {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

impl ComplexGridFunction {
    pub fn has_zero_tails(&self) -> bool {
        self.tail_left == Complex64::new(0.0, 0.0) && self.tail_right == Complex64::new(0.0, 0.0)
    }

    pub fn zeros(j_min: i64, j_max: i64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self::from_fn(j_min, j_max, z, z, |_| z)
    }
}

/// Neumaier-compensated sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Which ℓ^q norm to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    One,
    Infinity,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::One => write!(f, "l1"),
            NormKind::Infinity => write!(f, "linf"),
        }
    }
}

/// Polynomial weight `1 + |j|^γ`, with `γ = 0` giving the unweighted norm.
#[inline]
pub fn weight(j: i64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        1.0 + (j.unsigned_abs() as f64).powf(gamma)
    }
}

/// `‖v‖_{ℓ^q_γ}`.
pub fn weighted_norm(v: &GridFunction, gamma: f64, q: NormKind) -> Result<f64, ModelError> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(ModelError::DivergentNorm(format!("weight exponent {gamma} must be a finite nonnegative number")));
    }
    let tails_zero = v.has_zero_tails();
    match q {
        NormKind::One => {
            if !tails_zero {
                return Err(ModelError::DivergentNorm("nonzero tails in an l1 norm".into()));
            }
            Ok(neumaier_sum(v.iter().map(|(j, x)| weight(j, gamma) * x.abs())))
        }
        NormKind::Infinity => {
            if !tails_zero && gamma != 0.0 {
                return Err(ModelError::DivergentNorm("nonzero tails in a weighted sup norm".into()));
            }
            let inner = v.iter().fold(0.0_f64, |m, (j, x)| m.max(weight(j, gamma) * x.abs()));
            Ok(inner.max(v.tail_left().abs()).max(v.tail_right().abs()))
        }
    }
}

/// `Σ_j (v_j - reference_j)`; both sequences must share their tails.
pub fn excess_mass(v: &GridFunction, reference: &GridFunction) -> Result<f64, ModelError> {
    if v.tail_left() != reference.tail_left() || v.tail_right() != reference.tail_right() {
        return Err(ModelError::TailMismatch {
            v_left: v.tail_left(),
            v_right: v.tail_right(),
            r_left: reference.tail_left(),
            r_right: reference.tail_right(),
        });
    }
    let lo = v.j_min().min(reference.j_min());
    let hi = v.j_max().max(reference.j_max());
    Ok(neumaier_sum((lo..=hi).map(|j| v.get(j) - reference.get(j))))
}
