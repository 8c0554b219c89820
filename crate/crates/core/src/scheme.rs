//! The Lax-Wendroff scheme in conservation form, its linearizations around the
//! step shock, around the constant end states and around a discrete shock profile,
//! and the quadratic remainder of the profile linearization.

use std::ops::{Add, Mul};

use thiserror::Error;

use crate::model::{GridFunction, ShockConfig, SpectralParams};
use crate::profiles::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("operand must have zero tails, got ({left}, {right})")]
    NonzeroTails { left: f64, right: f64 },
}

/// Lax-Wendroff numerical flux `𝓕_λ(u, v)`.
#[inline]
pub fn numerical_flux(cfg: &ShockConfig, u: f64, v: f64) -> f64 {
    let f = cfg.flux();
    let (fu, fv) = (f.eval(u), f.eval(v));
    0.5 * (fu + fv) - 0.5 * cfg.lambda() * f.deriv(0.5 * (u + v)) * (fv - fu)
}

/// Partial derivatives `(∂_u 𝓕_λ, ∂_v 𝓕_λ)` at `(u, v)`.
pub fn flux_partials(cfg: &ShockConfig, u: f64, v: f64) -> (f64, f64) {
    let f = cfg.flux();
    let lambda = cfg.lambda();
    let m = 0.5 * (u + v);
    let a = f.deriv(m);
    let jump = f.eval(v) - f.eval(u);
    let jump_term = if jump == 0.0 { 0.0 } else { 0.5 * f.second_deriv(m) * jump };
    let (dfu, dfv) = (f.deriv(u), f.deriv(v));
    let du = 0.5 * dfu - 0.5 * lambda * (jump_term - a * dfu);
    let dv = 0.5 * dfv - 0.5 * lambda * (jump_term + a * dfv);
    (du, dv)
}

/// One step of the scheme; the window grows by one cell on each side.
pub fn step_nonlinear(cfg: &ShockConfig, u: &GridFunction) -> GridFunction {
    let lambda = cfg.lambda();
    let lo = u.j_min() - 1;
    let hi = u.j_max() + 1;
    let mut flux_prev = numerical_flux(cfg, u.get(lo - 1), u.get(lo));
    let mut values = Vec::with_capacity((hi - lo + 1) as usize);
    for j in lo..=hi {
        let flux_next = numerical_flux(cfg, u.get(j), u.get(j + 1));
        values.push(u.get(j) - lambda * (flux_next - flux_prev));
        flux_prev = flux_next;
    }
    GridFunction::new(lo, values, u.tail_left(), u.tail_right()).expect("nonempty window")
}

/// Caps the window length at `max_len` cells. Cells equal to their tail are removed
/// first; if the window is still too long, edge cells are dropped and the mass they
/// carried (relative to the tails) is returned.
pub fn clamp_window(u: &GridFunction, max_len: usize) -> (GridFunction, f64) {
    if u.len() <= max_len {
        return (u.clone(), 0.0);
    }
    let trimmed = u.trimmed(0.0);
    if trimmed.len() <= max_len {
        return (trimmed, 0.0);
    }
    let excess = trimmed.len() - max_len;
    let drop_left = excess / 2;
    let drop_right = excess - drop_left;
    let lo = trimmed.j_min() + drop_left as i64;
    let hi = trimmed.j_max() - drop_right as i64;
    let mut dropped = 0.0;
    for (j, v) in trimmed.iter() {
        if j < lo {
            dropped += v - trimmed.tail_left();
        } else if j > hi {
            dropped += v - trimmed.tail_right();
        }
    }
    (trimmed.rewindow(lo, hi), dropped)
}

/// `(Id - S) w`, i.e. `w_j - w_{j+1}`.
pub fn apply_id_minus_shift(w: &GridFunction) -> GridFunction {
    let lo = w.j_min() - 1;
    let hi = w.j_max();
    GridFunction::from_fn(lo, hi, w.tail_left() - w.tail_left(), w.tail_right() - w.tail_right(), |j| {
        w.get(j) - w.get(j + 1)
    })
}

/// Which linearized operator to apply.
#[derive(Clone, Debug)]
pub enum LinearOperatorKind {
    /// `𝓛`, linearization around the step shock.
    FullShock,
    /// `𝓛_ℓ`, constant coefficients with `α_ℓ`.
    FreeLeft,
    /// `𝓛_r`, constant coefficients with `α_r`.
    FreeRight,
    /// `𝓛^θ`, linearization around a discrete shock profile.
    AroundProfile(Profile),
}

/// Three-point coefficients `(a_{-1}, a_0, a_{+1})` of row `j`.
pub type Stencil = [f64; 3];

/// Row of the free operator with Courant number `α`.
#[inline]
pub fn free_stencil(alpha: f64) -> Stencil {
    [0.5 * (alpha * alpha + alpha), 1.0 - alpha * alpha, 0.5 * (alpha * alpha - alpha)]
}

/// A tridiagonal operator on ℤ whose rows are explicit on `j_lo..j_lo+rows.len()`
/// and constant on either side.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    left: Stencil,
    right: Stencil,
    j_lo: i64,
    rows: Vec<Stencil>,
}

impl LinearOperator {
    /// `𝓛` around the step shock, built from the Courant triple only.
    pub fn full_shock(params: &SpectralParams) -> Self {
        let (al, ar, am) = (params.alpha_l, params.alpha_r, params.alpha_m);
        let row0 = [0.5 * (al * al + al), 1.0 - 0.5 * al * (al + am), 0.5 * (ar * am - ar)];
        let row1 = [0.5 * (al + al * am), 1.0 - 0.5 * ar * (ar + am), 0.5 * (ar * ar - ar)];
        Self {
            left: free_stencil(al),
            right: free_stencil(ar),
            j_lo: 0,
            rows: vec![row0, row1],
        }
    }

    /// Constant-coefficient operator with Courant number `α`.
    pub fn free(alpha: f64) -> Self {
        let s = free_stencil(alpha);
        Self {
            left: s,
            right: s,
            j_lo: 0,
            rows: Vec::new(),
        }
    }

    /// `𝓛^θ` around the profile values `v` (constant tails beyond its window).
    pub fn around_profile(cfg: &ShockConfig, v: &GridFunction) -> Self {
        let lambda = cfg.lambda();
        let row = |j: i64| -> Stencil {
            let (du_prev, dv_prev) = flux_partials(cfg, v.get(j - 1), v.get(j));
            let (du_next, dv_next) = flux_partials(cfg, v.get(j), v.get(j + 1));
            [lambda * du_prev, 1.0 - lambda * du_next + lambda * dv_prev, -lambda * dv_next]
        };
        let j_lo = v.j_min() - 1;
        let j_hi = v.j_max() + 1;
        Self {
            left: row(j_lo - 1),
            right: row(j_hi + 1),
            j_lo,
            rows: (j_lo..=j_hi).map(row).collect(),
        }
    }

    pub fn from_kind(kind: &LinearOperatorKind, cfg: &ShockConfig) -> Self {
        match kind {
            LinearOperatorKind::FullShock => Self::full_shock(&cfg.spectral_params()),
            LinearOperatorKind::FreeLeft => Self::free(cfg.alpha_l()),
            LinearOperatorKind::FreeRight => Self::free(cfg.alpha_r()),
            LinearOperatorKind::AroundProfile(p) => Self::around_profile(cfg, &p.grid),
        }
    }

    /// Coefficients of row `j`.
    #[inline]
    pub fn stencil(&self, j: i64) -> Stencil {
        if j < self.j_lo {
            self.left
        } else {
            let k = (j - self.j_lo) as usize;
            if k < self.rows.len() {
                self.rows[k]
            } else {
                self.right
            }
        }
    }

    /// Applies the operator to a zero-tail sequence; the window grows by one cell per side.
    pub fn apply<T>(&self, w: &crate::model::Grid<T>) -> crate::model::Grid<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let lo = w.j_min() - 1;
        let hi = w.j_max() + 1;
        let zero = T::default();
        let src = w.values();
        let n = src.len() as i64;
        let at = |k: i64| -> T {
            if k < 0 || k >= n {
                zero
            } else {
                src[k as usize]
            }
        };
        let mut out = Vec::with_capacity(src.len() + 2);
        for j in lo..=hi {
            let k = j - w.j_min();
            let [a, b, c] = self.stencil(j);
            out.push(at(k - 1) * a + at(k) * b + at(k + 1) * c);
        }
        crate::model::Grid::new(lo, out, zero, zero).expect("nonempty window")
    }

    /// Sum of column `j0` (the image of `δ_{j0}`), which equals one for every
    /// conservative linearization.
    pub fn column_sum(&self, j0: i64) -> f64 {
        self.stencil(j0 - 1)[2] + self.stencil(j0)[1] + self.stencil(j0 + 1)[0]
    }
}

/// Applies one of the linearized operators to a zero-tail sequence.
pub fn apply_linear(kind: &LinearOperatorKind, cfg: &ShockConfig, w: &GridFunction) -> Result<GridFunction, SchemeError> {
    if !w.has_zero_tails() {
        return Err(SchemeError::NonzeroTails {
            left: w.tail_left(),
            right: w.tail_right(),
        });
    }
    Ok(LinearOperator::from_kind(kind, cfg).apply(w))
}

/// `𝓝^θ(p)` evaluated around the profile values `v`.
pub fn nonlinear_remainder_grid(cfg: &ShockConfig, v: &GridFunction, p: &GridFunction) -> Result<GridFunction, SchemeError> {
    if !p.has_zero_tails() {
        return Err(SchemeError::NonzeroTails {
            left: p.tail_left(),
            right: p.tail_right(),
        });
    }
    let lambda = cfg.lambda();
    let lo = p.j_min();
    let hi = p.j_max() + 1;
    Ok(GridFunction::from_fn(lo, hi, 0.0, 0.0, |j| {
        let (a, b) = (v.get(j - 1), v.get(j));
        let (pa, pb) = (p.get(j - 1), p.get(j));
        if pa == 0.0 && pb == 0.0 {
            return 0.0;
        }
        let (du, dv) = flux_partials(cfg, a, b);
        lambda * (numerical_flux(cfg, a + pa, b + pb) - numerical_flux(cfg, a, b)) - lambda * (du * pa + dv * pb)
    }))
}

/// `𝓝^θ(p)` for a computed profile.
pub fn nonlinear_remainder(cfg: &ShockConfig, profile: &Profile, p: &GridFunction) -> Result<GridFunction, SchemeError> {
    nonlinear_remainder_grid(cfg, &profile.grid, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_shock_config, Flux};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn burgers() -> ShockConfig {
        ShockConfig::burgers_default()
    }

    fn values_map(g: &GridFunction) -> Vec<(i64, f64)> {
        g.iter().filter(|(_, v)| *v != 0.0).collect()
    }

    #[test]
    fn flux_consistency_and_examples() {
        let cfg = burgers();
        for c in [-1.3, 0.0, 0.2, 0.9] {
            assert_eq!(numerical_flux(&cfg, c, c), 0.5 * c * c);
        }
        assert_eq!(numerical_flux(&cfg, 0.5, -0.5), 0.125);
        assert_eq!(numerical_flux(&cfg, 0.0, 1.0), 3.0 / 16.0);
    }

    #[test]
    fn flux_partials_match_finite_differences() {
        let quartic = Flux::new("quartic", |u| 0.5 * u * u + 0.25 * u.powi(4), |u| u + u.powi(3));
        let cfg = make_shock_config(quartic, 0.8, -0.8, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u: f64 = rng.gen_range(-1.0..1.0);
            let v: f64 = rng.gen_range(-1.0..1.0);
            let h = 1e-6;
            let fd_u = (numerical_flux(&cfg, u + h, v) - numerical_flux(&cfg, u - h, v)) / (2.0 * h);
            let fd_v = (numerical_flux(&cfg, u, v + h) - numerical_flux(&cfg, u, v - h)) / (2.0 * h);
            let (du, dv) = flux_partials(&cfg, u, v);
            assert!((du - fd_u).abs() < 1e-8, "{du} vs {fd_u}");
            assert!((dv - fd_v).abs() < 1e-8, "{dv} vs {fd_v}");
        }
    }

    #[test]
    fn constant_state_is_preserved() {
        let cfg = burgers();
        let u = GridFunction::from_fn(-3, 3, 0.3, 0.3, |_| 0.3);
        let next = step_nonlinear(&cfg, &u);
        assert!(next.values().iter().all(|&x| x == 0.3));
    }

    #[test]
    fn step_shock_is_stationary() {
        let cfg = burgers();
        let u = GridFunction::step_shock(0.5, -0.5);
        let next = step_nonlinear(&cfg, &u);
        for (j, v) in next.iter() {
            assert_eq!(v, if j <= 0 { 0.5 } else { -0.5 });
        }
    }

    #[test]
    fn nonlinear_step_conserves_mass() {
        let cfg = burgers();
        let reference = GridFunction::step_shock(0.5, -0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let u = GridFunction::from_fn(-10, 10, 0.5, -0.5, |j| reference.get(j) + 0.05 * rng.gen_range(-1.0..1.0));
            let m0 = crate::model::excess_mass(&u, &reference).unwrap();
            let m1 = crate::model::excess_mass(&step_nonlinear(&cfg, &u), &reference).unwrap();
            assert!((m0 - m1).abs() < 1e-14);
        }
    }

    #[test]
    fn full_shock_image_of_delta_zero() {
        let cfg = burgers();
        let out = apply_linear(&LinearOperatorKind::FullShock, &cfg, &GridFunction::delta(0)).unwrap();
        assert_eq!(values_map(&out), vec![(-1, -3.0 / 32.0), (0, 31.0 / 32.0), (1, 1.0 / 8.0)]);
        assert_eq!(out.window_sum(), 1.0);
    }

    #[test]
    fn free_right_image_of_delta_zero() {
        let cfg = burgers();
        let out = apply_linear(&LinearOperatorKind::FreeRight, &cfg, &GridFunction::delta(0)).unwrap();
        assert_eq!(values_map(&out), vec![(-1, 5.0 / 32.0), (0, 15.0 / 16.0), (1, -3.0 / 32.0)]);
    }

    #[test]
    fn nonzero_tails_are_rejected() {
        let cfg = burgers();
        let w = GridFunction::step_shock(0.5, -0.5);
        assert!(apply_linear(&LinearOperatorKind::FullShock, &cfg, &w).is_err());
    }

    #[test]
    fn column_sums_are_one() {
        let params = SpectralParams::new(0.3, -0.7, 0.1).unwrap();
        let ops = [LinearOperator::full_shock(&params), LinearOperator::free(0.3), LinearOperator::free(-0.7)];
        for op in &ops {
            for j0 in -5..=5 {
                assert!((op.column_sum(j0) - 1.0).abs() < 1e-14);
                let img = op.apply(&GridFunction::delta(j0));
                assert!((img.window_sum() - 1.0).abs() < 1e-14);
                assert_eq!((img.j_min(), img.j_max()), (j0 - 1, j0 + 1));
            }
        }
    }

    #[test]
    fn full_shock_rows_coincide_with_free_rows_away_from_the_shock() {
        let params = SpectralParams::new(0.3, -0.6, 0.2).unwrap();
        let full = LinearOperator::full_shock(&params);
        let (l, r) = (LinearOperator::free(0.3), LinearOperator::free(-0.6));
        for j in 2..40 {
            assert_eq!(full.stencil(j), r.stencil(j));
            assert_eq!(full.stencil(-j + 1), l.stencil(-j + 1));
        }
    }

    #[test]
    fn full_shock_is_the_frechet_derivative_of_the_step() {
        let cfg = burgers();
        let shock = GridFunction::step_shock(0.5, -0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = GridFunction::from_fn(-4, 5, 0.0, 0.0, |_| rng.gen_range(-1.0..1.0));
        let lin = apply_linear(&LinearOperatorKind::FullShock, &cfg, &w).unwrap();
        let base = step_nonlinear(&cfg, &shock);
        let mut errors = Vec::new();
        for h in [1e-2, 1e-3, 1e-4] {
            let pert = shock.zip_with(&w, |a, b| a + h * b);
            let stepped = step_nonlinear(&cfg, &pert);
            let err = (-6..=7)
                .map(|j| ((stepped.get(j) - base.get(j)) / h - lin.get(j)).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2]);
        assert!(errors[2] < 1e-3);
        assert!(errors[1] / errors[2] > 5.0);
    }

    #[test]
    fn shift_difference_examples() {
        let d = apply_id_minus_shift(&GridFunction::delta(0));
        assert_eq!(values_map(&d), vec![(-1, -1.0), (0, 1.0)]);
        let c = GridFunction::from_fn(-3, 3, 2.0, 2.0, |_| 2.0);
        assert!(apply_id_minus_shift(&c).values().iter().all(|&x| x == 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = GridFunction::from_fn(-6, 9, 0.0, 0.0, |_| rng.gen_range(-1.0..1.0));
        assert!(apply_id_minus_shift(&w).window_sum().abs() < 1e-14);
    }

    #[test]
    fn clamping_reports_dropped_mass() {
        let u = GridFunction::from_fn(-10, 10, 1.0, -1.0, |j| if j <= 0 { 1.0 } else { -1.0 } + if j.abs() == 10 { 0.25 } else { 0.0 });
        let (c, dropped) = clamp_window(&u, 15);
        assert_eq!(c.len(), 15);
        assert!((dropped - 0.5).abs() < 1e-15);
        let (same, none) = clamp_window(&u, 100);
        assert_eq!(same, u);
        assert_eq!(none, 0.0);
    }
}
