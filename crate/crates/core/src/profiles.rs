//! Stationary discrete shock profiles `v^θ`, computed by shooting from the cell
//! `j = 0` and bisecting on the excess mass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{excess_mass, GridFunction, ShockConfig};
use crate::scheme::{flux_partials, numerical_flux};

pub const DEFAULT_HALF_WIDTH: i64 = 200;
pub const NEWTON_TOLERANCE: f64 = 1e-14;
pub const NEWTON_MAX_ITER: usize = 50;
const TAIL_SNAP: f64 = 1e-14;
const DECAY_FLOOR: f64 = 1e-13;
const SCAN_POINTS: usize = 33;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("Newton iteration diverged at j = {j}; last iterate {last}")]
    NewtonDivergence { j: i64, last: f64 },
    #[error("Newton iterate {value} left the admissible band [{lo}, {hi}] at j = {j}")]
    BranchEscape { j: i64, value: f64, lo: f64, hi: f64 },
    #[error("anchor {anchor} outside [{u_r}, {u_l}]")]
    AnchorOutOfRange { anchor: f64, u_l: f64, u_r: f64 },
    #[error("half width {0} too small")]
    WindowTooSmall(i64),
    #[error("excess mass {theta} not reachable; achievable interval after translation reduction is [{lo}, {hi}]")]
    MassOutOfRange { theta: f64, lo: f64, hi: f64 },
    #[error("excess mass is not monotone in the anchor near {anchor}")]
    NonMonotoneMass { anchor: f64 },
    #[error("fewer than 5 tail points above {DECAY_FLOOR:e}")]
    InsufficientTail,
}

/// A computed member `v^θ` of the family of stationary discrete shock profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub grid: GridFunction,
    /// Excess mass with respect to the step shock.
    pub theta: f64,
    /// Value at the shooting cell, before translation.
    pub anchor: f64,
    /// Number of cells by which the shot profile was translated to the right.
    pub translation: i64,
    /// `max_j |𝓕_λ(v_j, v_{j+1}) - f(u_l)|` over the window.
    pub residual: f64,
    /// Fitted exponential tail rate, `+∞` when both tails are exactly flat.
    pub decay_rate: f64,
}

fn solve_scalar(
    j: i64,
    start: f64,
    band: (f64, f64),
    mut g: impl FnMut(f64) -> (f64, f64),
) -> Result<f64, ProfileError> {
    let mut x = start;
    for _ in 0..NEWTON_MAX_ITER {
        let (val, slope) = g(x);
        if val == 0.0 {
            return Ok(x);
        }
        if slope == 0.0 || !slope.is_finite() {
            return Err(ProfileError::NewtonDivergence { j, last: x });
        }
        let step = val / slope;
        x -= step;
        if !x.is_finite() {
            return Err(ProfileError::NewtonDivergence { j, last: x });
        }
        if x < band.0 || x > band.1 {
            return Err(ProfileError::BranchEscape {
                j,
                value: x,
                lo: band.0,
                hi: band.1,
            });
        }
        if step.abs() <= NEWTON_TOLERANCE * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Err(ProfileError::NewtonDivergence { j, last: x })
}

/// Shoots the profile recurrence `𝓕_λ(v_j, v_{j+1}) = f(u_l)` from `v_0 = anchor`
/// on the window `[-J, J]`. Each Newton solve starts from the end state the
/// branch is heading to; once a value is within `1e-14` of its end state the
/// remaining cells are set to that end state.
pub fn shoot_profile(cfg: &ShockConfig, anchor: f64, half_width: i64) -> Result<GridFunction, ProfileError> {
    let (u_l, u_r) = (cfg.u_l(), cfg.u_r());
    if half_width < 10 {
        return Err(ProfileError::WindowTooSmall(half_width));
    }
    if !(anchor >= u_r.min(u_l) && anchor <= u_r.max(u_l)) {
        return Err(ProfileError::AnchorOutOfRange { anchor, u_l, u_r });
    }
    let level = cfg.flux_level();
    let band = (u_l.min(u_r) - 1.0, u_l.max(u_r) + 1.0);
    let width = half_width as usize;
    let mut right = Vec::with_capacity(width);
    let mut prev = anchor;
    let mut settled = false;
    for j in 1..=half_width {
        if settled {
            right.push(u_r);
            continue;
        }
        let next = solve_scalar(j, u_r, band, |w| {
            (numerical_flux(cfg, prev, w) - level, flux_partials(cfg, prev, w).1)
        })?;
        let next = if (next - u_r).abs() < TAIL_SNAP {
            settled = true;
            u_r
        } else {
            next
        };
        right.push(next);
        prev = next;
    }
    let mut left = Vec::with_capacity(width);
    let mut prev = anchor;
    settled = false;
    for j in (-half_width..=-1).rev() {
        if settled {
            left.push(u_l);
            continue;
        }
        let next = solve_scalar(j, u_l, band, |w| {
            (numerical_flux(cfg, w, prev) - level, flux_partials(cfg, w, prev).0)
        })?;
        let next = if (next - u_l).abs() < TAIL_SNAP {
            settled = true;
            u_l
        } else {
            next
        };
        left.push(next);
        prev = next;
    }
    left.reverse();
    left.push(anchor);
    left.extend(right);
    Ok(GridFunction::new(-half_width, left, u_l, u_r).expect("nonempty window"))
}

/// `max_j |𝓕_λ(v_j, v_{j+1}) - f(u_l)|` over the window and one cell beyond.
pub fn stationarity_residual(cfg: &ShockConfig, v: &GridFunction) -> f64 {
    let level = cfg.flux_level();
    (v.j_min() - 1..=v.j_max())
        .map(|j| (numerical_flux(cfg, v.get(j), v.get(j + 1)) - level).abs())
        .fold(0.0, f64::max)
}

fn step_reference(cfg: &ShockConfig) -> GridFunction {
    GridFunction::step_shock(cfg.u_l(), cfg.u_r())
}

fn shot_mass(cfg: &ShockConfig, anchor: f64, half_width: i64) -> Result<(GridFunction, f64), ProfileError> {
    let v = shoot_profile(cfg, anchor, half_width)?;
    let m = excess_mass(&v, &step_reference(cfg)).expect("profile tails match the end states");
    Ok((v, m))
}

/// Excess mass of the shot profile at evenly spaced anchors in `[u_r, u_l]`.
pub fn mass_anchor_scan(cfg: &ShockConfig, points: usize, half_width: i64) -> Result<Vec<(f64, f64)>, ProfileError> {
    let (lo, hi) = (cfg.u_r(), cfg.u_l());
    (0..points)
        .map(|k| {
            let a = if k + 1 == points { hi } else { lo + (hi - lo) * k as f64 / (points - 1) as f64 };
            shot_mass(cfg, a, half_width).map(|(_, m)| (a, m))
        })
        .collect()
}

/// Profile with excess mass `θ` relative to the step shock.
///
/// `θ` is first reduced modulo the translation mass `u_l - u_r` into the interval
/// reached by shooting from `v_0 ∈ [u_r, u_l]`; the result is then translated back.
pub fn profile_with_mass(cfg: &ShockConfig, theta: f64, half_width: i64) -> Result<Profile, ProfileError> {
    let jump = cfg.jump();
    let shift = (theta / jump).ceil();
    let reduced = theta - shift * jump;
    let shift = shift as i64;

    let scan = mass_anchor_scan(cfg, SCAN_POINTS, half_width)?;
    for w in scan.windows(2) {
        if !(w[1].1 >= w[0].1) {
            return Err(ProfileError::NonMonotoneMass { anchor: w[1].0 });
        }
    }
    let (m_lo, m_hi) = (scan[0].1, scan[scan.len() - 1].1);
    let slack = 1e-12;
    if reduced < m_lo - slack || reduced > m_hi + slack {
        return Err(ProfileError::MassOutOfRange {
            theta,
            lo: m_lo,
            hi: m_hi,
        });
    }

    let (mut a_lo, mut a_hi) = (cfg.u_r(), cfg.u_l());
    let mut best = if (reduced - m_hi).abs() <= (reduced - m_lo).abs() { a_hi } else { a_lo };
    let mut best_err = (reduced - m_hi).abs().min((reduced - m_lo).abs());
    if best_err > 1e-15 {
        let (mut lo_mass, mut hi_mass) = (m_lo, m_hi);
        for _ in 0..200 {
            let mid = 0.5 * (a_lo + a_hi);
            if mid <= a_lo || mid >= a_hi {
                break;
            }
            let (_, m) = shot_mass(cfg, mid, half_width)?;
            let err = (m - reduced).abs();
            if err < best_err {
                best_err = err;
                best = mid;
            }
            if m < reduced {
                a_lo = mid;
                lo_mass = m;
            } else {
                a_hi = mid;
                hi_mass = m;
            }
            if hi_mass - lo_mass <= 1e-16 {
                break;
            }
        }
    }
    let grid = shoot_profile(cfg, best, half_width)?.translate(shift);
    let residual = stationarity_residual(cfg, &grid);
    let mut profile = Profile {
        grid,
        theta,
        anchor: best,
        translation: shift,
        residual,
        decay_rate: f64::INFINITY,
    };
    profile.decay_rate = match fit_decay_rate(&profile) {
        Ok(rate) => rate,
        Err(ProfileError::InsufficientTail) | Err(ProfileError::WindowTooSmall(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(profile)
}

/// Least-squares slope of `log|v_j - tail|` against `|j|` on each side of the
/// shock; the smaller of the two rates is returned.
pub fn fit_decay_rate(profile: &Profile) -> Result<f64, ProfileError> {
    let g = &profile.grid;
    let center = profile.translation;
    let half = (center - g.j_min()).min(g.j_max() - center - 1);
    if half < 20 {
        return Err(ProfileError::WindowTooSmall(half));
    }
    let side = |left: bool| -> Vec<(f64, f64)> {
        g.iter()
            .filter(|&(j, _)| if left { j <= center } else { j > center })
            .filter_map(|(j, v)| {
                let tail = if left { g.tail_left() } else { g.tail_right() };
                let d = (v - tail).abs();
                let dist = if left { (center - j) as f64 } else { (j - center - 1) as f64 };
                (d > DECAY_FLOOR).then(|| (dist, d.ln()))
            })
            .collect()
    };
    let (l, r) = (side(true), side(false));
    if l.is_empty() && r.is_empty() {
        return Ok(f64::INFINITY);
    }
    let mut rates = Vec::new();
    for pts in [&l, &r] {
        if pts.len() >= 5 {
            rates.push(-least_squares_slope(pts));
        } else if !pts.is_empty() && pts.len() < 5 && (l.len() < 5 && r.len() < 5) {
            return Err(ProfileError::InsufficientTail);
        }
    }
    if rates.is_empty() {
        return Err(ProfileError::InsufficientTail);
    }
    Ok(rates.into_iter().fold(f64::INFINITY, f64::min))
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::step_nonlinear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ShockConfig {
        ShockConfig::burgers_default()
    }

    #[test]
    fn anchor_at_left_state_keeps_the_left_side_flat() {
        let v = shoot_profile(&cfg(), 0.5, 30).unwrap();
        assert!((-30..=0).all(|j| v.get(j) == 0.5));
    }

    #[test]
    fn shooting_residuals_are_tiny() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = rng.gen_range(-0.5..0.5);
            let v = shoot_profile(&c, a, 200).unwrap();
            assert!(stationarity_residual(&c, &v) <= 1e-12);
        }
    }

    #[test]
    fn zero_mass_gives_the_step_shock() {
        let c = cfg();
        let p = profile_with_mass(&c, 0.0, 200).unwrap();
        for j in -200..=200 {
            let expected = if j <= 0 { 0.5 } else { -0.5 };
            assert!((p.grid.get(j) - expected).abs() <= 1e-10);
        }
        assert!(p.decay_rate.is_infinite());
    }

    #[test]
    fn unit_mass_gives_the_translated_shock() {
        let p = profile_with_mass(&cfg(), 1.0, 200).unwrap();
        assert!((p.grid.get(0) - 0.5).abs() <= 1e-8);
        assert!((p.grid.get(1) - 0.5).abs() <= 1e-8);
        assert!((p.grid.get(2) + 0.5).abs() <= 1e-8);
        let q = profile_with_mass(&cfg(), -1.0, 200).unwrap();
        assert!((q.grid.get(-1) - 0.5).abs() <= 1e-8);
        assert!((q.grid.get(0) + 0.5).abs() <= 1e-8);
    }

    #[test]
    fn profiles_match_their_mass_and_are_fixed_points() {
        let c = cfg();
        let reference = GridFunction::step_shock(0.5, -0.5);
        for theta in [-1.7, -0.4, 0.25, 0.5, 1.3, 2.0] {
            let p = profile_with_mass(&c, theta, 200).unwrap();
            let m = excess_mass(&p.grid, &reference).unwrap();
            assert!((m - theta).abs() <= 1e-8, "theta {theta}: mass {m}");
            assert!(p.residual <= 1e-10);
            let next = step_nonlinear(&c, &p.grid);
            let diff = (next.j_min()..=next.j_max()).map(|j| (next.get(j) - p.grid.get(j)).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-10);
            assert_eq!(p.grid.tail_left(), 0.5);
            assert_eq!(p.grid.tail_right(), -0.5);
        }
    }

    #[test]
    fn translation_consistency() {
        let c = cfg();
        for theta in [-0.3, 0.45] {
            let a = profile_with_mass(&c, theta, 200).unwrap();
            let b = profile_with_mass(&c, theta + c.jump(), 200).unwrap();
            let shifted = a.grid.translate(1);
            for j in -150..=150 {
                assert!((b.grid.get(j) - shifted.get(j)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn mass_is_monotone_in_the_anchor() {
        let scan = mass_anchor_scan(&cfg(), 41, 200).unwrap();
        assert!(scan.windows(2).all(|w| w[1].1 > w[0].1));
        assert!((scan[0].1 + 1.0).abs() < 1e-12);
        assert_eq!(scan[40].1, 0.0);
    }

    #[test]
    fn decay_rate_is_stable_under_window_doubling() {
        let c = cfg();
        let p = profile_with_mass(&c, 0.5, 200).unwrap();
        let q = profile_with_mass(&c, 0.5, 400).unwrap();
        assert!(p.decay_rate.is_finite() && p.decay_rate > 0.0);
        assert!((p.decay_rate - q.decay_rate).abs() <= 0.05 * p.decay_rate);
    }

    #[test]
    fn profiles_approach_the_step_shock_exponentially() {
        let c = cfg();
        let step = profile_with_mass(&c, 0.0, 200).unwrap();
        let mut worst: f64 = 0.0;
        let delta = 0.4;
        for theta in [-0.3, -0.1, 0.1, 0.3] {
            let p = profile_with_mass(&c, theta, 200).unwrap();
            for j in -60..=60 {
                let d = (p.grid.get(j) - step.grid.get(j)).abs();
                let bound = theta.abs() * (-delta * (j.abs() as f64)).exp();
                worst = worst.max(d / bound);
            }
        }
        assert!(worst.is_finite() && worst < 50.0, "fitted constant {worst}");
    }

    #[test]
    fn out_of_range_anchor_is_rejected() {
        assert!(matches!(shoot_profile(&cfg(), 0.9, 20), Err(ProfileError::AnchorOutOfRange { .. })));
        assert!(matches!(shoot_profile(&cfg(), 0.0, 5), Err(ProfileError::WindowTooSmall(5))));
    }
}
