//! Dispersion relation, Lopatinskii determinant and spectral stability scans.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{GridFunction, SpectralParams};

pub const GLANCING_TOLERANCE: f64 = 1e-14;
pub const MODULUS_SEPARATION: f64 = 1e-10;
pub const CURVE_BOUNDARY_TOLERANCE: f64 = 1e-12;
pub const CONTOUR_ZERO_TOLERANCE: f64 = 1e-10;
/// `|Δ′(1)|` must exceed this for a scan to be declared spectrally stable.
pub const DERIVATIVE_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 0.05;
pub const DEFAULT_OUTER_RADIUS: f64 = 4.0;
pub const DEFAULT_CONTOUR_POINTS: usize = 2048;
const MAX_CONTOUR_POINTS: usize = 1 << 21;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("glancing point: discriminant modulus {discriminant:e} at z = {z}")]
    GlancingPoint { z: Complex64, discriminant: f64 },
    #[error("Lopatinskii determinant nearly vanishes on the contour (min |Δ| = {min_modulus:e} at z = {z})")]
    ContourThroughZero { z: Complex64, min_modulus: f64 },
    #[error("alpha_m = {alpha_m} is outside [alpha_r, alpha_l] = [{alpha_r}, {alpha_l}]")]
    AlphaMOutOfRange { alpha_l: f64, alpha_r: f64, alpha_m: f64 },
    #[error("|Δ′(1)| = {0:e} is too small")]
    DegenerateDerivative(f64),
    #[error("alpha_l + alpha_r = {0:e} vanishes")]
    SymmetricCase(f64),
    #[error("the alpha_m coefficient of Δ(z0) vanishes ({0:e})")]
    DegenerateAffine(f64),
    #[error("invalid contour parameters: {0}")]
    InvalidContour(String),
    #[error("winding number did not stabilize with {0} points per loop")]
    UnresolvedWinding(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// The two roots of the dispersion relation at a given `z`, labelled by the side
/// of the shock they belong to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KappaPair {
    pub stable: Complex64,
    pub unstable: Complex64,
    pub side: Side,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SpectrallyStable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveRegion {
    Interior,
    Exterior,
    Boundary,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralScan {
    pub params: SpectralParams,
    pub contour: Vec<Complex64>,
    pub delta_values: Vec<Complex64>,
    pub zero_count: i64,
    pub exclusion_radius: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub points_per_loop: usize,
    pub derivative_at_one: f64,
    pub verdict: Verdict,
}

fn dispersion_coefficients(alpha: f64, z: Complex64) -> (f64, Complex64, f64) {
    (alpha * (alpha - 1.0) / 2.0, Complex64::new(1.0 - alpha * alpha, 0.0) - z, alpha * (alpha + 1.0) / 2.0)
}

/// Both roots of `α(α−1)/2 κ² + (1−α²−z) κ + α(α+1)/2 = 0` and the discriminant modulus.
pub fn dispersion_roots(alpha: f64, z: Complex64) -> ([Complex64; 2], f64) {
    let (a, b, c) = dispersion_coefficients(alpha, z);
    let disc = b * b - 4.0 * a * c;
    let sq = disc.sqrt();
    let q_plus = -(b + sq) / 2.0;
    let q_minus = -(b - sq) / 2.0;
    let q = if q_plus.norm() >= q_minus.norm() { q_plus } else { q_minus };
    ([q / a, c / q], disc.norm())
}

fn label(side: Side, roots: [Complex64; 2]) -> KappaPair {
    let (big, small) = if roots[0].norm() >= roots[1].norm() { (roots[0], roots[1]) } else { (roots[1], roots[0]) };
    match side {
        Side::Left => KappaPair {
            stable: big,
            unstable: small,
            side,
        },
        Side::Right => KappaPair {
            stable: small,
            unstable: big,
            side,
        },
    }
}

/// Roots of the dispersion relation for the constant state with Courant number `alpha`.
///
/// On the left of the shock the stable root is the one of larger modulus, on the
/// right the one of smaller modulus.
pub fn kappa_roots(alpha: f64, z: Complex64, side: Side) -> Result<KappaPair, SpectralError> {
    let (roots, disc) = dispersion_roots(alpha, z);
    if disc < GLANCING_TOLERANCE {
        return Err(SpectralError::GlancingPoint { z, discriminant: disc });
    }
    if (roots[0].norm() - roots[1].norm()).abs() > MODULUS_SEPARATION {
        return Ok(label(side, roots));
    }
    let nearby = z * (1.0 + 1e-3);
    let (near_roots, near_disc) = dispersion_roots(alpha, nearby);
    if near_disc < GLANCING_TOLERANCE || (near_roots[0].norm() - near_roots[1].norm()).abs() <= MODULUS_SEPARATION {
        return Err(SpectralError::GlancingPoint { z, discriminant: disc });
    }
    let reference = label(side, near_roots).stable;
    let (stable, unstable) = if (roots[0] - reference).norm() <= (roots[1] - reference).norm() {
        (roots[0], roots[1])
    } else {
        (roots[1], roots[0])
    };
    Ok(KappaPair { stable, unstable, side })
}

/// Position of `z` relative to the spectral curve `{1 − α² + α² cos θ − iα sin θ}`.
pub fn spectral_curve_membership(alpha: f64, z: Complex64) -> CurveRegion {
    let a2 = alpha * alpha;
    let x = z.re - 1.0 + a2;
    let lhs = x * x + a2 * z.im * z.im;
    let rhs = a2 * a2;
    if (lhs - rhs).abs() <= CURVE_BOUNDARY_TOLERANCE {
        CurveRegion::Boundary
    } else if lhs < rhs {
        CurveRegion::Interior
    } else {
        CurveRegion::Exterior
    }
}

/// The two glancing values of `z`, where the dispersion relation has a double root.
pub fn glancing_points(alpha: f64) -> [Complex64; 2] {
    let im = alpha.abs() * (1.0 - alpha * alpha).sqrt();
    [Complex64::new(1.0 - alpha * alpha, im), Complex64::new(1.0 - alpha * alpha, -im)]
}

fn lr_factors(alpha_l: f64, alpha_r: f64, z: Complex64) -> Result<(Complex64, Complex64), SpectralError> {
    let kl = kappa_roots(alpha_l, z, Side::Left)?.stable;
    let kr = kappa_roots(alpha_r, z, Side::Right)?.stable;
    Ok((alpha_l + (1.0 - alpha_l) * kl, alpha_r - (1.0 + alpha_r) / kr))
}

/// Lopatinskii determinant with a possibly complex `α_m`.
pub fn lopatinskii_at(alpha_l: f64, alpha_r: f64, alpha_m: Complex64, z: Complex64) -> Result<Complex64, SpectralError> {
    let (a, b) = lr_factors(alpha_l, alpha_r, z)?;
    Ok(1.0 - alpha_m * alpha_m + (a - alpha_m) * (b - alpha_m))
}

/// `Δ(z) = 1 − α_m² + (α_ℓ − α_m + (1−α_ℓ)κ_ℓ(z)) (α_r − α_m − (1+α_r)/κ_r(z))`.
pub fn lopatinskii(params: &SpectralParams, z: Complex64) -> Result<Complex64, SpectralError> {
    lopatinskii_at(params.alpha_l, params.alpha_r, Complex64::new(params.alpha_m, 0.0), z)
}

/// Closed form of `Δ′(1)`.
pub fn lopatinskii_derivative_at_one(params: &SpectralParams) -> f64 {
    let SpectralParams { alpha_l, alpha_r, alpha_m } = *params;
    -(1.0 + alpha_l) * (1.0 - alpha_m) / alpha_l + (1.0 - alpha_r) * (1.0 + alpha_m) / alpha_r
}

/// The value of `α_m` for which `Δ′(1)` vanishes.
pub fn alpha_m_for_delta_prime_zero(alpha_l: f64, alpha_r: f64) -> Result<f64, SpectralError> {
    let s = alpha_l + alpha_r;
    if s.abs() < 1e-12 {
        return Err(SpectralError::SymmetricCase(s));
    }
    Ok((alpha_r - alpha_l + 2.0 * alpha_l * alpha_r) / s)
}

/// The value of `α_m` for which `Δ(z₀) = 0`. The quadratic terms in `α_m` cancel,
/// leaving `Δ = 1 + AB − α_m (A + B)`.
pub fn alpha_m_for_delta_zero(alpha_l: f64, alpha_r: f64, z0: Complex64) -> Result<Complex64, SpectralError> {
    let (a, b) = lr_factors(alpha_l, alpha_r, z0)?;
    let slope = a + b;
    if slope.norm() < 1e-12 {
        return Err(SpectralError::DegenerateAffine(slope.norm()));
    }
    Ok((1.0 + a * b) / slope)
}

/// Coefficients `β`, `γ` of the polynomial whose roots contain every zero of `Δ`
/// off the curve, together with the check of the factorization of `β − 4γ`.
pub fn convexity_certificate(params: &SpectralParams) -> Result<(f64, f64, bool), SpectralError> {
    let SpectralParams { alpha_l, alpha_r, alpha_m } = *params;
    if !(alpha_m >= alpha_r && alpha_m <= alpha_l) {
        return Err(SpectralError::AlphaMOutOfRange { alpha_l, alpha_r, alpha_m });
    }
    let beta = (1.0 - alpha_m * alpha_m)
        * ((alpha_l - alpha_r).powi(2) - (alpha_m * (alpha_l + alpha_r) - 2.0 * alpha_l * alpha_r).powi(2));
    let gamma = (alpha_m - alpha_r) * (alpha_l - alpha_m) * (1.0 + alpha_l * alpha_r - alpha_m * (alpha_l + alpha_r));
    let square = ((alpha_l + alpha_r) * (1.0 + alpha_m * alpha_m) - 2.0 * (1.0 + alpha_l * alpha_r) * alpha_m).powi(2);
    let ok = (beta - 4.0 * gamma - square).abs() <= 1e-12;
    Ok((beta, gamma, ok))
}

/// Explicit element of the kernel of `Id − 𝓛` on the window `[-J, J]`.
pub fn kernel_eigenvector(params: &SpectralParams, half_width: i64) -> Result<GridFunction, SpectralError> {
    let SpectralParams { alpha_l, alpha_r, alpha_m } = *params;
    let d = lopatinskii_derivative_at_one(params);
    if d.abs() < 1e-10 {
        return Err(SpectralError::DegenerateDerivative(d));
    }
    let kl = -(1.0 + alpha_l) / (1.0 - alpha_l);
    let kr = -(1.0 + alpha_r) / (1.0 - alpha_r);
    let left = -2.0 * (1.0 - alpha_m) / (alpha_l * d);
    let right = 2.0 * (1.0 + alpha_m) / (alpha_r * d);
    Ok(GridFunction::from_fn(-half_width, half_width, 0.0, 0.0, |j| {
        if j <= 0 {
            left * kl.powi(j as i32)
        } else {
            right * kr.powi((j - 1) as i32)
        }
    }))
}

/// Largest relative discrepancy between the two directional derivatives of `Δ`
/// at the given points, with centered differences of step `h`.
pub fn cauchy_riemann_residual(params: &SpectralParams, points: &[Complex64], h: f64) -> Result<f64, SpectralError> {
    let residuals: Result<Vec<f64>, SpectralError> = points
        .par_iter()
        .map(|&z| {
            let dx = (lopatinskii(params, z + h)? - lopatinskii(params, z - h)?) / (2.0 * h);
            let dy = (lopatinskii(params, z + Complex64::new(0.0, h))? - lopatinskii(params, z - Complex64::new(0.0, h))?)
                / Complex64::new(0.0, 2.0 * h);
            Ok((dx - dy).norm() / (1.0 + dx.norm()))
        })
        .collect();
    Ok(residuals?.into_iter().fold(0.0, f64::max))
}

fn inner_radius(params: &SpectralParams, exclusion: f64) -> f64 {
    let bound = [params.alpha_l, params.alpha_r]
        .iter()
        .map(|&a| (1.0 - a * a) * exclusion.powi(4) / (4.0 * a * a))
        .fold(f64::INFINITY, f64::min)
        .min(0.5);
    let eta_max = -0.5 * (1.0 - bound).ln();
    let mut eta = (0.5 * eta_max).min(0.01);
    let corner = ((1.0 - exclusion).powi(2) + exclusion * exclusion).sqrt();
    loop {
        let r = (-eta).exp();
        let glancing_clear = [params.alpha_l, params.alpha_r].iter().flat_map(|&a| glancing_points(a)).all(|g| {
            g.norm() < r || ((g.re - 1.0).abs() < exclusion && g.im.abs() < exclusion)
        });
        if r > corner && glancing_clear {
            return r;
        }
        eta *= 0.5;
    }
}

#[derive(Clone, Copy)]
enum Segment {
    Arc { radius: f64, from: f64, to: f64 },
    Line { from: Complex64, to: Complex64 },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Arc { radius, from, to } => radius * (to - from).abs(),
            Segment::Line { from, to } => (to - from).norm(),
        }
    }

    fn point(&self, t: f64) -> Complex64 {
        match *self {
            Segment::Arc { radius, from, to } => Complex64::from_polar(radius, from + t * (to - from)),
            Segment::Line { from, to } => from + (to - from) * t,
        }
    }
}

fn sample_loop(segments: &[Segment], n: usize) -> Vec<Complex64> {
    let total: f64 = segments.iter().map(Segment::length).sum();
    let mut out = Vec::with_capacity(n + segments.len());
    for seg in segments {
        let m = ((seg.length() / total * n as f64).ceil() as usize).max(2);
        out.extend((0..m).map(|k| seg.point(k as f64 / m as f64)));
    }
    out
}

fn loops(r_in: f64, r_out: f64, eps: f64) -> (Vec<Segment>, Vec<Segment>) {
    let outer = vec![Segment::Arc {
        radius: r_out,
        from: 0.0,
        to: 2.0 * PI,
    }];
    let xc = (r_in * r_in - eps * eps).sqrt();
    let phi = eps.atan2(xc);
    let inner = vec![
        Segment::Arc {
            radius: r_in,
            from: phi,
            to: 2.0 * PI - phi,
        },
        Segment::Line {
            from: Complex64::new(xc, -eps),
            to: Complex64::new(1.0 + eps, -eps),
        },
        Segment::Line {
            from: Complex64::new(1.0 + eps, -eps),
            to: Complex64::new(1.0 + eps, eps),
        },
        Segment::Line {
            from: Complex64::new(1.0 + eps, eps),
            to: Complex64::new(xc, eps),
        },
    ];
    (outer, inner)
}

struct Winding {
    turns: i64,
    max_step: f64,
}

fn winding(values: &[Complex64]) -> Winding {
    let n = values.len();
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for k in 0..n {
        let step = (values[(k + 1) % n] / values[k]).arg();
        max_step = max_step.max(step.abs());
        total += step;
    }
    Winding {
        turns: (total / (2.0 * PI)).round() as i64,
        max_step,
    }
}

fn evaluate(params: &SpectralParams, points: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
    points.par_iter().map(|&z| lopatinskii(params, z)).collect()
}

/// Number of zeros of `Δ` in `{e^{−η} ≤ |z| ≤ r_outer}` minus the square ball of
/// half-side `exclusion_radius` around 1, by the argument principle.
///
/// `η` is chosen so that the contour, and the region it bounds, avoid the
/// spectral curves except inside the excluded square. The sampling is refined
/// until the winding number is stable under doubling and every sampled phase
/// increment is below `π/2`.
pub fn count_zeros(
    params: &SpectralParams,
    r_outer: f64,
    exclusion_radius: f64,
    n_points: usize,
) -> Result<SpectralScan, SpectralError> {
    if !(r_outer > 1.0 + exclusion_radius) || !r_outer.is_finite() {
        return Err(SpectralError::InvalidContour(format!("outer radius {r_outer} must exceed 1 + exclusion radius")));
    }
    if !(exclusion_radius > 0.0 && exclusion_radius < 0.5) {
        return Err(SpectralError::InvalidContour(format!("exclusion radius {exclusion_radius} not in (0, 0.5)")));
    }
    if n_points < 512 {
        return Err(SpectralError::InvalidContour(format!("{n_points} contour points, at least 512 required")));
    }
    let r_in = inner_radius(params, exclusion_radius);
    let (outer, inner) = loops(r_in, r_outer, exclusion_radius);

    let mut n = n_points;
    let mut previous: Option<i64> = None;
    loop {
        let zo = sample_loop(&outer, n);
        let zi = sample_loop(&inner, n);
        let vo = evaluate(params, &zo)?;
        let vi = evaluate(params, &zi)?;
        let (zmin, min_modulus) = zo
            .iter()
            .zip(&vo)
            .chain(zi.iter().zip(&vi))
            .map(|(z, v)| (*z, v.norm()))
            .fold((Complex64::new(0.0, 0.0), f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if min_modulus < CONTOUR_ZERO_TOLERANCE {
            return Err(SpectralError::ContourThroughZero { z: zmin, min_modulus });
        }
        let (wo, wi) = (winding(&vo), winding(&vi));
        let count = wo.turns - wi.turns;
        let resolved = wo.max_step < PI / 2.0 && wi.max_step < PI / 2.0;
        if resolved && previous == Some(count) {
            let derivative_at_one = lopatinskii_derivative_at_one(params);
            let verdict = if count > 0 {
                Verdict::Unstable
            } else if count == 0 && derivative_at_one.abs() > DERIVATIVE_THRESHOLD {
                Verdict::SpectrallyStable
            } else {
                Verdict::Inconclusive
            };
            let mut contour = zo;
            contour.extend(zi);
            let mut delta_values = vo;
            delta_values.extend(vi);
            return Ok(SpectralScan {
                params: *params,
                contour,
                delta_values,
                zero_count: count,
                exclusion_radius,
                inner_radius: r_in,
                outer_radius: r_outer,
                points_per_loop: n,
                derivative_at_one,
                verdict,
            });
        }
        previous = resolved.then_some(count);
        n *= 2;
        if n > MAX_CONTOUR_POINTS {
            return Err(SpectralError::UnresolvedWinding(n / 2));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ShockConfig;
    use crate::scheme::LinearOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn burgers() -> SpectralParams {
        SpectralParams::new(0.25, -0.25, 0.0).unwrap()
    }

    fn random_exterior(rng: &mut ChaCha8Rng) -> Complex64 {
        let r = rng.gen_range(1.02..3.0);
        Complex64::from_polar(r, rng.gen_range(0.0..2.0 * PI))
    }

    #[test]
    fn roots_at_one() {
        let l = kappa_roots(0.25, c(1.0, 0.0), Side::Left).unwrap();
        assert!((l.stable - c(-5.0 / 3.0, 0.0)).norm() < 1e-14);
        assert!((l.unstable - c(1.0, 0.0)).norm() < 1e-14);
        let r = kappa_roots(-0.25, c(1.0, 0.0), Side::Right).unwrap();
        assert!((r.stable - c(-0.6, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn roots_at_two() {
        let l = kappa_roots(1.0 / 3.0, c(2.0, 0.0), Side::Left).unwrap();
        assert!((l.stable - c(-5.0 - 3.0 * 3f64.sqrt(), 0.0)).norm() < 1e-12);
        let r = kappa_roots(-2.0 / 3.0, c(2.0, 0.0), Side::Right).unwrap();
        assert!((r.stable - c((13.0 - 3.0 * 21f64.sqrt()) / 10.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn root_product_and_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let z = random_exterior(&mut rng);
            for (alpha, side) in [(rng.gen_range(0.05..0.95), Side::Left), (-rng.gen_range(0.05..0.95), Side::Right)] {
                let k = kappa_roots(alpha, z, side).unwrap();
                let product = -(1.0 + alpha) / (1.0 - alpha);
                assert!((k.stable * k.unstable - product).norm() < 1e-12 * (1.0 + product.abs()));
                match side {
                    Side::Left => assert!(k.stable.norm() > 1.0 && k.unstable.norm() < 1.0),
                    Side::Right => assert!(k.stable.norm() < 1.0 && k.unstable.norm() > 1.0),
                }
            }
        }
    }

    #[test]
    fn symmetric_roots_are_reciprocal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let z = random_exterior(&mut rng);
            let a = rng.gen_range(0.05..0.95);
            let kl = kappa_roots(a, z, Side::Left).unwrap().stable;
            let kr = kappa_roots(-a, z, Side::Right).unwrap().stable;
            assert!((kr - 1.0 / kl).norm() < 1e-12);
        }
    }

    #[test]
    fn glancing_points_are_rejected() {
        for g in glancing_points(0.4) {
            assert!(matches!(kappa_roots(0.4, g, Side::Left), Err(SpectralError::GlancingPoint { .. })));
        }
    }

    #[test]
    fn curve_membership() {
        assert_eq!(spectral_curve_membership(0.3, c(1.0, 0.0)), CurveRegion::Boundary);
        assert_eq!(spectral_curve_membership(0.3, c(2.0, 0.0)), CurveRegion::Exterior);
        assert_eq!(spectral_curve_membership(0.3, c(1.0 - 0.09, 0.0)), CurveRegion::Interior);
    }

    #[test]
    fn determinant_vanishes_at_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = SpectralParams::new(rng.gen_range(0.05..0.95), -rng.gen_range(0.05..0.95), rng.gen_range(-3.0..3.0)).unwrap();
            assert!(lopatinskii(&p, c(1.0, 0.0)).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = 0.35;
        let p = SpectralParams::new(a, -a, 0.1).unwrap();
        for _ in 0..10 {
            let z = random_exterior(&mut rng);
            let kl = kappa_roots(a, z, Side::Left).unwrap().stable;
            let expected = (1.0 - a) * (1.0 - kl) * (1.0 + a + (1.0 - a) * kl);
            let got = lopatinskii(&p, z).unwrap();
            assert!((got - expected).norm() <= 1e-10 * (1.0 + expected.norm()));
        }
    }

    #[test]
    fn derivative_at_one() {
        assert!((lopatinskii_derivative_at_one(&burgers()) + 10.0).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let p = SpectralParams::new(rng.gen_range(0.1..0.9), -rng.gen_range(0.1..0.9), rng.gen_range(-1.0..1.0)).unwrap();
            let h = 1e-5;
            let fd = (lopatinskii(&p, c(1.0 + h, 0.0)).unwrap() - lopatinskii(&p, c(1.0 - h, 0.0)).unwrap()).re / (2.0 * h);
            let exact = lopatinskii_derivative_at_one(&p);
            assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn degenerate_derivative_value() {
        let am = alpha_m_for_delta_prime_zero(1.0 / 3.0, -2.0 / 3.0).unwrap();
        assert!((am - 13.0 / 3.0).abs() < 1e-14);
        let p = SpectralParams::new(1.0 / 3.0, -2.0 / 3.0, am).unwrap();
        assert!(lopatinskii_derivative_at_one(&p).abs() < 1e-12);
        assert!(matches!(alpha_m_for_delta_prime_zero(0.5, -0.5), Err(SpectralError::SymmetricCase(_))));
    }

    #[test]
    fn instability_value_of_alpha_m() {
        let am = alpha_m_for_delta_zero(1.0 / 3.0, -2.0 / 3.0, c(2.0, 0.0)).unwrap();
        let (s3, s7, s21) = (3f64.sqrt(), 7f64.sqrt(), 21f64.sqrt());
        let closed = (3.5 + 3.0 * (s3 + s7 + s21 / 2.0)) / (1.5 + 2.0 * s3 - s21 / 2.0);
        assert!(am.im.abs() < 1e-12);
        assert!((am.re - closed).abs() < 1e-10);
        assert!((am.re - 8.79).abs() < 0.01);
        let p = SpectralParams::new(1.0 / 3.0, -2.0 / 3.0, am.re).unwrap();
        assert!(lopatinskii(&p, c(2.0, 0.0)).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn alpha_m_round_trip_and_affinity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (al, ar) = (rng.gen_range(0.1..0.9), -rng.gen_range(0.1..0.9));
            let z0 = random_exterior(&mut rng);
            let am = alpha_m_for_delta_zero(al, ar, z0).unwrap();
            assert!(lopatinskii_at(al, ar, am, z0).unwrap().norm() <= 1e-10 * (1.0 + am.norm()));
            let d: Vec<Complex64> = [-1.0, 0.5, 2.0].iter().map(|&m| lopatinskii_at(al, ar, c(m, 0.0), z0).unwrap()).collect();
            let second_difference = (d[2] - d[1]) / 1.5 - (d[1] - d[0]) / 1.5;
            assert!(second_difference.norm() <= 1e-10 * (1.0 + d[1].norm()));
        }
    }

    #[test]
    fn convexity_certificate_values() {
        let (beta, gamma, ok) = convexity_certificate(&burgers()).unwrap();
        assert!((beta - 15.0 / 64.0).abs() < 1e-15);
        assert!((gamma - 15.0 / 256.0).abs() < 1e-15);
        assert!((beta - 4.0 * gamma).abs() < 1e-15);
        assert!(ok);
        let (_, gamma, _) = convexity_certificate(&SpectralParams::new(0.6, -0.3, -0.3).unwrap()).unwrap();
        assert_eq!(gamma, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let (al, ar) = (rng.gen_range(0.01..0.99), -rng.gen_range(0.01..0.99));
            let p = SpectralParams::new(al, ar, rng.gen_range(ar..al)).unwrap();
            let (beta, _, ok) = convexity_certificate(&p).unwrap();
            assert!(beta > 0.0 && ok);
        }
        assert!(matches!(
            convexity_certificate(&SpectralParams::new(0.3, -0.3, 0.5).unwrap()),
            Err(SpectralError::AlphaMOutOfRange { .. })
        ));
    }

    #[test]
    fn kernel_vector() {
        let h = kernel_eigenvector(&burgers(), 200).unwrap();
        assert!((h.get(0) - 0.8).abs() < 1e-14);
        assert!((h.get(1) - 0.8).abs() < 1e-14);
        let cfg = ShockConfig::burgers_default();
        let lh = LinearOperator::full_shock(&cfg.spectral_params()).apply(&h);
        let defect = (lh.j_min()..=lh.j_max()).map(|j| (h.get(j) - lh.get(j)).abs()).fold(0.0, f64::max);
        assert!(defect <= 1e-12);
        let p = SpectralParams::new(1.0 / 3.0, -2.0 / 3.0, 13.0 / 3.0).unwrap();
        assert!(matches!(kernel_eigenvector(&p, 10), Err(SpectralError::DegenerateDerivative(_))));
    }

    #[test]
    fn burgers_scan_is_stable() {
        let scan = count_zeros(&burgers(), DEFAULT_OUTER_RADIUS, DEFAULT_EXCLUSION_RADIUS, 1024).unwrap();
        assert_eq!(scan.zero_count, 0);
        assert_eq!(scan.verdict, Verdict::SpectrallyStable);
        assert_eq!(scan.contour.len(), scan.delta_values.len());
        let refined = count_zeros(&burgers(), DEFAULT_OUTER_RADIUS, DEFAULT_EXCLUSION_RADIUS, 2 * scan.points_per_loop).unwrap();
        assert_eq!(refined.zero_count, 0);
    }

    #[test]
    fn scan_contour_is_holomorphic() {
        let scan = count_zeros(&burgers(), DEFAULT_OUTER_RADIUS, DEFAULT_EXCLUSION_RADIUS, 512).unwrap();
        let sample: Vec<Complex64> = scan.contour.iter().step_by(7).copied().collect();
        assert!(cauchy_riemann_residual(&burgers(), &sample, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn instability_scans() {
        let am = alpha_m_for_delta_zero(1.0 / 3.0, -2.0 / 3.0, c(2.0, 0.0)).unwrap().re;
        let p = SpectralParams::new(1.0 / 3.0, -2.0 / 3.0, am).unwrap();
        let scan = count_zeros(&p, DEFAULT_OUTER_RADIUS, DEFAULT_EXCLUSION_RADIUS, 1024).unwrap();
        assert!(scan.zero_count >= 1);
        assert_eq!(scan.verdict, Verdict::Unstable);
        let q = SpectralParams::new(1.0 / 3.0, -2.0 / 3.0, 13.0 / 3.0).unwrap();
        let scan = count_zeros(&q, DEFAULT_OUTER_RADIUS, DEFAULT_EXCLUSION_RADIUS, 1024).unwrap();
        assert!(scan.derivative_at_one.abs() < 1e-10);
        assert_eq!(scan.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn invalid_contours_are_rejected() {
        assert!(count_zeros(&burgers(), 1.01, 0.05, 1024).is_err());
        assert!(count_zeros(&burgers(), 3.0, 0.6, 1024).is_err());
        assert!(count_zeros(&burgers(), 3.0, 0.05, 100).is_err());
    }
}
