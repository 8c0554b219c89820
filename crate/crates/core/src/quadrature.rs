//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex-valued
//! integrands on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("quadrature did not converge: estimate {value}, error estimate {error:e}, target {target:e}")]
pub struct NonConvergence {
    pub value: Complex64,
    pub error: f64,
    pub target: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any panel below the initial partition.
    pub max_level: u32,
    pub initial_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_level: 20,
            initial_panels: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    magnitude: f64,
    level: u32,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64, level: u32) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut mag = fc.norm() * WGK[7];
    for i in 0..7 {
        let x = h * XGK[i];
        let (f1, f2) = (f(c - x), f(c + x));
        k += (f1 + f2) * WGK[i];
        mag += (f1.norm() + f2.norm()) * WGK[i];
        if i % 2 == 1 {
            g += (f1 + f2) * WG[i / 2];
        }
    }
    Panel {
        a,
        b,
        value: k * h,
        error: ((k - g) * h).norm(),
        magnitude: mag * h.abs(),
        level,
    }
}

/// Integrates `f` over `[a, b]`, bisecting the panel with the largest error
/// estimate until the total estimate is below
/// `max(rel_tol·|I|, abs_tol, 50·ε·∫|f|)`.
pub fn integrate(mut f: impl FnMut(f64) -> Complex64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, NonConvergence> {
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let m = opts.initial_panels.max(1);
    let mut heap = BinaryHeap::with_capacity(4 * m);
    for k in 0..m {
        let lo = a + (b - a) * k as f64 / m as f64;
        let hi = if k + 1 == m { b } else { a + (b - a) * (k + 1) as f64 / m as f64 };
        heap.push(kronrod(&mut f, lo, hi, 0));
    }
    let mut evaluations = 15 * m;
    loop {
        let (mut value, mut error, mut magnitude) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
        for p in heap.iter() {
            value += p.value;
            error += p.error;
            magnitude += p.magnitude;
        }
        let target = (opts.rel_tol * value.norm()).max(opts.abs_tol).max(50.0 * f64::EPSILON * magnitude);
        if error <= target {
            return Ok(QuadResult { value, error, evaluations });
        }
        let worst = heap.pop().expect("at least one panel");
        if worst.level >= opts.max_level {
            heap.push(worst);
            let value = heap.iter().map(|p| p.value).sum();
            return Err(NonConvergence { value, error, target });
        }
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(kronrod(&mut f, worst.a, mid, worst.level + 1));
        heap.push(kronrod(&mut f, mid, worst.b, worst.level + 1));
        evaluations += 30;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| Complex64::new(x.powi(5) - 2.0 * x * x, x.powi(3)), -1.0, 2.0, &QuadOptions::default()).unwrap();
        let re = (64.0 - 1.0) / 6.0 - 2.0 * (8.0 + 1.0) / 3.0;
        let im = (16.0 - 1.0) / 4.0;
        assert!((r.value - Complex64::new(re, im)).norm() < 1e-13);
    }

    #[test]
    fn oscillatory_gaussian() {
        let opts = QuadOptions {
            rel_tol: 1e-12,
            ..Default::default()
        };
        let r = integrate(|t| Complex64::new(0.0, 7.0 * t).exp() * (-t * t).exp(), -12.0, 12.0, &opts).unwrap();
        let exact = std::f64::consts::PI.sqrt() * (-49.0f64 / 4.0).exp();
        assert!((r.value.re - exact).abs() < 1e-13);
        assert!(r.value.im.abs() < 1e-13);
    }

    #[test]
    fn sharp_peak_is_resolved() {
        let eta = 1e-3;
        let r = integrate(|t| Complex64::new(eta, 0.0) / (eta * eta + t * t), -1.0, 1.0, &QuadOptions::default()).unwrap();
        let exact = 2.0 * (1.0 / eta).atan();
        assert!((r.value.re - exact).abs() < 1e-8);
    }

    #[test]
    fn level_cap_reports_failure() {
        let opts = QuadOptions {
            max_level: 2,
            initial_panels: 1,
            ..Default::default()
        };
        assert!(integrate(|t| Complex64::new((1.0 / (t + 1e-9)).sin(), 0.0), 0.0, 1.0, &opts).is_err());
    }
}
