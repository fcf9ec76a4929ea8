//! Shared numerical kernels: error function, adaptive Gauss–Kronrod
//! quadrature, wrapped-normal arc probabilities and binomial confidence
//! intervals.

use std::f64::consts::{PI, SQRT_2, TAU};

use crate::error::{Error, Result};

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

// Kronrod 15-point nodes (non-negative half) with the embedded Gauss 7-point rule.
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
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-8, max_intervals: 2000 }
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Returns the integral estimate and its error estimate. Degenerate
/// intervals integrate to zero.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if intervals.len() >= opts.max_intervals {
            return Err(Error::Quadrature { achieved: err, requested: opts.abs_tol.max(opts.rel_tol * total.abs()) });
        }
        let (idx, _) = intervals.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("nonempty");
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision; accept what we have
            intervals.push((lo, hi, v0, 0.0));
            err -= e0;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        if err < 0.0 {
            err = intervals.iter().map(|i| i.3).sum();
        }
    }
    // re-sum in a fixed order so the result does not depend on the refinement history
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let total = intervals.iter().map(|i| i.2).sum();
    Ok((total, err))
}

/// Wrapped normal distribution on the circle with rms width `sigma`.
///
/// Arc probabilities switch between the image (erf) sum and the Fourier
/// series, whichever converges faster; both are exact representations.
#[derive(Debug, Clone, Copy)]
pub struct WrappedNormal {
    sigma: f64,
    q: f64,
    fourier_terms: usize,
}

const FOURIER_SWITCH: f64 = 1.5;

impl WrappedNormal {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma_q must be positive, got {sigma}")));
        }
        let q = (-0.5 * sigma * sigma).exp();
        let mut k = 1;
        while k < 10_000 && (-((k * k) as f64) * 0.5 * sigma * sigma).exp() / k as f64 > 1e-18 {
            k += 1;
        }
        Ok(Self { sigma, q, fourier_terms: k })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability of the arc `[a, b]` (with `0 <= b - a <= 2π`) when the
    /// phase is centred on `center`.
    pub fn arc_mass(&self, a: f64, b: f64, center: f64) -> f64 {
        let len = b - a;
        if len <= 0.0 {
            return 0.0;
        }
        if len >= TAU {
            return 1.0;
        }
        if self.sigma >= FOURIER_SWITCH {
            self.arc_mass_fourier(a, b, center)
        } else {
            self.arc_mass_images(a, b, center)
        }
    }

    pub(crate) fn arc_mass_fourier(&self, a: f64, b: f64, center: f64) -> f64 {
        let (a, b) = (a - center, b - center);
        let mut s = (b - a) / TAU;
        for k in 1..=self.fourier_terms {
            let kf = k as f64;
            let w = self.q.powf(kf * kf) / kf;
            if w == 0.0 {
                break;
            }
            s += w / PI * ((kf * b).sin() - (kf * a).sin());
        }
        s.clamp(0.0, 1.0)
    }

    pub(crate) fn arc_mass_images(&self, a: f64, b: f64, center: f64) -> f64 {
        let mut a = a - center;
        let mut b = b - center;
        let mid = 0.5 * (a + b);
        let shift = (mid / TAU).round() * TAU;
        a -= shift;
        b -= shift;
        let half = 0.5 * (b - a);
        let reach = PI + half + 8.5 * self.sigma;
        let n_max = (reach / TAU).ceil() as i64;
        let scale = 1.0 / (self.sigma * SQRT_2);
        let mut s = 0.0;
        for n in -n_max..=n_max {
            let off = TAU * n as f64;
            s += 0.5 * (erf((b + off) * scale) - erf((a + off) * scale));
        }
        s.clamp(0.0, 1.0)
    }

    /// Maximum of the density, attained at the centre.
    pub fn density_max(&self) -> f64 {
        if self.sigma >= FOURIER_SWITCH {
            let mut s = 1.0;
            for k in 1..=self.fourier_terms {
                let kf = k as f64;
                s += 2.0 * self.q.powf(kf * kf);
            }
            s / TAU
        } else {
            let norm = 1.0 / (self.sigma * (TAU).sqrt());
            let n_max = ((8.5 * self.sigma) / TAU).ceil() as i64 + 1;
            (-n_max..=n_max)
                .map(|n| {
                    let x = TAU * n as f64 / self.sigma;
                    norm * (-0.5 * x * x).exp()
                })
                .sum()
        }
    }

    /// Upper bound on `|g'(φ)|` for the wrapped density `g`, from the
    /// Fourier series `g'(φ) = -(1/π) Σ k q^{k²} sin kφ`.
    pub fn density_slope_bound(&self) -> f64 {
        let mut s = 0.0;
        let mut k = 1usize;
        loop {
            let kf = k as f64;
            let t = kf * self.q.powf(kf * kf);
            s += t;
            // the terms are eventually decreasing; stop once negligible
            if (kf * self.sigma * self.sigma > 1.0 && t < 1e-18) || k > 1_000_000 {
                break;
            }
            k += 1;
        }
        // geometric remainder bound for the discarded tail
        s * (1.0 + 1e-12) / PI + 1e-15
    }
}

/// Regularized incomplete beta function `I_x(a, b)`.
fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    statrs::function::beta::beta_reg(a, b, x)
}

fn inverse_beta(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Clopper–Pearson interval for `k` successes out of `n` at
/// confidence `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        // round outward so the interval never shrinks below the exact one
        (inverse_beta(alpha / 2.0, kf, nf - kf + 1.0) - 1e-15).max(0.0)
    };
    let upper = if k == n { 1.0 } else { (inverse_beta(1.0 - alpha / 2.0, kf + 1.0, nf - kf) + 1e-15).min(1.0) };
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gk_integrates_polynomials_and_kinks() {
        let (v, _) = integrate(|x| x * x, 0.0, 3.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(v, 9.0, epsilon = 1e-12);
        let tight = QuadOptions { rel_tol: 1e-13, ..QuadOptions::default() };
        let (v, _) = integrate(|x: f64| x.abs(), -1.0, 2.0, tight).unwrap();
        assert_abs_diff_eq!(v, 2.5, epsilon = 1e-10);
        let (v, _) = integrate(|x: f64| x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn quadrature_reports_nonconvergence() {
        let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 0.0, max_intervals: 4 };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn arc_mass_representations_agree() {
        for &sigma in &[0.3, 1.0, 1.5, 2.0, 4.0] {
            let w = WrappedNormal::new(sigma).unwrap();
            for &(a, b, c) in &[(0.1, 1.3, 0.0), (-2.0, 2.5, 1.0), (3.0, 6.0, -2.0), (0.0, 0.01, 0.3)] {
                let f = w.arc_mass_fourier(a, b, c);
                let g = w.arc_mass_images(a, b, c);
                assert_abs_diff_eq!(f, g, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn arc_mass_of_full_circle_and_half() {
        let w = WrappedNormal::new(0.7).unwrap();
        assert_abs_diff_eq!(w.arc_mass(-PI, PI - 1e-15, 0.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.arc_mass(0.0, PI, 0.0), 0.5, epsilon = 1e-12);
        let w = WrappedNormal::new(20.0).unwrap();
        assert_abs_diff_eq!(w.arc_mass(0.0, 1.0, 0.4), 1.0 / TAU, epsilon = 1e-12);
    }

    #[test]
    fn density_bounds_are_valid() {
        for &sigma in &[0.2, 0.8, 1.6, 3.0] {
            let w = WrappedNormal::new(sigma).unwrap();
            let gmax = w.density_max();
            let slope = w.density_slope_bound();
            let h = 1e-4;
            let mut prev = w.arc_mass(-PI, -PI + h, 0.0) / h;
            for i in 1..(TAU / h) as usize {
                let x = -PI + i as f64 * h;
                let d = w.arc_mass(x, x + h, 0.0) / h;
                assert!(d <= gmax * (1.0 + 1e-6), "density {d} above bound {gmax}");
                assert!(((d - prev) / h).abs() <= slope * 1.01 + 1e-6);
                prev = d;
            }
        }
    }

    #[test]
    fn clopper_pearson_brackets_estimate() {
        let (lo, hi) = clopper_pearson(50, 100, 0.05);
        // reference values for the exact 95% interval
        assert_abs_diff_eq!(lo, 0.398_321_2, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.601_678_8, epsilon = 1e-6);
        let (lo, hi) = clopper_pearson(3, 1000, 1e-6);
        assert_abs_diff_eq!(lo, 1.448_915_1e-5, epsilon = 1e-11);
        assert_abs_diff_eq!(hi, 0.021_937_563, epsilon = 1e-8);
        assert_eq!(clopper_pearson(0, 10, 0.05).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.05).1, 1.0);
    }
}
