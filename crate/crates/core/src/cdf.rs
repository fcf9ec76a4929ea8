//! Conditional CDFs of the detected power given the untrusted conditions,
//! and their averages over rectangular cells of condition space.
//!
//! Powers are in full-scale units. All CDFs are right-continuous:
//! `F(p) = P(power ≤ p)`.

use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laser::ConditionVector;
use crate::numeric::{erf, integrate, QuadOptions};

/// Number of image terms `N` so that all `n` with `|2πn| ≤ |φ_c| + π + 8σ` are included.
pub fn wrap_terms(phi_c: f64, sigma_q: f64) -> usize {
    ((phi_c.abs() + PI + 8.0 * sigma_q) / TAU).floor() as usize
}

fn cos_argument(p: f64, x: &ConditionVector) -> Option<f64> {
    let a = x.amplitude();
    if a > 0.0 {
        Some((p - x.p_s - x.p_l) / a)
    } else {
        None
    }
}

/// CDF of the interference power for a Gaussian quantum phase of width
/// `sigma_q`, summing images `n = −wrap..=wrap`.
pub fn cdf_gaussian_phase_terms(p: f64, x: &ConditionVector, sigma_q: f64, wrap: usize) -> f64 {
    let c = match cos_argument(p, x) {
        None => return if p >= x.p_s + x.p_l { 1.0 } else { 0.0 },
        Some(c) => c,
    };
    if c >= 1.0 {
        return 1.0;
    }
    if c <= -1.0 {
        return 0.0;
    }
    let phi_det = c.acos();
    let scale = 1.0 / (sigma_q * SQRT_2);
    let n = wrap as i64;
    let mut s = 0.0;
    for k in -n..=n {
        let off = TAU * k as f64 - x.phi_c;
        s += erf((phi_det + off) * scale) - erf((-phi_det + off) * scale);
    }
    (1.0 - 0.5 * s).clamp(0.0, 1.0)
}

pub fn cdf_gaussian_phase(p: f64, x: &ConditionVector, sigma_q: f64) -> f64 {
    cdf_gaussian_phase_terms(p, x, sigma_q, wrap_terms(x.phi_c, sigma_q))
}

/// Uniform-phase CDF `1 − arccos(clamp(c))/π`, the large-σ limit.
pub fn cdf_uniform_phase(p: f64, x: &ConditionVector) -> f64 {
    match cos_argument(p, x) {
        None => {
            if p >= x.p_s + x.p_l {
                1.0
            } else {
                0.0
            }
        }
        Some(c) => 1.0 - c.clamp(-1.0, 1.0).acos() / PI,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Short,
    Long,
}

/// Step CDF of a single-arm power, with `θ(0) = 1`.
pub fn cdf_single_arm(p: f64, x: &ConditionVector, arm: Arm) -> f64 {
    let at = match arm {
        Arm::Short => x.p_s,
        Arm::Long => x.p_l,
    };
    if p >= at {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CdfKind {
    GaussianPhase { sigma_q: f64, phi_c: f64 },
    UniformPhase,
    StepShort,
    StepLong,
}

/// Rectangular cell `[p_s] × [p_l] × [V]` of condition space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub p_s: (f64, f64),
    pub p_l: (f64, f64),
    pub visibility: (f64, f64),
}

impl CellBox {
    pub fn new(p_s: (f64, f64), p_l: (f64, f64), visibility: (f64, f64)) -> Result<Self> {
        let c = Self { p_s, p_l, visibility };
        c.validate()?;
        Ok(c)
    }

    pub fn point(x: &ConditionVector) -> Self {
        Self { p_s: (x.p_s, x.p_s), p_l: (x.p_l, x.p_l), visibility: (x.visibility, x.visibility) }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [self.p_s, self.p_l, self.visibility];
        if axes.iter().any(|(a, b)| !a.is_finite() || !b.is_finite() || a > b) {
            return Err(Error::param("cell bounds must be finite with lo <= hi"));
        }
        if self.p_s.0 < 0.0 || self.p_l.0 < 0.0 || self.visibility.0 < 0.0 || self.visibility.1 > 1.0 {
            return Err(Error::param("cell lies outside the valid condition space"));
        }
        Ok(())
    }

    /// Smallest and largest interference power attainable in the cell.
    pub fn power_range(&self) -> (f64, f64) {
        let s_lo = self.p_s.0 + self.p_l.0;
        let s_hi = self.p_s.1 + self.p_l.1;
        let q_hi = 2.0 * (self.p_s.1 * self.p_l.1).sqrt();
        // p_s + p_l − 2V√(p_s p_l) ≥ (√p_s − √p_l)² ≥ 0, and is monotone in V
        let lo = (s_lo - self.visibility.1 * q_hi).max(sqrt_gap(self));
        (lo, s_hi + self.visibility.1 * q_hi)
    }
}

fn sqrt_gap(c: &CellBox) -> f64 {
    let (a0, a1) = (c.p_s.0.sqrt(), c.p_s.1.sqrt());
    let (b0, b1) = (c.p_l.0.sqrt(), c.p_l.1.sqrt());
    let gap = if a0 > b1 {
        a0 - b1
    } else if b0 > a1 {
        b0 - a1
    } else {
        0.0
    };
    gap * gap
}

/// `∫_a^b arccos(clamp(u/V, −1, 1)) dV` for `0 ≤ a ≤ b`.
///
/// For `u > 0` the antiderivative on `V > u` is `V·arccos(u/V) − u·acosh(V/u)`,
/// vanishing at `V = u`; the integrand is zero below. Negative `u` follows
/// from `arccos(−z) = π − arccos(z)`.
pub fn arccos_v_integral(u: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if u == 0.0 {
        return 0.5 * PI * (b - a);
    }
    let w = u.abs();
    let anti = |v: f64| {
        if v <= w {
            0.0
        } else {
            v * (w / v).acos() - w * (v / w).acosh()
        }
    };
    let pos = anti(b) - anti(a);
    if u > 0.0 {
        pos
    } else {
        PI * (b - a) - pos
    }
}

/// Uniform-phase CDF averaged over `V ∈ [v0, v1]` at fixed arm powers.
fn uniform_phase_v_average(p: f64, ps: f64, pl: f64, v0: f64, v1: f64) -> f64 {
    let s = ps + pl;
    let q = 2.0 * (ps * pl).sqrt();
    if q <= 0.0 {
        return if p >= s { 1.0 } else { 0.0 };
    }
    let u = (p - s) / q;
    if v1 <= v0 {
        if v0 == 0.0 {
            return if p >= s { 1.0 } else { 0.0 };
        }
        return 1.0 - (u / v0).clamp(-1.0, 1.0).acos() / PI;
    }
    1.0 - arccos_v_integral(u, v0, v1) / (PI * (v1 - v0))
}

fn average_1d<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, opts: QuadOptions) -> Result<f64> {
    if hi <= lo {
        return f(lo);
    }
    let mut err = None;
    let (v, _) = integrate(
        |t| match f(t) {
            Ok(y) => y,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        lo,
        hi,
        opts,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(v / (hi - lo))
}

fn cell_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-11, rel_tol: 1e-8, max_intervals: 4000 }
}

/// `(1/vol) ∫_cell F(p|x) dx`. The V integral of the uniform-phase CDF is
/// closed form; the arm-power integrals use nested adaptive quadrature.
pub fn cell_averaged_cdf(p: f64, cell: &CellBox, kind: CdfKind) -> Result<f64> {
    cell.validate()?;
    match kind {
        CdfKind::StepShort => Ok(step_average(p, cell.p_s)),
        CdfKind::StepLong => Ok(step_average(p, cell.p_l)),
        CdfKind::UniformPhase => {
            let (lo, hi) = cell.power_range();
            if p < lo {
                return Ok(0.0);
            }
            if p >= hi {
                return Ok(1.0);
            }
            let (v0, v1) = cell.visibility;
            average_1d(
                |ps| {
                    average_1d(|pl| Ok(uniform_phase_v_average(p, ps, pl, v0, v1)), cell.p_l.0, cell.p_l.1, cell_opts())
                },
                cell.p_s.0,
                cell.p_s.1,
                cell_opts(),
            )
        }
        CdfKind::GaussianPhase { sigma_q, phi_c } => {
            if !(sigma_q > 0.0) {
                return Err(Error::param("sigma_q must be positive"));
            }
            average_1d(
                |ps| {
                    average_1d(
                        |pl| {
                            average_1d(
                                |v| {
                                    let x = ConditionVector { p_s: ps, p_l: pl, visibility: v, phi_c };
                                    Ok(cdf_gaussian_phase(p, &x, sigma_q))
                                },
                                cell.visibility.0,
                                cell.visibility.1,
                                cell_opts(),
                            )
                        },
                        cell.p_l.0,
                        cell.p_l.1,
                        cell_opts(),
                    )
                },
                cell.p_s.0,
                cell.p_s.1,
                cell_opts(),
            )
        }
    }
}

/// Fraction of a uniform interval `[lo, hi]` lying at or below `p`.
fn step_average(p: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return if p >= lo { 1.0 } else { 0.0 };
    }
    ((p - lo) / (hi - lo)).clamp(0.0, 1.0)
}
