//! Worst-case code probability over a cell and over the classical phase.
//!
//! For a code with input limits `[a, b]` the event `a ≤ S + A cos φ ≤ b`
//! (`S = p_s + p_l`, `A = 2V√(p_s p_l)`) is contained, for every condition in
//! the cell, in `θ_lo ≤ |φ| ≤ θ_hi` where the angles come from interval
//! bounds on `(a − S)/A` and `(b − S)/A`. The wrapped-normal mass of that
//! symmetric arc pair is maximized over the classical phase by branch and
//! bound, which returns a rigorous upper bound.

use std::f64::consts::PI;

use crate::cdf::CellBox;
use crate::characterization::{CodeLimits, Limits};
use crate::error::Result;
use crate::numeric::WrappedNormal;

const GRID: usize = 256;
const TOLERANCE: f64 = 1e-9;

fn ratio_range(n0: f64, n1: f64, a0: f64, a1: f64) -> (f64, f64) {
    let lo = if n0 >= 0.0 {
        n0 / a1
    } else if a0 > 0.0 {
        n0 / a0
    } else {
        f64::NEG_INFINITY
    };
    let hi = if n1 <= 0.0 {
        n1 / a1
    } else if a0 > 0.0 {
        n1 / a0
    } else {
        f64::INFINITY
    };
    (lo, hi)
}

/// Angular band `[θ_lo, θ_hi]` containing every phase that can produce a
/// power in `[a, b]` somewhere in the cell; `None` if empty.
pub fn phase_band(cell: &CellBox, a: f64, b: f64) -> Option<(f64, f64)> {
    let s_lo = cell.p_s.0 + cell.p_l.0;
    let s_hi = cell.p_s.1 + cell.p_l.1;
    let a0 = cell.visibility.0 * 2.0 * (cell.p_s.0 * cell.p_l.0).sqrt();
    let a1 = cell.visibility.1 * 2.0 * (cell.p_s.1 * cell.p_l.1).sqrt();
    if a1 <= 0.0 {
        // deterministic power S
        return if b >= s_lo && a <= s_hi { Some((0.0, PI)) } else { None };
    }
    let (ca_min, _) = ratio_range(a - s_hi, a - s_lo, a0, a1);
    let (_, cb_max) = ratio_range(b - s_hi, b - s_lo, a0, a1);
    let lo = cb_max.clamp(-1.0, 1.0).acos();
    let hi = ca_min.clamp(-1.0, 1.0).acos();
    if lo >= hi {
        return None;
    }
    Some((lo, hi))
}

fn band_mass(wn: &WrappedNormal, lo: f64, hi: f64, center: f64) -> f64 {
    if lo <= 0.0 {
        wn.arc_mass(-hi, hi, center)
    } else {
        (wn.arc_mass(lo, hi, center) + wn.arc_mass(-hi, -lo, center)).min(1.0)
    }
}

/// Rigorous upper bound on `max_{φ_c} mass(φ_c)` for the band, never below
/// the best evaluated value.
pub fn max_band_mass(wn: &WrappedNormal, lo: f64, hi: f64, floor: f64) -> f64 {
    if lo <= 0.0 && hi >= PI {
        return 1.0;
    }
    let m2 = 4.0 * wn.density_slope_bound();
    let f = |c: f64| band_mass(wn, lo, hi, c);
    let h0 = PI / GRID as f64;
    let xs: Vec<f64> = (0..=GRID).map(|i| if i == GRID { PI } else { i as f64 * h0 }).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = fs.iter().cloned().fold(floor, f64::max);
    let mut stack: Vec<(f64, f64, f64, f64)> = (0..GRID).map(|i| (xs[i], xs[i + 1], fs[i], fs[i + 1])).collect();
    let mut bound = best;
    while let Some((x0, x1, f0, f1)) = stack.pop() {
        let h = x1 - x0;
        let ub = f0.max(f1) + m2 * h * h / 8.0;
        if ub <= best + TOLERANCE {
            bound = bound.max(ub);
            continue;
        }
        let xm = 0.5 * (x0 + x1);
        if xm <= x0 || xm >= x1 {
            bound = bound.max(ub);
            continue;
        }
        let fm = f(xm);
        best = best.max(fm);
        stack.push((x0, xm, f0, fm));
        stack.push((xm, x1, fm, f1));
    }
    bound.max(best).min(1.0)
}

/// Objective coefficient for one cell given effective per-code limits.
pub fn cell_predictability(cell: &CellBox, wn: &WrappedNormal, limits: &Limits) -> f64 {
    let g_max = wn.density_max();
    let mut bands: Vec<(f64, f64, f64)> = limits
        .iter()
        .filter_map(|&(a, b)| phase_band(cell, a, b))
        .map(|(lo, hi)| {
            let len = if lo <= 0.0 { 2.0 * hi } else { 2.0 * (hi - lo) };
            ((len * g_max).min(1.0), lo, hi)
        })
        .collect();
    bands.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut best: f64 = 0.0;
    for (ub, lo, hi) in bands {
        if ub <= best {
            break;
        }
        best = best.max(max_band_mass(wn, lo, hi, 0.0).min(ub));
        if best >= 1.0 {
            break;
        }
    }
    best.clamp(f64::MIN_POSITIVE, 1.0)
}

/// `max_{x ∈ cell} max_d max_{φ_c} P(d | x)` for the interference stream at
/// `bits` bits with `eta`-scaled hangover-augmented limits.
pub fn worst_case_predictability(cell: &CellBox, sigma_q: f64, limits: &CodeLimits, bits: u8, eta: f64) -> Result<f64> {
    cell.validate()?;
    let wn = WrappedNormal::new(sigma_q)?;
    let lim = limits.effective(bits, eta, true)?;
    Ok(cell_predictability(cell, &wn, &lim))
}
