//! Linear constraints tying the cell weights to observed code frequencies.
//!
//! For a code range `[l, h]` with per-code limits `[lo_d, hi_d]`, a symbol in
//! the range implies a power in `[lo_l, hi_h]`, and a power in
//! `(hi_{l−1}, lo_{h+1})` implies a symbol in the range. Averaging the
//! corresponding CDF differences over each cell gives coefficients `U_i ≥
//! L_i` with `Σ s_i U_i ≥ P_lo` and `Σ s_i L_i ≤ P_hi`, where `[P_lo, P_hi]`
//! is a Clopper–Pearson interval around the observed frequency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covering::Covering;
use crate::cdf::{cell_averaged_cdf, CdfKind, CellBox};
use crate::characterization::{CodeLimits, Limits};
use crate::detection::{StreamOrigin, SymbolStream};
use crate::error::{Error, Result};
use crate::numeric::clopper_pearson;

pub const DEFAULT_ALPHA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum RangePolicy {
    Singles,
    /// Every single code plus every aligned block of `2^k` codes below full range.
    #[default]
    SinglesAndDyadic,
    Custom {
        ranges: Vec<(u32, u32)>,
    },
}

impl RangePolicy {
    pub fn ranges(&self, bits: u8) -> Result<Vec<(u32, u32)>> {
        let levels = 1u32 << bits;
        match self {
            Self::Singles => Ok((0..levels).map(|d| (d, d)).collect()),
            Self::SinglesAndDyadic => {
                let mut out = Vec::new();
                for k in 0..bits {
                    let w = 1u32 << k;
                    out.extend((0..levels / w).map(|i| (i * w, i * w + w - 1)));
                }
                Ok(out)
            }
            Self::Custom { ranges } => {
                if let Some(r) = ranges.iter().find(|(l, h)| l > h || *h >= levels) {
                    return Err(Error::param(format!("range {r:?} invalid for {bits} bits")));
                }
                Ok(ranges.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// `Σ s_i c_i ≥ bound`
    Lower,
    /// `Σ s_i c_i ≤ bound`
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub stream: StreamOrigin,
    pub range: (u32, u32),
    pub kind: RowKind,
    pub coeffs: Vec<f64>,
    pub bound: f64,
    pub count: u64,
    pub total: u64,
}

impl ConstraintRow {
    pub fn name(&self) -> String {
        let s = match self.stream {
            StreamOrigin::Interference => "int",
            StreamOrigin::ShortArm => "short",
            StreamOrigin::LongArm => "long",
        };
        let k = match self.kind {
            RowKind::Lower => "lo",
            RowKind::Upper => "hi",
        };
        format!("{s}_{}_{}_{k}", self.range.0, self.range.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rows: Vec<ConstraintRow>,
    pub n_cells: usize,
    pub dropped_trivial: usize,
    pub policy: RangePolicy,
    pub alpha: f64,
}

impl ConstraintSet {
    /// Rows in `≤` form for the solver.
    pub fn lp_rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.rows
            .iter()
            .map(|r| match r.kind {
                RowKind::Upper => (r.coeffs.clone(), r.bound),
                RowKind::Lower => (r.coeffs.iter().map(|c| -c).collect(), -r.bound),
            })
            .unzip()
    }

    /// Whether weights `s` satisfy every row within `tol`.
    pub fn admits(&self, s: &[f64], tol: f64) -> bool {
        let sum: f64 = s.iter().sum();
        if (sum - 1.0).abs() > tol || s.iter().any(|v| *v < -tol) {
            return false;
        }
        self.rows.iter().all(|r| {
            let lhs: f64 = r.coeffs.iter().zip(s).map(|(a, b)| a * b).sum();
            match r.kind {
                RowKind::Lower => lhs >= r.bound - tol,
                RowKind::Upper => lhs <= r.bound + tol,
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintOptions {
    pub policy: RangePolicy,
    pub alpha: f64,
}

impl Default for ConstraintOptions {
    fn default() -> Self {
        Self { policy: RangePolicy::default(), alpha: DEFAULT_ALPHA }
    }
}

/// Per-cell CDF values at every finite limit; `F(−∞) = 0`, `F(∞) = 1`.
struct CdfTable {
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
}

fn tabulate(cells: &[CellBox], limits: &Limits, kind: CdfKind) -> Result<CdfTable> {
    let eval = |cell: &CellBox, p: f64| -> Result<f64> {
        if p == f64::NEG_INFINITY {
            Ok(0.0)
        } else if p == f64::INFINITY {
            Ok(1.0)
        } else {
            cell_averaged_cdf(p, cell, kind)
        }
    };
    let per_cell: Vec<(Vec<f64>, Vec<f64>)> = cells
        .par_iter()
        .map(|cell| {
            let lo = limits.iter().map(|l| eval(cell, l.0)).collect::<Result<Vec<_>>>()?;
            let hi = limits.iter().map(|l| eval(cell, l.1)).collect::<Result<Vec<_>>>()?;
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = per_cell.into_iter().unzip();
    Ok(CdfTable { lo, hi })
}

fn stream_rows(
    origin: StreamOrigin,
    stream: &SymbolStream,
    table: &CdfTable,
    ranges: &[(u32, u32)],
    alpha: f64,
    rows: &mut Vec<ConstraintRow>,
    dropped: &mut usize,
) {
    let hist = stream.histogram();
    let mut prefix = vec![0u64; hist.len() + 1];
    for (i, h) in hist.iter().enumerate() {
        prefix[i + 1] = prefix[i] + h;
    }
    let total = prefix[hist.len()];
    let top = hist.len() as u32 - 1;
    let n_cells = table.lo.len();
    for &(l, h) in ranges {
        let count = prefix[h as usize + 1] - prefix[l as usize];
        let (p_lo, p_hi) = clopper_pearson(count, total, alpha);
        let upper_coeffs: Vec<f64> =
            (0..n_cells).map(|i| (table.hi[i][h as usize] - table.lo[i][l as usize]).clamp(0.0, 1.0)).collect();
        let lower_coeffs: Vec<f64> = (0..n_cells)
            .map(|i| {
                let right = if h == top { 1.0 } else { table.lo[i][h as usize + 1] };
                let left = if l == 0 { 0.0 } else { table.hi[i][l as usize - 1] };
                (right - left).clamp(0.0, 1.0)
            })
            .collect();
        let min_u = upper_coeffs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_u >= p_lo {
            *dropped += 1;
        } else {
            rows.push(ConstraintRow {
                stream: origin,
                range: (l, h),
                kind: RowKind::Lower,
                coeffs: upper_coeffs,
                bound: p_lo,
                count,
                total,
            });
        }
        let max_l = lower_coeffs.iter().cloned().fold(0.0, f64::max);
        if max_l <= p_hi {
            *dropped += 1;
        } else {
            rows.push(ConstraintRow {
                stream: origin,
                range: (l, h),
                kind: RowKind::Upper,
                coeffs: lower_coeffs,
                bound: p_hi,
                count,
                total,
            });
        }
    }
}

/// Builds the constraint set at `bits` bits and error tolerance `eta`.
/// Streams are rebinned from their native depth.
pub fn build_constraints(
    interference: &SymbolStream,
    short: &SymbolStream,
    long: &SymbolStream,
    covering: &Covering,
    limits: &CodeLimits,
    bits: u8,
    eta: f64,
    opts: &ConstraintOptions,
) -> Result<ConstraintSet> {
    if interference.bits() != short.bits() || interference.bits() != long.bits() {
        return Err(Error::BitDepth("streams have inconsistent bit depths".into()));
    }
    if interference.is_empty() || short.is_empty() || long.is_empty() {
        return Err(Error::param("streams must be nonempty"));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::param("alpha must lie in (0, 1)"));
    }
    let ranges = opts.policy.ranges(bits)?;
    let cells = covering.cells();
    let int_limits = limits.effective(bits, eta, true)?;
    let arm_limits = limits.effective(bits, eta, false)?;
    let mut rows = Vec::new();
    let mut dropped = 0;
    let sources = [
        (StreamOrigin::Interference, interference, &int_limits, CdfKind::UniformPhase),
        (StreamOrigin::ShortArm, short, &arm_limits, CdfKind::StepShort),
        (StreamOrigin::LongArm, long, &arm_limits, CdfKind::StepLong),
    ];
    for (origin, stream, lim, kind) in sources {
        let rebinned = stream.rebin(bits)?;
        let table = tabulate(&cells, lim, kind)?;
        stream_rows(origin, &rebinned, &table, &ranges, opts.alpha, &mut rows, &mut dropped);
    }
    Ok(ConstraintSet {
        rows,
        n_cells: cells.len(),
        dropped_trivial: dropped,
        policy: opts.policy.clone(),
        alpha: opts.alpha,
    })
}
