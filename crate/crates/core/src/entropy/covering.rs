use serde::{Deserialize, Serialize};

use crate::cdf::CellBox;
use crate::characterization::CodeLimits;
use crate::detection::SymbolStream;
use crate::error::{Error, Result};

/// Uniform rectangular grid over `p_s × p_l × V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    pub p_s: (f64, f64),
    pub p_l: (f64, f64),
    pub visibility: (f64, f64),
    pub shape: [usize; 3],
}

impl Covering {
    pub fn new(p_s: (f64, f64), p_l: (f64, f64), visibility: (f64, f64), shape: [usize; 3]) -> Result<Self> {
        let c = Self { p_s, p_l, visibility, shape };
        if shape.contains(&0) {
            return Err(Error::param("grid shape must be positive"));
        }
        CellBox::new(p_s, p_l, visibility)?;
        Ok(c)
    }

    /// The `n × n × 4n` grid.
    pub fn with_resolution(&self, n: usize) -> Result<Self> {
        Self::new(self.p_s, self.p_l, self.visibility, [n, n, 4 * n])
    }

    /// Ranges allowed by the single-arm streams under the widest (`η = 1`,
    /// no hangover) limits; visibility spans `[0, 1]`.
    pub fn from_streams(short: &SymbolStream, long: &SymbolStream, limits: &CodeLimits, n: usize) -> Result<Self> {
        let range = |s: &SymbolStream| -> Result<(f64, f64)> {
            let lim = limits.effective(s.bits(), 1.0, false)?;
            let lo = *s.symbols().iter().min().ok_or_else(|| Error::param("empty stream"))? as usize;
            let hi = *s.symbols().iter().max().unwrap() as usize;
            let a = lim[lo].0.max(0.0);
            let b = lim[hi].1.min(1.0);
            if !(a < b) {
                return Err(Error::param("single-arm stream gives an empty power range"));
            }
            Ok((a, b))
        };
        Self::new(range(short)?, range(long)?, (0.0, 1.0), [n, n, 4 * n])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn edges(range: (f64, f64), n: usize) -> Vec<f64> {
        (0..=n).map(|i| if i == n { range.1 } else { range.0 + (range.1 - range.0) * i as f64 / n as f64 }).collect()
    }

    /// Cells in `p_s`-major, `V`-minor order.
    pub fn cells(&self) -> Vec<CellBox> {
        let es = Self::edges(self.p_s, self.shape[0]);
        let el = Self::edges(self.p_l, self.shape[1]);
        let ev = Self::edges(self.visibility, self.shape[2]);
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                for k in 0..self.shape[2] {
                    out.push(CellBox {
                        p_s: (es[i], es[i + 1]),
                        p_l: (el[j], el[j + 1]),
                        visibility: (ev[k], ev[k + 1]),
                    });
                }
            }
        }
        out
    }

    /// Index of the cell containing a point, if inside the covering.
    pub fn locate(&self, p_s: f64, p_l: f64, v: f64) -> Option<usize> {
        let idx = |x: f64, r: (f64, f64), n: usize| -> Option<usize> {
            if x < r.0 || x > r.1 {
                return None;
            }
            let w = r.1 - r.0;
            if w <= 0.0 {
                return Some(0);
            }
            Some((((x - r.0) / w * n as f64).floor() as usize).min(n - 1))
        };
        let i = idx(p_s, self.p_s, self.shape[0])?;
        let j = idx(p_l, self.p_l, self.shape[1])?;
        let k = idx(v, self.visibility, self.shape[2])?;
        Some((i * self.shape[1] + j) * self.shape[2] + k)
    }
}
