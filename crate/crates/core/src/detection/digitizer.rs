use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{StreamOrigin, SymbolStream};
use crate::error::{Error, Result};

/// Parameters of the built-in synthetic converter: a slow integral
/// nonlinearity bow, period-2 and period-16 structure, and bounded uniform
/// jitter. Amplitudes are in codes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAdcConfig {
    pub bits: u8,
    pub inl_amplitude: f64,
    pub period2_amplitude: f64,
    pub period16_amplitude: f64,
    pub jitter: f64,
    pub cells_per_code: usize,
}

impl Default for SyntheticAdcConfig {
    /// Tuned to an rms code error of about 0.8 codes at 8 bits.
    fn default() -> Self {
        Self {
            bits: 8,
            inl_amplitude: 0.55,
            period2_amplitude: 0.15,
            period16_amplitude: 0.3,
            jitter: 1.05,
            cells_per_code: 32,
        }
    }
}

impl SyntheticAdcConfig {
    pub fn ideal(bits: u8) -> Self {
        Self {
            bits,
            inl_amplitude: 0.0,
            period2_amplitude: 0.0,
            period16_amplitude: 0.0,
            jitter: 0.0,
            cells_per_code: 4,
        }
    }

    /// Deterministic transfer curve in code units.
    pub fn transfer(&self, x: f64) -> f64 {
        let levels = (1u32 << self.bits) as f64;
        let u = 2.0 * x / levels - 1.0;
        let bow = self.inl_amplitude * 2.6 * u * (1.0 - u * u);
        let p2 = self.period2_amplitude * (std::f64::consts::PI * x).cos();
        let modulation = 1.0 + 0.5 * (std::f64::consts::TAU * x / 64.0).cos();
        let p16 = self.period16_amplitude * (std::f64::consts::TAU * x / 16.0).sin() * modulation / 1.5;
        x + bow + p2 + p16
    }
}

/// Per-code observed input ranges plus the injection table that generates
/// input-correlated code errors consistent with them.
///
/// The table splits full scale into `levels · cells_per_code` cells; each
/// cell lists the codes it can produce with cumulative probabilities. The
/// declared range of code `d` is the hull of the cells that list it, so an
/// injected code never falls outside its range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitizerErrorModel {
    bits: u8,
    cells_per_code: usize,
    /// `(code, cumulative probability)` per cell.
    table: Vec<Vec<(u8, f64)>>,
    /// `(v_min, v_max)` per code in full-scale units; end codes are open.
    ranges: Vec<(f64, f64)>,
}

impl DigitizerErrorModel {
    pub fn from_table(bits: u8, cells_per_code: usize, table: Vec<Vec<(u8, f64)>>) -> Result<Self> {
        if !(1..=8).contains(&bits) || cells_per_code == 0 {
            return Err(Error::Model("bad bit depth or cell count".into()));
        }
        let levels = 1usize << bits;
        if table.len() != levels * cells_per_code {
            return Err(Error::Model(format!("table has {} cells, expected {}", table.len(), levels * cells_per_code)));
        }
        let width = 1.0 / (levels * cells_per_code) as f64;
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); levels];
        for (k, cell) in table.iter().enumerate() {
            let mut last = 0.0;
            for &(code, cum) in cell {
                if code as usize >= levels || cum < last || cum > 1.0 + 1e-12 {
                    return Err(Error::Model(format!("malformed table entry in cell {k}")));
                }
                if cum > last {
                    let r = &mut ranges[code as usize];
                    r.0 = r.0.min(k as f64 * width);
                    r.1 = r.1.max((k + 1) as f64 * width);
                }
                last = cum;
            }
        }
        for (d, r) in ranges.iter().enumerate() {
            if r.0 > r.1 {
                return Err(Error::Model(format!("code {d} is never produced")));
            }
        }
        ranges[0].0 = f64::NEG_INFINITY;
        ranges[levels - 1].1 = f64::INFINITY;
        Ok(Self { bits, cells_per_code, table, ranges })
    }

    pub fn synthetic(cfg: &SyntheticAdcConfig) -> Result<Self> {
        let levels = 1usize << cfg.bits;
        let cpc = cfg.cells_per_code.max(1);
        let n = levels * cpc;
        let mut table = Vec::with_capacity(n);
        for k in 0..n {
            let x = (k as f64 + 0.5) / cpc as f64;
            let t = cfg.transfer(x);
            let mut cell = Vec::new();
            if cfg.jitter <= 0.0 {
                let d = (t.floor().max(0.0) as usize).min(levels - 1);
                cell.push((d as u8, 1.0));
            } else {
                let (lo, hi) = (t - cfg.jitter, t + cfg.jitter);
                let mut probs = vec![0.0; levels];
                let first = lo.floor() as i64;
                let last = hi.floor() as i64;
                for d in first..=last {
                    let overlap = (hi.min((d + 1) as f64) - lo.max(d as f64)).max(0.0);
                    let code = d.clamp(0, levels as i64 - 1) as usize;
                    probs[code] += overlap / (2.0 * cfg.jitter);
                }
                let mut cum = 0.0;
                for (d, p) in probs.iter().enumerate() {
                    if *p > 0.0 {
                        cum += p;
                        cell.push((d as u8, cum));
                    }
                }
                if let Some(l) = cell.last_mut() {
                    l.1 = 1.0;
                }
            }
            table.push(cell);
        }
        Self::from_table(cfg.bits, cpc, table)
    }

    pub fn ideal(bits: u8) -> Result<Self> {
        Self::synthetic(&SyntheticAdcConfig::ideal(bits))
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    /// Declared `(v_min, v_max)` per code, full-scale units.
    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    fn cell_of(&self, v: f64) -> usize {
        let n = self.table.len();
        ((v * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    /// Code distribution for an in-range input `v`.
    pub fn code_distribution(&self, v: f64) -> Vec<(u8, f64)> {
        if v < 0.0 {
            return vec![(0, 1.0)];
        }
        if v >= 1.0 {
            return vec![((self.levels() - 1) as u8, 1.0)];
        }
        let mut out = Vec::new();
        let mut last = 0.0;
        for &(d, cum) in &self.table[self.cell_of(v)] {
            if cum > last {
                out.push((d, cum - last));
            }
            last = cum;
        }
        out
    }

    fn sample(&self, v: f64, rng: &mut ChaCha20Rng) -> Result<u8> {
        self.code_with_draw(v, rng.gen())
    }

    /// Code emitted for input `v` when the converter's internal jitter draw
    /// is `u ∈ [0, 1)`; end codes outside full scale.
    pub fn code_with_draw(&self, v: f64, u: f64) -> Result<u8> {
        if v < 0.0 {
            return Ok(0);
        }
        if v >= 1.0 {
            return Ok((self.levels() - 1) as u8);
        }
        let cell = &self.table[self.cell_of(v)];
        if cell.is_empty() {
            return Err(Error::Model(format!("no injection entries for input {v}")));
        }
        Ok(cell.iter().find(|(_, cum)| u < *cum).map(|(d, _)| *d).unwrap_or(cell.last().unwrap().0))
    }

    /// Rms of `d - floor(x)` for inputs `x` uniform over full scale, in codes.
    pub fn rms_code_error(&self) -> f64 {
        let cpc = self.cells_per_code;
        let mut acc = 0.0;
        for (k, cell) in self.table.iter().enumerate() {
            let ideal = (k / cpc) as f64;
            let mut last = 0.0;
            for &(d, cum) in cell {
                acc += (cum - last) * (d as f64 - ideal).powi(2);
                last = cum;
            }
        }
        (acc / self.table.len() as f64).sqrt()
    }

    /// Rms over interior codes of (declared range midpoint − ideal midpoint), in codes.
    pub fn nonlinearity_rms(&self) -> f64 {
        let levels = self.levels();
        let scale = levels as f64;
        let mut acc = 0.0;
        for d in 1..levels - 1 {
            let (lo, hi) = self.ranges[d];
            let mid = 0.5 * (lo + hi) * scale;
            acc += (mid - (d as f64 + 0.5)).powi(2);
        }
        (acc / (levels - 2).max(1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DigitizeMode {
    Ideal,
    InjectedErrors { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitizeOutput {
    pub stream: SymbolStream,
    /// Inputs outside `[0, 1)` that were clipped to an end code.
    pub clipped: u64,
}

/// Converts full-scale analog values to codes.
pub fn digitize(
    values: &[f64],
    model: &DigitizerErrorModel,
    mode: DigitizeMode,
    origin: StreamOrigin,
) -> Result<DigitizeOutput> {
    let levels = model.levels();
    let top = (levels - 1) as u8;
    let mut clipped = 0u64;
    let mut symbols = Vec::with_capacity(values.len());
    let mut rng = match mode {
        DigitizeMode::InjectedErrors { seed } => Some(ChaCha20Rng::seed_from_u64(seed)),
        DigitizeMode::Ideal => None,
    };
    for &v in values {
        if !v.is_finite() {
            return Err(Error::Model("non-finite analog value".into()));
        }
        if v < 0.0 {
            clipped += 1;
            symbols.push(0);
            continue;
        }
        if v >= 1.0 {
            clipped += 1;
            symbols.push(top);
            continue;
        }
        let d = match rng.as_mut() {
            None => ((v * levels as f64).floor() as usize).min(levels - 1) as u8,
            Some(rng) => model.sample(v, rng)?,
        };
        symbols.push(d);
    }
    Ok(DigitizeOutput { stream: SymbolStream::new(model.bits(), origin, symbols)?, clipped })
}
