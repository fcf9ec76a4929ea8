//! Detector/amplifier/digitizer chain: causal impulse-response convolution,
//! electronic noise, and an input-correlated digitizer error model.

mod digitizer;

pub use digitizer::{digitize, DigitizeMode, DigitizeOutput, DigitizerErrorModel, SyntheticAdcConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Causal sampled impulse response `G_j`, `j >= 0`, with a dominant main tap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::param("impulse response needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("impulse response taps must be finite"));
        }
        let g0 = taps[0].abs();
        if taps.iter().skip(1).any(|t| t.abs() >= g0) {
            return Err(Error::param("main tap G_0 must dominate every later tap"));
        }
        Ok(Self { taps })
    }

    pub fn delta() -> Self {
        Self { taps: vec![1.0] }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Taps divided by the main tap, so that `G_0 = 1`.
    pub fn normalized(&self) -> Self {
        let g0 = self.taps[0];
        Self { taps: self.taps.iter().map(|t| t / g0).collect() }
    }

    /// Forward autocorrelation `Σ_j G_j G_{j+Δ}` for `Δ = 0..=max_lag`.
    pub fn autocorrelation(&self, max_lag: usize) -> Vec<f64> {
        (0..=max_lag).map(|d| self.taps.iter().zip(self.taps.iter().skip(d)).map(|(a, b)| a * b).sum()).collect()
    }
}

/// `V_i = Σ_j G_j p_{i-j} + noise_i`, with samples before the start taken as 0.
pub fn convolve_train(powers: &[f64], g: &ImpulseResponse, electronic_noise_rms: f64, seed: u64) -> Result<Vec<f64>> {
    if powers.is_empty() {
        return Err(Error::param("empty power sequence"));
    }
    if !(electronic_noise_rms >= 0.0) {
        return Err(Error::param("noise rms must be nonnegative"));
    }
    let taps = g.taps();
    let mut out = Vec::with_capacity(powers.len());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in 0..powers.len() {
        let mut v = 0.0;
        for (j, gj) in taps.iter().enumerate().take(i + 1) {
            v += gj * powers[i - j];
        }
        if electronic_noise_rms > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            v += electronic_noise_rms * z;
        }
        out.push(v);
    }
    Ok(out)
}

/// Which interferometer configuration produced a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrigin {
    Interference = 0,
    ShortArm = 1,
    LongArm = 2,
}

impl StreamOrigin {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Interference),
            1 => Some(Self::ShortArm),
            2 => Some(Self::LongArm),
            _ => None,
        }
    }
}

/// Ordered digitizer output codes with their bit depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    bits: u8,
    origin: StreamOrigin,
    symbols: Vec<u8>,
}

impl SymbolStream {
    pub fn new(bits: u8, origin: StreamOrigin, symbols: Vec<u8>) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::param(format!("bit depth {bits} outside 1..=8")));
        }
        let limit = 1u16 << bits;
        if let Some(bad) = symbols.iter().find(|&&s| s as u16 >= limit) {
            return Err(Error::param(format!("symbol {bad} out of range for {bits} bits")));
        }
        Ok(Self { bits, origin, symbols })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn origin(&self) -> StreamOrigin {
        self.origin
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    /// Per-code counts.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.levels()];
        for &s in &self.symbols {
            h[s as usize] += 1;
        }
        h
    }

    /// Drops low-order bits, splitting full scale into `2^bits` equal bins.
    pub fn rebin(&self, bits: u8) -> Result<Self> {
        if bits > self.bits || bits == 0 {
            return Err(Error::BitDepth(format!("cannot rebin {}-bit stream to {bits} bits", self.bits)));
        }
        let shift = self.bits - bits;
        Ok(Self { bits, origin: self.origin, symbols: self.symbols.iter().map(|s| s >> shift).collect() })
    }

    /// Symbols as full-scale values at the code centres.
    pub fn to_full_scale(&self) -> Vec<f64> {
        let scale = 1.0 / self.levels() as f64;
        self.symbols.iter().map(|&s| (s as f64 + 0.5) * scale).collect()
    }
}
