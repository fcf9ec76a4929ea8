//! Worst-case ingredients recovered from measured data: per-code digitizer
//! limits, the detection-chain impulse response, and hangover bounds.
//!
//! All powers and limits are stored in full-scale units; calibration files
//! carry reference values in code units and are converted on entry.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{DigitizerErrorModel, ImpulseResponse, SymbolStream};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_SAMPLES: u64 = 1 << 14;

/// Lower/upper input limit per code, full-scale units.
pub type Limits = Vec<(f64, f64)>;

/// Ideal bin edges for `bits`, with open end bins.
pub fn ideal_limits(bits: u8) -> Limits {
    let levels = 1usize << bits;
    let w = 1.0 / levels as f64;
    (0..levels)
        .map(|d| {
            let lo = if d == 0 { f64::NEG_INFINITY } else { d as f64 * w };
            let hi = if d == levels - 1 { f64::INFINITY } else { (d + 1) as f64 * w };
            (lo, hi)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HangoverBounds {
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub confidence_note: String,
}

impl HangoverBounds {
    pub fn zero() -> Self {
        Self { zeta_minus: 0.0, zeta_plus: 0.0, confidence_note: "no detector memory".into() }
    }
}

/// Observed per-code limits from a calibration run.
///
/// `dig` holds the observed extremes for every code, end codes included;
/// the end bins are treated as unbounded whenever limits are derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeLimits {
    pub bits: u8,
    pub dig: Vec<(f64, f64)>,
    pub samples_per_code: Vec<u64>,
    pub min_samples: u64,
    pub hangover: HangoverBounds,
}

impl CodeLimits {
    /// Limits of a perfect digitizer.
    pub fn ideal(bits: u8) -> Self {
        let levels = 1usize << bits;
        let w = 1.0 / levels as f64;
        Self {
            bits,
            dig: (0..levels).map(|d| (d as f64 * w, (d + 1) as f64 * w)).collect(),
            samples_per_code: vec![0; levels],
            min_samples: 0,
            hangover: HangoverBounds::zero(),
        }
    }

    /// Structural checks for limits read from outside.
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.bits) {
            return Err(Error::BitDepth(format!("{} bits outside 1..=8", self.bits)));
        }
        let levels = 1usize << self.bits;
        if self.dig.len() != levels || self.samples_per_code.len() != levels {
            return Err(Error::param(format!("expected {levels} code entries")));
        }
        if self.dig.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::param("code limits must be finite with lower ≤ upper"));
        }
        let h = &self.hangover;
        if !(h.zeta_minus.is_finite() && h.zeta_plus.is_finite() && h.zeta_minus <= h.zeta_plus) {
            return Err(Error::param("hangover bounds must be finite with ζ− ≤ ζ+"));
        }
        Ok(())
    }

    pub fn with_hangover(mut self, h: HangoverBounds) -> Self {
        self.hangover = h;
        self
    }

    /// Probability that a single limit misses the true support, `1/min_samples`.
    pub fn coverage_confidence(&self) -> f64 {
        if self.min_samples == 0 {
            1.0
        } else {
            1.0 - 1.0 / self.min_samples as f64
        }
    }

    /// Measured limits with open end bins.
    pub fn dig_limits(&self) -> Limits {
        let mut out = self.dig.clone();
        let last = out.len() - 1;
        out[0].0 = f64::NEG_INFINITY;
        out[last].1 = f64::INFINITY;
        out
    }

    /// Hangover-augmented limits. A sample reads `V = p + V_prev` with
    /// `V_prev ∈ [ζ−, ζ+]`, so code `d` implies `p ∈ [dig− − ζ+, dig+ − ζ−]`.
    pub fn dh_limits(&self) -> Limits {
        let (zm, zp) = (self.hangover.zeta_minus, self.hangover.zeta_plus);
        self.dig_limits().into_iter().map(|(lo, hi)| (lo - zp, hi - zm)).collect()
    }

    /// Limits for `bits`-bit symbols obtained by dropping low-order bits,
    /// scaled by the error tolerance `eta` between the ideal bins (`eta = 0`)
    /// and the measured (hangover-augmented if `with_hangover`) limits.
    ///
    /// Each measured range is first widened to contain its ideal bin, so the
    /// result grows monotonically with `eta`.
    pub fn effective(&self, bits: u8, eta: f64, with_hangover: bool) -> Result<Limits> {
        self.validate()?;
        if bits == 0 || bits > self.bits {
            return Err(Error::BitDepth(format!("limits calibrated at {} bits cannot serve {bits} bits", self.bits)));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::param(format!("eta must lie in [0, 1], got {eta}")));
        }
        let fine = if with_hangover { self.dh_limits() } else { self.dig_limits() };
        let shift = self.bits - bits;
        let ideal = ideal_limits(bits);
        let mut merged = vec![(f64::INFINITY, f64::NEG_INFINITY); ideal.len()];
        for (d, &(lo, hi)) in fine.iter().enumerate() {
            let m = &mut merged[d >> shift];
            m.0 = m.0.min(lo);
            m.1 = m.1.max(hi);
        }
        Ok(merged
            .into_iter()
            .zip(ideal)
            .map(|((lo, hi), (ilo, ihi))| {
                let (lo, hi) = (lo.min(ilo), hi.max(ihi));
                (scale(eta, lo, ilo), scale(eta, hi, ihi))
            })
            .collect())
    }
}

fn scale(eta: f64, measured: f64, ideal: f64) -> f64 {
    if ideal.is_infinite() {
        ideal
    } else {
        ideal + eta * (measured - ideal)
    }
}

/// Per-code min/max of calibration references (code units) at `bits` bits.
pub fn characterize_digitizer(calibration: &[(f64, u32)], bits: u8, min_samples: u64) -> Result<CodeLimits> {
    if !(1..=8).contains(&bits) {
        return Err(Error::BitDepth(format!("{bits} bits outside 1..=8")));
    }
    let levels = 1usize << bits;
    let scale = 1.0 / levels as f64;
    let mut dig = vec![(f64::INFINITY, f64::NEG_INFINITY); levels];
    let mut counts = vec![0u64; levels];
    for &(r, d) in calibration {
        if !r.is_finite() {
            return Err(Error::param("non-finite calibration reference"));
        }
        let d = d as usize;
        if d >= levels {
            return Err(Error::param(format!("calibration code {d} out of range for {bits} bits")));
        }
        let v = r * scale;
        dig[d].0 = dig[d].0.min(v);
        dig[d].1 = dig[d].1.max(v);
        counts[d] += 1;
    }
    let missing: Vec<u32> =
        counts.iter().enumerate().filter(|(_, &c)| c < min_samples.max(1)).map(|(d, _)| d as u32).collect();
    if !missing.is_empty() {
        return Err(Error::MissingCodes { missing });
    }
    Ok(CodeLimits { bits, dig, samples_per_code: counts, min_samples, hangover: HangoverBounds::zero() })
}

/// Stratified calibration sweep through `model`: references cover full scale
/// uniformly with `samples_per_code` draws per ideal bin, plus additive
/// Gaussian reference noise of `noise_rms` codes. Returns `(reference, code)`
/// pairs in code units.
pub fn simulate_calibration(
    model: &DigitizerErrorModel,
    samples_per_code: u64,
    noise_rms: f64,
    seed: u64,
) -> Result<Vec<(f64, u32)>> {
    use rand_distr::{Distribution, StandardNormal};
    let levels = model.levels();
    let n = levels as u64 * samples_per_code;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n as usize);
    for k in 0..n {
        let r = (k as f64 + rng.gen::<f64>()) / samples_per_code as f64;
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = (r + noise_rms * z) / levels as f64;
        let dist = model.code_distribution(v);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut code = dist.last().map(|x| x.0).unwrap_or(0);
        for &(d, p) in &dist {
            acc += p;
            if u < acc {
                code = d;
                break;
            }
        }
        out.push((r, code as u32));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationProfile {
    /// `ac[Δ] = cov(V_i, V_{i+Δ})` for `Δ = 0..=max_lag`.
    pub ac: Vec<f64>,
    pub count: usize,
    /// `ac_0 / sqrt(count)`.
    pub uncertainty: f64,
}

impl AutocorrelationProfile {
    /// Profile from exact values, e.g. forward-computed from known taps.
    pub fn exact(ac: Vec<f64>) -> Self {
        Self { ac, count: usize::MAX, uncertainty: 0.0 }
    }

    /// Largest lag whose value exceeds three times the sampling uncertainty.
    pub fn significant_lag(&self) -> usize {
        (1..self.ac.len()).rev().find(|&d| self.ac[d].abs() > 3.0 * self.uncertainty).unwrap_or(0)
    }

    pub fn truncated(&self, max_lag: usize) -> Self {
        Self { ac: self.ac[..=max_lag.min(self.ac.len() - 1)].to_vec(), ..self.clone() }
    }
}

/// Unbiased autocovariance of `values` at lags `0..=max_lag`.
pub fn compute_autocorrelation(values: &[f64], max_lag: usize) -> Result<AutocorrelationProfile> {
    let n = values.len();
    let required = (100 * max_lag).max(2);
    if n < required {
        return Err(Error::StreamTooShort { len: n, required });
    }
    if values.iter().all(|v| *v == values[0]) {
        return Err(Error::Degenerate("constant input has zero variance".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let ac: Vec<f64> = (0..=max_lag)
        .into_par_iter()
        .map(|d| {
            let s: f64 = centred[..n - d].iter().zip(&centred[d..]).map(|(a, b)| a * b).sum();
            s / (n - d) as f64
        })
        .collect();
    if !(ac[0] > 0.0) {
        return Err(Error::Degenerate("constant input has zero variance".into()));
    }
    Ok(AutocorrelationProfile { uncertainty: ac[0] / (n as f64).sqrt(), ac, count: n })
}

pub fn stream_autocorrelation(stream: &SymbolStream, max_lag: usize) -> Result<AutocorrelationProfile> {
    compute_autocorrelation(&stream.to_full_scale(), max_lag)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseRecovery {
    pub response: ImpulseResponse,
    /// `Σ_Δ (Σ_j G_j G_{j+Δ} − ac_Δ)²` after each order, starting at order 0.
    pub residuals: Vec<f64>,
    pub order: usize,
}

impl ImpulseRecovery {
    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least order 0")
    }

    /// `Σ_{j≥1} |G_j| / |G_0|`; the recovered factor is the unique causal
    /// minimum-phase one only when this is below 1.
    pub fn dominance_ratio(&self) -> f64 {
        let t = self.response.taps();
        t[1..].iter().map(|g| g.abs()).sum::<f64>() / t[0].abs()
    }
}

pub const DEFAULT_RECOVERY_ORDER: usize = 8;

fn reconstruction_residual(g: &[f64], ac: &[f64]) -> f64 {
    ac.iter()
        .enumerate()
        .map(|(d, a)| {
            let s: f64 = g.iter().zip(g.iter().skip(d)).map(|(x, y)| x * y).sum();
            (s - a).powi(2)
        })
        .sum()
}

/// Solves `Σ_j G_j G_{j+Δ} = ac_Δ` for causal taps perturbatively around
/// `G = sqrt(ac_0) δ`.
///
/// Each order solves the diagonal linear system in the lagged taps with the
/// cross terms of the previous iterate, then renormalizes the main tap; the
/// iterate after `n` orders agrees with the power series in the lagged
/// covariances through order `n`. Iterates to `order` or until the residual
/// changes by less than `1e-12` relative.
pub fn recover_impulse_response(ac: &AutocorrelationProfile, order: usize) -> Result<ImpulseRecovery> {
    let a = &ac.ac;
    if a.is_empty() || !(a[0] > 0.0) {
        return Err(Error::Degenerate("ac_0 must be positive".into()));
    }
    let half = a[0] / 2.0;
    let realizable = a.iter().skip(1).all(|x| x.abs() <= a[0]);
    if realizable {
        if let Some((lag, &value)) = a.iter().enumerate().skip(1).find(|(_, x)| x.abs() >= half) {
            return Err(Error::NonPerturbative { lag, value, half });
        }
    }
    let len = a.len();
    let mut g = vec![0.0; len];
    g[0] = a[0].sqrt();
    let mut residuals = vec![reconstruction_residual(&g, a)];
    let mut valid = true;
    for _ in 0..order {
        let mut next = vec![0.0; len];
        for d in 1..len {
            let cross: f64 = (1..len - d).map(|j| g[j] * g[j + d]).sum();
            next[d] = (a[d] - cross) / g[0];
        }
        let tail: f64 = next[1..].iter().map(|x| x * x).sum();
        if !(tail < a[0]) {
            valid = false;
            g = next;
            residuals.push(f64::INFINITY);
            break;
        }
        next[0] = (a[0] - tail).sqrt();
        g = next;
        let r = reconstruction_residual(&g, a);
        let prev = *residuals.last().unwrap();
        residuals.push(r);
        if r == 0.0 || (prev - r).abs() <= 1e-12 * prev {
            break;
        }
    }
    let used = residuals.len() - 1;
    let r = *residuals.last().unwrap();
    if !valid || !realizable || !r.is_finite() || !g.iter().all(|t| t.is_finite()) {
        return Err(Error::NonConvergent { residual: r, order: used });
    }
    let response = ImpulseResponse::new(g).map_err(|_| Error::NonConvergent { residual: r, order: used })?;
    Ok(ImpulseRecovery { response, residuals, order: used })
}

fn hangover_from_bounds(lo: &[f64], hi: &[f64], g: &ImpulseResponse, note: String) -> HangoverBounds {
    let taps = g.normalized();
    let taps = taps.taps();
    let start = (taps.len() - 1).min(lo.len() - 1);
    let mut zm = f64::INFINITY;
    let mut zp = f64::NEG_INFINITY;
    for i in start..lo.len() {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, &gj) in taps.iter().enumerate().skip(1).take(i) {
            if gj >= 0.0 {
                a += gj * lo[i - j];
                b += gj * hi[i - j];
            } else {
                a += gj * hi[i - j];
                b += gj * lo[i - j];
            }
        }
        zm = zm.min(a);
        zp = zp.max(b);
    }
    HangoverBounds { zeta_minus: zm, zeta_plus: zp, confidence_note: note }
}

/// `ζ± = max/min_i Σ_{j≥1} G_j p_{i−j}` with taps normalized to `G_0 = 1`,
/// over indices with a complete history.
pub fn compute_hangover_bounds(powers: &[f64], g: &ImpulseResponse) -> Result<HangoverBounds> {
    if powers.is_empty() {
        return Err(Error::param("empty power sequence"));
    }
    Ok(hangover_from_bounds(powers, powers, g, format!("extremes over {} analog samples", powers.len())))
}

/// Hangover bounds from symbols: each past power is taken at the end of its
/// code interval that extremizes the sum.
pub fn compute_hangover_bounds_symbols(stream: &SymbolStream, g: &ImpulseResponse) -> Result<HangoverBounds> {
    if stream.is_empty() {
        return Err(Error::param("empty symbol stream"));
    }
    let w = 1.0 / stream.levels() as f64;
    let lo: Vec<f64> = stream.symbols().iter().map(|&d| d as f64 * w).collect();
    let hi: Vec<f64> = stream.symbols().iter().map(|&d| (d as f64 + 1.0) * w).collect();
    Ok(hangover_from_bounds(&lo, &hi, g, format!("extremes over {} symbols, code-interval endpoints", stream.len())))
}

/// Calibration plus interference stream to hangover-augmented limits:
/// digitizer limits, autocorrelation, impulse-response recovery at `order`,
/// then hangover bounds from the stream's symbols.
pub fn characterize_chain(
    calibration: &[(f64, u32)],
    interference: &SymbolStream,
    min_samples: u64,
    order: usize,
) -> Result<(CodeLimits, ImpulseRecovery)> {
    let ac = stream_autocorrelation(interference, order)?;
    let recovery = recover_impulse_response(&ac, order)?;
    let hangover = compute_hangover_bounds_symbols(interference, &recovery.response)?;
    let limits = characterize_digitizer(calibration, interference.bits(), min_samples)?.with_hangover(hangover);
    Ok((limits, recovery))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{convolve_train, StreamOrigin, SyntheticAdcConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn direct_min_max() {
        let mut cal: Vec<(f64, u32)> = (0..8).map(|d| (d as f64 + 0.5, d)).collect();
        cal.extend([(4.6, 5), (6.29, 5), (5.5, 5)]);
        let lim = characterize_digitizer(&cal, 3, 1).unwrap();
        assert_abs_diff_eq!(lim.dig[5].0 * 8.0, 4.6, epsilon = 1e-12);
        assert_abs_diff_eq!(lim.dig[5].1 * 8.0, 6.29, epsilon = 1e-12);
        assert_eq!(lim.samples_per_code[5], 4);
    }

    #[test]
    fn missing_codes_are_listed() {
        let cal = vec![(0.5, 0), (2.5, 2)];
        match characterize_digitizer(&cal, 2, 1) {
            Err(Error::MissingCodes { missing }) => assert_eq!(missing, vec![1, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perfect_calibration_matches_ideal_bins() {
        let per = 1u64 << 10;
        let cal: Vec<(f64, u32)> = (0..64 * per)
            .map(|k| {
                let r = k as f64 / per as f64;
                (r, r.floor() as u32)
            })
            .collect();
        let lim = characterize_digitizer(&cal, 6, per).unwrap();
        for d in 1..63 {
            assert_abs_diff_eq!(lim.dig[d].0, d as f64 / 64.0, epsilon = 1e-12);
            assert_abs_diff_eq!(lim.dig[d].1, (d + 1) as f64 / 64.0, epsilon = 1.0 / (64.0 * per as f64));
        }
    }

    #[test]
    fn synthetic_model_round_trip() {
        let model = DigitizerErrorModel::synthetic(&SyntheticAdcConfig::default()).unwrap();
        let cal = simulate_calibration(&model, DEFAULT_MIN_SAMPLES, 0.0, 7).unwrap();
        let lim = characterize_digitizer(&cal, 8, DEFAULT_MIN_SAMPLES / 2).unwrap();
        let declared = model.ranges();
        let mut acc = 0.0;
        for d in 0..256 {
            let (lo, hi) = lim.dig[d];
            assert!(lo >= declared[d].0 && hi <= declared[d].1, "code {d}");
            if d > 0 && d < 255 {
                acc += ((lo + hi) * 128.0 - (d as f64 + 0.5)).powi(2);
            }
        }
        let rms = (acc / 254.0).sqrt();
        let configured = model.nonlinearity_rms();
        assert!((rms / configured - 1.0).abs() < 0.1, "{rms} vs {configured}");
    }

    #[test]
    fn calibration_noise_widens_limits() {
        let model = DigitizerErrorModel::ideal(6).unwrap();
        let mut prev: Option<CodeLimits> = None;
        for noise in [0.0, 0.3, 0.6] {
            let cal = simulate_calibration(&model, 4096, noise, 3).unwrap();
            let lim = characterize_digitizer(&cal, 6, 1).unwrap();
            if let Some(p) = &prev {
                for d in 1..63 {
                    assert!(lim.dig[d].0 <= p.dig[d].0 && lim.dig[d].1 >= p.dig[d].1);
                }
            }
            prev = Some(lim);
        }
    }

    #[test]
    fn hangover_sign_and_eta_scaling() {
        let mut lim = CodeLimits::ideal(2).with_hangover(HangoverBounds {
            zeta_minus: -0.01,
            zeta_plus: 0.02,
            confidence_note: String::new(),
        });
        lim.dig[1] = (0.26, 0.495);
        let dh = lim.dh_limits();
        assert_abs_diff_eq!(dh[1].0, 0.24, epsilon = 1e-15);
        assert_abs_diff_eq!(dh[1].1, 0.505, epsilon = 1e-15);
        let e0 = lim.effective(2, 0.0, true).unwrap();
        assert_eq!(e0, ideal_limits(2));
        let e1 = lim.effective(2, 1.0, true).unwrap();
        assert_abs_diff_eq!(e1[1].0, 0.24, epsilon = 1e-15);
        assert_abs_diff_eq!(e1[1].1, 0.505, epsilon = 1e-15);
        let half = lim.effective(2, 0.5, false).unwrap();
        assert_eq!(half[1], (0.25, 0.5));
        let merged = lim.effective(1, 1.0, true).unwrap();
        assert_eq!(merged[0].0, f64::NEG_INFINITY);
        assert_abs_diff_eq!(merged[0].1, 0.505, epsilon = 1e-15);
        assert!(lim.effective(3, 1.0, true).is_err());
    }

    #[test]
    fn white_stream_is_uncorrelated() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..1_000_000).map(|_| rng.gen::<f64>()).collect();
        let p = compute_autocorrelation(&v, 50).unwrap();
        for d in 1..=50 {
            assert!((p.ac[d] / p.ac[0]).abs() < 4.0 / 1000.0);
        }
    }

    #[test]
    fn two_tap_autocorrelation() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let p: Vec<f64> = (0..1_000_000).map(|_| rng.gen::<f64>()).collect();
        let g = ImpulseResponse::new(vec![1.0, 0.1]).unwrap();
        let v = convolve_train(&p, &g, 0.0, 0).unwrap();
        let prof = compute_autocorrelation(&v, 5).unwrap();
        let want = 0.1 / 1.01;
        assert!((prof.ac[1] / prof.ac[0] - want).abs() < 4.0 / 1000.0);
        assert_eq!(prof.significant_lag(), 1);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert!(matches!(compute_autocorrelation(&[0.3; 1000], 5), Err(Error::Degenerate(_))));
        assert!(matches!(compute_autocorrelation(&[0.3; 100], 5), Err(Error::StreamTooShort { .. })));
    }

    #[test]
    fn delta_autocorrelation_recovers_delta() {
        let r = recover_impulse_response(&AutocorrelationProfile::exact(vec![1.0, 0.0, 0.0]), 8).unwrap();
        assert_eq!(r.response.taps(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn planted_taps_recovered() {
        let mut taps = vec![1.0, 0.05, -0.02, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01];
        taps[10] = 0.01;
        let g = ImpulseResponse::new(taps.clone()).unwrap();
        let ac = AutocorrelationProfile::exact(g.autocorrelation(10));
        for order in [4, 8] {
            let r = recover_impulse_response(&ac, order).unwrap();
            for (a, b) in r.response.taps().iter().zip(&taps) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn unrealizable_and_nonperturbative_inputs() {
        let bad = AutocorrelationProfile::exact(vec![1.0, 1.2]);
        assert!(matches!(recover_impulse_response(&bad, 8), Err(Error::NonConvergent { .. })));
        let strong = AutocorrelationProfile::exact(vec![1.0, 0.6]);
        assert!(matches!(recover_impulse_response(&strong, 8), Err(Error::NonPerturbative { lag: 1, .. })));
    }

    #[test]
    fn hangover_examples() {
        let h = compute_hangover_bounds(&[0.3, 0.7, 0.1], &ImpulseResponse::delta()).unwrap();
        assert_eq!((h.zeta_minus, h.zeta_plus), (0.0, 0.0));
        let g = ImpulseResponse::new(vec![1.0, 0.1]).unwrap();
        let h = compute_hangover_bounds(&[1.0; 50], &g).unwrap();
        assert_abs_diff_eq!(h.zeta_minus, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(h.zeta_plus, 0.1, epsilon = 1e-15);
    }

    fn arcsine_powers(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| 0.5 + 0.5 * (std::f64::consts::TAU * rng.gen::<f64>()).cos()).collect()
    }

    fn reference_taps() -> ImpulseResponse {
        let mut t = vec![0.0; 12];
        t[0] = 1.0;
        t[1] = 0.006;
        t[2] = 0.003;
        t[3] = 0.0015;
        t[10] = -0.004;
        t[11] = 0.0015;
        ImpulseResponse::new(t).unwrap()
    }

    #[test]
    fn hangover_at_reference_scale() {
        let g = reference_taps();
        let p = arcsine_powers(200_000, 4);
        let h = compute_hangover_bounds(&p, &g).unwrap();
        let span = h.zeta_plus - h.zeta_minus;
        assert!((0.010..=0.016).contains(&span), "span {span}");
        assert!(h.zeta_minus.abs() <= 0.016 && h.zeta_plus.abs() <= 0.016);
    }

    #[test]
    fn hangover_bounds_hold_on_held_out_data() {
        let g = reference_taps();
        let n = 100_000;
        let p = arcsine_powers(2 * n, 5);
        let h = compute_hangover_bounds(&p[..n], &g).unwrap();
        let taps = g.taps();
        let mut misses = 0;
        for i in n..2 * n {
            let v: f64 = (1..taps.len()).map(|j| taps[j] * p[i - j]).sum();
            if v < h.zeta_minus || v > h.zeta_plus {
                misses += 1;
            }
        }
        assert!(misses <= 10, "{misses} exceptions");
    }

    #[test]
    fn symbol_hangover_brackets_analog() {
        let g = reference_taps();
        let p = arcsine_powers(20_000, 6);
        let s: Vec<u8> = p.iter().map(|v| ((v * 256.0).floor() as u32).min(255) as u8).collect();
        let stream = SymbolStream::new(8, StreamOrigin::Interference, s).unwrap();
        let a = compute_hangover_bounds(&p, &g).unwrap();
        let b = compute_hangover_bounds_symbols(&stream, &g).unwrap();
        assert!(b.zeta_minus <= a.zeta_minus && b.zeta_plus >= a.zeta_plus);
    }

    fn dominant_taps() -> impl Strategy<Value = Vec<f64>> {
        (proptest::collection::vec(-1.0..1.0f64, 1..12), 0.05..0.45f64).prop_map(|(raw, budget)| {
            let l1: f64 = raw.iter().map(|x| x.abs()).sum::<f64>().max(1e-12);
            let mut t = vec![1.0];
            t.extend(raw.iter().map(|x| x * budget / l1));
            t
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn recovery_round_trip(taps in dominant_taps()) {
            let g = ImpulseResponse::new(taps.clone()).unwrap();
            let ac = AutocorrelationProfile::exact(g.autocorrelation(taps.len() - 1));
            let r = recover_impulse_response(&ac, 200).unwrap();
            for (a, b) in r.response.taps().iter().zip(&taps) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }

        #[test]
        fn residual_nonincreasing_in_order(taps in dominant_taps()) {
            let g = ImpulseResponse::new(taps.clone()).unwrap();
            let ac = AutocorrelationProfile::exact(g.autocorrelation(taps.len() - 1));
            let r = recover_impulse_response(&ac, 30).unwrap();
            for w in r.residuals.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-30);
            }
        }

        #[test]
        fn effective_limits_widen_with_eta(e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64, bits in 1u8..=4) {
            let mut lim = CodeLimits::ideal(4).with_hangover(HangoverBounds {
                zeta_minus: -0.004, zeta_plus: 0.006, confidence_note: String::new() });
            for (d, r) in lim.dig.iter_mut().enumerate() {
                let s = (d as f64 * 1.7).sin() * 0.02;
                *r = (r.0 + s - 0.01, r.1 + s + 0.01);
            }
            let (a, b) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let la = lim.effective(bits, a, true).unwrap();
            let lb = lim.effective(bits, b, true).unwrap();
            for (x, y) in la.iter().zip(&lb) {
                prop_assert!(y.0 <= x.0 && y.1 >= x.1);
            }
        }
    }
}
