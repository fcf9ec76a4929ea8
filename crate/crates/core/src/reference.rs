//! Synthetic end-to-end dataset with a known ground truth: drifting
//! interferometer, detector memory, an imperfect converter, calibration and
//! characterization, plus an oracle for the true average min-entropy.

use std::f64::consts::PI;

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterization::{
    characterize_chain, simulate_calibration, CodeLimits, ImpulseRecovery, DEFAULT_MIN_SAMPLES,
};
use crate::detection::{
    convolve_train, digitize, DigitizeMode, DigitizerErrorModel, ImpulseResponse, StreamOrigin, SymbolStream,
    SyntheticAdcConfig,
};
use crate::entropy::CertifyInput;
use crate::error::{Error, Result};
use crate::laser::{
    interference_power, sample_quantum_phase, Axis, ConditionVector, DriftComponent, DriftScenario, PulseRecord,
    QuantumPhaseModel,
};
use crate::numeric::WrappedNormal;

/// Detector memory at the scale of a fast photodiode: a short positive tail
/// and a small ringing lobe ten pulses later.
pub fn reference_taps() -> Vec<f64> {
    let mut t = vec![0.0; 12];
    t[0] = 1.0;
    t[1] = 0.006;
    t[2] = 0.003;
    t[3] = 0.0015;
    t[10] = -0.004;
    t[11] = 0.0015;
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub seed: u64,
    pub pulses: usize,
    /// Length of each single-arm stream.
    pub arm_pulses: usize,
    pub sigma_true: f64,
    pub base: ConditionVector,
    /// Per-pulse rms step of the classical phase random walk.
    pub phase_walk_rms: f64,
    /// Amplitude of the slow sinusoidal wander of both arm powers.
    pub power_wobble: f64,
    pub visibility_wobble: f64,
    pub taps: Vec<f64>,
    pub adc: SyntheticAdcConfig,
    /// Calibration draws per ideal bin.
    pub calibration_per_code: u64,
    /// Draws each code must collect for its limits to be accepted.
    pub min_samples: u64,
    /// Reference noise during calibration, in codes.
    pub calibration_noise: f64,
    pub electronic_noise_rms: f64,
    pub recovery_order: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            pulses: 1 << 20,
            arm_pulses: 1 << 18,
            sigma_true: 3.0 * PI,
            base: ConditionVector { p_s: 0.23, p_l: 0.25, visibility: 0.95, phi_c: 0.0 },
            phase_walk_rms: 0.05,
            power_wobble: 0.002,
            visibility_wobble: 0.01,
            taps: reference_taps(),
            adc: SyntheticAdcConfig::default(),
            calibration_per_code: 2 * DEFAULT_MIN_SAMPLES,
            min_samples: DEFAULT_MIN_SAMPLES,
            calibration_noise: 0.02,
            electronic_noise_rms: 0.0,
            recovery_order: 12,
        }
    }
}

impl ReferenceConfig {
    /// Drift scenario for one acquisition; `salt` separates the three streams.
    pub fn drift(&self, salt: u64) -> DriftScenario {
        let seed = self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let period = self.pulses.max(2) as f64 / 3.0;
        DriftScenario {
            description: "reference drift".into(),
            base: self.base,
            components: vec![
                DriftComponent::RandomWalk { axis: Axis::PhiC, step_rms: self.phase_walk_rms, reversion: 0.0, seed },
                DriftComponent::Sinusoid { axis: Axis::Ps, amplitude: self.power_wobble, period, phase: 0.0 },
                DriftComponent::Sinusoid {
                    axis: Axis::Pl,
                    amplitude: self.power_wobble,
                    period: period * 1.37,
                    phase: 1.0,
                },
                DriftComponent::Sinusoid {
                    axis: Axis::Visibility,
                    amplitude: self.visibility_wobble,
                    period: period * 0.71,
                    phase: 2.0,
                },
            ],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceDataset {
    pub config: ReferenceConfig,
    pub model: DigitizerErrorModel,
    pub conditions: Vec<ConditionVector>,
    pub phases: Vec<f64>,
    pub powers: Vec<f64>,
    pub interference: SymbolStream,
    pub short: SymbolStream,
    pub long: SymbolStream,
    pub calibration: Vec<(f64, u32)>,
    pub recovery: ImpulseRecovery,
    pub limits: CodeLimits,
}

fn arm_stream(
    cfg: &ReferenceConfig,
    model: &DigitizerErrorModel,
    g: &ImpulseResponse,
    origin: StreamOrigin,
    salt: u64,
) -> Result<SymbolStream> {
    let cond = cfg.drift(salt).conditions(cfg.arm_pulses)?;
    let powers: Vec<f64> = cond.iter().map(|x| if origin == StreamOrigin::ShortArm { x.p_s } else { x.p_l }).collect();
    let v = convolve_train(&powers, g, cfg.electronic_noise_rms, cfg.seed + salt)?;
    Ok(digitize(&v, model, DigitizeMode::InjectedErrors { seed: cfg.seed + 10 + salt }, origin)?.stream)
}

impl ReferenceDataset {
    pub fn generate(cfg: &ReferenceConfig) -> Result<Self> {
        if cfg.pulses < 100 * cfg.recovery_order.max(1) || cfg.arm_pulses == 0 {
            return Err(Error::param("reference dataset too short"));
        }
        let model = DigitizerErrorModel::synthetic(&cfg.adc)?;
        let g = ImpulseResponse::new(cfg.taps.clone())?;
        let conditions = cfg.drift(0).conditions(cfg.pulses)?;
        let phases = sample_quantum_phase(&QuantumPhaseModel::new(cfg.sigma_true, cfg.seed)?, cfg.pulses)?;
        let powers: Vec<f64> = conditions.iter().zip(&phases).map(|(x, &phi)| interference_power(x, phi)).collect();
        let analog = convolve_train(&powers, &g, cfg.electronic_noise_rms, cfg.seed + 1)?;
        let interference =
            digitize(&analog, &model, DigitizeMode::InjectedErrors { seed: cfg.seed + 2 }, StreamOrigin::Interference)?
                .stream;
        let short = arm_stream(cfg, &model, &g, StreamOrigin::ShortArm, 3)?;
        let long = arm_stream(cfg, &model, &g, StreamOrigin::LongArm, 4)?;

        let calibration = simulate_calibration(&model, cfg.calibration_per_code, cfg.calibration_noise, cfg.seed + 5)?;
        let (limits, recovery) = characterize_chain(&calibration, &interference, cfg.min_samples, cfg.recovery_order)?;
        Ok(Self {
            config: cfg.clone(),
            model,
            conditions,
            phases,
            powers,
            interference,
            short,
            long,
            calibration,
            recovery,
            limits,
        })
    }

    pub fn pulse_records(&self) -> Vec<PulseRecord> {
        self.conditions
            .iter()
            .zip(&self.phases)
            .zip(&self.powers)
            .map(|((&condition, &phi_q), &power)| PulseRecord { condition, phi_q, power })
            .collect()
    }

    pub fn input(&self) -> CertifyInput<'_> {
        CertifyInput { interference: &self.interference, short: &self.short, long: &self.long, limits: &self.limits }
    }
}

/// Ground-truth average min-entropy of the interference stream against an
/// adversary who knows the conditions, every past power and the converter's
/// jitter draw for each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthOracle {
    /// Pulses evaluated, evenly subsampled.
    pub pulses: usize,
    pub phase_points: usize,
    pub jitter_draws: usize,
    pub seed: u64,
}

impl Default for TruthOracle {
    fn default() -> Self {
        Self { pulses: 3000, phase_points: 8192, jitter_draws: 4, seed: 17 }
    }
}

impl TruthOracle {
    /// `−log2` of the mean guessing probability, with bits per symbol at the
    /// model's native depth rebinned to `bits`.
    pub fn min_entropy(
        &self,
        conditions: &[ConditionVector],
        powers: &[f64],
        taps: &[f64],
        model: &DigitizerErrorModel,
        sigma: f64,
        bits: u8,
    ) -> Result<f64> {
        if conditions.len() != powers.len() || powers.is_empty() {
            return Err(Error::param("conditions and powers must align"));
        }
        if bits == 0 || bits > model.bits() {
            return Err(Error::BitDepth(format!("cannot rebin {} bits to {bits}", model.bits())));
        }
        let wn = WrappedNormal::new(sigma)?;
        let m = self.phase_points.max(16);
        let h = 2.0 * PI / m as f64;
        // midpoint weights of the wrapped density, renormalized
        let mut weights: Vec<f64> =
            (0..m).map(|k| wn.arc_mass(-PI + k as f64 * h, -PI + (k + 1) as f64 * h, 0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let phis: Vec<f64> = (0..m).map(|k| -PI + (k as f64 + 0.5) * h).collect();
        let shift = model.bits() - bits;
        let stride = (powers.len() / self.pulses.max(1)).max(1);
        let start = taps.len().min(powers.len() - 1);
        let idx: Vec<usize> = (start..powers.len()).step_by(stride).take(self.pulses.max(1)).collect();
        let guesses: Vec<f64> = idx
            .par_iter()
            .map(|&i| {
                let memory: f64 = taps.iter().enumerate().skip(1).take(i + 1).map(|(j, g)| g * powers[i - j]).sum();
                let x = &conditions[i];
                let mut rng = ChaCha20Rng::seed_from_u64(self.seed ^ i as u64);
                let mut acc = 0.0;
                for _ in 0..self.jitter_draws.max(1) {
                    let u: f64 = rng.gen();
                    let mut mass = vec![0.0; 1 << bits];
                    for (phi, w) in phis.iter().zip(&weights) {
                        let v = taps[0] * interference_power(x, *phi) + memory;
                        let d = model.code_with_draw(v, u)? >> shift;
                        mass[d as usize] += w;
                    }
                    acc += mass.iter().cloned().fold(0.0, f64::max);
                }
                Ok(acc / self.jitter_draws.max(1) as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = guesses.iter().sum::<f64>() / guesses.len() as f64;
        Ok(-mean.log2())
    }
}
