//! Synthetic pulse trains: a trusted Gaussian quantum phase per pulse
//! combined with untrusted, explicitly scripted classical drift.

mod drift;
pub mod sde;

pub use drift::{Axis, DriftComponent, DriftScenario};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pulse quantum phase diffusion with rms width `sigma_q` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumPhaseModel {
    pub sigma_q: f64,
    pub seed: u64,
}

impl QuantumPhaseModel {
    pub fn new(sigma_q: f64, seed: u64) -> Result<Self> {
        let m = Self { sigma_q, seed };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_q > 0.0) || !self.sigma_q.is_finite() {
            return Err(Error::param(format!("sigma_q must be positive and finite, got {}", self.sigma_q)));
        }
        Ok(())
    }
}

/// Draws `count` independent `N(0, sigma_q²)` phases. Deterministic for a
/// given seed.
pub fn sample_quantum_phase(model: &QuantumPhaseModel, count: usize) -> Result<Vec<f64>> {
    model.validate()?;
    if count == 0 {
        return Err(Error::param("count must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(model.seed);
    Ok((0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * model.sigma_q
        })
        .collect())
}

/// The untrusted parameters conditioning one pulse: arm powers (full-scale
/// units), interference visibility and classical phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector {
    pub p_s: f64,
    pub p_l: f64,
    pub visibility: f64,
    pub phi_c: f64,
}

impl ConditionVector {
    pub fn new(p_s: f64, p_l: f64, visibility: f64, phi_c: f64) -> Result<Self> {
        let x = Self { p_s, p_l, visibility, phi_c };
        x.validate(1.0)?;
        Ok(x)
    }

    /// Half the peak-to-peak interference swing, `2 V sqrt(p_s p_l)`.
    pub fn amplitude(&self) -> f64 {
        2.0 * self.visibility * (self.p_s * self.p_l).sqrt()
    }

    pub fn max_power(&self) -> f64 {
        self.p_s + self.p_l + self.amplitude()
    }

    pub fn min_power(&self) -> f64 {
        self.p_s + self.p_l - self.amplitude()
    }

    pub fn validate(&self, full_scale: f64) -> Result<()> {
        let finite = [self.p_s, self.p_l, self.visibility, self.phi_c].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("condition vector has non-finite entries"));
        }
        if self.p_s < 0.0 || self.p_l < 0.0 {
            return Err(Error::param("arm powers must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            return Err(Error::param("visibility must lie in [0, 1]"));
        }
        if self.max_power() > full_scale * (1.0 + 1e-12) {
            return Err(Error::param(format!("peak power {} exceeds full scale {}", self.max_power(), full_scale)));
        }
        Ok(())
    }
}

/// Instantaneous interferometer output power for conditions `x` and
/// quantum phase `phi_q`.
pub fn interference_power(x: &ConditionVector, phi_q: f64) -> f64 {
    x.p_s + x.p_l + x.amplitude() * (x.phi_c + phi_q).cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub condition: ConditionVector,
    pub phi_q: f64,
    pub power: f64,
}

/// Composes a drift scenario with independent quantum phase draws.
pub fn generate_pulse_train(
    drift: &DriftScenario,
    qmodel: &QuantumPhaseModel,
    n_pulses: usize,
) -> Result<Vec<PulseRecord>> {
    if n_pulses == 0 {
        return Err(Error::param("n_pulses must be at least 1"));
    }
    let conditions = drift.conditions(n_pulses)?;
    let phases = sample_quantum_phase(qmodel, n_pulses)?;
    Ok(conditions
        .into_iter()
        .zip(phases)
        .map(|(condition, phi_q)| PulseRecord { condition, phi_q, power: interference_power(&condition, phi_q) })
        .collect())
}
