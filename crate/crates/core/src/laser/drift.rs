use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ConditionVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Ps,
    Pl,
    Visibility,
    PhiC,
}

/// One additive contribution to a drift trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftComponent {
    Sinusoid {
        axis: Axis,
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Ornstein–Uhlenbeck style walk; `reversion = 0` gives a pure random walk.
    RandomWalk {
        axis: Axis,
        step_rms: f64,
        #[serde(default)]
        reversion: f64,
        seed: u64,
    },
    /// Independent per-pulse Gaussian jitter.
    Jitter {
        axis: Axis,
        rms: f64,
        seed: u64,
    },
    /// Adversarial step change at pulse index `at`.
    Step {
        axis: Axis,
        at: usize,
        delta: f64,
    },
    Ramp {
        axis: Axis,
        per_pulse: f64,
    },
    /// Mixture: with probability `probability` a pulse takes `value` on `axis`.
    Dropout {
        axis: Axis,
        probability: f64,
        value: f64,
        seed: u64,
    },
}

/// An explicit trajectory of untrusted conditions, one per pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub description: String,
    pub base: ConditionVector,
    #[serde(default)]
    pub components: Vec<DriftComponent>,
}

fn axis_mut(x: &mut ConditionVector, axis: Axis) -> &mut f64 {
    match axis {
        Axis::Ps => &mut x.p_s,
        Axis::Pl => &mut x.p_l,
        Axis::Visibility => &mut x.visibility,
        Axis::PhiC => &mut x.phi_c,
    }
}

impl DriftScenario {
    pub fn constant(x: ConditionVector) -> Self {
        Self { description: "constant".into(), base: x, components: Vec::new() }
    }

    pub fn with(mut self, c: DriftComponent) -> Self {
        self.components.push(c);
        self
    }

    /// Materializes the first `n` conditions. Every emitted vector is
    /// projected back onto the valid region: powers nonnegative, visibility
    /// in `[0, 1]`, peak power within full scale.
    pub fn conditions(&self, n: usize) -> Result<Vec<ConditionVector>> {
        self.base.validate(1.0)?;
        let mut out = vec![self.base; n];
        for comp in &self.components {
            match *comp {
                DriftComponent::Sinusoid { axis, amplitude, period, phase } => {
                    if !(period > 0.0) {
                        return Err(Error::param("sinusoid period must be positive"));
                    }
                    for (i, x) in out.iter_mut().enumerate() {
                        *axis_mut(x, axis) += amplitude * (std::f64::consts::TAU * i as f64 / period + phase).sin();
                    }
                }
                DriftComponent::RandomWalk { axis, step_rms, reversion, seed } => {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    let mut w = 0.0;
                    for x in out.iter_mut() {
                        *axis_mut(x, axis) += w;
                        let z: f64 = StandardNormal.sample(&mut rng);
                        w = w * (1.0 - reversion) + step_rms * z;
                    }
                }
                DriftComponent::Jitter { axis, rms, seed } => {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    for x in out.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *axis_mut(x, axis) += rms * z;
                    }
                }
                DriftComponent::Step { axis, at, delta } => {
                    for x in out.iter_mut().skip(at) {
                        *axis_mut(x, axis) += delta;
                    }
                }
                DriftComponent::Ramp { axis, per_pulse } => {
                    for (i, x) in out.iter_mut().enumerate() {
                        *axis_mut(x, axis) += per_pulse * i as f64;
                    }
                }
                DriftComponent::Dropout { axis, probability, value, seed } => {
                    use rand::Rng;
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    for x in out.iter_mut() {
                        if rng.gen::<f64>() < probability {
                            *axis_mut(x, axis) = value;
                        }
                    }
                }
            }
        }
        for x in out.iter_mut() {
            project(x);
        }
        Ok(out)
    }
}

fn project(x: &mut ConditionVector) {
    x.p_s = x.p_s.max(0.0);
    x.p_l = x.p_l.max(0.0);
    x.visibility = x.visibility.clamp(0.0, 1.0);
    let limit = 1.0 - 1e-9;
    let sum = x.p_s + x.p_l;
    if sum > limit {
        x.p_s *= limit / sum;
        x.p_l *= limit / sum;
    }
    if x.max_power() > limit {
        let root = 2.0 * (x.p_s * x.p_l).sqrt();
        x.visibility = if root > 0.0 { ((limit - x.p_s - x.p_l) / root).clamp(0.0, 1.0) } else { 0.0 };
    }
}
