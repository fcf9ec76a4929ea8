//! Langevin rate equations for a single-mode diode laser, integrated with
//! fixed-step Euler–Maruyama.
//!
//! State is (photon number `P`, optical phase `φ`, carrier number `N`).
//! Noise terms are δ-correlated with `<F_i(t) F_j(t')> = 2 D_ij δ(t - t')`.
//! The spontaneous emission rate is modelled as `R_sp = r_sp_coeff · N`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurrentProfile {
    Constant {
        amps: f64,
    },
    /// Square-wave modulation between `bias` and `peak` with the given period
    /// and duty cycle (fraction of the period at `peak`).
    Pulsed {
        bias: f64,
        peak: f64,
        period: f64,
        duty: f64,
    },
}

impl CurrentProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            CurrentProfile::Constant { amps } => amps,
            CurrentProfile::Pulsed { bias, peak, period, duty } => {
                let phase = (t / period).rem_euclid(1.0);
                if phase < duty {
                    peak
                } else {
                    bias
                }
            }
        }
    }
}

/// Which photon-number diffusion coefficient to use. `Agrawal` uses
/// `D_PP = R_sp P`, which keeps the (P, N) diffusion matrix positive
/// semidefinite; `AsPrinted` uses `D_PP = R_sp` and fails when the matrix
/// loses definiteness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionConvention {
    #[default]
    Agrawal,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserRateParams {
    /// Gain `G_L` (1/s).
    pub gain: f64,
    /// Photon decay rate `γ` (1/s).
    pub photon_decay: f64,
    /// Carrier decay rate `γ_e` (1/s).
    pub carrier_decay: f64,
    /// `R_sp = r_sp_coeff · N` (1/s per carrier).
    pub r_sp_coeff: f64,
    pub alpha: f64,
    pub beta: f64,
    pub current: CurrentProfile,
    pub carrier_charge: f64,
    /// Saturation coefficient: the normalized power is `p = saturation_p · P`.
    pub saturation_p: f64,
    #[serde(default)]
    pub diffusion: DiffusionConvention,
}

impl LaserRateParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.gain, self.photon_decay, self.carrier_decay, self.r_sp_coeff, self.saturation_p];
        if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::param("laser rates must be finite and nonnegative"));
        }
        if !(self.carrier_charge > 0.0) {
            return Err(Error::param("carrier charge must be positive"));
        }
        if let CurrentProfile::Pulsed { period, duty, .. } = self.current {
            if !(period > 0.0) || !(0.0..=1.0).contains(&duty) {
                return Err(Error::param("pulsed current needs period > 0 and duty in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn spontaneous_rate(&self, n: f64) -> f64 {
        self.r_sp_coeff * n.max(0.0)
    }

    /// Deterministic drift `(dP/dt, dφ/dt, dN/dt)` at time `t`.
    pub fn drift(&self, t: f64, state: LaserState) -> (f64, f64, f64) {
        let p_norm = self.saturation_p * state.photons;
        let sat = (1.0 + p_norm).sqrt();
        let r_sp = self.spontaneous_rate(state.carriers);
        let dp = (self.gain / sat - self.photon_decay) * state.photons + r_sp;
        let dphi =
            0.5 * self.alpha * (self.gain - self.photon_decay) + 0.5 * self.beta * self.gain * p_norm / (1.0 + sat);
        let dn = self.current.at(t) / self.carrier_charge
            - self.carrier_decay * state.carriers
            - self.gain * state.photons / sat;
        (dp, dphi, dn)
    }

    /// Diffusion coefficients `(D_PP, D_φφ, D_NN, D_PN)`.
    pub fn diffusion(&self, state: LaserState) -> (f64, f64, f64, f64) {
        let r_sp = self.spontaneous_rate(state.carriers);
        let p = state.photons;
        let d_pp = match self.diffusion {
            DiffusionConvention::Agrawal => r_sp * p,
            DiffusionConvention::AsPrinted => r_sp,
        };
        (d_pp, r_sp / (4.0 * p), r_sp * p + self.carrier_decay * state.carriers.max(0.0), -r_sp * p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserState {
    pub photons: f64,
    pub phase: f64,
    pub carriers: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeOptions {
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    pub noise: bool,
    /// Freeze the photon number at its initial value (diagnostic mode).
    pub hold_photon_number: bool,
    pub photon_floor: f64,
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
}

impl Default for SdeOptions {
    fn default() -> Self {
        Self {
            duration: 1e-9,
            dt: 1e-13,
            seed: 0,
            noise: true,
            hold_photon_number: false,
            photon_floor: 1e-3,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub photons: Vec<f64>,
    /// Unwrapped phase.
    pub phase: Vec<f64>,
    pub carriers: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, t: f64, s: LaserState) {
        self.time.push(t);
        self.photons.push(s.photons);
        self.phase.push(s.phase);
        self.carriers.push(s.carriers);
    }

    pub fn last(&self) -> Option<LaserState> {
        let i = self.time.len().checked_sub(1)?;
        Some(LaserState { photons: self.photons[i], phase: self.phase[i], carriers: self.carriers[i] })
    }

    /// Phase at times `offset + k·period`, nearest recorded sample.
    pub fn sample_phase(&self, period: f64, offset: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.time.len() < 2 {
            return out;
        }
        let step = self.time[1] - self.time[0];
        let mut t = offset;
        while t <= *self.time.last().unwrap() {
            let idx = ((t - self.time[0]) / step).round() as usize;
            if idx < self.phase.len() {
                out.push(self.phase[idx]);
            }
            t += period;
        }
        out
    }
}

/// One Euler–Maruyama step. Shared by the trajectory integrator and the
/// increment-statistics checks.
pub fn euler_maruyama_step(
    params: &LaserRateParams,
    opts: &SdeOptions,
    t: f64,
    state: LaserState,
    normals: [f64; 3],
) -> Result<LaserState> {
    let dt = opts.dt;
    let (dp, dphi, dn) = params.drift(t, state);
    for (variable, value, rate) in [("photon number", state.photons, dp), ("carrier number", state.carriers, dn)] {
        if variable == "photon number" && opts.hold_photon_number {
            continue;
        }
        let rel = (rate * dt).abs() / value.abs().max(1.0);
        if rel >= 0.1 {
            return Err(Error::StepSize { variable, time: t, relative_change: rel });
        }
    }
    let mut next = LaserState {
        photons: state.photons + if opts.hold_photon_number { 0.0 } else { dp * dt },
        phase: state.phase + dphi * dt,
        carriers: state.carriers + dn * dt,
    };
    if opts.noise {
        let (d_pp, d_ff, d_nn, d_pn) = params.diffusion(state);
        // Cholesky factor of the 2x2 (P, N) increment covariance 2 D dt
        let a = 2.0 * d_pp * dt;
        let b = 2.0 * d_pn * dt;
        let c = 2.0 * d_nn * dt;
        let l11 = a.sqrt();
        let l21 = if l11 > 0.0 { b / l11 } else { 0.0 };
        let rem = c - l21 * l21;
        if rem < -1e-12 * c.abs().max(1e-300) || (l11 == 0.0 && b != 0.0) {
            return Err(Error::Diffusion { time: t });
        }
        let l22 = rem.max(0.0).sqrt();
        if !opts.hold_photon_number {
            next.photons += l11 * normals[0];
        }
        next.carriers += l21 * normals[0] + l22 * normals[2];
        next.phase += (2.0 * d_ff * dt).sqrt() * normals[1];
    }
    next.photons = next.photons.max(opts.photon_floor);
    Ok(next)
}

/// Integrates the rate equations from `initial` over `opts.duration`.
pub fn integrate_rate_equations(
    params: &LaserRateParams,
    initial: LaserState,
    opts: &SdeOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if !(opts.dt > 0.0) || !(opts.duration > 0.0) {
        return Err(Error::param("dt and duration must be positive"));
    }
    if !(opts.photon_floor > 0.0) {
        return Err(Error::param("photon floor must be positive"));
    }
    let steps = (opts.duration / opts.dt).round() as usize;
    let stride = opts.record_stride.max(1);
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut state = initial;
    state.photons = state.photons.max(opts.photon_floor);
    let mut traj = Trajectory::default();
    traj.push(0.0, state);
    for k in 0..steps {
        let t = k as f64 * opts.dt;
        let normals = if opts.noise {
            [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]
        } else {
            [0.0; 3]
        };
        state = euler_maruyama_step(params, opts, t, state, normals)?;
        if (k + 1) % stride == 0 {
            traj.push((k + 1) as f64 * opts.dt, state);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn params() -> LaserRateParams {
        LaserRateParams {
            gain: 1.0e12,
            photon_decay: 1.2e12,
            carrier_decay: 1.0e9,
            r_sp_coeff: 1.0e4,
            alpha: 4.0,
            beta: 0.5,
            current: CurrentProfile::Constant { amps: 0.02 },
            carrier_charge: 1.602e-19,
            saturation_p: 1e-5,
            diffusion: DiffusionConvention::Agrawal,
        }
    }

    /// Independent steady state: eliminate N from the carrier equation and
    /// bisect the photon balance.
    fn fixed_point(p: &LaserRateParams) -> (f64, f64) {
        let i_q = p.current.at(0.0) / p.carrier_charge;
        let carriers = |ph: f64| (i_q - p.gain * ph / (1.0 + p.saturation_p * ph).sqrt()) / p.carrier_decay;
        let balance =
            |ph: f64| (p.gain / (1.0 + p.saturation_p * ph).sqrt() - p.photon_decay) * ph + p.r_sp_coeff * carriers(ph);
        let (mut lo, mut hi) = (0.0, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, carriers(lo))
    }

    #[test]
    fn deterministic_relaxation_reaches_fixed_point() {
        let p = params();
        let (p_star, n_star) = fixed_point(&p);
        let opts = SdeOptions { duration: 2e-8, dt: 2e-13, noise: false, record_stride: 1000, ..Default::default() };
        let init = LaserState { photons: 0.5 * p_star, phase: 0.0, carriers: 1.2 * n_star };
        let traj = integrate_rate_equations(&p, init, &opts).unwrap();
        let end = traj.last().unwrap();
        assert!((end.photons / p_star - 1.0).abs() < 1e-6, "{} vs {}", end.photons, p_star);
        assert!((end.carriers / n_star - 1.0).abs() < 1e-6);
        let (dp, _, dn) = p.drift(0.0, end);
        assert!((dp * 1e-12 / end.photons).abs() < 1e-6);
        assert!((dn * 1e-12 / end.carriers).abs() < 1e-6);
    }

    #[test]
    fn phase_diffusion_variance_at_fixed_photon_number() {
        let p = params();
        let photons = 2.0e4;
        let carriers = 1.0e7;
        let opts = SdeOptions {
            duration: 100.0 * 1e-13,
            dt: 1e-13,
            hold_photon_number: true,
            record_stride: 100,
            ..Default::default()
        };
        let init = LaserState { photons, phase: 0.0, carriers };
        // carriers drift only slightly over 100 steps; use the mean R_sp
        let realizations = 10_000;
        let mut deltas = Vec::with_capacity(realizations);
        let mut r_sp_mean = 0.0;
        for r in 0..realizations {
            let o = SdeOptions { seed: r as u64, ..opts };
            let traj = integrate_rate_equations(&p, init, &o).unwrap();
            let det = integrate_rate_equations(&p, init, &SdeOptions { noise: false, ..o }).unwrap();
            deltas.push(traj.phase.last().unwrap() - det.phase.last().unwrap());
            r_sp_mean += p.spontaneous_rate(0.5 * (carriers + det.carriers.last().unwrap()));
        }
        r_sp_mean /= realizations as f64;
        let mean = deltas.iter().sum::<f64>() / realizations as f64;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (realizations - 1) as f64;
        let expected = r_sp_mean / (2.0 * photons) * opts.duration;
        assert!((var / expected - 1.0).abs() < 0.05, "var {var} expected {expected}");
    }

    #[test]
    fn increment_covariance_matches_diffusion_matrix() {
        let mut p = params();
        p.carrier_decay = 1e8;
        let state = LaserState { photons: 5.0e4, phase: 0.3, carriers: 2.0e7 };
        let opts = SdeOptions { dt: 1e-14, ..Default::default() };
        let det = euler_maruyama_step(&p, &SdeOptions { noise: false, ..opts }, 0.0, state, [0.0; 3]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 10_000;
        let (mut spp, mut snn, mut spn, mut sff) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let s = euler_maruyama_step(&p, &opts, 0.0, state, z).unwrap();
            let (dp, df, dn) = (s.photons - det.photons, s.phase - det.phase, s.carriers - det.carriers);
            spp += dp * dp;
            snn += dn * dn;
            spn += dp * dn;
            sff += df * df;
        }
        let (d_pp, d_ff, d_nn, d_pn) = p.diffusion(state);
        let nf = n as f64;
        for (emp, d) in [(spp, d_pp), (snn, d_nn), (spn, d_pn), (sff, d_ff)] {
            let target = 2.0 * d * opts.dt;
            assert!((emp / nf / target - 1.0).abs() < 0.05, "{} vs {}", emp / nf, target);
        }
    }

    #[test]
    fn global_phase_offset_leaves_amplitudes_unchanged() {
        let p = params();
        let opts = SdeOptions { duration: 2e-10, dt: 1e-13, seed: 42, ..Default::default() };
        let a = LaserState { photons: 3e4, phase: 0.0, carriers: 1.5e7 };
        let b = LaserState { phase: 2.1, ..a };
        let ta = integrate_rate_equations(&p, a, &opts).unwrap();
        let tb = integrate_rate_equations(&p, b, &opts).unwrap();
        assert_eq!(ta.photons, tb.photons);
        assert_eq!(ta.carriers, tb.carriers);
    }

    #[test]
    fn oversized_step_is_reported() {
        let p = params();
        let opts = SdeOptions { duration: 1e-9, dt: 1e-10, ..Default::default() };
        let init = LaserState { photons: 1e3, phase: 0.0, carriers: 1e7 };
        match integrate_rate_equations(&p, init, &opts) {
            Err(Error::StepSize { variable, .. }) => assert!(!variable.is_empty()),
            other => panic!("expected step-size error, got {other:?}"),
        }
    }

    #[test]
    fn printed_photon_diffusion_loses_definiteness() {
        let p = LaserRateParams { diffusion: DiffusionConvention::AsPrinted, ..params() };
        let opts = SdeOptions { duration: 1e-12, dt: 1e-14, ..Default::default() };
        let init = LaserState { photons: 5e4, phase: 0.0, carriers: 1e5 };
        assert!(matches!(integrate_rate_equations(&p, init, &opts), Err(Error::Diffusion { .. })));
    }
}
