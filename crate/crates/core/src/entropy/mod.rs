//! Certified lower bound on average min-entropy via a linear program over
//! cell weights of a covering of condition space.

pub mod certificate;
pub mod constraints;
pub mod covering;
pub mod lp;
pub mod predictability;
pub mod sweep;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use certificate::{sha256_hex, DetectorMemory, EntropyCertificate, LpStatus};
pub use constraints::{build_constraints, ConstraintOptions, ConstraintSet, RangePolicy};
pub use covering::Covering;
pub use lp::{LpOutcome, LpProblem};
pub use predictability::worst_case_predictability;

use crate::characterization::{CodeLimits, ImpulseRecovery};
use crate::detection::SymbolStream;
use crate::error::{Error, Result};
use crate::numeric::WrappedNormal;

/// σ_q = 3π/2, well onto the plateau of the bound.
pub const DEFAULT_SIGMA_Q: f64 = 1.5 * std::f64::consts::PI;
pub const DEFAULT_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyParams {
    pub sigma_q: f64,
    pub bits: u8,
    pub eta: f64,
    /// Grid is `n × n × 4n`.
    pub n: usize,
    #[serde(default)]
    pub constraints: ConstraintOptions,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self {
            sigma_q: DEFAULT_SIGMA_Q,
            bits: 8,
            eta: 1.0,
            n: DEFAULT_RESOLUTION,
            constraints: ConstraintOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyInput<'a> {
    pub interference: &'a SymbolStream,
    pub short: &'a SymbolStream,
    pub long: &'a SymbolStream,
    pub limits: &'a CodeLimits,
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub certificate: EntropyCertificate,
    pub covering: Covering,
    pub objective: Vec<f64>,
    pub constraints: Arc<ConstraintSet>,
    pub problem: LpProblem,
    pub weights: Option<Vec<f64>>,
}

impl Certification {
    pub fn lp_text(&self) -> String {
        let names: Vec<String> = self.constraints.rows.iter().map(|r| r.name()).collect();
        lp::to_lp_format(&self.problem, Some(&names))
    }
}

type ConstraintKey = (u8, u64, usize, String);

/// Runs certifications against one dataset, caching the σ-independent
/// constraint sets.
pub struct Certifier<'a> {
    input: CertifyInput<'a>,
    base: Covering,
    hashes: BTreeMap<String, String>,
    detector: Option<DetectorMemory>,
    cache: Mutex<HashMap<ConstraintKey, Arc<ConstraintSet>>>,
}

/// Hash of the stream's file encoding.
pub fn stream_hash(s: &SymbolStream) -> String {
    sha256_hex(&crate::io::encode_symbols(s))
}

/// Hash of the compact JSON encoding of the limits.
pub fn limits_hash(l: &CodeLimits) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(l)?.as_bytes()))
}

impl<'a> Certifier<'a> {
    pub fn new(input: CertifyInput<'a>) -> Result<Self> {
        if input.interference.bits() != input.limits.bits {
            return Err(Error::BitDepth(format!(
                "streams at {} bits but limits calibrated at {}",
                input.interference.bits(),
                input.limits.bits
            )));
        }
        let base = Covering::from_streams(input.short, input.long, input.limits, DEFAULT_RESOLUTION)?;
        let mut hashes = BTreeMap::new();
        hashes.insert("interference".into(), stream_hash(input.interference));
        hashes.insert("short_arm".into(), stream_hash(input.short));
        hashes.insert("long_arm".into(), stream_hash(input.long));
        hashes.insert("code_limits".into(), limits_hash(input.limits)?);
        Ok(Self { input, base, hashes, detector: None, cache: Mutex::new(HashMap::new()) })
    }

    /// Records the detector memory that produced the hangover bounds.
    pub fn with_detector(mut self, recovery: &ImpulseRecovery) -> Self {
        self.detector = Some(DetectorMemory::from_recovery(recovery));
        self
    }

    pub fn base_covering(&self) -> &Covering {
        &self.base
    }

    pub fn covering(&self, n: usize) -> Result<Covering> {
        self.base.with_resolution(n)
    }

    pub fn constraints(&self, bits: u8, eta: f64, n: usize, opts: &ConstraintOptions) -> Result<Arc<ConstraintSet>> {
        let key = (bits, eta.to_bits(), n, serde_json::to_string(opts)?);
        if let Some(c) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(c.clone());
        }
        let covering = self.covering(n)?;
        let set = Arc::new(build_constraints(
            self.input.interference,
            self.input.short,
            self.input.long,
            &covering,
            self.input.limits,
            bits,
            eta,
            opts,
        )?);
        self.cache.lock().expect("cache lock").insert(key, set.clone());
        Ok(set)
    }

    pub fn objective(&self, covering: &Covering, sigma_q: f64, bits: u8, eta: f64) -> Result<Vec<f64>> {
        let wn = WrappedNormal::new(sigma_q)?;
        let lim = self.input.limits.effective(bits, eta, true)?;
        Ok(covering.cells().par_iter().map(|c| predictability::cell_predictability(c, &wn, &lim)).collect())
    }

    pub fn certify(&self, params: &CertifyParams) -> Result<Certification> {
        if params.n == 0 {
            return Err(Error::param("resolution must be positive"));
        }
        let covering = self.covering(params.n)?;
        let set = self.constraints(params.bits, params.eta, params.n, &params.constraints)?;
        let objective = self.objective(&covering, params.sigma_q, params.bits, params.eta)?;
        let (rows, rhs) = set.lp_rows();
        let problem = LpProblem { objective: objective.clone(), rows, rhs };
        let outcome = lp::solve(&problem)?;
        let lim = self.input.limits;
        let mut cert = EntropyCertificate {
            status: LpStatus::Optimal,
            bound_bits_per_symbol: None,
            predictability_upper: None,
            primal_value: None,
            duality_gap: None,
            primal_residual: None,
            farkas_margin: None,
            farkas_verified: None,
            sigma_q: params.sigma_q,
            bits: params.bits,
            eta: params.eta,
            grid: covering.shape,
            covering_ranges: [covering.p_s, covering.p_l, covering.visibility],
            zeta_minus: lim.hangover.zeta_minus,
            zeta_plus: lim.hangover.zeta_plus,
            range_policy: set.policy.clone(),
            alpha: set.alpha,
            min_samples: lim.min_samples,
            rows: set.rows.len(),
            dropped_trivial_rows: set.dropped_trivial,
            iterations: 0,
            inputs: self.hashes.clone(),
            confidence: format!(
                "each of the {} frequency constraints holds with probability at least 1 - {:e} \
                 (Clopper-Pearson); each code limit covers its support with confidence {:.6}",
                set.rows.len(),
                set.alpha,
                lim.coverage_confidence()
            ),
            detector: self.detector.clone(),
        };
        let weights = match outcome {
            LpOutcome::Optimal(sol) => {
                let upper = sol.dual_bound.max(sol.primal_value);
                cert.bound_bits_per_symbol = Some((-upper.log2()).max(0.0));
                cert.predictability_upper = Some(upper);
                cert.primal_value = Some(sol.primal_value);
                cert.duality_gap = Some(upper - sol.primal_value);
                cert.primal_residual = Some(sol.primal_residual);
                cert.iterations = sol.iterations;
                Some(sol.s)
            }
            LpOutcome::Infeasible(proof) => {
                cert.status = LpStatus::Infeasible;
                cert.farkas_margin = Some(proof.margin);
                cert.farkas_verified = Some(proof.verified);
                None
            }
        };
        Ok(Certification { certificate: cert, covering, objective, constraints: set, problem, weights })
    }
}
