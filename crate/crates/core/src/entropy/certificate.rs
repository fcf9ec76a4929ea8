use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::constraints::RangePolicy;
use crate::characterization::ImpulseRecovery;
use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Detector memory behind the hangover bounds, with the tap-dominance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorMemory {
    /// Normalized to `G_0 = 1`.
    pub taps: Vec<f64>,
    pub order: usize,
    pub residual: f64,
    pub dominance_ratio: f64,
    pub dominant: bool,
}

impl DetectorMemory {
    pub fn from_recovery(r: &ImpulseRecovery) -> Self {
        let ratio = r.dominance_ratio();
        Self {
            taps: r.response.normalized().taps().to_vec(),
            order: r.order,
            residual: r.residual(),
            dominance_ratio: ratio,
            dominant: ratio < 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCertificate {
    pub status: LpStatus,
    /// `−log2` of the dual upper bound on the predictability optimum.
    pub bound_bits_per_symbol: Option<f64>,
    pub predictability_upper: Option<f64>,
    pub primal_value: Option<f64>,
    pub duality_gap: Option<f64>,
    pub primal_residual: Option<f64>,
    pub farkas_margin: Option<f64>,
    pub farkas_verified: Option<bool>,
    pub sigma_q: f64,
    pub bits: u8,
    pub eta: f64,
    pub grid: [usize; 3],
    pub covering_ranges: [(f64, f64); 3],
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub range_policy: RangePolicy,
    pub alpha: f64,
    pub min_samples: u64,
    pub rows: usize,
    pub dropped_trivial_rows: usize,
    pub iterations: usize,
    /// Content hashes of every input, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub confidence: String,
    #[serde(default)]
    pub detector: Option<DetectorMemory>,
}

impl EntropyCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }

    pub fn is_feasible(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
