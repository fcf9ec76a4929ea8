use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Certifier, CertifyParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma_q: f64,
    pub bits: u8,
    pub eta: f64,
    pub n: usize,
    /// `None` when the constraints are infeasible.
    pub bound: Option<f64>,
}

impl SweepPoint {
    fn from_run(params: &CertifyParams, bound: Option<f64>) -> Self {
        Self { sigma_q: params.sigma_q, bits: params.bits, eta: params.eta, n: params.n, bound }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub points: Vec<SweepPoint>,
    /// Bounds nondecreasing in `n` within `1e-6`.
    pub monotone: bool,
    /// `|bound(n_last−1) − bound(n_last)| / bound(n_last)`.
    pub relative_change: Option<f64>,
}

pub const SOLVER_SLACK: f64 = 1e-6;

fn as_ordered(values: &[Option<f64>]) -> Vec<f64> {
    values.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()
}

/// Nondecreasing within `SOLVER_SLACK`; an infeasible point ranks below every
/// bound.
pub fn is_nondecreasing(values: &[Option<f64>]) -> bool {
    as_ordered(values).windows(2).all(|w| w[1] >= w[0] - SOLVER_SLACK)
}

/// For a sweep in increasing `η`: the smallest `η` from which every point is
/// feasible, provided the feasible bounds are nonincreasing. `None` if no
/// point is feasible or the pattern breaks.
pub fn eta_cutoff(points: &[SweepPoint]) -> Option<f64> {
    let first = points.iter().position(|p| p.bound.is_some())?;
    let tail: Vec<Option<f64>> = points[first..].iter().map(|p| p.bound).collect();
    if tail.iter().any(Option::is_none) {
        return None;
    }
    let v = as_ordered(&tail);
    v.windows(2).all(|w| w[1] <= w[0] + SOLVER_SLACK).then_some(points[first].eta)
}

/// Runs one certification per value of `vary`, which edits a copy of `base`.
pub fn sweep<T: Copy>(
    certifier: &Certifier,
    base: &CertifyParams,
    values: &[T],
    vary: impl Fn(&mut CertifyParams, T),
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&v| {
            let mut p = base.clone();
            vary(&mut p, v);
            let c = certifier.certify(&p)?;
            Ok(SweepPoint::from_run(&p, c.certificate.bound_bits_per_symbol))
        })
        .collect()
}

pub fn resolution_sweep(certifier: &Certifier, base: &CertifyParams, ns: &[usize]) -> Result<ResolutionReport> {
    let points = sweep(certifier, base, ns, |p, n| p.n = n)?;
    let bounds: Vec<Option<f64>> = points.iter().map(|p| p.bound).collect();
    let relative_change = match bounds.as_slice() {
        [.., Some(a), Some(b)] if *b > 0.0 => Some((a - b).abs() / b),
        _ => None,
    };
    Ok(ResolutionReport { monotone: is_nondecreasing(&bounds), points, relative_change })
}

pub fn to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("sigma_q,bits,eta,n,bound,status\n");
    for p in points {
        let (b, s) = match p.bound {
            Some(b) => (format!("{b:.9}"), "optimal"),
            None => (String::new(), "infeasible"),
        };
        let _ = writeln!(out, "{:.9},{},{:.6},{},{},{}", p.sigma_q, p.bits, p.eta, p.n, b, s);
    }
    out
}
