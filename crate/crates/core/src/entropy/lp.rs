//! Dense two-phase simplex for `max cᵀs` subject to `A s ≤ b`, `Σ s = 1`,
//! `s ≥ 0`, returning an independently checkable certificate: a dual
//! vector bounding the optimum from above, or a Farkas vector proving
//! infeasibility.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    /// Dense `≤` rows, each of length `objective.len()`.
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub s: Vec<f64>,
    pub primal_value: f64,
    /// Nonnegative multipliers on the `≤` rows.
    pub dual: Vec<f64>,
    /// `bᵀy + max_i (c − Aᵀy)_i`, an upper bound on the optimum for any `y ≥ 0`.
    pub dual_bound: f64,
    /// Largest violation of any constraint by `s`.
    pub primal_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityProof {
    pub farkas: Vec<f64>,
    /// `min_i (Aᵀy)_i − bᵀy`; positive proves infeasibility.
    pub margin: f64,
    pub verified: bool,
    pub phase_one_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible(InfeasibilityProof),
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

struct Tableau {
    /// Constraint rows followed by the objective row; last column is the rhs.
    t: Vec<f64>,
    width: usize,
    rows: usize,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn obj(&self, c: usize) -> f64 {
        self.t[self.rows * self.width + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.t[pr * w + pc];
        for v in &mut self.t[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.t[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        self.t.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
            if r == pr {
                return;
            }
            let f = row[pc];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * p;
                }
                row[pc] = 0.0;
            }
        });
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Runs simplex iterations maximizing the objective row; columns for
    /// which `allowed` is false never enter.
    fn optimize(&mut self, allowed: &dyn Fn(usize) -> bool, max_iter: usize) -> Result<()> {
        let mut degenerate_run = 0usize;
        let cols = self.width - 1;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Lp(format!("iteration limit {max_iter} reached")));
            }
            let bland = degenerate_run > 50;
            let mut entering = None;
            let mut best = COST_TOL;
            for c in 0..cols {
                if !allowed(c) {
                    continue;
                }
                let z = self.obj(c);
                if z > best {
                    entering = Some(c);
                    if bland {
                        break;
                    }
                    best = z;
                }
            }
            let Some(pc) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio, la)) => {
                            if ratio < lratio - 1e-12 {
                                true
                            } else if ratio <= lratio + 1e-12 {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    a > la
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio, a));
                    }
                }
            }
            let Some((pr, ratio, _)) = leave else {
                return Err(Error::Lp("unbounded direction".into()));
            };
            degenerate_run = if ratio <= 1e-12 { degenerate_run + 1 } else { 0 };
            self.pivot(pr, pc);
        }
    }
}

fn dual_bound(p: &LpProblem, y: &[f64]) -> f64 {
    let n = p.objective.len();
    let mut by = 0.0;
    let mut slack = 0.0;
    let mut aty = vec![0.0; n];
    for ((row, &b), &yk) in p.rows.iter().zip(&p.rhs).zip(y) {
        if yk == 0.0 {
            continue;
        }
        by += b * yk;
        slack += (b * yk).abs();
        for (a, r) in aty.iter_mut().zip(row) {
            *a += r * yk;
        }
    }
    let max_reduced = p.objective.iter().zip(&aty).map(|(c, a)| c - a).fold(f64::NEG_INFINITY, f64::max);
    let scale: f64 = slack + aty.iter().fold(0.0f64, |m, a| m.max(a.abs())) + 1.0;
    // outward rounding allowance for the floating-point sums
    by + max_reduced + 4.0 * f64::EPSILON * scale * (p.rows.len() + 2) as f64
}

fn farkas_margin(p: &LpProblem, y: &[f64]) -> f64 {
    let n = p.objective.len();
    let mut aty = vec![0.0; n];
    let mut by = 0.0;
    let mut scale = 0.0;
    for ((row, &b), &yk) in p.rows.iter().zip(&p.rhs).zip(y) {
        by += b * yk;
        scale += (b * yk).abs();
        for (a, r) in aty.iter_mut().zip(row) {
            *a += r * yk;
            scale += (r * yk).abs() / n as f64;
        }
    }
    let min_aty = aty.iter().cloned().fold(f64::INFINITY, f64::min);
    min_aty - by - 4.0 * f64::EPSILON * (scale + 1.0) * (p.rows.len() + 2) as f64
}

/// Solves the LP. Infeasibility is an outcome, not an error.
pub fn solve(p: &LpProblem) -> Result<LpOutcome> {
    let n = p.objective.len();
    let m = p.rows.len();
    if n == 0 {
        return Err(Error::Lp("no variables".into()));
    }
    if p.rhs.len() != m || p.rows.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("row dimensions disagree".into()));
    }
    let all = p.objective.iter().chain(p.rhs.iter()).chain(p.rows.iter().flatten());
    if all.clone().any(|v| !v.is_finite()) {
        return Err(Error::Lp("non-finite coefficient".into()));
    }
    // columns: structurals, slacks, artificials (negative-rhs rows and the sum row)
    let neg: Vec<usize> = (0..m).filter(|&k| p.rhs[k] < 0.0).collect();
    let n_art = neg.len() + 1;
    let art0 = n + m;
    let width = n + m + n_art + 1;
    let rows = m + 1;
    let mut t = vec![0.0; (rows + 1) * width];
    let mut basis = vec![0; rows];
    let mut art_of_row = vec![None; rows];
    for (i, &k) in neg.iter().enumerate() {
        art_of_row[k] = Some(art0 + i);
    }
    art_of_row[m] = Some(art0 + neg.len());
    for k in 0..m {
        let sign = if p.rhs[k] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut t[k * width..(k + 1) * width];
        for j in 0..n {
            row[j] = sign * p.rows[k][j];
        }
        row[n + k] = sign;
        row[width - 1] = sign * p.rhs[k];
        match art_of_row[k] {
            Some(a) => {
                row[a] = 1.0;
                basis[k] = a;
            }
            None => basis[k] = n + k,
        }
    }
    {
        let row = &mut t[m * width..(m + 1) * width];
        for v in row.iter_mut().take(n) {
            *v = 1.0;
        }
        row[art0 + neg.len()] = 1.0;
        row[width - 1] = 1.0;
        basis[m] = art0 + neg.len();
    }
    // phase one: maximize −Σ artificials, written in reduced form
    for r in 0..rows {
        if art_of_row[r].is_some() {
            for c in 0..width {
                let v = t[r * width + c];
                t[rows * width + c] += v;
            }
        }
    }
    for a in art0..art0 + n_art {
        t[rows * width + a] = 0.0;
    }
    let mut tab = Tableau { t, width, rows, basis, iterations: 0 };
    let max_iter = 50 * (n + m + n_art) + 1000;
    tab.optimize(&|c| c < art0, max_iter)?;
    // objective row rhs holds Σ artificials remaining
    let infeasibility = tab.t[rows * width + width - 1];
    if infeasibility > FEAS_TOL {
        // reduced cost of slack k in phase one is −y_k
        let y: Vec<f64> = (0..m).map(|k| (-tab.obj(n + k)).max(0.0)).collect();
        let margin = farkas_margin(p, &y);
        return Ok(LpOutcome::Infeasible(InfeasibilityProof {
            farkas: y,
            margin,
            verified: margin > 0.0,
            phase_one_value: -infeasibility,
        }));
    }
    // drive zero-level artificials out of the basis
    for r in 0..rows {
        if tab.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| tab.at(r, c).abs() > PIVOT_TOL) {
                tab.pivot(r, c);
            }
        }
    }
    // phase two objective row: c_j − c_Bᵀ B⁻¹ A_j
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(&p.objective);
    for r in 0..rows {
        let b = tab.basis[r];
        let cb = if b < n { p.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..width {
                obj[c] -= cb * tab.t[r * width + c];
            }
        }
    }
    for r in 0..rows {
        obj[tab.basis[r]] = 0.0;
    }
    tab.t[rows * width..].copy_from_slice(&obj);
    tab.optimize(&|c| c < art0, max_iter)?;
    let mut s = vec![0.0; n];
    for r in 0..rows {
        let b = tab.basis[r];
        if b < n {
            s[b] = tab.rhs(r).max(0.0);
        }
    }
    let y: Vec<f64> = (0..m).map(|k| (-tab.obj(n + k)).max(0.0)).collect();
    let primal_value: f64 = s.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
    let mut residual = (s.iter().sum::<f64>() - 1.0).abs();
    for (row, &b) in p.rows.iter().zip(&p.rhs) {
        let lhs: f64 = row.iter().zip(&s).map(|(a, x)| a * x).sum();
        residual = residual.max(lhs - b);
    }
    let bound = dual_bound(p, &y).min(p.objective.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    Ok(LpOutcome::Optimal(LpSolution {
        s,
        primal_value,
        dual: y,
        dual_bound: bound,
        primal_residual: residual.max(0.0),
        iterations: tab.iterations,
    }))
}

/// Writes the problem in CPLEX LP text format.
pub fn to_lp_format(p: &LpProblem, row_names: Option<&[String]>) -> String {
    use std::fmt::Write;
    let mut out = String::from("\\ predictability LP: maximize worst-case mean predictability\nMaximize\n obj:");
    let term = |out: &mut String, a: f64, j: usize| {
        if a >= 0.0 {
            let _ = write!(out, " + {a:.17e} s{j}");
        } else {
            let _ = write!(out, " - {:.17e} s{j}", -a);
        }
    };
    for (j, &c) in p.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, j);
        }
    }
    out.push_str("\nSubject To\n norm:");
    for j in 0..p.objective.len() {
        let _ = write!(out, " + s{j}");
    }
    out.push_str(" = 1\n");
    for (k, (row, b)) in p.rows.iter().zip(&p.rhs).enumerate() {
        match row_names.and_then(|n| n.get(k)) {
            Some(name) => {
                let _ = write!(out, " {name}:");
            }
            None => {
                let _ = write!(out, " r{k}:");
            }
        }
        let mut any = false;
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                term(&mut out, a, j);
                any = true;
            }
        }
        if !any {
            out.push_str(" 0 s0");
        }
        let _ = writeln!(out, " <= {b:.17e}");
    }
    out.push_str("Bounds\n");
    for j in 0..p.objective.len() {
        let _ = writeln!(out, " s{j} >= 0");
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn optimal(p: &LpProblem) -> LpSolution {
        match solve(p).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn two_cell_hand_cases() {
        let p = LpProblem { objective: vec![1.0, 0.5], rows: vec![], rhs: vec![] };
        let s = optimal(&p);
        assert_eq!(s.primal_value, 1.0);
        assert_eq!(s.dual_bound, 1.0);
        let p = LpProblem { objective: vec![1.0, 0.5], rows: vec![vec![1.0, 0.0]], rhs: vec![0.2] };
        let s = optimal(&p);
        assert!((s.primal_value - 0.6).abs() < 1e-15);
        assert!((s.dual_bound - 0.6).abs() < 1e-12 && s.dual_bound >= 0.6);
        assert!((-(0.6f64).log2() - 0.737).abs() < 1e-3);
    }

    #[test]
    fn infeasible_system_has_farkas_proof() {
        // s0 ≥ 0.7 and s1 ≥ 0.7 cannot both hold with s0 + s1 = 1
        let p = LpProblem {
            objective: vec![1.0, 1.0],
            rows: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            rhs: vec![-0.7, -0.7],
        };
        match solve(&p).unwrap() {
            LpOutcome::Infeasible(proof) => assert!(proof.verified && proof.margin > 0.3),
            other => panic!("{other:?}"),
        }
    }

    /// Brute-force optimum over all vertices of the feasible polytope.
    fn vertex_oracle(p: &LpProblem) -> Option<f64> {
        let n = p.objective.len();
        let m = p.rows.len();
        // constraint pool: rows (as equalities when active) and s_j = 0
        let pool = m + n;
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..n - 1).collect();
        loop {
            // equality system: Σ s = 1 plus the chosen active constraints
            let mut a = vec![vec![0.0; n + 1]; n];
            for j in 0..n {
                a[0][j] = 1.0;
            }
            a[0][n] = 1.0;
            for (r, &k) in idx.iter().enumerate() {
                if k < m {
                    a[r + 1][..n].copy_from_slice(&p.rows[k]);
                    a[r + 1][n] = p.rhs[k];
                } else {
                    a[r + 1][k - m] = 1.0;
                }
            }
            if let Some(x) = gauss(a) {
                let feasible = x.iter().all(|v| *v >= -1e-9)
                    && p.rows
                        .iter()
                        .zip(&p.rhs)
                        .all(|(row, b)| row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() <= b + 1e-9);
                if feasible {
                    let v: f64 = x.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
            // next combination
            let k = n - 1;
            let mut i = k;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < pool - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
        let n = a.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    for k in c..=n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
        Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
    }

    pub(crate) fn random_lp(rng: &mut ChaCha20Rng) -> LpProblem {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(0..=8);
        let objective = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let rhs = (0..m).map(|_| rng.gen_range(-0.3..0.6)).collect();
        LpProblem { objective, rows, rhs }
    }

    #[test]
    fn matches_vertex_enumeration() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let mut feasible = 0;
        for _ in 0..300 {
            let p = random_lp(&mut rng);
            let oracle = vertex_oracle(&p);
            match (solve(&p).unwrap(), oracle) {
                (LpOutcome::Optimal(s), Some(v)) => {
                    feasible += 1;
                    assert!((s.primal_value - v).abs() < 1e-9, "{} vs {v}", s.primal_value);
                    assert!(s.dual_bound >= v - 1e-12 && s.dual_bound - v < 1e-9);
                }
                (LpOutcome::Infeasible(proof), None) => assert!(proof.verified),
                (got, want) => panic!("solver {got:?} vs oracle {want:?} on {p:?}"),
            }
        }
        assert!(feasible > 50);
    }

    #[test]
    fn lp_text_export() {
        let p = LpProblem { objective: vec![1.0, 0.5], rows: vec![vec![1.0, -2.0]], rhs: vec![0.2] };
        let text = to_lp_format(&p, None);
        assert!(text.starts_with("\\"));
        assert!(text.contains("Maximize") && text.contains("Subject To") && text.contains("End"));
        assert!(text.contains(" r0: + 1.00000000000000000e0 s0 - 2.00000000000000000e0 s1 <= 2.00000000000000011e-1"));
    }
}
