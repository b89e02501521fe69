//! Dense primal simplex and the Ising LP relaxation built on it.
//!
//! The solver is a textbook two-phase tableau method with Bland's rule for
//! anti-cycling and a 1e-9 pivot tolerance. It is deliberately simple: the
//! models here are small (at 10 spins the root relaxation has 190 variables
//! and 180 equalities) and the relaxation IS the quantity under test, so the
//! pivoting behavior must be auditable and deterministic.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

pub const PIVOT_TOL: f64 = 1e-9;

/// Linear program over variables in [0, 1]: maximize objective . x subject
/// to equality and less-equal rows.
#[derive(Clone, Debug)]
pub struct LpModel {
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution {
    Optimal { value: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        debug_assert!(p.abs() > 0.0);
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][c];
            if factor == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                self.rows[i][j] -= factor * self.rows[r][j];
            }
            self.rows[i][c] = 0.0;
            self.rhs[i] -= factor * self.rhs[r];
        }
        self.basis[r] = c;
    }
}

/// Minimize cost . x from the current basis. Entering variable: lowest index
/// with reduced cost below -PIVOT_TOL among columns < `enterable` (Bland).
/// Leaving row: minimum ratio, ties broken by lowest basic index (Bland).
fn run_phase(t: &mut Tableau, cost: &[f64], enterable: usize) -> Result<PhaseEnd> {
    // Reduced costs d_j = c_j - c_B . B^-1 A_j for the current basis.
    let mut d: Vec<f64> = (0..t.cols)
        .map(|j| {
            cost[j]
                - t.basis
                    .iter()
                    .zip(t.rows.iter())
                    .map(|(&b, row)| cost[b] * row[j])
                    .sum::<f64>()
        })
        .collect();
    let cap = 50_000 + 200 * (t.rows.len() + t.cols) as u64;
    for _ in 0..cap {
        let Some(c) = (0..enterable).find(|&j| d[j] < -PIVOT_TOL) else {
            return Ok(PhaseEnd::Optimal);
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..t.rows.len() {
            let a = t.rows[r][c];
            if a > PIVOT_TOL {
                let ratio = t.rhs[r] / a;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - PIVOT_TOL
                            || (ratio < lratio + PIVOT_TOL && t.basis[r] < t.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((r, _)) = leave else {
            return Ok(PhaseEnd::Unbounded);
        };
        t.pivot(r, c);
        let dc = d[c];
        for j in 0..t.cols {
            d[j] -= dc * t.rows[r][j];
        }
        d[c] = 0.0;
    }
    Err(Error::ProgressFailure {
        iterations: cap,
        context: "simplex did not converge (cycling despite Bland's rule?)".into(),
    })
}

/// Maximize `objective . x` subject to `rows . x = rhs`, x >= 0, by the
/// two-phase method. Redundant equality rows are detected at the end of
/// phase 1 and dropped.
pub(crate) fn simplex_standard(
    objective: &[f64],
    rows: &[(Vec<f64>, f64)],
) -> Result<LpSolution> {
    let n = objective.len();
    let m = rows.len();
    let mut t = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: (n..n + m).collect(),
        cols: n + m,
    };
    for (i, (coeffs, b)) in rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(Error::invalid("constraint width disagrees with objective"));
        }
        let flip = if *b < 0.0 { -1.0 } else { 1.0 };
        let mut row: Vec<f64> = coeffs.iter().map(|&v| flip * v).collect();
        row.resize(n + m, 0.0);
        row[n + i] = 1.0;
        t.rows.push(row);
        t.rhs.push(flip * b);
    }

    // Phase 1: minimize the sum of artificials; only structurals may enter.
    let mut cost1 = vec![0.0; n + m];
    for c in cost1.iter_mut().skip(n) {
        *c = 1.0;
    }
    run_phase(&mut t, &cost1, n)?;
    let residual: f64 = t
        .basis
        .iter()
        .zip(t.rhs.iter())
        .filter(|(&b, _)| b >= n)
        .map(|(_, &v)| v)
        .sum();
    if residual > 1e-7 {
        return Ok(LpSolution::Infeasible);
    }

    // Drive zero-level artificials out of the basis; rows that cannot be
    // pivoted on any structural column are redundant and get dropped.
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= n {
            if let Some(c) = (0..n).find(|&c| t.rows[r][c].abs() > PIVOT_TOL) {
                t.pivot(r, c);
                r += 1;
            } else {
                t.rows.remove(r);
                t.rhs.remove(r);
                t.basis.remove(r);
            }
        } else {
            r += 1;
        }
    }
    for row in &mut t.rows {
        row.truncate(n);
    }
    t.cols = n;

    // Phase 2: minimize the negated objective over the structurals.
    let cost2: Vec<f64> = objective.iter().map(|&c| -c).collect();
    match run_phase(&mut t, &cost2, n)? {
        PhaseEnd::Unbounded => Ok(LpSolution::Unbounded),
        PhaseEnd::Optimal => {
            let mut x = vec![0.0; n];
            for (r, &b) in t.basis.iter().enumerate() {
                x[b] = t.rhs[r].max(0.0);
            }
            let value = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            Ok(LpSolution::Optimal { value, x })
        }
    }
}

/// Solve an `LpModel` (variables in [0, 1]). Bounds become explicit slack
/// rows x_j + s_j = 1, inequalities get one slack each, and the standard-form
/// core does the rest. The reported x covers the model's variables only.
pub fn lp_solve(model: &LpModel) -> Result<LpSolution> {
    let n = model.objective.len();
    if n == 0 {
        return Err(Error::invalid("empty objective"));
    }
    let n_le = model.le.len();
    let total = n + n + n_le; // structurals, bound slacks, inequality slacks
    let mut objective = vec![0.0; total];
    objective[..n].copy_from_slice(&model.objective);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (coeffs, b) in &model.eq {
        if coeffs.len() != n {
            return Err(Error::invalid("equality row width disagrees with objective"));
        }
        let mut row = vec![0.0; total];
        row[..n].copy_from_slice(coeffs);
        rows.push((row, *b));
    }
    for (k, (coeffs, b)) in model.le.iter().enumerate() {
        if coeffs.len() != n {
            return Err(Error::invalid("inequality row width disagrees with objective"));
        }
        let mut row = vec![0.0; total];
        row[..n].copy_from_slice(coeffs);
        row[n + n + k] = 1.0;
        rows.push((row, *b));
    }
    for j in 0..n {
        let mut row = vec![0.0; total];
        row[j] = 1.0;
        row[n + j] = 1.0;
        rows.push((row, 1.0));
    }
    match simplex_standard(&objective, &rows)? {
        LpSolution::Optimal { value, x } => {
            Ok(LpSolution::Optimal { value, x: x[..n].to_vec() })
        }
        other => Ok(other),
    }
}

/// LP relaxation of max_x sum_i fields[i] x_i + sum_{i<j} couplings[i][j]
/// x_i x_j over x in {-1, +1}^n with the spins in `fixed` pinned.
///
/// Free spins become node marginals b_i in [0, 1]; every pair of free spins
/// gets four joint indicators b_{ij,kl} tied to the nodes by the
/// marginalization equalities. Pairs touching a fixed spin reduce exactly to
/// linear terms, so they are substituted into the objective instead of
/// carrying a block. Upper bounds need no rows: each block sums to 1, which
/// pins every variable it touches inside [0, 1].
///
/// Returns the bound on the maximum and the node marginals (fixed spins
/// reported at their pinned 0/1 value) for split selection.
pub fn ising_relaxation(
    fields: &[f64],
    couplings: &[Vec<f64>],
    fixed: &BTreeMap<usize, i8>,
) -> Result<(f64, Vec<f64>)> {
    let n = fields.len();
    for (&site, &v) in fixed {
        if site >= n {
            return Err(Error::contract(format!("fixed spin {site} out of range")));
        }
        if v != 1 && v != -1 {
            return Err(Error::contract(format!("fixed spin value {v} is not +/-1")));
        }
    }
    let lin = IsingLinear::build(fields, couplings, fixed);
    let m = lin.free.len();

    let full_marginals = |b_free: &[f64]| -> Vec<f64> {
        let mut b = vec![0.0; n];
        for (&site, &v) in fixed {
            b[site] = (v as f64 + 1.0) / 2.0;
        }
        for (k, &i) in lin.free.iter().enumerate() {
            b[i] = b_free[k];
        }
        b
    };

    if m == 0 {
        return Ok((lin.base, full_marginals(&[])));
    }
    if m == 1 {
        // One free spin: maximize base + lin * x over x in [-1, 1].
        let value = lin.base + lin.coeff[0].abs();
        let b = if lin.coeff[0] >= 0.0 { 1.0 } else { 0.0 };
        return Ok((value, full_marginals(&[b])));
    }

    let (objective, rows, base) = lin.pair_model(couplings);
    match simplex_standard(&objective, &rows)? {
        LpSolution::Optimal { value, x } => Ok((base + value, full_marginals(&x[..m]))),
        other => Err(Error::contract(format!(
            "ising relaxation must be feasible and bounded, got {other:?}"
        ))),
    }
}

/// Linearized view of an Ising objective over a region: the constant from
/// fixed spins, the per-free-spin linear coefficient (field plus couplings
/// into fixed neighbors), and the free-site list.
struct IsingLinear {
    base: f64,
    coeff: Vec<f64>,
    free: Vec<usize>,
}

impl IsingLinear {
    fn build(fields: &[f64], couplings: &[Vec<f64>], fixed: &BTreeMap<usize, i8>) -> Self {
        let n = fields.len();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains_key(i)).collect();
        let spin = |i: usize| fixed.get(&i).map(|&v| v as f64);
        let mut base = 0.0;
        for (&i, &v) in fixed {
            base += fields[i] * v as f64;
        }
        for i in 0..n {
            for j in i + 1..n {
                if let (Some(vi), Some(vj)) = (spin(i), spin(j)) {
                    base += couplings[i][j] * vi * vj;
                }
            }
        }
        let mut coeff = vec![0.0; free.len()];
        for (k, &i) in free.iter().enumerate() {
            let mut c = fields[i];
            for j in 0..n {
                if j != i {
                    if let Some(vj) = spin(j) {
                        c += couplings[i.min(j)][i.max(j)] * vj;
                    }
                }
            }
            coeff[k] = c;
        }
        IsingLinear { base, coeff, free }
    }

    /// Standard-form model over node marginals in x = 2b - 1 coordinates,
    /// one [b00, b01, b10, b11] block per free-free pair tied to its nodes
    /// by the four marginalization equalities. Needs >= 2 free spins.
    fn pair_model(&self, couplings: &[Vec<f64>]) -> (Vec<f64>, Vec<(Vec<f64>, f64)>, f64) {
        let m = self.free.len();
        debug_assert!(m >= 2);
        let pairs: Vec<(usize, usize)> = self
            .free
            .iter()
            .enumerate()
            .flat_map(|(a, &i)| self.free[a + 1..].iter().map(move |&j| (i, j)))
            .collect();
        let n_vars = m + 4 * pairs.len();
        let mut base = self.base;
        let mut objective = vec![0.0; n_vars];
        for k in 0..m {
            objective[k] = 2.0 * self.coeff[k];
            base -= self.coeff[k];
        }
        let idx_of: BTreeMap<usize, usize> =
            self.free.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(4 * pairs.len());
        for (p, &(i, j)) in pairs.iter().enumerate() {
            let blk = m + 4 * p;
            let w = couplings[i][j];
            // x_i x_j = b00 - b01 - b10 + b11 on the block.
            objective[blk] += w;
            objective[blk + 1] -= w;
            objective[blk + 2] -= w;
            objective[blk + 3] += w;
            let bi = idx_of[&i];
            let bj = idx_of[&j];
            // Marginalization: each block row sums to its node value.
            let mut r1 = vec![0.0; n_vars]; // b00 + b01 = 1 - b_i
            r1[blk] = 1.0;
            r1[blk + 1] = 1.0;
            r1[bi] = 1.0;
            rows.push((r1, 1.0));
            let mut r2 = vec![0.0; n_vars]; // b10 + b11 = b_i
            r2[blk + 2] = 1.0;
            r2[blk + 3] = 1.0;
            r2[bi] = -1.0;
            rows.push((r2, 0.0));
            let mut r3 = vec![0.0; n_vars]; // b00 + b10 = 1 - b_j
            r3[blk] = 1.0;
            r3[blk + 2] = 1.0;
            r3[bj] = 1.0;
            rows.push((r3, 1.0));
            let mut r4 = vec![0.0; n_vars]; // b01 + b11 = b_j
            r4[blk + 1] = 1.0;
            r4[blk + 3] = 1.0;
            r4[bj] = -1.0;
            rows.push((r4, 0.0));
        }
        (objective, rows, base)
    }
}

/// Exhaustive maximum of the Ising objective over all completions of
/// `fixed`; reference oracle for the relaxation.
pub fn ising_brute_force_max(
    fields: &[f64],
    couplings: &[Vec<f64>],
    fixed: &BTreeMap<usize, i8>,
) -> f64 {
    let n = fields.len();
    let free: Vec<usize> = (0..n).filter(|i| !fixed.contains_key(i)).collect();
    let mut best = f64::NEG_INFINITY;
    let mut x = vec![0i8; n];
    for (&site, &v) in fixed {
        x[site] = v;
    }
    for mask in 0u64..(1 << free.len()) {
        for (k, &i) in free.iter().enumerate() {
            x[i] = if mask >> k & 1 == 1 { 1 } else { -1 };
        }
        let mut v = 0.0;
        for i in 0..n {
            v += fields[i] * x[i] as f64;
            for j in i + 1..n {
                v += couplings[i][j] * (x[i] * x[j]) as f64;
            }
        }
        best = best.max(v);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rat(x: f64) -> BigRational {
        BigRational::from_float(x).expect("finite")
    }

    /// Exact-arithmetic mirror of `simplex_standard`: two-phase, Bland's
    /// rule, no tolerances. Infinite precision stands in for the "higher
    /// precision reference" when auditing the f64 solver.
    fn simplex_exact(objective: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<BigRational> {
        let n = objective.len();
        let m = rows.len();
        let zero = BigRational::from_integer(BigInt::from(0));
        let one = BigRational::from_integer(BigInt::from(1));
        let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m);
        let mut rhs: Vec<BigRational> = Vec::with_capacity(m);
        let mut basis: Vec<usize> = (n..n + m).collect();
        for (i, (coeffs, b)) in rows.iter().enumerate() {
            let neg = *b < 0.0;
            let mut row: Vec<BigRational> = coeffs
                .iter()
                .map(|&v| if neg { -rat(v) } else { rat(v) })
                .collect();
            row.resize(n + m, zero.clone());
            row[n + i] = one.clone();
            t.push(row);
            rhs.push(if neg { -rat(*b) } else { rat(*b) });
        }
        let pivot = |t: &mut Vec<Vec<BigRational>>,
                     rhs: &mut Vec<BigRational>,
                     basis: &mut Vec<usize>,
                     r: usize,
                     c: usize| {
            let p = t[r][c].clone();
            for v in t[r].iter_mut() {
                *v /= p.clone();
            }
            rhs[r] /= p;
            for i in 0..t.len() {
                if i == r || t[i][c] == zero {
                    continue;
                }
                let f = t[i][c].clone();
                for j in 0..t[i].len() {
                    let delta = f.clone() * t[r][j].clone();
                    t[i][j] -= delta;
                }
                let delta = f * rhs[r].clone();
                rhs[i] -= delta;
            }
            basis[r] = c;
        };
        let run = |t: &mut Vec<Vec<BigRational>>,
                   rhs: &mut Vec<BigRational>,
                   basis: &mut Vec<usize>,
                   cost: &[BigRational],
                   enterable: usize|
         -> bool {
            loop {
                let width = t[0].len();
                let d: Vec<BigRational> = (0..width)
                    .map(|j| {
                        let mut v = cost[j].clone();
                        for (row, &b) in t.iter().zip(basis.iter()) {
                            v -= cost[b].clone() * row[j].clone();
                        }
                        v
                    })
                    .collect();
                let Some(c) = (0..enterable).find(|&j| d[j] < zero) else {
                    return true;
                };
                let mut leave: Option<(usize, BigRational)> = None;
                for r in 0..t.len() {
                    if t[r][c] > zero {
                        let ratio = rhs[r].clone() / t[r][c].clone();
                        let better = match &leave {
                            None => true,
                            Some((lr, lratio)) => {
                                ratio < *lratio || (ratio == *lratio && basis[r] < basis[*lr])
                            }
                        };
                        if better {
                            leave = Some((r, ratio));
                        }
                    }
                }
                let Some((r, _)) = leave else {
                    return false; // unbounded
                };
                pivot(t, rhs, basis, r, c);
            }
        };
        let mut cost1 = vec![zero.clone(); n + m];
        for c in cost1.iter_mut().skip(n) {
            *c = one.clone();
        }
        assert!(run(&mut t, &mut rhs, &mut basis, &cost1, n));
        let residual: BigRational = basis
            .iter()
            .zip(rhs.iter())
            .filter(|(&b, _)| b >= n)
            .map(|(_, v)| v.clone())
            .sum();
        if residual != zero {
            return None; // infeasible
        }
        let mut r = 0;
        while r < t.len() {
            if basis[r] >= n {
                if let Some(c) = (0..n).find(|&c| t[r][c] != zero) {
                    pivot(&mut t, &mut rhs, &mut basis, r, c);
                    r += 1;
                } else {
                    t.remove(r);
                    rhs.remove(r);
                    basis.remove(r);
                }
            } else {
                r += 1;
            }
        }
        for row in t.iter_mut() {
            row.truncate(n);
        }
        let cost2: Vec<BigRational> = objective.iter().map(|&c| -rat(c)).collect();
        if !run(&mut t, &mut rhs, &mut basis, &cost2, n) {
            return None; // unbounded
        }
        let mut value = zero;
        for (r, &b) in basis.iter().enumerate() {
            value += rat(objective[b]) * rhs[r].clone();
        }
        Some(value)
    }

    fn to_f64(r: &BigRational) -> f64 {
        let num = r.numer();
        let den = r.denom();
        // Good enough for comparisons at 1e-6: go through strings only when
        // the parts exceed f64 range, which these tests never do.
        let nf: f64 = num.to_string().parse().unwrap();
        let df: f64 = den.to_string().parse().unwrap();
        nf / df
    }

    fn random_instance(rng: &mut Rng, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let fields: Vec<f64> = (0..n).map(|_| rng.uniform01() * 2.0 - 1.0).collect();
        let mut couplings = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                couplings[i][j] = rng.uniform01() * 0.2;
            }
        }
        (fields, couplings)
    }

    fn random_fixed(rng: &mut Rng, n: usize) -> BTreeMap<usize, i8> {
        let mut fixed = BTreeMap::new();
        for i in 0..n {
            let u = rng.uniform01();
            if u < 0.25 {
                fixed.insert(i, 1i8);
            } else if u < 0.5 {
                fixed.insert(i, -1i8);
            }
        }
        fixed
    }

    #[test]
    fn tiny_models() {
        // max x1 + x2 st x1 + x2 <= 1, x in [0,1]^2: optimum 1.
        let model = LpModel {
            objective: vec![1.0, 1.0],
            eq: vec![],
            le: vec![(vec![1.0, 1.0], 1.0)],
        };
        match lp_solve(&model).unwrap() {
            LpSolution::Optimal { value, x } => {
                assert!((value - 1.0).abs() < 1e-9);
                assert!((x[0] + x[1] - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        // Forced equalities pin the solution.
        let model = LpModel {
            objective: vec![3.0, -1.0],
            eq: vec![(vec![1.0, 0.0], 0.25), (vec![0.0, 1.0], 0.75)],
            le: vec![],
        };
        match lp_solve(&model).unwrap() {
            LpSolution::Optimal { value, x } => {
                assert!((value - 0.0).abs() < 1e-9);
                assert!((x[0] - 0.25).abs() < 1e-9 && (x[1] - 0.75).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
        // Infeasible: x1 = 2 outside [0,1].
        let model = LpModel {
            objective: vec![1.0],
            eq: vec![(vec![1.0], 2.0)],
            le: vec![],
        };
        assert_eq!(lp_solve(&model).unwrap(), LpSolution::Infeasible);
    }

    #[test]
    fn unbounded_standard_form_detected() {
        // max x1 subject to x1 = x2: the feasible ray is unbounded above.
        let sol = simplex_standard(&[1.0, 0.0], &[(vec![1.0, -1.0], 0.0)]).unwrap();
        assert_eq!(sol, LpSolution::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // Same row twice plus its double: rank 1 out of 3 rows.
        let rows = vec![
            (vec![1.0, 1.0], 1.0),
            (vec![1.0, 1.0], 1.0),
            (vec![2.0, 2.0], 2.0),
        ];
        match simplex_standard(&[1.0, 0.0], &rows).unwrap() {
            LpSolution::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn relaxation_dominates_brute_force_and_is_exact_at_leaves() {
        let mut rng = Rng::seed_from_u64(200);
        for trial in 0..100 {
            let n = 2 + (rng.next_u64() % 9) as usize; // 2..=10
            let (fields, couplings) = random_instance(&mut rng, n);
            let fixed = random_fixed(&mut rng, n);
            let (bound, b) = ising_relaxation(&fields, &couplings, &fixed).unwrap();
            let brute = ising_brute_force_max(&fields, &couplings, &fixed);
            assert!(
                bound >= brute - 1e-6,
                "trial {trial}: relaxation {bound} below brute force {brute}"
            );
            assert!(b.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
            // Fully fixed: the relaxation is the objective value itself.
            let mut all_fixed = fixed.clone();
            for i in 0..n {
                all_fixed.entry(i).or_insert(1);
            }
            let (leaf, _) = ising_relaxation(&fields, &couplings, &all_fixed).unwrap();
            let leaf_brute = ising_brute_force_max(&fields, &couplings, &all_fixed);
            assert!((leaf - leaf_brute).abs() < 1e-9);
        }
    }

    #[test]
    fn relaxation_matches_exact_arithmetic_reference() {
        // 50 random relaxations audited against the BigRational simplex.
        let mut rng = Rng::seed_from_u64(201);
        let mut audited = 0;
        while audited < 50 {
            let n = 2 + (rng.next_u64() % 5) as usize; // 2..=6 keeps rationals fast
            let (fields, couplings) = random_instance(&mut rng, n);
            let fixed = random_fixed(&mut rng, n);
            let free = n - fixed.len();
            if free < 2 {
                continue; // closed-form path, no LP to audit
            }
            // Rebuild the same standard-form model the relaxation solves.
            let (bound, _) = ising_relaxation(&fields, &couplings, &fixed).unwrap();
            let brute = ising_brute_force_max(&fields, &couplings, &fixed);
            // Exact reference on the identical model: reconstruct via the
            // public builder by re-deriving the pieces is circular, so audit
            // at the outcome level instead: the f64 bound must be within
            // 1e-6 of the exact LP value, which we obtain by re-solving the
            // same rows with exact arithmetic.
            let (objective, rows, base) =
                super::test_hooks::ising_model_parts(&fields, &couplings, &fixed).unwrap();
            let exact = simplex_exact(&objective, &rows).expect("feasible");
            let exact_val = base + to_f64(&exact);
            assert!(
                (bound - exact_val).abs() < 1e-6,
                "bound {bound} vs exact {exact_val}"
            );
            assert!(exact_val >= brute - 1e-9);
            audited += 1;
        }
    }

    #[test]
    fn decoupled_two_spin_bound_is_sum_of_field_magnitudes() {
        // No couplings: the relaxation separates and each node contributes
        // |field|, solvable by hand.
        let fields = vec![0.7, -0.3];
        let couplings = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let (bound, b) = ising_relaxation(&fields, &couplings, &BTreeMap::new()).unwrap();
        assert!((bound - 1.0).abs() < 1e-9);
        assert!((b[0] - 1.0).abs() < 1e-9 && b[1].abs() < 1e-9);
    }

    #[test]
    fn relaxation_is_monotone_under_fixing() {
        let mut rng = Rng::seed_from_u64(202);
        for _ in 0..100 {
            let n = 3 + (rng.next_u64() % 6) as usize;
            let (fields, couplings) = random_instance(&mut rng, n);
            let fixed = random_fixed(&mut rng, n);
            let (parent, _) = ising_relaxation(&fields, &couplings, &fixed).unwrap();
            // Fix one more free spin; the bound cannot increase.
            let Some(site) = (0..n).find(|i| !fixed.contains_key(i)) else {
                continue;
            };
            for v in [-1i8, 1i8] {
                let mut child = fixed.clone();
                child.insert(site, v);
                let (cb, _) = ising_relaxation(&fields, &couplings, &child).unwrap();
                assert!(cb <= parent + 1e-7, "child {cb} above parent {parent}");
            }
        }
    }

    #[test]
    #[ignore = "timing probe, run on demand"]
    fn timing_probe_ten_spin_root() {
        let mut rng = Rng::seed_from_u64(99);
        let (fields, couplings) = random_instance(&mut rng, 10);
        let t0 = std::time::Instant::now();
        let reps = 20;
        let mut acc = 0.0;
        for _ in 0..reps {
            let (b, _) = ising_relaxation(&fields, &couplings, &BTreeMap::new()).unwrap();
            acc += b;
        }
        println!(
            "root relaxation: {:.3} ms/solve (checksum {acc})",
            t0.elapsed().as_secs_f64() * 1e3 / reps as f64
        );
    }

    #[test]
    fn determinism_same_model_same_solution() {
        let mut rng = Rng::seed_from_u64(203);
        let (fields, couplings) = random_instance(&mut rng, 8);
        let fixed = BTreeMap::new();
        let (b1, x1) = ising_relaxation(&fields, &couplings, &fixed).unwrap();
        let (b2, x2) = ising_relaxation(&fields, &couplings, &fixed).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(x1, x2);
    }
}

/// Internal hooks for tests that need the raw model a relaxation solves.
#[doc(hidden)]
pub mod test_hooks {
    use super::*;

    /// Rebuild (objective, rows, constant) for a free-count >= 2 region,
    /// exactly as `ising_relaxation` does.
    pub fn ising_model_parts(
        fields: &[f64],
        couplings: &[Vec<f64>],
        fixed: &BTreeMap<usize, i8>,
    ) -> Result<(Vec<f64>, Vec<(Vec<f64>, f64)>, f64)> {
        let lin = IsingLinear::build(fields, couplings, fixed);
        if lin.free.len() < 2 {
            return Err(Error::invalid("model parts need >= 2 free spins"));
        }
        Ok(lin.pair_model(couplings))
    }
}
