//! Attractive fully connected Ising model on {-1, +1}^n with a uniform
//! counting proposal. Regions are subcubes fixing a subset of spins; their
//! bounds come from the pairwise-marginal LP relaxation in `crate::lp`, and
//! splits fix the free spin whose relaxed marginal is most ambiguous.

use crate::error::{Error, Result};
use crate::logdomain::LOG_ZERO;
use crate::lp::ising_relaxation;
use crate::measures::{Point, ProposalMeasure, Region, Space, TargetProblem};
use crate::proposals::SpinUniform;
use crate::rng::Rng;
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct IsingProblem {
    n: usize,
    fields: Vec<f64>,
    /// Full symmetric matrix; only i < j entries are read.
    couplings: Vec<Vec<f64>>,
    proposal: SpinUniform,
}

pub fn make_ising(n: usize, fields: Vec<f64>, couplings: Vec<Vec<f64>>) -> Result<IsingProblem> {
    if n < 2 {
        return Err(Error::invalid("ising model needs at least two spins"));
    }
    if fields.len() != n || couplings.len() != n {
        return Err(Error::invalid("parameter shapes disagree with n"));
    }
    for (i, row) in couplings.iter().enumerate() {
        if row.len() != n {
            return Err(Error::invalid("coupling matrix is not n by n"));
        }
        for j in i + 1..n {
            if !(row[j] >= 0.0) {
                return Err(Error::invalid(format!(
                    "coupling w[{i}][{j}] = {} must be nonnegative",
                    row[j]
                )));
            }
        }
    }
    if fields.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("fields must be finite"));
    }
    Ok(IsingProblem { n, fields, couplings, proposal: SpinUniform { n } })
}

/// Appendix parameter draw: couplings Uniform[0, 0.2] for i < j, fields
/// Uniform[-1, 1]. Fields first, then couplings in lexicographic (i, j)
/// order, so a seed pins the whole instance.
pub fn ising_random_params(n: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = Rng::seed_from_u64(seed);
    let fields: Vec<f64> = (0..n).map(|_| rng.uniform01() * 2.0 - 1.0).collect();
    let mut couplings = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = rng.uniform01() * 0.2;
            couplings[i][j] = w;
            couplings[j][i] = w;
        }
    }
    (fields, couplings)
}

/// Fields then upper-triangle couplings, one value per row.
pub fn ising_dataset_csv(fields: &[f64], couplings: &[Vec<f64>]) -> String {
    let mut out = String::from("kind,i,j,value\n");
    for (i, f) in fields.iter().enumerate() {
        out.push_str(&format!("field,{i},,{f}\n"));
    }
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            out.push_str(&format!("coupling,{i},{j},{}\n", couplings[i][j]));
        }
    }
    out
}

impl IsingProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    fn fixed_of<'r>(&self, region: &'r Region) -> Result<FixedView<'r>> {
        match region {
            Region::FullSpace { dim } if *dim == self.n => Ok(FixedView::Empty),
            Region::SpinSubcube { n, fixed } if *n == self.n => Ok(FixedView::Map(fixed)),
            other => Err(Error::invalid(format!(
                "ising cannot bound region {other:?}"
            ))),
        }
    }

    /// Energy of a full configuration.
    fn energy(&self, s: &[i8]) -> f64 {
        let mut v = 0.0;
        for i in 0..self.n {
            v += self.fields[i] * s[i] as f64;
            for j in i + 1..self.n {
                v += self.couplings[i][j] * (s[i] * s[j]) as f64;
            }
        }
        v
    }
}

enum FixedView<'r> {
    Empty,
    Map(&'r BTreeMap<usize, i8>),
}

impl FixedView<'_> {
    fn to_map(&self) -> BTreeMap<usize, i8> {
        match self {
            FixedView::Empty => BTreeMap::new(),
            FixedView::Map(m) => (*m).clone(),
        }
    }
}

impl TargetProblem for IsingProblem {
    fn name(&self) -> &'static str {
        "ising"
    }

    fn space(&self) -> Space {
        Space::Spins { n: self.n }
    }

    fn root_region(&self) -> Region {
        Region::SpinSubcube { n: self.n, fixed: BTreeMap::new() }
    }

    fn log_f(&self, x: &Point) -> f64 {
        match x.spins() {
            Ok(s) if s.len() == self.n => self.energy(s),
            _ => LOG_ZERO,
        }
    }

    fn proposal(&self) -> &dyn ProposalMeasure {
        &self.proposal
    }

    fn log_bound(&self, region: &Region) -> Result<f64> {
        let fixed = self.fixed_of(region)?.to_map();
        let (bound, _) = ising_relaxation(&self.fields, &self.couplings, &fixed)?;
        Ok(bound)
    }

    /// Fix the free spin whose relaxed marginal is closest to 1/2 (ties to
    /// the lowest index), yielding the -1 child then the +1 child. A fully
    /// fixed region returns itself.
    fn split(&self, region: &Region, _x: &Point) -> Result<Vec<Region>> {
        let fixed = self.fixed_of(region)?.to_map();
        if fixed.len() == self.n {
            return Ok(vec![region.clone()]);
        }
        let (_, marginals) = ising_relaxation(&self.fields, &self.couplings, &fixed)?;
        // On attractive instances the relaxation is usually integral, which
        // leaves every free marginal at distance 1/2 and the primary rule
        // undecided. The flip cost of a spin at the relaxed optimum plays the
        // same role at a finer grain: a cheap flip is a marginal that only
        // rounding pushed away from 1/2.
        let config: Vec<f64> = marginals.iter().map(|&b| if b >= 0.5 { 1.0 } else { -1.0 }).collect();
        let mut site = None;
        let mut best = (f64::INFINITY, f64::INFINITY);
        for i in 0..self.n {
            if fixed.contains_key(&i) {
                continue;
            }
            // Snap near-integral values so float fuzz cannot beat a genuine
            // fractional marginal in the distance-to-half comparison.
            let mut b = marginals[i];
            if b < 1e-9 {
                b = 0.0;
            } else if b > 1.0 - 1e-9 {
                b = 1.0;
            }
            let d = (b - 0.5).abs();
            let mut field = self.fields[i];
            for j in 0..self.n {
                if j != i {
                    field += self.couplings[i][j] * config[j];
                }
            }
            let flip_cost = 2.0 * config[i] * field;
            if (d, flip_cost) < best {
                best = (d, flip_cost);
                site = Some(i);
            }
        }
        let site = site.expect("free spin exists");
        let mut children = Vec::with_capacity(2);
        for v in [-1i8, 1i8] {
            let mut f = fixed.clone();
            f.insert(site, v);
            children.push(Region::SpinSubcube { n: self.n, fixed: f });
        }
        Ok(children)
    }
}
