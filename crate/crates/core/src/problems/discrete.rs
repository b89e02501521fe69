//! Finite table of positive masses on atoms 1..=m with a unit counting
//! proposal. Every law about this problem is computable by direct summation,
//! which makes it the ground-truth fixture for the sampler test suites.

use crate::error::{Error, Result};
use crate::logdomain::LOG_ZERO;
use crate::measures::{Point, ProposalMeasure, Region, Space, TargetProblem};
use crate::proposals::CountingMeasure;

#[derive(Clone, Debug)]
pub struct DiscreteTable {
    masses: Vec<f64>,
    log_masses: Vec<f64>,
    proposal: CountingMeasure,
}

/// Table of unnormalized masses f(1..m); the proposal is the counting
/// measure (g = 1 on every atom).
pub fn make_discrete(masses: &[f64]) -> Result<DiscreteTable> {
    if masses.is_empty() {
        return Err(Error::invalid("discrete table needs at least one mass"));
    }
    for (i, &m) in masses.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::invalid(format!(
                "mass {m} at atom {} must be positive and finite",
                i + 1
            )));
        }
    }
    Ok(DiscreteTable {
        masses: masses.to_vec(),
        log_masses: masses.iter().map(|m| m.ln()).collect(),
        proposal: CountingMeasure { m: masses.len() },
    })
}

impl DiscreteTable {
    /// P(whole space) = sum of masses.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Normalized atom probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        let z = self.total_mass();
        self.masses.iter().map(|m| m / z).collect()
    }

    /// Zero-based atom index of a sampled point.
    pub fn atom_index(&self, x: &Point) -> Result<usize> {
        let coords = x.coords()?;
        if coords.len() != 1 {
            return Err(Error::contract("table points are one-dimensional"));
        }
        let v = coords[0];
        if v.fract() != 0.0 || v < 1.0 || v > self.masses.len() as f64 {
            return Err(Error::contract(format!("{v} is not a table atom")));
        }
        Ok(v as usize - 1)
    }

    fn atoms_in(&self, region: &Region) -> Result<(i64, i64)> {
        let (a, b) = match region {
            Region::FullSpace { dim: 1 } => return Ok((1, self.masses.len() as i64)),
            Region::Interval { a, b } => (*a, *b),
            other => {
                return Err(Error::invalid(format!(
                    "table cannot bound region {other:?}"
                )))
            }
        };
        let first = if a < 1.0 { 1 } else { a.floor() as i64 + 1 };
        let last = if b >= self.masses.len() as f64 {
            self.masses.len() as i64
        } else {
            b.floor() as i64
        };
        Ok((first, last))
    }
}

impl TargetProblem for DiscreteTable {
    fn name(&self) -> &'static str {
        "discrete"
    }

    fn space(&self) -> Space {
        Space::Atoms { m: self.masses.len() }
    }

    fn root_region(&self) -> Region {
        Region::Interval { a: 0.0, b: self.masses.len() as f64 }
    }

    fn log_f(&self, x: &Point) -> f64 {
        match self.atom_index(x) {
            Ok(i) => self.log_masses[i],
            Err(_) => LOG_ZERO,
        }
    }

    fn proposal(&self) -> &dyn ProposalMeasure {
        &self.proposal
    }

    /// Largest mass among the atoms in the region (g = 1, so the ratio bound
    /// is just max f).
    fn log_bound(&self, region: &Region) -> Result<f64> {
        let (first, last) = self.atoms_in(region)?;
        if last < first {
            return Ok(LOG_ZERO);
        }
        let mut best = LOG_ZERO;
        for i in first..=last {
            best = best.max(self.log_masses[i as usize - 1]);
        }
        Ok(best)
    }

    /// Isolate the proposed atom: (a, b] becomes (a, i-1], (i-1, i], (i, b].
    /// The singleton carries an exact bound, so re-proposing it accepts. A
    /// single-atom region returns itself (advance its clock).
    fn split(&self, region: &Region, x: &Point) -> Result<Vec<Region>> {
        let (first, last) = self.atoms_in(region)?;
        let i = self.atom_index(x)? as i64 + 1;
        if i < first || i > last {
            return Err(Error::contract(format!(
                "split point {i} outside region atoms {first}..={last}"
            )));
        }
        if first == last {
            return Ok(vec![region.clone()]);
        }
        let mut parts = Vec::with_capacity(3);
        if i > first {
            parts.push(Region::Interval { a: (first - 1) as f64, b: (i - 1) as f64 });
        }
        parts.push(Region::Interval { a: (i - 1) as f64, b: i as f64 });
        if i < last {
            parts.push(Region::Interval { a: i as f64, b: last as f64 });
        }
        Ok(parts)
    }
}
