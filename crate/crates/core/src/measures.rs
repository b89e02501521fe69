//! Sample spaces, regions, and the two contracts everything else builds on:
//! proposal measures (mass + restricted sampling + density) and target
//! problems (unnormalized density + regional upper bounds + region splitting).

use crate::error::{Error, Result};
use crate::logdomain::{log_sum, LOG_ZERO};
use crate::rng::Rng;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    /// Coordinates in R^n. Discrete tables use the 1-d case with integer
    /// coordinates for their atoms.
    Continuous(Vec<f64>),
    /// Spin configuration, entries in {-1, +1}.
    Spins(Vec<i8>),
}

impl Point {
    pub fn dim(&self) -> usize {
        match self {
            Point::Continuous(v) => v.len(),
            Point::Spins(v) => v.len(),
        }
    }

    pub fn coords(&self) -> Result<&[f64]> {
        match self {
            Point::Continuous(v) => Ok(v),
            Point::Spins(_) => Err(Error::invalid("expected a continuous point, got spins")),
        }
    }

    pub fn spins(&self) -> Result<&[i8]> {
        match self {
            Point::Spins(v) => Ok(v),
            Point::Continuous(_) => Err(Error::invalid("expected a spin point, got coordinates")),
        }
    }

    /// Numeric view for CSV output: coordinates, or spins as +/-1.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            Point::Continuous(v) => v.clone(),
            Point::Spins(v) => v.iter().map(|&s| s as f64).collect(),
        }
    }
}

/// Shape of a problem's sample space; drives CSV headers and region checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Space {
    Continuous { dim: usize },
    Spins { n: usize },
    Atoms { m: usize },
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Continuous { dim } => *dim,
            Space::Spins { n } => *n,
            Space::Atoms { .. } => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// All of the space, whatever the space is.
    FullSpace { dim: usize },
    /// Half-open interval (a, b] in one dimension. Endpoints may be infinite.
    Interval { a: f64, b: f64 },
    /// Product of half-open intervals (lo_d, hi_d]. Endpoints may be infinite.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Spin configurations on n sites agreeing with `fixed` (site -> +/-1).
    SpinSubcube { n: usize, fixed: BTreeMap<usize, i8> },
}

impl Region {
    pub fn validate(&self) -> Result<()> {
        match self {
            Region::FullSpace { .. } => Ok(()),
            Region::Interval { a, b } => {
                if a.is_nan() || b.is_nan() || a >= b {
                    return Err(Error::contract(format!("malformed interval ({a}, {b}]")));
                }
                Ok(())
            }
            Region::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::contract("box endpoint vectors disagree"));
                }
                for (l, h) in lo.iter().zip(hi) {
                    if l.is_nan() || h.is_nan() || l >= h {
                        return Err(Error::contract(format!("malformed box side ({l}, {h}]")));
                    }
                }
                Ok(())
            }
            Region::SpinSubcube { n, fixed } => {
                for (&site, &value) in fixed {
                    if site >= *n {
                        return Err(Error::contract(format!("spin index {site} out of range for n={n}")));
                    }
                    if value != 1 && value != -1 {
                        return Err(Error::contract(format!("spin value {value} is not +/-1")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match (self, x) {
            (Region::FullSpace { .. }, _) => true,
            (Region::Interval { a, b }, Point::Continuous(v)) => {
                v.len() == 1 && v[0] > *a && v[0] <= *b
            }
            (Region::Box { lo, hi }, Point::Continuous(v)) => {
                v.len() == lo.len()
                    && v.iter()
                        .zip(lo.iter().zip(hi))
                        .all(|(x, (l, h))| x > l && x <= h)
            }
            (Region::SpinSubcube { n, fixed }, Point::Spins(s)) => {
                s.len() == *n && fixed.iter().all(|(&i, &v)| s[i] == v)
            }
            _ => false,
        }
    }
}

/// A nonnegative measure Q that the race machinery can realize: regional
/// masses, sampling restricted to a region, and a density for the ratio
/// f/g. Masses and densities are logs; log 0 = -inf marks an empty region or
/// a point outside the support.
pub trait ProposalMeasure: Send + Sync {
    fn log_mass(&self, region: &Region) -> Result<f64>;
    fn sample_in(&self, region: &Region, rng: &mut Rng) -> Result<Point>;
    fn log_density(&self, x: &Point) -> f64;

    /// For purely atomic measures, the mass of the single atom at x; `None`
    /// for continuous measures. Lets the Gumbel process remove emitted atoms
    /// without knowing the measure's internals.
    fn atom_log_mass(&self, _x: &Point) -> Option<f64> {
        None
    }
}

/// An inference problem posed to the samplers: target density f (log,
/// unnormalized), a proposal with density g covering the same support, a
/// regional upper bound M(B) >= sup over B of f/g, and a splitting rule.
///
/// `split` must partition its input; continuous problems always return two
/// or more parts, while atomic regions (a single table atom, a fully fixed
/// subcube) return the region itself, which the adaptive samplers treat as
/// "advance this region's clock".
pub trait TargetProblem: Send + Sync {
    fn name(&self) -> &'static str;
    fn space(&self) -> Space;
    fn root_region(&self) -> Region;
    fn log_f(&self, x: &Point) -> f64;
    fn proposal(&self) -> &dyn ProposalMeasure;
    fn log_bound(&self, region: &Region) -> Result<f64>;
    fn split(&self, region: &Region, x: &Point) -> Result<Vec<Region>>;
}

/// Outcome of a partition audit; `pass` with human-readable diagnostics.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub pass: bool,
    pub detail: String,
}

/// Audit that `parts` partitions `region` under Q: masses add up (within
/// 1e-6 relative in natural space) and sampled points land in exactly one
/// part. Malformed regions surface as contract errors.
pub fn region_volume_check(
    q: &dyn ProposalMeasure,
    region: &Region,
    parts: &[Region],
    rng: &mut Rng,
) -> Result<CheckReport> {
    region.validate()?;
    for p in parts {
        p.validate()?;
    }
    let total = q.log_mass(region)?;
    let part_masses: Vec<f64> = parts.iter().map(|p| q.log_mass(p)).collect::<Result<_>>()?;
    let recombined = log_sum(part_masses.iter().copied());
    // |log difference| bounds the natural-space relative error for small gaps.
    let additive = if total == LOG_ZERO {
        recombined == LOG_ZERO
    } else {
        (recombined - total).abs() < 1e-6
    };
    if !additive {
        return Ok(CheckReport {
            pass: false,
            detail: format!("mass not additive: parent log {total}, parts log {recombined}"),
        });
    }
    let mut misses = 0usize;
    let samples = if total == LOG_ZERO { 0 } else { 1000 };
    for _ in 0..samples {
        let x = q.sample_in(region, rng)?;
        let hits = parts.iter().filter(|p| p.contains(&x)).count();
        if hits != 1 {
            misses += 1;
        }
    }
    if misses > 0 {
        return Ok(CheckReport {
            pass: false,
            detail: format!("{misses}/{samples} sampled points not covered exactly once"),
        });
    }
    Ok(CheckReport {
        pass: true,
        detail: format!("mass additive within 1e-6; {samples} membership samples clean"),
    })
}
