//! Built-in proposal measures: counting measure on table atoms, uniform
//! counting on spin configurations, the unnormalized Gaussian kernel used by
//! the continuous problems, and Lebesgue measure for the point-process layer.

use crate::distributions::{log_gauss_kernel_mass, sample_std_normal_trunc};
use crate::error::{Error, Result};
use crate::logdomain::LOG_ZERO;
use crate::measures::{Point, ProposalMeasure, Region};
use crate::rng::Rng;

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_74;

/// Counting measure with unit mass on atoms 1..=m, embedded at integer
/// coordinates so half-open intervals can address any contiguous run.
#[derive(Clone, Debug)]
pub struct CountingMeasure {
    pub m: usize,
}

impl CountingMeasure {
    /// Inclusive atom range covered by a region, clipped to 1..=m.
    fn atom_range(&self, region: &Region) -> Result<(i64, i64)> {
        let (a, b) = match region {
            Region::FullSpace { dim: 1 } => return Ok((1, self.m as i64)),
            Region::Interval { a, b } => (*a, *b),
            other => {
                return Err(Error::invalid(format!(
                    "counting measure cannot weigh region {other:?}"
                )))
            }
        };
        let first = if a < 1.0 { 1 } else { a.floor() as i64 + 1 };
        let last = if b >= self.m as f64 { self.m as i64 } else { b.floor() as i64 };
        Ok((first, last))
    }

    fn is_atom(&self, x: &Point) -> bool {
        match x {
            Point::Continuous(v) if v.len() == 1 => {
                let i = v[0];
                i.fract() == 0.0 && i >= 1.0 && i <= self.m as f64
            }
            _ => false,
        }
    }
}

impl ProposalMeasure for CountingMeasure {
    fn log_mass(&self, region: &Region) -> Result<f64> {
        let (first, last) = self.atom_range(region)?;
        if last < first {
            return Ok(LOG_ZERO);
        }
        Ok(((last - first + 1) as f64).ln())
    }

    fn sample_in(&self, region: &Region, rng: &mut Rng) -> Result<Point> {
        let (first, last) = self.atom_range(region)?;
        if last < first {
            return Err(Error::invalid("sampling from an empty atom range"));
        }
        let count = (last - first + 1) as u64;
        let atom = first + rng.below(count) as i64;
        Ok(Point::Continuous(vec![atom as f64]))
    }

    fn log_density(&self, x: &Point) -> f64 {
        if self.is_atom(x) {
            0.0
        } else {
            LOG_ZERO
        }
    }

    fn atom_log_mass(&self, x: &Point) -> Option<f64> {
        Some(if self.is_atom(x) { 0.0 } else { LOG_ZERO })
    }
}

/// Uniform counting measure on {-1, +1}^n.
#[derive(Clone, Debug)]
pub struct SpinUniform {
    pub n: usize,
}

impl SpinUniform {
    fn free_sites(&self, region: &Region) -> Result<usize> {
        match region {
            Region::FullSpace { dim } if *dim == self.n => Ok(self.n),
            Region::SpinSubcube { n, fixed } if *n == self.n => Ok(self.n - fixed.len()),
            other => Err(Error::invalid(format!(
                "spin measure cannot weigh region {other:?}"
            ))),
        }
    }
}

impl ProposalMeasure for SpinUniform {
    fn log_mass(&self, region: &Region) -> Result<f64> {
        Ok(self.free_sites(region)? as f64 * std::f64::consts::LN_2)
    }

    fn sample_in(&self, region: &Region, rng: &mut Rng) -> Result<Point> {
        self.free_sites(region)?;
        let mut spins = vec![0i8; self.n];
        for s in spins.iter_mut() {
            *s = if rng.coin() { 1 } else { -1 };
        }
        if let Region::SpinSubcube { fixed, .. } = region {
            for (&site, &value) in fixed {
                spins[site] = value;
            }
        }
        Ok(Point::Spins(spins))
    }

    fn log_density(&self, x: &Point) -> f64 {
        match x {
            Point::Spins(s) if s.len() == self.n && s.iter().all(|&v| v == 1 || v == -1) => 0.0,
            _ => LOG_ZERO,
        }
    }

    fn atom_log_mass(&self, x: &Point) -> Option<f64> {
        Some(self.log_density(x))
    }
}

/// Unnormalized Gaussian kernel exp(-|x|^2 / (2 sigma^2)) on R^dim; regional
/// masses are products of one-dimensional kernel integrals and restricted
/// sampling is coordinatewise truncated-normal inversion.
#[derive(Clone, Debug)]
pub struct GaussianKernel {
    pub dim: usize,
    pub sigma: f64,
}

impl GaussianKernel {
    fn sides<'r>(&self, region: &'r Region) -> Result<Vec<(f64, f64)>> {
        match region {
            Region::FullSpace { dim } if *dim == self.dim => {
                Ok(vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim])
            }
            Region::Interval { a, b } if self.dim == 1 => Ok(vec![(*a, *b)]),
            Region::Box { lo, hi } if lo.len() == self.dim => {
                Ok(lo.iter().copied().zip(hi.iter().copied()).collect())
            }
            other => Err(Error::invalid(format!(
                "gaussian kernel cannot weigh region {other:?} at dim {}",
                self.dim
            ))),
        }
    }
}

impl ProposalMeasure for GaussianKernel {
    fn log_mass(&self, region: &Region) -> Result<f64> {
        let mut total = 0.0;
        for (a, b) in self.sides(region)? {
            total += log_gauss_kernel_mass(a, b, self.sigma);
        }
        Ok(total)
    }

    fn sample_in(&self, region: &Region, rng: &mut Rng) -> Result<Point> {
        let mut coords = Vec::with_capacity(self.dim);
        for (a, b) in self.sides(region)? {
            let z = sample_std_normal_trunc(a / self.sigma, b / self.sigma, rng)?;
            let mut v = z * self.sigma;
            // Truncation clamps to a closed interval; regions are half-open.
            if v <= a {
                v = a.next_up();
            }
            coords.push(v.min(b));
        }
        Ok(Point::Continuous(coords))
    }

    fn log_density(&self, x: &Point) -> f64 {
        match x {
            Point::Continuous(v) if v.len() == self.dim => {
                -v.iter().map(|c| c * c).sum::<f64>() / (2.0 * self.sigma * self.sigma)
            }
            _ => LOG_ZERO,
        }
    }
}

/// Lebesgue measure on R^dim: mass is volume, restricted sampling is uniform.
/// Infinite regions report infinite mass; sampling them is an error.
#[derive(Clone, Debug)]
pub struct Lebesgue {
    pub dim: usize,
}

impl Lebesgue {
    fn sides(&self, region: &Region) -> Result<Vec<(f64, f64)>> {
        match region {
            Region::FullSpace { dim } if *dim == self.dim => {
                Ok(vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim])
            }
            Region::Interval { a, b } if self.dim == 1 => Ok(vec![(*a, *b)]),
            Region::Box { lo, hi } if lo.len() == self.dim => {
                Ok(lo.iter().copied().zip(hi.iter().copied()).collect())
            }
            other => Err(Error::invalid(format!(
                "lebesgue measure cannot weigh region {other:?} at dim {}",
                self.dim
            ))),
        }
    }
}

impl ProposalMeasure for Lebesgue {
    fn log_mass(&self, region: &Region) -> Result<f64> {
        let mut total = 0.0;
        for (a, b) in self.sides(region)? {
            total += (b - a).ln();
        }
        Ok(total)
    }

    fn sample_in(&self, region: &Region, rng: &mut Rng) -> Result<Point> {
        let sides = self.sides(region)?;
        let mut coords = Vec::with_capacity(self.dim);
        for (a, b) in sides {
            if !(b - a).is_finite() {
                return Err(Error::invalid("cannot sample uniformly from an infinite region"));
            }
            coords.push(a + rng.uniform01() * (b - a));
        }
        Ok(Point::Continuous(coords))
    }

    fn log_density(&self, x: &Point) -> f64 {
        match x {
            Point::Continuous(v) if v.len() == self.dim => 0.0,
            _ => LOG_ZERO,
        }
    }
}

/// Full-space mass of the standard-prior kernel: dim * ln(sigma sqrt(2 pi)).
pub fn gauss_kernel_total(dim: usize, sigma: f64) -> f64 {
    dim as f64 * (sigma.ln() + LN_2PI_HALF)
}
