//! Robust linear regression through the origin: y_i = w x_i + Cauchy noise,
//! standard Normal prior scaled so the prior kernel is exp(-w^2/8). The
//! density ratio against the prior proposal is a product of Cauchy terms
//! 1/(1 + (w x_i - y_i)^2). Each term peaks at w = y_i/x_i and falls off
//! monotonically with |w - y_i/x_i|, so its maximum over an interval sits at
//! the ratio clamped into the interval; the regional bound is the product of
//! those per-term maxima.

use crate::distributions::sample_std_normal_trunc;
use crate::error::{Error, Result};
use crate::logdomain::LOG_ZERO;
use crate::measures::{Point, ProposalMeasure, Region, Space, TargetProblem};
use crate::proposals::GaussianKernel;
use crate::rng::Rng;

const PRIOR_SIGMA: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct RegressionProblem {
    data: Vec<(f64, f64)>,
    /// y_i / x_i, the per-term peak locations.
    ratios: Vec<f64>,
    proposal: GaussianKernel,
}

pub fn make_regression(data: Vec<(f64, f64)>) -> Result<RegressionProblem> {
    if data.is_empty() {
        return Err(Error::invalid("regression needs at least one pair"));
    }
    for &(x, y) in &data {
        if x == 0.0 || !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid(format!(
                "pair ({x}, {y}) invalid: x must be nonzero and both finite"
            )));
        }
    }
    let ratios = data.iter().map(|&(x, y)| y / x).collect();
    Ok(RegressionProblem {
        data,
        ratios,
        proposal: GaussianKernel { dim: 1, sigma: PRIOR_SIGMA },
    })
}

/// Draw the mirrored dataset of the appendix: slope 2 with Normal(0, 0.01)
/// noise on the first half, and (x, -y) copies on the second half. n even.
pub fn regression_dataset(n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid("dataset size must be even and at least 2"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n);
    let full = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..n / 2 {
        let mut x = 0.0f64;
        while x.abs() < 1e-6 {
            x = sample_std_normal_trunc(full.0, full.1, &mut rng)?;
        }
        let eps = 0.1 * sample_std_normal_trunc(full.0, full.1, &mut rng)?;
        data.push((x, 2.0 * x + eps));
    }
    for i in 0..n / 2 {
        let (x, y) = data[i];
        data.push((x, -y));
    }
    Ok(data)
}

/// One pair per row.
pub fn regression_dataset_csv(data: &[(f64, f64)]) -> String {
    let mut out = String::from("pair,x,y\n");
    for (i, (x, y)) in data.iter().enumerate() {
        out.push_str(&format!("{i},{x},{y}\n"));
    }
    out
}

impl RegressionProblem {
    fn interval(&self, region: &Region) -> Result<(f64, f64)> {
        match region {
            Region::FullSpace { dim: 1 } => Ok((f64::NEG_INFINITY, f64::INFINITY)),
            Region::Interval { a, b } => Ok((*a, *b)),
            Region::Box { lo, hi } if lo.len() == 1 => Ok((lo[0], hi[0])),
            other => Err(Error::invalid(format!(
                "regression cannot bound region {other:?}"
            ))),
        }
    }
}

impl TargetProblem for RegressionProblem {
    fn name(&self) -> &'static str {
        "regression"
    }

    fn space(&self) -> Space {
        Space::Continuous { dim: 1 }
    }

    fn root_region(&self) -> Region {
        Region::Interval { a: f64::NEG_INFINITY, b: f64::INFINITY }
    }

    fn log_f(&self, x: &Point) -> f64 {
        let Ok(coords) = x.coords() else {
            return LOG_ZERO;
        };
        if coords.len() != 1 {
            return LOG_ZERO;
        }
        let w = coords[0];
        let mut total = self.proposal.log_density(x);
        for &(xi, yi) in &self.data {
            let r = w * xi - yi;
            total -= (r * r).ln_1p();
        }
        total
    }

    fn proposal(&self) -> &dyn ProposalMeasure {
        &self.proposal
    }

    fn log_bound(&self, region: &Region) -> Result<f64> {
        let (a, b) = self.interval(region)?;
        let mut total = 0.0;
        for (i, &(xi, yi)) in self.data.iter().enumerate() {
            let c = self.ratios[i].max(a).min(b);
            let r = c * xi - yi;
            total -= (r * r).ln_1p();
        }
        Ok(total)
    }

    fn split(&self, region: &Region, x: &Point) -> Result<Vec<Region>> {
        let (a, b) = self.interval(region)?;
        let w = x.coords()?[0];
        if !(w > a) || !(w < b) {
            return Err(Error::contract(format!(
                "split point {w} not interior to ({a}, {b}]"
            )));
        }
        Ok(vec![
            Region::Interval { a, b: w },
            Region::Interval { a: w, b },
        ])
    }
}
