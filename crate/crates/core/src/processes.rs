//! Poisson point processes, exponential races, and Gumbel processes.
//!
//! A race is a Poisson process on time x space with mean measure
//! Lebesgue x Q, enumerated in time order. The flat stream realizes it one
//! interarrival at a time; the tree stream realizes the same law over a
//! space-partitioning tree (each node holds one arrival, children start at
//! the node's next-arrival clock). Negating log-times turns a race into a
//! Gumbel process, realized directly by a truncated-Gumbel chain.

use crate::distributions::{
    sample_categorical_log, sample_exp_log_rate, sample_trunc_gumbel,
};
use crate::error::{Error, Result};
use crate::logdomain::{log_add, log_sum, LOG_ZERO};
use crate::measures::{Point, ProposalMeasure, Region};
use crate::rng::Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// One arrival of a race: strictly increasing log-times, locations drawn
/// from the race measure restricted to wherever the arrival landed.
#[derive(Clone, Debug)]
pub struct Arrival {
    /// 0-based position in the emission order.
    pub index: u64,
    pub log_time: f64,
    pub location: Point,
}

impl Arrival {
    /// The Gumbel view of this arrival's clock.
    pub fn gumbel(&self) -> f64 {
        -self.log_time
    }
}

/// A realized point set inside a window region.
#[derive(Clone, Debug)]
pub struct PointPattern {
    pub window: Region,
    pub points: Vec<Point>,
}

/// Realize a Poisson process with mean measure Q restricted to `window`:
/// a Poisson(Q(window)) count of i.i.d. Q-distributed locations.
pub fn poisson_realize(
    q: &dyn ProposalMeasure,
    window: &Region,
    rng: &mut Rng,
) -> Result<PointPattern> {
    window.validate()?;
    let log_mass = q.log_mass(window)?;
    if log_mass == f64::INFINITY {
        return Err(Error::invalid("cannot realize a Poisson process of infinite mean"));
    }
    let n = crate::distributions::sample_poisson(log_mass.exp(), rng)?;
    let mut points = Vec::with_capacity(n as usize);
    for _ in 0..n {
        points.push(q.sample_in(window, rng)?);
    }
    Ok(PointPattern { window: window.clone(), points })
}

/// Independent thinning: keep each point with probability exp(log_keep(x)).
/// A log-probability above 0 is a broken retention contract.
pub fn thin(
    pattern: &PointPattern,
    log_keep: &dyn Fn(&Point) -> f64,
    rng: &mut Rng,
) -> Result<PointPattern> {
    let mut points = Vec::new();
    for x in &pattern.points {
        let lp = log_keep(x);
        if lp > 1e-12 {
            return Err(Error::contract(format!(
                "thinning probability exp({lp}) exceeds 1"
            )));
        }
        if rng.uniform01().ln() < lp {
            points.push(x.clone());
        }
    }
    Ok(PointPattern { window: pattern.window.clone(), points })
}

/// Apply an injective map to every point. The image window is unknown to the
/// map, so the result is windowed by the full space of the mapped points.
pub fn map_points(pattern: &PointPattern, h: &dyn Fn(&Point) -> Point) -> PointPattern {
    let points: Vec<Point> = pattern.points.iter().map(h).collect();
    let dim = points.first().map(|p| p.dim()).unwrap_or(pattern.window_dim());
    PointPattern { window: Region::FullSpace { dim }, points }
}

impl PointPattern {
    fn window_dim(&self) -> usize {
        match &self.window {
            Region::FullSpace { dim } => *dim,
            Region::Interval { .. } => 1,
            Region::Box { lo, .. } => lo.len(),
            Region::SpinSubcube { n, .. } => *n,
        }
    }
}

/// Min-heap entry ordered by (key, insertion order). Keys are finite;
/// insertion order makes ties deterministic.
#[derive(Debug)]
struct HeapEntry<T> {
    key: f64,
    seq: u64,
    value: T,
}

impl<T> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.seq == other.seq
    }
}
impl<T> Eq for HeapEntry<T> {}
impl<T> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the smallest key first.
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-queue over (f64 key, payload) with FIFO tie-breaking.
#[derive(Debug)]
pub(crate) struct MinQueue<T> {
    heap: BinaryHeap<HeapEntry<T>>,
    seq: u64,
}

impl<T> MinQueue<T> {
    pub fn new() -> Self {
        MinQueue { heap: BinaryHeap::new(), seq: 0 }
    }

    pub fn push(&mut self, key: f64, value: T) {
        debug_assert!(!key.is_nan());
        self.heap.push(HeapEntry { key, seq: self.seq, value });
        self.seq += 1;
    }

    pub fn peek_key(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.key)
    }

    pub fn pop(&mut self) -> Option<(f64, T)> {
        self.heap.pop().map(|e| (e.key, e.value))
    }

}

/// Sequentially assign next-arrival clocks to the parts of a just-split
/// region. The first part is chosen with probability proportional to its
/// mass and inherits `log_start`; each subsequent gap is Exp(total mass of
/// the parts still waiting). Equivalent to giving every part an independent
/// Exp(Q(part)) clock started at the parent's arrival.
pub(crate) fn assign_child_times(
    children: Vec<(Region, f64)>, // (region, log mass), all positive mass
    log_start: f64,
    rng: &mut Rng,
) -> Result<Vec<(Region, f64, f64)>> {
    let mut remaining = children;
    let mut out = Vec::with_capacity(remaining.len());
    let mut log_t = log_start;
    while !remaining.is_empty() {
        let weights: Vec<f64> = remaining.iter().map(|c| c.1).collect();
        let pick = sample_categorical_log(&weights, rng)?;
        let (region, log_q) = remaining.swap_remove(pick);
        out.push((region, log_q, log_t));
        if !remaining.is_empty() {
            let rest = log_sum(remaining.iter().map(|c| c.1));
            log_t = log_add(log_t, sample_exp_log_rate(rest, rng)?);
        }
    }
    Ok(out)
}

enum RaceMode<'a> {
    Flat {
        log_total: f64,
        log_t: f64,
    },
    Tree {
        split: Box<dyn Fn(&Region, &Point) -> Result<Vec<Region>> + 'a>,
        nodes: MinQueue<(Region, f64)>, // payload: (region, log mass)
    },
}

/// Enumerates the arrivals of an exponential race with measure Q restricted
/// to a root region, in increasing time order.
pub struct RaceStream<'a> {
    q: &'a dyn ProposalMeasure,
    root: Region,
    mode: RaceMode<'a>,
    rng: Rng,
    next_index: u64,
}

impl<'a> RaceStream<'a> {
    /// Flat construction: i.i.d. Exp(Q(root)) interarrivals, locations i.i.d.
    /// Q restricted to the root.
    pub fn flat(q: &'a dyn ProposalMeasure, root: Region, rng: Rng) -> Result<Self> {
        root.validate()?;
        let log_total = q.log_mass(&root)?;
        if log_total == LOG_ZERO || log_total == f64::INFINITY {
            return Err(Error::invalid(format!(
                "race needs positive finite mass, got log {log_total}"
            )));
        }
        Ok(RaceStream {
            q,
            root,
            mode: RaceMode::Flat { log_total, log_t: LOG_ZERO },
            rng,
            next_index: 0,
        })
    }

    /// Tree construction over a space-partitioning tree defined by `split`.
    /// Emits the same law as `flat` in the same time order.
    pub fn tree(
        q: &'a dyn ProposalMeasure,
        root: Region,
        split: Box<dyn Fn(&Region, &Point) -> Result<Vec<Region>> + 'a>,
        mut rng: Rng,
    ) -> Result<Self> {
        root.validate()?;
        let log_total = q.log_mass(&root)?;
        if log_total == LOG_ZERO || log_total == f64::INFINITY {
            return Err(Error::invalid(format!(
                "race needs positive finite mass, got log {log_total}"
            )));
        }
        let mut nodes = MinQueue::new();
        let first = sample_exp_log_rate(log_total, &mut rng)?;
        nodes.push(first, (root.clone(), log_total));
        Ok(RaceStream { q, root, mode: RaceMode::Tree { split, nodes }, rng, next_index: 0 })
    }

    pub fn root(&self) -> &Region {
        &self.root
    }

    /// Next arrival; strictly-later times, locations from Q over the region
    /// that hosts each arrival.
    pub fn next_arrival(&mut self) -> Result<Arrival> {
        let index = self.next_index;
        match &mut self.mode {
            RaceMode::Flat { log_total, log_t } => {
                *log_t = log_add(*log_t, sample_exp_log_rate(*log_total, &mut self.rng)?);
                let location = self.q.sample_in(&self.root, &mut self.rng)?;
                self.next_index += 1;
                Ok(Arrival { index, log_time: *log_t, location })
            }
            RaceMode::Tree { split, nodes } => {
                let (log_time, (region, log_q)) = nodes
                    .pop()
                    .ok_or_else(|| Error::contract("tree race ran out of regions"))?;
                let location = self.q.sample_in(&region, &mut self.rng)?;
                // Next arrival inside this region, distributed over its parts.
                let log_next = log_add(log_time, sample_exp_log_rate(log_q, &mut self.rng)?);
                let parts = split(&region, &location)?;
                let mut children = Vec::with_capacity(parts.len());
                for part in parts {
                    let mass = self.q.log_mass(&part)?;
                    if mass > LOG_ZERO {
                        children.push((part, mass));
                    }
                }
                if children.is_empty() {
                    return Err(Error::contract(
                        "split produced no parts with positive mass",
                    ));
                }
                for (part, mass, t) in assign_child_times(children, log_next, &mut self.rng)? {
                    nodes.push(t, (part, mass));
                }
                self.next_index += 1;
                Ok(Arrival { index, log_time, location })
            }
        }
    }
}

/// Enumerates a Gumbel process over Q: values G_1 >= G_2 >= ... where each
/// G_i is TruncGumbel(log Q(Omega_i), G_{i-1}) and each location is Q over
/// Omega_i. Atomic measures have emitted atoms removed from Omega; for
/// continuous measures removal is a no-op and the stream is infinite.
pub struct GumbelStream<'a> {
    q: &'a dyn ProposalMeasure,
    root: Region,
    log_remaining: f64,
    /// Remaining mass in natural space. Atom removal subtracts here, which is
    /// exact for the small unit-atom counting spaces this crate ships, so the
    /// stream detects exhaustion without log-space drift.
    remaining_nat: f64,
    removed: Vec<Point>,
    g_prev: f64,
    next_index: u64,
    rng: Rng,
}

impl<'a> GumbelStream<'a> {
    pub fn new(q: &'a dyn ProposalMeasure, root: Region, rng: Rng) -> Result<Self> {
        root.validate()?;
        let log_total = q.log_mass(&root)?;
        if log_total == LOG_ZERO || log_total == f64::INFINITY {
            return Err(Error::invalid(format!(
                "gumbel process needs positive finite mass, got log {log_total}"
            )));
        }
        Ok(GumbelStream {
            q,
            root,
            log_remaining: log_total,
            remaining_nat: log_total.exp(),
            removed: Vec::new(),
            g_prev: f64::INFINITY,
            next_index: 0,
            rng,
        })
    }

    /// Next (G, X); `None` once an atomic space is exhausted.
    pub fn next_value(&mut self) -> Result<Option<(f64, Point)>> {
        if self.log_remaining == LOG_ZERO {
            return Ok(None);
        }
        let g = sample_trunc_gumbel(self.log_remaining, self.g_prev, &mut self.rng);
        // Rejection against the removed atoms; cheap because removal only
        // happens for small atomic spaces.
        let location = loop {
            let x = self.q.sample_in(&self.root, &mut self.rng)?;
            if !self.removed.contains(&x) {
                break x;
            }
        };
        self.g_prev = g;
        if let Some(atom_mass) = self.q.atom_log_mass(&location) {
            if !self.remaining_nat.is_finite() {
                return Err(Error::invalid(
                    "atomic space too massive to track exhaustion in natural space",
                ));
            }
            self.remaining_nat -= atom_mass.exp();
            self.log_remaining =
                if self.remaining_nat <= 0.0 { LOG_ZERO } else { self.remaining_nat.ln() };
            self.removed.push(location.clone());
        }
        self.next_index += 1;
        Ok(Some((g, location)))
    }
}
