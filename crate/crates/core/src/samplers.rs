//! The four exact first-arrival samplers, their generator variants, and the
//! oracle-schedule variants used to study adaptive bounds.
//!
//! Every routine here simulates until it has provably produced the first
//! arrival (or, for streams, the next arrival in order) of the exponential
//! race with measure P(dx) = (f/g)(x) Q(dx). The returned time is
//! Exp(P total), the location is P-distributed, and the two are independent.
//! Clocks are carried in log time throughout so targets with extreme
//! normalizing constants (log Z near -10^3) stay inside f64 range.
//!
//! The rejection and perturbation pair use one global bound M on f/g; the
//! adaptive pair refine a partition of space and use regional bounds M(B).
//! In both pairs the first member discards rejected work and the second
//! keeps every perturbed arrival until it is provably in order.

use crate::distributions::{sample_categorical_log, sample_exp_log_rate};
use crate::error::{Error, Result};
use crate::logdomain::{log_add, LOG_ZERO};
use crate::measures::{Point, ProposalMeasure, Region, TargetProblem};
use crate::processes::{assign_child_times, Arrival, MinQueue};
use crate::rng::Rng;
use std::time::Instant;

/// Iteration cap per call; hitting it means a malformed bound or split
/// contract (or an astronomically loose bound), not bad luck.
pub const PROGRESS_CAP: u64 = 1_000_000;

/// Slack when auditing log f - log g against a claimed regional bound;
/// covers accumulated rounding in bound computation, nothing more.
const BOUND_SLACK: f64 = 1e-6;

/// One finished sampler run.
#[derive(Clone, Debug)]
pub struct RunRecord {
    /// The accepted first arrival of the race with measure P.
    pub arrival: Arrival,
    /// Evaluations of log f, one per proposal considered.
    pub k_proposals: u64,
    /// Evaluations of a regional bound.
    pub k_bounds: u64,
    pub seed: u64,
    pub wallclock_secs: f64,
}

/// Which sampler to run; parses from the CLI names.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampler {
    Rej,
    Per,
    OsStar,
    AStar,
}

impl Sampler {
    pub const ALL: [Sampler; 4] = [Sampler::Rej, Sampler::Per, Sampler::OsStar, Sampler::AStar];

    pub fn name(self) -> &'static str {
        match self {
            Sampler::Rej => "rej",
            Sampler::Per => "per",
            Sampler::OsStar => "osstar",
            Sampler::AStar => "astar",
        }
    }

    pub fn first(self, problem: &dyn TargetProblem, seed: u64) -> Result<RunRecord> {
        match self {
            Sampler::Rej => rej_first(problem, seed),
            Sampler::Per => per_first(problem, seed),
            Sampler::OsStar => osstar_first(problem, seed),
            Sampler::AStar => astar_first(problem, seed),
        }
    }
}

impl std::fmt::Display for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rej" => Ok(Sampler::Rej),
            "per" => Ok(Sampler::Per),
            "osstar" | "os*" => Ok(Sampler::OsStar),
            "astar" | "a*" => Ok(Sampler::AStar),
            other => Err(Error::invalid(format!(
                "unknown sampler {other:?}; expected rej, per, osstar, or astar"
            ))),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Sampler {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let name = String::deserialize(deserializer)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-run context: the problem, its root, and the evaluation counters. All
/// density-ratio evaluations pass through here so every proposal is audited
/// against the bound the sampler is relying on.
struct Run<'p> {
    problem: &'p dyn TargetProblem,
    root: Region,
    log_q_root: f64,
    k_proposals: u64,
    k_bounds: u64,
}

impl<'p> Run<'p> {
    fn new(problem: &'p dyn TargetProblem) -> Result<Self> {
        let root = problem.root_region();
        root.validate()?;
        let log_q_root = problem.proposal().log_mass(&root)?;
        if !(log_q_root > LOG_ZERO) || log_q_root == f64::INFINITY {
            return Err(Error::invalid(format!(
                "proposal mass of the root must be positive and finite, got log {log_q_root}"
            )));
        }
        Ok(Run { problem, root, log_q_root, k_proposals: 0, k_bounds: 0 })
    }

    fn q(&self) -> &dyn ProposalMeasure {
        self.problem.proposal()
    }

    /// `log_ratio` against the root region.
    fn log_ratio_root(&mut self, x: &Point, log_m: f64) -> Result<f64> {
        self.k_proposals += 1;
        debug_assert!(self.root.contains(x), "proposal {x:?} escaped the root");
        let r = self.problem.log_f(x) - self.problem.proposal().log_density(x);
        if r > log_m + BOUND_SLACK {
            return Err(Error::contract(format!(
                "density ratio exp({r}) exceeds the claimed bound exp({log_m}) at {x:?}"
            )));
        }
        Ok(r)
    }

    /// log f(x) - log g(x), audited against the claimed bound for the region
    /// the proposal was drawn from.
    fn log_ratio(&mut self, x: &Point, region: &Region, log_m: f64) -> Result<f64> {
        self.k_proposals += 1;
        debug_assert!(region.contains(x), "proposal {x:?} escaped {region:?}");
        let r = self.problem.log_f(x) - self.problem.proposal().log_density(x);
        if r > log_m + BOUND_SLACK {
            return Err(Error::contract(format!(
                "density ratio exp({r}) exceeds the claimed bound exp({log_m}) at {x:?} in {region:?}"
            )));
        }
        Ok(r)
    }

    fn bound(&mut self, region: &Region) -> Result<f64> {
        self.k_bounds += 1;
        self.problem.log_bound(region)
    }

    /// The global bound over the root, which the non-adaptive samplers need
    /// finite to run at all.
    fn root_bound(&mut self) -> Result<f64> {
        let root = self.root.clone();
        let log_m = self.bound(&root)?;
        if !log_m.is_finite() {
            return Err(Error::invalid(format!(
                "global density-ratio bound must be finite, got log {log_m}"
            )));
        }
        Ok(log_m)
    }

    fn record(self, arrival: Arrival, seed: u64, start: Instant) -> RunRecord {
        RunRecord {
            arrival,
            k_proposals: self.k_proposals,
            k_bounds: self.k_bounds,
            seed,
            wallclock_secs: start.elapsed().as_secs_f64(),
        }
    }
}

fn progress_failure(what: &str) -> Error {
    Error::ProgressFailure {
        iterations: PROGRESS_CAP,
        context: format!("{what} did not finish; check the bound and split contracts"),
    }
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::invalid("bound schedule must not be empty"));
    }
    if schedule.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("bound schedule entries must be finite"));
    }
    if schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("bound schedule must be nonincreasing"));
    }
    Ok(())
}

fn schedule_at(schedule: &[f64], i: u64) -> f64 {
    schedule[(i as usize - 1).min(schedule.len() - 1)]
}

/// Accept-reject over the race with measure M Q: every arrival is kept with
/// probability f/(gM), and the kept arrivals are exactly the race with
/// measure P, yielded in time order.
pub struct RejStream<'p> {
    run: Run<'p>,
    rng: Rng,
    log_m: f64,
    log_t: f64,
    emitted: u64,
}

pub fn rej_stream(problem: &dyn TargetProblem, seed: u64) -> Result<RejStream<'_>> {
    let mut run = Run::new(problem)?;
    let log_m = run.root_bound()?;
    Ok(RejStream { run, rng: Rng::seed_from_u64(seed), log_m, log_t: LOG_ZERO, emitted: 0 })
}

impl RejStream<'_> {
    pub fn next_arrival(&mut self) -> Result<Arrival> {
        let log_rate = self.log_m + self.run.log_q_root;
        for _ in 0..PROGRESS_CAP {
            self.log_t = log_add(self.log_t, sample_exp_log_rate(log_rate, &mut self.rng)?);
            let x = self.run.q().sample_in(&self.run.root, &mut self.rng)?;
            let u = self.rng.uniform01();
            let r = self.run.log_ratio_root(&x, self.log_m)?;
            if u.ln() < r - self.log_m {
                let arrival = Arrival { index: self.emitted, log_time: self.log_t, location: x };
                self.emitted += 1;
                return Ok(arrival);
            }
        }
        Err(progress_failure("rejection sampling"))
    }
}

pub fn rej_first(problem: &dyn TargetProblem, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut stream = rej_stream(problem, seed)?;
    let arrival = stream.next_arrival()?;
    Ok(stream.run.record(arrival, seed, start))
}

/// Oracle variant: the bound used at iteration i is schedule[i-1] (the last
/// entry persists). Every accept decision is final, so tightening the bound
/// only helps future proposals.
pub fn oracle_rej(
    problem: &dyn TargetProblem,
    log_bound_schedule: &[f64],
    seed: u64,
) -> Result<RunRecord> {
    validate_schedule(log_bound_schedule)?;
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let mut run = Run::new(problem)?;
    let mut log_t = LOG_ZERO;
    for i in 1..=PROGRESS_CAP {
        let log_m = schedule_at(log_bound_schedule, i);
        log_t = log_add(log_t, sample_exp_log_rate(log_m + run.log_q_root, &mut rng)?);
        let x = run.q().sample_in(&run.root, &mut rng)?;
        let u = rng.uniform01();
        let r = run.log_ratio_root(&x, log_m)?;
        if u.ln() < r - log_m {
            return Ok(run.record(Arrival { index: 0, log_time: log_t, location: x }, seed, start));
        }
    }
    Err(progress_failure("oracle rejection sampling"))
}

/// The perturbation loop shared by `per_first` (constant schedule) and
/// `oracle_per`. Tracks only the earliest perturbed arrival; the stored
/// minimum is re-tested against each new bound, so history is never lost.
fn per_loop(
    mut run: Run<'_>,
    mut rng: Rng,
    log_bound_schedule: &[f64],
    seed: u64,
    start: Instant,
) -> Result<RunRecord> {
    let mut log_t_next = sample_exp_log_rate(run.log_q_root, &mut rng)?;
    let mut best: Option<(f64, Point)> = None;
    for i in 1..=PROGRESS_CAP {
        let log_m = schedule_at(log_bound_schedule, i);
        let log_t = log_t_next;
        let x = run.q().sample_in(&run.root, &mut rng)?;
        let r = run.log_ratio_root(&x, log_m)?;
        let perturbed = log_t - r;
        if best.as_ref().map_or(true, |(b, _)| perturbed < *b) {
            best = Some((perturbed, x));
        }
        log_t_next = log_add(log_t, sample_exp_log_rate(run.log_q_root, &mut rng)?);
        let (log_best, _) = best.as_ref().expect("at least one candidate");
        if log_t_next - log_m >= *log_best {
            let (log_time, location) = best.expect("checked above");
            return Ok(run.record(Arrival { index: 0, log_time, location }, seed, start));
        }
    }
    Err(progress_failure("perturbation sampling"))
}

/// Perturbation sampling: arrivals of the race with measure Q get their
/// clocks multiplied by g(X)/f(X); the earliest perturbed arrival so far is
/// returned once the next raw arrival divided by M can no longer beat it.
pub fn per_first(problem: &dyn TargetProblem, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut run = Run::new(problem)?;
    let log_m = run.root_bound()?;
    per_loop(run, Rng::seed_from_u64(seed), &[log_m], seed, start)
}

/// Oracle variant of `per_first`; schedule semantics as `oracle_rej`.
pub fn oracle_per(
    problem: &dyn TargetProblem,
    log_bound_schedule: &[f64],
    seed: u64,
) -> Result<RunRecord> {
    validate_schedule(log_bound_schedule)?;
    let start = Instant::now();
    let run = Run::new(problem)?;
    per_loop(run, Rng::seed_from_u64(seed), log_bound_schedule, seed, start)
}

/// Generator form of perturbation sampling: every perturbed arrival is kept
/// on a queue and popped once the advancing lower bound T/M passes it, which
/// yields the race with measure P in time order.
pub struct PerStream<'p> {
    run: Run<'p>,
    rng: Rng,
    log_m: f64,
    /// Arrival time of the next raw point, already drawn.
    log_t_next: f64,
    pending: MinQueue<Point>,
    emitted: u64,
}

pub fn per_stream(problem: &dyn TargetProblem, seed: u64) -> Result<PerStream<'_>> {
    let mut run = Run::new(problem)?;
    let log_m = run.root_bound()?;
    let mut rng = Rng::seed_from_u64(seed);
    let log_t_next = sample_exp_log_rate(run.log_q_root, &mut rng)?;
    Ok(PerStream { run, rng, log_m, log_t_next, pending: MinQueue::new(), emitted: 0 })
}

impl PerStream<'_> {
    pub fn next_arrival(&mut self) -> Result<Arrival> {
        for _ in 0..PROGRESS_CAP {
            if let Some(min_pending) = self.pending.peek_key() {
                if self.log_t_next - self.log_m >= min_pending {
                    let (log_time, location) = self.pending.pop().expect("peeked");
                    let arrival = Arrival { index: self.emitted, log_time, location };
                    self.emitted += 1;
                    return Ok(arrival);
                }
            }
            let log_t = self.log_t_next;
            let x = self.run.q().sample_in(&self.run.root, &mut self.rng)?;
            let r = self.run.log_ratio_root(&x, self.log_m)?;
            self.pending.push(log_t - r, x);
            self.log_t_next =
                log_add(log_t, sample_exp_log_rate(self.run.log_q_root, &mut self.rng)?);
        }
        Err(progress_failure("perturbation stream"))
    }
}

/// Adaptive rejection: maintain a partition, propose from the piecewise
/// envelope g(x) M(B), and split the proposal's region on every rejection.
pub fn osstar_first(problem: &dyn TargetProblem, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(seed);
    let mut run = Run::new(problem)?;
    let log_m_root = run.root_bound()?;
    // (region, log Q(B), log M(B))
    let mut partition: Vec<(Region, f64, f64)> =
        vec![(run.root.clone(), run.log_q_root, log_m_root)];
    let mut log_t = LOG_ZERO;
    for _ in 0..PROGRESS_CAP {
        let weights: Vec<f64> = partition.iter().map(|(_, lq, lm)| lq + lm).collect();
        let pick = sample_categorical_log(&weights, &mut rng)?;
        let x = run.q().sample_in(&partition[pick].0, &mut rng)?;
        let log_envelope = crate::logdomain::log_sum(weights.iter().copied());
        log_t = log_add(log_t, sample_exp_log_rate(log_envelope, &mut rng)?);
        let u = rng.uniform01();
        let log_m_b = partition[pick].2;
        let r = run.log_ratio(&x, &partition[pick].0, log_m_b)?;
        if u.ln() < r - log_m_b {
            return Ok(run.record(Arrival { index: 0, log_time: log_t, location: x }, seed, start));
        }
        let (region, log_q_b, log_m_b) = partition.swap_remove(pick);
        let parts = run.problem.split(&region, &x)?;
        if parts.len() == 1 && parts[0] == region {
            // An atomic region cannot refine; the partition stays put.
            partition.push((region, log_q_b, log_m_b));
            continue;
        }
        let mut log_children = LOG_ZERO;
        for part in parts {
            let lq = run.q().log_mass(&part)?;
            if lq == LOG_ZERO {
                continue; // no arrivals will ever land here
            }
            log_children = log_add(log_children, lq);
            let lm = run.bound(&part)?;
            partition.push((part, lq, lm));
        }
        debug_assert!(
            (log_children - log_q_b).abs() < 1e-6,
            "split changed the proposal mass: {log_children} vs {log_q_b}"
        );
    }
    Err(progress_failure("adaptive rejection sampling"))
}

struct FrontierEntry {
    region: Region,
    log_q: f64,
    log_m: f64,
    /// Log arrival time of the next raw point inside this region.
    log_t: f64,
}

/// Best-first search over the race organized into a space-partitioning
/// tree. The frontier queue keys each region by T/M(B), a lower bound on
/// every future perturbed arrival inside it; the candidate queue keys
/// realized perturbed arrivals by their times. Yields the race with measure
/// P in time order, refining regions only while refinement can still beat
/// the best stored candidate.
pub struct AStarStream<'p> {
    run: Run<'p>,
    rng: Rng,
    frontier: MinQueue<FrontierEntry>,
    candidates: MinQueue<Point>,
    emitted: u64,
}

pub fn astar_stream(problem: &dyn TargetProblem, seed: u64) -> Result<AStarStream<'_>> {
    let mut run = Run::new(problem)?;
    let log_m = run.root_bound()?;
    let mut rng = Rng::seed_from_u64(seed);
    let log_t = sample_exp_log_rate(run.log_q_root, &mut rng)?;
    let mut frontier = MinQueue::new();
    frontier.push(
        log_t - log_m,
        FrontierEntry { region: run.root.clone(), log_q: run.log_q_root, log_m, log_t },
    );
    Ok(AStarStream { run, rng, frontier, candidates: MinQueue::new(), emitted: 0 })
}

impl AStarStream<'_> {
    fn min_frontier(&self) -> f64 {
        self.frontier.peek_key().unwrap_or(f64::INFINITY)
    }

    pub fn next_arrival(&mut self) -> Result<Arrival> {
        for _ in 0..PROGRESS_CAP {
            // Termination: the earliest stored candidate beats every bound.
            if let Some(min_candidate) = self.candidates.peek_key() {
                if self.min_frontier() >= min_candidate {
                    let (log_time, location) = self.candidates.pop().expect("peeked");
                    debug_assert!(log_time <= self.min_frontier());
                    let arrival = Arrival { index: self.emitted, log_time, location };
                    self.emitted += 1;
                    return Ok(arrival);
                }
            }
            let Some((_, entry)) = self.frontier.pop() else {
                return Err(Error::contract(
                    "search frontier emptied before the candidate queue",
                ));
            };
            let x = self.run.q().sample_in(&entry.region, &mut self.rng)?;
            let r = self.run.log_ratio(&x, &entry.region, entry.log_m)?;
            self.candidates.push(entry.log_t - r, x.clone());
            let log_t_next =
                log_add(entry.log_t, sample_exp_log_rate(entry.log_q, &mut self.rng)?);
            let min_candidate = self.candidates.peek_key().expect("just pushed");
            if self.min_frontier().min(log_t_next - entry.log_m) < min_candidate {
                let parts = self.run.problem.split(&entry.region, &x)?;
                if parts.len() == 1 && parts[0] == entry.region {
                    // Atomic region: splitting degenerates to advancing its clock.
                    self.frontier.push(
                        log_t_next - entry.log_m,
                        FrontierEntry { log_t: log_t_next, ..entry },
                    );
                } else {
                    let mut children = Vec::with_capacity(parts.len());
                    let mut log_children = LOG_ZERO;
                    for part in parts {
                        let lq = self.run.q().log_mass(&part)?;
                        if lq == LOG_ZERO {
                            continue;
                        }
                        log_children = log_add(log_children, lq);
                        children.push((part, lq));
                    }
                    if children.is_empty() {
                        return Err(Error::contract(
                            "split produced no parts with positive mass",
                        ));
                    }
                    debug_assert!(
                        (log_children - entry.log_q).abs() < 1e-6,
                        "split changed the proposal mass: {log_children} vs {}",
                        entry.log_q
                    );
                    for (region, log_q, log_t) in
                        assign_child_times(children, log_t_next, &mut self.rng)?
                    {
                        let log_m = self.run.bound(&region)?;
                        self.frontier.push(
                            log_t - log_m,
                            FrontierEntry { region, log_q, log_m, log_t },
                        );
                    }
                }
            } else {
                self.frontier.push(
                    log_t_next - entry.log_m,
                    FrontierEntry { log_t: log_t_next, ..entry },
                );
            }
        }
        Err(progress_failure("best-first sampling"))
    }
}

pub fn astar_first(problem: &dyn TargetProblem, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let mut stream = astar_stream(problem, seed)?;
    let arrival = stream.next_arrival()?;
    Ok(stream.run.record(arrival, seed, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Space;
    use crate::problems::{make_clutter, make_discrete, make_ising, make_regression};
    use crate::problems::{default_clutter_data, ising_random_params, regression_dataset, DiscreteTable};
    use crate::stats::{
        chi2_gof, chi2_independence, chi2_two_sample, geom_tail_check, ks_test, mean_se, TailMode,
    };

    fn table(masses: &[f64]) -> DiscreteTable {
        make_discrete(masses).unwrap()
    }

    fn atom(p: &DiscreteTable, a: &Arrival) -> usize {
        p.atom_index(&a.location).unwrap()
    }

    #[test]
    fn equal_densities_accept_the_first_proposal() {
        let p = table(&[1.0, 1.0, 1.0, 1.0]);
        for s in Sampler::ALL {
            for seed in 0..40 {
                let rec = s.first(&p, seed).unwrap();
                assert_eq!(rec.k_proposals, 1, "{s} seed {seed}");
                assert_eq!(rec.seed, seed);
                assert!(rec.wallclock_secs >= 0.0);
                assert!(rec.arrival.log_time.is_finite());
            }
        }
    }

    #[test]
    fn discrete_frequencies_match_the_table() {
        let p = table(&[1.0, 2.0, 3.0]);
        let probs = p.probabilities();
        for s in Sampler::ALL {
            let mut counts = [0u64; 3];
            for seed in 0..20_000u64 {
                let rec = s.first(&p, 90_000 + seed).unwrap();
                counts[atom(&p, &rec.arrival)] += 1;
            }
            let report = chi2_gof(&counts, &probs).unwrap();
            assert!(report.pass, "{s}: {report:?}");
        }
    }

    #[test]
    fn proposal_counts_follow_the_geometric_law() {
        // P total 6, envelope Q M = 3 * 3, so K is Geometric(2/3), mean 1.5.
        let p = table(&[1.0, 2.0, 3.0]);
        let rho = 6.0 / 9.0;
        let reps = 30_000u64;
        let mut k_rej = Vec::with_capacity(reps as usize);
        let mut k_per = Vec::with_capacity(reps as usize);
        for seed in 0..reps {
            k_rej.push(rej_first(&p, seed).unwrap().k_proposals);
            k_per.push(per_first(&p, 7 * reps + seed).unwrap().k_proposals);
        }
        for (name, ks) in [("rej", &k_rej), ("per", &k_per)] {
            let values: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let (mean, se) = mean_se(&values);
            assert!((mean - 1.0 / rho).abs() < 3.0 * se, "{name} mean {mean} se {se}");
            let report = geom_tail_check(ks, rho, TailMode::Exact).unwrap();
            assert!(report.pass, "{name}: {report:?}");
        }
        // Same count law for both samplers (binned two-sample chi-square).
        let cap = 8;
        let mut h_rej = vec![0u64; cap + 1];
        let mut h_per = vec![0u64; cap + 1];
        for i in 0..reps as usize {
            h_rej[(k_rej[i] as usize - 1).min(cap)] += 1;
            h_per[(k_per[i] as usize - 1).min(cap)] += 1;
        }
        let report = chi2_two_sample(&h_rej, &h_per).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn streams_agree_with_the_single_shot_functions() {
        let p = table(&[1.0, 2.0, 3.0]);
        for seed in [3u64, 77, 901, 4242] {
            let a = rej_first(&p, seed).unwrap().arrival;
            let b = rej_stream(&p, seed).unwrap().next_arrival().unwrap();
            assert_eq!(a.log_time, b.log_time);
            assert_eq!(a.location, b.location);

            let a = per_first(&p, seed).unwrap().arrival;
            let b = per_stream(&p, seed).unwrap().next_arrival().unwrap();
            assert_eq!(a.log_time, b.log_time);
            assert_eq!(a.location, b.location);

            let a = astar_first(&p, seed).unwrap().arrival;
            let b = astar_stream(&p, seed).unwrap().next_arrival().unwrap();
            assert_eq!(a.log_time, b.log_time);
            assert_eq!(a.location, b.location);
        }
    }

    #[test]
    fn stream_gaps_are_exponential_in_the_target_mass() {
        // P total 6: yielded times of every generator are a rate-6 Poisson
        // arrival sequence, so gaps are i.i.d. Exp(6).
        let p = table(&[1.0, 2.0, 3.0]);
        let exp6 = |t: f64| -(-6.0 * t).exp_m1();
        let mut stream = rej_stream(&p, 11).unwrap();
        let mut last = 0.0;
        let mut gaps = Vec::with_capacity(1500);
        for i in 0..1500 {
            let a = stream.next_arrival().unwrap();
            assert_eq!(a.index, i);
            let t = a.log_time.exp();
            assert!(t > last);
            gaps.push(t - last);
            last = t;
        }
        let report = ks_test(&gaps, exp6);
        assert!(report.pass, "rej stream: {report:?}");

        let mut stream = astar_stream(&p, 12).unwrap();
        let mut last = 0.0;
        let mut gaps = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let t = stream.next_arrival().unwrap().log_time.exp();
            assert!(t > last);
            gaps.push(t - last);
            last = t;
        }
        let report = ks_test(&gaps, exp6);
        assert!(report.pass, "astar stream: {report:?}");
    }

    #[test]
    fn stream_positions_are_iid_target_draws() {
        let p = table(&[1.0, 2.0, 3.0]);
        let probs = p.probabilities();
        let reps = 6000;
        let mut counts = [[0u64; 3]; 3];
        for seed in 0..reps {
            let mut stream = per_stream(&p, 30_000 + seed).unwrap();
            for position in counts.iter_mut() {
                let a = stream.next_arrival().unwrap();
                position[atom(&p, &a)] += 1;
            }
        }
        for (i, position) in counts.iter().enumerate() {
            let report = chi2_gof(position, &probs).unwrap();
            assert!(report.pass, "position {i}: {report:?}");
        }
    }

    #[test]
    fn oracle_schedules_match_their_survival_laws() {
        // P total 10, proposal mass 4; bounds 16, 8, 4 give acceptance rates
        // 0.15625, 0.3125, 0.625 per iteration.
        let p = table(&[1.0, 2.0, 3.0, 4.0]);
        let schedule = [16f64.ln(), 8f64.ln(), 4f64.ln()];
        let reps = 40_000u64;
        let mut k_orej = Vec::with_capacity(reps as usize);
        let mut k_oper = Vec::with_capacity(reps as usize);
        for seed in 0..reps {
            k_orej.push(oracle_rej(&p, &schedule, seed).unwrap().k_proposals);
            k_oper.push(oracle_per(&p, &schedule, 5 * reps + seed).unwrap().k_proposals);
        }
        // Keep-discarding: survival is the running product of (1 - rate_i).
        let orej_targets = [0.84375, 0.580078125, 0.217529296875];
        // Keep-remembering: survival as if the latest bound was always known.
        let oper_targets = [0.84375, 0.47265625, 0.052734375];
        for k in 1..=3usize {
            for (ks, target) in [(&k_orej, orej_targets[k - 1]), (&k_oper, oper_targets[k - 1])] {
                let hits = ks.iter().filter(|&&kk| kk > k as u64).count() as f64;
                let phat = hits / reps as f64;
                let se = (target * (1.0 - target) / reps as f64).sqrt();
                assert!(
                    (phat - target).abs() < 3.0 * se,
                    "k = {k}: {phat} vs {target} (se {se})"
                );
            }
        }
        // A constant schedule is the plain sampler, draw for draw.
        for seed in 0..25u64 {
            let m = [4f64.ln()];
            let a = oracle_rej(&p, &m, seed).unwrap();
            let b = rej_first(&p, seed).unwrap();
            assert_eq!(a.arrival.log_time, b.arrival.log_time);
            assert_eq!(a.arrival.location, b.arrival.location);
            assert_eq!(a.k_proposals, b.k_proposals);
            let a = oracle_per(&p, &m, seed).unwrap();
            let b = per_first(&p, seed).unwrap();
            assert_eq!(a.arrival.log_time, b.arrival.log_time);
            assert_eq!(a.arrival.location, b.arrival.location);
            assert_eq!(a.k_proposals, b.k_proposals);
        }
        // Malformed schedules are rejected up front.
        assert!(oracle_rej(&p, &[], 0).is_err());
        assert!(oracle_rej(&p, &[1.0, 2.0], 0).is_err());
        // A schedule that undercuts the true ratio is caught in flight.
        let unsound = [4f64.ln(), 2f64.ln()];
        let mut caught = 0;
        for seed in 0..60 {
            match oracle_rej(&p, &unsound, seed) {
                Err(Error::ContractViolation(_)) => caught += 1,
                Ok(_) => {}
                Err(other) => panic!("unexpected error {other}"),
            }
        }
        assert!(caught > 0, "unsound schedule was never detected");
    }

    /// A problem wrapper that freezes the envelope: one global bound
    /// everywhere and no refinement.
    struct FrozenEnvelope<'p> {
        inner: &'p DiscreteTable,
        log_m: f64,
    }

    impl crate::measures::TargetProblem for FrozenEnvelope<'_> {
        fn name(&self) -> &'static str {
            "frozen"
        }
        fn space(&self) -> Space {
            self.inner.space()
        }
        fn root_region(&self) -> Region {
            self.inner.root_region()
        }
        fn log_f(&self, x: &Point) -> f64 {
            self.inner.log_f(x)
        }
        fn proposal(&self) -> &dyn ProposalMeasure {
            self.inner.proposal()
        }
        fn log_bound(&self, _region: &Region) -> Result<f64> {
            Ok(self.log_m)
        }
        fn split(&self, region: &Region, _x: &Point) -> Result<Vec<Region>> {
            Ok(vec![region.clone()])
        }
    }

    #[test]
    fn frozen_envelope_reduces_the_adaptive_samplers_to_the_plain_pair() {
        let p = table(&[1.0, 2.0, 3.0]);
        let frozen = FrozenEnvelope { inner: &p, log_m: 3f64.ln() };
        let reps = 25_000u64;
        let cap = 8;
        let mut h_os = vec![0u64; cap + 1];
        let mut h_rej = vec![0u64; cap + 1];
        for seed in 0..reps {
            let k = osstar_first(&frozen, seed).unwrap().k_proposals;
            h_os[(k as usize - 1).min(cap)] += 1;
            let k = rej_first(&p, 3 * reps + seed).unwrap().k_proposals;
            h_rej[(k as usize - 1).min(cap)] += 1;
        }
        let report = chi2_two_sample(&h_os, &h_rej).unwrap();
        assert!(report.pass, "osstar vs rej: {report:?}");
    }

    #[test]
    fn returned_times_are_exponential_in_the_total_mass() {
        let p = table(&[1.0, 2.0, 3.0, 4.0]);
        for s in Sampler::ALL {
            let ts: Vec<f64> = (0..10_000u64)
                .map(|seed| s.first(&p, 700_000 + seed).unwrap().arrival.log_time.exp())
                .collect();
            let report = ks_test(&ts, |t| -(-10.0 * t).exp_m1());
            assert!(report.pass, "{s}: {report:?}");
        }
    }

    #[test]
    fn time_and_location_are_independent() {
        let p = table(&[1.0, 2.0, 3.0]);
        let reps = 20_000u64;
        let mut pairs = Vec::with_capacity(reps as usize);
        for seed in 0..reps {
            let rec = astar_first(&p, 50_000 + seed).unwrap();
            pairs.push((rec.arrival.log_time, atom(&p, &rec.arrival)));
        }
        let mut times: Vec<f64> = pairs.iter().map(|(t, _)| *t).collect();
        times.sort_by(f64::total_cmp);
        let quartile = |t: f64| {
            let q1 = times[times.len() / 4];
            let q2 = times[times.len() / 2];
            let q3 = times[3 * times.len() / 4];
            usize::from(t > q1) + usize::from(t > q2) + usize::from(t > q3)
        };
        let mut cells = vec![vec![0u64; 3]; 4];
        for (t, a) in pairs {
            cells[quartile(t)][a] += 1;
        }
        let report = chi2_independence(&cells).unwrap();
        assert!(report.pass, "{report:?}");
    }

    /// A discrete table whose advertised bounds are half the true regional
    /// maxima: sound-looking shape, unsound values.
    struct HalvedBound<'p> {
        inner: &'p DiscreteTable,
    }

    impl crate::measures::TargetProblem for HalvedBound<'_> {
        fn name(&self) -> &'static str {
            "halved"
        }
        fn space(&self) -> Space {
            self.inner.space()
        }
        fn root_region(&self) -> Region {
            self.inner.root_region()
        }
        fn log_f(&self, x: &Point) -> f64 {
            self.inner.log_f(x)
        }
        fn proposal(&self) -> &dyn ProposalMeasure {
            self.inner.proposal()
        }
        fn log_bound(&self, region: &Region) -> Result<f64> {
            Ok(self.inner.log_bound(region)? - 2f64.ln())
        }
        fn split(&self, region: &Region, x: &Point) -> Result<Vec<Region>> {
            self.inner.split(region, x)
        }
    }

    #[test]
    fn unsound_bounds_are_detected_in_flight() {
        let p = table(&[1.0, 2.0, 3.0]);
        let bad = HalvedBound { inner: &p };
        for s in Sampler::ALL {
            let mut caught = 0;
            for seed in 0..40 {
                match s.first(&bad, seed) {
                    Err(Error::ContractViolation(_)) => caught += 1,
                    Ok(_) => {}
                    Err(other) => panic!("{s}: unexpected error {other}"),
                }
            }
            assert!(caught > 0, "{s} never flagged the halved bound");
        }
    }

    /// Sound but hopeless: the acceptance probability is e^-60, so no
    /// sampler can finish within the iteration cap.
    struct NeverAccepts {
        proposal: crate::proposals::CountingMeasure,
    }

    impl crate::measures::TargetProblem for NeverAccepts {
        fn name(&self) -> &'static str {
            "never"
        }
        fn space(&self) -> Space {
            Space::Continuous { dim: 1 }
        }
        fn root_region(&self) -> Region {
            Region::Interval { a: 0.0, b: 2.0 }
        }
        fn log_f(&self, _x: &Point) -> f64 {
            -60.0
        }
        fn proposal(&self) -> &dyn ProposalMeasure {
            &self.proposal
        }
        fn log_bound(&self, _region: &Region) -> Result<f64> {
            Ok(0.0)
        }
        fn split(&self, region: &Region, _x: &Point) -> Result<Vec<Region>> {
            Ok(vec![region.clone()])
        }
    }

    #[test]
    fn hopeless_bounds_hit_the_progress_cap() {
        let p = NeverAccepts { proposal: crate::proposals::CountingMeasure { m: 2 } };
        for result in [rej_first(&p, 1), per_first(&p, 1), osstar_first(&p, 1)] {
            match result {
                Err(Error::ProgressFailure { iterations, .. }) => {
                    assert_eq!(iterations, PROGRESS_CAP)
                }
                other => panic!("expected progress failure, got {other:?}"),
            }
        }
    }

    #[test]
    fn sampler_names_round_trip() {
        for s in Sampler::ALL {
            assert_eq!(s.name().parse::<Sampler>().unwrap(), s);
        }
        assert_eq!("OS*".parse::<Sampler>().unwrap(), Sampler::OsStar);
        assert_eq!("A*".parse::<Sampler>().unwrap(), Sampler::AStar);
        assert!("metropolis".parse::<Sampler>().is_err());
    }

    #[test]
    fn adaptive_samplers_run_the_continuous_and_spin_problems() {
        let clutter = make_clutter(default_clutter_data(1), 1).unwrap();
        let reg = make_regression(regression_dataset(10, 7).unwrap()).unwrap();
        let (fields, couplings) = ising_random_params(5, 7);
        let ising = make_ising(5, fields, couplings).unwrap();
        let problems: [&dyn TargetProblem; 3] = [&clutter, &reg, &ising];
        for problem in problems {
            for s in [Sampler::OsStar, Sampler::AStar] {
                let mut total = 0u64;
                for seed in 0..10 {
                    let rec = s.first(problem, seed).unwrap();
                    assert!(rec.arrival.log_time.is_finite());
                    assert!(rec.k_proposals >= 1);
                    assert!(rec.k_bounds >= 1);
                    total += rec.k_proposals;
                }
                assert!(total < 10_000, "{} {s}: k exploded ({total})", problem.name());
            }
        }
    }
}
