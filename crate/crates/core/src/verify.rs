//! Runtime verification: re-derives the library's distributional claims from
//! fresh randomness and reports one line per law.
//!
//! Everything here is also covered by unit tests, but those run at build
//! time with pinned seeds. This suite is the user-facing variant: seedable,
//! sized to finish in seconds, and wired to a nonzero exit code so it can
//! gate a deployment. Checks that consume randomness retry up to three times
//! at alpha = 0.001, which keeps the false-alarm rate negligible without
//! hiding real defects (a systematic bug fails all attempts).

use std::collections::BTreeMap;

use crate::distributions::{sample_gumbel, sample_trunc_gumbel, std_normal_mass};
use crate::error::Result;
use crate::experiment::{run_experiment, ExperimentConfig, DISCRETE_FIXTURE};
use crate::logdomain::log_sum;
use crate::lp::{ising_brute_force_max, ising_relaxation};
use crate::measures::{Point, ProposalMeasure, Region, TargetProblem};
use crate::problems::{
    default_clutter_data, ising_random_params, make_clutter, make_discrete, make_ising,
    make_regression, regression_dataset,
};
use crate::processes::{map_points, poisson_realize, thin, GumbelStream, RaceStream};
use crate::proposals::{GaussianKernel, Lebesgue};
use crate::rng::Rng;
use crate::samplers::{oracle_per, oracle_rej, rej_first, Sampler};
use crate::stats::{
    chi2_gof, chi2_independence, geom_tail_check, ks_test, ks_two_sample, mean_se, pearson,
    with_retries, StatReport, TailMode,
};

/// Euler-Mascheroni constant, the mean of a standard Gumbel.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Optional sabotage for exercising the failure path end to end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultInjection {
    None,
    /// Halve the discrete fixture's regional bounds before auditing them.
    CorruptedBound,
}

pub struct VerifySummary {
    pub reports: Vec<StatReport>,
    pub pass: bool,
}

/// A problem with its bounds scaled down, which breaks the covering contract
/// M(B) >= sup f/g. Used to prove the audit actually fires.
struct HalvedBound<T: TargetProblem>(T);

impl<T: TargetProblem> TargetProblem for HalvedBound<T> {
    fn name(&self) -> &'static str {
        "halved-bound"
    }
    fn space(&self) -> crate::measures::Space {
        self.0.space()
    }
    fn root_region(&self) -> Region {
        self.0.root_region()
    }
    fn log_f(&self, x: &Point) -> f64 {
        self.0.log_f(x)
    }
    fn proposal(&self) -> &dyn ProposalMeasure {
        self.0.proposal()
    }
    fn log_bound(&self, region: &Region) -> Result<f64> {
        Ok(self.0.log_bound(region)? - std::f64::consts::LN_2)
    }
    fn split(&self, region: &Region, x: &Point) -> Result<Vec<Region>> {
        self.0.split(region, x)
    }
}

fn unit_interval() -> Region {
    Region::Interval { a: 0.0, b: 1.0 }
}

fn band_report(name: &str, z: f64, detail: String) -> StatReport {
    StatReport {
        name: name.to_string(),
        statistic: z,
        p_value: f64::NAN,
        pass: z <= 3.0,
        detail,
    }
}

/// Consecutive race arrivals are spaced Exp(Q(window)) apart.
fn race_gap_law(seed: u64) -> Result<StatReport> {
    let q = Lebesgue { dim: 1 };
    let mut stream = RaceStream::flat(&q, unit_interval(), Rng::seed_from_u64(seed))?;
    let mut gaps = Vec::with_capacity(5000);
    let mut prev = 0.0;
    for _ in 0..5000 {
        let t = stream.next_arrival()?.log_time.exp();
        gaps.push(t - prev);
        prev = t;
    }
    let mut report = ks_test(&gaps, |t| 1.0 - (-t).exp());
    report.name = "race gaps are Exp(Q)".into();
    Ok(report)
}

/// Race locations are i.i.d. proportional to the proposal restricted to the
/// window, independent of the gaps.
fn race_location_law(seed: u64) -> Result<StatReport> {
    let q = GaussianKernel { dim: 1, sigma: 1.0 };
    let window = Region::Interval { a: -2.0, b: 2.0 };
    let mut stream = RaceStream::flat(&q, window, Rng::seed_from_u64(seed))?;
    let mut xs = Vec::with_capacity(4000);
    for _ in 0..4000 {
        xs.push(stream.next_arrival()?.location.coords()?[0]);
    }
    let total = std_normal_mass(-2.0, 2.0);
    let mut report = ks_test(&xs, |x| std_normal_mass(-2.0, x) / total);
    report.name = "race locations follow Q".into();
    Ok(report)
}

fn race_independence(seed: u64) -> Result<StatReport> {
    let q = Lebesgue { dim: 1 };
    let mut stream = RaceStream::flat(&q, unit_interval(), Rng::seed_from_u64(seed))?;
    // Median gap of Exp(1) is ln 2; median location is 1/2. A 2x2 count
    // table picks up any coupling between where and when.
    let mut table = vec![vec![0u64; 2]; 2];
    let mut prev = 0.0;
    for _ in 0..6000 {
        let a = stream.next_arrival()?;
        let t = a.log_time.exp();
        let gap_hi = usize::from(t - prev > std::f64::consts::LN_2);
        let loc_hi = usize::from(a.location.coords()?[0] > 0.5);
        table[gap_hi][loc_hi] += 1;
        prev = t;
    }
    let mut report = chi2_independence(&table)?;
    report.name = "race gaps independent of locations".into();
    Ok(report)
}

/// Counts over disjoint windows are independent Poissons with the windows'
/// masses as means.
fn poisson_counts(seed: u64) -> Result<StatReport> {
    let q = GaussianKernel { dim: 1, sigma: 1.0 };
    let left = Region::Interval { a: -1.5, b: 0.0 };
    let right = Region::Interval { a: 0.0, b: 1.5 };
    let mut rng = Rng::seed_from_u64(seed);
    let reps = 4000;
    let mut counts_left = Vec::with_capacity(reps);
    let mut counts_right = Vec::with_capacity(reps);
    for _ in 0..reps {
        counts_left.push(poisson_realize(&q, &left, &mut rng)?.points.len() as u64);
        counts_right.push(poisson_realize(&q, &right, &mut rng)?.points.len() as u64);
    }
    let mean = crate::distributions::log_gauss_kernel_mass(-1.5, 0.0, 1.0).exp();
    let mut pmf = vec![0.0; 8];
    let mut acc = (-mean).exp();
    for (k, slot) in pmf.iter_mut().enumerate() {
        *slot = acc;
        acc *= mean / (k + 1) as f64;
    }
    let tail = 1.0 - pmf.iter().sum::<f64>();
    pmf.push(tail.max(0.0));
    let mut hist = vec![0u64; pmf.len()];
    for &c in &counts_left {
        hist[(c as usize).min(pmf.len() - 1)] += 1;
    }
    let gof = chi2_gof(&hist, &pmf)?;
    let l: Vec<f64> = counts_left.iter().map(|&c| c as f64).collect();
    let r: Vec<f64> = counts_right.iter().map(|&c| c as f64).collect();
    let corr = pearson(&l, &r);
    let corr_z = corr.abs() * (reps as f64).sqrt();
    let pass = gof.pass && corr_z <= 3.0;
    Ok(StatReport {
        name: "poisson counts on disjoint windows".into(),
        statistic: gof.statistic,
        p_value: gof.p_value,
        pass,
        detail: format!("count GOF p {:.4}, cross-window corr {corr:.4}", gof.p_value),
    })
}

/// Thinning a rate-10 process with keep probability 1/2 leaves a rate-5
/// process: mean 5, variance equal to the mean.
fn thinning_law(seed: u64) -> Result<StatReport> {
    let q = Lebesgue { dim: 1 };
    let window = Region::Interval { a: 0.0, b: 10.0 };
    let mut rng = Rng::seed_from_u64(seed);
    let keep = |_: &Point| 0.5f64.ln();
    let reps = 4000;
    let mut counts = Vec::with_capacity(reps);
    for _ in 0..reps {
        let pattern = poisson_realize(&q, &window, &mut rng)?;
        counts.push(thin(&pattern, &keep, &mut rng)?.points.len() as f64);
    }
    let (mean, se) = mean_se(&counts);
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let dispersion = var / mean;
    let z = (mean - 5.0).abs() / se;
    let pass = z <= 3.0 && (0.95..=1.05).contains(&dispersion);
    Ok(StatReport {
        name: "thinning halves a rate-10 process".into(),
        statistic: z,
        p_value: f64::NAN,
        pass,
        detail: format!("mean {mean:.3} (want 5), dispersion {dispersion:.3} (want ~1)"),
    })
}

/// Mapping a pattern through x^2 produces the image measure: pooled points
/// follow the pushforward law.
fn mapping_law(seed: u64) -> Result<StatReport> {
    let q = Lebesgue { dim: 1 };
    let window = Region::Interval { a: 0.0, b: 2.0 };
    let mut rng = Rng::seed_from_u64(seed);
    let square = |p: &Point| {
        let x = p.coords().expect("coords")[0];
        Point::Continuous(vec![x * x])
    };
    let mut pooled = Vec::new();
    while pooled.len() < 4000 {
        let pattern = poisson_realize(&q, &window, &mut rng)?;
        let image = map_points(&pattern, &square);
        for p in &image.points {
            pooled.push(p.coords()?[0]);
        }
    }
    // Pushforward of uniform mass on (0,2] under squaring: CDF sqrt(y)/2.
    let mut report = ks_test(&pooled, |y| (y.max(0.0)).sqrt() / 2.0);
    report.name = "mapped pattern follows the image law".into();
    Ok(report)
}

/// Conditioned on the count, locations are i.i.d. Q restricted to the
/// window, and distinct points are uncorrelated.
fn conditional_iid(seed: u64) -> Result<StatReport> {
    let q = GaussianKernel { dim: 1, sigma: 1.0 };
    let window = Region::Interval { a: -2.0, b: 2.0 };
    let mut rng = Rng::seed_from_u64(seed);
    let mut pooled = Vec::new();
    let mut firsts = Vec::new();
    let mut seconds = Vec::new();
    while pooled.len() < 4000 {
        let pattern = poisson_realize(&q, &window, &mut rng)?;
        for p in &pattern.points {
            pooled.push(p.coords()?[0]);
        }
        if pattern.points.len() >= 2 {
            firsts.push(pattern.points[0].coords()?[0]);
            seconds.push(pattern.points[1].coords()?[0]);
        }
    }
    let total = std_normal_mass(-2.0, 2.0);
    let gof = ks_test(&pooled, |x| std_normal_mass(-2.0, x) / total);
    let corr = pearson(&firsts, &seconds);
    let corr_z = corr.abs() * (firsts.len() as f64).sqrt();
    let pass = gof.pass && corr_z <= 3.0;
    Ok(StatReport {
        name: "locations i.i.d. given the count".into(),
        statistic: gof.statistic,
        p_value: gof.p_value,
        pass,
        detail: format!("location KS p {:.4}, pair corr {corr:.4}", gof.p_value),
    })
}

/// The truncated-Gumbel chain and -log of cumulative exponential arrivals
/// are the same process, index by index.
fn gumbel_chain_matches_race(seed: u64) -> Result<StatReport> {
    let q = Lebesgue { dim: 1 };
    let mut rng = Rng::seed_from_u64(seed);
    let reps = 1500;
    let depth = 5;
    let mut chain: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); depth];
    let mut race: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); depth];
    for _ in 0..reps {
        let mut g = GumbelStream::new(&q, unit_interval(), rng.split())?;
        for slot in chain.iter_mut() {
            let (value, _) = g.next_value()?.expect("continuous stream never exhausts");
            slot.push(value);
        }
        let mut r = RaceStream::flat(&q, unit_interval(), rng.split())?;
        for slot in race.iter_mut() {
            slot.push(r.next_arrival()?.gumbel());
        }
    }
    let mut worst_p = f64::INFINITY;
    let mut worst_i = 0;
    for i in 0..depth {
        let report = ks_two_sample(&chain[i], &race[i]);
        if report.p_value < worst_p {
            worst_p = report.p_value;
            worst_i = i;
        }
    }
    Ok(StatReport {
        name: "gumbel chain matches the race".into(),
        statistic: f64::NAN,
        p_value: worst_p,
        pass: worst_p > crate::stats::ALPHA,
        detail: format!("worst index {worst_i} of {depth}, two-sample KS p {worst_p:.4}"),
    })
}

/// Inverse-CDF truncated Gumbel vs the obvious rejection construction.
fn trunc_gumbel_vs_rejection(seed: u64) -> Result<StatReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let (location, upper) = (0.4, 0.9);
    let n = 4000;
    let direct: Vec<f64> = (0..n).map(|_| sample_trunc_gumbel(location, upper, &mut rng)).collect();
    let mut rejected = Vec::with_capacity(n);
    while rejected.len() < n {
        let g = sample_gumbel(location, &mut rng);
        if g <= upper {
            rejected.push(g);
        }
    }
    let mut report = ks_two_sample(&direct, &rejected);
    report.name = "truncated gumbel matches rejection".into();
    Ok(report)
}

/// max of Gumbel(phi_i) is Gumbel(log sum exp phi_i); the argmax follows the
/// Gibbs law independent of the max.
fn max_stability_and_argmax(seed: u64) -> Result<StatReport> {
    let phis: Vec<f64> = DISCRETE_FIXTURE.iter().map(|m| m.ln()).collect();
    let log_z = log_sum(phis.iter().copied());
    let mut rng = Rng::seed_from_u64(seed);
    let n = 10_000;
    let mut maxima = Vec::with_capacity(n);
    let mut argmax_counts = vec![0u64; phis.len()];
    for _ in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut who = 0;
        for (i, &phi) in phis.iter().enumerate() {
            let g = sample_gumbel(phi, &mut rng);
            if g > best {
                best = g;
                who = i;
            }
        }
        maxima.push(best);
        argmax_counts[who] += 1;
    }
    let ks = ks_test(&maxima, |g| (-(-(g - log_z)).exp()).exp());
    let probs: Vec<f64> = DISCRETE_FIXTURE.iter().map(|m| m / 10.0).collect();
    let gibbs = chi2_gof(&argmax_counts, &probs)?;
    let pass = ks.pass && gibbs.pass;
    Ok(StatReport {
        name: "max-stability and argmax-Gibbs".into(),
        statistic: ks.statistic,
        p_value: ks.p_value.min(gibbs.p_value),
        pass,
        detail: format!("max KS p {:.4}, argmax GOF p {:.4}", ks.p_value, gibbs.p_value),
    })
}

/// E[G*] = log P(X) + gamma on a uniform 16-atom table, and
/// E[-log f(X*) + G*] = H(f) + gamma on the nonuniform fixture.
fn entropy_identities(seed: u64) -> Result<StatReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let n = 100_000;

    let m = 16;
    let mut tops = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = f64::NEG_INFINITY;
        for _ in 0..m {
            best = best.max(sample_gumbel(0.0, &mut rng));
        }
        tops.push(best);
    }
    let (mean_top, se_top) = mean_se(&tops);
    let want_top = (m as f64).ln() + EULER_GAMMA;
    let z_uniform = (mean_top - want_top).abs() / se_top;

    let masses = DISCRETE_FIXTURE;
    let log_z = log_sum(masses.iter().map(|m| m.ln()));
    let entropy: f64 = masses.iter().map(|&f| f / 10.0 * (log_z - f.ln())).sum();
    let mut stats = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut who = 0;
        for (i, &f) in masses.iter().enumerate() {
            let g = sample_gumbel(f.ln(), &mut rng);
            if g > best {
                best = g;
                who = i;
            }
        }
        stats.push(best - masses[who].ln());
    }
    let (mean_stat, se_stat) = mean_se(&stats);
    let z_entropy = (mean_stat - (entropy + EULER_GAMMA)).abs() / se_stat;

    let z = z_uniform.max(z_entropy);
    Ok(band_report(
        "entropy identities of the max-Gumbel",
        z,
        format!(
            "uniform m=16: mean {mean_top:.4} want {want_top:.4} (z {z_uniform:.2}); \
             nonuniform: mean {mean_stat:.4} want {:.4} (z {z_entropy:.2})",
            entropy + EULER_GAMMA
        ),
    ))
}

/// All four samplers return exact draws from the fixture table.
fn sampler_exactness(seed: u64, fault: FaultInjection) -> Result<StatReport> {
    let table = make_discrete(&DISCRETE_FIXTURE)?;
    let probs = table.probabilities();
    let runs = 20_000u64;
    let mut worst_p = f64::INFINITY;
    let mut worst = String::new();
    for (si, sampler) in Sampler::ALL.into_iter().enumerate() {
        let mut counts = vec![0u64; probs.len()];
        for r in 0..runs {
            let run_seed = seed ^ (si as u64) << 40 ^ r;
            let rec = match fault {
                FaultInjection::None => sampler.first(&table, run_seed)?,
                FaultInjection::CorruptedBound => {
                    // The corrupted problem is expected to error; a clean
                    // error is a FAILED exactness check here, because the
                    // injected fault is supposed to surface, not pass.
                    match sampler.first(&HalvedBound(make_discrete(&DISCRETE_FIXTURE)?), run_seed)
                    {
                        Ok(rec) => rec,
                        Err(e) => {
                            return Ok(StatReport {
                                name: "sampler exactness on the fixture".into(),
                                statistic: f64::NAN,
                                p_value: 0.0,
                                pass: false,
                                detail: format!("{sampler} with corrupted bound: {e}"),
                            })
                        }
                    }
                }
            };
            counts[table.atom_index(&rec.arrival.location)?] += 1;
        }
        let report = chi2_gof(&counts, &probs)?;
        if report.p_value < worst_p {
            worst_p = report.p_value;
            worst = format!("{sampler} GOF p {:.5}", report.p_value);
        }
    }
    Ok(StatReport {
        name: "sampler exactness on the fixture".into(),
        statistic: f64::NAN,
        p_value: worst_p,
        pass: worst_p > crate::stats::ALPHA,
        detail: format!("worst of 4 samplers x {runs} runs: {worst}"),
    })
}

/// Returned first-arrival times are Exp(P(X)) for every sampler.
fn sampler_time_law(seed: u64) -> Result<StatReport> {
    let table = make_discrete(&DISCRETE_FIXTURE)?;
    let total = table.total_mass();
    let runs = 10_000u64;
    let mut worst_p = f64::INFINITY;
    let mut worst = String::new();
    for (si, sampler) in Sampler::ALL.into_iter().enumerate() {
        let mut times = Vec::with_capacity(runs as usize);
        for r in 0..runs {
            let rec = sampler.first(&table, seed ^ (si as u64) << 41 ^ r)?;
            times.push(rec.arrival.log_time.exp());
        }
        let report = ks_test(&times, |t| 1.0 - (-total * t).exp());
        if report.p_value < worst_p {
            worst_p = report.p_value;
            worst = format!("{sampler} KS p {:.5}", report.p_value);
        }
    }
    Ok(StatReport {
        name: "first arrivals are Exp(P(X))".into(),
        statistic: f64::NAN,
        p_value: worst_p,
        pass: worst_p > crate::stats::ALPHA,
        detail: format!("worst of 4 samplers x {runs} runs: {worst}"),
    })
}

/// Rejection proposal counts are geometric with the global acceptance rate,
/// so the mean is 1/rho and the tail is (1-rho)^k.
fn rejection_count_law(seed: u64) -> Result<StatReport> {
    let table = make_discrete(&DISCRETE_FIXTURE)?;
    let rho = table.total_mass()
        / (table.proposal().log_mass(&table.root_region())?.exp()
            * table.log_bound(&table.root_region())?.exp());
    let runs = 20_000;
    let mut ks = Vec::with_capacity(runs);
    for r in 0..runs {
        ks.push(rej_first(&table, seed ^ (r as u64) << 1)?.k_proposals);
    }
    let tail = geom_tail_check(&ks, rho, TailMode::Exact)?;
    let kf: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let (mean, se) = mean_se(&kf);
    let z = (mean - 1.0 / rho).abs() / se;
    let pass = tail.pass && z <= 3.0;
    Ok(StatReport {
        name: "rejection count is Geometric(rho)".into(),
        statistic: z.max(tail.statistic),
        p_value: f64::NAN,
        pass,
        detail: format!("mean {mean:.4} want {:.4} (z {z:.2}); {}", 1.0 / rho, tail.detail),
    })
}

/// Bound schedules: the oracle-rejection survival is the product of per-step
/// rejection rates, the oracle-perturbation survival is the k-th rate to the
/// k-th power.
fn oracle_survivals(seed: u64) -> Result<StatReport> {
    let table = make_discrete(&DISCRETE_FIXTURE)?;
    let schedule = [16f64.ln(), 8f64.ln(), 4f64.ln()];
    let q_mass = table.proposal().log_mass(&table.root_region())?.exp();
    let z = table.total_mass();
    let rho_at = |i: usize| z / (q_mass * schedule[i.min(schedule.len() - 1)].exp());
    let runs = 20_000;
    let mut worst_z: f64 = 0.0;
    let mut detail = String::new();
    for (label, is_per) in [("OREJ", false), ("OPER", true)] {
        let mut counts = Vec::with_capacity(runs);
        for r in 0..runs {
            let s = seed ^ (r as u64) << 2 ^ u64::from(is_per);
            let rec = if is_per {
                oracle_per(&table, &schedule, s)?
            } else {
                oracle_rej(&table, &schedule, s)?
            };
            counts.push(rec.k_proposals);
        }
        for k in 1..=3usize {
            let want = if is_per {
                (1.0 - rho_at(k - 1)).powi(k as i32)
            } else {
                (1..=k).map(|i| 1.0 - rho_at(i - 1)).product()
            };
            let emp = counts.iter().filter(|&&c| c > k as u64).count() as f64 / runs as f64;
            let se = (want * (1.0 - want) / runs as f64).sqrt();
            let zk = (emp - want).abs() / se;
            worst_z = worst_z.max(zk);
            if zk == worst_z {
                detail = format!("{label} k={k}: emp {emp:.4} want {want:.4}");
            }
        }
    }
    Ok(band_report("oracle schedule survival laws", worst_z, detail))
}

/// Adaptive sampler tails never sit above the geometric tail of the root
/// acceptance rate (refinement only helps).
fn adaptive_tail_domination(seed: u64) -> Result<StatReport> {
    let table = make_discrete(&DISCRETE_FIXTURE)?;
    let rho = table.total_mass()
        / (table.proposal().log_mass(&table.root_region())?.exp()
            * table.log_bound(&table.root_region())?.exp());
    let runs = 20_000;
    let mut worst: Option<StatReport> = None;
    for (si, sampler) in [Sampler::OsStar, Sampler::AStar].into_iter().enumerate() {
        let mut ks = Vec::with_capacity(runs);
        for r in 0..runs {
            ks.push(sampler.first(&table, seed ^ (si as u64) << 42 ^ (r as u64) << 3)?.k_proposals);
        }
        let report = geom_tail_check(&ks, rho, TailMode::UpperBound)?;
        if worst.as_ref().map(|w| report.statistic > w.statistic).unwrap_or(true) {
            worst = Some(report);
        }
    }
    let worst = worst.expect("two samplers checked");
    Ok(StatReport {
        name: "adaptive tails below the root geometric".into(),
        statistic: worst.statistic,
        p_value: f64::NAN,
        pass: worst.pass,
        detail: worst.detail,
    })
}

/// Spot-check every problem's covering contract by direct sampling: the
/// density ratio never exceeds the regional bound, on the root or on split
/// children. The injected-fault mode corrupts the fixture's bound and must
/// make this check fail.
fn bound_soundness(seed: u64, fault: FaultInjection) -> Result<StatReport> {
    let mut problems: Vec<Box<dyn TargetProblem>> = vec![
        Box::new(make_clutter(default_clutter_data(1), 1)?),
        Box::new(make_regression(regression_dataset(10, 1913)?)?),
        {
            let (fields, couplings) = ising_random_params(5, 1917);
            Box::new(make_ising(5, fields, couplings)?)
        },
    ];
    match fault {
        FaultInjection::None => problems.push(Box::new(make_discrete(&DISCRETE_FIXTURE)?)),
        FaultInjection::CorruptedBound => {
            problems.push(Box::new(HalvedBound(make_discrete(&DISCRETE_FIXTURE)?)))
        }
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut checked = 0u64;
    for problem in &problems {
        let root = problem.root_region();
        let mut regions = vec![root.clone()];
        // Two refinement generations seeded by proposal draws.
        for _ in 0..2 {
            let mut next = Vec::new();
            for region in &regions {
                let x = problem.proposal().sample_in(region, &mut rng)?;
                for child in problem.split(region, &x)? {
                    if child != *region {
                        next.push(child);
                    }
                }
            }
            if !next.is_empty() {
                regions.extend(next);
            }
        }
        for region in &regions {
            let log_m = problem.log_bound(region)?;
            for _ in 0..60 {
                let x = problem.proposal().sample_in(region, &mut rng)?;
                let ratio = problem.log_f(&x) - problem.proposal().log_density(&x);
                checked += 1;
                if ratio > log_m + 1e-6 {
                    return Ok(StatReport {
                        name: "regional bounds cover the density ratio".into(),
                        statistic: ratio - log_m,
                        p_value: f64::NAN,
                        pass: false,
                        detail: format!(
                            "{}: ratio {ratio:.6} above bound {log_m:.6} on {region:?}",
                            problem.name()
                        ),
                    });
                }
            }
        }
    }
    Ok(StatReport {
        name: "regional bounds cover the density ratio".into(),
        statistic: 0.0,
        p_value: f64::NAN,
        pass: true,
        detail: format!("{checked} sampled ratios across {} problems", problems.len()),
    })
}

/// The in-flight audit turns an unsound bound into a contract error instead
/// of a silently wrong sample.
fn audit_catches_corruption(seed: u64) -> Result<StatReport> {
    let corrupted = HalvedBound(make_discrete(&DISCRETE_FIXTURE)?);
    let mut caught = 0;
    let mut detail = String::new();
    for (i, sampler) in Sampler::ALL.into_iter().enumerate() {
        // A few seeds in case one run accepts before ever proposing an atom
        // whose ratio exceeds the halved bound.
        let mut hit = false;
        for r in 0..20u64 {
            match sampler.first(&corrupted, seed ^ (i as u64) << 43 ^ r) {
                Err(crate::error::Error::ContractViolation(_)) => {
                    hit = true;
                    break;
                }
                Err(e) => {
                    detail = format!("{sampler}: unexpected error kind: {e}");
                    break;
                }
                Ok(_) => {}
            }
        }
        if hit {
            caught += 1;
        } else if detail.is_empty() {
            detail = format!("{sampler}: halved bound never detected in 20 runs");
        }
    }
    Ok(StatReport {
        name: "audit rejects a corrupted bound".into(),
        statistic: caught as f64,
        p_value: f64::NAN,
        pass: caught == Sampler::ALL.len(),
        detail: if detail.is_empty() {
            format!("all {} samplers raised contract violations", caught)
        } else {
            detail
        },
    })
}

/// LP relaxation: upper bound everywhere, exact at leaves, monotone under
/// additional fixing.
fn lp_relaxation_sound(seed: u64) -> Result<StatReport> {
    let mut rng = Rng::seed_from_u64(seed);
    let trials = 30;
    for trial in 0..trials {
        let n = 2 + (rng.below(7) as usize);
        let (fields, couplings) = ising_random_params(n, rng.next_u64());
        let mut fixed = BTreeMap::new();
        for i in 0..n {
            if rng.coin() && fixed.len() + 1 < n {
                fixed.insert(i, if rng.coin() { 1i8 } else { -1i8 });
            }
        }
        let (bound, _) = ising_relaxation(&fields, &couplings, &fixed)?;
        let brute = ising_brute_force_max(&fields, &couplings, &fixed);
        if bound < brute - 1e-6 {
            return Ok(StatReport {
                name: "LP relaxation bounds the subcube max".into(),
                statistic: brute - bound,
                p_value: f64::NAN,
                pass: false,
                detail: format!("trial {trial}: relaxation {bound} < brute force {brute}"),
            });
        }
        // Fixing one more site can only shrink the bound.
        if let Some(free) = (0..n).find(|i| !fixed.contains_key(i)) {
            let mut tighter = fixed.clone();
            tighter.insert(free, 1);
            let (child, _) = ising_relaxation(&fields, &couplings, &tighter)?;
            if child > bound + 1e-9 {
                return Ok(StatReport {
                    name: "LP relaxation bounds the subcube max".into(),
                    statistic: child - bound,
                    p_value: f64::NAN,
                    pass: false,
                    detail: format!("trial {trial}: bound grew under fixing"),
                });
            }
        }
        let all: BTreeMap<usize, i8> =
            (0..n).map(|i| (i, if rng.coin() { 1 } else { -1 })).collect();
        let (leaf, _) = ising_relaxation(&fields, &couplings, &all)?;
        let leaf_brute = ising_brute_force_max(&fields, &couplings, &all);
        if (leaf - leaf_brute).abs() > 1e-9 {
            return Ok(StatReport {
                name: "LP relaxation bounds the subcube max".into(),
                statistic: (leaf - leaf_brute).abs(),
                p_value: f64::NAN,
                pass: false,
                detail: format!("trial {trial}: leaf value off by {}", leaf - leaf_brute),
            });
        }
    }
    Ok(StatReport {
        name: "LP relaxation bounds the subcube max".into(),
        statistic: 0.0,
        p_value: f64::NAN,
        pass: true,
        detail: format!("{trials} random instances: dominated, monotone, exact at leaves"),
    })
}

/// The benchmark CSV is a pure function of (config, seed).
fn csv_reproducibility(seed: u64) -> Result<StatReport> {
    let mut cfg = ExperimentConfig::new("discrete", Sampler::AStar);
    cfg.runs = 128;
    cfg.seed = seed;
    cfg.jobs = 1;
    let serial = run_experiment(&cfg)?;
    cfg.jobs = 8;
    let parallel = run_experiment(&cfg)?;
    let pass = serial.csv == parallel.csv;
    Ok(StatReport {
        name: "bench CSV identical across thread counts".into(),
        statistic: f64::NAN,
        p_value: f64::NAN,
        pass,
        detail: if pass {
            format!("{} bytes, jobs 1 vs 8", serial.csv.len())
        } else {
            "outputs differ between jobs=1 and jobs=8".into()
        },
    })
}

/// Run every check; sampling checks retry up to three times on failure.
pub fn verify_suite(master_seed: u64, fault: FaultInjection) -> Result<VerifySummary> {
    let mut rng = Rng::seed_from_u64(master_seed);
    let mut reports = Vec::new();
    // Retries reseed with an offset so a statistical fluke does not repeat.
    let mut sampled = |reports: &mut Vec<StatReport>,
                       check: &mut dyn FnMut(u64) -> Result<StatReport>|
     -> Result<()> {
        let base = rng.next_u64();
        reports.push(with_retries(|attempt| check(base.wrapping_add(attempt * 0x9e37)))?);
        Ok(())
    };

    sampled(&mut reports, &mut race_gap_law)?;
    sampled(&mut reports, &mut race_location_law)?;
    sampled(&mut reports, &mut race_independence)?;
    sampled(&mut reports, &mut poisson_counts)?;
    sampled(&mut reports, &mut thinning_law)?;
    sampled(&mut reports, &mut mapping_law)?;
    sampled(&mut reports, &mut conditional_iid)?;
    sampled(&mut reports, &mut gumbel_chain_matches_race)?;
    sampled(&mut reports, &mut trunc_gumbel_vs_rejection)?;
    sampled(&mut reports, &mut max_stability_and_argmax)?;
    sampled(&mut reports, &mut entropy_identities)?;
    sampled(&mut reports, &mut |s| sampler_exactness(s, fault))?;
    sampled(&mut reports, &mut sampler_time_law)?;
    sampled(&mut reports, &mut rejection_count_law)?;
    sampled(&mut reports, &mut oracle_survivals)?;
    sampled(&mut reports, &mut adaptive_tail_domination)?;
    reports.push(bound_soundness(rng.next_u64(), fault)?);
    reports.push(audit_catches_corruption(rng.next_u64())?);
    reports.push(lp_relaxation_sound(rng.next_u64())?);
    reports.push(csv_reproducibility(rng.next_u64())?);

    let pass = reports.iter().all(|r| r.pass);
    Ok(VerifySummary { reports, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let summary = verify_suite(0, FaultInjection::None).unwrap();
        for report in &summary.reports {
            assert!(report.pass, "{}: {}", report.name, report.detail);
        }
        assert!(summary.pass);
        assert_eq!(summary.reports.len(), 20);
    }

    #[test]
    fn corrupted_bound_fails_the_suite() {
        let summary = verify_suite(1, FaultInjection::CorruptedBound).unwrap();
        assert!(!summary.pass);
        let soundness = summary
            .reports
            .iter()
            .find(|r| r.name.contains("bounds cover"))
            .expect("soundness check present");
        assert!(!soundness.pass, "corrupted bound must fail the covering audit");
    }
}
