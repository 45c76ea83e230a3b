//! Exact and Monte Carlo revenue of the block auctions.
//!
//! Samples are drawn in fixed-size batches. Batch `b` owns the ChaCha stream
//! `b` under the user seed, and batch statistics are merged in batch order,
//! so estimates are bit-for-bit reproducible whatever the thread count.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};
use rayon::prelude::*;

use crate::equilibrium::{harmonic, harmonic_range, uniform_order_stat_mean, ShadingRule, MAX_VERIFIED_K};
use crate::error::{Result, TfmError};
use crate::mechanism::{BidSpace, Mechanism, MechanismSpec, Variant};
use crate::model::{Distribution, Rat};

/// Samples per batch; part of the reproducibility contract.
pub const BATCH_SIZE: u64 = 4096;
pub const MIN_SAMPLES: u64 = 1000;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`.
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub exact: Option<Rat>,
}

impl RevenueEstimate {
    /// Whether `target` lies within `sigmas` standard errors of the mean.
    pub fn agrees_with(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr
    }

    pub fn agrees_with_exact(&self, sigmas: f64) -> Option<bool> {
        self.exact.map(|e| self.agrees_with(e.numer().to_f64().unwrap() / e.denom().to_f64().unwrap(), sigmas))
    }
}

/// Streaming means and co-moments of a fixed number of columns.
#[derive(Debug, Clone, PartialEq)]
struct Moments {
    count: u64,
    mean: Vec<f64>,
    /// Row-major `dims x dims` sums of centred cross products.
    comoment: Vec<f64>,
}

impl Moments {
    fn new(dims: usize) -> Self {
        Self { count: 0, mean: vec![0.0; dims], comoment: vec![0.0; dims * dims] }
    }

    fn dims(&self) -> usize {
        self.mean.len()
    }

    fn push(&mut self, x: &[f64]) {
        let d = self.dims();
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = (0..d).map(|j| x[j] - self.mean[j]).collect();
        for j in 0..d {
            self.mean[j] += delta[j] / n;
        }
        for j in 0..d {
            for l in 0..d {
                self.comoment[j * d + l] += delta[j] * (x[l] - self.mean[l]);
            }
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dims();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|j| other.mean[j] - self.mean[j]).collect();
        for j in 0..d {
            self.mean[j] += delta[j] * nb / n;
        }
        for j in 0..d {
            for l in 0..d {
                self.comoment[j * d + l] += other.comoment[j * d + l] + delta[j] * delta[l] * na * nb / n;
            }
        }
        self.count += other.count;
    }

    /// Sample covariance of columns `j` and `l`.
    fn cov(&self, j: usize, l: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.comoment[j * self.dims() + l] / (self.count - 1) as f64
    }

    /// Standard error of the mean of `sum_j w_j X_j`.
    fn stderr_of(&self, weights: &[f64]) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let mut var = 0.0;
        for (j, wj) in weights.iter().enumerate() {
            for (l, wl) in weights.iter().enumerate() {
                var += wj * wl * self.cov(j, l);
            }
        }
        (var.max(0.0) / self.count as f64).sqrt()
    }

    fn estimate(&self, j: usize, seed: u64, exact: Option<Rat>) -> RevenueEstimate {
        let mut w = vec![0.0; self.dims()];
        w[j] = 1.0;
        RevenueEstimate { mean: self.mean[j], stderr: self.stderr_of(&w), samples: self.count, seed, exact }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Simulation {
    columns: Moments,
    ratio: Moments,
    excluded: u64,
    /// Smallest per-sample ratio observed.
    min_ratio: f64,
}

impl Simulation {
    fn new(dims: usize) -> Self {
        Self { columns: Moments::new(dims), ratio: Moments::new(1), excluded: 0, min_ratio: f64::INFINITY }
    }

    fn merge(&mut self, other: &Simulation) {
        self.columns.merge(&other.columns);
        self.ratio.merge(&other.ratio);
        self.excluded += other.excluded;
        self.min_ratio = self.min_ratio.min(other.min_ratio);
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(TfmError::InvalidParameter(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    Ok(())
}

fn draw_values(dist: Distribution, rng: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
    match dist {
        Distribution::Uniform => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
        Distribution::Exponential { zeta } => {
            let exp = Exp::new(zeta)
                .map_err(|_| TfmError::InvalidParameter(format!("exponential rate must be positive, got {zeta}")))?;
            out.iter_mut().for_each(|v| *v = exp.sample(rng));
        }
    }
    Ok(())
}

/// Runs `eval` on `samples` draws of `n` iid values. `eval` writes one row of
/// `dims` statistics and may return a per-sample ratio, `None` meaning the
/// sample is excluded from the ratio.
fn simulate<F>(n: usize, dist: Distribution, samples: u64, seed: u64, dims: usize, eval: F) -> Result<Simulation>
where
    F: Fn(&[f64], &mut [f64]) -> Result<Option<Option<f64>>> + Sync,
{
    check_samples(samples)?;
    if n == 0 {
        return Err(TfmError::InvalidParameter("need at least one bidder".into()));
    }
    let batches = samples.div_ceil(BATCH_SIZE);
    let parts: Vec<Simulation> = (0..batches)
        .into_par_iter()
        .map(|b| -> Result<Simulation> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut sim = Simulation::new(dims);
            let mut values = vec![0.0; n];
            let mut row = vec![0.0; dims];
            let len = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            for _ in 0..len {
                draw_values(dist, &mut rng, &mut values)?;
                let ratio = eval(&values, &mut row)?;
                sim.columns.push(&row);
                match ratio {
                    Some(Some(r)) => {
                        sim.ratio.push(&[r]);
                        sim.min_ratio = sim.min_ratio.min(r);
                    }
                    Some(None) => sim.excluded += 1,
                    None => {}
                }
            }
            Ok(sim)
        })
        .collect::<Result<_>>()?;
    let mut total = Simulation::new(dims);
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

#[derive(Debug, Clone)]
enum Strategy {
    Truthful,
    Shaded(ShadingRule),
    /// Every bidder wins, so the equilibrium bid is zero.
    Zero,
}

/// A mechanism together with the equilibrium bidding it induces.
#[derive(Debug, Clone)]
struct Market {
    spec: MechanismSpec,
    strategy: Strategy,
    items: usize,
}

fn shaded(n: usize, k: usize) -> Result<Strategy> {
    if k >= n {
        Ok(Strategy::Zero)
    } else {
        Ok(Strategy::Shaded(ShadingRule::new(n, k)?))
    }
}

impl Market {
    fn new(spec: &MechanismSpec, dist: Distribution, n: usize) -> Result<Self> {
        if spec.bid_space() != BidSpace::Continuous {
            return Err(TfmError::Unsupported(format!("{spec}: Monte Carlo needs a continuous bid space")));
        }
        let uniform_only = |what: &str| -> Result<()> {
            if dist != Distribution::Uniform {
                return Err(TfmError::Unsupported(format!("{what} is only available for uniform values, not {dist}")));
            }
            Ok(())
        };
        let strategy = match spec.variant() {
            Variant::Gta => return Err(TfmError::Unsupported("GTA takes integer bids".into())),
            Variant::Pabga { block } => {
                uniform_only("equilibrium bidding")?;
                shaded(n, *block)?
            }
            Variant::SupplyLimitedPabga { limit, .. } => {
                uniform_only("equilibrium bidding")?;
                shaded(n, *limit)?
            }
            Variant::Shading { n: expected, .. } => {
                uniform_only("the shading auction")?;
                if *expected != n {
                    return Err(TfmError::InvalidParameter(format!(
                        "shading auction built for {expected} bidders, sampled with {n}"
                    )));
                }
                Strategy::Truthful
            }
            Variant::MyersonUniform { .. } => {
                uniform_only("the optimal-auction oracle")?;
                Strategy::Truthful
            }
            Variant::Upga { .. } | Variant::WellReserved { .. } => Strategy::Truthful,
        };
        let items = spec.items().capacity(n);
        Ok(Self { spec: spec.clone(), strategy, items })
    }

    fn bid(&self, v: f64) -> Result<f64> {
        match &self.strategy {
            Strategy::Truthful => Ok(v),
            Strategy::Shaded(rule) => rule.bid(v),
            Strategy::Zero => Ok(0.0),
        }
    }

    /// Payments net of burn when every bidder follows the strategy.
    fn revenue(&self, values: &[f64], bids: &mut Vec<f64>) -> Result<f64> {
        bids.clear();
        for &v in values {
            bids.push(self.bid(v)?);
        }
        let allocation = Mechanism::<f64>::intended_allocation(&self.spec, bids);
        let outcome = Mechanism::<f64>::settle(&self.spec, bids, &allocation)?;
        Ok(outcome.total_payment() - outcome.total_burn())
    }
}

/// Sum of the `k` highest values.
fn top_sum(values: &[f64], k: usize, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));
    scratch.iter().take(k).sum()
}

/// Closed-form expected revenue under uniform values, where one is known.
fn uniform_exact_revenue(spec: &MechanismSpec, n: usize) -> Option<Rat> {
    let k = match *spec.variant() {
        Variant::Pabga { block } | Variant::Shading { block, .. } => block,
        Variant::SupplyLimitedPabga { limit, .. } => limit,
        Variant::Upga { block, reserve } | Variant::WellReserved { block, reserve } if reserve.is_zero() => block,
        _ => return None,
    };
    uniform_pabga_revenue_exact(n, k.min(n)).ok()
}

fn uniform_exact_surplus(n: usize, k: usize) -> Rat {
    (1..=k.min(n)).map(|i| uniform_order_stat_mean(n, i).expect("index in range")).sum()
}

/// Revenue, value surplus and per-sample revenue share of one mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueSurplus {
    pub revenue: RevenueEstimate,
    pub surplus: RevenueEstimate,
    /// Mean of per-sample revenue over surplus.
    pub ratio: RevenueEstimate,
    /// Samples with zero surplus, left out of `ratio`.
    pub excluded: u64,
    /// Mean revenue over mean surplus, with a delta-method standard error.
    pub ratio_of_means: f64,
    pub ratio_of_means_stderr: f64,
}

/// Monte Carlo revenue and value surplus of `spec` with `n` iid bidders who
/// follow the mechanism's equilibrium strategy: truthful bidding for the
/// dominant-strategy auctions and the closed-form shading for pay-as-bid
/// auctions under uniform values.
pub fn mc_revenue_and_surplus(
    spec: &MechanismSpec,
    dist: Distribution,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<RevenueSurplus> {
    let market = Market::new(spec, dist, n)?;
    let sim = simulate(n, dist, samples, seed, 2, |values, row| {
        let (mut bids, mut scratch) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let revenue = market.revenue(values, &mut bids)?;
        let surplus = top_sum(values, market.items, &mut scratch);
        row[0] = revenue;
        row[1] = surplus;
        Ok(Some((surplus > 0.0).then(|| revenue / surplus)))
    })?;
    let (exact_rev, exact_surplus) = match dist {
        Distribution::Uniform => (uniform_exact_revenue(spec, n), Some(uniform_exact_surplus(n, market.items))),
        Distribution::Exponential { .. } => (None, None),
    };
    let c = &sim.columns;
    let r = c.mean[0] / c.mean[1];
    Ok(RevenueSurplus {
        revenue: c.estimate(0, seed, exact_rev),
        surplus: c.estimate(1, seed, exact_surplus),
        ratio: sim.ratio.estimate(0, seed, None),
        excluded: sim.excluded,
        ratio_of_means: r,
        ratio_of_means_stderr: c.stderr_of(&[1.0, -r]) / c.mean[1],
    })
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(TfmError::InvalidParameter(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

fn check_k_below_n(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(TfmError::InvalidParameter(format!("need 1 <= k < n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// Expected pay-as-bid revenue under uniform values, `k (n - k) / (n + 1)`.
pub fn uniform_pabga_revenue_exact(n: usize, k: usize) -> Result<Rat> {
    check_k(n, k)?;
    Ok(Rat::new((k * (n - k)) as i64, (n + 1) as i64))
}

/// Expected revenue over expected surplus under uniform values,
/// `(n - k) / (n + 1 - (k + 1) / 2)`.
pub fn uniform_ratio_of_expectations(n: usize, k: usize) -> Result<Rat> {
    check_k(n, k)?;
    Ok(Rat::new(2 * (n - k) as i64, (2 * n + 1 - k) as i64))
}

/// Expected revenue over expected surplus under iid exponential values,
/// `k (H_n - H_k) / sum_{i=1}^{k} (H_n - H_{i-1})`. The rate cancels.
pub fn exponential_ratio_of_expectations(n: usize, k: usize, zeta: Rat) -> Result<BigRational> {
    check_k_below_n(n, k)?;
    if zeta <= Rat::zero() {
        return Err(TfmError::InvalidParameter("exponential rate must be positive".into()));
    }
    let zeta = crate::model::rat_to_big(zeta);
    let h_n = harmonic(n);
    let kk = BigRational::from_integer(BigInt::from(k));
    // every winner pays the (k+1)-th highest value, whose mean is (H_n - H_k) / zeta
    let revenue = &kk * (&h_n - harmonic_range(1, k)) / &zeta;
    let mut surplus = BigRational::zero();
    let mut h_prev = BigRational::zero();
    for i in 1..=k {
        surplus += &h_n - &h_prev;
        h_prev += BigRational::new(BigInt::one(), BigInt::from(i));
    }
    Ok(revenue / (surplus / zeta))
}

/// `(H_n - H_k) / H_n`, the simpler lower bound on the exponential ratio.
pub fn exponential_ratio_lower_bound(n: usize, k: usize) -> Result<BigRational> {
    check_k_below_n(n, k)?;
    let h_n = harmonic(n);
    Ok(harmonic_range(k + 1, n) / h_n)
}

pub fn big_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn rat_to_f64(x: Rat) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// Finite-instance evidence for the exponential revenue share.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialClaim {
    pub n: usize,
    pub k: usize,
    pub ratio: BigRational,
    pub lower_bound: BigRational,
    pub threshold: Rat,
    pub holds: bool,
}

/// Checks `ratio >= threshold` and `ratio >= (H_n - H_k) / H_n` exactly.
pub fn exponential_claim_check(n: usize, k: usize, threshold: Rat) -> Result<ExponentialClaim> {
    let ratio = exponential_ratio_of_expectations(n, k, Rat::one())?;
    let lower_bound = exponential_ratio_lower_bound(n, k)?;
    let holds = ratio >= crate::model::rat_to_big(threshold) && ratio >= lower_bound;
    Ok(ExponentialClaim { n, k, ratio, lower_bound, threshold, holds })
}

/// Two mechanisms measured on the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub first: RevenueEstimate,
    pub second: RevenueEstimate,
    /// Mean of `first - factor * second`.
    pub margin: f64,
    /// Standard error of `margin`, accounting for the shared draws.
    pub margin_stderr: f64,
}

fn compare(
    first: &MechanismSpec,
    second: &MechanismSpec,
    factor: f64,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<Comparison> {
    let (a, b) = (Market::new(first, Distribution::Uniform, n)?, Market::new(second, Distribution::Uniform, n)?);
    let sim = simulate(n, Distribution::Uniform, samples, seed, 2, |values, row| {
        let mut bids = Vec::with_capacity(n);
        row[0] = a.revenue(values, &mut bids)?;
        row[1] = b.revenue(values, &mut bids)?;
        Ok(None)
    })?;
    let c = &sim.columns;
    Ok(Comparison {
        first: c.estimate(0, seed, uniform_exact_revenue(first, n)),
        second: c.estimate(1, seed, uniform_exact_revenue(second, n)),
        margin: c.mean[0] - factor * c.mean[1],
        margin_stderr: c.stderr_of(&[1.0, -factor]),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulowKlemperer {
    pub n: usize,
    pub k: usize,
    pub pabga: RevenueEstimate,
    pub optimal: RevenueEstimate,
    /// `(n - k) / n`.
    pub factor: f64,
    pub margin_stderr: f64,
    pub holds: bool,
}

/// Pay-as-bid revenue against `(n - k) / n` of the optimal auction's, under
/// uniform values, with a three standard error allowance.
pub fn bulow_klemperer_check(n: usize, k: usize, samples: u64, seed: u64) -> Result<BulowKlemperer> {
    check_k_below_n(n, k)?;
    let factor = (n - k) as f64 / n as f64;
    let cmp = compare(&MechanismSpec::pabga(k)?, &MechanismSpec::myerson_uniform(k)?, factor, n, samples, seed)?;
    Ok(BulowKlemperer {
        n,
        k,
        pabga: cmp.first,
        optimal: cmp.second,
        factor,
        margin_stderr: cmp.margin_stderr,
        holds: cmp.margin >= -3.0 * cmp.margin_stderr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevenueEquivalence {
    pub n: usize,
    pub k: usize,
    pub pabga: RevenueEstimate,
    pub upga: RevenueEstimate,
    pub exact: Rat,
    pub difference_stderr: f64,
    pub holds: bool,
}

/// Pay-as-bid (equilibrium bids) and uniform-price (truthful bids) revenue
/// agree with each other and with `k (n - k) / (n + 1)`.
pub fn revenue_equivalence_check(n: usize, k: usize, samples: u64, seed: u64) -> Result<RevenueEquivalence> {
    check_k(n, k)?;
    if k > MAX_VERIFIED_K {
        return Err(TfmError::Unverified { k });
    }
    let cmp = compare(&MechanismSpec::pabga(k)?, &MechanismSpec::upga(k, Rat::zero())?, 1.0, n, samples, seed)?;
    let exact = uniform_pabga_revenue_exact(n, k)?;
    let e = rat_to_f64(exact);
    let holds =
        cmp.margin.abs() <= 3.0 * cmp.margin_stderr && cmp.first.agrees_with(e, 3.0) && cmp.second.agrees_with(e, 3.0);
    Ok(RevenueEquivalence {
        n,
        k,
        pabga: cmp.first,
        upga: cmp.second,
        exact,
        difference_stderr: cmp.margin_stderr,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioExpectation {
    pub n: usize,
    pub k: usize,
    pub estimate: RevenueEstimate,
    /// `(n - k) / n`.
    pub bound: f64,
    pub excluded: u64,
    pub min_ratio: f64,
    /// Drawn values whose equilibrium bid fell below `((n - k) / n) v`.
    pub pointwise_violations: u64,
    pub holds: bool,
}

/// Mean per-sample revenue share of the pay-as-bid auction against
/// `(n - k) / n`, plus the pointwise bid floor on every drawn value.
pub fn expectation_of_ratio_check(n: usize, k: usize, samples: u64, seed: u64) -> Result<RatioExpectation> {
    check_k_below_n(n, k)?;
    let rule = ShadingRule::new(n, k)?;
    let bound = (n - k) as f64 / n as f64;
    let sim = simulate(n, Distribution::Uniform, samples, seed, 2, |values, row| {
        let mut below = 0.0;
        let mut bids = Vec::with_capacity(n);
        for &v in values {
            let s = rule.bid(v)?;
            if s < rule.shading_floor(v) && !floor_holds_exactly(&rule, v)? {
                below += 1.0;
            }
            bids.push(s);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let revenue: f64 = order[..k].iter().map(|&i| bids[i]).sum();
        let surplus: f64 = order[..k].iter().map(|&i| values[i]).sum();
        row[0] = revenue;
        row[1] = below;
        Ok(Some((surplus > 0.0).then(|| revenue / surplus)))
    })?;
    let estimate = sim.ratio.estimate(0, seed, None);
    let violations = (sim.columns.mean[1] * sim.columns.count as f64).round() as u64;
    let holds =
        estimate.mean >= bound - 3.0 * estimate.stderr && violations == 0 && sim.min_ratio >= bound * (1.0 - 1e-12);
    Ok(RatioExpectation {
        n,
        k,
        estimate,
        bound,
        excluded: sim.excluded,
        min_ratio: sim.min_ratio,
        pointwise_violations: violations,
        holds,
    })
}

fn floor_holds_exactly(rule: &ShadingRule, v: f64) -> Result<bool> {
    let exact =
        BigRational::from_float(v).ok_or_else(|| TfmError::InvalidParameter(format!("value {v} is not finite")))?;
    rule.floor_holds_exact(&exact)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub reserve: Rat,
    pub pabga: RevenueEstimate,
    pub well_reserved: RevenueEstimate,
    pub difference_stderr: f64,
    pub holds: bool,
}

/// Pay-as-bid revenue against well-reserved uniform-price auctions with the
/// given reserves, all on shared draws.
pub fn revenue_optimal_class_check(
    n: usize,
    k: usize,
    reserves: &[Rat],
    samples: u64,
    seed: u64,
) -> Result<Vec<ClassRow>> {
    check_k_below_n(n, k)?;
    let pabga = Market::new(&MechanismSpec::pabga(k)?, Distribution::Uniform, n)?;
    let rivals = reserves
        .iter()
        .map(|&r| Market::new(&MechanismSpec::well_reserved(k, r)?, Distribution::Uniform, n))
        .collect::<Result<Vec<_>>>()?;
    let sim = simulate(n, Distribution::Uniform, samples, seed, 1 + rivals.len(), |values, row| {
        let mut bids = Vec::with_capacity(n);
        row[0] = pabga.revenue(values, &mut bids)?;
        for (j, m) in rivals.iter().enumerate() {
            row[j + 1] = m.revenue(values, &mut bids)?;
        }
        Ok(None)
    })?;
    let c = &sim.columns;
    let exact = uniform_exact_revenue(&pabga.spec, n);
    Ok(reserves
        .iter()
        .enumerate()
        .map(|(j, &reserve)| {
            let mut w = vec![0.0; c.dims()];
            w[0] = 1.0;
            w[j + 1] = -1.0;
            let se = c.stderr_of(&w);
            ClassRow {
                reserve,
                pabga: c.estimate(0, seed, exact),
                well_reserved: c.estimate(j + 1, seed, uniform_exact_revenue(&rivals[j].spec, n)),
                difference_stderr: se,
                holds: c.mean[0] - c.mean[j + 1] >= -3.0 * se,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyLimit {
    pub pabga: RevenueEstimate,
    pub limited: RevenueEstimate,
    pub difference_stderr: f64,
    /// Both estimates agree with their closed forms within three standard errors.
    pub matches_exact: bool,
    /// The limited auction earns more by over three standard errors.
    pub outperforms: bool,
}

/// Pay-as-bid auction with `k` items against the same auction capped at
/// `limit` items, on shared uniform draws.
pub fn supply_limit_check(n: usize, k: usize, limit: usize, samples: u64, seed: u64) -> Result<SupplyLimit> {
    let full = MechanismSpec::pabga(k)?;
    let capped = MechanismSpec::supply_limited_pabga(k, limit)?;
    let cmp = compare(&capped, &full, 1.0, n, samples, seed)?;
    let matches_exact =
        cmp.first.agrees_with_exact(3.0).unwrap_or(false) && cmp.second.agrees_with_exact(3.0).unwrap_or(false);
    Ok(SupplyLimit {
        pabga: cmp.second,
        limited: cmp.first,
        difference_stderr: cmp.margin_stderr,
        matches_exact,
        outperforms: cmp.margin > 3.0 * cmp.margin_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::exponential_order_stat_mean;

    fn big(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn exact_uniform_formulas() {
        assert_eq!(uniform_pabga_revenue_exact(4, 3).unwrap(), Rat::new(3, 5));
        assert_eq!(uniform_pabga_revenue_exact(4, 2).unwrap(), Rat::new(4, 5));
        assert_eq!(uniform_pabga_revenue_exact(7, 7).unwrap(), Rat::zero());
        assert!(uniform_pabga_revenue_exact(3, 4).is_err());
        assert_eq!(uniform_ratio_of_expectations(4, 2).unwrap(), Rat::new(4, 7));
        assert_eq!(uniform_ratio_of_expectations(10, 3).unwrap(), Rat::new(7, 9));
        assert_eq!(uniform_ratio_of_expectations(6, 6).unwrap(), Rat::zero());
        assert!(uniform_ratio_of_expectations(2, 3).is_err());
    }

    #[test]
    fn uniform_ratio_matches_order_statistics() {
        for n in 1..15 {
            for k in 1..=n {
                let surplus: Rat = (1..=k).map(|i| uniform_order_stat_mean(n, i).unwrap()).sum();
                let rev = uniform_pabga_revenue_exact(n, k).unwrap();
                assert_eq!(rev / surplus, uniform_ratio_of_expectations(n, k).unwrap());
                // every winner pays the (k+1)-th value in the uniform-price auction
                if k < n {
                    assert_eq!(rev, uniform_order_stat_mean(n, k + 1).unwrap() * k as i64);
                }
            }
        }
    }

    #[test]
    fn exponential_ratio_examples() {
        assert_eq!(exponential_ratio_of_expectations(4, 1, Rat::one()).unwrap(), big(13, 25));
        assert_eq!(
            exponential_ratio_of_expectations(9, 4, Rat::one()).unwrap(),
            exponential_ratio_of_expectations(9, 4, Rat::from_integer(7)).unwrap()
        );
        assert!(exponential_ratio_of_expectations(4, 4, Rat::one()).is_err());
        assert!(exponential_ratio_of_expectations(4, 1, Rat::zero()).is_err());
    }

    #[test]
    fn exponential_ratio_matches_order_statistic_sum() {
        let zeta = Rat::new(3, 2);
        for n in 2..12 {
            for k in 1..n {
                let surplus: BigRational = (1..=k).map(|i| exponential_order_stat_mean(n, i, zeta).unwrap()).sum();
                let price = exponential_order_stat_mean(n, k + 1, zeta).unwrap();
                let ratio = price * BigRational::from_integer(BigInt::from(k)) / surplus;
                assert_eq!(ratio, exponential_ratio_of_expectations(n, k, zeta).unwrap());
                assert!(ratio >= exponential_ratio_lower_bound(n, k).unwrap());
            }
        }
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<[f64; 2]> = (0..50).map(|i| [(i as f64).sin(), (i as f64 * 0.3).cos() * 2.0]).collect();
        let mut whole = Moments::new(2);
        xs.iter().for_each(|x| whole.push(x));
        let (mut a, mut b) = (Moments::new(2), Moments::new(2));
        xs[..17].iter().for_each(|x| a.push(x));
        xs[17..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        for j in 0..4 {
            assert!((a.comoment[j] - whole.comoment[j]).abs() < 1e-12);
        }
        assert!((a.mean[1] - whole.mean[1]).abs() < 1e-15);
        let mean0 = xs.iter().map(|x| x[0]).sum::<f64>() / 50.0;
        let var0 = xs.iter().map(|x| (x[0] - mean0).powi(2)).sum::<f64>() / 49.0;
        assert!((whole.cov(0, 0) - var0).abs() < 1e-12);
    }

    #[test]
    fn estimates_are_reproducible() {
        let spec = MechanismSpec::pabga(2).unwrap();
        let a = mc_revenue_and_surplus(&spec, Distribution::Uniform, 4, 10_000, 5).unwrap();
        let b = mc_revenue_and_surplus(&spec, Distribution::Uniform, 4, 10_000, 5).unwrap();
        assert_eq!(a, b);
        let c = mc_revenue_and_surplus(&spec, Distribution::Uniform, 4, 10_000, 6).unwrap();
        assert_ne!(a.revenue.mean, c.revenue.mean);
        assert_eq!(a.revenue.samples, 10_000);
        assert_eq!(a.revenue.exact, Some(Rat::new(4, 5)));
    }

    #[test]
    fn revenue_never_exceeds_surplus_for_truthful_auctions() {
        let spec = MechanismSpec::upga(3, Rat::zero()).unwrap();
        let market = Market::new(&spec, Distribution::Uniform, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut values = vec![0.0; 6];
        for _ in 0..2000 {
            draw_values(Distribution::Uniform, &mut rng, &mut values).unwrap();
            let rev = market.revenue(&values, &mut Vec::new()).unwrap();
            assert!(rev <= top_sum(&values, 3, &mut Vec::new()));
        }
    }

    #[test]
    fn unsupported_pairings() {
        let exp = Distribution::Exponential { zeta: 1.0 };
        let pabga = MechanismSpec::pabga(2).unwrap();
        assert!(matches!(mc_revenue_and_surplus(&pabga, exp, 4, 1000, 0), Err(TfmError::Unsupported(_))));
        let myerson = MechanismSpec::myerson_uniform(2).unwrap();
        assert!(matches!(mc_revenue_and_surplus(&myerson, exp, 4, 1000, 0), Err(TfmError::Unsupported(_))));
        assert!(matches!(
            mc_revenue_and_surplus(&MechanismSpec::gta(), Distribution::Uniform, 4, 1000, 0),
            Err(TfmError::Unsupported(_))
        ));
        assert!(mc_revenue_and_surplus(&pabga, Distribution::Uniform, 4, 0, 0).is_err());
        let upga = MechanismSpec::upga(2, Rat::zero()).unwrap();
        assert!(mc_revenue_and_surplus(&upga, exp, 4, 1000, 0).is_ok());
    }

    #[test]
    fn exponential_uniform_price_revenue_matches_order_statistics() {
        let upga = MechanismSpec::upga(2, Rat::zero()).unwrap();
        let est = mc_revenue_and_surplus(&upga, Distribution::Exponential { zeta: 2.0 }, 6, 200_000, 11).unwrap();
        let exact =
            exponential_order_stat_mean(6, 3, Rat::from_integer(2)).unwrap() * BigRational::from_integer(2.into());
        assert!(est.revenue.agrees_with(big_to_f64(&exact), 4.0), "{:?} vs {}", est.revenue, exact);
        let ratio = big_to_f64(&exponential_ratio_of_expectations(6, 2, Rat::from_integer(2)).unwrap());
        assert!((est.ratio_of_means - ratio).abs() <= 4.0 * est.ratio_of_means_stderr);
    }

    #[test]
    fn shading_auction_matches_pay_as_bid_revenue() {
        let shading = MechanismSpec::shading(5, 2).unwrap();
        let pabga = MechanismSpec::pabga(2).unwrap();
        let a = mc_revenue_and_surplus(&shading, Distribution::Uniform, 5, 20_000, 9).unwrap();
        let b = mc_revenue_and_surplus(&pabga, Distribution::Uniform, 5, 20_000, 9).unwrap();
        // same draws, same winners, same payments
        assert!((a.revenue.mean - b.revenue.mean).abs() < 1e-12);
        assert!(mc_revenue_and_surplus(&shading, Distribution::Uniform, 6, 1000, 0).is_err());
    }
}
