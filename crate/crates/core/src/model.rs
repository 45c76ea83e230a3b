//! Domain types shared by every other module: bid and valuation profiles,
//! auction outcomes, block sizes, size-based burn schedules, and the user,
//! miner and joint utility functions.
//!
//! Everything is generic over [`Scalar`] so the same rules run on exact
//! rationals (grid checkers) and on `f64` (Monte Carlo and equilibrium
//! numerics).

use std::fmt::{Debug, Display};

use num::rational::Ratio;
use num::{BigInt, BigRational, Num, Signed, ToPrimitive, Zero};

use crate::equilibrium::ShadingRule;
use crate::error::{Result, TfmError};

/// Exact rational used on discrete grids.
pub type Rat = Ratio<i64>;

/// Numeric type an auction can be evaluated over.
pub trait Scalar: Copy + PartialOrd + Num + Debug + Display + Send + Sync + 'static {
    fn from_rat(r: Rat) -> Self;
    fn to_f64(self) -> f64;
    /// Whether the amount is an integer multiple of `step`.
    fn on_grid(self, step: Rat) -> bool;
    /// Equilibrium bid of a bidder with value `value` under `rule`.
    fn shade(rule: &ShadingRule, value: Self) -> Result<Self>;

    fn is_negative(self) -> bool {
        self < Self::zero()
    }
}

impl Scalar for Rat {
    fn from_rat(r: Rat) -> Self {
        r
    }

    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }

    fn on_grid(self, step: Rat) -> bool {
        (self / step).is_integer()
    }

    fn shade(rule: &ShadingRule, value: Self) -> Result<Self> {
        let exact = rule.bid_exact(&rat_to_big(value))?;
        big_to_rat(&exact)
    }

    fn is_negative(self) -> bool {
        Signed::is_negative(&self)
    }
}

impl Scalar for f64 {
    fn from_rat(r: Rat) -> Self {
        r.to_f64()
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn on_grid(self, step: Rat) -> bool {
        let q = self / step.to_f64();
        q.is_finite() && q == q.round()
    }

    fn shade(rule: &ShadingRule, value: Self) -> Result<Self> {
        rule.bid(value)
    }
}

pub fn rat_to_big(r: Rat) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

pub fn big_to_rat(r: &BigRational) -> Result<Rat> {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => Ok(Rat::new(n, d)),
        _ => Err(TfmError::Overflow),
    }
}

/// Prior over user valuations for the continuous analyses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Exponential with rate `zeta`.
    Exponential { zeta: f64 },
}

impl Display for Distribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distribution::Uniform => write!(f, "uniform"),
            Distribution::Exponential { zeta } => write!(f, "exp({zeta})"),
        }
    }
}

/// Block capacity, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockSize {
    Finite(usize),
    Infinite,
}

impl BlockSize {
    pub fn finite(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(TfmError::InvalidParameter("block size must be at least 1".into()));
        }
        Ok(BlockSize::Finite(k))
    }

    /// Number of slots usable when `n` bids are pending.
    pub fn capacity(self, n: usize) -> usize {
        match self {
            BlockSize::Finite(k) => k.min(n),
            BlockSize::Infinite => n,
        }
    }
}

impl Display for BlockSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockSize::Finite(k) => write!(f, "{k}"),
            BlockSize::Infinite => write!(f, "inf"),
        }
    }
}

/// Bids submitted to one auction round. The first `real_count` entries
/// belong to real users, the rest were injected by the miner.
#[derive(Debug, Clone, PartialEq)]
pub struct BidProfile<T> {
    bids: Vec<T>,
    real_count: usize,
}

impl<T: Scalar> BidProfile<T> {
    pub fn new(bids: Vec<T>, real_count: usize) -> Result<Self> {
        if real_count > bids.len() {
            return Err(TfmError::InvalidProfile(format!("real_count {real_count} exceeds {} bids", bids.len())));
        }
        if let Some(i) = bids.iter().position(|b| b.is_negative()) {
            return Err(TfmError::InvalidProfile(format!("bid {i} is negative")));
        }
        Ok(Self { bids, real_count })
    }

    /// Profile with real bids only.
    pub fn real(bids: Vec<T>) -> Result<Self> {
        let n = bids.len();
        Self::new(bids, n)
    }

    pub fn truthful(values: &ValuationProfile<T>) -> Self {
        Self { bids: values.values().to_vec(), real_count: values.len() }
    }

    pub fn with_fakes(real: &[T], fakes: &[T]) -> Result<Self> {
        let mut bids = Vec::with_capacity(real.len() + fakes.len());
        bids.extend_from_slice(real);
        bids.extend_from_slice(fakes);
        Self::new(bids, real.len())
    }

    pub fn bids(&self) -> &[T] {
        &self.bids
    }

    pub fn real_count(&self) -> usize {
        self.real_count
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn is_fake(&self, i: usize) -> bool {
        i >= self.real_count
    }

    pub fn real_bids(&self) -> &[T] {
        &self.bids[..self.real_count]
    }

    pub fn fake_bids(&self) -> &[T] {
        &self.bids[self.real_count..]
    }

    pub fn check_grid(&self, step: Rat) -> Result<()> {
        match self.bids.iter().position(|b| !b.on_grid(step)) {
            Some(index) => Err(TfmError::OffGrid { index, step: step.to_string() }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuationProfile<T> {
    values: Vec<T>,
}

impl<T: Scalar> ValuationProfile<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| v.is_negative()) {
            return Err(TfmError::InvalidProfile(format!("value {i} is negative")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Allocation, payment and burn of every bid in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T> {
    allocated: Vec<bool>,
    payments: Vec<T>,
    burns: Vec<T>,
}

impl<T: Scalar> Outcome<T> {
    /// Builds an outcome. Lengths must agree and amounts must be non-negative;
    /// EPIR and EPBB are not enforced here so that faulty mechanisms can still
    /// be represented and caught by the checkers.
    pub fn new(allocated: Vec<bool>, payments: Vec<T>, burns: Vec<T>) -> Result<Self> {
        if allocated.len() != payments.len() || payments.len() != burns.len() {
            return Err(TfmError::InvalidProfile(format!(
                "outcome length mismatch: {} allocations, {} payments, {} burns",
                allocated.len(),
                payments.len(),
                burns.len()
            )));
        }
        if payments.iter().chain(burns.iter()).any(|x| x.is_negative()) {
            return Err(TfmError::InvalidProfile("negative payment or burn".into()));
        }
        Ok(Self { allocated, payments, burns })
    }

    pub fn allocated(&self) -> &[bool] {
        &self.allocated
    }

    pub fn payments(&self) -> &[T] {
        &self.payments
    }

    pub fn burns(&self) -> &[T] {
        &self.burns
    }

    pub fn len(&self) -> usize {
        self.allocated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.allocated.is_empty()
    }

    pub fn allocated_count(&self) -> usize {
        self.allocated.iter().filter(|&&a| a).count()
    }

    pub fn total_payment(&self) -> T {
        self.payments.iter().fold(T::zero(), |acc, &p| acc + p)
    }

    pub fn total_burn(&self) -> T {
        self.burns.iter().fold(T::zero(), |acc, &q| acc + q)
    }

    /// First bid violating EPIR: paying while unallocated, or paying more
    /// than its bid.
    pub fn epir_violation(&self, bids: &[T]) -> Option<usize> {
        (0..self.len()).find(
            |&i| {
                if self.allocated[i] {
                    self.payments[i] > bids[i]
                } else {
                    !self.payments[i].is_zero()
                }
            },
        )
    }

    /// First bid whose burn exceeds its payment.
    pub fn epbb_violation(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.burns[i] > self.payments[i])
    }
}

/// Total burn as a function of the number of allocated bids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurnSchedule {
    cardinal: Vec<Rat>,
}

impl BurnSchedule {
    /// `cardinal[k]` is the total burn when `k` bids are allocated.
    pub fn new(cardinal: Vec<Rat>) -> Result<Self> {
        match cardinal.first() {
            Some(c0) if c0.is_zero() => {}
            _ => return Err(TfmError::InvalidParameter("burn schedule must start with cardinal(0) = 0".into())),
        }
        if cardinal.windows(2).any(|w| w[1] < w[0]) {
            return Err(TfmError::InvalidParameter("burn schedule must be non-decreasing".into()));
        }
        Ok(Self { cardinal })
    }

    pub fn zero(max_k: usize) -> Self {
        Self { cardinal: vec![Rat::zero(); max_k + 1] }
    }

    pub fn per_item(reserve: Rat, max_k: usize) -> Self {
        Self { cardinal: (0..=max_k as i64).map(|k| reserve * k).collect() }
    }

    /// Largest allocation count the schedule covers.
    pub fn max_count(&self) -> usize {
        self.cardinal.len() - 1
    }

    pub fn cardinal(&self, k: usize) -> Option<Rat> {
        self.cardinal.get(k).copied()
    }

    /// Marginal burn of the k-th allocated bid, k >= 1.
    pub fn diff(&self, k: usize) -> Option<Rat> {
        if k == 0 {
            return None;
        }
        Some(self.cardinal(k)? - self.cardinal[k - 1])
    }

    pub fn values(&self) -> &[Rat] {
        &self.cardinal
    }
}

/// Indices ordered by bid, highest first, lowest index first among ties.
pub fn rank_order<T: Scalar>(bids: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&a, &b| bids[b].partial_cmp(&bids[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Allocates the highest bids at or above `reserve`, at most the block
/// capacity of them; ties go to the lower index.
pub fn top_k_allocation<T: Scalar>(bids: &[T], block: BlockSize, reserve: T) -> Vec<bool> {
    let cap = block.capacity(bids.len());
    let mut allocated = vec![false; bids.len()];
    for &i in rank_order(bids).iter().take(cap) {
        if bids[i] >= reserve {
            allocated[i] = true;
        }
    }
    allocated
}

/// `value * allocated[i] - payment[i]`.
pub fn user_utility<T: Scalar>(outcome: &Outcome<T>, value: T, i: usize) -> Result<T> {
    if i >= outcome.len() {
        return Err(TfmError::IndexOutOfRange { index: i, len: outcome.len() });
    }
    let gain = if outcome.allocated[i] { value } else { T::zero() };
    Ok(gain - outcome.payments[i])
}

/// Miner revenue: payment net of burn for every allocated real bid, minus the
/// burn of every allocated fake bid (a fake's payment returns to the miner).
pub fn miner_utility<T: Scalar>(outcome: &Outcome<T>, profile: &BidProfile<T>) -> T {
    debug_assert_eq!(outcome.len(), profile.len());
    let mut total = T::zero();
    for i in 0..outcome.len() {
        if profile.is_fake(i) {
            total = total - outcome.burns[i];
        } else {
            total = total + outcome.payments[i] - outcome.burns[i];
        }
    }
    total
}

/// Miner utility plus the utilities of the coalition members. Side payments
/// inside the coalition cancel and are not represented.
pub fn joint_utility<T: Scalar>(
    outcome: &Outcome<T>,
    coalition: &[usize],
    values: &ValuationProfile<T>,
    profile: &BidProfile<T>,
) -> Result<T> {
    let mut total = miner_utility(outcome, profile);
    for &i in coalition {
        if i >= profile.real_count() || i >= values.len() {
            return Err(TfmError::IndexOutOfRange { index: i, len: profile.real_count() });
        }
        total = total + user_utility(outcome, values.values()[i], i)?;
    }
    Ok(total)
}
