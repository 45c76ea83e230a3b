//! Concrete fee mechanisms behind one [`Mechanism`] interface.
//!
//! A mechanism is split into an intended allocation and a settlement rule.
//! Settlement takes the bids together with whatever allocation the miner
//! actually chose, so the same rules price both honest blocks and the
//! deviations explored by the property checkers.

use std::fmt;

use num::{One, Zero};

use crate::equilibrium::ShadingRule;
use crate::error::{Result, TfmError};
use crate::model::{
    rank_order, top_k_allocation, BidProfile, BlockSize, Distribution, Outcome, Rat, Scalar, ValuationProfile,
};

/// The auction rules a block producer is expected to follow.
pub trait Mechanism<T: Scalar>: Sync {
    fn label(&self) -> String;

    /// Capacity the protocol lets the miner fill.
    fn block_size(&self) -> BlockSize;

    /// Bids below this amount can never be included in a block.
    fn reserve(&self) -> T;

    fn intended_allocation(&self, bids: &[T]) -> Vec<bool>;

    /// Payments and burns for an arbitrary allocation of `bids`.
    fn settle(&self, bids: &[T], allocated: &[bool]) -> Result<Outcome<T>>;

    fn admissible(&self, bid: T) -> bool {
        bid >= self.reserve()
    }

    fn run(&self, profile: &BidProfile<T>) -> Result<Outcome<T>> {
        let allocated = self.intended_allocation(profile.bids());
        self.settle(profile.bids(), &allocated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BidSpace {
    Discrete(Rat),
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// Posted price 1 on an unbounded block of integer bids.
    Gta,
    /// Pay-as-bid greedy auction.
    Pabga { block: usize },
    /// Uniform-price greedy auction: winners pay max(reserve, (k+1)-th bid).
    Upga { block: usize, reserve: Rat },
    /// Direct revelation of the pay-as-bid equilibrium under uniform values.
    Shading { n: usize, block: usize, distribution: Distribution },
    /// Uniform-price payments with the reserve burnt for every allocated bid.
    WellReserved { block: usize, reserve: Rat },
    /// Pay-as-bid auction that never fills more than `limit` slots.
    SupplyLimitedPabga { block: usize, limit: usize },
    /// Optimal auction for uniform values: reserve at half the support, no burn.
    MyersonUniform { block: usize, support_max: Rat },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSpec {
    variant: Variant,
    bid_space: BidSpace,
    shading: Option<ShadingRule>,
}

fn check_block(block: usize) -> Result<()> {
    if block == 0 {
        return Err(TfmError::InvalidParameter("block size must be at least 1".into()));
    }
    Ok(())
}

fn check_reserve(reserve: Rat) -> Result<()> {
    if reserve < Rat::zero() {
        return Err(TfmError::InvalidParameter("reserve must be non-negative".into()));
    }
    Ok(())
}

impl PartialEq for ShadingRule {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n() && self.k() == other.k()
    }
}

impl MechanismSpec {
    pub fn new(variant: Variant, bid_space: BidSpace) -> Result<Self> {
        let mut shading = None;
        match &variant {
            Variant::Gta => {
                if bid_space != BidSpace::Discrete(Rat::one()) {
                    return Err(TfmError::InvalidParameter("GTA requires integer bids".into()));
                }
            }
            Variant::Pabga { block } => check_block(*block)?,
            Variant::Upga { block, reserve } | Variant::WellReserved { block, reserve } => {
                check_block(*block)?;
                check_reserve(*reserve)?;
            }
            Variant::Shading { n, block, distribution } => {
                check_block(*block)?;
                if *distribution != Distribution::Uniform {
                    return Err(TfmError::Unsupported(
                        "shading auction has a closed form only for uniform values".into(),
                    ));
                }
                if n < block {
                    return Err(TfmError::InvalidParameter(format!(
                        "shading auction needs n >= k, got n = {n}, k = {block}"
                    )));
                }
                if *block > crate::equilibrium::MAX_VERIFIED_K {
                    return Err(TfmError::Unverified { k: *block });
                }
                if block < n {
                    shading = Some(ShadingRule::new(*n, *block)?);
                }
            }
            Variant::SupplyLimitedPabga { block, limit } => {
                check_block(*block)?;
                if *limit == 0 || limit > block {
                    return Err(TfmError::InvalidParameter(format!(
                        "supply limit must lie in 1..={block}, got {limit}"
                    )));
                }
            }
            Variant::MyersonUniform { block, support_max } => {
                check_block(*block)?;
                check_reserve(*support_max)?;
            }
        }
        if let BidSpace::Discrete(step) = bid_space {
            if step <= Rat::zero() {
                return Err(TfmError::InvalidParameter("grid step must be positive".into()));
            }
        }
        Ok(Self { variant, bid_space, shading })
    }

    pub fn gta() -> Self {
        Self::new(Variant::Gta, BidSpace::Discrete(Rat::one())).expect("valid GTA")
    }

    pub fn pabga(block: usize) -> Result<Self> {
        Self::new(Variant::Pabga { block }, BidSpace::Continuous)
    }

    pub fn upga(block: usize, reserve: Rat) -> Result<Self> {
        Self::new(Variant::Upga { block, reserve }, BidSpace::Continuous)
    }

    pub fn shading(n: usize, block: usize) -> Result<Self> {
        Self::new(Variant::Shading { n, block, distribution: Distribution::Uniform }, BidSpace::Continuous)
    }

    pub fn well_reserved(block: usize, reserve: Rat) -> Result<Self> {
        Self::new(Variant::WellReserved { block, reserve }, BidSpace::Continuous)
    }

    pub fn supply_limited_pabga(block: usize, limit: usize) -> Result<Self> {
        Self::new(Variant::SupplyLimitedPabga { block, limit }, BidSpace::Continuous)
    }

    /// Optimal auction for values uniform on `[0, 1]` (reserve 1/2).
    pub fn myerson_uniform(block: usize) -> Result<Self> {
        Self::myerson_uniform_scaled(block, Rat::one())
    }

    /// Optimal auction for values uniform on `[0, support_max]`.
    pub fn myerson_uniform_scaled(block: usize, support_max: Rat) -> Result<Self> {
        Self::new(Variant::MyersonUniform { block, support_max }, BidSpace::Continuous)
    }

    pub fn with_bid_space(self, bid_space: BidSpace) -> Result<Self> {
        Self::new(self.variant, bid_space)
    }

    pub fn discrete(self, step: Rat) -> Result<Self> {
        self.with_bid_space(BidSpace::Discrete(step))
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    pub fn bid_space(&self) -> BidSpace {
        self.bid_space
    }

    /// Items sold; for the supply-limited auction this is the nominal block,
    /// not the limit.
    pub fn items(&self) -> BlockSize {
        match self.variant {
            Variant::Gta => BlockSize::Infinite,
            Variant::Pabga { block }
            | Variant::Upga { block, .. }
            | Variant::Shading { block, .. }
            | Variant::WellReserved { block, .. }
            | Variant::SupplyLimitedPabga { block, .. }
            | Variant::MyersonUniform { block, .. } => BlockSize::Finite(block),
        }
    }

    pub fn reserve_rat(&self) -> Rat {
        match self.variant {
            Variant::Gta => Rat::one(),
            Variant::Upga { reserve, .. } | Variant::WellReserved { reserve, .. } => reserve,
            Variant::MyersonUniform { support_max, .. } => support_max / 2,
            Variant::Pabga { .. } | Variant::Shading { .. } | Variant::SupplyLimitedPabga { .. } => Rat::zero(),
        }
    }

    /// Burn taken from every allocated bid.
    pub fn unit_burn(&self) -> Rat {
        match self.variant {
            Variant::WellReserved { reserve, .. } => reserve,
            _ => Rat::zero(),
        }
    }

    /// Whether truthful bidding is a dominant strategy for users.
    pub fn is_truthful(&self) -> bool {
        matches!(
            self.variant,
            Variant::Gta | Variant::Upga { .. } | Variant::WellReserved { .. } | Variant::MyersonUniform { .. }
        )
    }
}

impl fmt::Display for MechanismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            Variant::Gta => write!(f, "GTA"),
            Variant::Pabga { block } => write!(f, "PABGA(k={block})"),
            Variant::Upga { block, reserve } => write!(f, "UPGA(k={block}, r={reserve})"),
            Variant::Shading { n, block, .. } => write!(f, "Shading(n={n}, k={block})"),
            Variant::WellReserved { block, reserve } => write!(f, "WellReserved(k={block}, r={reserve})"),
            Variant::SupplyLimitedPabga { block, limit } => {
                write!(f, "SupplyLimitedPABGA(k={block}, limit={limit})")
            }
            Variant::MyersonUniform { block, support_max } => {
                write!(f, "MyersonUniform(k={block}, reserve={})", support_max / 2)
            }
        }
    }
}

/// `max(reserve, (k+1)-th highest bid)`, the (k+1)-th bid being 0 when there
/// are at most k bids.
fn uniform_price<T: Scalar>(bids: &[T], k: usize, reserve: T) -> T {
    let order = rank_order(bids);
    let next = order.get(k).map(|&i| bids[i]).unwrap_or_else(T::zero);
    if next > reserve {
        next
    } else {
        reserve
    }
}

fn min<T: Scalar>(a: T, b: T) -> T {
    if a < b {
        a
    } else {
        b
    }
}

impl<T: Scalar> Mechanism<T> for MechanismSpec {
    fn label(&self) -> String {
        self.to_string()
    }

    fn block_size(&self) -> BlockSize {
        match self.variant {
            Variant::SupplyLimitedPabga { limit, .. } => BlockSize::Finite(limit),
            _ => self.items(),
        }
    }

    fn reserve(&self) -> T {
        T::from_rat(self.reserve_rat())
    }

    fn intended_allocation(&self, bids: &[T]) -> Vec<bool> {
        top_k_allocation(bids, Mechanism::<T>::block_size(self), self.reserve())
    }

    fn settle(&self, bids: &[T], allocated: &[bool]) -> Result<Outcome<T>> {
        if bids.len() != allocated.len() {
            return Err(TfmError::InvalidProfile("allocation length differs from bid count".into()));
        }
        let n = bids.len();
        let mut payments = vec![T::zero(); n];
        let mut burns = vec![T::zero(); n];
        let unit_burn = T::from_rat(self.unit_burn());
        // Uniform-price rules: an allocated bid never pays more than it bid,
        // which only binds when the miner skips a higher bid.
        let price = match self.variant {
            Variant::Upga { block, .. }
            | Variant::WellReserved { block, .. }
            | Variant::MyersonUniform { block, .. } => Some(uniform_price(bids, block, self.reserve())),
            _ => None,
        };
        for i in (0..n).filter(|&i| allocated[i]) {
            payments[i] = match (&self.variant, price) {
                (Variant::Gta, _) => T::one(),
                (Variant::Pabga { .. } | Variant::SupplyLimitedPabga { .. }, _) => bids[i],
                (Variant::Shading { .. }, _) => match &self.shading {
                    Some(rule) => T::shade(rule, bids[i])?,
                    None => T::zero(),
                },
                (_, Some(p)) => min(p, bids[i]),
                (_, None) => unreachable!("uniform-price variants always carry a price"),
            };
            burns[i] = unit_burn;
        }
        Outcome::new(allocated.to_vec(), payments, burns)
    }
}

/// Runs the intended rules of `spec` on `profile`, rejecting bids that are
/// off the mechanism's discrete grid.
pub fn run_mechanism<T: Scalar>(spec: &MechanismSpec, profile: &BidProfile<T>) -> Result<Outcome<T>> {
    if let BidSpace::Discrete(step) = spec.bid_space {
        profile.check_grid(step)?;
    }
    let outcome = spec.run(profile)?;
    debug_assert!(outcome.epir_violation(profile.bids()).is_none(), "{spec} broke EPIR");
    debug_assert!(outcome.epbb_violation().is_none(), "{spec} broke EPBB");
    debug_assert!(match Mechanism::<T>::block_size(spec) {
        BlockSize::Finite(k) => outcome.allocated_count() <= k,
        BlockSize::Infinite => true,
    });
    Ok(outcome)
}

/// Shading auction on reported values: the `k` highest values win and each
/// winner pays its pay-as-bid equilibrium bid.
pub fn shading_outcome(values: &ValuationProfile<f64>, n: usize, k: usize) -> Result<Outcome<f64>> {
    if values.len() != n {
        return Err(TfmError::InvalidParameter(format!("expected {n} values, got {}", values.len())));
    }
    if let Some(v) = values.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(TfmError::InvalidParameter(format!("value {v} outside [0, 1]")));
    }
    let spec = MechanismSpec::shading(n, k)?;
    spec.run(&BidProfile::truthful(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::miner_utility;

    fn r(n: i64) -> Rat {
        Rat::from_integer(n)
    }

    fn rs(xs: &[i64]) -> Vec<Rat> {
        xs.iter().map(|&x| r(x)).collect()
    }

    fn run(spec: &MechanismSpec, bids: &[i64]) -> Outcome<Rat> {
        run_mechanism(spec, &BidProfile::real(rs(bids)).unwrap()).unwrap()
    }

    #[test]
    fn gta_example() {
        let o = run(&MechanismSpec::gta(), &[2, 0, 1]);
        assert_eq!(o.allocated(), &[true, false, true]);
        assert_eq!(o.payments(), rs(&[1, 0, 1]).as_slice());
        assert_eq!(o.burns(), rs(&[0, 0, 0]).as_slice());
    }

    #[test]
    fn upga_example() {
        let o = run(&MechanismSpec::upga(2, r(0)).unwrap(), &[5, 4, 3, 1]);
        assert_eq!(o.allocated(), &[true, true, false, false]);
        assert_eq!(o.payments(), rs(&[3, 3, 0, 0]).as_slice());
    }

    #[test]
    fn upga_with_short_profile_charges_reserve() {
        let o = run(&MechanismSpec::upga(3, r(2)).unwrap(), &[5, 4, 1]);
        assert_eq!(o.allocated(), &[true, true, false]);
        assert_eq!(o.payments(), rs(&[2, 2, 0]).as_slice());
        let o = run(&MechanismSpec::upga(3, r(0)).unwrap(), &[5, 4]);
        assert_eq!(o.payments(), rs(&[0, 0]).as_slice());
    }

    #[test]
    fn well_reserved_example() {
        let spec = MechanismSpec::well_reserved(2, r(2)).unwrap();
        let profile = BidProfile::real(rs(&[5, 4, 3])).unwrap();
        let o = run_mechanism(&spec, &profile).unwrap();
        assert_eq!(o.payments(), rs(&[3, 3, 0]).as_slice());
        assert_eq!(o.burns(), rs(&[2, 2, 0]).as_slice());
        assert_eq!(miner_utility(&o, &profile), r(2));
    }

    #[test]
    fn pabga_example() {
        let spec = MechanismSpec::pabga(2).unwrap();
        let profile = BidProfile::real(rs(&[5, 4, 3])).unwrap();
        let o = run_mechanism(&spec, &profile).unwrap();
        assert_eq!(o.payments(), rs(&[5, 4, 0]).as_slice());
        assert_eq!(miner_utility(&o, &profile), r(9));
    }

    #[test]
    fn supply_limit_caps_allocation() {
        let o = run(&MechanismSpec::supply_limited_pabga(3, 2).unwrap(), &[5, 4, 3, 1]);
        assert_eq!(o.allocated(), &[true, true, false, false]);
        assert_eq!(o.payments(), rs(&[5, 4, 0, 0]).as_slice());
    }

    #[test]
    fn myerson_reserve_is_half_support() {
        let spec = MechanismSpec::myerson_uniform_scaled(2, r(4)).unwrap();
        let o = run(&spec, &[3, 1, 2]);
        assert_eq!(o.allocated(), &[true, false, true]);
        assert_eq!(o.payments(), rs(&[2, 0, 2]).as_slice());
        assert_eq!(o.total_burn(), r(0));
    }

    #[test]
    fn off_grid_bid_is_rejected() {
        let spec = MechanismSpec::gta();
        let profile = BidProfile::real(vec![Rat::new(3, 2)]).unwrap();
        assert!(matches!(run_mechanism(&spec, &profile), Err(TfmError::OffGrid { index: 0, .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(MechanismSpec::pabga(0).is_err());
        assert!(MechanismSpec::upga(1, r(-1)).is_err());
        assert!(MechanismSpec::supply_limited_pabga(2, 3).is_err());
        assert!(MechanismSpec::gta().with_bid_space(BidSpace::Continuous).is_err());
        assert!(MechanismSpec::shading(3, 4).is_err());
        assert!(matches!(MechanismSpec::shading(20, 11), Err(TfmError::Unverified { .. })));
        assert!(MechanismSpec::new(
            Variant::Shading { n: 4, block: 2, distribution: Distribution::Exponential { zeta: 1.0 } },
            BidSpace::Continuous
        )
        .is_err());
    }

    #[test]
    fn shading_examples() {
        let o = shading_outcome(&ValuationProfile::new(vec![0.8, 0.3]).unwrap(), 2, 1).unwrap();
        assert_eq!(o.allocated(), &[true, false]);
        assert!((o.payments()[0] - 0.4).abs() < 1e-15);

        let o = shading_outcome(&ValuationProfile::new(vec![1.0, 0.5, 0.2, 0.1]).unwrap(), 4, 2).unwrap();
        assert_eq!(o.allocated(), &[true, true, false, false]);
        assert!((o.payments()[0] - 0.5).abs() < 1e-15);

        let o = shading_outcome(&ValuationProfile::new(vec![0.0; 5]).unwrap(), 5, 3).unwrap();
        assert!(o.payments().iter().all(|&p| p == 0.0));

        assert!(shading_outcome(&ValuationProfile::new(vec![0.5; 12]).unwrap(), 12, 11).is_err());
        assert!(shading_outcome(&ValuationProfile::new(vec![0.5; 2]).unwrap(), 2, 3).is_err());
    }

    #[test]
    fn shading_on_exact_rationals() {
        let spec = MechanismSpec::shading(4, 2).unwrap();
        let profile = BidProfile::real(vec![r(1), Rat::new(1, 2), Rat::new(1, 5), Rat::new(1, 10)]).unwrap();
        let o = spec.run(&profile).unwrap();
        assert_eq!(o.payments()[0], Rat::new(1, 2));
        // s(1/2) for n = 4, k = 2: (1/2)(1/2)(4 - 3/2)/(3 - 1) = 5/16
        assert_eq!(o.payments()[1], Rat::new(5, 16));
    }

    #[test]
    fn everyone_wins_when_block_covers_all_bidders() {
        let o = shading_outcome(&ValuationProfile::new(vec![0.9, 0.1]).unwrap(), 2, 2).unwrap();
        assert_eq!(o.allocated(), &[true, true]);
        assert_eq!(o.total_payment(), 0.0);
    }
}
