//! Transaction fee mechanism laboratory.
//!
//! Auction rules for block space, exhaustive checkers for the usual
//! incentive and budget desiderata on small discrete grids, the symmetric
//! equilibrium of the pay-as-bid auction, and exact plus Monte Carlo revenue
//! analysis.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod properties;
pub mod revenue;

pub use error::{Result, TfmError};
pub use mechanism::{run_mechanism, shading_outcome, BidSpace, Mechanism, MechanismSpec, Variant};
pub use model::{
    joint_utility, miner_utility, top_k_allocation, user_utility, BidProfile, BlockSize, BurnSchedule, Distribution,
    Outcome, Rat, Scalar, ValuationProfile,
};
