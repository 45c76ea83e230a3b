//! Symmetric Bayes-Nash bidding in the pay-as-bid greedy auction with
//! uniform values on `[0, 1]`, plus the order-statistic means used by the
//! closed-form revenue formulas.
//!
//! With `n` bidders and `k` items the equilibrium bid is
//!
//! ```text
//! s(v) = ((n - k) v / n) * P(n, k, v) / P(n - 1, k, v)
//! P(n, k, v) = sum_{i=0}^{k-1} C(n, n-i) C(n-i-1, n-k) (-v)^(k-1-i)
//! ```
//!
//! The defining sum alternates in sign and cancels badly near `v = 1`, so
//! floating-point evaluation re-expands `P` exactly in the shifted variable
//! `u = 1 - v`, where every coefficient is a non-negative integer. Rational
//! inputs go through the literal sum in exact arithmetic.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::{Result, TfmError};
use crate::model::Rat;

/// Largest block size for which the closed form is treated as verified.
pub const MAX_VERIFIED_K: usize = 10;

const INVERSE_TOLERANCE: f64 = 1e-12;
const INVERSE_MAX_ITERS: usize = 200;

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    num::integer::binomial(BigInt::from(n), BigInt::from(k))
}

/// Coefficients of `P(n, k, ·)` in powers of `v`, lowest degree first.
fn literal_coefficients(n: usize, k: usize) -> Vec<BigInt> {
    let mut coeffs = vec![BigInt::zero(); k];
    for i in 0..k {
        let degree = k - 1 - i;
        let mut c = binomial(n as u64, (n - i) as u64) * binomial((n - i - 1) as u64, (n - k) as u64);
        if degree % 2 == 1 {
            c = -c;
        }
        coeffs[degree] = c;
    }
    coeffs
}

/// Re-expands `sum_m a_m v^m` as `sum_j d_j u^j` with `v = 1 - u`.
fn shift_to_one_minus(coeffs: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); coeffs.len()];
    for (m, a) in coeffs.iter().enumerate() {
        for (j, slot) in out.iter_mut().enumerate().take(m + 1) {
            let term = a * binomial(m as u64, j as u64);
            if j % 2 == 1 {
                *slot -= term;
            } else {
                *slot += term;
            }
        }
    }
    out
}

fn check_poly_args(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(TfmError::InvalidParameter(format!("P(n, k) needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    Ok(())
}

/// `P(n, k, v)` in floating point.
pub fn poly_p(n: usize, k: usize, v: f64) -> Result<f64> {
    check_poly_args(n, k)?;
    Ok(ShiftedPoly::new(n, k).eval(v))
}

/// `P(n, k, v)` evaluated exactly.
pub fn poly_p_exact(n: usize, k: usize, v: &BigRational) -> Result<BigRational> {
    check_poly_args(n, k)?;
    Ok(horner_exact(&literal_coefficients(n, k), v))
}

fn horner_exact(coeffs: &[BigInt], v: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in coeffs.iter().rev() {
        acc = acc * v + BigRational::from_integer(c.clone());
    }
    acc
}

#[derive(Debug, Clone)]
struct ShiftedPoly {
    /// Coefficients in `u = 1 - v`, lowest degree first; all non-negative.
    coeffs: Vec<f64>,
}

impl ShiftedPoly {
    fn new(n: usize, k: usize) -> Self {
        let shifted = shift_to_one_minus(&literal_coefficients(n, k));
        debug_assert!(shifted.iter().all(|c| !c.is_negative()));
        Self { coeffs: shifted.iter().map(|c| c.to_f64().unwrap_or(f64::INFINITY)).collect() }
    }

    fn eval(&self, v: f64) -> f64 {
        let u = 1.0 - v;
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }
}

/// Equilibrium bid function for `n` bidders and `k` items under uniform
/// values. Coefficients are computed once, so reuse the rule across calls.
#[derive(Debug, Clone)]
pub struct ShadingRule {
    n: usize,
    k: usize,
    numer: ShiftedPoly,
    denom: ShiftedPoly,
    numer_exact: Vec<BigInt>,
    denom_exact: Vec<BigInt>,
    verified: bool,
}

impl ShadingRule {
    /// Rule for `1 <= k <= min(n - 1, 10)`.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k > MAX_VERIFIED_K {
            return Err(TfmError::Unverified { k });
        }
        Self::build(n, k, true)
    }

    /// Same as [`ShadingRule::new`] but accepts `k > 10`; such rules report
    /// `is_verified() == false`.
    pub fn new_unverified(n: usize, k: usize) -> Result<Self> {
        Self::build(n, k, k <= MAX_VERIFIED_K)
    }

    fn build(n: usize, k: usize, verified: bool) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(TfmError::InvalidParameter(format!("equilibrium bid needs 1 <= k < n, got n = {n}, k = {k}")));
        }
        Ok(Self {
            n,
            k,
            numer: ShiftedPoly::new(n, k),
            denom: ShiftedPoly::new(n - 1, k),
            numer_exact: literal_coefficients(n, k),
            denom_exact: literal_coefficients(n - 1, k),
            verified,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    /// `P(n, k, v) / P(n - 1, k, v)`, at least 1 on `[0, 1]`.
    pub fn ratio(&self, v: f64) -> f64 {
        self.numer.eval(v) / self.denom.eval(v)
    }

    /// `((n - k) / n) v`, the lower envelope of the bid function.
    pub fn shading_floor(&self, v: f64) -> f64 {
        (self.n - self.k) as f64 * v / self.n as f64
    }

    pub fn bid(&self, v: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&v) {
            return Err(TfmError::InvalidParameter(format!("value {v} outside [0, 1]")));
        }
        Ok(self.shading_floor(v) * self.ratio(v))
    }

    pub fn bid_exact(&self, v: &BigRational) -> Result<BigRational> {
        if v.is_negative() || *v > BigRational::one() {
            return Err(TfmError::InvalidParameter(format!("value {v} outside [0, 1]")));
        }
        let floor = BigRational::new(BigInt::from(self.n - self.k), BigInt::from(self.n)) * v;
        if floor.is_zero() {
            return Ok(floor);
        }
        Ok(floor * horner_exact(&self.numer_exact, v) / horner_exact(&self.denom_exact, v))
    }

    /// Exact check of `s(v) >= ((n - k) / n) v` at the rational `v`.
    pub fn floor_holds_exact(&self, v: &BigRational) -> Result<bool> {
        Ok(horner_exact(&self.numer_exact, v) >= horner_exact(&self.denom_exact, v))
    }

    /// Exact sweep of `v = j / points`, `j = 0..=points`, checking that the
    /// bid strictly increases and never drops below `((n - k) / n) v`.
    pub fn sweep_exact(&self, points: u32) -> Result<GridSweep> {
        if points == 0 {
            return Err(TfmError::InvalidParameter("sweep needs at least one interval".into()));
        }
        let mut sweep = GridSweep { points, first_non_increasing: None, first_below_floor: None };
        let mut prev: Option<BigRational> = None;
        for j in 0..=points {
            let v = BigRational::new(BigInt::from(j), BigInt::from(points));
            let s = self.bid_exact(&v)?;
            if sweep.first_non_increasing.is_none() && prev.as_ref().is_some_and(|p| s <= *p) {
                sweep.first_non_increasing = Some(j);
            }
            let floor = BigRational::new(BigInt::from(self.n - self.k), BigInt::from(self.n)) * &v;
            if sweep.first_below_floor.is_none() && s < floor {
                sweep.first_below_floor = Some(j);
            }
            prev = Some(s);
        }
        Ok(sweep)
    }

    /// Value whose equilibrium bid is `b`, clamped to `[0, 1]`.
    pub fn inverse(&self, b: f64) -> Result<f64> {
        invert_monotone(|v| self.shading_floor(v) * self.ratio(v), b)
    }
}

/// Outcome of [`ShadingRule::sweep_exact`]; failures are grid indices `j`
/// standing for `v = j / points`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSweep {
    pub points: u32,
    pub first_non_increasing: Option<u32>,
    pub first_below_floor: Option<u32>,
}

impl GridSweep {
    pub fn passes(&self) -> bool {
        self.first_non_increasing.is_none() && self.first_below_floor.is_none()
    }
}

/// Bisection inverse of a non-decreasing bid function on `[0, 1]`.
fn invert_monotone(strategy: impl Fn(f64) -> f64, b: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if b <= strategy(lo) {
        return Ok(0.0);
    }
    if b >= strategy(hi) {
        return Ok(1.0);
    }
    for _ in 0..INVERSE_MAX_ITERS {
        if hi - lo <= INVERSE_TOLERANCE {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let s_mid = strategy(mid);
        if s_mid.is_nan() {
            return Err(TfmError::BisectionFailed { bid: b });
        }
        if s_mid < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(TfmError::BisectionFailed { bid: b })
}

/// `s(v)` for `n` bidders, `k` items and uniform values.
pub fn shade_bid_uniform(n: usize, k: usize, v: f64) -> Result<f64> {
    ShadingRule::new(n, k)?.bid(v)
}

/// Probability that a bidder with value `v` is among the top `k` of `n` when
/// everyone follows the same increasing strategy.
pub fn win_probability(n: usize, k: usize, v: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    let m = n - 1;
    let mut total = 0.0;
    let mut c = 1.0_f64; // C(m, i)
    for i in 0..k {
        total += c * (1.0 - v).powi(i as i32) * v.powi((m - i) as i32);
        c = c * (m - i) as f64 / (i + 1) as f64;
    }
    total
}

/// Largest gain a bidder with value `v` can obtain by deviating to a bid on
/// the grid `{0, step, 2 step, ..} ∩ [0, v]` when all opponents play the
/// closed-form equilibrium. Values near zero mean `s` is a best response.
pub fn best_response_gap(n: usize, k: usize, v: f64, grid_step: f64) -> Result<f64> {
    let rule = ShadingRule::new(n, k)?;
    best_response_gap_with(|x| rule.shading_floor(x) * rule.ratio(x), n, k, v, grid_step)
}

/// [`best_response_gap`] for an arbitrary non-decreasing symmetric strategy.
pub fn best_response_gap_with(
    strategy: impl Fn(f64) -> f64,
    n: usize,
    k: usize,
    v: f64,
    grid_step: f64,
) -> Result<f64> {
    if grid_step.is_nan() || grid_step <= 0.0 {
        return Err(TfmError::InvalidParameter("grid step must be positive".into()));
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(TfmError::InvalidParameter(format!("value {v} outside [0, 1]")));
    }
    let on_path = win_probability(n, k, v) * (v - strategy(v));
    let steps = (v / grid_step).floor() as usize;
    let mut best = f64::NEG_INFINITY;
    for j in 0..=steps {
        let b = (j as f64 * grid_step).min(v);
        let t = invert_monotone(&strategy, b)?;
        best = best.max(win_probability(n, k, t) * (v - b));
    }
    Ok(best - on_path)
}

/// Mean of the i-th highest of `n` iid uniforms: `(n + 1 - i) / (n + 1)`.
pub fn uniform_order_stat_mean(n: usize, i: usize) -> Result<Rat> {
    if i == 0 || i > n {
        return Err(TfmError::InvalidParameter(format!("order statistic {i} out of range 1..={n}")));
    }
    Ok(Rat::new((n + 1 - i) as i64, (n + 1) as i64))
}

/// `sum_{j=lo}^{hi} 1/j` exactly, by binary splitting.
pub fn harmonic_range(lo: usize, hi: usize) -> BigRational {
    fn split(lo: u64, hi: u64) -> (BigInt, BigInt) {
        // returns (p, q) with p / q = sum_{j=lo}^{hi} 1/j, lo <= hi
        if lo == hi {
            return (BigInt::one(), BigInt::from(lo));
        }
        let mid = lo + (hi - lo) / 2;
        let (p1, q1) = split(lo, mid);
        let (p2, q2) = split(mid + 1, hi);
        (&p1 * &q2 + &p2 * &q1, q1 * q2)
    }
    let lo = lo.max(1);
    if lo > hi {
        return BigRational::zero();
    }
    let (p, q) = split(lo as u64, hi as u64);
    BigRational::new(p, q)
}

pub fn harmonic(n: usize) -> BigRational {
    harmonic_range(1, n)
}

/// Mean of the i-th highest of `n` iid exponentials with rate `zeta`:
/// `(H_n - H_{i-1}) / zeta`.
pub fn exponential_order_stat_mean(n: usize, i: usize, zeta: Rat) -> Result<BigRational> {
    if i == 0 || i > n {
        return Err(TfmError::InvalidParameter(format!("order statistic {i} out of range 1..={n}")));
    }
    if *zeta.numer() <= 0 {
        return Err(TfmError::InvalidParameter("exponential rate must be positive".into()));
    }
    let zeta = crate::model::rat_to_big(zeta);
    Ok(harmonic_range(i, n) / zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;

    fn big(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn poly_examples() {
        for n in 1..8 {
            for v in [0.0, 0.3, 1.0] {
                assert_eq!(poly_p(n, 1, v).unwrap(), 1.0);
            }
        }
        assert!((poly_p(4, 2, 0.5).unwrap() - 2.5).abs() < 1e-15);
        assert!((poly_p(3, 2, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(poly_p(2, 3, 0.5).is_err());
        assert!(poly_p(2, 0, 0.5).is_err());
    }

    #[test]
    fn poly_second_degree_matches_direct_expansion() {
        // P(n, 2, v) = n - (n - 1) v
        for n in 2..30usize {
            for j in 0..=10 {
                let v = big(j, 10);
                let expected = BigRational::from_usize(n).unwrap() - BigRational::from_usize(n - 1).unwrap() * &v;
                assert_eq!(poly_p_exact(n, 2, &v).unwrap(), expected);
            }
        }
    }

    #[test]
    fn shifted_basis_matches_closed_coefficients() {
        // independent route: P(n, k, 1 - u) = sum_j C(n - k + j, j) u^j
        for n in 2..40usize {
            for k in 1..=n.min(10) {
                let shifted = shift_to_one_minus(&literal_coefficients(n, k));
                for (j, d) in shifted.iter().enumerate() {
                    assert_eq!(*d, binomial((n - k + j) as u64, j as u64), "n={n} k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn float_and_exact_paths_agree() {
        for n in 2..25usize {
            for k in 1..=n.min(10) {
                for j in 0..=20 {
                    let exact = poly_p_exact(n, k, &big(j, 20)).unwrap().to_f64().unwrap();
                    let float = poly_p(n, k, j as f64 / 20.0).unwrap();
                    assert!((exact - float).abs() <= 1e-12 * exact.abs().max(1.0), "n={n} k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn bid_examples() {
        assert!((shade_bid_uniform(2, 1, 0.8).unwrap() - 0.4).abs() < 1e-15);
        assert!((shade_bid_uniform(4, 2, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(shade_bid_uniform(7, 3, 0.0).unwrap(), 0.0);
        let rule = ShadingRule::new(4, 2).unwrap();
        assert_eq!(rule.bid_exact(&big(1, 1)).unwrap(), big(1, 2));
        assert_eq!(rule.bid_exact(&BigRational::zero()).unwrap(), BigRational::zero());
    }

    #[test]
    fn first_price_single_item_is_classic() {
        for n in 2..20usize {
            let rule = ShadingRule::new(n, 1).unwrap();
            for j in 0..=10 {
                let v = big(j, 10);
                let expected = big((n - 1) as i64, n as i64) * &v;
                assert_eq!(rule.bid_exact(&v).unwrap(), expected);
            }
        }
    }

    #[test]
    fn bid_errors() {
        assert!(matches!(ShadingRule::new(20, 11), Err(TfmError::Unverified { k: 11 })));
        assert!(ShadingRule::new(4, 4).is_err());
        assert!(ShadingRule::new(4, 0).is_err());
        let rule = ShadingRule::new_unverified(20, 11).unwrap();
        assert!(!rule.is_verified());
        assert!(rule.bid(0.5).unwrap() > 0.0);
        assert!(ShadingRule::new(4, 2).unwrap().bid(1.5).is_err());
    }

    #[test]
    fn win_probability_examples() {
        for t in [0.0, 0.25, 0.9] {
            assert!((win_probability(2, 1, t) - t).abs() < 1e-15);
            assert_eq!(win_probability(5, 5, t), 1.0);
        }
        assert!((win_probability(4, 2, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn best_response_gap_examples() {
        assert!(best_response_gap(2, 1, 0.5, 1e-3).unwrap() <= 1e-3);
        assert!(best_response_gap(5, 2, 0.7, 1e-3).unwrap() <= 2e-3);
        assert_eq!(best_response_gap(6, 3, 0.0, 1e-2).unwrap(), 0.0);
        assert!(best_response_gap(6, 3, 0.5, 0.0).is_err());
    }

    #[test]
    fn truthful_bidding_is_not_an_equilibrium() {
        // against truthful opponents the best deviation maximizes b^2 (v - b),
        // attained at b = 2v/3 with payoff 4v^3/27
        let v: f64 = 0.8;
        let gap = best_response_gap_with(|x| x, 3, 1, v, 1e-3).unwrap();
        assert!((gap - 4.0 * v.powi(3) / 27.0).abs() < 1e-5, "gap = {gap}");
    }

    #[test]
    fn exact_sweeps_pass_on_small_instances() {
        for (n, k) in [(2, 1), (5, 2), (9, 8), (12, 10)] {
            let sweep = ShadingRule::new(n, k).unwrap().sweep_exact(200).unwrap();
            assert!(sweep.passes(), "n = {n}, k = {k}: {sweep:?}");
        }
        assert!(ShadingRule::new(3, 1).unwrap().sweep_exact(0).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let rule = ShadingRule::new(6, 2).unwrap();
        for j in 1..20 {
            let v = j as f64 / 20.0;
            let b = rule.bid(v).unwrap();
            assert!((rule.inverse(b).unwrap() - v).abs() < 1e-9);
        }
        assert_eq!(rule.inverse(-1.0).unwrap(), 0.0);
        assert_eq!(rule.inverse(2.0).unwrap(), 1.0);
    }

    #[test]
    fn order_statistic_means() {
        assert_eq!(uniform_order_stat_mean(4, 1).unwrap(), Rat::new(4, 5));
        assert_eq!(uniform_order_stat_mean(4, 4).unwrap(), Rat::new(1, 5));
        assert_eq!(uniform_order_stat_mean(10, 4).unwrap(), Rat::new(7, 11));
        assert!(uniform_order_stat_mean(4, 0).is_err());
        assert!(uniform_order_stat_mean(4, 5).is_err());
        for n in 1..30usize {
            let total: Rat = (1..=n).map(|i| uniform_order_stat_mean(n, i).unwrap()).sum();
            assert_eq!(total, Rat::new(n as i64, 2));
        }

        let one = Rat::from_integer(1);
        assert_eq!(exponential_order_stat_mean(4, 1, one).unwrap(), big(25, 12));
        assert_eq!(exponential_order_stat_mean(4, 2, one).unwrap(), big(13, 12));
        for n in 1..12usize {
            let zeta = Rat::new(3, 2);
            assert_eq!(
                exponential_order_stat_mean(n, n, zeta).unwrap(),
                BigRational::one() / (big(3, 2) * BigRational::from_usize(n).unwrap())
            );
            for i in 1..n {
                let d = exponential_order_stat_mean(n, i, zeta).unwrap()
                    - exponential_order_stat_mean(n, i + 1, zeta).unwrap();
                assert_eq!(d, BigRational::one() / (big(3, 2) * BigRational::from_usize(i).unwrap()));
            }
        }
        assert!(exponential_order_stat_mean(4, 1, Rat::from_integer(0)).is_err());
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(0), BigRational::zero());
        assert_eq!(harmonic(1), BigRational::one());
        assert_eq!(harmonic(4), big(25, 12));
        // against naive accumulation
        let mut naive = BigRational::zero();
        for j in 1..=200 {
            naive += big(1, j);
        }
        assert_eq!(harmonic(200), naive);
    }
}
