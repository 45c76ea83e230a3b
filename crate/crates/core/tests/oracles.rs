//! Reference values computed by oracles independent of the library's
//! formulas, frozen as literals. Each test checks the oracle against the
//! frozen value and the library against both.

use num::{BigRational, ToPrimitive};

use tfm_lab::equilibrium::{
    exponential_order_stat_mean, harmonic, poly_p, uniform_order_stat_mean, win_probability, ShadingRule,
};
use tfm_lab::revenue::{
    exponential_ratio_of_expectations, mc_revenue_and_surplus, uniform_pabga_revenue_exact,
    uniform_ratio_of_expectations,
};
use tfm_lab::{
    joint_utility, miner_utility, run_mechanism, BidProfile, Distribution, MechanismSpec, Rat, ValuationProfile,
};

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |a, i| a * (n - i) as f64 / (i + 1) as f64)
}

/// Symmetric pay-as-bid equilibrium as the expected highest losing rival
/// value below `v`, integrated numerically.
fn conditional_rival_oracle(n: usize, k: usize, v: f64) -> f64 {
    let m = n - 1;
    let c = binom(m, k - 1) * (m - k + 1) as f64;
    let dens = |y: f64| c * y.powi((m - k) as i32) * (1.0 - y).powi((k - 1) as i32);
    let steps = 20_000;
    let h = v / steps as f64;
    let mut num = 0.0;
    for i in 0..=steps {
        let y = i as f64 * h;
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        num += w * y * dens(y);
    }
    num *= h / 3.0;
    let cdf: f64 = (0..k).map(|j| binom(m, j) * (1.0 - v).powi(j as i32) * v.powi((m - j) as i32)).sum();
    num / cdf
}

const FROZEN_BIDS: [(usize, usize, f64, f64); 8] = [
    (2, 1, 0.8, 0.4),
    (4, 2, 1.0, 0.5),
    (4, 2, 0.5, 0.3125),
    (5, 2, 0.7, 0.486315789473684),
    (10, 3, 0.5, 0.426086956521739),
    (12, 10, 0.3, 0.140393895605158),
    (20, 5, 0.9, 0.743796414852753),
    (64, 10, 0.6, 0.586009404224900),
];

#[test]
fn equilibrium_bids_match_integration_oracle() {
    for (n, k, v, frozen) in FROZEN_BIDS {
        let oracle = conditional_rival_oracle(n, k, v);
        assert!((oracle - frozen).abs() < 1e-10, "oracle drifted at ({n},{k},{v}): {oracle}");
        let bid = ShadingRule::new(n, k).unwrap().bid(v).unwrap();
        assert!((bid - frozen).abs() < 1e-10, "bid at ({n},{k},{v}): {bid}");
    }
}

/// Order-statistic sums done in floating point, independent of the exact code.
fn uniform_oracle(n: usize, k: usize) -> (f64, f64) {
    let mean = |i: usize| (n + 1 - i) as f64 / (n + 1) as f64;
    let revenue = k as f64 * mean(k + 1);
    let surplus: f64 = (1..=k).map(mean).sum();
    (revenue, surplus)
}

fn exponential_oracle(n: usize, k: usize, zeta: f64) -> (f64, f64) {
    let mean = |i: usize| (i..=n).map(|j| 1.0 / j as f64).sum::<f64>() / zeta;
    (k as f64 * mean(k + 1), (1..=k).map(mean).sum())
}

#[test]
fn uniform_closed_forms() {
    let frozen = [((4, 3), 0.6, 3, 5), ((4, 2), 0.8, 4, 5), ((10, 3), 21.0 / 11.0, 21, 11)];
    for ((n, k), value, p, q) in frozen {
        let (rev, _) = uniform_oracle(n, k);
        assert!((rev - value).abs() < 1e-12);
        assert_eq!(uniform_pabga_revenue_exact(n, k).unwrap(), Rat::new(p, q));
    }
    for ((n, k), (p, q)) in [((4, 2), (4, 7)), ((10, 3), (7, 9)), ((20, 5), (5, 6))] {
        let (rev, surplus) = uniform_oracle(n, k);
        assert!((rev / surplus - p as f64 / q as f64).abs() < 1e-12);
        assert_eq!(uniform_ratio_of_expectations(n, k).unwrap(), Rat::new(p, q));
    }
}

#[test]
fn exponential_closed_forms() {
    let (rev, surplus) = exponential_oracle(4, 1, 1.0);
    assert!((rev / surplus - 13.0 / 25.0).abs() < 1e-12);
    let exact = exponential_ratio_of_expectations(4, 1, Rat::from_integer(1)).unwrap();
    assert_eq!(exact, BigRational::new(13.into(), 25.into()));

    let (rev, surplus) = exponential_oracle(10_000, 100, 1.0);
    let frozen = 0.821436;
    assert!((rev / surplus - frozen).abs() < 1e-6, "{}", rev / surplus);
    let exact = exponential_ratio_of_expectations(10_000, 100, Rat::from_integer(1)).unwrap();
    assert!((exact.to_f64().unwrap() - frozen).abs() < 1e-6);

    assert_eq!(harmonic(4), BigRational::new(25.into(), 12.into()));
    assert_eq!(
        exponential_order_stat_mean(4, 1, Rat::from_integer(1)).unwrap(),
        BigRational::new(25.into(), 12.into())
    );
    assert_eq!(
        exponential_order_stat_mean(4, 2, Rat::from_integer(1)).unwrap(),
        BigRational::new(13.into(), 12.into())
    );
    assert_eq!(uniform_order_stat_mean(4, 1).unwrap(), Rat::new(4, 5));
    assert_eq!(uniform_order_stat_mean(10, 4).unwrap(), Rat::new(7, 11));
}

#[test]
fn polynomial_and_win_probability() {
    // P(n, 2, v) expands to n - (n-1) v
    for n in 2..=12 {
        for v in [0.0, 0.25, 0.5, 1.0] {
            assert!((poly_p(n, 2, v).unwrap() - (n as f64 - (n - 1) as f64 * v)).abs() < 1e-9);
            assert!((poly_p(n, 1, v).unwrap() - 1.0).abs() < 1e-12);
        }
    }
    // winning means fewer than k of the n-1 rivals are above v
    let oracle = |n: usize, k: usize, v: f64| -> f64 {
        (0..k).map(|j| binom(n - 1, j) * (1.0 - v).powi(j as i32) * v.powi((n - 1 - j) as i32)).sum()
    };
    for (n, k, v) in [(4, 2, 0.5), (7, 3, 0.2), (12, 10, 0.9)] {
        assert!((win_probability(n, k, v) - oracle(n, k, v)).abs() < 1e-12);
    }
    assert_eq!(win_probability(4, 2, 0.5), 0.5);
}

#[test]
fn miner_utility_brute_force() {
    let r = Rat::from_integer;
    let upga = MechanismSpec::upga(1, r(0)).unwrap();
    // best single fake bid against real [5, 1], found by trying every integer
    let honest = miner_utility(
        &run_mechanism(&upga, &BidProfile::real(vec![r(5), r(1)]).unwrap()).unwrap(),
        &BidProfile::real(vec![r(5), r(1)]).unwrap(),
    );
    let best = (0..=6)
        .map(|f| {
            let p = BidProfile::with_fakes(&[r(5), r(1)], &[r(f)]).unwrap();
            (miner_utility(&run_mechanism(&upga, &p).unwrap(), &p), f)
        })
        .max_by_key(|&(u, f)| (u, -f))
        .unwrap();
    assert_eq!(honest, r(1));
    assert_eq!(best, (r(5), 5));
    // the worked example's fake bid of 4 earns 4
    let p = BidProfile::with_fakes(&[r(5), r(1)], &[r(4)]).unwrap();
    assert_eq!(miner_utility(&run_mechanism(&upga, &p).unwrap(), &p), r(4));

    let gta = MechanismSpec::gta();
    let p = BidProfile::real(vec![r(3), r(2)]).unwrap();
    let values = ValuationProfile::new(vec![r(3), r(2)]).unwrap();
    assert_eq!(joint_utility(&run_mechanism(&gta, &p).unwrap(), &[0, 1], &values, &p).unwrap(), r(5));
}

#[test]
fn upga_revenue_monte_carlo_matches_order_statistics() {
    let est = mc_revenue_and_surplus(
        &MechanismSpec::upga(3, Rat::from_integer(0)).unwrap(),
        Distribution::Uniform,
        10,
        200_000,
        2,
    )
    .unwrap();
    let (rev, surplus) = uniform_oracle(10, 3);
    assert!(est.revenue.agrees_with(rev, 3.0), "{:?}", est.revenue);
    assert!(est.surplus.agrees_with(surplus, 3.0), "{:?}", est.surplus);
}
