//! Revenue share of pay-as-bid auctions: Monte Carlo against closed forms,
//! an exact large-market instance with exponential values, and the
//! comparison with the optimal auction.

use tfm_lab::revenue::{
    big_to_f64, bulow_klemperer_check, exponential_claim_check, mc_revenue_and_surplus, rat_to_f64,
    uniform_ratio_of_expectations,
};
use tfm_lab::{Distribution, MechanismSpec, Rat, Result};

pub fn run_example() -> Result<String> {
    let samples = 100_000;
    let mut out = String::new();
    for (n, k) in [(4, 2), (10, 3), (20, 5)] {
        let est = mc_revenue_and_surplus(&MechanismSpec::pabga(k)?, Distribution::Uniform, n, samples, 0)?;
        let exact = uniform_ratio_of_expectations(n, k)?;
        out.push_str(&format!(
            "n={n:>2} k={k}: E[rev]/E[surplus] {:.4} +- {:.4}  exact {exact} = {:.4}\n",
            est.ratio_of_means,
            est.ratio_of_means_stderr,
            rat_to_f64(exact)
        ));
    }

    let claim = exponential_claim_check(10_000, 100, Rat::new(9, 20))?;
    out.push_str(&format!(
        "\nexponential values, n=10000 k=100: ratio {:.5}, harmonic bound {:.5}\n",
        big_to_f64(&claim.ratio),
        big_to_f64(&claim.lower_bound)
    ));

    out.push('\n');
    for (n, k) in [(2, 1), (10, 3), (10, 9)] {
        let bk = bulow_klemperer_check(n, k, samples, 0)?;
        out.push_str(&format!(
            "n={n:>2} k={k}: pay-as-bid {:.4}, optimal {:.4}, required share {:.2}, holds {}\n",
            bk.pabga.mean, bk.optimal.mean, bk.factor, bk.holds
        ));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
