//! Equilibrium bids of the pay-as-bid auction under uniform values, with the
//! numerical best-response gap as a sanity check.

use tfm_lab::equilibrium::{best_response_gap, ShadingRule};
use tfm_lab::Result;

pub fn run_example() -> Result<String> {
    let mut out = String::new();
    for (n, k) in [(2, 1), (4, 2), (10, 3)] {
        let rule = ShadingRule::new(n, k)?;
        out.push_str(&format!("n={n} k={k}\n    v      bid    floor  br-gap\n"));
        for j in [1, 3, 5, 7, 9] {
            let v = j as f64 / 10.0;
            let gap = best_response_gap(n, k, v, 1e-3)?;
            out.push_str(&format!("  {v:.1}  {:.5}  {:.5}  {gap:.1e}\n", rule.bid(v)?, rule.shading_floor(v)));
        }
        let sweep = rule.sweep_exact(200)?;
        out.push_str(&format!("  exact sweep over 200 points passes: {}\n", sweep.passes()));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
