//! Selling fewer slots can earn more: a pay-as-bid auction capped at two
//! items against the full three-item auction, four uniform bidders.

use tfm_lab::revenue::supply_limit_check;
use tfm_lab::Result;

pub fn run_example() -> Result<String> {
    let c = supply_limit_check(4, 3, 2, 200_000, 0)?;
    let show = |e: &tfm_lab::revenue::RevenueEstimate| {
        format!("{:.4} +- {:.4} (exact {})", e.mean, e.stderr, e.exact.map(|x| x.to_string()).unwrap_or_default())
    };
    Ok(format!(
        "three slots: {}\ntwo slots:   {}\ndifference stderr {:.5}; capped auction earns more: {}\n",
        show(&c.pabga),
        show(&c.limited),
        c.difference_stderr,
        c.outperforms
    ))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
