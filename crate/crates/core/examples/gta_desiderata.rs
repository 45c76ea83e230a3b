//! Exhaustive incentive checks of the posted-price toy auction, next to a
//! pay-as-bid auction that fails truthfulness on the same grid.

use tfm_lab::properties::{check, CheckConfig, Property};
use tfm_lab::{MechanismSpec, Result};

pub fn run_example() -> Result<String> {
    let cfg = CheckConfig::new(3, 3).with_max_fake(2);
    let gta = MechanismSpec::gta();
    let mut out = String::from("finite grid: 3 users, bids 0..3, up to 2 fake bids, any coalition\n\n");
    for property in Property::ALL {
        let report = check(property, &gta, &cfg)?;
        out.push_str(&report.to_string());
    }

    let pabga = MechanismSpec::pabga(2)?;
    let report = check(Property::Dsic, &pabga, &cfg)?;
    out.push('\n');
    out.push_str(&report.to_string());
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
