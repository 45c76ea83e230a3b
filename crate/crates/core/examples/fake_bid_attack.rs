//! A miner raising the uniform clearing price with a fake bid, and the same
//! trick failing against the posted-price auction.

use tfm_lab::properties::{check, CheckConfig, Property};
use tfm_lab::{run_mechanism, BidProfile, MechanismSpec, Rat, Result};

pub fn run_example() -> Result<String> {
    let r = Rat::from_integer;
    let upga = MechanismSpec::upga(1, r(0))?;
    let mut out = String::new();

    // Hand-built attack: one honest bid of 3, a fake bid of 3 behind it.
    let honest = BidProfile::real(vec![r(3)])?;
    let attacked = BidProfile::with_fakes(&[r(3)], &[r(3)])?;
    for (label, profile) in [("honest", &honest), ("with fake", &attacked)] {
        let outcome = run_mechanism(&upga, profile)?;
        out.push_str(&format!(
            "{label:>9}: bids {:?} allocated {:?} payments {:?}\n",
            profile.bids().iter().map(ToString::to_string).collect::<Vec<_>>(),
            outcome.allocated(),
            outcome.payments().iter().map(ToString::to_string).collect::<Vec<_>>(),
        ));
    }

    // The search finds the smallest such attack on its own.
    let cfg = CheckConfig::new(2, 3).with_max_fake(1);
    let report = check(Property::Mmic, &upga, &cfg)?;
    out.push('\n');
    out.push_str(&report.to_string());
    if let Some(c) = &report.counterexample {
        out.push_str(&format!("replays exactly: {}\n", c.replay(&upga)?));
    }

    let gta = MechanismSpec::gta();
    out.push('\n');
    out.push_str(&check(Property::Mmic, &gta, &cfg)?.to_string());
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
