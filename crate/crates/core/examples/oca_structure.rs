//! Structural validation of allocation and burn rules: burns that depend only
//! on how many bids are included pass, value-dependent burns do not.

use tfm_lab::properties::{fixtures, validate_oca_structure, CheckConfig};
use tfm_lab::{Mechanism, MechanismSpec, Rat, Result};

pub fn run_example() -> Result<String> {
    let cfg = CheckConfig::new(3, 3);
    let mechanisms: Vec<Box<dyn Mechanism<Rat>>> = vec![
        Box::new(MechanismSpec::pabga(2)?),
        Box::new(MechanismSpec::well_reserved(2, Rat::from_integer(1))?),
        Box::new(fixtures::TopBidBurn { block: 2 }),
    ];
    let mut out = String::new();
    for mech in &mechanisms {
        let report = validate_oca_structure(mech.as_ref(), &cfg)?;
        out.push_str(&report.to_string());
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    print!("{}", run_example()?);
    Ok(())
}
