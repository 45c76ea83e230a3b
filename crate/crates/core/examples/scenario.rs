//! Runs a JSON scenario file and prints its report. Defaults to the bundled
//! pay-as-bid scenario; reports go to a temporary directory.

use std::path::{Path, PathBuf};

use tfm_lab::cli::{execute_scenario, load_scenario};
use tfm_lab::Result;

pub fn run_example_with(config: &Path) -> Result<(i32, String)> {
    let mut cfg = load_scenario(config)?;
    let dir = tempfile::tempdir()?;
    cfg.output_dir = dir.path().to_path_buf();
    let outcome = execute_scenario(&cfg)?;
    let mut report = outcome.report;
    for f in &outcome.files {
        report.push_str(&format!("wrote {}\n", f.file_name().unwrap_or_default().to_string_lossy()));
    }
    Ok((outcome.exit_code, report))
}

pub fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/scenarios").join(name)
}

pub fn run_example() -> Result<String> {
    let (code, report) = run_example_with(&bundled("upga_attacks.json"))?;
    Ok(format!("{report}exit code {code}\n"))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| bundled("pabga_revenue.json"));
    let (code, report) = run_example_with(&path)?;
    print!("{report}");
    std::process::exit(code);
}
