//! Command-line front end: scenario files, the built-in claim suite, one-off
//! property checks and equilibrium bids.
//!
//! Exit codes: 0 when every expectation holds, 1 when a check or claim
//! fails (including an exhausted search budget), 2 on usage or config errors.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

use crate::equilibrium::{best_response_gap, ShadingRule, MAX_VERIFIED_K};
use crate::error::{Result, TfmError};
use crate::mechanism::{BidSpace, Mechanism, MechanismSpec, Variant};
use crate::model::{Distribution, Rat};
use crate::properties::{
    self, fixtures, CheckConfig, CoalitionBound, Counterexample, Property, PropertyReport, Verdict,
};
use crate::revenue::{self, big_to_f64, rat_to_f64, RevenueEstimate};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const CSV_HEADER: &str = "claim,n,k,dist,computed,exact_or_bound,stderr,verdict";

// ---------------------------------------------------------------------------
// report rows

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowVerdict {
    Pass,
    Fail,
    /// Informational value with nothing asserted.
    Info,
}

impl fmt::Display for RowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowVerdict::Pass => "PASS",
            RowVerdict::Fail => "FAIL",
            RowVerdict::Info => "INFO",
        })
    }
}

impl RowVerdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            RowVerdict::Pass
        } else {
            RowVerdict::Fail
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "PASS" => Some(RowVerdict::Pass),
            "FAIL" => Some(RowVerdict::Fail),
            "INFO" => Some(RowVerdict::Info),
            _ => None,
        }
    }
}

/// One line of a claim table or task CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRow {
    pub claim: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub dist: String,
    pub computed: String,
    /// Closed-form value or bound the computation is held against.
    pub reference: String,
    pub stderr: Option<f64>,
    /// Human-readable acceptance rule; not part of the CSV.
    pub tolerance: String,
    pub verdict: RowVerdict,
}

impl ClaimRow {
    fn new(claim: impl Into<String>, computed: impl Into<String>, reference: impl Into<String>) -> Self {
        Self {
            claim: claim.into(),
            n: None,
            k: None,
            dist: "-".into(),
            computed: computed.into(),
            reference: reference.into(),
            stderr: None,
            tolerance: "exact".into(),
            verdict: RowVerdict::Info,
        }
    }

    fn nk(mut self, n: usize, k: usize) -> Self {
        self.n = Some(n);
        self.k = Some(k);
        self
    }

    fn dist(mut self, dist: impl fmt::Display) -> Self {
        self.dist = dist.to_string();
        self
    }

    fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    fn tolerance(mut self, t: impl Into<String>) -> Self {
        self.tolerance = t.into();
        self
    }

    fn verdict(mut self, ok: bool) -> Self {
        self.verdict = RowVerdict::from_bool(ok);
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != RowVerdict::Fail
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            csv_field(&self.claim),
            opt(self.n),
            opt(self.k),
            csv_field(&self.dist),
            csv_field(&self.computed),
            csv_field(&self.reference),
            self.stderr.map(fmt_f64).unwrap_or_default(),
            self.verdict.to_string(),
        ]
        .join(",")
    }

    /// Parses a line written by [`ClaimRow::to_csv`]. The tolerance column
    /// is not stored and comes back empty.
    pub fn from_csv(line: &str) -> Result<Self> {
        let fields = split_csv(line)?;
        if fields.len() != 8 {
            return Err(TfmError::Config(format!("expected 8 CSV fields, got {}", fields.len())));
        }
        let opt_usize = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| TfmError::Config(format!("bad integer {s:?}")))
        };
        let stderr = if fields[6].is_empty() {
            None
        } else {
            Some(fields[6].parse().map_err(|_| TfmError::Config(format!("bad stderr {:?}", fields[6])))?)
        };
        Ok(Self {
            claim: fields[0].clone(),
            n: opt_usize(&fields[1])?,
            k: opt_usize(&fields[2])?,
            dist: fields[3].clone(),
            computed: fields[4].clone(),
            reference: fields[5].clone(),
            stderr,
            tolerance: String::new(),
            verdict: RowVerdict::parse(&fields[7])
                .ok_or_else(|| TfmError::Config(format!("bad verdict {:?}", fields[7])))?,
        })
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.6e}")
}

fn fmt_mean(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv(line: &str) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', false) if cur.is_empty() => quoted = true,
            ('"', true) if chars.peek() == Some(&'"') => {
                chars.next();
                cur.push('"');
            }
            ('"', true) => quoted = false,
            (',', false) => fields.push(std::mem::take(&mut cur)),
            (c, _) => cur.push(c),
        }
    }
    if quoted {
        return Err(TfmError::Config("unterminated quote in CSV line".into()));
    }
    fields.push(cur);
    Ok(fields)
}

pub fn rows_to_csv(rows: &[ClaimRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

pub fn render_table(rows: &[ClaimRow]) -> String {
    let headers = ["claim", "reference", "computed", "tolerance", "verdict"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| [r.claim.clone(), r.reference.clone(), r.computed.clone(), r.tolerance.clone(), r.verdict.to_string()])
        .collect();
    let mut widths = headers.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: [&str; 5]| {
        let parts: Vec<String> = cols.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join(" | ").trim_end());
    };
    line(&mut out, headers);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for row in &cells {
        line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    out
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("report");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// claim computations shared by the scenario runner and the claim suite

fn estimate_row(claim: String, est: &RevenueEstimate, reference: Option<(String, f64)>) -> ClaimRow {
    let row = ClaimRow::new(claim, fmt_mean(est.mean), "-").stderr(est.stderr);
    match reference {
        Some((label, target)) => {
            ClaimRow { reference: label, ..row }.tolerance("3 stderr").verdict(est.agrees_with(target, 3.0))
        }
        None => row.tolerance("-"),
    }
}

fn rat_label(r: Rat) -> String {
    format!("{r} ({})", fmt_mean(rat_to_f64(r)))
}

/// Revenue, surplus and revenue share of one mechanism.
pub fn mc_rows(spec: &MechanismSpec, dist: Distribution, n: usize, samples: u64, seed: u64) -> Result<Vec<ClaimRow>> {
    let est = revenue::mc_revenue_and_surplus(spec, dist, n, samples, seed)?;
    let k = spec.items().capacity(n);
    let with_exact = |e: &RevenueEstimate| e.exact.map(|x| (rat_label(x), rat_to_f64(x)));
    Ok(vec![
        estimate_row(format!("{spec} n={n} rev"), &est.revenue, with_exact(&est.revenue)).nk(n, k).dist(dist),
        estimate_row(format!("{spec} n={n} surplus"), &est.surplus, with_exact(&est.surplus)).nk(n, k).dist(dist),
        ClaimRow::new(format!("{spec} n={n} E[rev/surplus]"), fmt_mean(est.ratio.mean), "-")
            .nk(n, k)
            .dist(dist)
            .stderr(est.ratio.stderr)
            .tolerance(format!("{} samples excluded", est.excluded)),
    ])
}

/// Ratio of expected revenue to expected surplus against the closed form.
pub fn ratio_of_means_row(n: usize, k: usize, samples: u64, seed: u64) -> Result<ClaimRow> {
    let est = revenue::mc_revenue_and_surplus(&MechanismSpec::pabga(k)?, Distribution::Uniform, n, samples, seed)?;
    let exact = revenue::uniform_ratio_of_expectations(n, k)?;
    let ok = (est.ratio_of_means - rat_to_f64(exact)).abs() <= 3.0 * est.ratio_of_means_stderr;
    Ok(ClaimRow::new(format!("uniform E[rev]/E[surplus] n={n} k={k}"), fmt_mean(est.ratio_of_means), rat_label(exact))
        .nk(n, k)
        .dist(Distribution::Uniform)
        .stderr(est.ratio_of_means_stderr)
        .tolerance("3 stderr")
        .verdict(ok))
}

pub fn expectation_of_ratio_row(n: usize, k: usize, samples: u64, seed: u64) -> Result<ClaimRow> {
    let c = revenue::expectation_of_ratio_check(n, k, samples, seed)?;
    Ok(ClaimRow::new(
        format!("uniform E[rev/surplus] n={n} k={k}"),
        fmt_mean(c.estimate.mean),
        format!(">= {} ({})", Rat::new((n - k) as i64, n as i64), fmt_mean(c.bound)),
    )
    .nk(n, k)
    .dist(Distribution::Uniform)
    .stderr(c.estimate.stderr)
    .tolerance(format!("-3 stderr; pointwise floor violations {}", c.pointwise_violations))
    .verdict(c.holds))
}

pub fn exponential_row(n: usize, k: usize, threshold: Rat) -> Result<ClaimRow> {
    let c = revenue::exponential_claim_check(n, k, threshold)?;
    Ok(ClaimRow::new(
        format!("exponential E[rev]/E[surplus] n={n} k={k}"),
        fmt_mean(big_to_f64(&c.ratio)),
        format!(
            ">= {} and >= (H_n-H_k)/H_n = {}",
            fmt_mean(rat_to_f64(threshold)),
            fmt_mean(big_to_f64(&c.lower_bound))
        ),
    )
    .nk(n, k)
    .dist("exp")
    .tolerance("exact")
    .verdict(c.holds))
}

pub fn bulow_klemperer_row(n: usize, k: usize, samples: u64, seed: u64) -> Result<ClaimRow> {
    let c = revenue::bulow_klemperer_check(n, k, samples, seed)?;
    Ok(ClaimRow::new(
        format!("PABGA vs optimal n={n} k={k}"),
        fmt_mean(c.pabga.mean),
        format!(">= {}*{}", fmt_mean(c.factor), fmt_mean(c.optimal.mean)),
    )
    .nk(n, k)
    .dist(Distribution::Uniform)
    .stderr(c.margin_stderr)
    .tolerance("-3 stderr")
    .verdict(c.holds))
}

pub fn equivalence_row(n: usize, k: usize, samples: u64, seed: u64) -> Result<ClaimRow> {
    let c = revenue::revenue_equivalence_check(n, k, samples, seed)?;
    Ok(ClaimRow::new(
        format!("PABGA = UPGA revenue n={n} k={k}"),
        format!("{} / {}", fmt_mean(c.pabga.mean), fmt_mean(c.upga.mean)),
        rat_label(c.exact),
    )
    .nk(n, k)
    .dist(Distribution::Uniform)
    .stderr(c.difference_stderr)
    .tolerance("3 stderr")
    .verdict(c.holds))
}

pub fn class_rows(n: usize, k: usize, reserves: &[Rat], samples: u64, seed: u64) -> Result<Vec<ClaimRow>> {
    Ok(revenue::revenue_optimal_class_check(n, k, reserves, samples, seed)?
        .into_iter()
        .map(|row| {
            ClaimRow::new(
                format!("PABGA >= WellReserved r={} n={n} k={k}", row.reserve),
                fmt_mean(row.pabga.mean),
                format!(">= {}", fmt_mean(row.well_reserved.mean)),
            )
            .nk(n, k)
            .dist(Distribution::Uniform)
            .stderr(row.difference_stderr)
            .tolerance("-3 stderr")
            .verdict(row.holds)
        })
        .collect())
}

pub fn supply_limit_row(n: usize, k: usize, limit: usize, samples: u64, seed: u64) -> Result<ClaimRow> {
    let c = revenue::supply_limit_check(n, k, limit, samples, seed)?;
    Ok(ClaimRow::new(
        format!("supply limit {limit} beats PABGA n={n} k={k}"),
        format!("{} > {}", fmt_mean(c.limited.mean), fmt_mean(c.pabga.mean)),
        format!(
            "{} > {}",
            c.limited.exact.map(rat_label).unwrap_or_default(),
            c.pabga.exact.map(rat_label).unwrap_or_default()
        ),
    )
    .nk(n, k)
    .dist(Distribution::Uniform)
    .stderr(c.difference_stderr)
    .tolerance("gap > 3 stderr")
    .verdict(c.outperforms && c.matches_exact))
}

/// Best-response gaps on a value grid plus exact monotonicity and bid-floor
/// sweeps for every `(n, k)` with `2 <= n <= max_n`.
pub fn equilibrium_rows(max_n: usize, grid_step: f64, sweep_points: u32) -> Result<Vec<ClaimRow>> {
    let mut worst = 0.0_f64;
    let mut worst_at = (0, 0, 0.0);
    let mut sweep_failures = Vec::new();
    let mut pairs = 0;
    for n in 2..=max_n {
        for k in 1..=(n - 1).min(MAX_VERIFIED_K) {
            pairs += 1;
            for j in 1..=9 {
                let v = j as f64 / 10.0;
                let gap = best_response_gap(n, k, v, grid_step)?;
                if gap > worst {
                    worst = gap;
                    worst_at = (n, k, v);
                }
            }
            let sweep = ShadingRule::new(n, k)?.sweep_exact(sweep_points)?;
            if !sweep.passes() {
                sweep_failures.push(format!("n={n} k={k}"));
            }
        }
    }
    let limit = 2.0 * grid_step;
    Ok(vec![
        ClaimRow::new(
            format!("equilibrium best-response gap n<={max_n}"),
            format!("{} at n={} k={} v={}", fmt_f64(worst), worst_at.0, worst_at.1, worst_at.2),
            format!("<= {}", fmt_f64(limit)),
        )
        .dist(Distribution::Uniform)
        .tolerance(format!("bid grid step {grid_step}"))
        .verdict(worst <= limit),
        ClaimRow::new(
            format!("equilibrium monotone and above floor n<={max_n}"),
            format!("{}/{} pairs pass", pairs - sweep_failures.len(), pairs),
            format!("{pairs}/{pairs}"),
        )
        .dist(Distribution::Uniform)
        .tolerance(format!("exact, v = j/{sweep_points}"))
        .verdict(sweep_failures.is_empty()),
    ])
}

fn verdict_ok(report: &Result<PropertyReport>, expect: Expect) -> bool {
    match report {
        Ok(r) => match expect {
            Expect::Holds => r.holds(),
            Expect::Violated => r.verdict == Verdict::Violated && r.counterexample.is_some(),
        },
        Err(_) => false,
    }
}

fn replays<M: Mechanism<Rat> + ?Sized>(report: &Result<PropertyReport>, mech: &M) -> bool {
    match report {
        Ok(PropertyReport { counterexample: Some(c), .. }) => c.replay(mech).unwrap_or(false),
        Ok(_) => true,
        Err(_) => false,
    }
}

fn verdict_label(report: &Result<PropertyReport>) -> String {
    match report {
        Ok(r) => r.verdict.to_string(),
        Err(e) => format!("error: {e}"),
    }
}

/// Every listed property holds on the grid.
pub fn desiderata_row<M: Mechanism<Rat> + ?Sized>(
    label: &str,
    mech: &M,
    props: &[Property],
    cfg: &CheckConfig,
) -> ClaimRow {
    let reports: Vec<Result<PropertyReport>> = props.iter().map(|&p| properties::check(p, mech, cfg)).collect();
    let held = reports
        .iter()
        .filter(|r| verdict_ok(r, Expect::Holds) && matches!(r, Ok(x) if x.verdict == Verdict::HoldsOnGrid))
        .count();
    let names: Vec<&str> = props.iter().map(|p| p.name()).collect();
    let failing: Vec<String> = props
        .iter()
        .zip(&reports)
        .filter(|(_, r)| !matches!(r, Ok(x) if x.verdict == Verdict::HoldsOnGrid))
        .map(|(p, r)| format!("{p}: {}", verdict_label(r)))
        .collect();
    let mut computed = format!("{held}/{} HoldsOnGrid", props.len());
    if !failing.is_empty() {
        computed.push_str(&format!(" ({})", failing.join("; ")));
    }
    ClaimRow::new(label, computed, format!("{} HoldsOnGrid", names.join(", ")))
        .nk(cfg.n, 0)
        .tolerance(grid_label(cfg))
        .verdict(held == props.len())
}

fn grid_label(cfg: &CheckConfig) -> String {
    format!(
        "finite grid n={} bids 0..{} step {} fakes<={} coalition {}",
        cfg.n,
        cfg.step * Rat::from_integer(cfg.grid_max as i64),
        cfg.step,
        cfg.max_fake,
        cfg.coalition_bound
    )
}

/// The check finds a violation and its witness replays exactly.
pub fn counterexample_row<M: Mechanism<Rat> + ?Sized>(
    label: &str,
    mech: &M,
    prop: Property,
    cfg: &CheckConfig,
) -> ClaimRow {
    let report = properties::check(prop, mech, cfg);
    let found = verdict_ok(&report, Expect::Violated);
    let replayed = found && replays(&report, mech);
    let computed = match &report {
        Ok(r) => match &r.counterexample {
            Some(c) => format!("{}; replay {}", c, if replayed { "exact" } else { "FAILED" }),
            None => r.verdict.to_string(),
        },
        Err(e) => format!("error: {e}"),
    };
    ClaimRow::new(label, computed, format!("{prop} Violated"))
        .nk(cfg.n, 0)
        .tolerance(grid_label(cfg))
        .verdict(found && replayed)
}

/// Counterexample instances of the claim suite on the given grid. The
/// coalition attack runs without fake bids so its witness is a genuine
/// user-miner deviation rather than the miner acting alone.
#[allow(clippy::type_complexity)]
pub fn counterexample_instances(
    cfg: &CheckConfig,
) -> Result<Vec<(String, Box<dyn Mechanism<Rat>>, Property, CheckConfig)>> {
    let upga = || MechanismSpec::upga(1, Rat::from_integer(0));
    Ok(vec![
        ("PABGA not DSIC".into(), Box::new(MechanismSpec::pabga(2)?), Property::Dsic, cfg.clone()),
        ("UPGA fake-bid attack".into(), Box::new(upga()?), Property::Mmic, cfg.clone()),
        ("UPGA coalition attack".into(), Box::new(upga()?), Property::Scp, cfg.clone().with_max_fake(0)),
        (
            "Optimal auction not OCA-proof".into(),
            Box::new(MechanismSpec::myerson_uniform_scaled(1, Rat::from_integer(3))?),
            Property::Oca,
            cfg.clone(),
        ),
    ])
}

pub fn structure_rows(cfg: &CheckConfig) -> Result<Vec<ClaimRow>> {
    let mut rows = Vec::new();
    let cases: Vec<(Box<dyn Mechanism<Rat>>, Vec<Option<Rat>>)> = vec![
        (Box::new(MechanismSpec::pabga(2)?), vec![]),
        (
            Box::new(MechanismSpec::well_reserved(2, Rat::from_integer(1))?),
            (0..=2).map(|j| Some(Rat::from_integer(j))).collect(),
        ),
    ];
    for (mech, expected) in cases {
        let report = properties::validate_oca_structure(mech.as_ref(), cfg);
        let table = report.as_ref().ok().and_then(|r| r.burn_table.clone()).unwrap_or_default();
        let table_ok = if expected.is_empty() {
            table.iter().flatten().all(|b| *b == Rat::from_integer(0))
        } else {
            table == expected
        };
        let held = matches!(&report, Ok(r) if r.verdict == Verdict::HoldsOnGrid);
        let cells: Vec<String> = table.iter().map(|c| c.map(|r| r.to_string()).unwrap_or_else(|| "-".into())).collect();
        rows.push(
            ClaimRow::new(
                format!("OCA structure {}", mech.label()),
                format!("{}; burn by count [{}]", verdict_label(&report), cells.join(" ")),
                if expected.is_empty() { "passes, burn 0".to_string() } else { "passes, burn j".to_string() },
            )
            .nk(cfg.n, 0)
            .tolerance(grid_label(cfg))
            .verdict(held && table_ok),
        );
    }
    let fixture = fixtures::TopBidBurn { block: 2 };
    let report = properties::validate_oca_structure(&fixture, cfg);
    let at_burn = matches!(
        &report,
        Ok(PropertyReport {
            counterexample: Some(Counterexample::Structure { check: properties::StructureCheck::SizeBasedBurn, .. }),
            ..
        })
    );
    rows.push(
        ClaimRow::new(
            "OCA structure value-dependent burn",
            verdict_label(&report),
            "Violated at the size-based burn check",
        )
        .nk(cfg.n, 0)
        .tolerance(grid_label(cfg))
        .verdict(at_burn && replays(&report, &fixture)),
    );
    Ok(rows)
}

pub fn revenue_audit_row(cfg: &CheckConfig) -> ClaimRow {
    let report = properties::audit_revenue_bound(&MechanismSpec::gta(), cfg);
    let (computed, ok) = match &report {
        Ok(r) => {
            let a = r.audit.as_ref().expect("audit summary present");
            (
                format!("{}/{} profiles revenue = allocated count", a.tight, a.profiles),
                r.holds() && a.tight == a.profiles,
            )
        }
        Err(e) => (format!("error: {e}"), false),
    };
    ClaimRow::new("GTA revenue audit", computed, "revenue = allocated count on every profile")
        .nk(cfg.n, 0)
        .tolerance(grid_label(cfg))
        .verdict(ok)
}

// ---------------------------------------------------------------------------
// claim suite

pub const MIN_SUITE_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone)]
pub struct ClaimSuite {
    pub samples: u64,
    pub seed: u64,
    pub rows: Vec<ClaimRow>,
}

impl ClaimSuite {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ClaimRow::passed)
    }

    pub fn render(&self) -> String {
        let mut out = format!("claim suite: samples={} seed={}\n", self.samples, self.seed);
        out.push_str("finite-grid rows certify the stated grid only\n\n");
        out.push_str(&render_table(&self.rows));
        let failed = self.rows.iter().filter(|r| !r.passed()).count();
        let _ = writeln!(out, "\n{} rows, {} failed", self.rows.len(), failed);
        out
    }
}

/// Runs the built-in claim suite.
pub fn verify_claims(samples: u64, seed: u64) -> Result<ClaimSuite> {
    if samples < MIN_SUITE_SAMPLES {
        return Err(TfmError::InvalidParameter(format!("verify-claims needs at least {MIN_SUITE_SAMPLES} samples")));
    }
    let mut rows = Vec::new();
    let r = Rat::from_integer;

    let gta = MechanismSpec::gta();
    let cfg = CheckConfig::new(3, 3).with_max_fake(2);
    rows.push(desiderata_row(
        "GTA desiderata",
        &gta,
        &[Property::Dsic, Property::Mmic, Property::Oca, Property::Scp],
        &cfg,
    ));
    rows.push(desiderata_row("GTA budget properties", &gta, &[Property::Epir, Property::Epbb], &cfg));

    for (label, mech, prop, cfg) in counterexample_instances(&cfg)? {
        rows.push(counterexample_row(&label, mech.as_ref(), prop, &cfg));
    }
    rows.extend(structure_rows(&CheckConfig::new(3, 3))?);
    rows.push(revenue_audit_row(&CheckConfig::new(4, 4)));

    let uni = Distribution::Uniform;
    for k in [3, 2] {
        let est = revenue::mc_revenue_and_surplus(&MechanismSpec::pabga(k)?, uni, 4, samples, seed)?;
        let exact = revenue::uniform_pabga_revenue_exact(4, k)?;
        rows.push(
            estimate_row(format!("PABGA n=4 k={k} rev"), &est.revenue, Some((rat_label(exact), rat_to_f64(exact))))
                .nk(4, k)
                .dist(uni),
        );
    }
    rows.push(supply_limit_row(4, 3, 2, samples, seed)?);

    for (n, k) in [(4, 2), (10, 3), (20, 5)] {
        rows.push(ratio_of_means_row(n, k, samples, seed)?);
    }
    for (n, k) in [(4, 2), (10, 3), (12, 10)] {
        rows.push(expectation_of_ratio_row(n, k, samples, seed)?);
    }
    rows.push(exponential_row(10_000, 100, Rat::new(45, 100))?);
    for (n, k) in [(2, 1), (10, 3), (10, 9)] {
        rows.push(bulow_klemperer_row(n, k, samples, seed)?);
    }
    for (n, k) in [(4, 2), (5, 1), (2, 1)] {
        rows.push(equivalence_row(n, k, samples, seed)?);
    }
    rows.extend(equilibrium_rows(12, 1e-3, 1000)?);
    let reserves = [r(0), Rat::new(1, 4), Rat::new(1, 2)];
    for n in [4, 10] {
        for k in [2, 3] {
            rows.extend(class_rows(n, k, &reserves, samples, seed)?);
        }
    }
    Ok(ClaimSuite { samples, seed, rows })
}

// ---------------------------------------------------------------------------
// scenario files

/// A rational written as an integer, a decimal number, or a `"a/b"` or
/// decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatValue(pub Rat);

pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = || TfmError::Config(format!("not a rational number: {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Rat::new(a, b));
    }
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if frac.len() > 15 {
        return Err(TfmError::Config(format!("too many decimal places in {s:?}")));
    }
    let denom = 10_i64.pow(frac.len() as u32);
    let whole: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let part: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let value = whole.checked_mul(denom).and_then(|w| w.checked_add(part)).ok_or_else(bad)?;
    Ok(Rat::new(if neg { -value } else { value }, denom))
}

impl<'de> Deserialize<'de> for RatValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = RatValue;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a string such as \"3/2\"")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<RatValue, E> {
                Ok(RatValue(Rat::from_integer(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<RatValue, E> {
                i64::try_from(v).map(|v| RatValue(Rat::from_integer(v))).map_err(|_| E::custom("integer too large"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<RatValue, E> {
                parse_rat(&format!("{v}")).map(RatValue).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<RatValue, E> {
                parse_rat(v).map(RatValue).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl<'de> Deserialize<'de> for CoalitionBound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = CoalitionBound;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a coalition size or \"all\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<CoalitionBound, E> {
                Ok(CoalitionBound::Upto(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<CoalitionBound, E> {
                usize::try_from(v).map(CoalitionBound::Upto).map_err(|_| E::custom("coalition size must be >= 0"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<CoalitionBound, E> {
                parse_coalition(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

pub fn parse_coalition(s: &str) -> Result<CoalitionBound> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(CoalitionBound::All);
    }
    s.parse()
        .map(CoalitionBound::Upto)
        .map_err(|_| TfmError::Config(format!("coalition bound must be a size or \"all\", got {s:?}")))
}

impl<'de> Deserialize<'de> for Property {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Holds,
    Violated,
}

/// A property to check, written either as its name or as
/// `{"property": name, "expect": "holds" | "violated"}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckEntry {
    pub property: Property,
    pub expect: Expect,
}

impl<'de> Deserialize<'de> for CheckEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Full {
            property: Property,
            #[serde(default)]
            expect: Expect,
        }
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = CheckEntry;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a property name or {\"property\", \"expect\"}")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<CheckEntry, E> {
                let property = v.parse().map_err(E::custom)?;
                Ok(CheckEntry { property, expect: Expect::Holds })
            }
            fn visit_map<A: de::MapAccess<'de>>(self, map: A) -> std::result::Result<CheckEntry, A::Error> {
                let full = Full::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(CheckEntry { property: full.property, expect: full.expect })
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Gta,
    Pabga,
    Upga,
    Shading,
    WellReserved,
    SupplyLimitedPabga,
    MyersonUniform,
}

/// Mechanism fields of a scenario. Which fields are required depends on
/// the variant; `step` switches to a discrete bid space.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub variant: VariantName,
    pub block: Option<usize>,
    /// Defaults to 0.
    pub reserve: Option<RatValue>,
    pub limit: Option<usize>,
    /// Bidder count of the shading auction.
    pub n: Option<usize>,
    /// Upper end of the uniform value support for the optimal auction; defaults to 1.
    pub support_max: Option<RatValue>,
    pub step: Option<RatValue>,
}

impl MechanismConfig {
    pub fn build(&self) -> Result<MechanismSpec> {
        let need = |field: Option<usize>, name: &str| {
            field.ok_or_else(|| TfmError::Config(format!("mechanism.{name} is required for {:?}", self.variant)))
        };
        let reserve = self.reserve.map(|r| r.0).unwrap_or_else(|| Rat::from_integer(0));
        let spec = match self.variant {
            VariantName::Gta => {
                if self.block.is_some() {
                    return Err(TfmError::Config("mechanism.block does not apply to gta (unbounded block)".into()));
                }
                return Ok(MechanismSpec::gta());
            }
            VariantName::Pabga => MechanismSpec::pabga(need(self.block, "block")?)?,
            VariantName::Upga => MechanismSpec::upga(need(self.block, "block")?, reserve)?,
            VariantName::Shading => MechanismSpec::shading(need(self.n, "n")?, need(self.block, "block")?)?,
            VariantName::WellReserved => MechanismSpec::well_reserved(need(self.block, "block")?, reserve)?,
            VariantName::SupplyLimitedPabga => {
                MechanismSpec::supply_limited_pabga(need(self.block, "block")?, need(self.limit, "limit")?)?
            }
            VariantName::MyersonUniform => MechanismSpec::myerson_uniform_scaled(
                need(self.block, "block")?,
                self.support_max.map(|r| r.0).unwrap_or_else(|| Rat::from_integer(1)),
            )?,
        };
        match self.step {
            Some(step) => spec.with_bid_space(BidSpace::Discrete(step.0)),
            None => Ok(spec),
        }
    }
}

fn default_n() -> usize {
    3
}
fn default_grid_max() -> usize {
    3
}
fn default_step() -> RatValue {
    RatValue(Rat::from_integer(1))
}
fn default_max_fake() -> usize {
    1
}
fn default_coalition() -> CoalitionBound {
    CoalitionBound::All
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_grid_max")]
    pub grid_max: usize,
    #[serde(default = "default_step")]
    pub step: RatValue,
    #[serde(default = "default_max_fake")]
    pub max_fake: usize,
    #[serde(default = "default_coalition")]
    pub coalition_bound: CoalitionBound,
    /// Trials of seeded random search once the budget is exceeded.
    pub random_trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            grid_max: default_grid_max(),
            step: default_step(),
            max_fake: default_max_fake(),
            coalition_bound: default_coalition(),
            random_trials: None,
            seed: 0,
        }
    }
}

impl GridConfig {
    pub fn to_check_config(&self) -> CheckConfig {
        let cfg = CheckConfig::new(self.n, self.grid_max)
            .with_step(self.step.0)
            .with_max_fake(self.max_fake)
            .with_coalition_bound(self.coalition_bound);
        match self.random_trials {
            Some(t) => cfg.with_random_fallback(t, self.seed),
            None => cfg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    /// Revenue and surplus of the scenario mechanism.
    McRevenue,
    UniformExact,
    UniformRatio,
    ExpectationOfRatio,
    ExponentialRatio,
    BulowKlemperer,
    RevenueEquivalence,
    RevenueOptimalClass,
    SupplyLimit,
    Equilibrium,
}

impl TaskName {
    fn label(self) -> &'static str {
        match self {
            TaskName::McRevenue => "mc_revenue",
            TaskName::UniformExact => "uniform_exact",
            TaskName::UniformRatio => "uniform_ratio",
            TaskName::ExpectationOfRatio => "expectation_of_ratio",
            TaskName::ExponentialRatio => "exponential_ratio",
            TaskName::BulowKlemperer => "bulow_klemperer",
            TaskName::RevenueEquivalence => "revenue_equivalence",
            TaskName::RevenueOptimalClass => "revenue_optimal_class",
            TaskName::SupplyLimit => "supply_limit",
            TaskName::Equilibrium => "equilibrium",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistName {
    #[default]
    Uniform,
    Exponential,
}

fn default_samples() -> u64 {
    100_000
}
fn default_zeta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevenueTask {
    pub task: TaskName,
    pub n: usize,
    /// Items; `mc_revenue` takes them from the mechanism instead.
    pub k: Option<usize>,
    #[serde(default)]
    pub distribution: DistName,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default)]
    pub seed: u64,
    /// Reserves for `revenue_optimal_class`; defaults to 0, 1/4 and 1/2.
    pub reserves: Option<Vec<RatValue>>,
    /// Item cap for `supply_limit`.
    pub limit: Option<usize>,
    /// Lower threshold for `exponential_ratio`; defaults to 0.
    pub threshold: Option<RatValue>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("tfm-lab-report")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mechanism: MechanismConfig,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
    #[serde(default)]
    pub revenue_tasks: Vec<RevenueTask>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Relative paths resolve against the config file's directory.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Parses a scenario, reporting the offending field path on error.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        TfmError::Config(format!("line {} column {}, at `{path}`: {inner}", inner.line(), inner.column()))
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text =
        fs::read_to_string(path).map_err(|e| TfmError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_scenario(&text)?;
    if cfg.output_dir.is_relative() {
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
    }
    // mechanism errors are config errors too
    cfg.mechanism.build().map_err(|e| TfmError::Config(format!("at `mechanism`: {e}")))?;
    Ok(cfg)
}

fn task_rows(task: &RevenueTask, spec: &MechanismSpec) -> Result<Vec<ClaimRow>> {
    let need_k = || task.k.ok_or_else(|| TfmError::Config(format!("task {} needs k", task.task.label())));
    let (n, s, seed) = (task.n, task.samples, task.seed);
    let dist = match task.distribution {
        DistName::Uniform => Distribution::Uniform,
        DistName::Exponential => Distribution::Exponential { zeta: task.zeta },
    };
    let uniform_only = || {
        if task.distribution != DistName::Uniform {
            return Err(TfmError::Unsupported(format!("task {} needs uniform values", task.task.label())));
        }
        Ok(())
    };
    Ok(match task.task {
        TaskName::McRevenue => mc_rows(spec, dist, n, s, seed)?,
        TaskName::UniformExact => {
            let k = need_k()?;
            vec![
                ClaimRow::new(
                    format!("exact PABGA revenue n={n} k={k}"),
                    rat_label(revenue::uniform_pabga_revenue_exact(n, k)?),
                    "k(n-k)/(n+1)",
                )
                .nk(n, k)
                .dist(Distribution::Uniform),
                ClaimRow::new(
                    format!("exact E[rev]/E[surplus] n={n} k={k}"),
                    rat_label(revenue::uniform_ratio_of_expectations(n, k)?),
                    "(n-k)/(n+1-(k+1)/2)",
                )
                .nk(n, k)
                .dist(Distribution::Uniform),
            ]
        }
        TaskName::UniformRatio => {
            uniform_only()?;
            vec![ratio_of_means_row(n, need_k()?, s, seed)?]
        }
        TaskName::ExpectationOfRatio => {
            uniform_only()?;
            vec![expectation_of_ratio_row(n, need_k()?, s, seed)?]
        }
        TaskName::ExponentialRatio => {
            vec![exponential_row(n, need_k()?, task.threshold.map(|t| t.0).unwrap_or_else(|| Rat::from_integer(0)))?]
        }
        TaskName::BulowKlemperer => {
            uniform_only()?;
            vec![bulow_klemperer_row(n, need_k()?, s, seed)?]
        }
        TaskName::RevenueEquivalence => {
            uniform_only()?;
            vec![equivalence_row(n, need_k()?, s, seed)?]
        }
        TaskName::RevenueOptimalClass => {
            uniform_only()?;
            let reserves: Vec<Rat> = match &task.reserves {
                Some(rs) => rs.iter().map(|r| r.0).collect(),
                None => vec![Rat::from_integer(0), Rat::new(1, 4), Rat::new(1, 2)],
            };
            class_rows(n, need_k()?, &reserves, s, seed)?
        }
        TaskName::SupplyLimit => {
            uniform_only()?;
            let limit = task.limit.ok_or_else(|| TfmError::Config("task supply_limit needs limit".into()))?;
            vec![supply_limit_row(n, need_k()?, limit, s, seed)?]
        }
        TaskName::Equilibrium => equilibrium_rows(n, 1e-3, 1000)?,
    })
}

/// What a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub exit_code: i32,
    pub report: String,
    pub files: Vec<PathBuf>,
}

/// Runs every check and task of the scenario at `path` and writes
/// `report.txt` plus one CSV per task into the output directory.
pub fn run_scenario(path: &Path) -> ScenarioOutcome {
    let cfg = match load_scenario(path) {
        Ok(c) => c,
        Err(e) => {
            return ScenarioOutcome { exit_code: EXIT_USAGE, report: format!("config error: {e}\n"), files: vec![] }
        }
    };
    match execute_scenario(&cfg) {
        Ok(out) => out,
        Err(e) => ScenarioOutcome { exit_code: EXIT_FAILED, report: format!("error: {e}\n"), files: vec![] },
    }
}

pub fn execute_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let spec = cfg.mechanism.build()?;
    let check_cfg = cfg.grid.to_check_config();
    let mut ok = true;
    let mut report = format!("scenario: {spec}\n");
    if !cfg.checks.is_empty() {
        let _ = writeln!(report, "checks on {}", grid_label(&check_cfg));
    }
    for entry in &cfg.checks {
        let result = properties::check(entry.property, &spec, &check_cfg);
        let met = verdict_ok(&result, entry.expect) && replays(&result, &spec);
        ok &= met;
        let expect = match entry.expect {
            Expect::Holds => "holds",
            Expect::Violated => "violated",
        };
        match &result {
            Ok(r) => report.push_str(&r.to_string()),
            Err(e) => {
                let _ = writeln!(report, "{}: error: {e}", entry.property);
            }
        }
        let _ = writeln!(report, "  expected {expect}: {}", if met { "PASS" } else { "FAIL" });
    }

    fs::create_dir_all(&cfg.output_dir)?;
    let mut files = Vec::new();
    for (i, task) in cfg.revenue_tasks.iter().enumerate() {
        let rows = match task_rows(task, &spec) {
            Ok(rows) => rows,
            Err(e) => {
                ok = false;
                let _ = writeln!(report, "\ntask {} {}: error: {e}", i + 1, task.task.label());
                continue;
            }
        };
        ok &= rows.iter().all(ClaimRow::passed);
        let _ = writeln!(report, "\ntask {} {}", i + 1, task.task.label());
        report.push_str(&render_table(&rows));
        let file = cfg.output_dir.join(format!("task{:02}_{}.csv", i + 1, task.task.label()));
        write_atomic(&file, &rows_to_csv(&rows))?;
        files.push(file);
    }
    let _ = writeln!(report, "\noverall: {}", if ok { "PASS" } else { "FAIL" });
    let report_path = cfg.output_dir.join("report.txt");
    write_atomic(&report_path, &report)?;
    files.insert(0, report_path);
    Ok(ScenarioOutcome { exit_code: if ok { EXIT_OK } else { EXIT_FAILED }, report, files })
}

// ---------------------------------------------------------------------------
// command line

/// Parses `name[:arg[:arg]]` mechanism descriptions such as `upga:1:0`.
pub fn parse_mechanism(s: &str) -> Result<Box<dyn Mechanism<Rat>>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || TfmError::Config(format!("cannot parse mechanism {s:?}"));
    let int = |i: usize| -> Result<usize> { parts.get(i).ok_or_else(bad)?.parse().map_err(|_| bad()) };
    let rat = |i: usize, default: Rat| -> Result<Rat> {
        match parts.get(i) {
            Some(p) => parse_rat(p),
            None => Ok(default),
        }
    };
    let zero = Rat::from_integer(0);
    let mech: Box<dyn Mechanism<Rat>> = match parts[0].to_ascii_lowercase().as_str() {
        "gta" if parts.len() == 1 => Box::new(MechanismSpec::gta()),
        "pabga" if parts.len() == 2 => Box::new(MechanismSpec::pabga(int(1)?)?),
        "upga" if parts.len() <= 3 => Box::new(MechanismSpec::upga(int(1)?, rat(2, zero)?)?),
        "well_reserved" | "wr" if parts.len() <= 3 => Box::new(MechanismSpec::well_reserved(int(1)?, rat(2, zero)?)?),
        "supply_limited_pabga" | "supply_limited" if parts.len() == 3 => {
            Box::new(MechanismSpec::supply_limited_pabga(int(1)?, int(2)?)?)
        }
        "myerson_uniform" | "myerson" if parts.len() <= 3 => {
            Box::new(MechanismSpec::myerson_uniform_scaled(int(1)?, rat(2, Rat::from_integer(1))?)?)
        }
        "shading" if parts.len() == 3 => Box::new(MechanismSpec::new(
            Variant::Shading { n: int(1)?, block: int(2)?, distribution: Distribution::Uniform },
            BidSpace::Continuous,
        )?),
        "overcharge" if parts.len() == 2 => Box::new(fixtures::Overcharge { block: int(1)? }),
        "double_burn" if parts.len() == 2 => Box::new(fixtures::DoubleBurn { block: int(1)? }),
        "top_bid_burn" if parts.len() == 2 => Box::new(fixtures::TopBidBurn { block: int(1)? }),
        _ => return Err(bad()),
    };
    Ok(mech)
}

#[derive(Debug, Parser)]
#[command(name = "tfm-lab", version, about = "Transaction fee mechanism laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the checks and revenue tasks of a JSON scenario file.
    Run { config: PathBuf },
    /// Run the built-in claim suite and print a PASS/FAIL table.
    VerifyClaims {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write report.txt and claims.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one property of one mechanism on a finite grid.
    ///
    /// Mechanisms: gta, pabga:K, upga:K[:R], well_reserved:K[:R],
    /// supply_limited:K:L, myerson:K[:MAX], shading:N:K, and the faulty
    /// fixtures overcharge:K, double_burn:K, top_bid_burn:K.
    Check {
        mechanism: String,
        property: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        grid_max: usize,
        #[arg(long, default_value = "1")]
        step: String,
        #[arg(long, default_value_t = 1)]
        max_fake: usize,
        #[arg(long, default_value = "all")]
        coalition: String,
        /// Sample this many cases if the exhaustive search exceeds the budget.
        #[arg(long)]
        random_trials: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the equilibrium pay-as-bid bid for a value under uniform values.
    Bid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        v: f64,
        /// Allow k above the verified range.
        #[arg(long)]
        allow_unverified: bool,
    },
}

/// Output of one command: text for stdout, text for stderr and an exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl CommandOutput {
    fn ok(stdout: String, passed: bool) -> Self {
        Self { stdout, stderr: String::new(), code: if passed { EXIT_OK } else { EXIT_FAILED } }
    }

    fn error(e: TfmError) -> Self {
        let code = match e {
            TfmError::Config(_) | TfmError::InvalidParameter(_) | TfmError::Unverified { .. } => EXIT_USAGE,
            _ => EXIT_FAILED,
        };
        Self { stdout: String::new(), stderr: format!("error: {e}\n"), code }
    }
}

pub fn execute(command: Command) -> CommandOutput {
    match command {
        Command::Run { config } => {
            let out = run_scenario(&config);
            if out.exit_code == EXIT_USAGE {
                CommandOutput { stdout: String::new(), stderr: out.report, code: out.exit_code }
            } else {
                CommandOutput { stdout: out.report, stderr: String::new(), code: out.exit_code }
            }
        }
        Command::VerifyClaims { samples, seed, out } => match verify_claims(samples, seed) {
            Ok(suite) => {
                let text = suite.render();
                if let Some(dir) = out {
                    let written = fs::create_dir_all(&dir)
                        .map_err(TfmError::from)
                        .and_then(|_| write_atomic(&dir.join("report.txt"), &text))
                        .and_then(|_| write_atomic(&dir.join("claims.csv"), &rows_to_csv(&suite.rows)));
                    if let Err(e) = written {
                        return CommandOutput::error(e);
                    }
                }
                CommandOutput::ok(text, suite.passed())
            }
            Err(e) => CommandOutput::error(e),
        },
        Command::Check { mechanism, property, n, grid_max, step, max_fake, coalition, random_trials, seed } => {
            let setup = || -> Result<(Box<dyn Mechanism<Rat>>, Property, CheckConfig)> {
                let mech = parse_mechanism(&mechanism)?;
                let prop: Property = property.parse()?;
                let mut cfg = CheckConfig::new(n, grid_max)
                    .with_step(parse_rat(&step)?)
                    .with_max_fake(max_fake)
                    .with_coalition_bound(parse_coalition(&coalition)?);
                if let Some(t) = random_trials {
                    cfg = cfg.with_random_fallback(t, seed);
                }
                Ok((mech, prop, cfg))
            };
            let (mech, prop, cfg) = match setup() {
                Ok(x) => x,
                Err(e) => return CommandOutput::error(e),
            };
            match properties::check(prop, mech.as_ref(), &cfg) {
                Ok(report) => {
                    let mut text = format!("{}\n", grid_label(&cfg));
                    text.push_str(&report.to_string());
                    if let Some(c) = &report.counterexample {
                        let replayed = c.replay(mech.as_ref()).unwrap_or(false);
                        let _ = writeln!(text, "  replay: {}", if replayed { "exact" } else { "FAILED" });
                    }
                    CommandOutput::ok(text, true)
                }
                Err(e) => CommandOutput::error(e),
            }
        }
        Command::Bid { n, k, v, allow_unverified } => {
            let rule = if allow_unverified { ShadingRule::new_unverified(n, k) } else { ShadingRule::new(n, k) };
            match rule.and_then(|r| r.bid(v).map(|b| (r, b))) {
                Ok((r, b)) => {
                    let mut text = format!("{b}\n");
                    if !r.is_verified() {
                        text.push_str("warning: k is outside the verified range of the closed form\n");
                    }
                    CommandOutput::ok(text, true)
                }
                Err(e) => CommandOutput::error(e),
            }
        }
    }
}

/// Entry point of the `tfm-lab` binary.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let out = execute(cli.command);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse() {
        assert_eq!(parse_rat("3/2").unwrap(), Rat::new(3, 2));
        assert_eq!(parse_rat("0.25").unwrap(), Rat::new(1, 4));
        assert_eq!(parse_rat("-1.5").unwrap(), Rat::new(-3, 2));
        assert_eq!(parse_rat("7").unwrap(), Rat::from_integer(7));
        assert_eq!(parse_rat(".5").unwrap(), Rat::new(1, 2));
        for bad in ["", "1/0", "a", "1.2.3", "."] {
            assert!(parse_rat(bad).is_err(), "{bad}");
        }
        let v: RatValue = serde_json::from_str("0.1").unwrap();
        assert_eq!(v.0, Rat::new(1, 10));
        let v: RatValue = serde_json::from_str("\"1/3\"").unwrap();
        assert_eq!(v.0, Rat::new(1, 3));
    }

    #[test]
    fn csv_round_trip() {
        let row =
            ClaimRow::new("a, \"quoted\" claim", "0.5", ">= 1/2").nk(4, 2).dist("uniform").stderr(1e-4).verdict(true);
        let line = row.to_csv();
        let back = ClaimRow::from_csv(&line).unwrap();
        assert_eq!(back, ClaimRow { tolerance: String::new(), ..row.clone() });
        assert_eq!(back.to_csv(), line);
        assert!(ClaimRow::from_csv("a,b").is_err());
        assert!(ClaimRow::from_csv("\"open,1,2,u,c,r,,PASS").is_err());
    }

    #[test]
    fn scenario_parsing() {
        let cfg = parse_scenario(
            r#"{"mechanism": {"variant": "upga", "block": 1, "reserve": "1/2"},
                "checks": ["dsic", {"property": "mmic", "expect": "violated"}],
                "grid": {"n": 2, "coalition_bound": 1}}"#,
        )
        .unwrap();
        assert_eq!(cfg.checks[1], CheckEntry { property: Property::Mmic, expect: Expect::Violated });
        assert_eq!(cfg.grid.coalition_bound, CoalitionBound::Upto(1));
        assert_eq!(cfg.grid.grid_max, 3);
        assert_eq!(cfg.mechanism.build().unwrap(), MechanismSpec::upga(1, Rat::new(1, 2)).unwrap());

        let err = parse_scenario(r#"{"checks": []}"#).unwrap_err().to_string();
        assert!(err.contains("mechanism"), "{err}");
        let err = parse_scenario(r#"{"mechanism": {"variant": "vickrey"}}"#).unwrap_err().to_string();
        assert!(err.contains("mechanism.variant"), "{err}");
        let err = parse_scenario(r#"{"mechanism": {"variant": "gta"}, "checks": ["dsci"]}"#).unwrap_err().to_string();
        assert!(err.contains("checks[0]") && err.contains("dsci"), "{err}");
        let err = parse_scenario(r#"{"mechanism": {"variant": "gta", "colour": 1}}"#).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let err = parse_scenario(
            r#"{"mechanism": {"variant": "gta"},
                "revenue_tasks": [{"task": "mc_revenue", "n": 4, "sample": 3}]}"#,
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("revenue_tasks[0]"), "{err}");
    }

    #[test]
    fn mechanism_strings() {
        assert_eq!(parse_mechanism("upga:1:0").unwrap().label(), "UPGA(k=1, r=0)");
        assert_eq!(parse_mechanism("myerson:1:3").unwrap().label(), "MyersonUniform(k=1, reserve=3/2)");
        assert_eq!(parse_mechanism("gta").unwrap().label(), "GTA");
        for bad in ["gta:1", "pabga", "upga:x", "nope:1", "supply_limited:2"] {
            assert!(parse_mechanism(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn bid_command() {
        let out = execute(Command::Bid { n: 2, k: 1, v: 0.8, allow_unverified: false });
        assert_eq!(out.code, EXIT_OK);
        assert_eq!(out.stdout.trim().parse::<f64>().unwrap(), 0.4);
        let out = execute(Command::Bid { n: 20, k: 11, v: 0.5, allow_unverified: false });
        assert_eq!(out.code, EXIT_USAGE);
        let out = execute(Command::Bid { n: 20, k: 11, v: 0.5, allow_unverified: true });
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stdout.contains("warning"));
    }

    #[test]
    fn check_command() {
        let check = |mechanism: &str, property: &str| {
            execute(Command::Check {
                mechanism: mechanism.into(),
                property: property.into(),
                n: 2,
                grid_max: 5,
                step: "1".into(),
                max_fake: 1,
                coalition: "all".into(),
                random_trials: None,
                seed: 0,
            })
        };
        let out = check("upga:1:0", "mmic");
        assert_eq!(out.code, EXIT_OK);
        assert!(out.stdout.contains("MMIC: Violated") && out.stdout.contains("replay: exact"), "{}", out.stdout);
        assert_eq!(check("upga:1:0", "nonsense").code, EXIT_USAGE);
    }

    #[test]
    fn table_renders_aligned() {
        let rows =
            vec![ClaimRow::new("x", "1", "1").verdict(true), ClaimRow::new("longer claim", "2", "3").verdict(false)];
        let text = render_table(&rows);
        assert!(text.lines().nth(2).unwrap().starts_with("x            |"));
        assert!(text.contains("FAIL"));
    }
}
