//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 2, 8 and 12 each contain a clause that does not hold for the
//! implemented mathematics (see the README). They are run at their stated
//! tolerances and reported as FAIL; the process exits nonzero only if
//! another criterion fails or one of these starts passing.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use brwtie_cli::verify::{criteria, run_criterion, CriterionResult};

const KNOWN_FAILURES: [(u32, &str); 3] = [
    (2, "psi'(0) = -1/2, so |psi(1e-4) - psi(0)| is about 5e-5"),
    (8, "Lambda_n >= b_n - M_n pathwise, so lambda* >= -l*; the stated direction fails"),
    (12, "log correction puts M_16/16 near 0.82 v*; Lambda_n <= n v* - M_n is reversed"),
];

fn simulate(bin: &str, config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(bin)
        .args(["--env", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"])
        .env("BRWTIE_WORKERS", "1")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("simulate exited with {status}"))
    }
}

fn determinism() -> CriterionResult {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_brwtie");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/homogeneous.toml");
    let dir = tempfile::tempdir().expect("temp dir");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let outcome = simulate(bin, &config, &a).and_then(|_| simulate(bin, &config, &b)).and_then(|_| {
        let fa = std::fs::read(a.join("trials.csv")).map_err(|e| e.to_string())?;
        let fb = std::fs::read(b.join("trials.csv")).map_err(|e| e.to_string())?;
        Ok((fa == fb, format!("two runs of `brwtie simulate`, {} bytes each, identical = {}", fa.len(), fa == fb)))
    });
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult {
        id: 13,
        title: "simulate determinism".into(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: None,
    }
}

fn main() {
    let mut results = Vec::new();
    for c in criteria() {
        let r = run_criterion(&c);
        println!("{}", r.line());
        results.push(r);
    }
    let r = determinism();
    println!("{}", r.line());
    results.push(r);

    let known = |id: u32| KNOWN_FAILURES.iter().find(|k| k.0 == id).map(|k| k.1);
    let mut unexpected = Vec::new();
    for r in &results {
        match (r.pass, known(r.id)) {
            (false, Some(why)) => println!("  criterion {} fails as analysed: {why}", r.id),
            (false, None) => unexpected.push(format!("criterion {} failed", r.id)),
            (true, Some(_)) => unexpected.push(format!("criterion {} passed but is listed as failing", r.id)),
            (true, None) => {}
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed} passed, {} failed ({} analysed)", results.len() - passed, KNOWN_FAILURES.len());
    if !unexpected.is_empty() {
        for u in &unexpected {
            println!("unexpected: {u}");
        }
        std::process::exit(1);
    }
}
