//! Runs the acceptance criteria and prints one line per criterion.
//!
//! Plain `cargo test` runs all twelve; numeric arguments select a subset, e.g.
//! `cargo test --test acceptance -- 2 10`.

use std::path::PathBuf;
use std::process::ExitCode;

use sirlab_harness::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<usize> = if picked.is_empty() { CRITERIA.iter().map(|(k, _)| *k).collect() } else { picked };
    let scratch = tempfile::tempdir().expect("scratch directory");
    let root: PathBuf = scratch.path().to_path_buf();
    let mut failed = 0;
    for id in &ids {
        match run_criterion(*id, &root) {
            Ok(outcome) => {
                println!("{outcome}");
                failed += usize::from(!outcome.passed);
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", ids.len() - failed, ids.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
