//! One line per acceptance criterion; exits nonzero if any fails.
//! Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in gaea::acceptance::criteria().iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let result = gaea::acceptance::run_criterion(c);
        println!("{result}");
        failed += usize::from(!result.passed);
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
