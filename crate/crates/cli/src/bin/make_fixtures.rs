//! Regenerate the committed fixture files. Output is deterministic, so a
//! clean checkout reproduces them byte-for-byte.

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures"));
    match gridsched_cli::fixtures::write_all(&dir) {
        Ok(()) => println!("fixtures written to {}", dir.display()),
        Err(err) => {
            eprintln!("failed: {err}");
            std::process::exit(1);
        }
    }
}
