//! Write the synthetic one-frame scene (image, mask, detections, track,
//! reference library, manifest) into a directory.
//!
//! cargo run --example make_scene -- crates/core/tests/fixtures/scene

use std::env;
use std::process::ExitCode;

fn main() -> ExitCode {
    let Some(dir) = env::args().nth(1) else {
        eprintln!("usage: make_scene <output-dir>");
        return ExitCode::from(2);
    };
    match roadaudit::synth::write_scene(&dir) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("make_scene: {e}");
            ExitCode::FAILURE
        }
    }
}
