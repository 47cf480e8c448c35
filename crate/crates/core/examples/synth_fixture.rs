//! Writes the seeded synthetic dataset used by the CLI tests.
//!
//! ```text
//! cargo run -p xdice-core --example synth_fixture -- <out-dir> [seed]
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use xdice::synth::{write_dataset, SynthConfig};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(out) = args.next().map(PathBuf::from) else {
        eprintln!("usage: synth_fixture <out-dir> [seed]");
        return ExitCode::from(1);
    };
    let mut config = SynthConfig::default();
    if let Some(seed) = args.next() {
        match seed.parse() {
            Ok(s) => config.seed = s,
            Err(_) => {
                eprintln!("invalid seed '{seed}'");
                return ExitCode::from(1);
            }
        }
    }
    match write_dataset(&out, &config) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
