//! Drives a whole experiment from a config file, as the `dampspec full`
//! subcommand does: simulate, recover, and compare with direct data.
//!
//! ```text
//! cargo run --release --example config_runner -- configs/circle_train.toml /tmp/run
//! ```

use dampspec::cli::{run_full, LoadedConfig, Overrides};
use dampspec::compare::Tolerances;
use std::path::PathBuf;

fn main() -> dampspec::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/circle_train.toml"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dampspec-run"));

    let cfg = LoadedConfig::from_path(&config)?;
    let report = run_full(&cfg, &out, &Overrides::default(), Tolerances::RECOVERED)?;
    print!("{report}");
    println!("artifacts in {}", out.display());
    Ok(())
}
