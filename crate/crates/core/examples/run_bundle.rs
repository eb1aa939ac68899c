//! Drive the command-line front end from code: run a canned command,
//! write its bundle and show the stamped CSV header.
//!
//!     cargo run --example run_bundle

use clap::Parser;
use rabi_hubbard::cli::{run, write_bundle, Cli};

fn main() -> rabi_hubbard::Result<()> {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/chain_n4.json");
    let cli = Cli::parse_from(["rabi-hubbard", "chain", "--config", config]);
    let bundle = run(&cli)?;
    let dir = std::env::temp_dir().join("rabi-hubbard-chain-n4");
    write_bundle(&bundle, &dir)?;
    println!("wrote {} files to {}", bundle.files.len(), dir.display());
    for line in bundle.files[0]
        .body
        .lines()
        .filter(|l| l.starts_with('#') || l.contains("freq,"))
        .take(16)
    {
        println!("{line}");
    }
    Ok(())
}
