//! Writes one of the built-in synthetic datasets to a directory.
//!
//! ```text
//! cargo run -p aggremc-core --example make_dataset -- two-clusters data/twoclusters 0
//! cargo run -p aggremc-core --example make_dataset -- planted-partition /tmp/pp 0
//! ```

use aggremc_core::synth::{planted_partition, two_clusters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let usage = "usage: make_dataset <two-clusters|planted-partition> <dir> [seed]";
    let mut args = std::env::args().skip(1);
    let which = args.next().ok_or(usage)?;
    let dir = std::path::PathBuf::from(args.next().ok_or(usage)?);
    let seed: u64 = match args.next() {
        Some(s) => s.parse()?,
        None => 0,
    };
    let data = match which.as_str() {
        "two-clusters" => two_clusters(seed),
        "planted-partition" => planted_partition(seed),
        other => return Err(format!("unknown dataset {other:?}; {usage}").into()),
    };
    std::fs::create_dir_all(&dir)?;
    data.write_to(&dir)?;
    println!("wrote dataset to {}", dir.display());
    Ok(())
}
