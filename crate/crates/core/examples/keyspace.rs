//! Keyspace size and brute-force time of the block cipher for several
//! encryption orders.
//!
//! ```text
//! cargo run --example keyspace -- [ops_per_second]
//! ```

use stegnet::cipher::{brute_force_years, keyspace};

fn main() -> stegnet::Result<()> {
    let ops: f64 = std::env::args().nth(1).map_or(1e16, |s| s.parse().expect("ops_per_second must be a number"));
    println!("{:>6} {:>12} {:>12} {:>16}", "blocks", "log10(n!)", "log2(n!)", "log10(years)");
    for grid in [2u64, 4, 7, 8, 14, 16] {
        let n = grid * grid;
        let (l10, l2) = keyspace(n)?;
        println!("{n:>6} {l10:>12.4} {l2:>12.2} {:>16.4}", brute_force_years(n, ops)?);
    }
    Ok(())
}
