//! Mean adjacent-pixel correlation of ciphertexts as the number of blocks
//! grows, averaged over synthetic gradient images.
//!
//! ```text
//! cargo run --example correlation_order -- [count]
//! ```

use stegnet::cli::correlation_report;

fn main() -> stegnet::Result<()> {
    let count = std::env::args().nth(1).map_or(20, |s| s.parse().expect("count must be an integer"));
    print!("{}", correlation_report(&[], &[2, 4, 8, 14], count, 1)?);
    Ok(())
}
