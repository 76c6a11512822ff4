//! Trains one model per loss weight β and seed and reports held-out cover
//! and secret MSE, averaged over seeds.
//!
//! ```text
//! cargo run --release --example beta_sweep -- [epochs] [image_size]
//! ```

use stegnet::pipeline::{beta_sweep, sweep_csv, TrainConfig};

fn main() -> stegnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(20, |s| s.parse().expect("epochs must be an integer"));
    let image_size = args.next().map_or(16, |s| s.parse().expect("image_size must be an integer"));
    let base = TrainConfig {
        epochs,
        image_size,
        grid_side: 4,
        ..TrainConfig::default()
    };
    let rows = beta_sweep(&base, &[0.25, 0.75, 1.0], &[1, 2, 3], |beta, seed, report| {
        let last = report.records.last().expect("epochs >= 1");
        eprintln!(
            "beta {beta} seed {seed}: cover {:.2} secret {:.2} ({:.1?})",
            last.cover_mse, last.secret_mse, report.duration
        );
    })?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
