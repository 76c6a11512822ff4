//! Trains the hide/reveal networks on a small synthetic dataset and writes
//! the checkpoint and metrics series.
//!
//! ```text
//! cargo run --release --example train_toy -- [epochs] [out_dir] [key=value ...]
//! ```
//!
//! Extra `key=value` arguments override fields of the default config, using
//! the same names as the config file.

use std::path::PathBuf;

use stegnet::pipeline::{train_with, TrainConfig};

fn main() -> stegnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(Ok(30), |s| s.parse()).expect("epochs must be an integer");
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/toy".into()));
    std::fs::create_dir_all(&out)?;

    let mut config = TrainConfig { epochs, ..TrainConfig::default() };
    for kv in args {
        let (k, v) = kv.split_once('=').expect("overrides look like key=value");
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    println!(
        "training {epochs} epochs on {} pairs of {s}x{s} images",
        config.dataset_pairs,
        s = config.image_size
    );
    let report = train_with(&config, |r| {
        println!(
            "epoch {:>4}  encode {:.5}  reveal {:.5}  cover mse {:8.2}  secret mse {:8.2}",
            r.epoch, r.encode_loss, r.reveal_loss, r.cover_mse, r.secret_mse
        );
    })?;
    report.checkpoint.write(out.join("toy.sgn1"))?;
    std::fs::write(out.join("metrics.csv"), report.metrics_csv())?;
    std::fs::write(out.join("toy.cfg"), config.to_config_string())?;
    println!("done in {:.1?}; outputs in {}", report.duration, out.display());
    Ok(())
}
