//! Residual attack on containers built with and without the cipher: the
//! enhanced cover/container difference is correlated with the secret.
//!
//! ```text
//! cargo run --release --example residual_attack -- [checkpoint.sgn1] [out_dir]
//! ```
//!
//! Without a checkpoint a small model is trained first (about a minute).

use std::path::PathBuf;

use stegnet::imaging::save_ppm;
use stegnet::net::{Checkpoint, StegoModel};
use stegnet::pipeline::{load_pairs, residual_attack, train, TrainConfig};

fn main() -> stegnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let checkpoint = args.next().filter(|a| !a.is_empty());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/residual_attack".into()));
    std::fs::create_dir_all(&out)?;

    let mut config = TrainConfig::default();
    let model = match checkpoint {
        Some(path) => StegoModel::from_checkpoint(&Checkpoint::read(path)?, config.noise_stddev)?,
        None => {
            config.epochs = 10;
            println!("training a {}-epoch model", config.epochs);
            train(&config)?.model(config.noise_stddev)?
        }
    };
    let pairs = load_pairs(&config)?;
    let held = &pairs[config.split().1];

    println!("{:>4} {:>12} {:>12}", "pair", "plain", "encrypted");
    let (mut plain_sum, mut enc_sum) = (0.0, 0.0);
    for (i, p) in held.iter().enumerate() {
        let plain = residual_attack(&p.secret, &p.cover, None, &model)?;
        let enc = residual_attack(&p.secret, &p.cover, Some(&p.key), &model)?;
        if i == 0 {
            save_ppm(out.join("residual_plain.ppm"), &plain.residual)?;
            save_ppm(out.join("residual_encrypted.ppm"), &enc.residual)?;
            save_ppm(out.join("secret.ppm"), &p.secret)?;
        }
        println!("{i:>4} {:>12.4} {:>12.4}", plain.similarity, enc.similarity);
        plain_sum += plain.similarity;
        enc_sum += enc.similarity;
    }
    let n = held.len() as f64;
    println!("mean {:>12.4} {:>12.4}", plain_sum / n, enc_sum / n);
    println!("residuals written to {}", out.display());
    Ok(())
}
