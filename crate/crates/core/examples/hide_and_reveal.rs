//! Sender and receiver round trip: encrypt a secret, hide it in a cover,
//! reveal it from the container and decrypt it. Also decrypts with a wrong
//! key for comparison.
//!
//! ```text
//! cargo run --release --example hide_and_reveal -- [checkpoint.sgn1] [out_dir]
//! ```
//!
//! Without a checkpoint a small model is trained first (about a minute).

use std::path::PathBuf;

use stegnet::cipher::{decrypt, derive_key};
use stegnet::imaging::{mse_per_pixel, save_ppm};
use stegnet::net::{Checkpoint, StegoModel};
use stegnet::pipeline::{load_pairs, receive, send, train, TrainConfig};

fn main() -> stegnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let checkpoint = args.next().filter(|a| !a.is_empty());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/hide_and_reveal".into()));
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
    let pair = &pairs[config.split().1.start];

    let container = send(&pair.secret, &pair.cover, &pair.key, &model)?;
    let (revealed, secret_out) = receive(&container, &pair.key, &model)?;
    let wrong = decrypt(&revealed, &derive_key(pair.key.seed() + 1, pair.key.grid_side())?)?;

    for (name, img) in [
        ("cover", &pair.cover),
        ("secret", &pair.secret),
        ("container", &container),
        ("revealed_encrypted", &revealed),
        ("secret_out", &secret_out),
        ("secret_wrong_key", &wrong),
    ] {
        save_ppm(out.join(format!("{name}.ppm")), img)?;
    }
    println!("cover vs container mse      {:>10.2}", mse_per_pixel(&pair.cover, &container)?);
    println!("secret vs decrypted mse     {:>10.2}", mse_per_pixel(&pair.secret, &secret_out)?);
    println!("secret vs wrong-key mse     {:>10.2}", mse_per_pixel(&pair.secret, &wrong)?);
    println!("images written to {}", out.display());
    Ok(())
}
