//! Command-line front end. [`run`] maps every error to a stable exit code:
//! 0 success, 2 usage or validation, 3 data or shape, 4 numeric failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::cipher::{brute_force_years, decrypt, derive_key, encrypt, keyspace, PermutationKey};
use crate::error::{Error, Result};
use crate::imaging::{
    histogram, load_ppm, mean_abs_correlation, save_ppm, synth_dataset, ImageBuffer, SynthKind,
};
use crate::net::{Checkpoint, StegoModel, DEFAULT_NOISE_STDDEV};
use crate::pipeline::{attack_container, beta_sweep, receive, send, sweep_csv, train, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "stegnet", version, about = "Encrypted image steganography toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Histogram,
    Correlation,
    Keyspace,
    Sweep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an SGKEY1 key file.
    Keygen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scramble the blocks of a PPM image.
    Encrypt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Undo `encrypt`.
    Decrypt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_checkpoint: PathBuf,
        #[arg(long)]
        metrics_csv: PathBuf,
    },
    /// Encrypt a secret and hide it in a cover.
    Hide {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        cover: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reveal and decrypt the secret held by a container.
    Reveal {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        container: PathBuf,
        /// Decrypted secret.
        #[arg(long)]
        out: PathBuf,
        /// Decoder output before decryption.
        #[arg(long)]
        out_revealed: PathBuf,
        /// Original secret; prints the per-pixel MSE when given.
        #[arg(long)]
        secret: Option<PathBuf>,
    },
    /// Residual attack with the original cover leaked.
    Attack {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Encrypt the secret first; omit to attack an unencrypted embedding.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long)]
        cover: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long)]
        out_residual: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
    },
    /// CSV series for histograms, correlation, keyspace and β sweeps.
    Report {
        #[arg(long = "in", num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        what: String,
        #[arg(long)]
        out_csv: PathBuf,
        /// histogram: also render bar charts to this PPM.
        #[arg(long)]
        heatmap: Option<PathBuf>,
        /// histogram: count `|in0 − in1|` instead of the inputs.
        #[arg(long)]
        diff: bool,
        /// keyspace: number of blocks.
        #[arg(long, default_value_t = 196)]
        blocks: u64,
        /// keyspace: attacker speed.
        #[arg(long, default_value_t = 1e16)]
        ops_per_second: f64,
        /// correlation: grid sides to compare.
        #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 8, 14])]
        grids: Vec<usize>,
        /// correlation: synthetic gradient images when no --in is given.
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// correlation: dataset seed; also the key seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// sweep: base config file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.75, 1.0])]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
    },
}

/// Exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid { .. } | Error::Io(_) => EXIT_USAGE,
        Error::Shape { .. } | Error::GridIndivisible { .. } | Error::Format { .. } => EXIT_DATA,
        Error::NonFinite { .. } | Error::MissingGradient(_) | Error::Internal(_) => EXIT_NUMERIC,
    }
}

/// Parses `args` (program name first), executes, and returns the exit code.
/// Diagnostics go to stderr.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn read_key(path: &Path) -> Result<PermutationKey> {
    PermutationKey::read(path)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn load_model(path: &Path) -> Result<StegoModel<f32>> {
    StegoModel::from_checkpoint(&Checkpoint::read(path)?, DEFAULT_NOISE_STDDEV)
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Keygen { seed, grid, out } => {
            if grid == 0 {
                return Err(Error::invalid("--grid", "must be >= 1"));
            }
            derive_key(seed, grid)?.write(out)
        }
        Command::Encrypt { input, key, out } => {
            let key = read_key(&key)?;
            save_ppm(out, &encrypt(&load_ppm(input)?, &key)?)
        }
        Command::Decrypt { input, key, out } => {
            let key = read_key(&key)?;
            save_ppm(out, &decrypt(&load_ppm(input)?, &key)?)
        }
        Command::Train {
            config,
            out_checkpoint,
            metrics_csv,
        } => {
            let text = std::fs::read_to_string(config)?;
            let cfg = TrainConfig::parse(&text)?;
            let report = train(&cfg)?;
            report.checkpoint.write(&out_checkpoint)?;
            write_file(&metrics_csv, report.metrics_csv())?;
            if let Some(last) = report.records.last() {
                println!(
                    "epochs {}  encode_loss {:.6}  cover_mse {:.3}  secret_mse {:.3}  ({:.1?})",
                    last.epoch, last.encode_loss, last.cover_mse, last.secret_mse, report.duration
                );
            }
            Ok(())
        }
        Command::Hide {
            checkpoint,
            key,
            cover,
            secret,
            out,
        } => {
            let model = load_model(&checkpoint)?;
            let key = read_key(&key)?;
            let container = send(&load_ppm(secret)?, &load_ppm(cover)?, &key, &model)?;
            save_ppm(out, &container)
        }
        Command::Reveal {
            checkpoint,
            key,
            container,
            out,
            out_revealed,
            secret,
        } => {
            let model = load_model(&checkpoint)?;
            let key = read_key(&key)?;
            let (revealed, secret_out) = receive(&load_ppm(container)?, &key, &model)?;
            save_ppm(out_revealed, &revealed)?;
            save_ppm(out, &secret_out)?;
            if let Some(path) = secret {
                let mse = crate::imaging::mse_per_pixel(&load_ppm(path)?, &secret_out)?;
                println!("secret_mse {mse}");
            }
            Ok(())
        }
        Command::Attack {
            checkpoint,
            key,
            cover,
            secret,
            out_residual,
            out_csv,
        } => {
            let model = load_model(&checkpoint)?;
            let (cover, secret) = (load_ppm(cover)?, load_ppm(secret)?);
            let key = key.map(|k| read_key(&k)).transpose()?;
            let outcome = match &key {
                Some(k) => attack_container(&secret, &cover, send(&secret, &cover, k, &model)?)?,
                None => crate::pipeline::residual_attack(&secret, &cover, None, &model)?,
            };
            save_ppm(out_residual, &outcome.residual)?;
            write_file(
                &out_csv,
                format!("encrypted,similarity\n{},{}\n", key.is_some(), outcome.similarity),
            )?;
            println!("similarity {}", outcome.similarity);
            Ok(())
        }
        Command::Report {
            inputs,
            what,
            out_csv,
            heatmap,
            diff,
            blocks,
            ops_per_second,
            grids,
            count,
            seed,
            config,
            betas,
            seeds,
        } => {
            let kind = ReportKind::from_str(&what, false).map_err(|_| {
                Error::invalid("--what", format!("`{what}` (expected histogram|correlation|keyspace|sweep)"))
            })?;
            let csv = match kind {
                ReportKind::Keyspace => keyspace_report(blocks, ops_per_second)?,
                ReportKind::Histogram => histogram_report(&inputs, diff, heatmap.as_deref())?,
                ReportKind::Correlation => correlation_report(&inputs, &grids, count, seed)?,
                ReportKind::Sweep => {
                    let base = match config {
                        Some(p) => TrainConfig::parse(&std::fs::read_to_string(p)?)?,
                        None => return Err(Error::invalid("--config", "sweep needs a base config")),
                    };
                    sweep_csv(&beta_sweep(&base, &betas, &seeds, |b, s, r| {
                        let last = r.records.last().expect("epochs >= 1");
                        eprintln!("beta {b} seed {s}: cover {:.3} secret {:.3}", last.cover_mse, last.secret_mse);
                    })?)
                }
            };
            write_file(&out_csv, csv)
        }
    }
}

pub fn keyspace_report(blocks: u64, ops_per_second: f64) -> Result<String> {
    let (l10, l2) = keyspace(blocks)?;
    let years = brute_force_years(blocks, ops_per_second)?;
    Ok(format!(
        "blocks,log10_keyspace,log2_keyspace,ops_per_second,log10_years\n{blocks},{l10},{l2},{ops_per_second},{years}\n"
    ))
}

fn histogram_report(inputs: &[PathBuf], diff: bool, heatmap: Option<&Path>) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::invalid("--in", "histogram needs at least one image"));
    }
    let mut images = inputs.iter().map(load_ppm).collect::<Result<Vec<_>>>()?;
    if diff {
        if images.len() != 2 {
            return Err(Error::invalid("--in", "--diff needs exactly two images"));
        }
        images[0].same_shape("histogram diff", &images[1])?;
        let (a, b) = (&images[0], &images[1]);
        let d = a.pixels().iter().zip(b.pixels()).map(|(x, y)| x.abs_diff(*y)).collect();
        images = vec![ImageBuffer::new(a.height(), a.width(), a.channels(), d)?];
    }
    let hists: Vec<_> = images.iter().map(histogram).collect();
    let mut out = String::from("value");
    for (i, h) in hists.iter().enumerate() {
        for c in 0..h.channels() {
            let _ = write!(out, ",in{i}_c{c}");
        }
    }
    out.push('\n');
    for v in 0..256 {
        let _ = write!(out, "{v}");
        for h in &hists {
            for c in 0..h.channels() {
                let _ = write!(out, ",{}", h.bins(c)[v]);
            }
        }
        out.push('\n');
    }
    if let Some(path) = heatmap {
        let panels = hists.iter().map(|h| h.heatmap(64)).collect::<Result<Vec<_>>>()?;
        let pixels: Vec<u8> = panels.iter().flat_map(|p| p.pixels().iter().copied()).collect();
        let height = panels.iter().map(|p| p.height()).sum();
        save_ppm(path, &ImageBuffer::new(height, 256, 1, pixels)?)?;
    }
    Ok(out)
}

/// Mean `|adjacent correlation|` of ciphertexts per grid side. Images are
/// resized to the smallest size divisible by every grid side (at least 28).
pub fn correlation_report(inputs: &[PathBuf], grids: &[usize], count: usize, seed: u64) -> Result<String> {
    if grids.is_empty() || grids.contains(&0) {
        return Err(Error::invalid("--grids", "need positive grid sides"));
    }
    let lcm = grids.iter().fold(1usize, |a, &g| a / gcd(a, g) * g);
    let size = lcm * 28usize.div_ceil(lcm);
    let images = if inputs.is_empty() {
        synth_dataset(seed, count, size, SynthKind::Gradients)?
    } else {
        inputs
            .iter()
            .map(|p| load_ppm(p)?.resize_nearest(size, size))
            .collect::<Result<Vec<_>>>()?
    };
    if images.is_empty() {
        return Err(Error::invalid("--count", "need at least one image"));
    }
    let plain = images.iter().map(mean_abs_correlation).collect::<Result<Vec<_>>>()?;
    let mut out = String::from("grid_side,blocks,mean_abs_correlation\n");
    let _ = writeln!(out, "1,1,{}", plain.iter().sum::<f64>() / plain.len() as f64);
    for &g in grids {
        let mut sum = 0.0;
        for (i, img) in images.iter().enumerate() {
            let key = derive_key(seed.wrapping_add(i as u64), g)?;
            sum += mean_abs_correlation(&encrypt(img, &key)?)?;
        }
        let _ = writeln!(out, "{g},{},{}", g * g, sum / images.len() as f64);
    }
    Ok(out)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
