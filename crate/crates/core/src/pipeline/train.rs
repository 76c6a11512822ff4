use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::{receive, send};
use crate::cipher::{encrypt, PermutationKey};
use crate::error::{Error, Result};
use crate::imaging::{load_ppm_dir, mean_abs_correlation, mse_per_pixel, synth_dataset, ImageBuffer, MetricsRecord};
use crate::net::{Checkpoint, GradientSet, StegoModel};
use crate::optim::{adam_step, joint_loss, AdamState, LossConfig};
use crate::tensor::{Mode, Scalar, Tensor};

/// Loss values of one training pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub total: f64,
    pub cover_mse: f64,
    pub secret_mse: f64,
}

/// Forward both networks in training mode and backpropagate the joint loss.
/// The container gradient combines the cover term with the secret term
/// flowing back through the decoder.
pub fn pair_gradients<T: Scalar, R: Rng + ?Sized>(
    model: &StegoModel<T>,
    secret: &Tensor<T>,
    cover: &Tensor<T>,
    loss: &LossConfig,
    rng: &mut R,
) -> Result<(PairLoss, GradientSet<T>)> {
    let params = &model.params;
    let enc_tape = model.encoder.forward(
        params,
        &[("secret_in", secret), ("cover_in", cover)],
        Mode::Train,
        rng,
    )?;
    let container = model.encoder.output(&enc_tape, "output_C")?;
    let dec_tape = model
        .decoder
        .forward(params, &[("container_in", container)], Mode::Train, rng)?;
    let revealed = model.decoder.output(&dec_tape, "output_S")?;
    let jl = joint_loss(cover, container, secret, revealed, loss)?;

    let mut grads = GradientSet::for_params(params);
    let mut d_container = model
        .decoder
        .backward(params, &dec_tape, &[("output_S", jl.revealed_grad)], &mut grads, &["container_in"])?
        .pop()
        .ok_or_else(|| Error::Internal("decoder returned no input gradient".into()))?;
    drop(dec_tape);
    d_container.add_assign(&jl.container_grad)?;
    model
        .encoder
        .backward(params, &enc_tape, &[("output_C", d_container)], &mut grads, &[])?;
    Ok((
        PairLoss {
            total: jl.total,
            cover_mse: jl.cover_mse,
            secret_mse: jl.secret_mse,
        },
        grads,
    ))
}

/// A cover/secret pair with its key.
#[derive(Debug, Clone)]
pub struct StegoPair {
    pub cover: ImageBuffer,
    pub secret: ImageBuffer,
    pub key: PermutationKey,
}

/// Loads or synthesises the dataset and pairs cover `i` with secret
/// `i + pairs`.
pub fn load_pairs(config: &TrainConfig) -> Result<Vec<StegoPair>> {
    let n = config.dataset_pairs;
    let images = match &config.dataset_dir {
        Some(dir) => load_ppm_dir(dir, config.image_size)?,
        None => synth_dataset(config.dataset_seed, 2 * n, config.image_size, config.dataset_kind)?,
    };
    if images.len() < 2 * n {
        return Err(Error::invalid(
            "dataset_pairs",
            format!("{n} pairs need {} images, found {}", 2 * n, images.len()),
        ));
    }
    let channels = images[0].channels();
    if images.iter().any(|im| im.channels() != channels) {
        return Err(Error::shape("load_pairs", "dataset mixes channel counts"));
    }
    (0..n)
        .map(|i| {
            Ok(StegoPair {
                cover: images[i].clone(),
                secret: images[i + n].clone(),
                key: config.key_for_pair(i)?,
            })
        })
        .collect()
}

/// Byte-domain evaluation of a model on a set of pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cover_mse: f64,
    pub secret_mse: f64,
    pub container_correlation: f64,
}

pub fn evaluate(model: &StegoModel<f32>, pairs: &[StegoPair]) -> Result<Evaluation> {
    let per_pair = pairs
        .par_iter()
        .map(|p| {
            let container = send(&p.secret, &p.cover, &p.key, model)?;
            let (_, secret_out) = receive(&container, &p.key, model)?;
            Ok((
                mse_per_pixel(&p.cover, &container)?,
                mse_per_pixel(&p.secret, &secret_out)?,
                mean_abs_correlation(&container).unwrap_or(0.0),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_pair.len().max(1) as f64;
    let (c, s, r) = per_pair
        .iter()
        .fold((0.0, 0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1, acc.2 + v.2));
    Ok(Evaluation {
        cover_mse: c / n,
        secret_mse: s / n,
        container_correlation: r / n,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<MetricsRecord>,
    /// Final parameters and optimizer state.
    pub checkpoint: Checkpoint,
    pub duration: Duration,
}

impl TrainReport {
    pub fn model(&self, noise_stddev: f64) -> Result<StegoModel<f32>> {
        StegoModel::from_checkpoint(&self.checkpoint, noise_stddev)
    }

    pub fn metrics_csv(&self) -> String {
        crate::imaging::metrics_csv(&self.records)
    }
}

/// Model parameters followed by `adam.p.*` / `adam.q.*` tensors.
pub fn training_checkpoint(model: &StegoModel<f32>, adam: &AdamState<f32>) -> Result<Checkpoint> {
    let mut ck = Checkpoint {
        tensors: model.params.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
        step: 0,
    };
    adam.export(&model.params, &mut ck)?;
    Ok(ck)
}

pub fn train(config: &TrainConfig) -> Result<TrainReport> {
    train_with(config, |_| {})
}

/// [`train`] with a callback invoked after every epoch's evaluation.
pub fn train_with(config: &TrainConfig, mut on_epoch: impl FnMut(&MetricsRecord)) -> Result<TrainReport> {
    config.validate()?;
    let start = Instant::now();
    let pairs = load_pairs(config)?;
    let (train_range, eval_range) = config.split();
    let channels = pairs[0].cover.channels();
    let loss_cfg = LossConfig::new(config.beta)?;

    let inputs: Vec<(Tensor<f32>, Tensor<f32>)> = pairs[train_range.clone()]
        .iter()
        .map(|p| Ok((encrypt(&p.secret, &p.key)?.to_tensor(), p.cover.to_tensor())))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut model = StegoModel::<f32>::new(channels, config.noise_stddev)?;
    model.init_glorot(&mut rng);
    let mut adam = AdamState::new(&model.params);

    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_total, mut epoch_secret) = (0.0, 0.0);
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let items: Vec<(usize, u64)> = batch.iter().map(|&i| (i, rng.random::<u64>())).collect();
            let results = items
                .par_iter()
                .map(|&(i, seed)| {
                    let (secret, cover) = &inputs[i];
                    pair_gradients(&model, secret, cover, &loss_cfg, &mut ChaCha8Rng::seed_from_u64(seed))
                })
                .collect::<Vec<_>>();
            let mut total = GradientSet::for_params(&model.params);
            for r in results {
                let (loss, g) = r?;
                if !loss.total.is_finite() {
                    return Err(Error::NonFinite { epoch, batch: batch_idx });
                }
                epoch_total += loss.total;
                epoch_secret += loss.secret_mse;
                total.merge(&g)?;
            }
            total.scale(1.0 / batch.len() as f32);
            model.params.set_grads(total)?;
            adam_step(&mut model.params, &mut adam, &config.adam)?;
            if !model.params.iter().all(|(_, t)| t.all_finite()) {
                return Err(Error::NonFinite { epoch, batch: batch_idx });
            }
        }

        let eval = evaluate(&model, &pairs[eval_range.clone()])?;
        let n = inputs.len() as f64;
        let record = MetricsRecord {
            epoch,
            encode_loss: epoch_total / n,
            reveal_loss: config.beta * epoch_secret / n,
            cover_mse: eval.cover_mse,
            secret_mse: eval.secret_mse,
            container_correlation: eval.container_correlation,
        };
        on_epoch(&record);
        records.push(record);

        if config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 {
            if let Some(dir) = &config.checkpoint_dir {
                std::fs::create_dir_all(dir)?;
                training_checkpoint(&model, &adam)?.write(dir.join(format!("epoch_{epoch:04}.sgn1")))?;
            }
        }
    }

    Ok(TrainReport {
        records,
        checkpoint: training_checkpoint(&model, &adam)?,
        duration: start.elapsed(),
    })
}

/// Held-out metrics of one β, averaged over rng seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub cover_mse: f64,
    pub secret_mse: f64,
    /// `(rng_seed, cover_mse, secret_mse)` of every run.
    pub runs: Vec<(u64, f64, f64)>,
}

/// Trains one model per `(β, seed)` with everything else taken from `base`.
pub fn beta_sweep(
    base: &TrainConfig,
    betas: &[f64],
    seeds: &[u64],
    mut on_run: impl FnMut(f64, u64, &TrainReport),
) -> Result<Vec<SweepRow>> {
    if betas.len() < 2 {
        return Err(Error::invalid("betas", "need at least two values"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one rng seed"));
    }
    betas
        .iter()
        .map(|&beta| {
            let runs = seeds
                .iter()
                .map(|&seed| {
                    let cfg = TrainConfig {
                        beta,
                        rng_seed: seed,
                        ..base.clone()
                    };
                    let report = train(&cfg)?;
                    on_run(beta, seed, &report);
                    let last = report.records.last().expect("epochs >= 1");
                    Ok((seed, last.cover_mse, last.secret_mse))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = runs.len() as f64;
            Ok(SweepRow {
                beta,
                cover_mse: runs.iter().map(|r| r.1).sum::<f64>() / n,
                secret_mse: runs.iter().map(|r| r.2).sum::<f64>() / n,
                runs,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("beta,cover_mse,secret_mse\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.beta, r.cover_mse, r.secret_mse);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::SynthKind;

    fn tiny() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 2,
            image_size: 8,
            grid_side: 2,
            dataset_pairs: 3,
            dataset_kind: SynthKind::Gradients,
            ..Default::default()
        }
    }

    #[test]
    fn one_epoch_one_record() {
        let report = train(&TrainConfig { dataset_pairs: 1, ..tiny() }).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].epoch, 1);
        assert!(report.checkpoint.get("adam.p.encoder.output_C.weight").is_some());
        assert_eq!(report.checkpoint.step, 1);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { epochs: 2, ..tiny() };
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.checkpoint.to_bytes().unwrap(), b.checkpoint.to_bytes().unwrap());
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn huge_learning_rate_is_caught() {
        let mut cfg = TrainConfig { epochs: 3, ..tiny() };
        cfg.adam.learning_rate = 1e30;
        assert!(matches!(train(&cfg), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn sweep_needs_two_betas() {
        assert!(beta_sweep(&tiny(), &[1.0], &[1], |_, _, _| {}).is_err());
        let rows = beta_sweep(&tiny(), &[0.5, 0.5], &[3], |_, _, _| {}).unwrap();
        assert_eq!(rows[0], SweepRow { beta: 0.5, ..rows[1].clone() });
        assert!(sweep_csv(&rows).starts_with("beta,cover_mse,secret_mse\n0.5,"));
    }
}
