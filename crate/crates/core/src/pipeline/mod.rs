//! Sender and receiver blocks, training, β sweeps and the residual attack.

mod config;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{KeyPolicy, TrainConfig};
pub use train::{
    beta_sweep, evaluate, load_pairs, pair_gradients, sweep_csv, train, train_with,
    training_checkpoint, Evaluation, PairLoss, StegoPair, SweepRow, TrainReport,
};

use crate::cipher::{check_divisible, decrypt, encrypt, PermutationKey};
use crate::error::Result;
use crate::imaging::{image_similarity, residual_enhance, ImageBuffer};
use crate::net::StegoModel;
use crate::tensor::Mode;

/// Hides `secret` (passed through the encoder as given) inside `cover`.
fn embed(secret: &ImageBuffer, cover: &ImageBuffer, model: &StegoModel<f32>) -> Result<ImageBuffer> {
    secret.same_shape("send", cover)?;
    let container = model.hide(&secret.to_tensor(), &cover.to_tensor())?;
    ImageBuffer::from_tensor(&container)
}

/// Encrypts the secret, then runs the encoder. The container is quantized
/// to bytes.
pub fn send(
    secret: &ImageBuffer,
    cover: &ImageBuffer,
    key: &PermutationKey,
    model: &StegoModel<f32>,
) -> Result<ImageBuffer> {
    secret.same_shape("send", cover)?;
    let encrypted = encrypt(secret, key)?;
    embed(&encrypted, cover, model)
}

/// Runs the decoder in evaluation mode and decrypts its output. Returns
/// `(revealed_encrypted, secret_out)`.
pub fn receive(
    container: &ImageBuffer,
    key: &PermutationKey,
    model: &StegoModel<f32>,
) -> Result<(ImageBuffer, ImageBuffer)> {
    check_divisible(container.height(), container.width(), key.grid_side())?;
    let revealed = model.reveal(&container.to_tensor(), Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))?;
    let revealed = ImageBuffer::from_tensor(&revealed)?;
    let secret = decrypt(&revealed, key)?;
    Ok((revealed, secret))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub container: ImageBuffer,
    /// Stretched grayscale `|cover − container|`.
    pub residual: ImageBuffer,
    /// Pearson r between the residual and the grayscale secret.
    pub similarity: f64,
}

/// Embeds the secret (encrypted when a key is given), then measures how much
/// of it shows in the enhanced cover/container residual.
pub fn residual_attack(
    secret: &ImageBuffer,
    cover: &ImageBuffer,
    key: Option<&PermutationKey>,
    model: &StegoModel<f32>,
) -> Result<AttackOutcome> {
    let container = match key {
        Some(k) => send(secret, cover, k, model)?,
        None => embed(secret, cover, model)?,
    };
    attack_container(secret, cover, container)
}

/// Residual analysis of an existing container.
pub fn attack_container(
    secret: &ImageBuffer,
    cover: &ImageBuffer,
    container: ImageBuffer,
) -> Result<AttackOutcome> {
    let residual = residual_enhance(cover, &container)?;
    let similarity = image_similarity(&residual, &secret.to_grayscale())?;
    Ok(AttackOutcome {
        container,
        residual,
        similarity,
    })
}
