//! Encoder (prep + hiding) and decoder (reveal) networks.

mod checkpoint;
mod graph;
mod params;

use rand::Rng;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use graph::{
    build_decoder, build_encoder, forward_decoder, forward_encoder, GraphNode, LayerGraph,
    DEFAULT_NOISE_STDDEV, HIDING_STAGES, OUTPUT_KERNEL, REVEAL_STAGES, STAGE_BRANCHES,
    STAGE_CHANNELS,
};
pub use params::{GradientSet, ParameterSet};

use crate::error::{Error, Result};
use crate::tensor::{Mode, Scalar, Tensor};

/// Encoder and decoder sharing one parameter registry.
///
/// Encoder parameters are named `encoder.*` and come first, decoder
/// parameters `decoder.*`.
#[derive(Debug, Clone)]
pub struct StegoModel<T = f32> {
    pub encoder: LayerGraph,
    pub decoder: LayerGraph,
    pub params: ParameterSet<T>,
    channels: usize,
}

impl<T: Scalar> StegoModel<T> {
    /// Builds both networks with zero parameters.
    pub fn new(channels: usize, noise_stddev: f64) -> Result<Self> {
        let (encoder, mut params) = build_encoder::<T>(channels)?;
        let (decoder, dec_params) = build_decoder::<T>(channels, noise_stddev)?;
        params.extend(dec_params)?;
        Ok(Self {
            encoder,
            decoder,
            params,
            channels,
        })
    }

    pub fn init_glorot<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.params.init_glorot(rng);
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn encoder_param_count(&self) -> usize {
        self.params.count_with_prefix("encoder.")
    }

    pub fn decoder_param_count(&self) -> usize {
        self.params.count_with_prefix("decoder.")
    }

    pub fn hide(&self, secret: &Tensor<T>, cover: &Tensor<T>) -> Result<Tensor<T>> {
        forward_encoder(&self.encoder, &self.params, secret, cover)
    }

    pub fn reveal<R: Rng + ?Sized>(
        &self,
        container: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor<T>> {
        forward_decoder(&self.decoder, &self.params, container, mode, rng)
    }

    /// Copies every model parameter out of a checkpoint. Extra tensors
    /// (optimizer state) are ignored.
    pub fn load_params(&mut self, ck: &Checkpoint) -> Result<()> {
        for (name, t) in self.params.iter_mut() {
            let src = ck
                .get(name)
                .ok_or_else(|| Error::format("SGN1", 0, format!("checkpoint lacks `{name}`")))?;
            if src.shape() != t.shape() {
                return Err(Error::shape(
                    "load_params",
                    format!("`{name}`: checkpoint {:?}, model {:?}", src.shape(), t.shape()),
                ));
            }
            *t = src.cast();
        }
        Ok(())
    }
}

impl StegoModel<f32> {
    /// Rebuilds a model from a checkpoint, inferring the image channel count
    /// from the `output_C` kernel.
    pub fn from_checkpoint(ck: &Checkpoint, noise_stddev: f64) -> Result<Self> {
        let w = ck
            .get("encoder.output_C.weight")
            .ok_or_else(|| Error::format("SGN1", 0, "checkpoint has no encoder.output_C.weight"))?;
        let channels = *w
            .shape()
            .last()
            .ok_or_else(|| Error::format("SGN1", 0, "output_C weight has rank 0"))?;
        let mut model = Self::new(channels, noise_stddev)?;
        model.load_params(ck)?;
        Ok(model)
    }
}
