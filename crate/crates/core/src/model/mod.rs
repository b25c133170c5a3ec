//! Encoder, time-scaling expert decoder and conditional discriminator.

mod blocks;
mod checkpoint;
mod decoder;
mod discriminator;
mod encoder;
mod gradients;

pub use blocks::{expert_factors, GATE_INPUT_LIMIT, ExpertBank, ExpertCache, GateCache, ResCache, ResStage};
pub use checkpoint::{load_checkpoint, read_checkpoint_from, save_checkpoint, write_checkpoint_to, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decoder::{Decoder, DecoderCache, UpBlock};
pub use discriminator::{DiscCache, Discriminator};
pub use gradients::{gradient_suite, tiny_config};
pub use encoder::{Encoder, EncoderCache, LatentStats, LOGVAR_CLAMP};

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{ConvGeom, Init, ParamSet, MAX_TIME_FACTOR, MIN_TIME_FACTOR};
use crate::dataset::ConditionVector;
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

/// Architecture description. Everything here feeds the checkpoint hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub latent: usize,
    /// Width of the learned condition projection.
    pub cond_proj: usize,
    pub enc_channels: Vec<usize>,
    /// `(time, rows, cols)` strides shared by encoder and discriminator.
    pub strides: Vec<[usize; 3]>,
    pub dec_channels: Vec<usize>,
    pub up_channels: usize,
    pub experts: usize,
    pub min_factor: f64,
    pub max_factor: f64,
    pub gate_hidden: usize,
    pub disc_channels: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            rows: 10,
            cols: 32,
            samples: 96,
            latent: 16,
            cond_proj: 64,
            enc_channels: vec![16, 32, 64, 128, 256],
            strides: vec![[2, 2, 2], [2, 2, 2], [2, 2, 2], [2, 1, 1], [1, 1, 1]],
            dec_channels: vec![128, 64, 32, 16],
            up_channels: 16,
            experts: 8,
            min_factor: 0.25,
            max_factor: 2.0,
            gate_hidden: 64,
            disc_channels: vec![16, 32, 64, 128, 256],
        }
    }
}

impl ModelConfig {
    pub const COND_DIM: usize = 6;
    pub const UP_BLOCKS: usize = 2;

    pub fn sample_shape(&self) -> [usize; 4] {
        [1, self.samples, self.rows, self.cols]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rows == 0 || self.cols == 0 || self.samples == 0 || self.latent == 0 {
            return bad("model grid dimensions and latent size must be positive".into());
        }
        if self.enc_channels.is_empty() || self.dec_channels.is_empty() {
            return bad("encoder and decoder need at least one stage".into());
        }
        if self.strides.len() != self.enc_channels.len() || self.disc_channels.len() != self.enc_channels.len() {
            return bad(format!(
                "{} strides for {} encoder and {} discriminator stages",
                self.strides.len(),
                self.enc_channels.len(),
                self.disc_channels.len()
            ));
        }
        let widths = self.enc_channels.iter().chain(&self.dec_channels).chain(&self.disc_channels);
        if widths.chain([&self.up_channels, &self.cond_proj, &self.gate_hidden]).any(|&c| c == 0) {
            return bad("channel and hidden widths must be positive".into());
        }
        if self.strides.iter().flatten().any(|&s| s == 0) {
            return bad("strides must be positive".into());
        }
        if self.experts == 0 {
            return bad("at least one expert is required".into());
        }
        let range = MIN_TIME_FACTOR..=MAX_TIME_FACTOR;
        if !(range.contains(&self.min_factor) && range.contains(&self.max_factor) && self.min_factor <= self.max_factor) {
            return bad(format!(
                "expert factors [{}, {}] must lie within [{MIN_TIME_FACTOR}, {MAX_TIME_FACTOR}]",
                self.min_factor, self.max_factor
            ));
        }
        self.encoder_shapes().map(|_| ())
    }

    /// Output shape of every encoder stage.
    pub fn encoder_shapes(&self) -> Result<Vec<[usize; 4]>> {
        self.stack_shapes(&self.enc_channels, 0)
    }

    /// Output shape of every discriminator conv, before the condition maps
    /// are appended.
    pub fn discriminator_shapes(&self) -> Result<Vec<[usize; 4]>> {
        self.stack_shapes(&self.disc_channels, Self::COND_DIM)
    }

    fn stack_shapes(&self, channels: &[usize], extra_after_first: usize) -> Result<Vec<[usize; 4]>> {
        let mut shape = self.sample_shape();
        let mut out = Vec::with_capacity(channels.len());
        for (i, (&c, &s)) in channels.iter().zip(&self.strides).enumerate() {
            let next = ConvGeom::new(shape[0], c, 3, s, 1)?.out_shape(shape)?;
            out.push(next);
            shape = next;
            if i == 0 {
                shape[0] += extra_after_first;
            }
        }
        Ok(out)
    }

    pub fn flat_len(&self) -> Result<usize> {
        Ok(self.encoder_shapes()?.last().map(|s| s.iter().product()).unwrap_or(0))
    }

    /// `(time, rows, cols)` each decoder stage resizes to: the encoder's
    /// intermediate extents in reverse, starting two stages before the last,
    /// repeating the first stage's extent once exhausted.
    pub fn decoder_targets(&self) -> Result<Vec<[usize; 3]>> {
        let enc = self.encoder_shapes()?;
        Ok((0..self.dec_channels.len())
            .map(|j| {
                let s = enc[enc.len().saturating_sub(3 + j)];
                [s[1], s[2], s[3]]
            })
            .collect())
    }

    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}

/// Generator (encoder, decoder, gates) and discriminator with their weights.
#[derive(Debug)]
pub struct Model<F> {
    pub config: ModelConfig,
    pub gen: ParamSet<F>,
    pub disc: ParamSet<F>,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub discriminator: Discriminator,
    encodes: AtomicUsize,
}

impl<F: Float> Clone for Model<F> {
    fn clone(&self) -> Self {
        Model {
            config: self.config.clone(),
            gen: self.gen.clone(),
            disc: self.disc.clone(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            discriminator: self.discriminator.clone(),
            encodes: AtomicUsize::new(self.encode_count()),
        }
    }
}

pub fn cond_array<F: Float>(c: &ConditionVector) -> [F; 6] {
    c.0.map(F::from_f64)
}

impl<F: Float> Model<F> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut gen = ParamSet::new();
        let mut init = Init::new(seed);
        let encoder = Encoder::new(&mut gen, &mut init, &config)?;
        let decoder = Decoder::new(&mut gen, &mut init, &config)?;
        let mut disc = ParamSet::new();
        let mut dinit = Init::new(seed ^ 0x9e37_79b9_7f4a_7c15);
        let discriminator = Discriminator::new(&mut disc, &mut dinit, &config)?;
        Ok(Model { config, gen, disc, encoder, decoder, discriminator, encodes: AtomicUsize::new(0) })
    }

    pub fn encode(&self, x: &Tensor4<F>) -> Result<LatentStats<F>> {
        self.encodes.fetch_add(1, Ordering::Relaxed);
        Ok(self.encoder.forward(&self.gen, x)?.0)
    }

    /// Number of [`Model::encode`] calls so far.
    pub fn encode_count(&self) -> usize {
        self.encodes.load(Ordering::Relaxed)
    }

    pub fn decode(&self, z: &[F], cond: &[F]) -> Result<Tensor4<F>> {
        Ok(self.decoder.forward(&self.gen, z, cond)?.0)
    }

    pub fn discriminate(&self, x: &Tensor4<F>, cond: &[F]) -> Result<F> {
        Ok(self.discriminator.forward(&self.disc, x, cond)?.0)
    }

    /// Gate weights of up-sampling block `block`.
    pub fn gate(&self, block: usize, cond: &[F]) -> Result<Vec<F>> {
        let u = self
            .decoder
            .ups
            .get(block)
            .ok_or_else(|| Error::Config(format!("no up-sampling block {block}")))?;
        Ok(u.bank.gate_forward(&self.gen, cond)?.pi)
    }

    pub fn project_conditions(&self, cond: &[F]) -> Result<Vec<F>> {
        self.decoder.proj.forward(&self.gen, cond)
    }

    /// Same architecture and weights at another precision.
    pub fn cast<G: Float>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            gen: self.gen.cast(),
            disc: self.disc.cast(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            discriminator: self.discriminator.clone(),
            encodes: AtomicUsize::new(0),
        }
    }
}
