use super::blocks::{expert_factors, ExpertBank, ExpertCache, ResCache, ResStage};
use super::ModelConfig;
use crate::autodiff::{resize3, resize3_backward, Conv3d, ConvGeom, Grads, Init, Linear, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

/// Time-scaling experts, optional spatial resize, residual stage.
#[derive(Clone, Debug)]
pub struct UpBlock {
    pub bank: ExpertBank,
    pub stage: ResStage,
    /// `(time, rows, cols)` after the block.
    pub target: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct Decoder {
    pub proj: Linear,
    pub fc: Linear,
    pub stages: Vec<(ResStage, [usize; 3])>,
    pub ups: Vec<UpBlock>,
    pub out: Conv3d,
    base: [usize; 4],
    latent: usize,
    cond_dim: usize,
}

#[derive(Clone, Debug)]
struct UpCache<F> {
    experts: ExpertCache<F>,
    scaled_shape: [usize; 4],
    stage: ResCache<F>,
}

#[derive(Clone, Debug)]
pub struct DecoderCache<F> {
    cond: Vec<F>,
    h0: Vec<F>,
    stage_in: Vec<[usize; 4]>,
    stages: Vec<ResCache<F>>,
    ups: Vec<UpCache<F>>,
    last: Tensor4<F>,
}

impl<F: Float> DecoderCache<F> {
    /// Side of every PReLU kink in the pass, stage by stage.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let stages = self.stages.iter().chain(self.ups.iter().map(|u| &u.stage));
        stages.flat_map(|s| s.activation_pattern()).collect()
    }
}

impl Decoder {
    pub fn new<F: Float>(ps: &mut ParamSet<F>, init: &mut Init, cfg: &ModelConfig) -> Result<Self> {
        let enc = cfg.encoder_shapes()?;
        let base = *enc.last().expect("validated non-empty");
        let proj = Linear::new(ps, init, "dec.proj", ModelConfig::COND_DIM, cfg.cond_proj)?;
        let fc = Linear::new(ps, init, "dec.fc", cfg.latent + cfg.cond_proj, cfg.flat_len()?)?;
        let mut stages = Vec::new();
        let mut cin = base[0];
        for (i, (&cout, target)) in cfg.dec_channels.iter().zip(cfg.decoder_targets()?).enumerate() {
            stages.push((ResStage::new(ps, init, &format!("dec.s{i}"), cin, cout, [1, 1, 1])?, target));
            cin = cout;
        }
        let factors = expert_factors(cfg.experts, cfg.min_factor, cfg.max_factor);
        let mut ups = Vec::new();
        for i in 0..ModelConfig::UP_BLOCKS {
            ups.push(UpBlock {
                bank: ExpertBank::new(
                    ps,
                    init,
                    &format!("dec.up{i}.experts"),
                    factors.clone(),
                    ModelConfig::COND_DIM,
                    cfg.gate_hidden,
                )?,
                stage: ResStage::new(ps, init, &format!("dec.up{i}"), cin, cfg.up_channels, [1, 1, 1])?,
                target: [cfg.samples, cfg.rows, cfg.cols],
            });
            cin = cfg.up_channels;
        }
        let out = Conv3d::new(ps, init, "dec.out", ConvGeom::pointwise(cin, 1)?)?;
        Ok(Decoder { proj, fc, stages, ups, out, base, latent: cfg.latent, cond_dim: ModelConfig::COND_DIM })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, z: &[F], cond: &[F]) -> Result<(Tensor4<F>, DecoderCache<F>)> {
        if z.len() != self.latent || cond.len() != self.cond_dim {
            return Err(Error::Shape(format!(
                "decoder expects latent {} and {} conditions, got {} and {}",
                self.latent,
                self.cond_dim,
                z.len(),
                cond.len()
            )));
        }
        let mut h0 = z.to_vec();
        h0.extend(self.proj.forward(ps, cond)?);
        let mut x = Tensor4::from_vec(self.base, self.fc.forward(ps, &h0)?)?;
        let mut stage_in = Vec::with_capacity(self.stages.len());
        let mut stages = Vec::with_capacity(self.stages.len());
        for (s, target) in &self.stages {
            stage_in.push(x.shape());
            let (y, c) = s.forward(ps, resize3(&x, *target)?)?;
            stages.push(c);
            x = y;
        }
        let mut ups = Vec::with_capacity(self.ups.len());
        for u in &self.ups {
            let (scaled, experts) = u.bank.forward(ps, &x, cond, u.target[0])?;
            let scaled_shape = scaled.shape();
            let (y, stage) = u.stage.forward(ps, resize3(&scaled, u.target)?)?;
            ups.push(UpCache { experts, scaled_shape, stage });
            x = y;
        }
        let out = self.out.forward(ps, &x)?;
        out.check_finite("decoder output")?;
        Ok((out, DecoderCache { cond: cond.to_vec(), h0, stage_in, stages, ups, last: x }))
    }

    /// Gradient with respect to the latent.
    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        c: &DecoderCache<F>,
        dy: &Tensor4<F>,
        mut grads: Option<&mut Grads<F>>,
    ) -> Vec<F> {
        let mut d = self.out.backward(ps, &c.last, dy, grads.as_deref_mut(), true).expect("dx requested");
        for (u, uc) in self.ups.iter().zip(&c.ups).rev() {
            let ds = u.stage.backward(ps, &uc.stage, &d, grads.as_deref_mut(), true).expect("dx requested");
            let dscaled = resize3_backward(&ds, uc.scaled_shape);
            d = u.bank.backward(ps, &uc.experts, &dscaled, grads.as_deref_mut());
        }
        for ((s, _), (sc, &shape)) in self.stages.iter().zip(c.stages.iter().zip(&c.stage_in)).rev() {
            let dr = s.backward(ps, sc, &d, grads.as_deref_mut(), true).expect("dx requested");
            d = resize3_backward(&dr, shape);
        }
        let dh0 = self.fc.backward(ps, &c.h0, d.data(), grads.as_deref_mut(), true).expect("dx requested");
        let (dz, dp) = dh0.split_at(self.latent);
        if grads.is_some() {
            self.proj.backward(ps, &c.cond, dp, grads, false);
        }
        dz.to_vec()
    }
}
