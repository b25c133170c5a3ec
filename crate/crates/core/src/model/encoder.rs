use serde::{Deserialize, Serialize};

use super::blocks::{ResCache, ResStage};
use super::ModelConfig;
use crate::autodiff::{Grads, Init, Linear, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

/// Bound applied to the predicted log-variance before any `exp`.
pub const LOGVAR_CLAMP: f64 = 30.0;

/// Posterior mean and log-variance of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentStats<F> {
    pub mu: Vec<F>,
    pub logvar: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub stages: Vec<ResStage>,
    pub mu: Linear,
    pub logvar: Linear,
    input: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct EncoderCache<F> {
    stages: Vec<ResCache<F>>,
    flat: Vec<F>,
    raw_logvar: Vec<F>,
    out_shape: [usize; 4],
}

impl Encoder {
    pub fn new<F: Float>(ps: &mut ParamSet<F>, init: &mut Init, cfg: &ModelConfig) -> Result<Self> {
        let shapes = cfg.encoder_shapes()?;
        let mut stages = Vec::with_capacity(shapes.len());
        let mut cin = 1;
        for (i, (&cout, &stride)) in cfg.enc_channels.iter().zip(&cfg.strides).enumerate() {
            stages.push(ResStage::new(ps, init, &format!("enc.s{i}"), cin, cout, stride)?);
            cin = cout;
        }
        let flat = cfg.flat_len()?;
        Ok(Encoder {
            stages,
            mu: Linear::new(ps, init, "enc.mu", flat, cfg.latent)?,
            logvar: Linear::new(ps, init, "enc.logvar", flat, cfg.latent)?,
            input: cfg.sample_shape(),
        })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: &Tensor4<F>) -> Result<(LatentStats<F>, EncoderCache<F>)> {
        if x.shape() != self.input {
            return Err(Error::Shape(format!("encoder expects {:?}, got {:?}", self.input, x.shape())));
        }
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.stages.len());
        for s in &self.stages {
            let (y, c) = s.forward(ps, h)?;
            caches.push(c);
            h = y;
        }
        let out_shape = h.shape();
        let flat = h.into_vec();
        let mu = self.mu.forward(ps, &flat)?;
        let raw_logvar = self.logvar.forward(ps, &flat)?;
        let lim = F::from_f64(LOGVAR_CLAMP);
        let logvar = raw_logvar.iter().map(|&v| v.max(-lim).min(lim)).collect();
        Ok((LatentStats { mu, logvar }, EncoderCache { stages: caches, flat, raw_logvar, out_shape }))
    }

    /// Returns the input gradient when `need_dx`.
    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        c: &EncoderCache<F>,
        dmu: &[F],
        dlogvar: &[F],
        mut grads: Option<&mut Grads<F>>,
        need_dx: bool,
    ) -> Option<Tensor4<F>> {
        let lim = F::from_f64(LOGVAR_CLAMP);
        let dlv: Vec<F> =
            dlogvar.iter().zip(&c.raw_logvar).map(|(&d, &r)| if r.abs() > lim { F::zero() } else { d }).collect();
        let mut dflat = self.mu.backward(ps, &c.flat, dmu, grads.as_deref_mut(), true).expect("dx requested");
        let d2 = self.logvar.backward(ps, &c.flat, &dlv, grads.as_deref_mut(), true).expect("dx requested");
        for (a, b) in dflat.iter_mut().zip(d2) {
            *a += b;
        }
        let mut dy = Tensor4::from_vec(c.out_shape, dflat).expect("flatten shape");
        for (i, (s, sc)) in self.stages.iter().zip(&c.stages).enumerate().rev() {
            let want = i > 0 || need_dx;
            {
                let d = s.backward(ps, sc, &dy, grads.as_deref_mut(), want)?;
                dy = d
            }
        }
        Some(dy)
    }
}
