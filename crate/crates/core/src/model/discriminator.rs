use super::ModelConfig;
use crate::autodiff::{leaky_relu, leaky_relu_backward, sigmoid, Conv3d, ConvGeom, Grads, Init, ParamSet, DISC_LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

/// Strided conv stack with LeakyReLU, the conditions appended as constant
/// feature maps after the first stage, global average pool, pointwise head and
/// sigmoid.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub convs: Vec<Conv3d>,
    pub head: Conv3d,
    input: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct DiscCache<F> {
    inputs: Vec<Tensor4<F>>,
    pre: Vec<Tensor4<F>>,
    pooled: Tensor4<F>,
    score: F,
}

impl<F: Float> DiscCache<F> {
    pub fn score(&self) -> F {
        self.score
    }
}

impl Discriminator {
    pub fn new<F: Float>(ps: &mut ParamSet<F>, init: &mut Init, cfg: &ModelConfig) -> Result<Self> {
        let mut convs = Vec::with_capacity(cfg.disc_channels.len());
        let mut cin = 1;
        for (i, (&cout, &stride)) in cfg.disc_channels.iter().zip(&cfg.strides).enumerate() {
            convs.push(Conv3d::new(ps, init, &format!("disc.s{i}"), ConvGeom::new(cin, cout, 3, stride, 1)?)?);
            cin = if i == 0 { cout + ModelConfig::COND_DIM } else { cout };
        }
        let head = Conv3d::new(ps, init, "disc.head", ConvGeom::pointwise(cin, 1)?)?;
        Ok(Discriminator { convs, head, input: cfg.sample_shape() })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: &Tensor4<F>, cond: &[F]) -> Result<(F, DiscCache<F>)> {
        if x.shape() != self.input || cond.len() != ModelConfig::COND_DIM {
            return Err(Error::Shape(format!(
                "discriminator expects {:?} and {} conditions, got {:?} and {}",
                self.input,
                ModelConfig::COND_DIM,
                x.shape(),
                cond.len()
            )));
        }
        let slope = F::from_f64(DISC_LEAKY_SLOPE);
        let mut a = x.clone();
        let mut inputs = Vec::with_capacity(self.convs.len());
        let mut pre = Vec::with_capacity(self.convs.len());
        for (i, conv) in self.convs.iter().enumerate() {
            let h = conv.forward(ps, &a)?;
            let act = Tensor4::from_vec(h.shape(), leaky_relu(h.data(), slope))?;
            inputs.push(a);
            pre.push(h);
            a = if i == 0 {
                let [_, t, r, c] = act.shape();
                let maps = Tensor4::from_vec(
                    [cond.len(), t, r, c],
                    cond.iter().flat_map(|&v| std::iter::repeat_n(v, t * r * c)).collect(),
                )?;
                Tensor4::concat_channels(&[&act, &maps])?
            } else {
                act
            };
        }
        let [ch, ..] = a.shape();
        let plane = F::from_f64(a.plane() as f64);
        let pooled_data: Vec<F> =
            a.data().chunks_exact(a.plane()).map(|p| p.iter().fold(F::zero(), |s, &v| s + v) / plane).collect();
        let pooled = Tensor4::from_vec([ch, 1, 1, 1], pooled_data)?;
        inputs.push(a);
        let logit = self.head.forward(ps, &pooled)?.data()[0];
        let score = sigmoid(logit);
        if !score.is_finite() {
            return Err(Error::NonFinite("discriminator score".into()));
        }
        Ok((score, DiscCache { inputs, pre, pooled, score }))
    }

    /// Input gradient when `need_dx`.
    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        c: &DiscCache<F>,
        dscore: F,
        mut grads: Option<&mut Grads<F>>,
        need_dx: bool,
    ) -> Option<Tensor4<F>> {
        let s = c.score;
        let dlogit = Tensor4::full([1, 1, 1, 1], dscore * s * (F::one() - s));
        let dpooled = self.head.backward(ps, &c.pooled, &dlogit, grads.as_deref_mut(), true).expect("dx requested");
        let last = c.inputs.last().expect("pooled input cached");
        let plane = last.plane();
        let inv = F::one() / F::from_f64(plane as f64);
        let mut da = Tensor4::from_vec(
            last.shape(),
            dpooled.data().iter().flat_map(|&g| std::iter::repeat_n(g * inv, plane)).collect(),
        )
        .expect("pool shape");
        let slope = F::from_f64(DISC_LEAKY_SLOPE);
        for (i, conv) in self.convs.iter().enumerate().rev() {
            if i == 0 {
                da = da.split_channels(c.pre[0].channels()).0;
            }
            let dh = Tensor4::from_vec(da.shape(), leaky_relu_backward(c.pre[i].data(), da.data(), slope))
                .expect("activation keeps shape");
            {
                let d = conv.backward(ps, &c.inputs[i], &dh, grads.as_deref_mut(), i > 0 || need_dx)?;
                da = d
            }
        }
        Some(da)
    }
}
