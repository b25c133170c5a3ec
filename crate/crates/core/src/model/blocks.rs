//! Building blocks shared by the encoder and decoder.

use crate::autodiff::{
    fit_time, fit_time_backward, softmax, softmax_backward, temporal_resample, temporal_resample_backward, Conv3d,
    ConvGeom, Grads, Init, Linear, ParamSet, PRelu,
};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

/// `k3` convolution, pointwise convolution with a skip connection, PReLU:
/// `y = prelu(h + pw(h))`, `h = conv(x)`.
#[derive(Clone, Debug)]
pub struct ResStage {
    pub conv: Conv3d,
    pub pw: Conv3d,
    pub act: PRelu,
}

#[derive(Clone, Debug)]
pub struct ResCache<F> {
    x: Tensor4<F>,
    h: Tensor4<F>,
    u: Tensor4<F>,
}

impl<F: Float> ResCache<F> {
    /// Side of the PReLU kink each pre-activation sits on.
    pub fn activation_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.u.data().iter().map(|v| *v >= F::zero())
    }
}

impl ResStage {
    pub fn new<F: Float>(
        ps: &mut ParamSet<F>,
        init: &mut Init,
        name: &str,
        cin: usize,
        cout: usize,
        stride: [usize; 3],
    ) -> Result<Self> {
        Ok(ResStage {
            conv: Conv3d::new(ps, init, &format!("{name}.conv"), ConvGeom::new(cin, cout, 3, stride, 1)?)?,
            pw: Conv3d::new(ps, init, &format!("{name}.pw"), ConvGeom::pointwise(cout, cout)?)?,
            act: PRelu::new(ps, &format!("{name}.act"))?,
        })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: Tensor4<F>) -> Result<(Tensor4<F>, ResCache<F>)> {
        let h = self.conv.forward(ps, &x)?;
        let mut u = self.pw.forward(ps, &h)?;
        u.add_assign(&h);
        let y = self.act.forward(ps, &u);
        Ok((y, ResCache { x, h, u }))
    }

    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        c: &ResCache<F>,
        dy: &Tensor4<F>,
        mut grads: Option<&mut Grads<F>>,
        need_dx: bool,
    ) -> Option<Tensor4<F>> {
        let du = self.act.backward(ps, &c.u, dy, grads.as_deref_mut());
        let mut dh = self.pw.backward(ps, &c.h, &du, grads.as_deref_mut(), true).expect("dx requested");
        dh.add_assign(&du);
        self.conv.backward(ps, &c.x, &dh, grads, need_dx)
    }
}

/// Scaling factors linearly spaced over `[lo, hi]`.
pub fn expert_factors(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Time-scaling experts mixed by a condition-driven softmax gate:
/// `y = sum_k pi_k(c) fit(resample(x, f_k), T)`.
#[derive(Clone, Debug)]
pub struct ExpertBank {
    pub factors: Vec<f64>,
    pub gate: [Linear; 3],
}

/// Gate inputs are clamped here so overflow cannot break the softmax.
pub const GATE_INPUT_LIMIT: f64 = 1e6;

#[derive(Clone, Debug)]
pub struct GateCache<F> {
    cond: Vec<F>,
    a1: Vec<F>,
    a2: Vec<F>,
    pub pi: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct ExpertCache<F> {
    t_in: usize,
    experts: Vec<Tensor4<F>>,
    gate: GateCache<F>,
}

impl ExpertBank {
    pub fn new<F: Float>(
        ps: &mut ParamSet<F>,
        init: &mut Init,
        name: &str,
        factors: Vec<f64>,
        cond_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Config("an expert bank needs at least one expert".into()));
        }
        let k = factors.len();
        Ok(ExpertBank {
            gate: [
                Linear::new(ps, init, &format!("{name}.gate0"), cond_dim, hidden)?,
                Linear::new(ps, init, &format!("{name}.gate1"), hidden, hidden)?,
                Linear::new(ps, init, &format!("{name}.gate2"), hidden, k)?,
            ],
            factors,
        })
    }

    /// Gate weights for one condition vector.
    pub fn gate_forward<F: Float>(&self, ps: &ParamSet<F>, cond: &[F]) -> Result<GateCache<F>> {
        let lim = F::from_f64(GATE_INPUT_LIMIT);
        let cond: Vec<F> = cond.iter().map(|&v| v.max(-lim).min(lim)).collect();
        let a1: Vec<F> = self.gate[0].forward(ps, &cond)?.into_iter().map(|v| v.tanh()).collect();
        let a2: Vec<F> = self.gate[1].forward(ps, &a1)?.into_iter().map(|v| v.tanh()).collect();
        let logits = self.gate[2].forward(ps, &a2)?;
        Ok(GateCache { cond, pi: softmax(&logits), a1, a2 })
    }

    fn gate_backward<F: Float>(&self, ps: &ParamSet<F>, c: &GateCache<F>, dpi: &[F], grads: &mut Grads<F>) {
        let dlogits = softmax_backward(&c.pi, dpi);
        let da2 = self.gate[2].backward(ps, &c.a2, &dlogits, Some(grads), true).expect("dx requested");
        let dh2: Vec<F> = da2.iter().zip(&c.a2).map(|(&d, &a)| d * (F::one() - a * a)).collect();
        let da1 = self.gate[1].backward(ps, &c.a1, &dh2, Some(grads), true).expect("dx requested");
        let dh1: Vec<F> = da1.iter().zip(&c.a1).map(|(&d, &a)| d * (F::one() - a * a)).collect();
        self.gate[0].backward(ps, &c.cond, &dh1, Some(grads), false);
    }

    pub fn forward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &Tensor4<F>,
        cond: &[F],
        target_t: usize,
    ) -> Result<(Tensor4<F>, ExpertCache<F>)> {
        let gate = self.gate_forward(ps, cond)?;
        let [c, _, r, w] = x.shape();
        let mut y = Tensor4::zeros([c, target_t, r, w]);
        let mut experts = Vec::with_capacity(self.factors.len());
        for (&f, &p) in self.factors.iter().zip(&gate.pi) {
            let e = fit_time(&temporal_resample(x, f)?, target_t);
            for (o, &v) in y.data_mut().iter_mut().zip(e.data()) {
                *o += p * v;
            }
            experts.push(e);
        }
        Ok((y, ExpertCache { t_in: x.shape()[1], experts, gate }))
    }

    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        c: &ExpertCache<F>,
        dy: &Tensor4<F>,
        grads: Option<&mut Grads<F>>,
    ) -> Tensor4<F> {
        let [ch, _, r, w] = dy.shape();
        let mut dx = Tensor4::zeros([ch, c.t_in, r, w]);
        let mut dpi = Vec::with_capacity(self.factors.len());
        for (k, (&f, e)) in self.factors.iter().zip(&c.experts).enumerate() {
            let mut dot = F::zero();
            for (&a, &b) in dy.data().iter().zip(e.data()) {
                dot += a * b;
            }
            dpi.push(dot);
            let mut de = dy.clone();
            de.scale(c.gate.pi[k]);
            let resampled_len = crate::autodiff::scaled_len(c.t_in, f);
            let dr = fit_time_backward(&de, resampled_len);
            dx.add_assign(&temporal_resample_backward(&dr, c.t_in));
        }
        if let Some(g) = grads {
            self.gate_backward(ps, &c.gate, &dpi, g);
        }
        dx
    }
}
