use crate::autodiff::{Grads, ParamSet};
use crate::tensor::Float;

/// RMSprop: `v = decay * v + (1 - decay) * g^2; p -= lr * g / (sqrt(v) + eps)`.
#[derive(Clone, Debug)]
pub struct RmsProp<F> {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    square_avg: Vec<Vec<F>>,
}

impl<F: Float> RmsProp<F> {
    pub fn new(params: &ParamSet<F>, lr: f64, decay: f64, eps: f64) -> Self {
        RmsProp { lr, decay, eps, square_avg: params.iter().map(|p| vec![F::zero(); p.value.len()]).collect() }
    }

    pub fn step(&mut self, params: &mut ParamSet<F>, grads: &Grads<F>) {
        let (lr, decay, eps) = (F::from_f64(self.lr), F::from_f64(self.decay), F::from_f64(self.eps));
        let keep = F::one() - decay;
        let ids: Vec<_> = params.ids().collect();
        for (id, v) in ids.into_iter().zip(&mut self.square_avg) {
            let g = grads.get(id);
            for ((p, s), &gi) in params.get_mut(id).iter_mut().zip(v.iter_mut()).zip(g) {
                *s = decay * *s + keep * gi * gi;
                *p -= lr * gi / (s.sqrt() + eps);
            }
        }
    }
}
