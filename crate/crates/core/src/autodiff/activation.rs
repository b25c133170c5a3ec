use crate::autodiff::params::{Grads, ParamId, ParamSet};
use crate::error::Result;
use crate::tensor::{Float, Tensor4};

pub const DISC_LEAKY_SLOPE: f64 = 0.03;

pub fn leaky_relu<F: Float>(x: &[F], slope: F) -> Vec<F> {
    x.iter().map(|&v| if v >= F::zero() { v } else { v * slope }).collect()
}

pub fn leaky_relu_backward<F: Float>(x: &[F], dy: &[F], slope: F) -> Vec<F> {
    x.iter().zip(dy).map(|(&v, &g)| if v >= F::zero() { g } else { g * slope }).collect()
}

pub fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Numerically stable softmax; entries lie in `[0, 1]` and sum to one.
pub fn softmax<F: Float>(v: &[F]) -> Vec<F> {
    let m = v.iter().fold(F::neg_infinity(), |a, &b| a.max(b));
    let e: Vec<F> = v.iter().map(|&x| (x - m).exp()).collect();
    let mut s = F::zero();
    for &x in &e {
        s += x;
    }
    e.into_iter().map(|x| x / s).collect()
}

/// Given `y = softmax(x)`, maps `dy` to `dx = y * (dy - <dy, y>)`.
pub fn softmax_backward<F: Float>(y: &[F], dy: &[F]) -> Vec<F> {
    let mut dot = F::zero();
    for (&a, &b) in y.iter().zip(dy) {
        dot += a * b;
    }
    y.iter().zip(dy).map(|(&a, &g)| a * (g - dot)).collect()
}

/// Parametric ReLU with one learned negative slope shared by all channels.
#[derive(Clone, Debug)]
pub struct PRelu {
    pub slope: ParamId,
}

impl PRelu {
    pub const INIT_SLOPE: f64 = 0.25;

    pub fn new<F: Float>(ps: &mut ParamSet<F>, name: &str) -> Result<Self> {
        let slope = ps.add(format!("{name}.slope"), &[1], vec![F::from_f64(Self::INIT_SLOPE)])?;
        Ok(PRelu { slope })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: &Tensor4<F>) -> Tensor4<F> {
        let a = ps.get(self.slope)[0];
        x.map(|v| if v >= F::zero() { v } else { v * a })
    }

    pub fn forward_slice<F: Float>(&self, ps: &ParamSet<F>, x: &[F]) -> Vec<F> {
        leaky_relu(x, ps.get(self.slope)[0])
    }

    pub fn backward_slice<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        dy: &[F],
        grads: Option<&mut Grads<F>>,
    ) -> Vec<F> {
        let a = ps.get(self.slope)[0];
        if let Some(g) = grads {
            let mut s = F::zero();
            for (&v, &d) in x.iter().zip(dy) {
                if v < F::zero() {
                    s += v * d;
                }
            }
            g.get_mut(self.slope)[0] += s;
        }
        leaky_relu_backward(x, dy, a)
    }

    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &Tensor4<F>,
        dy: &Tensor4<F>,
        grads: Option<&mut Grads<F>>,
    ) -> Tensor4<F> {
        let dx = self.backward_slice(ps, x.data(), dy.data(), grads);
        Tensor4::from_vec(x.shape(), dx).expect("prelu keeps shape")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_negative_slope() {
        let y = leaky_relu(&[-1.0f64, 2.0], DISC_LEAKY_SLOPE);
        assert!((y[0] + 0.03).abs() < 1e-15);
        assert_eq!(y[1], 2.0);
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let p = softmax(&[3.3f64; 8]);
        for v in p {
            assert!((v - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn prelu_is_identity_on_non_negative_inputs() {
        let mut ps = ParamSet::<f64>::new();
        let act = PRelu::new(&mut ps, "a").unwrap();
        for slope in [0.0, 0.25, -3.0, 7.0] {
            ps.get_mut(act.slope)[0] = slope;
            let x = [0.0, 0.5, 12.0];
            assert_eq!(act.forward_slice(&ps, &x), x.to_vec());
        }
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert!(sigmoid(-800.0f64) >= 0.0);
        assert!(sigmoid(800.0f64) <= 1.0);
        assert!((sigmoid(0.0f64) - 0.5).abs() < 1e-15);
    }
}
