use crate::autodiff::params::{Grads, Init, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{check_finite_slice, Float};

/// `y = W x + b` with `W` stored `(out, in)`.
pub fn linear<F: Float>(x: &[F], weight: &[F], bias: &[F]) -> Result<Vec<F>> {
    let out = bias.len();
    if out == 0 || !weight.len().is_multiple_of(out) || weight.len() / out != x.len() {
        return Err(Error::Config(format!(
            "linear: input of length {} does not match a {}x{} weight",
            x.len(),
            out,
            weight.len().checked_div(out).unwrap_or(0)
        )));
    }
    let mut y = bias.to_vec();
    F::gemm(false, false, out, x.len(), 1, F::one(), weight, x, F::one(), &mut y);
    check_finite_slice(&y, "linear")?;
    Ok(y)
}

/// Gradients of [`linear`]; returns `dx` when requested.
pub fn linear_backward<F: Float>(
    x: &[F],
    weight: &[F],
    dy: &[F],
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
    need_dx: bool,
) -> Option<Vec<F>> {
    let (out, inp) = (dy.len(), x.len());
    if let Some(dw) = dw {
        F::gemm(false, false, out, 1, inp, F::one(), dy, x, F::one(), dw);
    }
    if let Some(db) = db {
        for (b, &g) in db.iter_mut().zip(dy) {
            *b += g;
        }
    }
    need_dx.then(|| {
        let mut dx = vec![F::zero(); inp];
        F::gemm(true, false, inp, out, 1, F::one(), weight, dy, F::zero(), &mut dx);
        dx
    })
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<F: Float>(
        ps: &mut ParamSet<F>,
        init: &mut Init,
        name: &str,
        inputs: usize,
        outputs: usize,
    ) -> Result<Self> {
        let weight = ps.add(format!("{name}.weight"), &[outputs, inputs], init.fan_in(inputs * outputs, inputs))?;
        let bias = ps.add(format!("{name}.bias"), &[outputs], init.fan_in(outputs, inputs))?;
        Ok(Linear { inputs, outputs, weight, bias })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: &[F]) -> Result<Vec<F>> {
        linear(x, ps.get(self.weight), ps.get(self.bias))
    }

    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        dy: &[F],
        grads: Option<&mut Grads<F>>,
        need_dx: bool,
    ) -> Option<Vec<F>> {
        let w = ps.get(self.weight);
        match grads {
            Some(g) => {
                let (dw, db) = g.pair_mut(self.weight, self.bias);
                linear_backward(x, w, dy, Some(dw), Some(db), need_dx)
            }
            None => linear_backward(x, w, dy, None, None, need_dx),
        }
    }

    /// Row-batched forward: `x` is `(rows, inputs)`, result `(rows, outputs)`.
    pub fn forward_batch<F: Float>(&self, ps: &ParamSet<F>, x: &[F], rows: usize) -> Result<Vec<F>> {
        if x.len() != rows * self.inputs {
            return Err(Error::Config(format!(
                "linear batch: {} values is not {rows} rows of {}",
                x.len(),
                self.inputs
            )));
        }
        let b = ps.get(self.bias);
        let mut y = Vec::with_capacity(rows * self.outputs);
        for _ in 0..rows {
            y.extend_from_slice(b);
        }
        F::gemm(false, true, rows, self.inputs, self.outputs, F::one(), x, ps.get(self.weight), F::one(), &mut y);
        check_finite_slice(&y, "linear")?;
        Ok(y)
    }

    pub fn backward_batch<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        dy: &[F],
        rows: usize,
        grads: &mut Grads<F>,
        need_dx: bool,
    ) -> Option<Vec<F>> {
        let (dw, db) = grads.pair_mut(self.weight, self.bias);
        F::gemm(true, false, self.outputs, rows, self.inputs, F::one(), dy, x, F::one(), dw);
        for r in 0..rows {
            for (b, &g) in db.iter_mut().zip(&dy[r * self.outputs..(r + 1) * self.outputs]) {
                *b += g;
            }
        }
        need_dx.then(|| {
            let mut dx = vec![F::zero(); rows * self.inputs];
            F::gemm(false, false, rows, self.outputs, self.inputs, F::one(), dy, ps.get(self.weight), F::zero(), &mut dx);
            dx
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_passes_input_through() {
        let w = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let x = [0.3, -1.2, 4.0];
        assert_eq!(linear(&x, &w, &[0.0; 3]).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_input_returns_bias() {
        let w = vec![0.7f64; 2 * 4];
        assert_eq!(linear(&[0.0; 4], &w, &[1.5, -2.0]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn latent_head_dimensions() {
        let mut ps = ParamSet::<f32>::new();
        let head = Linear::new(&mut ps, &mut Init::new(0), "mu", 12288, 16).unwrap();
        let y = head.forward(&ps, &vec![0.01; 12288]).unwrap();
        assert_eq!(y.len(), 16);
    }

    #[test]
    fn length_mismatch_is_config_error() {
        assert!(matches!(linear(&[1.0f64; 3], &[0.0; 8], &[0.0; 2]), Err(Error::Config(_))));
    }

    #[test]
    fn batch_matches_row_by_row() {
        let mut ps = ParamSet::<f64>::new();
        let l = Linear::new(&mut ps, &mut Init::new(5), "l", 3, 2).unwrap();
        let x = [0.1, 0.2, 0.3, -1.0, 0.5, 2.0];
        let yb = l.forward_batch(&ps, &x, 2).unwrap();
        let y0 = l.forward(&ps, &x[..3]).unwrap();
        let y1 = l.forward(&ps, &x[3..]).unwrap();
        for (a, b) in yb.iter().zip(y0.iter().chain(&y1)) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
