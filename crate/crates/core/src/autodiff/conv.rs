//! 3-D convolution over `(channels, time, rows, cols)` tensors, lowered to
//! im2col + GEMM. Pointwise (1x1x1, stride 1) convolutions skip the lowering.

use crate::autodiff::params::{Grads, Init, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

const AXES: [&str; 3] = ["time", "rows", "cols"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: [usize; 3],
    pub pad: usize,
}

impl ConvGeom {
    pub fn new(cin: usize, cout: usize, kernel: usize, stride: [usize; 3], pad: usize) -> Result<Self> {
        if !(kernel == 3 && pad == 1 || kernel == 1 && pad == 0) {
            return Err(Error::Config(format!(
                "conv3d supports kernel 3 / pad 1 or kernel 1 / pad 0, got kernel {kernel} / pad {pad}"
            )));
        }
        if stride.contains(&0) {
            return Err(Error::Config("conv3d stride must be positive".into()));
        }
        if cin == 0 || cout == 0 {
            return Err(Error::Config("conv3d needs at least one input and output channel".into()));
        }
        Ok(ConvGeom { cin, cout, kernel, stride, pad })
    }

    pub fn pointwise(cin: usize, cout: usize) -> Result<Self> {
        ConvGeom::new(cin, cout, 1, [1, 1, 1], 0)
    }

    #[inline]
    fn taps(&self) -> usize {
        self.kernel * self.kernel * self.kernel
    }

    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * self.taps()
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == [1, 1, 1]
    }

    /// `floor((n + 2*pad - k) / stride) + 1` on each spatial axis.
    pub fn out_shape(&self, input: [usize; 4]) -> Result<[usize; 4]> {
        if input[0] != self.cin {
            return Err(Error::Config(format!(
                "conv3d channel axis: expected {} input channels, got {}",
                self.cin, input[0]
            )));
        }
        let mut out = [self.cout, 0, 0, 0];
        for a in 0..3 {
            let n = input[a + 1] + 2 * self.pad;
            if n < self.kernel {
                return Err(Error::Config(format!(
                    "conv3d {} axis: extent {} too small for kernel {}",
                    AXES[a],
                    input[a + 1],
                    self.kernel
                )));
            }
            out[a + 1] = (n - self.kernel) / self.stride[a] + 1;
        }
        Ok(out)
    }
}

/// Lowers `x` into a `(cin * k^3) x (out voxels)` column matrix.
fn im2col<F: Float>(g: &ConvGeom, x: &Tensor4<F>, out: [usize; 4]) -> Vec<F> {
    let [_, ti, ri, ci] = x.shape();
    let [_, to, ro, co] = out;
    let n = to * ro * co;
    let k = g.kernel;
    let p = g.pad as isize;
    let [st, sr, sc] = g.stride;
    let xd = x.data();
    let mut cols = vec![F::zero(); g.cin * g.taps() * n];
    for c in 0..g.cin {
        for kt in 0..k {
            for kr in 0..k {
                for kc in 0..k {
                    let row = ((c * k + kt) * k + kr) * k + kc;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for ot in 0..to {
                        let it = (ot * st + kt) as isize - p;
                        if it < 0 || it >= ti as isize {
                            continue;
                        }
                        for or in 0..ro {
                            let ir = (or * sr + kr) as isize - p;
                            if ir < 0 || ir >= ri as isize {
                                continue;
                            }
                            let src_base = ((c * ti + it as usize) * ri + ir as usize) * ci;
                            let dst_base = (ot * ro + or) * co;
                            for oc in 0..co {
                                let ic = (oc * sc + kc) as isize - p;
                                if ic >= 0 && ic < ci as isize {
                                    dst[dst_base + oc] = xd[src_base + ic as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds columns back onto an input-shaped tensor.
fn col2im<F: Float>(g: &ConvGeom, cols: &[F], input: [usize; 4], out: [usize; 4]) -> Tensor4<F> {
    let [_, ti, ri, ci] = input;
    let [_, to, ro, co] = out;
    let n = to * ro * co;
    let k = g.kernel;
    let p = g.pad as isize;
    let [st, sr, sc] = g.stride;
    let mut dx = Tensor4::zeros(input);
    let xd = dx.data_mut();
    for c in 0..g.cin {
        for kt in 0..k {
            for kr in 0..k {
                for kc in 0..k {
                    let row = ((c * k + kt) * k + kr) * k + kc;
                    let src = &cols[row * n..(row + 1) * n];
                    for ot in 0..to {
                        let it = (ot * st + kt) as isize - p;
                        if it < 0 || it >= ti as isize {
                            continue;
                        }
                        for or in 0..ro {
                            let ir = (or * sr + kr) as isize - p;
                            if ir < 0 || ir >= ri as isize {
                                continue;
                            }
                            let dst_base = ((c * ti + it as usize) * ri + ir as usize) * ci;
                            let src_base = (ot * ro + or) * co;
                            for oc in 0..co {
                                let ic = (oc * sc + kc) as isize - p;
                                if ic >= 0 && ic < ci as isize {
                                    xd[dst_base + ic as usize] += src[src_base + oc];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

/// Forward convolution with explicit kernel `(cout, cin, k, k, k)` and bias `(cout)`.
pub fn conv3d<F: Float>(g: &ConvGeom, x: &Tensor4<F>, weight: &[F], bias: &[F]) -> Result<Tensor4<F>> {
    let out = g.out_shape(x.shape())?;
    if weight.len() != g.weight_len() || bias.len() != g.cout {
        return Err(Error::Config(format!(
            "conv3d parameters: kernel has {} values (want {}), bias {} (want {})",
            weight.len(),
            g.weight_len(),
            bias.len(),
            g.cout
        )));
    }
    let n = out[1] * out[2] * out[3];
    let mut y = vec![F::zero(); g.cout * n];
    for (o, b) in bias.iter().enumerate() {
        y[o * n..(o + 1) * n].fill(*b);
    }
    if g.is_pointwise() {
        F::gemm(false, false, g.cout, g.cin, n, F::one(), weight, x.data(), F::one(), &mut y);
    } else {
        let cols = im2col(g, x, out);
        F::gemm(false, false, g.cout, g.cin * g.taps(), n, F::one(), weight, &cols, F::one(), &mut y);
    }
    let y = Tensor4::from_vec(out, y)?;
    y.check_finite("conv3d")?;
    Ok(y)
}

/// Gradients of [`conv3d`]. Kernel and bias gradients are accumulated into
/// `dw`/`db` when given; the input gradient is returned when `need_dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv3d_backward<F: Float>(
    g: &ConvGeom,
    x: &Tensor4<F>,
    weight: &[F],
    dy: &Tensor4<F>,
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
    need_dx: bool,
) -> Option<Tensor4<F>> {
    let out = dy.shape();
    let n = out[1] * out[2] * out[3];
    let kdim = g.cin * g.taps();
    let dyd = dy.data();
    if let Some(db) = db {
        for o in 0..g.cout {
            let mut s = F::zero();
            for &v in &dyd[o * n..(o + 1) * n] {
                s += v;
            }
            db[o] += s;
        }
    }
    if g.is_pointwise() {
        if let Some(dw) = dw {
            F::gemm(false, true, g.cout, n, g.cin, F::one(), dyd, x.data(), F::one(), dw);
        }
        return need_dx.then(|| {
            let mut dx = Tensor4::zeros(x.shape());
            F::gemm(true, false, g.cin, g.cout, n, F::one(), weight, dyd, F::zero(), dx.data_mut());
            dx
        });
    }
    if let Some(dw) = dw {
        let cols = im2col(g, x, out);
        F::gemm(false, true, g.cout, n, kdim, F::one(), dyd, &cols, F::one(), dw);
    }
    need_dx.then(|| {
        let mut dcols = vec![F::zero(); kdim * n];
        F::gemm(true, false, kdim, g.cout, n, F::one(), weight, dyd, F::zero(), &mut dcols);
        col2im(g, &dcols, x.shape(), out)
    })
}

/// Convolution layer whose kernel and bias live in a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Conv3d {
    pub geom: ConvGeom,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv3d {
    pub fn new<F: Float>(ps: &mut ParamSet<F>, init: &mut Init, name: &str, geom: ConvGeom) -> Result<Self> {
        let fan_in = geom.cin * geom.taps();
        let k = geom.kernel;
        let weight = ps.add(
            format!("{name}.weight"),
            &[geom.cout, geom.cin, k, k, k],
            init.fan_in(geom.weight_len(), fan_in),
        )?;
        let bias = ps.add(format!("{name}.bias"), &[geom.cout], init.fan_in(geom.cout, fan_in))?;
        Ok(Conv3d { geom, weight, bias })
    }

    /// Identity-initialized pointwise layer (`cin == cout`, zero bias).
    pub fn identity<F: Float>(ps: &mut ParamSet<F>, name: &str, channels: usize) -> Result<Self> {
        let geom = ConvGeom::pointwise(channels, channels)?;
        let mut w = vec![F::zero(); channels * channels];
        for i in 0..channels {
            w[i * channels + i] = F::one();
        }
        let weight = ps.add(format!("{name}.weight"), &[channels, channels, 1, 1, 1], w)?;
        let bias = ps.add(format!("{name}.bias"), &[channels], vec![F::zero(); channels])?;
        Ok(Conv3d { geom, weight, bias })
    }

    pub fn forward<F: Float>(&self, ps: &ParamSet<F>, x: &Tensor4<F>) -> Result<Tensor4<F>> {
        conv3d(&self.geom, x, ps.get(self.weight), ps.get(self.bias))
    }

    pub fn backward<F: Float>(
        &self,
        ps: &ParamSet<F>,
        x: &Tensor4<F>,
        dy: &Tensor4<F>,
        grads: Option<&mut Grads<F>>,
        need_dx: bool,
    ) -> Option<Tensor4<F>> {
        let w = ps.get(self.weight);
        match grads {
            Some(gr) => {
                let (dw, db) = gr.pair_mut(self.weight, self.bias);
                conv3d_backward(&self.geom, x, w, dy, Some(dw), Some(db), need_dx)
            }
            None => conv3d_backward(&self.geom, x, w, dy, None, None, need_dx),
        }
    }
}
