//! Dense `(channels, time, rows, cols)` tensors and the float abstraction the
//! numeric kernels are generic over.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use crate::error::{Error, Result};

/// Scalar type of every numeric kernel. Implemented for `f32` (training) and
/// `f64` (gradient verification).
pub trait Float:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BITS: u32;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// `c = alpha * op(a) * op(b) + beta * c` for row-major matrices where
    /// `op(a)` is `m x k` and `op(b)` is `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        trans_a: bool,
        trans_b: bool,
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );
}

fn gemm_strides(trans: bool, rows: usize, cols: usize) -> (isize, isize) {
    // `rows x cols` view; stored transposed when `trans`.
    if trans {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

macro_rules! impl_float {
    ($t:ty, $bits:expr, $gemm:path) => {
        impl Float for $t {
            const BITS: u32 = $bits;

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn gemm(
                trans_a: bool,
                trans_b: bool,
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k, "gemm: lhs too short");
                assert!(b.len() >= k * n, "gemm: rhs too short");
                assert!(c.len() >= m * n, "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                let (rsa, csa) = gemm_strides(trans_a, m, k);
                let (rsb, csb) = gemm_strides(trans_b, k, n);
                // SAFETY: the asserts above guarantee every index the kernel
                // touches lies inside the three slices.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_float!(f32, 32, matrixmultiply::sgemm);
impl_float!(f64, 64, matrixmultiply::dgemm);

#[inline]
pub fn cast<F: Float>(v: f64) -> F {
    F::from_f64(v)
}

/// Four-axis tensor laid out as `(channels, time, rows, cols)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<F> {
    shape: [usize; 4],
    data: Vec<F>,
}

impl<F: Float> Tensor4<F> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor4 { shape, data: vec![F::zero(); shape.iter().product()] }
    }

    pub fn full(shape: [usize; 4], v: F) -> Self {
        Tensor4 { shape, data: vec![v; shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "tensor of shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor4 { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[0]
    }

    /// Voxels per channel (`time * rows * cols`).
    #[inline]
    pub fn plane(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[F] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, t: usize, r: usize, w: usize) -> usize {
        ((c * self.shape[1] + t) * self.shape[2] + r) * self.shape[3] + w
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, r: usize, w: usize) -> F {
        self.data[self.index(c, t, r, w)]
    }

    pub fn reshape(self, shape: [usize; 4]) -> Result<Self> {
        Tensor4::from_vec(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: F) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Hard error on NaN or infinity; `what` names the producing op.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(i) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{what}: element {i} is {}", self.data[i])));
        }
        Ok(())
    }

    /// Stacks tensors of equal `(time, rows, cols)` along the channel axis.
    pub fn concat_channels(parts: &[&Tensor4<F>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of zero tensors".into()))?;
        let [_, t, r, c] = first.shape;
        let mut channels = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != [t, r, c] {
                return Err(Error::Shape(format!(
                    "concat: {:?} does not match {:?} on the spatial axes",
                    p.shape, first.shape
                )));
            }
            channels += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor4 { shape: [channels, t, r, c], data })
    }

    /// Splits off the first `n` channels.
    pub fn split_channels(&self, n: usize) -> (Self, Self) {
        let plane = self.plane();
        let [c, t, r, w] = self.shape;
        assert!(n <= c);
        (
            Tensor4 { shape: [n, t, r, w], data: self.data[..n * plane].to_vec() },
            Tensor4 { shape: [c - n, t, r, w], data: self.data[n * plane..].to_vec() },
        )
    }

    pub fn cast<G: Float>(&self) -> Tensor4<G> {
        Tensor4 { shape: self.shape, data: self.data.iter().map(|v| G::from_f64(v.as_f64())).collect() }
    }
}

pub fn check_finite_slice<F: Float>(v: &[F], what: &str) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{what}: element {i} is {}", v[i])));
    }
    Ok(())
}
