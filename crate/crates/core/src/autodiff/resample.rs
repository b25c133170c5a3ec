//! Linear resampling along one axis, and the centre crop / zero pad used to
//! bring time-scaled signals back to a fixed length.

use crate::error::{Error, Result};
use crate::tensor::{Float, Tensor4};

pub const MIN_TIME_FACTOR: f64 = 0.25;
pub const MAX_TIME_FACTOR: f64 = 2.0;

/// Two-tap linear interpolation weights mapping `n_in` samples onto `n_out`
/// with both endpoints aligned.
#[derive(Clone, Debug)]
struct Plan {
    lo: Vec<usize>,
    w: Vec<f64>,
}

impl Plan {
    fn new(n_in: usize, n_out: usize) -> Plan {
        let mut lo = Vec::with_capacity(n_out);
        let mut w = Vec::with_capacity(n_out);
        for i in 0..n_out {
            if n_in == 1 || n_out == 1 {
                lo.push(0);
                w.push(0.0);
                continue;
            }
            let pos = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let l = (pos.floor() as usize).min(n_in - 2);
            lo.push(l);
            w.push(pos - l as f64);
        }
        Plan { lo, w }
    }
}

fn split_axis(shape: [usize; 4], axis: usize) -> (usize, usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn check_axis(axis: usize) -> Result<()> {
    if !(1..=3).contains(&axis) {
        return Err(Error::Config(format!("resize axis must be 1..=3 (time, rows, cols), got {axis}")));
    }
    Ok(())
}

/// Resizes `axis` (1 = time, 2 = rows, 3 = cols) to `n_out` samples.
pub fn resize_axis<F: Float>(x: &Tensor4<F>, axis: usize, n_out: usize) -> Result<Tensor4<F>> {
    check_axis(axis)?;
    let shape = x.shape();
    if n_out == 0 || shape[axis] == 0 {
        return Err(Error::Config(format!("resize axis {axis}: cannot map {} to {n_out} samples", shape[axis])));
    }
    if shape[axis] == n_out {
        return Ok(x.clone());
    }
    let (outer, n_in, inner) = split_axis(shape, axis);
    let plan = Plan::new(n_in, n_out);
    let mut out_shape = shape;
    out_shape[axis] = n_out;
    let mut y = Tensor4::zeros(out_shape);
    let (xd, yd) = (x.data(), y.data_mut());
    for o in 0..outer {
        let src = &xd[o * n_in * inner..(o + 1) * n_in * inner];
        let dst = &mut yd[o * n_out * inner..(o + 1) * n_out * inner];
        for i in 0..n_out {
            let l = plan.lo[i];
            let h = (l + 1).min(n_in - 1);
            let w = F::from_f64(plan.w[i]);
            let a = F::one() - w;
            for k in 0..inner {
                dst[i * inner + k] = src[l * inner + k] * a + src[h * inner + k] * w;
            }
        }
    }
    Ok(y)
}

/// Adjoint of [`resize_axis`] for an input that had `n_in` samples on `axis`.
pub fn resize_axis_backward<F: Float>(dy: &Tensor4<F>, axis: usize, n_in: usize) -> Tensor4<F> {
    let shape = dy.shape();
    if shape[axis] == n_in {
        return dy.clone();
    }
    let (outer, n_out, inner) = split_axis(shape, axis);
    let plan = Plan::new(n_in, n_out);
    let mut in_shape = shape;
    in_shape[axis] = n_in;
    let mut dx = Tensor4::zeros(in_shape);
    let (dyd, dxd) = (dy.data(), dx.data_mut());
    for o in 0..outer {
        let src = &dyd[o * n_out * inner..(o + 1) * n_out * inner];
        let dst = &mut dxd[o * n_in * inner..(o + 1) * n_in * inner];
        for i in 0..n_out {
            let l = plan.lo[i];
            let h = (l + 1).min(n_in - 1);
            let w = F::from_f64(plan.w[i]);
            let a = F::one() - w;
            for k in 0..inner {
                let g = src[i * inner + k];
                dst[l * inner + k] += g * a;
                dst[h * inner + k] += g * w;
            }
        }
    }
    dx
}

/// Output length of a temporal resample of `t` samples by `factor`.
pub fn scaled_len(t: usize, factor: f64) -> usize {
    ((factor * t as f64).round() as usize).max(1)
}

/// Dilates (`factor > 1`) or compresses the time axis to `round(factor * T)`
/// samples by linear interpolation. `factor == 1` returns an exact copy.
pub fn temporal_resample<F: Float>(x: &Tensor4<F>, factor: f64) -> Result<Tensor4<F>> {
    if !(MIN_TIME_FACTOR..=MAX_TIME_FACTOR).contains(&factor) || !factor.is_finite() {
        return Err(Error::Config(format!(
            "temporal resample factor {factor} outside [{MIN_TIME_FACTOR}, {MAX_TIME_FACTOR}]"
        )));
    }
    resize_axis(x, 1, scaled_len(x.shape()[1], factor))
}

pub fn temporal_resample_backward<F: Float>(dy: &Tensor4<F>, t_in: usize) -> Tensor4<F> {
    resize_axis_backward(dy, 1, t_in)
}

/// Offset of a length-`n` signal inside a length-`target` window when both
/// are centred. Positive: zero padding before the signal; negative: samples
/// cropped from its start.
pub fn centre_offset(n: usize, target: usize) -> isize {
    (target as isize - n as isize).div_euclid(2)
}

/// Centre-crops or zero-pads the time axis to `target` samples.
pub fn fit_time<F: Float>(x: &Tensor4<F>, target: usize) -> Tensor4<F> {
    let [c, t, r, w] = x.shape();
    if t == target {
        return x.clone();
    }
    let off = centre_offset(t, target);
    let plane = r * w;
    let mut y = Tensor4::zeros([c, target, r, w]);
    let (xd, yd) = (x.data(), y.data_mut());
    for ch in 0..c {
        for ti in 0..target {
            let src = ti as isize - off;
            if src < 0 || src >= t as isize {
                continue;
            }
            let s = (ch * t + src as usize) * plane;
            let d = (ch * target + ti) * plane;
            yd[d..d + plane].copy_from_slice(&xd[s..s + plane]);
        }
    }
    y
}

/// Adjoint of [`fit_time`].
pub fn fit_time_backward<F: Float>(dy: &Tensor4<F>, t_in: usize) -> Tensor4<F> {
    let [c, target, r, w] = dy.shape();
    if t_in == target {
        return dy.clone();
    }
    let off = centre_offset(t_in, target);
    let plane = r * w;
    let mut dx = Tensor4::zeros([c, t_in, r, w]);
    let (dyd, dxd) = (dy.data(), dx.data_mut());
    for ch in 0..c {
        for ti in 0..target {
            let src = ti as isize - off;
            if src < 0 || src >= t_in as isize {
                continue;
            }
            let s = (ch * t_in + src as usize) * plane;
            let d = (ch * target + ti) * plane;
            dxd[s..s + plane].copy_from_slice(&dyd[d..d + plane]);
        }
    }
    dx
}

/// Resizes time, rows and cols in that order.
pub fn resize3<F: Float>(x: &Tensor4<F>, target: [usize; 3]) -> Result<Tensor4<F>> {
    let a = resize_axis(x, 1, target[0])?;
    let b = resize_axis(&a, 2, target[1])?;
    resize_axis(&b, 3, target[2])
}

/// Adjoint of [`resize3`] back to `input` shape.
pub fn resize3_backward<F: Float>(dy: &Tensor4<F>, input: [usize; 4]) -> Tensor4<F> {
    let b = resize_axis_backward(dy, 3, input[3]);
    let a = resize_axis_backward(&b, 2, input[2]);
    resize_axis_backward(&a, 1, input[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(t: usize, f: impl Fn(usize) -> f64) -> Tensor4<f64> {
        Tensor4::from_vec([1, t, 1, 1], (0..t).map(f).collect()).unwrap()
    }

    #[test]
    fn unit_factor_is_bit_identical() {
        let x = Tensor4::from_vec([2, 7, 2, 3], (0..84).map(|i| (i as f64).cos() * 1e-3).collect()).unwrap();
        assert_eq!(temporal_resample(&x, 1.0).unwrap(), x);
    }

    #[test]
    fn half_factor_matches_direct_interpolation() {
        let x = series(96, |i| (i as f64 * 0.37).sin() + 0.01 * i as f64);
        let y = temporal_resample(&x, 0.5).unwrap();
        assert_eq!(y.shape(), [1, 48, 1, 1]);
        // Direct per-index oracle.
        for i in 0..48 {
            let pos = i as f64 * 95.0 / 47.0;
            let l = pos.floor() as usize;
            let expect = if l >= 95 {
                x.data()[95]
            } else {
                let w = pos - l as f64;
                x.data()[l] * (1.0 - w) + x.data()[l + 1] * w
            };
            assert!((y.data()[i] - expect).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn doubling_a_ramp_gives_a_ramp() {
        let x = series(96, |i| 2.0 - 0.5 * i as f64);
        let y = temporal_resample(&x, 2.0).unwrap();
        assert_eq!(y.shape()[1], 192);
        assert_eq!(y.data()[0], x.data()[0]);
        assert_eq!(y.data()[191], x.data()[95]);
        let step = y.data()[1] - y.data()[0];
        for w in y.data().windows(2) {
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
    }

    #[test]
    fn factor_out_of_range_is_rejected() {
        let x = series(8, |i| i as f64);
        assert!(temporal_resample(&x, 0.2).is_err());
        assert!(temporal_resample(&x, 2.5).is_err());
    }

    #[test]
    fn fit_time_pads_and_crops_about_the_centre() {
        let x = series(4, |i| i as f64 + 1.0);
        let padded = fit_time(&x, 8);
        assert_eq!(padded.data(), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        let cropped = fit_time(&padded, 4);
        assert_eq!(cropped, x);
    }
}
