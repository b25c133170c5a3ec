use crate::error::{Error, Result};
use crate::teacher::RawMuap;
use crate::tensor::Tensor4;

/// Two-tap mean filter followed by linear-interpolation resampling from
/// `rate_in` to `rate_out`. Frames are `plane` values wide. Equal rates copy.
pub fn decimate(frames: &[f64], plane: usize, rate_in: f64, rate_out: f64) -> Result<Vec<f64>> {
    if rate_out > rate_in {
        return Err(Error::Config(format!("cannot decimate {rate_in} Hz to a higher rate {rate_out} Hz")));
    }
    if plane == 0 || !frames.len().is_multiple_of(plane) {
        return Err(Error::Shape(format!("{} values are not whole frames of {plane}", frames.len())));
    }
    let n = frames.len() / plane;
    if n == 0 || rate_in == rate_out {
        return Ok(frames.to_vec());
    }
    let mut smooth = vec![0.0; frames.len()];
    for t in 0..n {
        let next = (t + 1).min(n - 1);
        for i in 0..plane {
            smooth[t * plane + i] = 0.5 * (frames[t * plane + i] + frames[next * plane + i]);
        }
    }
    let step = rate_in / rate_out;
    let m = ((n - 1) as f64 / step).floor() as usize + 1;
    let mut out = vec![0.0; m * plane];
    for k in 0..m {
        let pos = k as f64 * step;
        let l = (pos.floor() as usize).min(n - 1);
        let h = (l + 1).min(n - 1);
        let w = pos - l as f64;
        for i in 0..plane {
            out[k * plane + i] = smooth[l * plane + i] * (1.0 - w) + smooth[h * plane + i] * w;
        }
    }
    Ok(out)
}

/// First frame at which cumulative energy reaches half of the total, or
/// `None` for an all-zero signal.
pub fn energy_centre(frames: &[f64], plane: usize) -> Option<usize> {
    let energy: Vec<f64> = frames.chunks_exact(plane).map(|f| f.iter().map(|v| v * v).sum()).collect();
    let total: f64 = energy.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut acc = 0.0;
    for (t, e) in energy.iter().enumerate() {
        acc += e;
        if acc >= 0.5 * total {
            return Some(t);
        }
    }
    Some(energy.len() - 1)
}

/// Decimates to `rate_hz` and cuts a `samples`-long window with the energy
/// median at index `samples / 2`, zero-padding beyond the signal.
pub fn preprocess(raw: &RawMuap, rate_hz: f64, samples: usize) -> Result<Tensor4<f32>> {
    let plane = raw.rows * raw.cols;
    let y = decimate(&raw.data, plane, raw.rate_hz, rate_hz)?;
    let n = y.len() / plane.max(1);
    let mut out = vec![0f32; samples * plane];
    if let Some(tc) = energy_centre(&y, plane) {
        let start = tc as isize - (samples / 2) as isize;
        for i in 0..samples {
            let src = start + i as isize;
            if src < 0 || src >= n as isize {
                continue;
            }
            let s = src as usize * plane;
            for (o, v) in out[i * plane..(i + 1) * plane].iter_mut().zip(&y[s..s + plane]) {
                *o = *v as f32;
            }
        }
    }
    let x = Tensor4::from_vec([1, samples, raw.rows, raw.cols], out)?;
    x.check_finite("preprocess")?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(samples: usize, rate: f64, f: impl Fn(usize) -> f64) -> RawMuap {
        RawMuap { rows: 1, cols: 2, samples, rate_hz: rate, data: (0..samples * 2).map(|i| f(i / 2)).collect() }
    }

    #[test]
    fn zeros_stay_zero() {
        let x = preprocess(&raw(262, 4096.0, |_| 0.0), 2000.0, 96).unwrap();
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_lands_on_window_centre() {
        for k in [3, 50, 130, 200, 261] {
            let r = raw(262, 4096.0, |t| if t == k { 1.0 } else { 0.0 });
            let x = preprocess(&r, 2000.0, 96).unwrap();
            let d: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
            assert_eq!(energy_centre(&d, 2), Some(48), "impulse at {k}");
        }
    }

    #[test]
    fn symmetric_pulse_is_centred() {
        let r = raw(120, 2000.0, |t| (-((t as f64 - 70.0) / 6.0).powi(2)).exp());
        let x = preprocess(&r, 2000.0, 96).unwrap();
        let d = x.data();
        for i in 1..48 {
            assert_eq!(d[(48 - i) * 2], d[(48 + i) * 2], "offset {i}");
        }
        assert_eq!(d[48 * 2], 1.0);
    }

    #[test]
    fn centred_window_is_a_fixed_point() {
        let r = raw(262, 4096.0, |t| ((t as f64 - 90.0) * 0.2).sin() * (-((t as f64 - 100.0) / 15.0).powi(2)).exp());
        let x = preprocess(&r, 2000.0, 96).unwrap();
        let again = RawMuap { rows: 1, cols: 2, samples: 96, rate_hz: 2000.0, data: x.data().iter().map(|&v| v as f64).collect() };
        let y = preprocess(&again, 2000.0, 96).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn upsampling_is_rejected() {
        assert!(preprocess(&raw(10, 1000.0, |_| 1.0), 2000.0, 8).is_err());
    }
}
