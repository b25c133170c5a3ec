//! Surface EMG from MUAP libraries and motor-neuron spike trains.

mod spikes;
mod synth;

pub use spikes::{generate_spike_trains, ExcitationProfile, PoolConfig, SpikeTrainSet};
pub use synth::{synthesize_dynamic, synthesize_static, DynamicStats, EmgRecord, Noise, Timing};

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::ConditionVector;
use crate::error::{Error, Result};
use crate::generate::ConditionPath;

pub const EMG_MAGIC: &[u8; 4] = b"BMEG";
pub const EMG_VERSION: u32 = 1;
/// Path quantization levels used by dynamic synthesis unless configured.
pub const DEFAULT_LEVELS: usize = 256;

/// `BMEG`, u32 version, u32 rows, u32 cols, u64 samples, f64 rate, u8 noise
/// flag, f64 noise variance, then f32 data in `[t][row][col]` order. Little endian.
pub fn write_emg_to<W: Write>(mut w: W, rec: &EmgRecord<f32>) -> Result<()> {
    w.write_all(EMG_MAGIC)?;
    w.write_all(&EMG_VERSION.to_le_bytes())?;
    w.write_all(&(rec.rows as u32).to_le_bytes())?;
    w.write_all(&(rec.cols as u32).to_le_bytes())?;
    w.write_all(&(rec.samples as u64).to_le_bytes())?;
    w.write_all(&rec.rate_hz.to_le_bytes())?;
    w.write_all(&[u8::from(rec.noise_variance.is_some())])?;
    w.write_all(&rec.noise_variance.unwrap_or(0.0).to_le_bytes())?;
    for v in &rec.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_emg(path: &Path, rec: &EmgRecord<f32>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_emg_to(&mut w, rec)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn take<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::corrupt("emg", format!("truncated while reading {what}")),
        _ => Error::Stream(e),
    })?;
    Ok(b)
}

pub fn read_emg_from<R: Read>(mut r: R) -> Result<EmgRecord<f32>> {
    if &take::<4, _>(&mut r, "magic")? != EMG_MAGIC {
        return Err(Error::corrupt("emg", "bad magic"));
    }
    let version = u32::from_le_bytes(take(&mut r, "version")?);
    if version != EMG_VERSION {
        return Err(Error::corrupt("emg", format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(take(&mut r, "rows")?) as usize;
    let cols = u32::from_le_bytes(take(&mut r, "cols")?) as usize;
    let samples = u64::from_le_bytes(take(&mut r, "samples")?) as usize;
    let rate_hz = f64::from_le_bytes(take(&mut r, "rate")?);
    let has_noise = take::<1, _>(&mut r, "noise flag")?[0];
    let variance = f64::from_le_bytes(take(&mut r, "noise variance")?);
    if has_noise > 1 || !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::corrupt("emg", "invalid header"));
    }
    let n = rows
        .checked_mul(cols)
        .and_then(|p| p.checked_mul(samples))
        .ok_or_else(|| Error::corrupt("emg", "dimensions overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != n * 4 {
        return Err(Error::corrupt("emg", format!("expected {} data bytes, found {}", n * 4, bytes.len())));
    }
    let data: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::corrupt("emg", "non-finite sample"));
    }
    Ok(EmgRecord { rows, cols, samples, rate_hz, noise_variance: (has_noise == 1).then_some(variance), data })
}

pub fn read_emg(path: &Path) -> Result<EmgRecord<f32>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_emg_from(BufReader::new(f))
}

/// One row per sample: time in seconds, then every channel as `r{row}c{col}`.
pub fn write_emg_csv<W: Write>(mut w: W, rec: &EmgRecord<f32>) -> Result<()> {
    write!(w, "t")?;
    for r in 0..rec.rows {
        for c in 0..rec.cols {
            write!(w, ",r{r}c{c}")?;
        }
    }
    writeln!(w)?;
    let plane = rec.channels();
    for t in 0..rec.samples {
        write!(w, "{}", t as f64 / rec.rate_hz)?;
        for v in &rec.data[t * plane..(t + 1) * plane] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Checks the spike-train file contract: finite, strictly increasing times.
pub fn check_spikes(s: &SpikeTrainSet) -> Result<()> {
    for (i, ts) in s.0.iter().enumerate() {
        if ts.iter().any(|t| !t.is_finite()) || ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!("spike train {i} must be finite and strictly increasing")));
        }
    }
    Ok(())
}

/// Illustrative flex-and-release schedule around `base`: depth and fibre
/// length rise to the upper bound at mid-contraction and return. Not derived
/// from measured kinematics.
pub fn illustrative_path(base: &ConditionVector) -> ConditionPath {
    let mut peak = *base;
    peak.0[1] = (base.0[1] + 0.25).min(1.0);
    peak.0[5] = (base.0[5] + 0.25).min(1.0);
    ConditionPath::new(vec![(0.0, *base), (0.5, peak), (1.0, *base)]).expect("knots are ordered")
}
