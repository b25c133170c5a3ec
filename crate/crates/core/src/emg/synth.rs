use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SpikeTrainSet;
use crate::error::{Error, Result};
use crate::generate::ConditionPath;
use crate::model::{cond_array, Model};
use crate::par::{self, Exec};
use crate::tensor::{Float, Tensor4};

/// Additive white Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub variance: f64,
    pub seed: u64,
}

/// Surface EMG laid out `[t][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmgRecord<F> {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub rate_hz: f64,
    pub noise_variance: Option<f64>,
    pub data: Vec<F>,
}

impl<F: Float> EmgRecord<F> {
    pub fn channels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn at(&self, t: usize, r: usize, c: usize) -> F {
        self.data[(t * self.rows + r) * self.cols + c]
    }
}

/// Output timing shared by static and dynamic synthesis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub samples: usize,
    pub rate_hz: f64,
}

impl Timing {
    pub fn duration_s(&self) -> f64 {
        self.samples as f64 / self.rate_hz
    }
}

/// Rounds spike times to sample indices; lists every spike outside the record.
fn spike_samples(spikes: &SpikeTrainSet, timing: Timing) -> Result<Vec<Vec<isize>>> {
    let duration = timing.duration_s();
    let mut bad = Vec::new();
    let idx = spikes
        .0
        .iter()
        .enumerate()
        .map(|(mu, ts)| {
            ts.iter()
                .map(|&t| {
                    if !(0.0..=duration).contains(&t) {
                        bad.push(format!("unit {mu} at {t} s"));
                    }
                    (t * timing.rate_hz).round() as isize
                })
                .collect()
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::OutOfRange(format!(
            "{} spike(s) outside [0, {duration}] s: {}",
            bad.len(),
            bad.join(", ")
        )));
    }
    Ok(idx)
}

/// Output time block handled by one worker.
const BLOCK: usize = 256;

/// `out[t] = sum over units (ascending) and their spikes (ascending) of
/// muap(t - spike + centre)`. `pick(u, k)` names the waveform of spike `k`
/// of unit `u`. Every output element sees the same addition order whatever
/// `exec` is.
fn accumulate<'a, F: Float + 'a>(
    shape: [usize; 4],
    spikes: &[Vec<isize>],
    timing: Timing,
    pick: impl Fn(usize, usize) -> &'a [F] + Sync,
    exec: Exec,
) -> Vec<F> {
    let [_, t_len, rows, cols] = shape;
    let plane = rows * cols;
    let centre = (t_len / 2) as isize;
    let blocks = timing.samples.div_ceil(BLOCK);
    let parts = par::map(exec, blocks, |b| {
        let lo = (b * BLOCK) as isize;
        let hi = ((b + 1) * BLOCK).min(timing.samples) as isize;
        let mut buf = vec![F::zero(); (hi - lo) as usize * plane];
        for (u, unit) in spikes.iter().enumerate() {
            for (k, &s) in unit.iter().enumerate() {
                // Output samples touched by this spike: s - centre + [0, T).
                let start = (s - centre).max(lo);
                let end = (s - centre + t_len as isize).min(hi);
                if start >= end {
                    continue;
                }
                let w = pick(u, k);
                for t in start..end {
                    let src = ((t - s + centre) as usize) * plane;
                    let dst = ((t - lo) as usize) * plane;
                    for (o, &v) in buf[dst..dst + plane].iter_mut().zip(&w[src..src + plane]) {
                        *o += v;
                    }
                }
            }
        }
        buf
    });
    parts.concat()
}

fn add_noise<F: Float>(data: &mut [F], noise: Option<Noise>) -> Result<()> {
    if let Some(n) = noise {
        if !(n.variance >= 0.0 && n.variance.is_finite()) {
            return Err(Error::Config(format!("noise variance must be finite and >= 0, got {}", n.variance)));
        }
        let sd = n.variance.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
        for v in data.iter_mut() {
            *v += F::from_f64(sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok(())
}

fn library_shape<F: Float>(muaps: &[Tensor4<F>]) -> Result<[usize; 4]> {
    let shape = muaps.first().ok_or_else(|| Error::InvalidInput("empty MUAP library".into()))?.shape();
    if shape[0] != 1 {
        return Err(Error::Shape(format!("MUAPs must have one channel, got {:?}", shape)));
    }
    if let Some(bad) = muaps.iter().position(|m| m.shape() != shape) {
        return Err(Error::Shape(format!("MUAP {bad} is {:?}, expected {shape:?}", muaps[bad].shape())));
    }
    Ok(shape)
}

/// Convolves each unit's MUAP with its spike train, centre sample aligned to
/// the spike, and sums over units.
pub fn synthesize_static<F: Float>(
    muaps: &[Tensor4<F>],
    spikes: &SpikeTrainSet,
    timing: Timing,
    noise: Option<Noise>,
    exec: Exec,
) -> Result<EmgRecord<F>> {
    let shape = library_shape(muaps)?;
    if spikes.0.len() > muaps.len() {
        return Err(Error::InvalidInput(format!("{} spike trains for {} MUAPs", spikes.0.len(), muaps.len())));
    }
    let idx = spike_samples(spikes, timing)?;
    let mut data = accumulate(shape, &idx, timing, |u, _| muaps[u].data(), exec);
    add_noise(&mut data, noise)?;
    Ok(EmgRecord {
        rows: shape[2],
        cols: shape[3],
        samples: timing.samples,
        rate_hz: timing.rate_hz,
        noise_variance: noise.map(|n| n.variance),
        data,
    })
}

/// Counts of decoder calls made by [`synthesize_dynamic`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DynamicStats {
    pub decodes_per_unit: Vec<usize>,
}

/// Like [`synthesize_static`], but the waveform inserted for a spike at time
/// `t` is `decode(latent, path(t / duration))`. With `levels = Some(k)`, a unit
/// whose spikes fall on more than `k` distinct path positions has them snapped
/// to `k` evenly spaced levels; otherwise every distinct position is decoded
/// exactly once.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_dynamic<F: Float>(
    model: &Model<F>,
    latents: &[Vec<F>],
    path: &ConditionPath,
    spikes: &SpikeTrainSet,
    timing: Timing,
    noise: Option<Noise>,
    levels: Option<usize>,
    exec: Exec,
) -> Result<(EmgRecord<F>, DynamicStats)> {
    if spikes.0.len() > latents.len() {
        return Err(Error::InvalidInput(format!("{} spike trains for {} latents", spikes.0.len(), latents.len())));
    }
    if levels == Some(0) {
        return Err(Error::Config("path quantization needs at least one level".into()));
    }
    let idx = spike_samples(spikes, timing)?;
    let duration = timing.duration_s();
    // Path position of every spike, as an exact key.
    let fractions: Vec<Vec<f64>> =
        spikes.0.iter().map(|ts| ts.iter().map(|&t| (t / duration).clamp(0.0, 1.0)).collect()).collect();
    let keys: Vec<Vec<u64>> = fractions
        .iter()
        .map(|fs| {
            let distinct = {
                let mut v: Vec<u64> = fs.iter().map(|f| f.to_bits()).collect();
                v.sort_unstable();
                v.dedup();
                v.len()
            };
            fs.iter()
                .map(|&f| match levels {
                    Some(k) if distinct > k => {
                        let q = if k == 1 { 0.0 } else { (f * (k - 1) as f64).round() / (k - 1) as f64 };
                        q.to_bits()
                    }
                    _ => f.to_bits(),
                })
                .collect()
        })
        .collect();
    let waves: Vec<BTreeMap<u64, Tensor4<F>>> = par::try_map(exec, keys.len(), |u| {
        let mut m = BTreeMap::new();
        for &k in &keys[u] {
            if let std::collections::btree_map::Entry::Vacant(e) = m.entry(k) {
                let c = path.at(f64::from_bits(k));
                e.insert(model.decode(&latents[u], &cond_array::<F>(&c))?);
            }
        }
        Ok(m)
    })?;
    let stats = DynamicStats { decodes_per_unit: waves.iter().map(BTreeMap::len).collect() };
    let shape = model.config.sample_shape();
    let mut data = accumulate(shape, &idx, timing, |u, k| waves[u][&keys[u][k]].data(), exec);
    add_noise(&mut data, noise)?;
    let rec = EmgRecord {
        rows: shape[2],
        cols: shape[3],
        samples: timing.samples,
        rate_hz: timing.rate_hz,
        noise_variance: noise.map(|n| n.variance),
        data,
    };
    Ok((rec, stats))
}
