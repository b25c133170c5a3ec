use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Size-principle motor-neuron pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    pub n: usize,
    /// Ratio between the largest and smallest recruitment threshold.
    pub recruitment_range: f64,
    /// Rate gain per unit of excitation above threshold.
    pub gain: f64,
    pub min_rate_hz: f64,
    pub peak_rate_hz: f64,
    /// Coefficient of variation of inter-spike intervals.
    pub isi_cov: f64,
    pub seed: u64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { n: 100, recruitment_range: 30.0, gain: 2.0, min_rate_hz: 8.0, peak_rate_hz: 35.0, isi_cov: 0.2, seed: 0 }
    }
}

const RATE_EPS: f64 = 1e-9;

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("motor-neuron pool needs at least one neuron".into()));
        }
        if !(self.recruitment_range >= 1.0) || !(self.gain > 0.0) || !(self.isi_cov >= 0.0) {
            return Err(Error::Config("pool needs recruitment range >= 1, gain > 0 and non-negative ISI variation".into()));
        }
        if !(self.min_rate_hz > 0.0 && self.min_rate_hz < self.peak_rate_hz && self.peak_rate_hz.is_finite()) {
            return Err(Error::Config(format!(
                "firing rates must satisfy 0 < min ({}) < peak ({})",
                self.min_rate_hz, self.peak_rate_hz
            )));
        }
        Ok(())
    }

    /// Recruitment threshold of neuron `i` (zero-based), rising to 1 for the last.
    pub fn threshold(&self, i: usize) -> f64 {
        let rr = self.recruitment_range;
        ((rr.ln() * (i + 1) as f64 / self.n as f64).exp() / rr).min(1.0)
    }

    /// Firing rate at excitation `e` for threshold `rte`, or `None` below it.
    pub fn rate(&self, e: f64, rte: f64) -> Option<f64> {
        if e < rte {
            return None;
        }
        let span = self.peak_rate_hz - self.min_rate_hz;
        let r = self.min_rate_hz + self.gain * (e - rte) * span / (1.0 - rte + RATE_EPS);
        Some(r.min(self.peak_rate_hz))
    }
}

/// Piecewise-linear excitation over `[0, duration_s]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationProfile {
    /// `(time in s, excitation)` knots, times increasing.
    pub knots: Vec<(f64, f64)>,
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
}

fn default_rate() -> f64 {
    2000.0
}

impl ExcitationProfile {
    pub fn constant(e: f64, duration_s: f64) -> Self {
        ExcitationProfile { knots: vec![(0.0, e), (duration_s, e)], duration_s, rate_hz: default_rate() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || !(self.rate_hz > 0.0) {
            return Err(Error::Config("excitation needs a positive duration and rate".into()));
        }
        if self.knots.is_empty() {
            return Err(Error::Config("excitation needs at least one knot".into()));
        }
        if self.knots.iter().any(|&(t, e)| !t.is_finite() || !(0.0..=1.0).contains(&e)) {
            return Err(Error::OutOfRange("excitation values must lie in [0, 1]".into()));
        }
        if self.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::Config("excitation knot times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Samples in the output record.
    pub fn samples(&self) -> usize {
        (self.duration_s * self.rate_hz).round() as usize
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|(kt, _)| *kt <= t);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[i - 1].1;
        }
        let ((t0, e0), (t1, e1)) = (k[i - 1], k[i]);
        e0 + (t - t0) / (t1 - t0) * (e1 - e0)
    }
}

/// Sorted spike times in seconds, one list per motor neuron.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpikeTrainSet(pub Vec<Vec<f64>>);

impl SpikeTrainSet {
    pub fn total(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Spike lists concatenated per unit and re-sorted.
    pub fn union(&self, other: &SpikeTrainSet) -> SpikeTrainSet {
        let n = self.0.len().max(other.0.len());
        SpikeTrainSet(
            (0..n)
                .map(|i| {
                    let mut v: Vec<f64> = self.0.get(i).into_iter().chain(other.0.get(i)).flatten().copied().collect();
                    v.sort_by(f64::total_cmp);
                    v
                })
                .collect(),
        )
    }
}

fn train_for(pool: &PoolConfig, exc: &ExcitationProfile, i: usize) -> Vec<f64> {
    let rte = pool.threshold(i);
    let mut rng = ChaCha8Rng::seed_from_u64(pool.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let dt = 1.0 / exc.rate_hz;
    let mut spikes = Vec::new();
    let mut t = 0.0;
    let mut active = false;
    while t < exc.duration_s {
        let Some(r) = pool.rate(exc.at(t), rte) else {
            active = false;
            t += dt;
            continue;
        };
        if !active {
            // Random phase at recruitment.
            active = true;
            t += rng.random::<f64>() / r;
            continue;
        }
        spikes.push(t);
        let jitter: f64 = rng.sample(StandardNormal);
        t += (1.0 + pool.isi_cov * jitter).max(0.25) / r;
    }
    spikes
}

/// Spike trains for every neuron of the pool under `exc`.
pub fn generate_spike_trains(pool: &PoolConfig, exc: &ExcitationProfile, exec: Exec) -> Result<SpikeTrainSet> {
    pool.validate()?;
    exc.validate()?;
    Ok(SpikeTrainSet(par::map(exec, pool.n, |i| train_for(pool, exc, i))))
}
