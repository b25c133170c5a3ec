use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Grads, Init, Linear, ParamSet};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::train::RmsProp;

/// Hidden-layer counts the regressor accepts.
pub const LAYER_RANGE: std::ops::RangeInclusive<usize> = 2..=6;
pub const MIN_EXAMPLES: usize = 100;

/// Relative-error thresholds 0.01, 0.02, ..., 0.10.
pub fn thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (i + 1) as f64 / 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressorConfig {
    pub hidden_layers: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
    /// Fraction of pairs held out for scoring.
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            hidden_layers: 2,
            width: 256,
            epochs: 200,
            batch: 32,
            lr: 1e-3,
            decay: 0.99,
            eps: 1e-8,
            test_frac: 0.2,
            seed: 0,
        }
    }
}

impl RegressorConfig {
    pub fn validate(&self) -> Result<()> {
        if !LAYER_RANGE.contains(&self.hidden_layers) {
            return Err(Error::Config(format!("regressor needs 2 to 6 hidden layers, got {}", self.hidden_layers)));
        }
        if self.width == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(Error::Config("regressor width, epochs and batch must be positive".into()));
        }
        if !(self.test_frac > 0.0 && self.test_frac < 1.0) || !(self.lr > 0.0) {
            return Err(Error::Config("regressor needs test_frac in (0, 1) and lr > 0".into()));
        }
        Ok(())
    }
}

/// Per-condition scores (mean accuracy over the ten thresholds, in `[0, 1]`)
/// and their median.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Informativeness {
    pub scores: [f64; 6],
    pub median: f64,
    /// The same pipeline with conditions shuffled against latents.
    pub chance: Option<[f64; 6]>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Fraction of predictions within each relative-error threshold, averaged.
pub fn threshold_accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    let taus = thresholds();
    let hits: usize = taus
        .iter()
        .map(|tau| pred.iter().zip(truth).filter(|(p, t)| (*p - *t).abs() <= tau * t.abs()).count())
        .sum();
    hits as f64 / (taus.len() * truth.len()) as f64
}

struct Mlp {
    layers: Vec<Linear>,
    ps: ParamSet<f64>,
}

impl Mlp {
    fn new(inputs: usize, rc: &RegressorConfig, seed: u64) -> Result<Self> {
        let mut ps = ParamSet::new();
        let mut init = Init::new(seed);
        let mut layers = Vec::new();
        let mut n = inputs;
        for i in 0..rc.hidden_layers {
            layers.push(Linear::new(&mut ps, &mut init, &format!("h{i}"), n, rc.width)?);
            n = rc.width;
        }
        layers.push(Linear::new(&mut ps, &mut init, "out", n, 1)?);
        Ok(Mlp { layers, ps })
    }

    /// Activations after every layer; tanh on hidden layers.
    fn forward(&self, x: &[f64], rows: usize) -> Result<Vec<Vec<f64>>> {
        let mut acts = vec![x.to_vec()];
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = l.forward_batch(&self.ps, acts.last().expect("non-empty"), rows)?;
            if i + 1 < self.layers.len() {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        Ok(acts)
    }

    fn grads(&self, acts: &[Vec<f64>], target: &[f64]) -> Grads<f64> {
        let rows = target.len();
        let mut g = self.ps.zero_grads();
        let out = acts.last().expect("non-empty");
        let mut d: Vec<f64> = out.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / rows as f64).collect();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let dx = l.backward_batch(&self.ps, &acts[i], &d, rows, &mut g, i > 0);
            if let Some(dx) = dx {
                // acts[i] holds tanh outputs; tanh' = 1 - y^2.
                d = dx.iter().zip(&acts[i]).map(|(g, y)| g * (1.0 - y * y)).collect();
            }
        }
        g
    }
}

/// Column-wise z-score from the training rows.
fn standardize(x: &mut [f64], dim: usize, train: &[usize]) {
    for j in 0..dim {
        let n = train.len() as f64;
        let mean = train.iter().map(|&i| x[i * dim + j]).sum::<f64>() / n;
        let sd = (train.iter().map(|&i| (x[i * dim + j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for i in 0..x.len() / dim {
            x[i * dim + j] = (x[i * dim + j] - mean) / sd;
        }
    }
}

fn gather(x: &[f64], dim: usize, rows: &[usize]) -> Vec<f64> {
    rows.iter().flat_map(|&i| x[i * dim..(i + 1) * dim].iter().copied()).collect()
}

/// Trains one regressor for a single target column and scores the test rows.
fn fit_and_score(x: &[f64], dim: usize, y: &[f64], train: &[usize], test: &[usize], rc: &RegressorConfig, seed: u64) -> Result<f64> {
    // Targets are z-scored on the training rows and mapped back for scoring.
    let mean = train.iter().map(|&i| y[i]).sum::<f64>() / train.len() as f64;
    let sd = (train.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / train.len() as f64).sqrt().max(1e-12);
    let mut net = Mlp::new(dim, rc, seed)?;
    let mut opt = RmsProp::new(&net.ps, rc.lr, rc.decay, rc.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut order = train.to_vec();
    for _ in 0..rc.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(rc.batch) {
            let xb = gather(x, dim, chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| (y[i] - mean) / sd).collect();
            let acts = net.forward(&xb, chunk.len())?;
            let g = net.grads(&acts, &yb);
            opt.step(&mut net.ps, &g);
        }
    }
    let mut pred = net.forward(&gather(x, dim, test), test.len())?.pop().expect("non-empty");
    pred.iter_mut().for_each(|p| *p = *p * sd + mean);
    let truth: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    Ok(threshold_accuracy(&pred, &truth))
}

/// Regresses each of the six conditions from the latent means with a fresh
/// MLP and scores held-out pairs. With `with_chance`, the same is repeated
/// with conditions permuted across pairs to estimate the chance level.
pub fn informativeness(
    latents: &[Vec<f64>],
    conditions: &[[f64; 6]],
    rc: &RegressorConfig,
    with_chance: bool,
    exec: Exec,
) -> Result<Informativeness> {
    rc.validate()?;
    let n = latents.len();
    if n != conditions.len() {
        return Err(Error::Shape(format!("{n} latents but {} condition vectors", conditions.len())));
    }
    if n < MIN_EXAMPLES {
        return Err(Error::InvalidInput(format!("informativeness needs at least {MIN_EXAMPLES} pairs, got {n}")));
    }
    let dim = latents[0].len();
    if dim == 0 || latents.iter().any(|z| z.len() != dim) {
        return Err(Error::Shape("latents must share one non-zero length".into()));
    }
    for a in 0..6 {
        let first = conditions[0][a];
        if conditions.iter().all(|c| c[a] == first) {
            return Err(Error::InvalidInput(format!("condition {a} is constant; nothing to regress")));
        }
    }
    let mut x: Vec<f64> = latents.iter().flatten().copied().collect();
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(rc.seed));
    let n_test = ((n as f64 * rc.test_frac).round() as usize).clamp(1, n - 1);
    let (test, train) = rows.split_at(n_test);
    standardize(&mut x, dim, train);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(rc.seed ^ 0x9e37_79b9));
    let jobs = if with_chance { 12 } else { 6 };
    let results = par::try_map(exec, jobs, |j| {
        let axis = j % 6;
        let y: Vec<f64> = if j < 6 {
            conditions.iter().map(|c| c[axis]).collect()
        } else {
            perm.iter().map(|&p| conditions[p][axis]).collect()
        };
        fit_and_score(&x, dim, &y, train, test, rc, rc.seed.wrapping_add(axis as u64 + 1))
    })?;
    let scores: [f64; 6] = std::array::from_fn(|a| results[a]);
    let chance = with_chance.then(|| std::array::from_fn(|a| results[6 + a]));
    Ok(Informativeness { scores, median: median(&scores), chance })
}
