use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LatentStats;
use crate::tensor::Float;

/// How the KL weight ramps up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Constant,
    #[default]
    Linear,
    Logistic,
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Schedule::Constant),
            "linear" => Ok(Schedule::Linear),
            "logistic" => Ok(Schedule::Logistic),
            _ => Err(Error::InvalidInput(format!("unknown schedule {s:?} (constant, linear, logistic)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2_max: f64,
    pub lambda3: f64,
    pub schedule: Schedule,
    /// Logistic steepness, per epoch.
    pub k: f64,
    /// Logistic midpoint, in epochs.
    pub x0: f64,
    /// Linear ramp length, in iterations.
    pub n: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda1: 10.0, lambda2_max: 0.05, lambda3: 0.5, schedule: Schedule::Linear, k: 1.0, x0: 6.0, n: 30000.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2_max, self.lambda3, self.k, self.x0, self.n];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("loss weights must be finite".into()));
        }
        if self.lambda1 < 0.0 || self.lambda2_max < 0.0 || self.lambda3 < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.schedule == Schedule::Linear && self.n <= 0.0 {
            return Err(Error::Config("linear schedule length must be positive".into()));
        }
        Ok(())
    }
}

/// KL weight at a given iteration and epoch (both zero-based).
pub fn kl_anneal_weight(iteration: u64, epoch: usize, w: &LossWeights) -> f64 {
    let base = match w.schedule {
        Schedule::Constant => 1.0,
        Schedule::Linear => (iteration as f64 / w.n).clamp(0.0, 1.0),
        Schedule::Logistic => 1.0 / (1.0 + (-w.k * (epoch as f64 - w.x0)).exp()),
    };
    w.lambda2_max * base
}

/// Mean over latent dims and batch of `-(1 + logvar - mu^2 - exp(logvar)) / 2`.
pub fn kl_loss<F: Float>(stats: &[LatentStats<F>]) -> F {
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in stats {
        for (&m, &lv) in s.mu.iter().zip(&s.logvar) {
            let (m, lv) = (m.as_f64(), lv.as_f64());
            sum += -(1.0 + lv - m * m - lv.exp()) / 2.0;
            n += 1;
        }
    }
    F::from_f64(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// `(d/dmu, d/dlogvar)` of one sample's KL term, scaled by `scale`.
pub fn kl_grad<F: Float>(s: &LatentStats<F>, scale: F) -> (Vec<F>, Vec<F>) {
    let half = F::from_f64(0.5);
    let dmu = s.mu.iter().map(|&m| m * scale).collect();
    let dlv = s.logvar.iter().map(|&lv| half * (lv.exp() - F::one()) * scale).collect();
    (dmu, dlv)
}

/// `0.1 * ((1 - rho_r)^2 + (rho_f1^2 + rho_f2^2) / 2)`, averaged over the batch.
pub fn d_loss<F: Float>(rho_r: &[F], rho_f1: &[F], rho_f2: &[F]) -> F {
    let n = rho_r.len();
    assert!(n == rho_f1.len() && n == rho_f2.len(), "score batches differ in length");
    let mut sum = F::zero();
    for i in 0..n {
        sum += d_loss_one(rho_r[i], rho_f1[i], rho_f2[i]);
    }
    sum / F::from_f64(n.max(1) as f64)
}

pub(crate) fn d_loss_one<F: Float>(r: F, f1: F, f2: F) -> F {
    let one = F::one();
    let two = F::from_f64(2.0);
    F::from_f64(0.1) * ((one - r) * (one - r) + (f1 * f1 + f2 * f2) / two)
}

/// Adversarial term `(1 - rho)^2` averaged over the batch.
pub fn gan_loss<F: Float>(rho: &[F]) -> F {
    let mut sum = F::zero();
    for &r in rho {
        sum += (F::one() - r) * (F::one() - r);
    }
    sum / F::from_f64(rho.len().max(1) as f64)
}

/// Mean squared error.
pub fn mse<F: Float>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len());
    let mut sum = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        sum += (x - y) * (x - y);
    }
    sum / F::from_f64(a.len().max(1) as f64)
}

/// Generator loss components of one batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GLosses {
    pub gan: f64,
    pub kl: f64,
    pub cyclic: f64,
    pub total: f64,
}

impl GLosses {
    pub fn combine(gan: f64, kl: f64, cyclic: f64, w: &LossWeights, lambda2: f64) -> Self {
        GLosses { gan, kl, cyclic, total: w.lambda1 * gan + lambda2 * kl + w.lambda3 * cyclic }
    }
}
