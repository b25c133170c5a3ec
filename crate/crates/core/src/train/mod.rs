//! Alternating discriminator/generator training.

mod losses;
mod optim;

pub use losses::{d_loss, gan_loss, kl_anneal_weight, kl_grad, kl_loss, mse, GLosses, LossWeights, Schedule};
pub use optim::RmsProp;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{reparameterize, reparameterize_backward, Grads};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{save_checkpoint, Model};
use crate::par::{self, Exec};
use crate::tensor::{Float, Tensor4};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// RMSprop moving-average decay.
    pub decay: f64,
    pub eps: f64,
    pub weights: LossWeights,
    /// Defaults to one pass over the training split.
    pub iterations_per_epoch: Option<usize>,
    /// Hard cap on total iterations across all epochs.
    pub max_iterations: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-5,
            batch: 32,
            epochs: 45,
            seed: 0,
            decay: 0.99,
            eps: 1e-8,
            weights: LossWeights::default(),
            iterations_per_epoch: None,
            max_iterations: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 || self.iterations_per_epoch == Some(0) {
            return Err(Error::Config("training needs at least one epoch of one iteration".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.decay) || !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "optimizer settings out of range (lr {}, decay {}, eps {})",
                self.lr, self.decay, self.eps
            )));
        }
        self.weights.validate()
    }
}

/// One training example with every random draw it needs.
#[derive(Clone, Debug)]
pub struct BatchItem<F> {
    pub index: usize,
    pub x0: Tensor4<F>,
    pub c0: [F; 6],
    /// Conditions of another sample of the same motor unit.
    pub cs: [F; 6],
    /// Uniform random conditions in the normalized band.
    pub cr: [F; 6],
    pub noise: Vec<F>,
    pub cycle_noise: Vec<F>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub iteration: u64,
    pub epoch: usize,
    pub d: f64,
    pub g: GLosses,
    pub lambda2: f64,
}

pub const METRICS_HEADER: &str = "iteration,epoch,L_D,L_GAN,L_KL,L_cyclic,L_G,lambda2,seconds";

pub struct Trainer<'a, F> {
    pub model: Model<F>,
    pub cfg: TrainConfig,
    data: &'a Dataset,
    train: Vec<usize>,
    by_mu: BTreeMap<u32, Vec<usize>>,
    opt_g: RmsProp<F>,
    opt_d: RmsProp<F>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    batch_in_epoch: usize,
    iteration: u64,
    epoch: usize,
    exec: Exec,
}

fn conds<F: Float>(v: &[f64]) -> [F; 6] {
    std::array::from_fn(|i| F::from_f64(v[i]))
}

impl<'a, F: Float> Trainer<'a, F> {
    /// `train` holds record indices into `data`.
    pub fn new(model: Model<F>, data: &'a Dataset, train: Vec<usize>, cfg: TrainConfig, exec: Exec) -> Result<Self> {
        cfg.validate()?;
        let mc = &model.config;
        if (mc.rows, mc.cols, mc.samples) != (data.rows, data.cols, data.samples) {
            return Err(Error::Shape(format!(
                "model grid {}x{}x{} does not match dataset {}x{}x{}",
                mc.rows, mc.cols, mc.samples, data.rows, data.cols, data.samples
            )));
        }
        if train.is_empty() {
            return Err(Error::InvalidInput("training split is empty".into()));
        }
        if let Some(&bad) = train.iter().find(|&&i| i >= data.records.len()) {
            return Err(Error::InvalidInput(format!("training index {bad} outside the dataset")));
        }
        let mut by_mu: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for &i in &train {
            by_mu.entry(data.records[i].mu_id).or_default().push(i);
        }
        let opt_g = RmsProp::new(&model.gen, cfg.lr, cfg.decay, cfg.eps);
        let opt_d = RmsProp::new(&model.disc, cfg.lr, cfg.decay, cfg.eps);
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Trainer {
            model,
            cfg,
            data,
            train,
            by_mu,
            opt_g,
            opt_d,
            rng,
            order: Vec::new(),
            batch_in_epoch: 0,
            iteration: 0,
            epoch: 0,
            exec,
        })
    }

    pub fn iterations_per_epoch(&self) -> usize {
        self.cfg.iterations_per_epoch.unwrap_or_else(|| self.train.len().div_ceil(self.cfg.batch))
    }

    pub fn total_iterations(&self) -> u64 {
        let full = (self.cfg.epochs * self.iterations_per_epoch()) as u64;
        self.cfg.max_iterations.map_or(full, |m| m.min(full))
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn lambda2(&self) -> f64 {
        kl_anneal_weight(self.iteration, self.epoch, &self.cfg.weights)
    }

    /// Draws the next mini-batch; reshuffles the split at epoch boundaries.
    pub fn draw_batch(&mut self) -> Vec<BatchItem<F>> {
        if self.batch_in_epoch == 0 {
            self.order = self.train.clone();
            self.order.shuffle(&mut self.rng);
        }
        let n = self.order.len();
        let latent = self.model.config.latent;
        let start = self.batch_in_epoch * self.cfg.batch;
        let mut items = Vec::with_capacity(self.cfg.batch);
        for j in 0..self.cfg.batch {
            let index = self.order[(start + j) % n];
            let rec = &self.data.records[index];
            let peers = &self.by_mu[&rec.mu_id];
            let partner = if peers.len() > 1 {
                let k = self.rng.random_range(0..peers.len() - 1);
                let p = peers[k];
                if p == index {
                    peers[peers.len() - 1]
                } else {
                    p
                }
            } else {
                index
            };
            let cr: Vec<f64> = (0..6).map(|_| self.rng.random_range(0.5..=1.0)).collect();
            let mut normal = || F::from_f64(self.rng.sample::<f64, _>(StandardNormal));
            let noise = (0..latent).map(|_| normal()).collect();
            let cycle_noise = (0..latent).map(|_| normal()).collect();
            items.push(BatchItem {
                index,
                x0: self.data.tensor(index).cast(),
                c0: conds(rec.conditions.as_slice()),
                cs: conds(self.data.records[partner].conditions.as_slice()),
                cr: conds(&cr),
                noise,
                cycle_noise,
            });
        }
        self.batch_in_epoch += 1;
        items
    }

    /// One discriminator update. Generator parameters are read only.
    pub fn discriminator_step(&mut self, batch: &[BatchItem<F>]) -> Result<f64> {
        let (loss, grads) = self.discriminator_grads(batch)?;
        self.opt_d.step(&mut self.model.disc, &grads);
        Ok(loss)
    }

    /// Batch-mean discriminator loss and its gradient.
    pub fn discriminator_grads(&self, batch: &[BatchItem<F>]) -> Result<(f64, Grads<F>)> {
        let m = &self.model;
        let scale = F::one() / F::from_f64(batch.len() as f64);
        let mut total = m.disc.zero_grads();
        let mut loss = 0.0;
        par::for_each_ordered(
            self.exec,
            batch.len(),
            |i| {
                let it = &batch[i];
                let (stats, _) = m.encoder.forward(&m.gen, &it.x0)?;
                let z = reparameterize(&stats.mu, &stats.logvar, &it.noise);
                let (fake, _) = m.decoder.forward(&m.gen, &z, &it.cs)?;
                let (r, real_cache) = m.discriminator.forward(&m.disc, &it.x0, &it.c0)?;
                let (f1, fake_cache) = m.discriminator.forward(&m.disc, &fake, &it.cs)?;
                let (f2, wrong_cache) = m.discriminator.forward(&m.disc, &it.x0, &it.cr)?;
                let mut g = m.disc.zero_grads();
                let tenth = F::from_f64(0.1);
                let two = F::from_f64(2.0);
                m.discriminator.backward(&m.disc, &real_cache, -two * tenth * (F::one() - r) * scale, Some(&mut g), false);
                m.discriminator.backward(&m.disc, &fake_cache, tenth * f1 * scale, Some(&mut g), false);
                m.discriminator.backward(&m.disc, &wrong_cache, tenth * f2 * scale, Some(&mut g), false);
                Ok((losses::d_loss_one(r, f1, f2).as_f64(), g))
            },
            |_, (l, g): (f64, Grads<F>)| {
                loss += l;
                total.accumulate(&g);
                Ok(())
            },
        )?;
        loss /= batch.len() as f64;
        if !loss.is_finite() || !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "discriminator step at iteration {}: L_D = {loss}",
                self.iteration
            )));
        }
        Ok((loss, total))
    }

    /// One generator update against the current discriminator, which is read only.
    pub fn generator_step(&mut self, batch: &[BatchItem<F>], lambda2: f64) -> Result<GLosses> {
        let (losses, grads) = self.generator_grads(batch, lambda2)?;
        self.opt_g.step(&mut self.model.gen, &grads);
        Ok(losses)
    }

    /// Batch generator losses and the gradient of their weighted sum.
    pub fn generator_grads(&self, batch: &[BatchItem<F>], lambda2: f64) -> Result<(GLosses, Grads<F>)> {
        let m = &self.model;
        let w = &self.cfg.weights;
        let b = batch.len() as f64;
        let latent = m.config.latent as f64;
        let k_gan = F::from_f64(w.lambda1 / b);
        let k_kl = F::from_f64(lambda2 / (b * latent));
        let mut total = m.gen.zero_grads();
        let mut sums = [0.0f64; 3];
        par::for_each_ordered(
            self.exec,
            batch.len(),
            |i| {
                let it = &batch[i];
                let (s0, enc0) = m.encoder.forward(&m.gen, &it.x0)?;
                let z0 = reparameterize(&s0.mu, &s0.logvar, &it.noise);
                let (fake, dec0) = m.decoder.forward(&m.gen, &z0, &it.cs)?;
                let (rho, dcache) = m.discriminator.forward(&m.disc, &fake, &it.cs)?;
                let (s1, enc1) = m.encoder.forward(&m.gen, &fake)?;
                let z1 = reparameterize(&s1.mu, &s1.logvar, &it.cycle_noise);
                let (rec, dec1) = m.decoder.forward(&m.gen, &z1, &it.c0)?;

                let gan = (F::one() - rho) * (F::one() - rho);
                let cyc = mse(it.x0.data(), rec.data());
                let kl = kl_loss(std::slice::from_ref(&s0));

                let mut g = m.gen.zero_grads();
                let k_cyc = F::from_f64(w.lambda3 * 2.0 / (rec.len() as f64 * b));
                let mut drec = rec;
                for (d, &x) in drec.data_mut().iter_mut().zip(it.x0.data()) {
                    *d = (*d - x) * k_cyc;
                }
                let dz1 = m.decoder.backward(&m.gen, &dec1, &drec, Some(&mut g));
                let (dmu1, dlv1) = reparameterize_backward(&s1.logvar, &it.cycle_noise, &dz1);
                let mut dfake = m.encoder.backward(&m.gen, &enc1, &dmu1, &dlv1, Some(&mut g), true).expect("dx requested");
                let dgan = -F::from_f64(2.0) * (F::one() - rho) * k_gan;
                let dfake_gan = m.discriminator.backward(&m.disc, &dcache, dgan, None, true).expect("dx requested");
                dfake.add_assign(&dfake_gan);
                let dz0 = m.decoder.backward(&m.gen, &dec0, &dfake, Some(&mut g));
                let (mut dmu0, mut dlv0) = reparameterize_backward(&s0.logvar, &it.noise, &dz0);
                let (kmu, klv) = kl_grad(&s0, k_kl);
                for (a, b) in dmu0.iter_mut().zip(kmu) {
                    *a += b;
                }
                for (a, b) in dlv0.iter_mut().zip(klv) {
                    *a += b;
                }
                m.encoder.backward(&m.gen, &enc0, &dmu0, &dlv0, Some(&mut g), false);
                Ok(([gan.as_f64(), kl.as_f64(), cyc.as_f64()], g))
            },
            |_, (l, g): ([f64; 3], Grads<F>)| {
                for (s, v) in sums.iter_mut().zip(l) {
                    *s += v;
                }
                total.accumulate(&g);
                Ok(())
            },
        )?;
        let [gan, kl, cyc] = sums.map(|s| s / b);
        let losses = GLosses::combine(gan, kl, cyc, w, lambda2);
        if !losses.total.is_finite() || !total.is_finite() {
            return Err(Error::NonFinite(format!(
                "generator step at iteration {}: L_GAN = {gan}, L_KL = {kl}, L_cyclic = {cyc}",
                self.iteration
            )));
        }
        Ok((losses, total))
    }

    /// Draws a batch, updates D then G, and advances the counters.
    pub fn step(&mut self) -> Result<StepLosses> {
        let batch = self.draw_batch();
        let lambda2 = self.lambda2();
        let d = self.discriminator_step(&batch)?;
        let g = self.generator_step(&batch, lambda2)?;
        let out = StepLosses { iteration: self.iteration, epoch: self.epoch, d, g, lambda2 };
        self.iteration += 1;
        if self.batch_in_epoch == self.iterations_per_epoch() {
            self.batch_in_epoch = 0;
            self.epoch += 1;
        }
        Ok(out)
    }

    pub fn into_model(self) -> Model<F> {
        self.model
    }
}

/// What [`fit`] produced.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub iterations: u64,
    pub epochs: usize,
    pub last: Option<StepLosses>,
    /// Per-epoch checkpoints in epoch order, when an output directory was given.
    pub checkpoints: Vec<PathBuf>,
}

pub fn epoch_checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:03}.bmck")
}

pub const FINAL_CHECKPOINT: &str = "model.bmck";
pub const METRICS_FILE: &str = "metrics.csv";

/// Runs the configured number of iterations. With `out`, writes `metrics.csv`,
/// one checkpoint per epoch and a final `model.bmck`. `on_epoch` sees the model
/// after every completed epoch (and after a final partial one).
pub fn fit<F: Float>(
    trainer: &mut Trainer<'_, F>,
    out: Option<&Path>,
    mut on_epoch: impl FnMut(usize, &Model<F>) -> Result<()>,
) -> Result<TrainSummary> {
    let mut metrics = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(METRICS_FILE);
            let mut w = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
            writeln!(w, "{METRICS_HEADER}").map_err(|e| Error::io(&path, e))?;
            Some((path, w))
        }
        None => None,
    };
    let start = Instant::now();
    let total = trainer.total_iterations();
    let mut summary = TrainSummary { iterations: 0, epochs: 0, last: None, checkpoints: Vec::new() };
    let mut finish_epoch = |epoch: usize, t: &Trainer<'_, F>, s: &mut TrainSummary| -> Result<()> {
        if let Some(dir) = out {
            let path = dir.join(epoch_checkpoint_name(epoch));
            save_checkpoint(&path, &t.model, t.iteration)?;
            s.checkpoints.push(path);
        }
        s.epochs = epoch + 1;
        on_epoch(epoch, &t.model)
    };
    while trainer.iteration < total {
        let epoch = trainer.epoch;
        let l = trainer.step()?;
        if let Some((path, w)) = metrics.as_mut() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{:.3}",
                l.iteration,
                l.epoch,
                l.d,
                l.g.gan,
                l.g.kl,
                l.g.cyclic,
                l.g.total,
                l.lambda2,
                start.elapsed().as_secs_f64()
            )
            .map_err(|e| Error::io(&*path, e))?;
        }
        if l.iteration % 100 == 0 {
            log::info!(
                "iter {} epoch {}: L_D {:.4} L_GAN {:.4} L_KL {:.4} L_cyc {:.5} lambda2 {:.4}",
                l.iteration,
                l.epoch,
                l.d,
                l.g.gan,
                l.g.kl,
                l.g.cyclic,
                l.lambda2
            );
        }
        summary.last = Some(l);
        summary.iterations = trainer.iteration;
        if trainer.epoch != epoch || trainer.iteration == total {
            finish_epoch(epoch, trainer, &mut summary)?;
        }
    }
    if let Some((path, mut w)) = metrics {
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if let Some(dir) = out {
        save_checkpoint(&dir.join(FINAL_CHECKPOINT), &trainer.model, trainer.iteration)?;
    }
    Ok(summary)
}
