use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{denormalize_conditions, normalize_conditions, ConditionVector};
use crate::error::{Error, Result};
use crate::eval::informativeness::median;
use crate::generate::prior_latent;
use crate::model::{cond_array, Model};
use crate::teacher::{build_motor_unit, simulate_muap, ConditionAxis, ConditionRanges, CylinderConfig};
use crate::tensor::Float;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub fibre_counts: Vec<f64>,
    pub n_muaps: usize,
    pub n_conditions: usize,
    /// Each per-MUAP timing is the median of this many passes.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { fibre_counts: vec![100.0, 200.0, 300.0, 400.0], n_muaps: 4, n_conditions: 4, repeats: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub fibre_count: f64,
    pub generative_per_muap_s: f64,
    pub teacher_per_muap_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub muaps_per_row: usize,
    pub generative_total_s: f64,
    pub teacher_total_s: f64,
}

impl BenchReport {
    /// Teacher time over generative time.
    pub fn ratio(&self) -> f64 {
        self.teacher_total_s / self.generative_total_s
    }

    /// `(max - min) / mean` of the generative per-MUAP times.
    pub fn generative_spread(&self) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.generative_per_muap_s).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        (hi - lo) / mean
    }

    pub fn teacher_monotonic(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].teacher_per_muap_s > w[0].teacher_per_muap_s)
    }
}

/// Mean over tasks of each task's median time. Repeats sweep every row in
/// turn so slow drift of the host affects all rows alike.
fn median_per_task(repeats: usize, rows: usize, tasks: usize, mut f: impl FnMut(usize, usize) -> Result<()>) -> Result<Vec<f64>> {
    let mut times = vec![vec![Vec::with_capacity(repeats); tasks]; rows];
    for _ in 0..repeats.max(1) {
        for (r, row) in times.iter_mut().enumerate() {
            for (i, t_i) in row.iter_mut().enumerate() {
                let t = Instant::now();
                f(r, i)?;
                t_i.push(t.elapsed().as_secs_f64());
            }
        }
    }
    Ok(times.iter().map(|row| row.iter().map(|t| median(t)).sum::<f64>() / tasks as f64).collect())
}

/// Times decoding and teacher simulation of the same MUAP set at each fibre
/// count. Runs on the calling thread only. Each per-MUAP time is the median
/// of `repeats` passes.
pub fn throughput_bench<F: Float>(
    model: &Model<F>,
    cyl: &CylinderConfig,
    ranges: &ConditionRanges,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.fibre_counts.is_empty() || cfg.n_muaps == 0 || cfg.n_conditions == 0 {
        return Err(Error::Config("benchmark needs fibre counts, MUAPs and conditions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Shared draws: per-MUAP latent and teacher seed, per-condition values.
    let latents: Vec<Vec<F>> = (0..cfg.n_muaps).map(|i| prior_latent(model.config.latent, cfg.seed ^ i as u64)).collect();
    let seeds: Vec<u64> = (0..cfg.n_muaps).map(|_| rng.random()).collect();
    let base: Vec<ConditionVector> =
        (0..cfg.n_conditions).map(|_| ConditionVector(std::array::from_fn(|_| rng.random_range(0.5..=1.0)))).collect();
    let per_row = cfg.n_muaps * cfg.n_conditions;
    let phys: Vec<Vec<_>> = cfg
        .fibre_counts
        .iter()
        .map(|&nf| {
            base.iter()
                .map(|c| {
                    let mut p = denormalize_conditions(c, ranges);
                    p.fibre_count = nf;
                    p
                })
                .collect()
        })
        .collect();
    let conds: Vec<Vec<[F; 6]>> = phys
        .iter()
        .map(|row| row.iter().map(|p| normalize_conditions(p, ranges, true).map(|c| cond_array::<F>(&c))).collect())
        .collect::<Result<_>>()?;
    let nc = cfg.n_conditions;
    let rows_n = cfg.fibre_counts.len();
    let generative = median_per_task(cfg.repeats, rows_n, per_row, |r, i| {
        std::hint::black_box(model.decode(&latents[i / nc], &conds[r][i % nc])?);
        Ok(())
    })?;
    let teacher = median_per_task(cfg.repeats, rows_n, per_row, |r, i| {
        let p = &phys[r][i % nc];
        let g = build_motor_unit(cyl, p, seeds[i / nc])?;
        std::hint::black_box(simulate_muap(&g, p, cyl)?);
        Ok(())
    })?;
    let rows: Vec<BenchRow> = cfg
        .fibre_counts
        .iter()
        .zip(generative.iter().zip(&teacher))
        .map(|(&nf, (&g, &t))| BenchRow { fibre_count: nf, generative_per_muap_s: g, teacher_per_muap_s: t })
        .collect();
    let total = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| f(r) * per_row as f64).sum::<f64>();
    let generative_total_s = total(|r| r.generative_per_muap_s);
    let teacher_total_s = total(|r| r.teacher_per_muap_s);
    Ok(BenchReport { rows, muaps_per_row: per_row, generative_total_s, teacher_total_s })
}

pub fn write_bench_csv<W: Write>(mut w: W, r: &BenchReport) -> Result<()> {
    writeln!(w, "{},generative_per_muap_s,teacher_per_muap_s", ConditionAxis::FibreCount)?;
    for row in &r.rows {
        writeln!(w, "{},{:.6e},{:.6e}", row.fibre_count, row.generative_per_muap_s, row.teacher_per_muap_s)?;
    }
    Ok(())
}

pub fn write_bench_summary<W: Write>(mut w: W, r: &BenchReport) -> Result<()> {
    writeln!(w, "MUAPs per fibre count: {}", r.muaps_per_row)?;
    writeln!(w, "generative total: {:.3} s", r.generative_total_s)?;
    writeln!(w, "teacher total: {:.3} s", r.teacher_total_s)?;
    writeln!(w, "teacher / generative: {:.2}", r.ratio())?;
    writeln!(w, "generative per-MUAP spread across fibre counts: {:.1}%", 100.0 * r.generative_spread())?;
    writeln!(w, "teacher per-MUAP time increasing in fibre count: {}", r.teacher_monotonic())?;
    Ok(())
}
