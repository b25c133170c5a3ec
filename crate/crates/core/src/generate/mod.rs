//! Inference: morphing, sampling from the prior, condition sweeps and the
//! traversal / extrapolation experiments.

mod path;

pub use path::ConditionPath;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{ConditionVector, Dataset, Record};
use crate::error::{Error, Result};
use crate::eval::nrmse;
use crate::model::{cond_array, Model};
use crate::par::{self, Exec};
use crate::teacher::ConditionAxis;
use crate::tensor::{Float, Tensor4};

/// Decodes the encoder mean of `x` at conditions `cs`. No randomness.
pub fn morph<F: Float>(model: &Model<F>, x: &Tensor4<F>, cs: &ConditionVector) -> Result<Tensor4<F>> {
    let z = model.encode(x)?.mu;
    model.decode(&z, &cond_array::<F>(cs))
}

/// Standard-normal latent drawn from `seed`.
pub fn prior_latent<F: Float>(latent: usize, seed: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..latent).map(|_| F::from_f64(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// Decodes a prior draw at conditions `cs`.
pub fn sample<F: Float>(model: &Model<F>, cs: &ConditionVector, seed: u64) -> Result<Tensor4<F>> {
    model.decode(&prior_latent(model.config.latent, seed), &cond_array::<F>(cs))
}

/// Where a sweep's latent comes from.
#[derive(Clone, Debug)]
pub enum Origin<F> {
    /// Encoder mean of a sample.
    Encoded(Tensor4<F>),
    /// Prior draw with this seed.
    Prior(u64),
    Latent(Vec<F>),
}

impl<F: Float> Origin<F> {
    pub fn latent(&self, model: &Model<F>) -> Result<Vec<F>> {
        match self {
            Origin::Encoded(x) => Ok(model.encode(x)?.mu),
            Origin::Prior(seed) => Ok(prior_latent(model.config.latent, *seed)),
            Origin::Latent(z) => {
                if z.len() != model.config.latent {
                    return Err(Error::Shape(format!("latent of length {}, model uses {}", z.len(), model.config.latent)));
                }
                Ok(z.clone())
            }
        }
    }
}

/// Condition at each of `steps` evenly spaced path fractions.
pub fn sweep_conditions(path: &ConditionPath, steps: usize) -> Result<Vec<ConditionVector>> {
    if steps < 2 {
        return Err(Error::Config(format!("a sweep needs at least 2 steps, got {steps}")));
    }
    Ok((0..steps).map(|i| path.at(i as f64 / (steps - 1) as f64)).collect())
}

/// Decodes one latent along `path`. The origin is encoded once.
pub fn sweep<F: Float>(
    model: &Model<F>,
    origin: &Origin<F>,
    path: &ConditionPath,
    steps: usize,
    exec: Exec,
) -> Result<Vec<Tensor4<F>>> {
    let conds = sweep_conditions(path, steps)?;
    let z = origin.latent(model)?;
    par::try_map(exec, conds.len(), |i| model.decode(&z, &cond_array::<F>(&conds[i])))
}

/// One row of a sweep / traversal / extrapolation output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMeta {
    pub step: usize,
    pub conditions: ConditionVector,
    pub distance: f64,
    pub nrmse: Option<f64>,
}

pub fn write_steps_csv<W: Write>(mut w: W, rows: &[StepMeta]) -> Result<()> {
    write!(w, "step")?;
    for a in ConditionAxis::ALL {
        write!(w, ",{a}")?;
    }
    writeln!(w, ",distance,nrmse")?;
    for r in rows {
        write!(w, "{}", r.step)?;
        for v in r.conditions.0 {
            write!(w, ",{v}")?;
        }
        match r.nrmse {
            Some(e) => writeln!(w, ",{},{e}", r.distance)?,
            None => writeln!(w, ",{},", r.distance)?,
        }
    }
    Ok(())
}

/// Packs generated tensors into the dataset record layout.
pub fn to_records<F: Float>(
    like: &Dataset,
    mu_id: u32,
    tensors: &[Tensor4<F>],
    conds: &[ConditionVector],
) -> Result<Dataset> {
    let mut d = Dataset::empty(like.rows, like.cols, like.samples, like.ranges);
    for (t, c) in tensors.iter().zip(conds) {
        if t.len() != d.record_len() {
            return Err(Error::Shape(format!("generated tensor {:?} does not fit the record layout", t.shape())));
        }
        d.records.push(Record {
            mu_id,
            muscle_label: 0,
            conditions: *c,
            data: t.data().iter().map(|v| v.as_f64() as f32).collect(),
        });
    }
    d.mu_count = usize::from(!d.records.is_empty());
    Ok(d)
}

/// Ground-truth record of unit `mu` at conditions `c`, if the grid holds one.
fn find_record(d: &Dataset, mu: u32, c: &ConditionVector) -> Option<usize> {
    d.records.iter().position(|r| r.mu_id == mu && r.conditions.distance(c) < 1e-9)
}

/// Distinct values one condition axis takes for a unit, ascending.
fn axis_values(d: &Dataset, mu: u32, axis: ConditionAxis) -> Vec<f64> {
    let mut v: Vec<f64> = d.records.iter().filter(|r| r.mu_id == mu).map(|r| r.conditions.get(axis)).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraversalPlan {
    pub mu_id: u32,
    /// Record index of the origin sample (condition A).
    pub origin: usize,
    pub path: ConditionPath,
}

/// For each unit: A, B, C are consecutive grid values along `axis` with the
/// other conditions held at the origin record's, picked so the two legs are
/// as close to equal length as the grid allows.
pub fn traversal_plans(d: &Dataset, mu_ids: &[u32], axis: ConditionAxis) -> Result<Vec<TraversalPlan>> {
    let mut plans = Vec::with_capacity(mu_ids.len());
    for &mu in mu_ids {
        let vals = axis_values(d, mu, axis);
        if vals.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "unit {mu} has {} distinct {axis} values; a traversal needs 3",
                vals.len()
            )));
        }
        let best = (0..vals.len() - 2)
            .min_by(|&i, &j| {
                let skew = |k: usize| ((vals[k + 1] - vals[k]) - (vals[k + 2] - vals[k + 1])).abs();
                skew(i).total_cmp(&skew(j))
            })
            .expect("at least one triple");
        let first = d
            .records
            .iter()
            .position(|r| r.mu_id == mu && (r.conditions.get(axis) - vals[best]).abs() < 1e-12)
            .expect("value taken from the unit's records");
        let a = d.records[first].conditions;
        let b = a.with(axis, vals[best + 1]);
        let c = a.with(axis, vals[best + 2]);
        if find_record(d, mu, &b).is_none() || find_record(d, mu, &c).is_none() {
            return Err(Error::InvalidInput(format!("unit {mu} lacks ground truth along {axis}")));
        }
        plans.push(TraversalPlan { mu_id: mu, origin: first, path: ConditionPath::new(vec![(0.0, a), (0.5, b), (1.0, c)])? });
    }
    Ok(plans)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraversalResult {
    /// Per-unit step metadata with nRMSE where ground truth exists.
    pub per_unit: Vec<(u32, Vec<StepMeta>)>,
    /// Mean nRMSE over units at each step, `None` where no unit has ground truth.
    pub mean_curve: Vec<Option<f64>>,
}

/// Encodes each unit's sample at A and sweeps A -> B -> C with `2 * legs + 1`
/// steps, scoring every step that lands on a grid point.
pub fn traversal_experiment<F: Float>(
    model: &Model<F>,
    d: &Dataset,
    plans: &[TraversalPlan],
    legs: usize,
    exec: Exec,
) -> Result<TraversalResult> {
    if legs == 0 {
        return Err(Error::Config("a traversal needs at least one step per leg".into()));
    }
    let steps = 2 * legs + 1;
    let per_unit = par::try_map(exec, plans.len(), |p| {
        let plan = &plans[p];
        let origin = Origin::Encoded(d.tensor(plan.origin).cast::<F>());
        let outs = sweep(model, &origin, &plan.path, steps, Exec::Sequential)?;
        let conds = sweep_conditions(&plan.path, steps)?;
        let a = conds[0];
        let rows = outs
            .iter()
            .zip(&conds)
            .enumerate()
            .map(|(i, (y, c))| {
                let nrmse = match find_record(d, plan.mu_id, c) {
                    Some(r) => Some(nrmse(&d.records[r].data, y.data())?),
                    None => None,
                };
                Ok(StepMeta { step: i, conditions: *c, distance: a.distance(c), nrmse })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((plan.mu_id, rows))
    })?;
    let mean_curve = (0..steps)
        .map(|s| {
            let v: Vec<f64> = per_unit.iter().filter_map(|(_, rows)| rows[s].nrmse).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    Ok(TraversalResult { per_unit, mean_curve })
}

pub fn write_curve_csv<W: Write>(mut w: W, curve: &[Option<f64>]) -> Result<()> {
    writeln!(w, "step,mean_nrmse")?;
    for (i, v) in curve.iter().enumerate() {
        match v {
            Some(e) => writeln!(w, "{i},{e}")?,
            None => writeln!(w, "{i},")?,
        }
    }
    Ok(())
}

/// One generated sample with its relative distance from the base conditions.
#[derive(Clone, Debug)]
pub struct TaggedSample<F> {
    pub conditions: ConditionVector,
    pub distance: f64,
    pub tensor: Tensor4<F>,
}

/// `n` samples at `base * (1 + d)` for `d` evenly spaced over
/// `[0, max_distance]`, all from one latent.
pub fn extrapolation_set<F: Float>(
    model: &Model<F>,
    origin: &Origin<F>,
    base: &ConditionVector,
    max_distance: f64,
    n: usize,
    exec: Exec,
) -> Result<Vec<TaggedSample<F>>> {
    if n == 0 || !(max_distance >= 0.0 && max_distance.is_finite()) {
        return Err(Error::Config(format!("extrapolation needs n >= 1 and a finite distance >= 0, got {n} and {max_distance}")));
    }
    let z = origin.latent(model)?;
    par::try_map(exec, n, |i| {
        let distance = if n == 1 { max_distance } else { max_distance * i as f64 / (n - 1) as f64 };
        let conditions = ConditionVector(base.0.map(|v| v * (1.0 + distance)));
        let tensor = model.decode(&z, &cond_array::<F>(&conditions))?;
        Ok(TaggedSample { conditions, distance, tensor })
    })
}
