//! Dataset generation: per-motor-unit condition grids simulated by the
//! teacher, decimated, energy-centred, normalized and persisted.

mod io;
mod preprocess;
mod split;

pub use io::{read_dataset, read_dataset_from, write_conditions_csv, write_dataset, write_dataset_to, DATASET_MAGIC, DATASET_VERSION};
pub use preprocess::{decimate, energy_centre, preprocess};
pub use split::{split, Split};

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::teacher::{build_motor_unit, simulate_muap, ConditionAxis, ConditionRanges, CylinderConfig, PhysioConditions};

/// Conditions mapped linearly so each range becomes `[0.5, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVector(pub [f64; 6]);

impl ConditionVector {
    pub fn get(&self, axis: ConditionAxis) -> f64 {
        self.0[axis as usize]
    }

    pub fn with(mut self, axis: ConditionAxis, v: f64) -> Self {
        self.0[axis as usize] = v;
        self
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn in_unit_band(&self) -> bool {
        self.0.iter().all(|v| (0.5..=1.0).contains(v))
    }

    /// Component-wise `a + t (b - a)`.
    pub fn lerp(&self, other: &ConditionVector, t: f64) -> ConditionVector {
        let mut out = [0.0; 6];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(&other.0)) {
            *o = a + t * (b - a);
        }
        ConditionVector(out)
    }

    pub fn distance(&self, other: &ConditionVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

pub fn normalize_conditions(p: &PhysioConditions, ranges: &ConditionRanges, allow_extrapolation: bool) -> Result<ConditionVector> {
    if !allow_extrapolation {
        ranges.contains(p)?;
    }
    let mut c = [0.0; 6];
    for (i, (v, (lo, hi))) in p.to_array().into_iter().zip(ranges.0).enumerate() {
        c[i] = 0.5 + 0.5 * (v - lo) / (hi - lo);
    }
    Ok(ConditionVector(c))
}

pub fn denormalize_conditions(c: &ConditionVector, ranges: &ConditionRanges) -> PhysioConditions {
    let mut p = [0.0; 6];
    for (i, (v, (lo, hi))) in c.0.iter().zip(ranges.0).enumerate() {
        p[i] = lo + (v - 0.5) * 2.0 * (hi - lo);
    }
    PhysioConditions::from_array(p)
}

/// Per-axis values whose cross product forms the condition grid of every
/// motor unit. Depth and medial-lateral position belong to the unit itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionGrid {
    pub fibre_count: Vec<f64>,
    pub nmj: Vec<f64>,
    pub velocity: Vec<f64>,
    pub length_ratio: Vec<f64>,
}

impl Default for ConditionGrid {
    fn default() -> Self {
        ConditionGrid {
            fibre_count: vec![120.0, 120.0 + 280.0 / 3.0, 120.0 + 560.0 / 3.0, 400.0],
            nmj: vec![0.4, 0.46, 0.53, 0.6],
            velocity: vec![3.0, 3.5, 4.0, 4.5],
            length_ratio: vec![0.85, 0.95, 1.05, 1.15],
        }
    }
}

impl ConditionGrid {
    pub fn len(&self) -> usize {
        self.fibre_count.len() * self.nmj.len() * self.velocity.len() * self.length_ratio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `i` in lexicographic order (fibre count slowest, length
    /// ratio fastest) as `[fibre_count, nmj, velocity, length_ratio]`.
    pub fn point(&self, i: usize) -> [f64; 4] {
        let l = i % self.length_ratio.len();
        let rest = i / self.length_ratio.len();
        let v = rest % self.velocity.len();
        let rest = rest / self.velocity.len();
        let n = rest % self.nmj.len();
        let f = rest / self.nmj.len();
        [self.fibre_count[f], self.nmj[n], self.velocity[v], self.length_ratio[l]]
    }

    pub fn validate(&self, ranges: &ConditionRanges) -> Result<()> {
        let axes = [
            (ConditionAxis::FibreCount, &self.fibre_count),
            (ConditionAxis::Nmj, &self.nmj),
            (ConditionAxis::Velocity, &self.velocity),
            (ConditionAxis::LengthRatio, &self.length_ratio),
        ];
        for (axis, vals) in axes {
            if vals.is_empty() {
                return Err(Error::Config(format!("condition grid axis {axis} has no values")));
            }
            let (lo, hi) = ranges.range(axis);
            if let Some(v) = vals.iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::Config(format!("grid value {axis} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub mu_count: usize,
    /// Muscle-group labels assigned to motor units round-robin.
    pub muscle_labels: Vec<u32>,
    pub grid: ConditionGrid,
    pub ranges: ConditionRanges,
    /// Output rate after decimation.
    pub rate_hz: f64,
    /// Window length after centring.
    pub samples: usize,
    pub seed: u64,
    pub train_frac: f64,
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            mu_count: 2,
            muscle_labels: vec![0],
            grid: ConditionGrid::default(),
            ranges: ConditionRanges::default(),
            rate_hz: 2000.0,
            samples: 96,
            seed: 0,
            train_frac: 0.75,
            split_seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.grid.validate(&self.ranges)?;
        if self.muscle_labels.is_empty() {
            return Err(Error::Config("at least one muscle label is required".into()));
        }
        if !(self.rate_hz > 0.0) || self.samples == 0 {
            return Err(Error::Config("dataset rate and window length must be positive".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac must lie in (0, 1), got {}", self.train_frac)));
        }
        Ok(())
    }
}

/// A generated motor unit: identity plus the conditions fixed per unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuSpec {
    pub id: u32,
    pub label: u32,
    pub depth_mm: f64,
    pub medial_lateral: f64,
    pub seed: u64,
}

/// Draws depth, medial-lateral position and fibre seed for each unit.
pub fn plan_motor_units(cfg: &DatasetConfig) -> Vec<MuSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (dlo, dhi) = cfg.ranges.range(ConditionAxis::Depth);
    let (mlo, mhi) = cfg.ranges.range(ConditionAxis::MedialLateral);
    (0..cfg.mu_count)
        .map(|i| MuSpec {
            id: i as u32,
            label: cfg.muscle_labels[i % cfg.muscle_labels.len()],
            depth_mm: rng.random_range(dlo..=dhi),
            medial_lateral: rng.random_range(mlo..=mhi),
            seed: rng.next_u64(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub mu_id: u32,
    pub muscle_label: u32,
    pub conditions: ConditionVector,
    /// `[t][row][col]` potentials in mV.
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub mu_count: usize,
    pub ranges: ConditionRanges,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn empty(rows: usize, cols: usize, samples: usize, ranges: ConditionRanges) -> Self {
        Dataset { rows, cols, samples, mu_count: 0, ranges, records: Vec::new() }
    }

    pub fn record_len(&self) -> usize {
        self.rows * self.cols * self.samples
    }

    /// Record as a `(1, T, rows, cols)` tensor.
    pub fn tensor(&self, i: usize) -> crate::Tensor4<f32> {
        crate::Tensor4::from_vec([1, self.samples, self.rows, self.cols], self.records[i].data.clone())
            .expect("record length checked on construction")
    }

    pub fn mu_ids(&self) -> Vec<u32> {
        let mut seen = HashSet::new();
        self.records.iter().map(|r| r.mu_id).filter(|id| seen.insert(*id)).collect()
    }

    /// Indices of the records belonging to any of `ids`, in file order.
    pub fn indices_of(&self, ids: &[u32]) -> Vec<usize> {
        let set: HashSet<u32> = ids.iter().copied().collect();
        (0..self.records.len()).filter(|&i| set.contains(&self.records[i].mu_id)).collect()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.record_len();
        if let Some(i) = self.records.iter().position(|r| r.data.len() != n) {
            return Err(Error::Shape(format!("record {i} has {} values, expected {n}", self.records[i].data.len())));
        }
        let distinct = self.mu_ids().len();
        if distinct != self.mu_count {
            return Err(Error::Corrupt {
                kind: "dataset",
                msg: format!("header lists {} motor units but records hold {distinct}", self.mu_count),
            });
        }
        if self.mu_count > 0 && !self.records.len().is_multiple_of(self.mu_count) {
            return Err(Error::Corrupt {
                kind: "dataset",
                msg: format!("{} records do not divide evenly over {} motor units", self.records.len(), self.mu_count),
            });
        }
        Ok(())
    }
}

/// Simulates every `(unit, grid point)` pair, unit-major. Output does not
/// depend on `exec`.
pub fn build_dataset(cyl: &CylinderConfig, cfg: &DatasetConfig, mus: &[MuSpec], exec: Exec) -> Result<Dataset> {
    cyl.validate()?;
    cfg.validate()?;
    let mut ids = HashSet::new();
    if let Some(dup) = mus.iter().find(|m| !ids.insert(m.id)) {
        return Err(Error::InvalidInput(format!("duplicate motor unit id {}", dup.id)));
    }
    let per_mu = cfg.grid.len();
    let records = par::try_map(exec, mus.len() * per_mu, |i| {
        let mu = &mus[i / per_mu];
        let [fibre_count, nmj, velocity, length_ratio] = cfg.grid.point(i % per_mu);
        let phys = PhysioConditions {
            fibre_count,
            depth_mm: mu.depth_mm,
            medial_lateral: mu.medial_lateral,
            nmj,
            velocity,
            length_ratio,
        };
        let conditions = normalize_conditions(&phys, &cfg.ranges, false)?;
        let geom = build_motor_unit(cyl, &phys, mu.seed)?;
        let raw = simulate_muap(&geom, &phys, cyl)?;
        let x = preprocess(&raw, cfg.rate_hz, cfg.samples)?;
        Ok(Record { mu_id: mu.id, muscle_label: mu.label, conditions, data: x.into_vec() })
    })?;
    Ok(Dataset {
        rows: cyl.rows,
        cols: cyl.cols,
        samples: cfg.samples,
        mu_count: mus.len(),
        ranges: cfg.ranges,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_endpoints_map_to_band_edges() {
        let r = ConditionRanges::default();
        let p = PhysioConditions::midrange(&r);
        let lo = normalize_conditions(&p.with(ConditionAxis::Velocity, 3.0), &r, false).unwrap();
        let hi = normalize_conditions(&p.with(ConditionAxis::Velocity, 4.5), &r, false).unwrap();
        assert_eq!(lo.get(ConditionAxis::Velocity), 0.5);
        assert_eq!(hi.get(ConditionAxis::Velocity), 1.0);
    }

    #[test]
    fn midpoints_map_to_three_quarters() {
        let r = ConditionRanges::default();
        let c = normalize_conditions(&PhysioConditions::midrange(&r), &r, false).unwrap();
        for v in c.0 {
            assert!((v - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_needs_extrapolation_flag() {
        let r = ConditionRanges::default();
        let p = PhysioConditions::midrange(&r).with(ConditionAxis::Depth, 15.0);
        assert!(matches!(normalize_conditions(&p, &r, false), Err(Error::OutOfRange(_))));
        let c = normalize_conditions(&p, &r, true).unwrap();
        assert!(c.get(ConditionAxis::Depth) > 1.0);
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let g = ConditionGrid::default();
        assert_eq!(g.len(), 256);
        assert_eq!(g.point(0), [120.0, 0.4, 3.0, 0.85]);
        assert_eq!(g.point(1), [120.0, 0.4, 3.0, 0.95]);
        assert_eq!(g.point(4), [120.0, 0.4, 3.5, 0.85]);
        assert_eq!(g.point(255), [400.0, 0.6, 4.5, 1.15]);
    }

    #[test]
    fn planned_units_are_in_range_and_labelled() {
        let cfg = DatasetConfig { mu_count: 5, muscle_labels: vec![3, 7], ..Default::default() };
        let mus = plan_motor_units(&cfg);
        assert_eq!(mus.iter().map(|m| m.label).collect::<Vec<_>>(), vec![3, 7, 3, 7, 3]);
        for m in mus {
            assert!((2.0..=12.0).contains(&m.depth_mm));
            assert!((0.05..=0.45).contains(&m.medial_lateral));
        }
    }
}
