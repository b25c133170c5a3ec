//! Numerical teacher: clamped-tripole line sources inside an anisotropic
//! cylindrical volume conductor, observed by a rows x cols electrode grid on
//! the skin.

mod geometry;
mod report;
mod simulate;

pub use geometry::{build_motor_unit, Fibre, MotorUnitGeometry};
pub use report::{condition_effect_report, write_effect_csv, EffectRow, MuapSummary};
pub use simulate::{simulate_muap, RawMuap};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry and electrical constants of the cylindrical volume conductor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CylinderConfig {
    /// Skin radius in mm.
    pub skin_radius_mm: f64,
    /// Longitudinal conductivity in S/m.
    pub sigma_z: f64,
    /// `sigma_r / sigma_z`.
    pub anisotropy: f64,
    pub rows: usize,
    pub cols: usize,
    /// Longitudinal inter-electrode distance in mm.
    pub row_spacing_mm: f64,
    /// Angular distance between electrode columns in rad. Column 0 is the
    /// reference electrode at angle 0.
    pub col_spacing_rad: f64,
    pub raw_rate_hz: f64,
    pub raw_duration_ms: f64,
    /// Radius of the disk fibres of one motor unit are scattered in.
    pub territory_radius_mm: f64,
    /// Fibre length at length ratio 1.
    pub base_fibre_length_mm: f64,
    /// Fibres are clamped to at least this depth below the skin.
    pub min_fibre_depth_mm: f64,
    /// Distance between consecutive poles of the tripole.
    pub tripole_lag_mm: f64,
    /// Per-fibre spread of the innervation fraction.
    pub nmj_jitter: f64,
    /// Per-fibre longitudinal shift spread in mm.
    pub z_jitter_mm: f64,
    /// Global source current scale; calibrated so the mid-range motor unit
    /// peaks near 1 mV.
    pub source_scale: f64,
}

impl Default for CylinderConfig {
    fn default() -> Self {
        CylinderConfig {
            skin_radius_mm: 25.0,
            sigma_z: 0.5,
            anisotropy: 0.2,
            rows: 10,
            cols: 32,
            row_spacing_mm: 4.0,
            col_spacing_rad: 2.0 * PI / 32.0,
            raw_rate_hz: 4096.0,
            raw_duration_ms: 64.0,
            territory_radius_mm: 2.5,
            base_fibre_length_mm: 100.0,
            min_fibre_depth_mm: 1.0,
            tripole_lag_mm: 2.0,
            nmj_jitter: 0.01,
            z_jitter_mm: 2.0,
            source_scale: DEFAULT_SOURCE_SCALE,
        }
    }
}

/// Gives the mid-range motor unit a peak |V| of about 1 mV on the default grid.
pub const DEFAULT_SOURCE_SCALE: f64 = 12.9;

impl CylinderConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("cylinder {what} must be positive, got {v}")))
            }
        };
        pos(self.skin_radius_mm, "skin_radius_mm")?;
        pos(self.sigma_z, "sigma_z")?;
        pos(self.row_spacing_mm, "row_spacing_mm")?;
        pos(self.col_spacing_rad, "col_spacing_rad")?;
        pos(self.raw_rate_hz, "raw_rate_hz")?;
        pos(self.raw_duration_ms, "raw_duration_ms")?;
        pos(self.base_fibre_length_mm, "base_fibre_length_mm")?;
        pos(self.tripole_lag_mm, "tripole_lag_mm")?;
        if !(self.anisotropy > 0.0 && self.anisotropy <= 1.0) {
            return Err(Error::Config(format!("cylinder anisotropy must lie in (0, 1], got {}", self.anisotropy)));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Config("electrode grid needs at least one row and column".into()));
        }
        if self.territory_radius_mm < 0.0 || self.min_fibre_depth_mm < 0.0 {
            return Err(Error::Config("territory radius and minimum fibre depth must be non-negative".into()));
        }
        if self.min_fibre_depth_mm >= self.skin_radius_mm {
            return Err(Error::Config("minimum fibre depth must be below the skin radius".into()));
        }
        Ok(())
    }

    pub fn raw_samples(&self) -> usize {
        (self.raw_duration_ms * self.raw_rate_hz / 1000.0).round() as usize
    }

    /// Longitudinal electrode positions; the grid is centred on `z = 0`, the
    /// innervation zone of a fibre with mid-range NMJ fraction.
    pub fn row_z(&self, r: usize) -> f64 {
        (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.row_spacing_mm
    }

    pub fn col_theta(&self, c: usize) -> f64 {
        c as f64 * self.col_spacing_rad
    }
}

/// The six physiological conditions in physical units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysioConditions {
    pub fibre_count: f64,
    pub depth_mm: f64,
    /// Arc fraction of the circumference between the reference electrode and
    /// the motor-unit centre.
    pub medial_lateral: f64,
    /// Innervation point as a fraction of fibre length.
    pub nmj: f64,
    /// Conduction velocity in m/s (equivalently mm/ms).
    pub velocity: f64,
    pub length_ratio: f64,
}

impl PhysioConditions {
    pub fn to_array(&self) -> [f64; 6] {
        [self.fibre_count, self.depth_mm, self.medial_lateral, self.nmj, self.velocity, self.length_ratio]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        PhysioConditions {
            fibre_count: a[0],
            depth_mm: a[1],
            medial_lateral: a[2],
            nmj: a[3],
            velocity: a[4],
            length_ratio: a[5],
        }
    }

    pub fn fibres(&self) -> usize {
        self.fibre_count.max(0.0).round() as usize
    }

    pub fn with(&self, axis: ConditionAxis, value: f64) -> Self {
        let mut a = self.to_array();
        a[axis as usize] = value;
        Self::from_array(a)
    }

    /// Mid-point of every range.
    pub fn midrange(ranges: &ConditionRanges) -> Self {
        let mut a = [0.0; 6];
        for (i, (lo, hi)) in ranges.0.iter().enumerate() {
            a[i] = 0.5 * (lo + hi);
        }
        Self::from_array(a)
    }
}

/// Physical `(min, max)` per condition, in [`ConditionAxis`] order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRanges(pub [(f64, f64); 6]);

impl Default for ConditionRanges {
    fn default() -> Self {
        ConditionRanges([(120.0, 400.0), (2.0, 12.0), (0.05, 0.45), (0.4, 0.6), (3.0, 4.5), (0.85, 1.15)])
    }
}

impl ConditionRanges {
    pub fn validate(&self) -> Result<()> {
        for (axis, (lo, hi)) in ConditionAxis::ALL.iter().zip(self.0) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("condition range for {axis} must satisfy min < max, got ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &PhysioConditions) -> Result<()> {
        for ((axis, (lo, hi)), v) in ConditionAxis::ALL.iter().zip(self.0).zip(p.to_array()) {
            if !(lo..=hi).contains(&v) {
                return Err(Error::OutOfRange(format!("{axis} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn range(&self, axis: ConditionAxis) -> (f64, f64) {
        self.0[axis as usize]
    }
}

/// The six conditions in their canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionAxis {
    FibreCount = 0,
    Depth = 1,
    MedialLateral = 2,
    Nmj = 3,
    Velocity = 4,
    LengthRatio = 5,
}

impl ConditionAxis {
    pub const ALL: [ConditionAxis; 6] = [
        ConditionAxis::FibreCount,
        ConditionAxis::Depth,
        ConditionAxis::MedialLateral,
        ConditionAxis::Nmj,
        ConditionAxis::Velocity,
        ConditionAxis::LengthRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionAxis::FibreCount => "fibre_count",
            ConditionAxis::Depth => "depth",
            ConditionAxis::MedialLateral => "medial_lateral",
            ConditionAxis::Nmj => "nmj",
            ConditionAxis::Velocity => "velocity",
            ConditionAxis::LengthRatio => "length_ratio",
        }
    }
}

impl fmt::Display for ConditionAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditionAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown condition axis `{s}`")))
    }
}
