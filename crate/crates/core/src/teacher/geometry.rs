use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CylinderConfig, PhysioConditions};
use crate::error::{Error, Result};

/// One muscle fibre: a straight segment parallel to the cylinder axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fibre {
    /// Radial distance from the cylinder axis, mm.
    pub rho_mm: f64,
    pub theta_rad: f64,
    pub z_start_mm: f64,
    pub z_end_mm: f64,
    /// Innervation point, between start and end.
    pub z_nmj_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorUnitGeometry {
    pub seed: u64,
    pub fibres: Vec<Fibre>,
    /// Angular position of the territory centre.
    pub centre_theta_rad: f64,
    /// Radial distance of the territory centre from the axis.
    pub centre_rho_mm: f64,
    /// Fibres pulled back under the skin by the minimum-depth clamp.
    pub clamped: usize,
}

impl MotorUnitGeometry {
    pub fn mean_nmj_z(&self) -> f64 {
        if self.fibres.is_empty() {
            return 0.0;
        }
        self.fibres.iter().map(|f| f.z_nmj_mm).sum::<f64>() / self.fibres.len() as f64
    }
}

/// Scatters `round(fibre_count)` fibres uniformly over a disk around the
/// territory centre. Each fibre consumes the same four draws from a stream
/// seeded by `seed`, so a unit with more fibres extends one with fewer.
pub fn build_motor_unit(cfg: &CylinderConfig, cond: &PhysioConditions, seed: u64) -> Result<MotorUnitGeometry> {
    cfg.validate()?;
    let r_skin = cfg.skin_radius_mm;
    let PhysioConditions { fibre_count, depth_mm, medial_lateral, nmj, velocity, length_ratio } = *cond;
    for (name, v) in [
        ("fibre_count", fibre_count),
        ("depth", depth_mm),
        ("medial_lateral", medial_lateral),
        ("nmj", nmj),
        ("velocity", velocity),
        ("length_ratio", length_ratio),
    ] {
        if !v.is_finite() {
            return Err(Error::OutOfRange(format!("{name} is not finite")));
        }
    }
    if fibre_count < 0.0 {
        return Err(Error::OutOfRange(format!("fibre_count must be non-negative, got {fibre_count}")));
    }
    if !(depth_mm > 0.0 && depth_mm < r_skin) {
        return Err(Error::OutOfRange(format!(
            "depth {depth_mm} mm puts the territory outside the cylinder (skin radius {r_skin} mm)"
        )));
    }
    if !(0.0..=1.0).contains(&nmj) {
        return Err(Error::OutOfRange(format!("nmj fraction must lie in [0, 1], got {nmj}")));
    }
    if velocity <= 0.0 || length_ratio <= 0.0 {
        return Err(Error::OutOfRange("velocity and length ratio must be positive".into()));
    }

    let centre_rho = r_skin - depth_mm;
    let centre_theta = 2.0 * PI * medial_lateral;
    let (cx, cy) = (centre_rho * centre_theta.cos(), centre_rho * centre_theta.sin());
    let length = cfg.base_fibre_length_mm * length_ratio;
    let max_rho = r_skin - cfg.min_fibre_depth_mm;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cond.fibres();
    let mut fibres = Vec::with_capacity(n);
    let mut clamped = 0;
    for _ in 0..n {
        let u: f64 = rng.random();
        let phi: f64 = rng.random::<f64>() * 2.0 * PI;
        let jn: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let jz: f64 = rng.random::<f64>() * 2.0 - 1.0;

        let r = cfg.territory_radius_mm * u.sqrt();
        let (x, y) = (cx + r * phi.cos(), cy + r * phi.sin());
        let mut rho = x.hypot(y);
        if rho > max_rho {
            rho = max_rho;
            clamped += 1;
        }
        let theta = y.atan2(x);
        let frac = (nmj + cfg.nmj_jitter * jn).clamp(0.0, 1.0);
        let shift = cfg.z_jitter_mm * jz;
        let z_start = shift - 0.5 * length;
        fibres.push(Fibre {
            rho_mm: rho,
            theta_rad: theta,
            z_start_mm: z_start,
            z_end_mm: z_start + length,
            z_nmj_mm: z_start + frac * length,
        });
    }
    if clamped > 0 {
        log::warn!("motor unit seed {seed}: {clamped} of {n} fibres clamped to {} mm below the skin", cfg.min_fibre_depth_mm);
    }
    Ok(MotorUnitGeometry { seed, fibres, centre_theta_rad: centre_theta, centre_rho_mm: centre_rho, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::ConditionRanges;

    fn mid() -> PhysioConditions {
        PhysioConditions::midrange(&ConditionRanges::default())
    }

    #[test]
    fn fibre_count_is_rounded() {
        let cfg = CylinderConfig::default();
        let g = build_motor_unit(&cfg, &mid().with(crate::teacher::ConditionAxis::FibreCount, 130.6), 1).unwrap();
        assert_eq!(g.fibres.len(), 131);
    }

    #[test]
    fn fibres_stay_inside_territory_and_skin() {
        let cfg = CylinderConfig::default();
        let c = mid();
        let g = build_motor_unit(&cfg, &c, 9).unwrap();
        let (cx, cy) = (g.centre_rho_mm * g.centre_theta_rad.cos(), g.centre_rho_mm * g.centre_theta_rad.sin());
        for f in &g.fibres {
            let (x, y) = (f.rho_mm * f.theta_rad.cos(), f.rho_mm * f.theta_rad.sin());
            assert!((x - cx).hypot(y - cy) <= cfg.territory_radius_mm + 1e-9);
            assert!(f.rho_mm <= cfg.skin_radius_mm - cfg.min_fibre_depth_mm + 1e-12);
            assert!(f.z_start_mm <= f.z_nmj_mm && f.z_nmj_mm <= f.z_end_mm);
        }
    }

    #[test]
    fn shallow_units_are_clamped() {
        let cfg = CylinderConfig::default();
        let c = mid().with(crate::teacher::ConditionAxis::Depth, 1.2);
        let g = build_motor_unit(&cfg, &c, 3).unwrap();
        assert!(g.clamped > 0);
    }

    #[test]
    fn depth_outside_cylinder_is_rejected() {
        let cfg = CylinderConfig::default();
        for d in [0.0, -1.0, 25.0, 40.0] {
            let c = mid().with(crate::teacher::ConditionAxis::Depth, d);
            assert!(matches!(build_motor_unit(&cfg, &c, 0), Err(Error::OutOfRange(_))), "depth {d}");
        }
    }
}
