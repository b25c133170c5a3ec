use std::f64::consts::PI;

use super::{CylinderConfig, MotorUnitGeometry, PhysioConditions};
use crate::error::{Error, Result};

/// Surface potential in mV at the raw teacher rate, laid out `[t][row][col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RawMuap {
    pub rows: usize,
    pub cols: usize,
    pub samples: usize,
    pub rate_hz: f64,
    pub data: Vec<f64>,
}

impl RawMuap {
    #[inline]
    pub fn at(&self, t: usize, r: usize, c: usize) -> f64 {
        self.data[(t * self.rows + r) * self.cols + c]
    }

    /// Peak-to-peak amplitude per electrode, `[row][col]`.
    pub fn peak_to_peak(&self) -> Vec<f64> {
        let plane = self.rows * self.cols;
        let mut lo = vec![f64::INFINITY; plane];
        let mut hi = vec![f64::NEG_INFINITY; plane];
        for frame in self.data.chunks_exact(plane) {
            for (i, &v) in frame.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h - l).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

const CHARGES: [f64; 3] = [1.0, -2.0, 1.0];

/// Sums the field of every fibre's two outgoing tripoles at each electrode.
/// Poles are clamped to the fibre, so a tripole fades out as it is generated
/// at the innervation point and extinguished at the tendons.
pub fn simulate_muap(geom: &MotorUnitGeometry, cond: &PhysioConditions, cfg: &CylinderConfig) -> Result<RawMuap> {
    cfg.validate()?;
    let v = cond.velocity;
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::OutOfRange(format!("conduction velocity must be positive, got {v}")));
    }
    let (rows, cols) = (cfg.rows, cfg.cols);
    let samples = cfg.raw_samples();
    let plane = rows * cols;
    let dt_ms = 1000.0 / cfg.raw_rate_hz;
    let r_skin = cfg.skin_radius_mm;
    let b = cfg.tripole_lag_mm;
    let scale = cfg.source_scale / (4.0 * PI * cfg.sigma_z);

    let row_z: Vec<f64> = (0..rows).map(|r| cfg.row_z(r)).collect();
    let col_theta: Vec<f64> = (0..cols).map(|c| cfg.col_theta(c)).collect();
    let mut data = vec![0.0; samples * plane];
    let mut radial = vec![0.0; cols];
    let mut dz2 = vec![[0.0; 3]; rows];

    for f in &geom.fibres {
        for (c, th) in col_theta.iter().enumerate() {
            let d2 = f.rho_mm * f.rho_mm + r_skin * r_skin - 2.0 * f.rho_mm * r_skin * (th - f.theta_rad).cos();
            radial[c] = d2 / cfg.anisotropy;
        }
        for t in 0..samples {
            let travel = v * t as f64 * dt_ms;
            let mut alive = false;
            for (dir, end) in [(1.0, f.z_end_mm), (-1.0, f.z_start_mm)] {
                let (lo, hi) = if dir > 0.0 { (f.z_nmj_mm, end) } else { (end, f.z_nmj_mm) };
                let lead = f.z_nmj_mm + dir * travel;
                let poles = [0.0, 1.0, 2.0].map(|k| (lead - dir * k * b).clamp(lo, hi));
                if poles[0] == poles[2] {
                    // Not yet emerged (t = 0) or fully extinguished.
                    continue;
                }
                alive = true;
                for (r, z) in row_z.iter().enumerate() {
                    dz2[r] = poles.map(|p| (z - p) * (z - p));
                }
                let frame = &mut data[t * plane..(t + 1) * plane];
                for r in 0..rows {
                    let out = &mut frame[r * cols..(r + 1) * cols];
                    let dz = dz2[r];
                    for (o, &rad) in out.iter_mut().zip(&radial) {
                        let mut acc = 0.0;
                        for k in 0..3 {
                            acc += CHARGES[k] / (dz[k] + rad).sqrt();
                        }
                        *o += scale * acc;
                    }
                }
            }
            if !alive && t > 0 {
                break;
            }
        }
    }
    if let Some(i) = data.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("teacher potential non-finite at element {i}")));
    }
    Ok(RawMuap { rows, cols, samples, rate_hz: cfg.raw_rate_hz, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::{build_motor_unit, ConditionAxis, ConditionRanges, Fibre};

    fn small_cfg() -> CylinderConfig {
        CylinderConfig { rows: 4, cols: 8, col_spacing_rad: 2.0 * PI / 8.0, raw_duration_ms: 40.0, ..Default::default() }
    }

    fn mid() -> PhysioConditions {
        PhysioConditions::midrange(&ConditionRanges::default())
    }

    /// Direct evaluation of one pole's potential at one electrode.
    fn pole_potential(cfg: &CylinderConfig, f: &Fibre, z_pole: f64, r: usize, c: usize) -> f64 {
        let (xe, ye) = (cfg.skin_radius_mm * cfg.col_theta(c).cos(), cfg.skin_radius_mm * cfg.col_theta(c).sin());
        let (xs, ys) = (f.rho_mm * f.theta_rad.cos(), f.rho_mm * f.theta_rad.sin());
        let perp2 = (xe - xs).powi(2) + (ye - ys).powi(2);
        let dz = cfg.row_z(r) - z_pole;
        cfg.source_scale / (4.0 * PI * cfg.sigma_z * (dz * dz + perp2 / cfg.anisotropy).sqrt())
    }

    #[test]
    fn single_fibre_matches_direct_pole_sum() {
        let cfg = small_cfg();
        let f = Fibre { rho_mm: 20.0, theta_rad: 0.3, z_start_mm: -30.0, z_end_mm: 40.0, z_nmj_mm: 2.0 };
        let geom = MotorUnitGeometry { seed: 0, fibres: vec![f], centre_theta_rad: 0.3, centre_rho_mm: 20.0, clamped: 0 };
        let cond = mid();
        let m = simulate_muap(&geom, &cond, &cfg).unwrap();
        let t = 20;
        let travel = cond.velocity * t as f64 * 1000.0 / cfg.raw_rate_hz;
        for r in 0..cfg.rows {
            for c in 0..cfg.cols {
                let mut expect = 0.0;
                for (k, q) in CHARGES.iter().enumerate() {
                    let lag = k as f64 * cfg.tripole_lag_mm;
                    let up = (f.z_nmj_mm + travel - lag).clamp(f.z_nmj_mm, f.z_end_mm);
                    let down = (f.z_nmj_mm - travel + lag).clamp(f.z_start_mm, f.z_nmj_mm);
                    expect += q * (pole_potential(&cfg, &f, up, r, c) + pole_potential(&cfg, &f, down, r, c));
                }
                let got = m.at(t, r, c);
                assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1e-6), "r{r} c{c}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn zero_fibres_give_silence() {
        let cfg = small_cfg();
        let cond = mid().with(ConditionAxis::FibreCount, 0.0);
        let g = build_motor_unit(&cfg, &cond, 4).unwrap();
        let m = simulate_muap(&g, &cond, &cfg).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_sample_is_zero() {
        let cfg = small_cfg();
        let cond = mid();
        let g = build_motor_unit(&cfg, &cond, 4).unwrap();
        let m = simulate_muap(&g, &cond, &cfg).unwrap();
        assert!(m.data[..cfg.rows * cfg.cols].iter().all(|&v| v == 0.0));
        assert!(m.max_abs() > 0.0);
    }
}
