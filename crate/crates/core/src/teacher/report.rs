use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{build_motor_unit, simulate_muap, ConditionAxis, ConditionRanges, CylinderConfig, MotorUnitGeometry, PhysioConditions, RawMuap};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Scalar descriptors of one simulated MUAP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuapSummary {
    /// Largest peak-to-peak amplitude over all electrodes.
    pub p2p_mv: f64,
    /// Span over which the grid envelope stays above 1% of its peak.
    pub duration_ms: f64,
    /// Amplitude-weighted circular mean column.
    pub centroid_col: f64,
    /// Time of the absolute peak at the electrode closest to the innervation
    /// zone, refined to sub-sample precision.
    pub t_peak_ms: f64,
}

impl MuapSummary {
    pub fn of(m: &RawMuap, geom: &MotorUnitGeometry, cfg: &CylinderConfig) -> MuapSummary {
        let (rows, cols) = (m.rows, m.cols);
        let plane = rows * cols;
        let dt_ms = 1000.0 / m.rate_hz;
        let p2p = m.peak_to_peak();
        let p2p_mv = p2p.iter().copied().fold(0.0, f64::max);

        let envelope: Vec<f64> = m.data.chunks_exact(plane).map(|f| f.iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect();
        let peak = envelope.iter().copied().fold(0.0, f64::max);
        let duration_ms = if peak > 0.0 {
            let thr = 0.01 * peak;
            let first = envelope.iter().position(|&e| e >= thr).unwrap_or(0);
            let last = envelope.iter().rposition(|&e| e >= thr).unwrap_or(0);
            (last - first) as f64 * dt_ms
        } else {
            0.0
        };

        let (mut sx, mut sy) = (0.0, 0.0);
        for c in 0..cols {
            let w = (0..rows).map(|r| p2p[r * cols + c]).fold(0.0, f64::max);
            let th = cfg.col_theta(c);
            sx += w * w * th.cos();
            sy += w * w * th.sin();
        }
        let centroid_col = sy.atan2(sx).rem_euclid(2.0 * PI) / cfg.col_spacing_rad;

        let nmj_z = geom.mean_nmj_z();
        let row = (0..rows)
            .min_by(|&a, &b| (cfg.row_z(a) - nmj_z).abs().total_cmp(&(cfg.row_z(b) - nmj_z).abs()))
            .unwrap_or(0);
        let ang = |c: usize| {
            let d = (cfg.col_theta(c) - geom.centre_theta_rad).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        };
        let col = (0..cols).min_by(|&a, &b| ang(a).total_cmp(&ang(b))).unwrap_or(0);
        let trace: Vec<f64> = (0..m.samples).map(|t| m.at(t, row, col).abs()).collect();
        let t_peak_ms = refine_peak(&trace) * dt_ms;

        MuapSummary { p2p_mv, duration_ms, centroid_col, t_peak_ms }
    }
}

/// Index of the maximum with parabolic interpolation through its neighbours.
fn refine_peak(x: &[f64]) -> f64 {
    let Some(i) = (0..x.len()).max_by(|&a, &b| x[a].total_cmp(&x[b])) else {
        return 0.0;
    };
    if i == 0 || i + 1 >= x.len() {
        return i as f64;
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return i as f64;
    }
    i as f64 + 0.5 * (a - c) / den
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub axis_value: f64,
    #[serde(flatten)]
    pub summary: MuapSummary,
}

/// Sweeps one condition linearly over its range with the others held at
/// `base`, simulating one motor unit per step from the same fibre seed.
pub fn condition_effect_report(
    cfg: &CylinderConfig,
    ranges: &ConditionRanges,
    base: &PhysioConditions,
    axis: ConditionAxis,
    steps: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<EffectRow>> {
    if steps < 2 {
        return Err(Error::Config(format!("an effect sweep needs at least 2 steps, got {steps}")));
    }
    let (lo, hi) = ranges.range(axis);
    par::try_map(exec, steps, |i| {
        let value = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
        let cond = base.with(axis, value);
        let geom = build_motor_unit(cfg, &cond, seed)?;
        let muap = simulate_muap(&geom, &cond, cfg)?;
        Ok(EffectRow { axis_value: value, summary: MuapSummary::of(&muap, &geom, cfg) })
    })
}

pub fn write_effect_csv<W: Write>(mut w: W, rows: &[EffectRow]) -> Result<()> {
    writeln!(w, "axis_value,p2p_mv,duration_ms,centroid_col,t_peak_ms")?;
    for r in rows {
        let s = r.summary;
        writeln!(w, "{},{},{},{},{}", r.axis_value, s.p2p_mv, s.duration_ms, s.centroid_col, s.t_peak_ms)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabolic_refinement_recovers_vertex() {
        let x: Vec<f64> = (0..10).map(|i| 5.0 - (i as f64 - 4.3).powi(2)).collect();
        assert!((refine_peak(&x) - 4.3).abs() < 1e-12);
    }

    #[test]
    fn csv_has_expected_header() {
        let row = EffectRow {
            axis_value: 1.0,
            summary: MuapSummary { p2p_mv: 2.0, duration_ms: 3.0, centroid_col: 4.0, t_peak_ms: 5.0 },
        };
        let mut out = Vec::new();
        write_effect_csv(&mut out, &[row]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "axis_value,p2p_mv,duration_ms,centroid_col,t_peak_ms\n1,2,3,4,5\n");
    }
}
