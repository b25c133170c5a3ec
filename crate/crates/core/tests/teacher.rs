use std::f64::consts::PI;

use mimeforge::teacher::*;
use mimeforge::Exec;
use proptest::prelude::*;

fn small() -> CylinderConfig {
    CylinderConfig { rows: 4, cols: 16, col_spacing_rad: 2.0 * PI / 16.0, raw_duration_ms: 48.0, ..Default::default() }
}

fn mid() -> PhysioConditions {
    PhysioConditions::midrange(&ConditionRanges::default())
}

fn sweep(axis: ConditionAxis, steps: usize) -> Vec<EffectRow> {
    let cfg = small();
    condition_effect_report(&cfg, &ConditionRanges::default(), &mid(), axis, steps, 11, Exec::Parallel).unwrap()
}

#[test]
fn default_unit_peaks_near_one_millivolt() {
    let cfg = CylinderConfig::default();
    let c = mid();
    let g = build_motor_unit(&cfg, &c, 1).unwrap();
    let m = simulate_muap(&g, &c, &cfg).unwrap();
    let peak = m.max_abs();
    assert!((0.7..1.4).contains(&peak), "peak {peak}");
}

#[test]
fn territory_centroid_matches_nominal_centre() {
    let cfg = CylinderConfig::default();
    let c = PhysioConditions { fibre_count: 200.0, depth_mm: 5.0, medial_lateral: 0.25, ..mid() };
    let g = build_motor_unit(&cfg, &c, 7).unwrap();
    let n = g.fibres.len() as f64;
    let cx = g.fibres.iter().map(|f| f.rho_mm * f.theta_rad.cos()).sum::<f64>() / n;
    let cy = g.fibres.iter().map(|f| f.rho_mm * f.theta_rad.sin()).sum::<f64>() / n;
    let rho = 25.0 - 5.0;
    let (ex, ey) = (rho * (2.0 * PI * 0.25).cos(), rho * (2.0 * PI * 0.25).sin());
    assert!((cx - ex).hypot(cy - ey) < 0.5);
}

#[test]
fn empty_unit_and_same_seed() {
    let cfg = small();
    let zero = mid().with(ConditionAxis::FibreCount, 0.0);
    assert!(build_motor_unit(&cfg, &zero, 3).unwrap().fibres.is_empty());
    let a = build_motor_unit(&cfg, &mid(), 3).unwrap();
    let b = build_motor_unit(&cfg, &mid(), 3).unwrap();
    assert_eq!(a, b);
    let (ma, mb) = (simulate_muap(&a, &mid(), &cfg).unwrap(), simulate_muap(&b, &mid(), &cfg).unwrap());
    assert!(ma.data.iter().zip(&mb.data).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn single_fibre_is_silent_after_extinction() {
    let cfg = CylinderConfig { raw_duration_ms: 120.0, ..small() };
    let f = Fibre { rho_mm: 21.0, theta_rad: 0.4, z_start_mm: -40.0, z_end_mm: 50.0, z_nmj_mm: 0.0 };
    let g = MotorUnitGeometry { seed: 0, fibres: vec![f], centre_theta_rad: 0.4, centre_rho_mm: 21.0, clamped: 0 };
    let cond = mid().with(ConditionAxis::Velocity, 4.0);
    let m = simulate_muap(&g, &cond, &cfg).unwrap();
    // 50 mm + two lags at 4 mm/ms is extinguished by 13.5 ms.
    let plane = cfg.rows * cfg.cols;
    let first_silent = (14.0 * cfg.raw_rate_hz / 1000.0) as usize;
    assert!(m.data[first_silent * plane..].iter().all(|&v| v == 0.0));

    let energy: f64 = m.data.iter().map(|v| v * v).sum();
    let tail_start = m.samples - m.samples / 10;
    let tail: f64 = m.data[tail_start * plane..].iter().map(|v| v * v).sum();
    assert!(tail < 1e-6 * energy);
}

#[test]
fn velocity_scales_time_to_first_peak() {
    let cfg = small();
    let g = build_motor_unit(&cfg, &mid(), 2).unwrap();
    let run = |v: f64| {
        let c = mid().with(ConditionAxis::Velocity, v);
        let m = simulate_muap(&g, &c, &cfg).unwrap();
        MuapSummary::of(&m, &g, &cfg).t_peak_ms
    };
    let ratio = run(3.0) / run(4.5);
    assert!((ratio / 1.5 - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn depth_sweep_is_strictly_decreasing() {
    let rows = sweep(ConditionAxis::Depth, 8);
    for w in rows.windows(2) {
        assert!(w[1].summary.p2p_mv < w[0].summary.p2p_mv);
    }
}

#[test]
fn length_sweep_duration_is_non_decreasing() {
    let rows = sweep(ConditionAxis::LengthRatio, 8);
    for w in rows.windows(2) {
        assert!(w[1].summary.duration_ms >= w[0].summary.duration_ms);
    }
}

#[test]
fn fibre_count_sweep_is_near_linear() {
    let rows = sweep(ConditionAxis::FibreCount, 8);
    let xs: Vec<f64> = rows.iter().map(|r| r.axis_value).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.summary.p2p_mv).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.9, "r2 {r2}");
    for w in ys.windows(2) {
        assert!(w[1] >= w[0]);
    }
}

#[test]
fn medial_lateral_sweep_moves_the_centroid() {
    let rows = sweep(ConditionAxis::MedialLateral, 8);
    for w in rows.windows(2) {
        assert!(w[1].summary.centroid_col > w[0].summary.centroid_col);
    }
}

#[test]
fn effect_report_is_identical_sequential_and_parallel() {
    let cfg = small();
    let r = ConditionRanges::default();
    let a = condition_effect_report(&cfg, &r, &mid(), ConditionAxis::Nmj, 3, 5, Exec::Sequential).unwrap();
    let b = condition_effect_report(&cfg, &r, &mid(), ConditionAxis::Nmj, 3, 5, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unknown_axis_name_is_rejected() {
    assert!("pennation".parse::<ConditionAxis>().is_err());
    assert_eq!("velocity".parse::<ConditionAxis>().unwrap(), ConditionAxis::Velocity);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fibres_superpose(seed in any::<u64>(), depth in 2.0f64..12.0, ml in 0.05f64..0.45) {
        let cfg = CylinderConfig { raw_duration_ms: 24.0, ..small() };
        let c = PhysioConditions { fibre_count: 2.0, depth_mm: depth, medial_lateral: ml, ..mid() };
        let g = build_motor_unit(&cfg, &c, seed).unwrap();
        let both = simulate_muap(&g, &c, &cfg).unwrap();
        let single = |i: usize| {
            let gi = MotorUnitGeometry { fibres: vec![g.fibres[i]], ..g.clone() };
            simulate_muap(&gi, &c, &cfg).unwrap()
        };
        let (a, b) = (single(0), single(1));
        let scale = both.max_abs().max(1e-12);
        for i in 0..both.data.len() {
            prop_assert!((both.data[i] - (a.data[i] + b.data[i])).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn fewer_fibres_are_a_prefix(seed in any::<u64>(), n in 0usize..60, extra in 0usize..30) {
        let cfg = small();
        let small_unit = build_motor_unit(&cfg, &mid().with(ConditionAxis::FibreCount, n as f64), seed).unwrap();
        let big_unit = build_motor_unit(&cfg, &mid().with(ConditionAxis::FibreCount, (n + extra) as f64), seed).unwrap();
        prop_assert_eq!(&small_unit.fibres[..], &big_unit.fibres[..n]);
    }
}
