use std::f64::consts::PI;

use mimeforge::dataset::*;
use mimeforge::teacher::{ConditionRanges, CylinderConfig, PhysioConditions};
use mimeforge::Exec;
use proptest::prelude::*;

fn tiny_cylinder() -> CylinderConfig {
    CylinderConfig { rows: 3, cols: 4, col_spacing_rad: 2.0 * PI / 8.0, raw_duration_ms: 32.0, ..Default::default() }
}

fn tiny_grid() -> ConditionGrid {
    ConditionGrid { fibre_count: vec![120.0, 140.0], nmj: vec![0.5], velocity: vec![3.0, 4.5], length_ratio: vec![1.0] }
}

fn bytes(d: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset_to(&mut out, d).unwrap();
    out
}

#[test]
fn two_units_on_the_default_grid_give_512_records() {
    // Cheap cylinder, full 4x4x4x4 grid.
    let cyl = CylinderConfig { rows: 1, cols: 2, raw_duration_ms: 8.0, ..tiny_cylinder() };
    let cfg = DatasetConfig { mu_count: 2, samples: 8, ..Default::default() };
    let grid = ConditionGrid { fibre_count: vec![1.0, 2.0, 3.0, 4.0], ..ConditionGrid::default() };
    let ranges = ConditionRanges([(1.0, 4.0), (2.0, 12.0), (0.05, 0.45), (0.4, 0.6), (3.0, 4.5), (0.85, 1.15)]);
    let cfg = DatasetConfig { grid, ranges, ..cfg };
    let mus = plan_motor_units(&cfg);
    let d = build_dataset(&cyl, &cfg, &mus, Exec::Parallel).unwrap();
    assert_eq!(d.records.len(), 512);
    assert!(d.records[..256].iter().all(|r| r.mu_id == 0));
    assert!(d.records.iter().all(|r| r.conditions.in_unit_band()));
}

#[test]
fn parallel_and_sequential_files_are_byte_identical() {
    let cyl = tiny_cylinder();
    let cfg = DatasetConfig { mu_count: 3, samples: 24, grid: tiny_grid(), seed: 5, ..Default::default() };
    let mus = plan_motor_units(&cfg);
    let a = build_dataset(&cyl, &cfg, &mus, Exec::Sequential).unwrap();
    let b = build_dataset(&cyl, &cfg, &mus, Exec::Parallel).unwrap();
    let c = build_dataset(&cyl, &cfg, &mus, Exec::Parallel).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(bytes(&b), bytes(&c));
    assert_eq!(read_dataset_from(&bytes(&a)[..]).unwrap(), a);
}

#[test]
fn empty_unit_list_gives_an_empty_valid_file() {
    let cfg = DatasetConfig { mu_count: 0, samples: 24, grid: tiny_grid(), ..Default::default() };
    let d = build_dataset(&tiny_cylinder(), &cfg, &[], Exec::Parallel).unwrap();
    assert!(d.records.is_empty());
    assert_eq!(read_dataset_from(&bytes(&d)[..]).unwrap(), d);
}

#[test]
fn duplicate_unit_ids_are_rejected() {
    let cfg = DatasetConfig { mu_count: 2, samples: 24, grid: tiny_grid(), ..Default::default() };
    let mut mus = plan_motor_units(&cfg);
    mus[1].id = mus[0].id;
    assert!(build_dataset(&tiny_cylinder(), &cfg, &mus, Exec::Sequential).is_err());
}

#[test]
fn file_round_trip_through_disk() {
    let cfg = DatasetConfig { mu_count: 2, samples: 24, grid: tiny_grid(), ..Default::default() };
    let d = build_dataset(&tiny_cylinder(), &cfg, &plan_motor_units(&cfg), Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.bmds");
    write_dataset(&p, &d).unwrap();
    assert_eq!(read_dataset(&p).unwrap(), d);
    let e = read_dataset(&dir.path().join("missing.bmds")).unwrap_err();
    assert_eq!(e.category(), "io");
}

fn physio() -> impl Strategy<Value = PhysioConditions> {
    let r = ConditionRanges::default().0;
    (r[0].0..=r[0].1, r[1].0..=r[1].1, r[2].0..=r[2].1, r[3].0..=r[3].1, r[4].0..=r[4].1, r[5].0..=r[5].1)
        .prop_map(|(a, b, c, d, e, f)| PhysioConditions::from_array([a, b, c, d, e, f]))
}

proptest! {
    #[test]
    fn normalization_inverts(p in physio()) {
        let r = ConditionRanges::default();
        let c = normalize_conditions(&p, &r, false).unwrap();
        prop_assert!(c.in_unit_band());
        let back = denormalize_conditions(&c, &r).to_array();
        for (x, y) in back.iter().zip(p.to_array()) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
