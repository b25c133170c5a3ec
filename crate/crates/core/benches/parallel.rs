use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mimeforge::dataset::{build_dataset, plan_motor_units, ConditionGrid, Dataset, DatasetConfig};
use mimeforge::emg::{generate_spike_trains, synthesize_static, ExcitationProfile, PoolConfig, Timing};
use mimeforge::model::{tiny_config, Model};
use mimeforge::train::{TrainConfig, Trainer};
use mimeforge::teacher::CylinderConfig;
use mimeforge::{Exec, Tensor4};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn small_setup() -> (CylinderConfig, DatasetConfig) {
    let m = tiny_config();
    let cyl = CylinderConfig {
        rows: m.rows,
        cols: m.cols,
        col_spacing_rad: 2.0 * PI / 12.0,
        raw_duration_ms: 32.0,
        ..Default::default()
    };
    let grid = ConditionGrid { fibre_count: vec![100.0, 200.0], nmj: vec![0.5], velocity: vec![3.0, 4.0], length_ratio: vec![1.0] };
    (cyl, DatasetConfig { mu_count: 2, samples: m.samples, grid, ..Default::default() })
}

fn teacher(c: &mut Criterion) {
    let (cyl, dc) = small_setup();
    let mus = plan_motor_units(&dc);
    let mut g = c.benchmark_group("build_dataset");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_dataset(black_box(&cyl), &dc, &mus, exec).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let (cyl, dc) = small_setup();
    let data: Dataset = build_dataset(&cyl, &dc, &plan_motor_units(&dc), Exec::Sequential).unwrap();
    let idx: Vec<usize> = (0..data.records.len()).collect();
    let mut g = c.benchmark_group("train_step");
    g.sample_size(10);
    for (name, exec) in MODES {
        let cfg = TrainConfig { lr: 1e-4, batch: 8, ..Default::default() };
        let model = Model::<f32>::new(tiny_config(), 0).unwrap();
        let mut t = Trainer::new(model, &data, idx.clone(), cfg, exec).unwrap();
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| t.step().unwrap()));
    }
    g.finish();
}

fn synthesis(c: &mut Criterion) {
    let m = tiny_config();
    let pool = PoolConfig { n: 20, ..Default::default() };
    let exc = ExcitationProfile::constant(0.7, 2.0);
    let spikes = generate_spike_trains(&pool, &exc, Exec::Sequential).unwrap();
    let shape = [1, m.samples, m.rows, m.cols];
    let lib: Vec<Tensor4<f64>> =
        (0..pool.n).map(|u| Tensor4::from_vec(shape, (0..shape.iter().product::<usize>()).map(|i| ((i * 7 + u) % 13) as f64).collect()).unwrap()).collect();
    let timing = Timing { samples: exc.samples(), rate_hz: exc.rate_hz };
    let mut g = c.benchmark_group("synthesize_static");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| synthesize_static(black_box(&lib), &spikes, timing, None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, teacher, training, synthesis);
criterion_main!(benches);
