use mimeforge::autodiff::{centre_offset, scaled_len, Init, ParamSet};
use mimeforge::model::*;
use mimeforge::{Error, Tensor4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(rows: usize, cols: usize, samples: usize) -> ModelConfig {
    ModelConfig {
        rows,
        cols,
        samples,
        enc_channels: vec![4, 4, 6, 6, 8],
        dec_channels: vec![6, 6, 4, 4],
        up_channels: 4,
        disc_channels: vec![4, 4, 6, 6, 8],
        cond_proj: 8,
        gate_hidden: 8,
        ..ModelConfig::default()
    }
}

fn random_input(shape: [usize; 4], seed: u64) -> Tensor4<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor4::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn default_encoder_and_discriminator_shapes() {
    let cfg = ModelConfig::default();
    let want = vec![[16, 48, 5, 16], [32, 24, 3, 8], [64, 12, 2, 4], [128, 6, 2, 4], [256, 6, 2, 4]];
    assert_eq!(cfg.encoder_shapes().unwrap(), want);
    assert_eq!(cfg.discriminator_shapes().unwrap(), want);
    assert_eq!(cfg.flat_len().unwrap(), 256 * 6 * 2 * 4);
    assert_eq!(cfg.flat_len().unwrap(), 12288);
    assert_eq!(
        cfg.decoder_targets().unwrap(),
        vec![[12, 2, 4], [24, 3, 8], [48, 5, 16], [48, 5, 16]]
    );
}

#[test]
fn default_model_wiring() {
    let m = Model::<f32>::new(ModelConfig::default(), 1).unwrap();
    assert_eq!(m.encoder.mu.inputs, 12288);
    assert_eq!(m.encoder.mu.outputs, 16);
    assert_eq!(m.encoder.logvar.outputs, 16);
    assert_eq!(m.decoder.fc.inputs, 16 + 64);
    assert_eq!(m.decoder.fc.outputs, 12288);
    assert_eq!(m.discriminator.convs[1].geom.cin, 16 + 6);
    assert_eq!(m.discriminator.head.geom.cin, 256);
    assert_eq!(m.decoder.ups.len(), 2);
    for u in &m.decoder.ups {
        assert_eq!(u.bank.factors.len(), 8);
        assert_eq!(u.target, [96, 10, 32]);
    }
}

#[test]
fn default_model_forward_shapes() {
    let m = Model::<f32>::new(ModelConfig::default(), 2).unwrap();
    let x = random_input([1, 96, 10, 32], 3).cast::<f32>();
    let stats = m.encode(&x).unwrap();
    assert_eq!(stats.mu.len(), 16);
    assert_eq!(stats.logvar.len(), 16);
    let c = [0.1f32, -0.2, 0.3, 0.0, 0.5, -0.5];
    let y = m.decode(&stats.mu, &c).unwrap();
    assert_eq!(y.shape(), [1, 96, 10, 32]);
    let s = m.discriminate(&y, &c).unwrap();
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn expert_factors_are_linearly_spaced() {
    let f = expert_factors(8, 0.25, 2.0);
    assert_eq!(f.len(), 8);
    assert_eq!(f[0], 0.25);
    assert_eq!(f[7], 2.0);
    for w in f.windows(2) {
        assert!((w[1] - w[0] - 0.25).abs() < 1e-12);
    }
}

#[test]
fn reduced_grid_rebuilds_derived_dimensions() {
    let cfg = small(8, 8, 48);
    let enc = cfg.encoder_shapes().unwrap();
    assert_eq!(enc[0], [4, 24, 4, 4]);
    assert_eq!(cfg.flat_len().unwrap(), enc[4].iter().product::<usize>());
    let m = Model::<f64>::new(cfg.clone(), 4).unwrap();
    let x = random_input([1, 48, 8, 8], 5);
    let stats = m.encode(&x).unwrap();
    let y = m.decode(&stats.mu, &[0.0; 6]).unwrap();
    assert_eq!(y.shape(), [1, 48, 8, 8]);
    assert!(m.discriminate(&y, &[0.0; 6]).is_ok());
    assert!(matches!(m.encode(&random_input([1, 96, 10, 32], 5)), Err(Error::Shape(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = ModelConfig { strides: vec![[2, 2, 2]], ..ModelConfig::default() };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
    let bad = ModelConfig { max_factor: 3.0, ..ModelConfig::default() };
    assert!(matches!(Model::<f32>::new(bad, 0), Err(Error::Config(_))));
    let bad = ModelConfig { experts: 0, ..ModelConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn forward_passes_are_deterministic() {
    let cfg = small(4, 6, 16);
    let a = Model::<f64>::new(cfg.clone(), 9).unwrap();
    let b = Model::<f64>::new(cfg, 9).unwrap();
    let x = random_input(a.config.sample_shape(), 1);
    assert_eq!(a.encode(&x).unwrap(), a.encode(&x).unwrap());
    assert_eq!(a.encode(&x).unwrap(), b.encode(&x).unwrap());
    let z = [0.3, -0.1, 0.2, 0.0, 0.1, 0.5, -0.4, 0.9, 0.0, 0.0, 0.1, 0.1, -0.3, 0.2, 0.7, -0.6];
    let c = [0.2, 0.4, -0.3, 0.1, 0.0, 0.8];
    assert_eq!(a.decode(&z, &c).unwrap().data(), b.decode(&z, &c).unwrap().data());
    assert_eq!(a.encode_count(), 3);
}

#[test]
fn conditioning_paths_are_live() {
    let m = Model::<f64>::new(small(4, 6, 16), 11).unwrap();
    let z = vec![0.2; 16];
    let x = random_input(m.config.sample_shape(), 2);
    for axis in 0..6 {
        let mut c0 = [0.1, -0.2, 0.3, 0.0, 0.2, -0.1];
        let mut c1 = c0;
        c0[axis] -= 1e-3;
        c1[axis] += 1e-3;
        let y0 = m.decode(&z, &c0).unwrap();
        let y1 = m.decode(&z, &c1).unwrap();
        let diff: f64 = y0.data().iter().zip(y1.data()).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 0.0, "decode ignores condition {axis}");
        let d = m.discriminate(&x, &c1).unwrap() - m.discriminate(&x, &c0).unwrap();
        assert!(d != 0.0, "discriminator ignores condition {axis}");
    }
}

#[test]
fn logvar_is_clamped() {
    let mut m = Model::<f64>::new(small(4, 6, 16), 12).unwrap();
    let b = m.encoder.logvar.bias;
    m.gen.get_mut(b).iter_mut().enumerate().for_each(|(i, v)| *v = if i % 2 == 0 { 1e6 } else { -1e6 });
    let s = m.encode(&random_input(m.config.sample_shape(), 3)).unwrap();
    for (i, v) in s.logvar.iter().enumerate() {
        assert_eq!(v.abs(), LOGVAR_CLAMP, "entry {i}");
    }
}

#[test]
fn condition_projection_is_affine() {
    let mut m = Model::<f64>::new(ModelConfig::default(), 13).unwrap();
    let c1 = [0.3, -0.2, 0.9, 0.1, -0.7, 0.4];
    let c2 = [-0.5, 0.6, 0.0, 0.8, 0.2, -0.1];
    let a = 0.3;
    let mix: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
    let p1 = m.project_conditions(&c1).unwrap();
    let p2 = m.project_conditions(&c2).unwrap();
    let pm = m.project_conditions(&mix).unwrap();
    assert_eq!(pm.len(), 64);
    for i in 0..64 {
        assert!((pm[i] - (a * p1[i] + (1.0 - a) * p2[i])).abs() < 1e-12);
    }
    let (w, b) = (m.decoder.proj.weight, m.decoder.proj.bias);
    m.gen.get_mut(w).fill(0.0);
    m.gen.get_mut(b).fill(0.0);
    assert!(m.project_conditions(&c1).unwrap().iter().all(|&v| v == 0.0));
}

fn bank(seed: u64) -> (ParamSet<f64>, ExpertBank) {
    let mut ps = ParamSet::new();
    let b = ExpertBank::new(&mut ps, &mut Init::new(seed), "b", expert_factors(8, 0.25, 2.0), 6, 64).unwrap();
    (ps, b)
}

#[test]
fn one_hot_identity_expert_is_identity() {
    let (mut ps, b) = bank(1);
    let head = &b.gate[2];
    ps.get_mut(head.weight).fill(0.0);
    let bias = ps.get_mut(head.bias);
    bias.fill(0.0);
    bias[3] = 1e3;
    assert_eq!(b.factors[3], 1.0);
    let x = random_input([2, 20, 3, 4], 7);
    let (y, _) = b.forward(&ps, &x, &[0.2; 6], 20).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn uniform_gate_padding_mask() {
    let (mut ps, b) = bank(2);
    ps.get_mut(b.gate[2].weight).fill(0.0);
    ps.get_mut(b.gate[2].bias).fill(0.0);
    let t = 24;
    let zero = Tensor4::<f64>::zeros([1, t, 1, 2]);
    assert!(b.forward(&ps, &zero, &[0.5; 6], t).unwrap().0.data().iter().all(|&v| v == 0.0));

    let ones = Tensor4::full([1, t, 1, 2], 1.0);
    let (y, _) = b.forward(&ps, &ones, &[0.5; 6], t).unwrap();
    for ti in 0..t {
        let covering = b
            .factors
            .iter()
            .filter(|&&f| {
                let n = scaled_len(t, f);
                let start = centre_offset(n, t);
                n >= t || (ti as isize >= start && (ti as isize) < start + n as isize)
            })
            .count();
        let want = covering as f64 / 8.0;
        for w in 0..2 {
            assert!((y.get(0, ti, 0, w) - want).abs() < 1e-12, "t={ti}");
        }
    }
    // The centre is covered by every expert, the edges only by the long ones.
    assert!((y.get(0, t / 2, 0, 0) - 1.0).abs() < 1e-12);
    assert!(y.get(0, 0, 0, 0) < 1.0);
}

#[test]
fn gate_constraints_on_random_conditions() {
    let m = Model::<f64>::new(ModelConfig::default(), 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..2000 {
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        for block in 0..2 {
            let pi = m.gate(block, &c).unwrap();
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(pi.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
    assert!(m.gate(2, &[0.0; 6]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gate_constraints_on_adversarial_conditions(c in prop::array::uniform6(prop_oneof![
        -1e12f64..1e12,
        -10.0f64..10.0,
        Just(f64::MAX),
        Just(-f64::MAX),
        Just(0.0),
    ])) {
        let (ps, b) = bank(5);
        let pi = b.gate_forward(&ps, &c).unwrap().pi;
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(pi.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn gradient_suite_passes_at_64_bit() {
    for (family, report) in gradient_suite(0).unwrap() {
        assert!(report.coordinates > 0, "{family}");
        assert!(report.max_rel_error < 1e-4, "{family}: {report:?}");
    }
}

fn ckpt_bytes(m: &Model<f32>, it: u64) -> Vec<u8> {
    let mut out = Vec::new();
    write_checkpoint_to(&mut out, m, it).unwrap();
    out
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let cfg = small(4, 6, 16);
    let m = Model::<f32>::new(cfg.clone(), 31).unwrap();
    let bytes = ckpt_bytes(&m, 1234);
    assert_eq!(&bytes[..4], CHECKPOINT_MAGIC);
    let (back, it) = read_checkpoint_from::<f32, _>(&bytes[..], &cfg).unwrap();
    assert_eq!(it, 1234);
    let x = random_input(cfg.sample_shape(), 8).cast::<f32>();
    assert_eq!(m.encode(&x).unwrap(), back.encode(&x).unwrap());
    let c = [0.1f32; 6];
    let z = vec![0.5f32; 16];
    assert_eq!(m.decode(&z, &c).unwrap().data(), back.decode(&z, &c).unwrap().data());
    assert_eq!(m.discriminate(&x, &c).unwrap(), back.discriminate(&x, &c).unwrap());
    assert_eq!(ckpt_bytes(&back, 1234), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bmck");
    save_checkpoint(&path, &m, 7).unwrap();
    let (disk, it) = load_checkpoint::<f32>(&path, &cfg).unwrap();
    assert_eq!(it, 7);
    assert_eq!(m.encode(&x).unwrap(), disk.encode(&x).unwrap());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let cfg = small(4, 6, 16);
    let m = Model::<f32>::new(cfg.clone(), 32).unwrap();
    let bytes = ckpt_bytes(&m, 0);
    let is_corrupt = |b: &[u8]| matches!(read_checkpoint_from::<f32, _>(b, &cfg), Err(Error::Corrupt { .. }));

    for cut in [0, 3, 10, 40, 60, bytes.len() / 2, bytes.len() - 1] {
        assert!(is_corrupt(&bytes[..cut]), "cut at {cut}");
    }
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(is_corrupt(&magic));
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(is_corrupt(&version));

    // An extra tensor after the last one.
    let mut extra = bytes.clone();
    let name = b"gen/bogus";
    extra.extend_from_slice(&(name.len() as u32).to_le_bytes());
    extra.extend_from_slice(name);
    extra.extend_from_slice(&1u32.to_le_bytes());
    extra.extend_from_slice(&1u32.to_le_bytes());
    extra.extend_from_slice(&0f32.to_le_bytes());
    assert!(is_corrupt(&extra));

    let other = small(8, 8, 48);
    let e = read_checkpoint_from::<f32, _>(&bytes[..], &other).unwrap_err();
    assert_eq!(e.category(), "hash-mismatch");

    let e = load_checkpoint::<f32>(std::path::Path::new("/nonexistent/m.bmck"), &cfg).unwrap_err();
    assert_eq!(e.category(), "io");
}

#[test]
fn config_hash_tracks_architecture() {
    let a = ModelConfig::default();
    assert_eq!(a.hash(), ModelConfig::default().hash());
    assert_ne!(a.hash(), ModelConfig { latent: 8, ..ModelConfig::default() }.hash());
    let json = serde_json::to_string(&a).unwrap();
    let back: ModelConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
    assert!(serde_json::from_str::<ModelConfig>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn precision_cast_preserves_outputs_approximately() {
    let m = Model::<f64>::new(small(4, 6, 16), 40).unwrap();
    let m32: Model<f32> = m.cast();
    let x = random_input(m.config.sample_shape(), 4);
    let a = m.encode(&x).unwrap();
    let b = m32.encode(&x.cast()).unwrap();
    for (p, q) in a.mu.iter().zip(&b.mu) {
        assert!((p - *q as f64).abs() < 1e-4);
    }
}
