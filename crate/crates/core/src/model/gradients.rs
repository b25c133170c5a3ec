//! Finite-difference checks of every differentiable family used by the model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ExpertBank, Model, ModelConfig};
use crate::autodiff::{
    grad_check, grad_check_piecewise, leaky_relu, leaky_relu_backward, reparameterize, reparameterize_backward, softmax, softmax_backward,
    temporal_resample, temporal_resample_backward, Conv3d, ConvGeom, GradCheckOptions, GradCheckReport, Init,
    Linear, PRelu, ParamId, ParamSet, DISC_LEAKY_SLOPE,
};
use crate::error::Result;
use crate::tensor::Tensor4;

/// Values bounded away from zero so no probe straddles an activation kink.
fn signed(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = rng.random_range(0.2..1.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn input(ps: &mut ParamSet<f64>, rng: &mut ChaCha8Rng, shape: [usize; 4]) -> Result<ParamId> {
    let n = shape.iter().product();
    ps.add("input", &shape, signed(rng, n))
}

fn tensor(ps: &ParamSet<f64>, id: ParamId) -> Tensor4<f64> {
    let s = &ps.param(id).shape;
    Tensor4::from_vec([s[0], s[1], s[2], s[3]], ps.get(id).to_vec()).expect("param shape")
}

fn options(seed: u64) -> GradCheckOptions {
    GradCheckOptions { eps: 1e-3, samples_per_param: 24, abs_floor: 1e-6, seed }
}

fn check_conv(seed: u64, geom: ConvGeom, shape: [usize; 4]) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let conv = Conv3d::new(&mut ps, &mut Init::new(seed), "conv", geom)?;
    let x = input(&mut ps, &mut rng, shape)?;
    let out = geom.out_shape(shape)?;
    let w = signed(&mut rng, out.iter().product());
    let wt = Tensor4::from_vec(out, w.clone())?;
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(conv.forward(p, &tensor(p, x))?.data(), &w)),
        |p| {
            let xt = tensor(p, x);
            let l = dot(conv.forward(p, &xt)?.data(), &w);
            let mut g = p.zero_grads();
            let dx = conv.backward(p, &xt, &wt, Some(&mut g), true).expect("dx requested");
            g.get_mut(x).copy_from_slice(dx.data());
            Ok((l, g))
        },
    )
}

fn check_linear(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let lin = Linear::new(&mut ps, &mut Init::new(seed), "linear", 11, 7)?;
    let x = ps.add("input", &[11], signed(&mut rng, 11))?;
    let w = signed(&mut rng, 7);
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(&lin.forward(p, p.get(x))?, &w)),
        |p| {
            let l = dot(&lin.forward(p, p.get(x))?, &w);
            let mut g = p.zero_grads();
            let dx = lin.backward(p, p.get(x), &w, Some(&mut g), true).expect("dx requested");
            g.get_mut(x).copy_from_slice(&dx);
            Ok((l, g))
        },
    )
}

fn check_prelu(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let act = PRelu::new(&mut ps, "prelu")?;
    let shape = [2, 5, 3, 4];
    let x = input(&mut ps, &mut rng, shape)?;
    let w = signed(&mut rng, 120);
    let wt = Tensor4::from_vec(shape, w.clone())?;
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(act.forward(p, &tensor(p, x)).data(), &w)),
        |p| {
            let xt = tensor(p, x);
            let l = dot(act.forward(p, &xt).data(), &w);
            let mut g = p.zero_grads();
            let dx = act.backward(p, &xt, &wt, Some(&mut g));
            g.get_mut(x).copy_from_slice(dx.data());
            Ok((l, g))
        },
    )
}

/// Checks a parameter-free map `y = f(x)` with adjoint `b(x, y, dy)`.
fn check_map(
    seed: u64,
    n: usize,
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let x = ps.add("input", &[n], signed(&mut rng, n))?;
    let probe = f(ps.get(x))?;
    let w = signed(&mut rng, probe.len());
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(&f(p.get(x))?, &w)),
        |p| {
            let y = f(p.get(x))?;
            let mut g = p.zero_grads();
            g.get_mut(x).copy_from_slice(&b(p.get(x), &y, &w));
            Ok((dot(&y, &w), g))
        },
    )
}

fn check_resample(seed: u64) -> Result<GradCheckReport> {
    let shape = [2, 13, 2, 3];
    let mut worst: Option<GradCheckReport> = None;
    for (i, factor) in [0.25, 0.5, 0.75, 1.0, 1.3, 2.0].into_iter().enumerate() {
        let r = check_map(
            seed + i as u64,
            shape.iter().product(),
            |x| Ok(temporal_resample(&Tensor4::from_vec(shape, x.to_vec())?, factor)?.into_vec()),
            |_, y, dy| {
                let [c, _, r, w] = shape;
                let dyt = Tensor4::from_vec([c, y.len() / (c * r * w), r, w], dy.to_vec()).expect("resample shape");
                temporal_resample_backward(&dyt, shape[1]).into_vec()
            },
        )?;
        if worst.as_ref().is_none_or(|w| r.max_rel_error > w.max_rel_error) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("at least one factor"))
}

fn check_time_scale(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let bank = ExpertBank::new(&mut ps, &mut Init::new(seed), "bank", super::expert_factors(8, 0.25, 2.0), 6, 9)?;
    let shape = [2, 10, 2, 3];
    let x = input(&mut ps, &mut rng, shape)?;
    let cond = signed(&mut rng, 6);
    let target = 14;
    let w = signed(&mut rng, 2 * target * 6);
    let wt = Tensor4::from_vec([2, target, 2, 3], w.clone())?;
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(bank.forward(p, &tensor(p, x), &cond, target)?.0.data(), &w)),
        |p| {
            let (y, cache) = bank.forward(p, &tensor(p, x), &cond, target)?;
            let mut g = p.zero_grads();
            let dx = bank.backward(p, &cache, &wt, Some(&mut g));
            g.get_mut(x).copy_from_slice(dx.data());
            Ok((dot(y.data(), &w), g))
        },
    )
}

fn check_reparam(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ps = ParamSet::new();
    let mu = ps.add("mu", &[9], signed(&mut rng, 9))?;
    let lv = ps.add("logvar", &[9], signed(&mut rng, 9))?;
    let noise = signed(&mut rng, 9);
    let w = signed(&mut rng, 9);
    grad_check(
        &ps,
        &options(seed),
        |p| Ok(dot(&reparameterize(p.get(mu), p.get(lv), &noise), &w)),
        |p| {
            let l = dot(&reparameterize(p.get(mu), p.get(lv), &noise), &w);
            let (dm, dl) = reparameterize_backward(p.get(lv), &noise, &w);
            let mut g = p.zero_grads();
            g.get_mut(mu).copy_from_slice(&dm);
            g.get_mut(lv).copy_from_slice(&dl);
            Ok((l, g))
        },
    )
}

/// A small architecture that still exercises every decoder component.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        rows: 4,
        cols: 6,
        samples: 12,
        latent: 4,
        cond_proj: 5,
        enc_channels: vec![3, 3, 4, 4, 4],
        dec_channels: vec![4, 3, 3, 2],
        up_channels: 2,
        gate_hidden: 6,
        disc_channels: vec![3, 3, 4, 4, 4],
        ..ModelConfig::default()
    }
}

fn check_decode(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Model::<f64>::new(tiny_config(), seed)?;
    let mut ps = model.gen.clone();
    let z = ps.add("latent", &[model.config.latent], signed(&mut rng, model.config.latent))?;
    let cond: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let shape = model.config.sample_shape();
    let w = signed(&mut rng, shape.iter().product());
    let wt = Tensor4::from_vec(shape, w.clone())?;
    let dec = &model.decoder;
    grad_check_piecewise(
        &ps,
        &GradCheckOptions { samples_per_param: 16, ..options(seed) },
        |p| {
            let (y, cache) = dec.forward(p, p.get(z), &cond)?;
            Ok((dot(y.data(), &w), cache.activation_pattern()))
        },
        |p| {
            let (y, cache) = dec.forward(p, p.get(z), &cond)?;
            let mut g = p.zero_grads();
            let dz = dec.backward(p, &cache, &wt, Some(&mut g));
            g.get_mut(z).copy_from_slice(&dz);
            Ok((dot(y.data(), &w), g))
        },
    )
}

/// Runs every family at 64-bit and returns `(family, report)` pairs.
pub fn gradient_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let slope = DISC_LEAKY_SLOPE;
    Ok(vec![
        ("conv3d", check_conv(seed, ConvGeom::new(2, 3, 3, [2, 1, 2], 1)?, [2, 7, 4, 5])?),
        ("pointwise_conv", check_conv(seed + 1, ConvGeom::pointwise(3, 4)?, [3, 4, 2, 3])?),
        ("linear", check_linear(seed + 2)?),
        ("prelu", check_prelu(seed + 3)?),
        (
            "leaky_relu",
            check_map(seed + 4, 40, |x| Ok(leaky_relu(x, slope)), |x, _, dy| leaky_relu_backward(x, dy, slope))?,
        ),
        ("softmax_gate", check_map(seed + 5, 8, |x| Ok(softmax(x)), |_, y, dy| softmax_backward(y, dy))?),
        ("temporal_resample", check_resample(seed + 6)?),
        ("time_scale", check_time_scale(seed + 7)?),
        ("reparameterize", check_reparam(seed + 8)?),
        ("decode", check_decode(seed + 9)?),
    ])
}
