//! Central finite-difference verification of analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::params::{Grads, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::Float;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub eps: f64,
    /// Coordinates probed per parameter (all of them when fewer exist).
    pub samples_per_param: usize,
    /// Denominator floor so vanishing gradients are compared absolutely.
    pub abs_floor: f64,
    pub seed: u64,
}

impl GradCheckOptions {
    pub fn for_bits(bits: u32) -> Self {
        if bits >= 64 {
            GradCheckOptions { eps: 1e-4, samples_per_param: 64, abs_floor: 1e-8, seed: 0 }
        } else {
            GradCheckOptions { eps: 1e-2, samples_per_param: 64, abs_floor: 1e-3, seed: 0 }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Step halvings (by 4) tried when a probe leaves the base activation region.
const MAX_REFINEMENTS: usize = 8;

/// Worst relative disagreement between `grad`'s analytic gradient and a
/// fourth-order central difference of `loss`, over a seeded subsample of coordinates of
/// every parameter in `params`.
pub fn grad_check<F, L, G>(params: &ParamSet<F>, opts: &GradCheckOptions, loss: L, grad: G) -> Result<GradCheckReport>
where
    F: Float,
    L: Fn(&ParamSet<F>) -> Result<F>,
    G: Fn(&ParamSet<F>) -> Result<(F, Grads<F>)>,
{
    grad_check_piecewise(params, opts, |p| Ok((loss(p)?, Vec::new())), grad)
}

/// As [`grad_check`] for piecewise-smooth losses. `loss` also returns the
/// activation pattern (which side of each kink every unit sits on); a probe
/// whose pattern differs from the base point's crossed a kink, so its step is
/// shrunk until both probes stay in the base region.
pub fn grad_check_piecewise<F, L, G>(
    params: &ParamSet<F>,
    opts: &GradCheckOptions,
    loss: L,
    grad: G,
) -> Result<GradCheckReport>
where
    F: Float,
    L: Fn(&ParamSet<F>) -> Result<(F, Vec<bool>)>,
    G: Fn(&ParamSet<F>) -> Result<(F, Grads<F>)>,
{
    let (l0, analytic) = grad(params)?;
    if !l0.is_finite() {
        return Err(Error::NonFinite(format!("grad check: loss is {l0}")));
    }
    let base = loss(params)?.1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for id in params.ids() {
        let n = params.get(id).len();
        let coords: Vec<usize> = if n <= opts.samples_per_param {
            (0..n).collect()
        } else {
            let mut v = rand::seq::index::sample(&mut rng, n, opts.samples_per_param).into_vec();
            v.sort_unstable();
            v
        };
        for i in coords {
            let orig = params.get(id)[i];
            let mut eps = opts.eps;
            let mut numeric = 0.0;
            for attempt in 0..=MAX_REFINEMENTS {
                // Fourth-order stencil: (8(f(h) - f(-h)) - (f(2h) - f(-2h))) / 12h.
                let mut f = [0.0; 4];
                let mut inside = true;
                for (k, step) in [eps, -eps, 2.0 * eps, -2.0 * eps].into_iter().enumerate() {
                    probe.get_mut(id)[i] = F::from_f64(orig.as_f64() + step);
                    let (l, pattern) = loss(&probe)?;
                    f[k] = l.as_f64();
                    inside &= pattern == base;
                }
                probe.get_mut(id)[i] = orig;
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "grad check: perturbed loss at {}[{i}]",
                        params.param(id).name
                    )));
                }
                numeric = (8.0 * (f[0] - f[1]) - (f[2] - f[3])) / (12.0 * eps);
                if inside || attempt == MAX_REFINEMENTS {
                    break;
                }
                eps /= 4.0;
            }
            let a = analytic.get(id)[i].as_f64();
            let denom = a.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel = (a - numeric).abs() / denom;
            report.coordinates += 1;
            if rel > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = rel;
                report.worst_param = params.param(id).name.clone();
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_computation_has_zero_gradients() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("p", &[5], vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let r = grad_check(
            &ps,
            &GradCheckOptions::for_bits(64),
            |_| Ok(3.0),
            |p| Ok((3.0, p.zero_grads())),
        )
        .unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert_eq!(r.coordinates, 5);
        assert_eq!(r.numeric, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut ps = ParamSet::<f64>::new();
        let id = ps.add("p", &[1], vec![2.0]).unwrap();
        let r = grad_check(
            &ps,
            &GradCheckOptions::for_bits(64),
            |p| Ok(p.get(id)[0].powi(2)),
            |p| {
                let mut g = p.zero_grads();
                g.get_mut(id)[0] = 3.0 * p.get(id)[0];
                Ok((p.get(id)[0].powi(2), g))
            },
        )
        .unwrap();
        assert!(r.max_rel_error > 0.2);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut ps = ParamSet::<f64>::new();
        ps.add("p", &[1], vec![0.0]).unwrap();
        let r = grad_check(&ps, &GradCheckOptions::for_bits(64), |_| Ok(f64::NAN), |p| Ok((f64::NAN, p.zero_grads())));
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
