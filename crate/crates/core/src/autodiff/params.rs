use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Float;

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<F>,
}

/// Named, ordered parameter store. Layers hold [`ParamId`]s into it, so the
/// same set can be shared read-only across concurrent forward passes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<F> {
    params: Vec<Param<F>>,
    by_name: HashMap<String, usize>,
}

impl<F: Float> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], value: Vec<F>) -> Result<ParamId> {
        let name = name.into();
        let n: usize = shape.iter().product();
        if n != value.len() {
            return Err(Error::Shape(format!("parameter {name}: shape {shape:?} vs {} values", value.len())));
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        self.by_name.insert(name.clone(), self.params.len());
        self.params.push(Param { name, shape: shape.to_vec(), value });
        Ok(ParamId(self.params.len() - 1))
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &[F] {
        &self.params[id.0].value
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param<F> {
        &self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<F>> {
        self.params.iter()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads<F> {
        Grads { bufs: self.params.iter().map(|p| vec![F::zero(); p.value.len()]).collect() }
    }

    pub fn cast<G: Float>(&self) -> ParamSet<G> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    value: p.value.iter().map(|v| G::from_f64(v.as_f64())).collect(),
                })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

/// Gradient buffers laid out like the [`ParamSet`] that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<F> {
    bufs: Vec<Vec<F>>,
}

impl<F: Float> Grads<F> {
    #[inline]
    pub fn get(&self, id: ParamId) -> &[F] {
        &self.bufs[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.bufs[id.0]
    }

    /// Two distinct buffers borrowed mutably at once.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [F], &mut [F]) {
        assert_ne!(a.0, b.0, "pair_mut needs distinct parameters");
        if a.0 < b.0 {
            let (lo, hi) = self.bufs.split_at_mut(b.0);
            (&mut lo[a.0], &mut hi[0])
        } else {
            let (lo, hi) = self.bufs.split_at_mut(a.0);
            (&mut hi[0], &mut lo[b.0])
        }
    }

    pub fn buffers(&self) -> &[Vec<F>] {
        &self.bufs
    }

    /// Element-wise `self += other`. Callers reduce per-sample gradients in a
    /// fixed order so results are reproducible.
    pub fn accumulate(&mut self, other: &Grads<F>) {
        assert_eq!(self.bufs.len(), other.bufs.len());
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        for b in &mut self.bufs {
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> F {
        self.bufs.iter().flatten().fold(F::zero(), |m, v| m.max(v.abs()))
    }
}

/// Seeded initializer. Weights and biases are drawn from
/// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Init { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform<F: Float>(&mut self, n: usize, bound: f64) -> Vec<F> {
        (0..n).map(|_| F::from_f64(self.rng.random_range(-bound..=bound))).collect()
    }

    pub fn fan_in<F: Float>(&mut self, n: usize, fan_in: usize) -> Vec<F> {
        self.uniform(n, 1.0 / (fan_in.max(1) as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut ps = ParamSet::<f32>::new();
        ps.add("w", &[2], vec![0.0; 2]).unwrap();
        assert!(matches!(ps.add("w", &[1], vec![0.0]), Err(Error::Config(_))));
    }

    #[test]
    fn grads_mirror_param_shapes() {
        let mut ps = ParamSet::<f64>::new();
        let a = ps.add("a", &[2, 3], vec![1.0; 6]).unwrap();
        let b = ps.add("b", &[4], vec![1.0; 4]).unwrap();
        let g = ps.zero_grads();
        assert_eq!(g.get(a).len(), 6);
        assert_eq!(g.get(b).len(), 4);
    }

    #[test]
    fn init_is_seeded() {
        let x: Vec<f32> = Init::new(3).fan_in(10, 4);
        let y: Vec<f32> = Init::new(3).fan_in(10, 4);
        assert_eq!(x, y);
        assert!(x.iter().all(|v| v.abs() <= 0.5));
    }
}
