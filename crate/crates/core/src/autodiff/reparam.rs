use crate::tensor::Float;

/// `z = mu + exp(0.5 * logvar) * noise`.
pub fn reparameterize<F: Float>(mu: &[F], logvar: &[F], noise: &[F]) -> Vec<F> {
    assert_eq!(mu.len(), logvar.len());
    assert_eq!(mu.len(), noise.len());
    let half = F::from_f64(0.5);
    mu.iter()
        .zip(logvar)
        .zip(noise)
        .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
        .collect()
}

/// Gradients with respect to `(mu, logvar)`. The noise is a constant.
pub fn reparameterize_backward<F: Float>(logvar: &[F], noise: &[F], dz: &[F]) -> (Vec<F>, Vec<F>) {
    let half = F::from_f64(0.5);
    let dlogvar = logvar
        .iter()
        .zip(noise)
        .zip(dz)
        .map(|((&lv, &e), &g)| g * half * (half * lv).exp() * e)
        .collect();
    (dz.to_vec(), dlogvar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(reparameterize(&[0.0f64], &[0.0], &[0.5]), vec![0.5]);
        assert_eq!(reparameterize(&[1.25f64, -2.0], &[0.3, 4.0], &[0.0, 0.0]), vec![1.25, -2.0]);
        let z = reparameterize(&[1.0f64], &[4f64.ln()], &[1.0]);
        assert!((z[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_skips_noise() {
        let (dmu, dlv) = reparameterize_backward(&[0.0f64], &[2.0], &[1.0]);
        assert_eq!(dmu, vec![1.0]);
        assert_eq!(dlv, vec![1.0]);
    }
}
