use crate::error::{Error, Result};
use crate::tensor::Float;

/// Root-mean-square error normalized by the ground truth's range, in percent.
/// `truth` supplies the range, so the metric is not symmetric.
pub fn nrmse<F: Float, G: Float>(truth: &[F], pred: &[G]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!("nrmse over {} and {} values", truth.len(), pred.len())));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sq = 0.0;
    for (&x, &y) in truth.iter().zip(pred) {
        let x = x.as_f64();
        lo = lo.min(x);
        hi = hi.max(x);
        let d = x - y.as_f64();
        sq += d * d;
    }
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidInput(format!("nrmse: ground truth has degenerate range {range}")));
    }
    Ok((sq / truth.len() as f64).sqrt() / range * 100.0)
}
