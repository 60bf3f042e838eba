use super::Matrix;
use crate::error::{Error, Result};

/// Compares `analytic` against central differences of `f` around `x`.
///
/// Returns the largest `|fd - analytic| / max(1, |analytic|)` over all
/// entries.
pub fn finite_diff_check<F>(mut f: F, analytic: &Matrix, x: &Matrix, h: f64) -> Result<f64>
where
    F: FnMut(&Matrix) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("finite-difference step must be > 0, got {h}")));
    }
    if analytic.shape() != x.shape() {
        return Err(Error::shape("finite_diff_check", x.shape(), analytic.shape()));
    }
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for idx in 0..x.len() {
        let orig = x.data()[idx];
        probe.data_mut()[idx] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[idx] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[idx] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at perturbed entry {idx}"
            )));
        }
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic.data()[idx];
        worst = worst.max((fd - a).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}
