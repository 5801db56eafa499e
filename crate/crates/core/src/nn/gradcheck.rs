/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference check of `analytic` (the gradient of `f` at `point`).
/// Returns the largest per-coordinate relative error.
pub fn gradient_check<F>(f: F, analytic: &[f64], point: &[f64], eps: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), point.len(), "gradient/point length mismatch");
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let plus = f(&x);
        x[i] = orig - eps;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

/// Like [`gradient_check`], but each coordinate is compared against central
/// differences at every step in `steps` and keeps its best agreement.
///
/// Deep compositions have coordinates whose gradient is too small to resolve
/// at a fine step (round-off) while a coarse step may cross a max-pooling
/// switch; a correct coordinate agrees at one of them, a wrong one at none.
pub fn gradient_check_steps<F>(f: F, analytic: &[f64], point: &[f64], steps: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), point.len(), "gradient/point length mismatch");
    assert!(!steps.is_empty(), "no finite-difference steps");
    let mut x = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x[i];
        let mut best = f64::INFINITY;
        for &eps in steps {
            x[i] = orig + eps;
            let plus = f(&x);
            x[i] = orig - eps;
            let minus = f(&x);
            x[i] = orig;
            best = best.min(relative_error(analytic[i], (plus - minus) / (2.0 * eps)));
        }
        worst = worst.max(best);
    }
    worst
}
