/// Compare analytic gradients against central finite differences.
///
/// `f` evaluates the scalar objective at a flat parameter vector; the
/// check perturbs one coordinate at a time by ±h and returns the
/// maximum over coordinates of |analytic − numeric| / max(|analytic|,
/// |numeric|, 1e-8).
pub fn finite_diff_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite_diff_check requires h > 0");
    assert_eq!(
        params.len(),
        analytic.len(),
        "parameter and gradient lengths differ"
    );
    let mut x = params.to_vec();
    let mut max_rel = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let f_plus = f(&x);
        x[i] = orig - h;
        let f_minus = f(&x);
        x[i] = orig;
        let numeric = (f_plus - f_minus) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}
