/// Worst relative disagreement between the analytic gradient returned by
/// `f` and central differences of its loss, over every entry of `params`.
/// Relative error is `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn finite_difference_audit<F>(f: F, params: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    assert!(h > 0.0, "step must be positive");
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length");
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let up = f(&p).0;
        p[i] = orig - h;
        let down = f(&p).0;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |p: &[f64]| {
            let l = p.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
            let g = p.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect();
            (l, g)
        };
        assert!(finite_difference_audit(f, &[0.3, -1.2, 2.5], 1e-4) < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = |p: &[f64]| (p[0] * p[0], vec![p[0]]);
        assert!(finite_difference_audit(f, &[1.0], 1e-5) > 0.4);
    }

    #[test]
    fn zero_gradient_point() {
        let f = |p: &[f64]| ((p[0] - p[1]).powi(2), vec![2.0 * (p[0] - p[1]), -2.0 * (p[0] - p[1])]);
        assert!(finite_difference_audit(f, &[0.7, 0.7], 1e-5) < 1e-4);
    }
}
