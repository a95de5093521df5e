#![allow(dead_code)]

/// Five-point first derivative of a vector-valued path at `t = 0`.
pub fn d1<F: Fn(f64) -> Vec<f64>>(f: F, h: f64) -> Vec<f64> {
    let (a, b, c, d) = (f(-2.0 * h), f(-h), f(h), f(2.0 * h));
    (0..a.len()).map(|i| (a[i] - 8.0 * b[i] + 8.0 * c[i] - d[i]) / (12.0 * h)).collect()
}

/// Five-point second derivative of a vector-valued path at `t = 0`.
pub fn d2<F: Fn(f64) -> Vec<f64>>(f: F, h: f64) -> Vec<f64> {
    let (a, b, z, c, d) = (f(-2.0 * h), f(-h), f(0.0), f(h), f(2.0 * h));
    (0..a.len())
        .map(|i| (-a[i] + 16.0 * b[i] - 30.0 * z[i] + 16.0 * c[i] - d[i]) / (12.0 * h * h))
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Norm-wise relative deviation `|a - b|_inf / max(|a|_inf, |b|_inf)`.
pub fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = max_abs(a).max(max_abs(b));
    if scale == 0.0 {
        0.0
    } else {
        max_abs(&diff) / scale
    }
}

/// Like [`rel_dev`], but never dividing by less than `floor`. Use when the
/// quantity is a sum of terms of size `floor` that may cancel.
pub fn rel_dev_floor(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&diff) / max_abs(a).max(max_abs(b)).max(floor)
}
