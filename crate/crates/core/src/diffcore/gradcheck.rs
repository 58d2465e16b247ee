//! Central finite differences: the reference oracle for every derivative in
//! the crate. Only loss *values* are used here, never a reverse pass.

/// Step used throughout the oracle suite.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            let orig = probe[j];
            probe[j] = orig + h;
            let up = f(&probe);
            probe[j] = orig - h;
            let down = f(&probe);
            probe[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference derivative of a scalar function.
pub fn central_derivative<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Max-norm relative error `‖a − b‖∞ / max(‖b‖∞, floor)`.
///
/// The floor keeps the ratio meaningful when the reference is (near) zero.
pub fn relative_error(actual: &[f64], reference: &[f64], floor: f64) -> f64 {
    assert_eq!(actual.len(), reference.len());
    let diff = actual
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = reference.iter().fold(floor, |m, b| m.max(b.abs()));
    diff / scale
}
