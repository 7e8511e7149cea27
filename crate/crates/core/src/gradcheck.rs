//! Central finite differences, used to check reverse-mode gradients.

use crate::scalar::Scalar;

/// `(f(θ + h·e_k) − f(θ − h·e_k)) / 2h` for every coordinate `k`.
pub fn finite_difference_gradient<T, F>(mut f: F, params: &[T], h: T) -> Vec<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let mut theta = params.to_vec();
    let two_h = h + h;
    (0..theta.len())
        .map(|k| {
            let orig = theta[k];
            theta[k] = orig + h;
            let up = f(&theta);
            theta[k] = orig - h;
            let down = f(&theta);
            theta[k] = orig;
            (up - down) / two_h
        })
        .collect()
}

/// Symmetric relative error `|a − b| / max(|a|, |b|, floor)`.
///
/// The floor keeps coordinates whose true derivative is (near) zero from
/// dividing finite-difference round-off by a tiny number.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over paired coordinates.
pub fn max_relative_error<T: Scalar>(a: &[T], b: &[T], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x.to_f64_lossy(), y.to_f64_lossy(), floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let g = finite_difference_gradient(|x: &[f64]| x[0] * x[0], &[3.0], 1e-6);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let g = finite_difference_gradient(|_: &[f64]| 4.2, &[1.0, -2.0, 0.5], 1e-6);
        assert!(g.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn restores_coordinates_between_probes() {
        // f depends on every coordinate; a missed restore would skew later entries.
        let g = finite_difference_gradient(
            |x: &[f64]| x[0] * 2.0 + x[1] * x[1] + x[2].sin(),
            &[1.0, 2.0, 0.0],
            1e-5,
        );
        assert!((g[0] - 2.0).abs() < 1e-8);
        assert!((g[1] - 4.0).abs() < 1e-8);
        assert!((g[2] - 1.0).abs() < 1e-8);
    }
}
