//! Central-difference Jacobian, used as the independent oracle for the
//! analytic sensitivities elsewhere in the crate.

/// Jacobian of `f` at `x`: `out[row][col] = d f_row / d x_col`, estimated by
/// central differences with perturbation `eps`.
pub fn finite_diff_jacobian<F>(f: F, x: &[f64], eps: f64) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(eps > 0.0, "perturbation must be positive");
    let base = f(x);
    let rows = base.len();
    let cols = x.len();
    let mut jacobian = vec![vec![0.0; cols]; rows];
    let mut probe = x.to_vec();
    for col in 0..cols {
        let original = probe[col];
        probe[col] = original + eps;
        let plus = f(&probe);
        probe[col] = original - eps;
        let minus = f(&probe);
        probe[col] = original;
        for row in 0..rows {
            jacobian[row][col] = (plus[row] - minus[row]) / (2.0 * eps);
        }
    }
    jacobian
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_function_gives_identity_matrix() {
        let j = finite_diff_jacobian(|x| x.to_vec(), &[0.3, -1.2, 5.0], 1e-6);
        for (r, row) in j.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let expected = if r == c { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn scalar_square_matches_analytic_derivative() {
        let j = finite_diff_jacobian(|x| vec![x[0] * x[0]], &[3.0], 1e-5);
        assert!((j[0][0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_gives_zero_matrix() {
        let j = finite_diff_jacobian(|_| vec![7.0, -2.0], &[1.0, 2.0], 1e-6);
        assert!(j.iter().flatten().all(|&v| v == 0.0));
    }
}
