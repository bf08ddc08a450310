//! Small dense linear-algebra helpers shared by the spectral modules.
//!
//! Everything here works on `nalgebra` dynamic matrices. Matrices are assumed
//! to be at most a few hundred rows, so dense SVD and Schur factorizations are
//! used freely.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Largest singular value of `diag(√π) · A · diag(1/√π)`, i.e. the operator
/// norm of `A` acting on `L²(π)`. All weights must be strictly positive.
pub fn weighted_spectral_norm(a: &CMatrix, pi: &[f64]) -> f64 {
    let n = a.nrows();
    debug_assert_eq!(n, pi.len());
    if n == 0 {
        return 0.0;
    }
    let sq: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let b = CMatrix::from_fn(n, n, |i, j| a[(i, j)] * (sq[i] / sq[j]));
    largest_singular_value(&b)
}

pub fn largest_singular_value(m: &CMatrix) -> f64 {
    if m.iter().all(|z| z.norm() == 0.0) {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// All eigenvalues via the complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    m.clone()
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .cloned()
        .collect()
}

/// Right and left eigenvectors for the eigenvalue `lambda` of `m`.
///
/// The left vector `w` satisfies `wᵀ m = λ wᵀ` (plain transpose, no conjugate).
pub fn eigenvector_pair(m: &CMatrix, lambda: Complex64) -> (CVector, CVector) {
    let n = m.nrows();
    let shifted = m - CMatrix::identity(n, n) * lambda;
    (null_vector(&shifted), null_vector(&shifted.transpose()))
}

/// Unit vector spanning the (near-)kernel of `a`: the right singular vector
/// of the smallest singular value, polished by inverse iteration. Only `V`
/// of the SVD is used; `U` of nalgebra's complex SVD is unreliable for some
/// 2×2 inputs.
fn null_vector(a: &CMatrix) -> CVector {
    let n = a.nrows();
    let svd = a.clone().svd(false, true);
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut v: CVector = svd.v_t.expect("requested V^H").row(k).adjoint();
    let scale = a.norm().max(1.0);
    let shift = CMatrix::identity(n, n) * Complex64::new(scale * 1e-14, 0.0);
    let lu = (a + shift).full_piv_lu();
    for _ in 0..2 {
        if (a * &v).norm() <= 1e-15 * scale {
            break;
        }
        match lu.solve(&v) {
            Some(x) if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && x.norm() > 0.0 => {
                v = x.unscale(x.norm());
            }
            _ => break,
        }
    }
    v
}

/// Rank-one spectral projection `r wᵀ / (wᵀ r)`.
pub fn rank_one_projection(right: &CVector, left: &CVector) -> CMatrix {
    let denom = left.transpose() * right;
    right * left.transpose() / denom[(0, 0)]
}

pub fn mat_pow(m: &CMatrix, mut n: u64) -> CMatrix {
    let size = m.nrows();
    let mut result = CMatrix::identity(size, size);
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Taylor coefficients `B_0..B_K` of `exp(C_0 + s C_1 + … + s^K C_K)` in `s`,
/// truncated at order `K = coeffs.len() − 1`.
///
/// Uses the exponential of the upper block-Toeplitz matrix whose `j`-th block
/// superdiagonal holds `C_j`; block `(0, j)` of the result is `B_j`.
pub fn power_series_exp(coeffs: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let k = coeffs.len();
    let s = coeffs[0].nrows();
    let mut big = DMatrix::<f64>::zeros(k * s, k * s);
    for a in 0..k {
        for (j, c) in coeffs.iter().enumerate().take(k - a) {
            let b = a + j;
            big.view_mut((a * s, b * s), (s, s)).copy_from(c);
        }
    }
    let e = big.exp();
    (0..k).map(|j| e.view((0, j * s), (s, s)).into_owned()).collect()
}

/// Solve `x · A = b` for a row vector `x`.
pub fn solve_left(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.transpose().lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eigenvector_pair_of_symmetric_fourier_matrix() {
        // P diag(e^{iζξ}) with P = [[.6, .4], [.4, .6]], ξ = ±1, ζ = −0.11.
        let z = -0.1105263157894737f64;
        let e = |s: f64| Complex64::from_polar(1.0, s * z);
        let m = CMatrix::from_row_slice(2, 2, &[e(-1.0) * 0.6, e(1.0) * 0.4, e(-1.0) * 0.4, e(1.0) * 0.6]);
        for lambda in eigenvalues(&m) {
            let (r, w) = eigenvector_pair(&m, lambda);
            assert!((&m * &r - &r * lambda).norm() < 1e-13);
            assert!((w.transpose() * &m - w.transpose() * lambda).norm() < 1e-13);
            let proj = rank_one_projection(&r, &w);
            assert!((&m * &proj - &proj * &m).norm() < 1e-13);
        }
    }

    #[test]
    fn weighted_norm_of_projection_is_one() {
        let pi = [0.4, 0.6];
        let proj = CMatrix::from_row_slice(2, 2, &[c(0.4), c(0.6), c(0.4), c(0.6)]);
        assert!((weighted_spectral_norm(&proj, &pi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_pair_of_cycle() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[c(0.0), c(1.0), c(0.0), c(0.0), c(0.0), c(1.0), c(1.0), c(0.0), c(0.0)],
        );
        let ev = eigenvalues(&m);
        let top = ev.iter().find(|z| (z.re - 1.0).abs() < 1e-8).cloned().unwrap();
        let (r, w) = eigenvector_pair(&m, top);
        let mr = &m * &r;
        let wm = w.transpose() * &m;
        assert!((mr - &r * top).norm() < 1e-10);
        assert!((wm - w.transpose() * top).norm() < 1e-10);
    }

    #[test]
    fn power_series_exp_gives_scalar_moments() {
        // exp(s) has Taylor coefficients 1/j!.
        let coeffs = vec![
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 0.0),
        ];
        let b = power_series_exp(&coeffs);
        let expected = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (bj, e) in b.iter().zip(expected) {
            assert!((bj[(0, 0)] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn mat_pow_matches_repeated_product() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.7), c(0.3), c(0.2), c(0.8)]);
        let p5 = mat_pow(&m, 5);
        let mut q = CMatrix::identity(2, 2);
        for _ in 0..5 {
            q = &q * &m;
        }
        assert!((p5 - q).norm() < 1e-14);
    }
}
