//! Dense linear-algebra helpers shared by the formation modules.
//!
//! Everything here is a thin layer over `nalgebra`: Kronecker lifting,
//! stacked-vector block access, scale-relative zero thresholds, SVD-based
//! minimum-norm solves and the general (nonsymmetric) eigenvalue routine.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{FormationError, Result};

/// Relative threshold used to decide the numerical rank in least-squares solves.
pub const RANK_RTOL: f64 = 1e-10;

/// `a ⊗ I_m`.
pub fn lift(a: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    a.kronecker(&DMatrix::<f64>::identity(m, m))
}

/// Eigenvalues with modulus below this are treated as zero for a matrix of
/// spectral norm `norm`.
pub fn zero_threshold(norm: f64) -> f64 {
    1e-9 * norm.max(1.0)
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Ratio of the largest to the smallest singular value (`inf` when singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Minimum-norm least-squares solution of `a x = b`.
///
/// Singular values below `RANK_RTOL * sigma_max` are discarded. Returns the
/// solution together with the numerical rank.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0);
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return (DVector::zeros(a.ncols()), 0);
    }
    let cutoff = RANK_RTOL * sigma_max;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let x = svd
        .solve(b, cutoff)
        .expect("svd was computed with both singular vector sets");
    (x, rank)
}

/// Full complex spectrum of a general square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let rows = a.nrows();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    if (a - a.transpose()).amax() <= 1e-14 * scale {
        let sym = (a + a.transpose()) * 0.5;
        return Ok(sym
            .symmetric_eigenvalues()
            .iter()
            .map(|&re| Complex::new(re, 0.0))
            .collect());
    }
    // The Francis iteration can stall on highly structured inputs. Eigenvalues
    // are invariant under orthogonal similarity, so retry on reflected copies.
    for attempt in 0..4 {
        let m = if attempt == 0 {
            a.clone()
        } else {
            let h = householder(rows, attempt);
            &h * a * &h
        };
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, 1000 * rows) {
            return Ok(schur.complex_eigenvalues().iter().cloned().collect());
        }
    }
    Err(FormationError::EigenNonConvergence {
        rows,
        dump: format!("{a:.17e}"),
    })
}

/// Deterministic Householder reflector `I - 2 v vᵀ / ‖v‖²`.
fn householder(n: usize, seed: usize) -> DMatrix<f64> {
    let v = DVector::from_fn(n, |i, _| ((i + 1) as f64 * 0.754_877_666 * seed as f64).sin() + 0.5);
    let vv = v.dot(&v);
    DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv)
}

/// View of block `i` (length `m`) of a stacked vector.
pub fn block(v: &DVector<f64>, i: usize, m: usize) -> DVector<f64> {
    v.rows(i * m, m).into_owned()
}

/// `1_n ⊗ x`.
pub fn repeat_block(x: &DVector<f64>, n: usize) -> DVector<f64> {
    let m = x.len();
    DVector::from_fn(n * m, |r, _| x[r % m])
}

/// Mean of the `n` blocks of a stacked vector.
pub fn block_mean(v: &DVector<f64>, m: usize) -> DVector<f64> {
    let n = v.len() / m;
    let mut mean = DVector::zeros(m);
    for i in 0..n {
        mean += v.rows(i * m, m);
    }
    if n > 0 {
        mean /= n as f64;
    }
    mean
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_places_identity_blocks() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let l = lift(&a, 2);
        assert_eq!(l.shape(), (4, 2));
        assert_eq!(l, DMatrix::from_row_slice(4, 2, &[1., 0., 0., 1., -1., 0., 0., -1.]));
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        // x + y = 2 has minimum-norm solution (1, 1).
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, rank) = min_norm_solve(&a, &DVector::from_vec(vec![2.0]));
        assert_eq!(rank, 1);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_columns_are_dropped() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let (_, rank) = min_norm_solve(&a, &DVector::from_vec(vec![1.0, 2.0]));
        assert_eq!(rank, 1);
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.partial_cmp(&y.im).unwrap());
        assert_relative_eq!(ev[0].re, 0.0, epsilon = 1e-14);
        assert_relative_eq!(ev[0].im, -2.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].im, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn lifted_path_laplacian_spectrum() {
        // Path 4-1-2-3 lifted to the plane; plain Schur stalls on this input.
        let l = DMatrix::from_row_slice(4, 4, &[
            2., -1., 0., -1., -1., 2., -1., 0., 0., -1., 1., 0., -1., 0., 0., 1.,
        ]);
        let mut ev: Vec<f64> = eigenvalues(&lift(&l, 2)).unwrap().iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        let s2 = 2f64.sqrt();
        let expected = [0., 0., 2. - s2, 2. - s2, 2., 2., 2. + s2, 2. + s2];
        for (a, b) in ev.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_lifted_laplacian_spectrum() {
        // diag(1, a) L for a single edge has eigenvalues {0, 1 + a}.
        let a = 1.3;
        let dl = DMatrix::from_row_slice(2, 2, &[1., -1., -a, a]);
        let mut ev: Vec<f64> = eigenvalues(&lift(&dl, 2)).unwrap().iter().map(|c| c.re).collect();
        ev.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip([0., 0., 1. + a, 1. + a]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn block_helpers() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0, 6.0]);
        assert_eq!(block(&v, 1, 2), DVector::from_vec(vec![3.0, 6.0]));
        assert_eq!(block_mean(&v, 2), DVector::from_vec(vec![2.0, 4.0]));
        let r = repeat_block(&DVector::from_vec(vec![5.0, -2.0]), 3);
        assert_eq!(r.as_slice(), &[5.0, -2.0, 5.0, -2.0, 5.0, -2.0]);
    }
}
