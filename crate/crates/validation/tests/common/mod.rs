//! Test oracles that do not go through the library's own solvers.

use nalgebra::{Complex, DMatrix, DVector, Schur};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

/// Random labelled tree on `n` nodes as 1-based edge pairs (parent, child).
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|child| (rng.random_range(0..child) + 1, child + 1)).collect()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, half_width: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// Endpoint of `ṗ = -A p + f` from `p0` when the translating solution
/// `p_p(t) = p* + d t` is known, using the eigen-decomposition of `A`:
///
/// `p(T) = p* + d T + V e^{-Λ T} V⁻¹ (p0 - p*)`.
///
/// Returns `None` when `A` is not diagonalizable to working precision.
pub fn modal_endpoint(
    a: &DMatrix<f64>,
    p_star: &DVector<f64>,
    drift: &DVector<f64>,
    p0: &DVector<f64>,
    t: f64,
) -> Option<DVector<f64>> {
    let n = a.nrows();
    let scale = a.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
    let eig: Vec<C> = Schur::try_new(a.clone(), f64::EPSILON, 100_000)?
        .complex_eigenvalues()
        .iter()
        .cloned()
        .collect();

    // Group numerically repeated eigenvalues.
    let tol = 1e-7 * scale;
    let mut clusters: Vec<(C, usize)> = Vec::new();
    for lambda in eig {
        match clusters.iter_mut().find(|(c, _)| (*c - lambda).norm() < tol) {
            Some((c, k)) => {
                *c = (*c * (*k as f64) + lambda) / ((*k + 1) as f64);
                *k += 1;
            }
            None => clusters.push((lambda, 1)),
        }
    }

    let ac: DMatrix<C> = a.map(|x| C::new(x, 0.0));
    let mut vectors: Vec<DVector<C>> = Vec::with_capacity(n);
    let mut values: Vec<C> = Vec::with_capacity(n);
    for (lambda, k) in clusters {
        let shifted = &ac - DMatrix::<C>::identity(n, n) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        for &idx in order.iter().take(k) {
            if svd.singular_values[idx] > 1e-6 * scale {
                return None;
            }
            vectors.push(v_t.row(idx).adjoint());
            values.push(lambda);
        }
    }

    let v = DMatrix::<C>::from_columns(&vectors);
    let e0: DVector<C> = (p0 - p_star).map(|x| C::new(x, 0.0));
    let coeff = v.clone().lu().solve(&e0)?;
    let mut e_t = DVector::<C>::zeros(n);
    for (k, lambda) in values.iter().enumerate() {
        e_t += v.column(k) * (coeff[k] * (-*lambda * t).exp());
    }
    let imag = e_t.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    let real_scale = e0.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    if imag > 1e-8 * real_scale {
        return None;
    }
    Some(p_star + drift * t + e_t.map(|z| z.re))
}
