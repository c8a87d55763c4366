//! Spectrum and stability verdict for closed-loop system matrices `A` in
//! `ṗ = -A p + f`.
//!
//! A formation closed loop is stable when `A` keeps exactly the `m` consensus
//! directions `1_n ⊗ ê_l` as its kernel and every other eigenvalue sits strictly
//! in the open right half-plane.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FormationError, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl Eigenvalue {
    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Eigenvalue>,
    pub zero_count: usize,
    /// Smallest real part among the nonzero eigenvalues (`+inf` if none).
    pub min_nonzero_real: f64,
    /// `max_l ‖A (1_n ⊗ ê_l)‖`.
    pub kernel_residual: f64,
    /// Threshold used to classify an eigenvalue as zero.
    pub zero_tolerance: f64,
    pub stable: bool,
}

impl SpectrumReport {
    /// Largest absolute real part, used to size explicit integration steps.
    pub fn max_abs_real(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc, e| acc.max(e.re.abs()))
    }
}

/// Full spectrum of `system` together with the consensus-stability verdict for
/// ambient dimension `m`.
pub fn spectrum_report(system: &DMatrix<f64>, m: usize) -> Result<SpectrumReport> {
    if !system.is_square() {
        return Err(FormationError::DimensionMismatch {
            what: "system matrix columns",
            expected: system.nrows(),
            found: system.ncols(),
        });
    }
    if m == 0 || !system.nrows().is_multiple_of(m) {
        return Err(FormationError::DimensionMismatch {
            what: "system size (multiple of m)",
            expected: m,
            found: system.nrows(),
        });
    }
    let norm = linalg::spectral_norm(system);
    let tol = linalg::zero_threshold(norm);

    let mut eigenvalues: Vec<Eigenvalue> = linalg::eigenvalues(system)?
        .into_iter()
        .map(|c| Eigenvalue { re: c.re, im: c.im })
        .collect();
    eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let zero_count = eigenvalues.iter().filter(|e| e.norm() < tol).count();
    let min_nonzero_real = eigenvalues
        .iter()
        .filter(|e| e.norm() >= tol)
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min);

    let n = system.nrows() / m;
    let kernel_residual = (0..m)
        .map(|l| {
            let dir = DVector::from_fn(n * m, |r, _| if r % m == l { 1.0 } else { 0.0 });
            (system * dir).norm()
        })
        .fold(0.0, f64::max);

    let kernel_ok = kernel_residual <= 1e-12 * norm.max(1.0) * (n as f64).sqrt();
    let stable = zero_count == m && min_nonzero_real > tol && kernel_ok;

    Ok(SpectrumReport {
        eigenvalues,
        zero_count,
        min_nonzero_real,
        kernel_residual,
        zero_tolerance: tol,
        stable,
    })
}
