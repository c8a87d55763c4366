//! Mismatched relative-position sensing.
//!
//! Agent `i` perceives every relative position through its own scale factor
//! `a_i > 0` and misalignment `R_i ∈ SO(m)`, so the nominal law becomes
//!
//! ```text
//! ṗ = -D_x L̄ p + L̄ p*,    D_x = blockdiag(a_i R_i)
//! ```
//!
//! On tree graphs the steady state is a distorted copy of the reference shape
//! drifting with a common residual velocity. Both are available in closed form
//! and computed by [`predict_distortion`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FormationError, Result};
use crate::framework::Framework;
use crate::graph;
use crate::linalg;
use crate::shape::{self, Configuration, RelPosStack};
use crate::spectrum::{spectrum_report, SpectrumReport};

/// Condition number above which `B̄ᵀ D_x B̄ D̄_ω` is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Consistency residual above which a prediction is logged as suspicious.
pub const CONSISTENCY_WARN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    scales: Vec<f64>,
    rotations: Vec<DMatrix<f64>>,
}

impl SensorModel {
    pub fn new(scales: Vec<f64>, rotations: Vec<DMatrix<f64>>) -> Result<Self> {
        if scales.len() != rotations.len() {
            return Err(FormationError::InvalidSensor(format!(
                "{} scale factors but {} rotations",
                scales.len(),
                rotations.len()
            )));
        }
        if scales.is_empty() {
            return Err(FormationError::InvalidSensor("no agents".into()));
        }
        let m = rotations[0].nrows();
        for (i, (&a, r)) in scales.iter().zip(&rotations).enumerate() {
            if !(a > 0.0) || !a.is_finite() {
                return Err(FormationError::InvalidSensor(format!(
                    "agent {}: scale factor must be positive, got {a}",
                    i + 1
                )));
            }
            if r.shape() != (m, m) {
                return Err(FormationError::InvalidSensor(format!(
                    "agent {}: rotation must be {m}x{m}",
                    i + 1
                )));
            }
            let orth = (r.transpose() * r - DMatrix::<f64>::identity(m, m)).abs().max();
            if orth > 1e-10 {
                return Err(FormationError::InvalidSensor(format!(
                    "agent {}: rotation is not orthogonal (|RᵀR - I| = {orth:.3e})",
                    i + 1
                )));
            }
            let det = r.determinant();
            if (det - 1.0).abs() > 1e-10 {
                return Err(FormationError::InvalidSensor(format!(
                    "agent {}: rotation has determinant {det}",
                    i + 1
                )));
            }
        }
        Ok(SensorModel { scales, rotations })
    }

    /// Planar model from per-agent misalignment angles in radians.
    pub fn planar(scales: Vec<f64>, angles: &[f64]) -> Result<Self> {
        Self::new(scales, angles.iter().map(|&t| rotation_2d(t)).collect())
    }

    pub fn perfect(n: usize, m: usize) -> Self {
        SensorModel {
            scales: vec![1.0; n],
            rotations: vec![DMatrix::identity(m, m); n],
        }
    }

    /// Every agent shares the scale `a` and misalignment `r`.
    pub fn uniform(n: usize, a: f64, r: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![a; n], vec![r; n])
    }

    pub fn agents(&self) -> usize {
        self.scales.len()
    }

    pub fn dim(&self) -> usize {
        self.rotations[0].nrows()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn rotations(&self) -> &[DMatrix<f64>] {
        &self.rotations
    }
}

/// Counter-clockwise rotation by `theta`.
pub fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Block-diagonal `D_x` with block `i` equal to `a_i R_i`.
pub fn build_sensor_matrix(model: &SensorModel, m: usize) -> Result<DMatrix<f64>> {
    if model.dim() != m {
        return Err(FormationError::InvalidSensor(format!(
            "rotations are {}x{}, ambient dimension is {m}",
            model.dim(),
            model.dim()
        )));
    }
    let n = model.agents();
    let mut d = DMatrix::zeros(n * m, n * m);
    for (i, (a, r)) in model.scales.iter().zip(&model.rotations).enumerate() {
        d.view_mut((i * m, i * m), (m, m)).copy_from(&(r * *a));
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct RobustnessPrediction {
    /// Steady-state relative positions `ž*`.
    pub z_tilde: RelPosStack,
    /// Common residual drift `ṽ*`.
    pub v_tilde: DVector<f64>,
    /// `M̆`, `mn × m|E|`.
    pub m_breve: DMatrix<f64>,
    /// Distorted shape with its center of mass at the origin.
    pub p_tilde: Configuration,
    /// Largest deviation of a residual-stack block from the block mean.
    pub consistency_residual: f64,
    /// Spectrum of `D_x L̄`.
    pub closed_loop: SpectrumReport,
    /// The closed loop is stable, so the predicted steady state attracts trajectories.
    pub realizable: bool,
}

impl RobustnessPrediction {
    /// `max |M̆_ij|`.
    pub fn m_breve_max_abs(&self) -> f64 {
        linalg::max_abs(&self.m_breve)
    }
}

/// Closed-form distorted shape, residual velocity and `M̆` for a tree framework.
pub fn predict_distortion(fw: &Framework, model: &SensorModel) -> Result<RobustnessPrediction> {
    graph::require_tree(&fw.graph, "the distortion prediction")?;
    let m = fw.dim();
    let n = fw.agents();
    if model.agents() != n {
        return Err(FormationError::DimensionMismatch {
            what: "sensor model agent count",
            expected: n,
            found: model.agents(),
        });
    }
    let d_x = build_sensor_matrix(model, m)?;
    let b = &fw.b_bar;
    let bt = b.transpose();
    let w = &fw.w_bar;
    let z_star = fw.z_star.to_vector();

    let gram = &bt * b;
    let sensed_gram = &bt * &d_x * b;
    let system = &sensed_gram * w;
    let condition = linalg::condition_number(&system);
    if !(condition < SINGULAR_CONDITION) {
        return Err(FormationError::Singular {
            what: "B̄ᵀ D_x B̄ D̄_ω",
            condition,
        });
    }
    let singular = |what| FormationError::Singular {
        what,
        condition: f64::INFINITY,
    };

    let rhs = &gram * w * &z_star;
    let z_tilde = system.clone().lu().solve(&rhs).ok_or_else(|| singular("B̄ᵀ D_x B̄ D̄_ω"))?;

    let sensed_inv = sensed_gram.clone().try_inverse().ok_or_else(|| singular("B̄ᵀ D_x B̄"))?;
    let residual_stack = (&d_x * b * &sensed_inv * &gram - b) * w * &z_star;
    let mean = linalg::block_mean(&residual_stack, m);
    let consistency_residual = (0..n)
        .map(|i| (linalg::block(&residual_stack, i, m) - &mean).norm())
        .fold(0.0, f64::max);
    if consistency_residual > CONSISTENCY_WARN {
        log::warn!("residual velocity blocks disagree by {consistency_residual:.3e}");
    }
    let v_tilde = -mean;

    let gram_inv = gram.clone().try_inverse().ok_or_else(|| singular("B̄ᵀ B̄"))?;
    let m_breve = -(&d_x * b - b * &gram_inv * &bt * &d_x * b) * w;

    let z_tilde = RelPosStack::from_vector(m, z_tilde);
    let p_tilde = shape::configuration_from_relative(&fw.graph, &z_tilde, 0)?;

    let closed_loop = spectrum_report(&(&d_x * &fw.l_bar), m)?;
    let realizable = closed_loop.stable;
    if !realizable {
        log::warn!("unstable closed loop: prediction not attractive");
    }

    Ok(RobustnessPrediction {
        z_tilde,
        v_tilde,
        m_breve,
        p_tilde,
        consistency_residual,
        closed_loop,
        realizable,
    })
}

/// Nominal law executed with mismatched sensing: `u = -D_x L̄ p + L̄ p*`.
pub fn faulty_control(p: &Configuration, fw: &Framework, d_x: &DMatrix<f64>) -> Result<DVector<f64>> {
    p.check_agents(fw.agents(), fw.dim())?;
    if d_x.shape() != fw.l_bar.shape() {
        return Err(FormationError::DimensionMismatch {
            what: "D_x rows",
            expected: fw.l_bar.nrows(),
            found: d_x.nrows(),
        });
    }
    Ok(-(d_x * (&fw.l_bar * p.as_vector())) + &fw.l_bar * fw.p_star())
}

/// Steady state of two agents where agent 1 senses perfectly and agent 2
/// scales its measurement by `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoAgentResidual {
    pub z_tilde_12: DVector<f64>,
    pub v_residual: DVector<f64>,
}

pub fn two_agent_residual(a: f64, z_star_12: &DVector<f64>) -> Result<TwoAgentResidual> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(FormationError::InvalidSensor(format!(
            "scale factor must be positive, got {a}"
        )));
    }
    Ok(TwoAgentResidual {
        z_tilde_12: z_star_12 * (2.0 / (a + 1.0)),
        v_residual: z_star_12 * ((a - 1.0) / (a + 1.0)),
    })
}

/// Sensor-model summary for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSummary {
    pub scales: Vec<f64>,
    pub rotations: Vec<Vec<Vec<f64>>>,
}

impl From<&SensorModel> for SensorSummary {
    fn from(model: &SensorModel) -> Self {
        SensorSummary {
            scales: model.scales.clone(),
            rotations: model
                .rotations
                .iter()
                .map(|r| r.row_iter().map(|row| row.iter().cloned().collect()).collect())
                .collect(),
        }
    }
}
