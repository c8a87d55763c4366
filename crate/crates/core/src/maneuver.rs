//! Maneuvering through modified Laplacian weights.
//!
//! Each agent `i` perturbs the weight it applies to neighbor `j` by `-κ μ_ij`.
//! With the motion parameters chosen so that
//! `κ Σ_j μ_ij (p*_i - p*_j) = v*` holds for every agent, the closed loop
//!
//! ```text
//! ṗ = -(L̄ - κ Λ̂) p + L̄ p*,    Λ̂ = M̂ B̄ᵀ
//! ```
//!
//! converges to a translation of the reference shape that moves with the
//! common velocity `v*`. `μ_ij` is either a scalar (acting as `μ_ij I_m`) or a
//! full `m × m` block, which lifts the requirement of `m` independent
//! neighbors per agent.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{FormationError, Result};
use crate::framework::Framework;
use crate::graph::{self, Graph};
use crate::linalg;
use crate::shape::Configuration;
use crate::spectrum::{spectrum_report, SpectrumReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionMode {
    Scalar,
    Matrix,
}

/// Motion parameters keyed by the directed, 0-based pair `(agent, neighbor)`.
/// Missing pairs are zero.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionParams {
    Scalar(BTreeMap<(usize, usize), f64>),
    Matrix {
        m: usize,
        blocks: BTreeMap<(usize, usize), DMatrix<f64>>,
    },
}

impl MotionParams {
    pub fn zero(mode: MotionMode, m: usize) -> Self {
        match mode {
            MotionMode::Scalar => MotionParams::Scalar(BTreeMap::new()),
            MotionMode::Matrix => MotionParams::Matrix {
                m,
                blocks: BTreeMap::new(),
            },
        }
    }

    pub fn mode(&self) -> MotionMode {
        match self {
            MotionParams::Scalar(_) => MotionMode::Scalar,
            MotionParams::Matrix { .. } => MotionMode::Matrix,
        }
    }

    /// `μ_ij` as an `m × m` block.
    pub fn block(&self, i: usize, j: usize, m: usize) -> DMatrix<f64> {
        match self {
            MotionParams::Scalar(mu) => {
                DMatrix::identity(m, m) * mu.get(&(i, j)).copied().unwrap_or(0.0)
            }
            MotionParams::Matrix { blocks, .. } => blocks
                .get(&(i, j))
                .cloned()
                .unwrap_or_else(|| DMatrix::zeros(m, m)),
        }
    }

    /// Checks that every nonzero parameter belongs to a graph neighbor pair.
    pub fn validate(&self, graph: &Graph, m: usize) -> Result<()> {
        let keys: Vec<(usize, usize)> = match self {
            MotionParams::Scalar(mu) => mu.keys().copied().collect(),
            MotionParams::Matrix { m: bm, blocks } => {
                if *bm != m {
                    return Err(FormationError::DimensionMismatch {
                        what: "motion block size",
                        expected: m,
                        found: *bm,
                    });
                }
                if let Some(bad) = blocks.values().find(|b| b.shape() != (m, m)) {
                    return Err(FormationError::DimensionMismatch {
                        what: "motion block size",
                        expected: m,
                        found: bad.nrows(),
                    });
                }
                blocks.keys().copied().collect()
            }
        };
        for (i, j) in keys {
            if i >= graph.node_count() || graph.edge_between(i, j).is_none() {
                return Err(FormationError::SparsityViolation {
                    agent: i + 1,
                    neighbor: j + 1,
                });
            }
        }
        Ok(())
    }
}

/// Motion parameters for a common target velocity `v_star` under gain `kappa`.
///
/// The products `κ μ_ij` are solved first and divided by `kappa` afterwards, so
/// feasibility does not depend on the gain. Scalar mode takes the
/// minimum-norm least-squares solution per agent and fails when `v_star` is
/// outside the span of the agent's desired relative positions. Matrix mode
/// places one block on the edge to the lowest-index neighbor.
pub fn design_motion_params(
    fw: &Framework,
    v_star: &DVector<f64>,
    kappa: f64,
    mode: MotionMode,
) -> Result<MotionParams> {
    let m = fw.dim();
    graph::require_connected(&fw.graph)?;
    if v_star.len() != m {
        return Err(FormationError::DimensionMismatch {
            what: "target velocity dimension",
            expected: m,
            found: v_star.len(),
        });
    }
    if !v_star.iter().all(|x| x.is_finite()) || !kappa.is_finite() {
        return Err(FormationError::InvalidParameter(
            "target velocity and kappa must be finite".into(),
        ));
    }
    if v_star.iter().all(|x| *x == 0.0) {
        return Ok(MotionParams::zero(mode, m));
    }
    if kappa == 0.0 {
        return Err(FormationError::ZeroGainWithMotion);
    }

    let p_star = &fw.shape.p_star;
    let desired = |i: usize, j: usize| p_star.agent(i) - p_star.agent(j);
    let v_scale = v_star.norm().max(1.0);

    match mode {
        MotionMode::Scalar => {
            let mut mu = BTreeMap::new();
            for i in 0..fw.agents() {
                let nbrs = fw.graph.neighbors(i);
                let mut d = DMatrix::zeros(m, nbrs.len());
                for (c, &j) in nbrs.iter().enumerate() {
                    d.set_column(c, &desired(i, j));
                }
                let (x, _rank) = linalg::min_norm_solve(&d, v_star);
                let residual = (&d * &x - v_star).norm();
                if residual > 1e-9 * v_scale {
                    return Err(FormationError::InfeasibleDesign {
                        agent: i + 1,
                        residual,
                    });
                }
                for (c, &j) in nbrs.iter().enumerate() {
                    if x[c] != 0.0 {
                        mu.insert((i, j), x[c] / kappa);
                    }
                }
            }
            Ok(MotionParams::Scalar(mu))
        }
        MotionMode::Matrix => {
            let mut blocks = BTreeMap::new();
            for i in 0..fw.agents() {
                let j = fw.graph.neighbors(i)[0];
                let d = desired(i, j);
                let d2 = d.norm_squared();
                if d2 == 0.0 {
                    return Err(FormationError::DegenerateEdge {
                        agent: i + 1,
                        neighbor: j + 1,
                    });
                }
                let block = if m == 2 {
                    // Rotation plus scaling taking d onto v*.
                    let a = d.dot(v_star) / d2;
                    let b = (d[0] * v_star[1] - d[1] * v_star[0]) / d2;
                    DMatrix::from_row_slice(2, 2, &[a, -b, b, a])
                } else {
                    v_star * d.transpose() / d2
                };
                blocks.insert((i, j), block / kappa);
            }
            Ok(MotionParams::Matrix { m, blocks })
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManeuverDesign {
    pub motion: MotionParams,
    pub kappa: f64,
    /// `mn × m|E|`
    pub m_hat: DMatrix<f64>,
    /// `M̂ B̄ᵀ`
    pub lambda_hat: DMatrix<f64>,
    /// Common steady velocity implied by the parameters.
    pub v_star: DVector<f64>,
}

impl ManeuverDesign {
    /// `L̄ - κ Λ̂`.
    pub fn system_matrix(&self, fw: &Framework) -> DMatrix<f64> {
        &fw.l_bar - &self.lambda_hat * self.kappa
    }

    /// Same parameters under a different gain.
    pub fn with_kappa(&self, fw: &Framework, kappa: f64) -> Result<ManeuverDesign> {
        build_maneuver(self.motion.clone(), fw, kappa)
    }

    /// The `n × |E|` matrix `M` of scalar mode (`M̂ = M ⊗ I_m`).
    pub fn scalar_m(&self, graph: &Graph) -> Option<DMatrix<f64>> {
        let MotionParams::Scalar(mu) = &self.motion else {
            return None;
        };
        let get = |i: usize, j: usize| mu.get(&(i, j)).copied().unwrap_or(0.0);
        let mut mm = DMatrix::zeros(graph.node_count(), graph.edge_count());
        for (k, e) in graph.edges().iter().enumerate() {
            mm[(e.tail, k)] = get(e.tail, e.head);
            mm[(e.head, k)] = -get(e.head, e.tail);
        }
        Some(mm)
    }

    /// `(κ Λ̂ p*) t + p*`, the translating solution of the closed loop.
    pub fn particular_solution(&self, fw: &Framework, t: f64) -> DVector<f64> {
        &self.lambda_hat * fw.p_star() * (self.kappa * t) + fw.p_star()
    }
}

/// Assembles `M̂` and `Λ̂ = M̂ B̄ᵀ` and checks that every agent ends up with the
/// same steady velocity.
pub fn build_maneuver(motion: MotionParams, fw: &Framework, kappa: f64) -> Result<ManeuverDesign> {
    let m = fw.dim();
    let n = fw.agents();
    motion.validate(&fw.graph, m)?;
    if !kappa.is_finite() {
        return Err(FormationError::InvalidParameter(format!("kappa must be finite, got {kappa}")));
    }

    let mut m_hat = DMatrix::zeros(n * m, fw.graph.edge_count() * m);
    for (k, e) in fw.graph.edges().iter().enumerate() {
        m_hat
            .view_mut((e.tail * m, k * m), (m, m))
            .copy_from(&motion.block(e.tail, e.head, m));
        m_hat
            .view_mut((e.head * m, k * m), (m, m))
            .copy_from(&(-motion.block(e.head, e.tail, m)));
    }
    let lambda_hat = &m_hat * fw.b_bar.transpose();

    let implied = &lambda_hat * fw.p_star() * kappa;
    let v_star = linalg::block(&implied, 0, m);
    let scale = v_star.norm().max(1.0);
    for i in 1..n {
        let deviation = (linalg::block(&implied, i, m) - &v_star).norm();
        if deviation > 1e-9 * scale {
            return Err(FormationError::DesignInconsistent {
                agent: i + 1,
                deviation,
            });
        }
    }

    Ok(ManeuverDesign {
        motion,
        kappa,
        m_hat,
        lambda_hat,
        v_star,
    })
}

/// Gain bound `ω* λ_min(B̄ᵀB̄) / ‖B̄ᵀ M̂‖₂` for tree graphs with uniform weights.
///
/// Any `|κ|` strictly below the bound keeps the modified Laplacian stable.
/// Returns `+inf` when `B̄ᵀ M̂ = 0`.
pub fn kappa_bound(fw: &Framework, m_hat: &DMatrix<f64>, omega_star: f64) -> Result<f64> {
    graph::require_tree(&fw.graph, "the analytic kappa bound (use the spectrum check instead)")?;
    if !(omega_star > 0.0) {
        return Err(FormationError::InvalidParameter(format!(
            "omega* must be positive, got {omega_star}"
        )));
    }
    match fw.graph.uniform_weight() {
        Some(w) if (w - omega_star).abs() <= 1e-12 * omega_star.max(1.0) => {}
        _ => {
            return Err(FormationError::InvalidParameter(format!(
                "kappa bound needs uniform edge weights equal to omega* = {omega_star}"
            )))
        }
    }
    if m_hat.shape() != (fw.b_bar.nrows(), fw.b_bar.ncols()) {
        return Err(FormationError::DimensionMismatch {
            what: "M̂ rows",
            expected: fw.b_bar.nrows(),
            found: m_hat.nrows(),
        });
    }
    let gram_min = linalg::symmetric_min_eigenvalue(&(fw.b_bar.transpose() * &fw.b_bar));
    let coupling = linalg::spectral_norm(&(fw.b_bar.transpose() * m_hat));
    if coupling == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(omega_star * gram_min / coupling)
}

/// Spectrum of `L̄ - κ Λ̂`.
pub fn spectrum_check(
    l_bar: &DMatrix<f64>,
    kappa: f64,
    lambda_hat: &DMatrix<f64>,
    m: usize,
) -> Result<SpectrumReport> {
    if l_bar.shape() != lambda_hat.shape() {
        return Err(FormationError::DimensionMismatch {
            what: "Λ̂ rows",
            expected: l_bar.nrows(),
            found: lambda_hat.nrows(),
        });
    }
    spectrum_report(&(l_bar - lambda_hat * kappa), m)
}

/// Compact maneuvering law `u = -(L̄ - κΛ̂) p + L̄ p*`.
pub fn maneuver_control(p: &Configuration, design: &ManeuverDesign, fw: &Framework) -> Result<DVector<f64>> {
    p.check_agents(fw.agents(), fw.dim())?;
    Ok(-(design.system_matrix(fw) * p.as_vector()) + &fw.l_bar * fw.p_star())
}

/// The same law evaluated agent by agent from local relative positions only:
/// `u_i = -Σ_j [ω_ij (z_ij - z*_ij) - κ μ_ij z_ij]`.
pub fn maneuver_control_local(p: &Configuration, design: &ManeuverDesign, fw: &Framework) -> Result<DVector<f64>> {
    p.check_agents(fw.agents(), fw.dim())?;
    let m = fw.dim();
    let p_star = &fw.shape.p_star;
    let mut u = DVector::zeros(fw.agents() * m);
    for i in 0..fw.agents() {
        let mut ui = DVector::zeros(m);
        for j in fw.graph.neighbors(i) {
            let k = fw.graph.edge_between(i, j).expect("neighbor shares an edge");
            let w = fw.graph.weights()[k];
            let z_ij = p.agent(i) - p.agent(j);
            let z_star_ij = p_star.agent(i) - p_star.agent(j);
            ui -= (&z_ij - z_star_ij) * w;
            ui += design.motion.block(i, j, m) * &z_ij * design.kappa;
        }
        u.rows_mut(i * m, m).copy_from(&ui);
    }
    Ok(u)
}
