//! Configurations, reference shapes and stacked relative positions.
//!
//! All vectors use the stacked layout: agent `i` occupies entries
//! `i*m .. (i+1)*m` of a configuration, edge `k` occupies the same range of a
//! relative-position stack.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{FormationError, Result};
use crate::graph::Graph;
use crate::linalg;

/// Stacked agent positions in `R^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    m: usize,
    p: DVector<f64>,
}

impl Configuration {
    pub fn new(m: usize, p: DVector<f64>) -> Result<Self> {
        if m == 0 {
            return Err(FormationError::InvalidParameter(
                "ambient dimension must be at least 1".into(),
            ));
        }
        if !p.len().is_multiple_of(m) {
            return Err(FormationError::DimensionMismatch {
                what: "configuration length (multiple of m)",
                expected: (p.len() / m + 1) * m,
                found: p.len(),
            });
        }
        Ok(Configuration { m, p })
    }

    /// One row per agent.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let m = points.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = points.iter().find(|pt| pt.len() != m) {
            return Err(FormationError::DimensionMismatch {
                what: "point dimension",
                expected: m,
                found: bad.len(),
            });
        }
        Self::new(m, DVector::from_iterator(points.len() * m, points.iter().flatten().cloned()))
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Configuration {
            m,
            p: DVector::zeros(n * m),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn agents(&self) -> usize {
        self.p.len() / self.m
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.p
    }

    pub fn agent(&self, i: usize) -> DVector<f64> {
        linalg::block(&self.p, i, self.m)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.p.as_slice().chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// `p + 1_n ⊗ b`.
    pub fn translated(&self, b: &DVector<f64>) -> Configuration {
        Configuration {
            m: self.m,
            p: &self.p + linalg::repeat_block(b, self.agents()),
        }
    }

    /// Per-agent mean position.
    pub fn centroid(&self) -> DVector<f64> {
        linalg::block_mean(&self.p, self.m)
    }

    pub(crate) fn check_agents(&self, n: usize, m: usize) -> Result<()> {
        if self.m != m {
            return Err(FormationError::DimensionMismatch {
                what: "configuration dimension",
                expected: m,
                found: self.m,
            });
        }
        if self.agents() != n {
            return Err(FormationError::DimensionMismatch {
                what: "configuration agent count",
                expected: n,
                found: self.agents(),
            });
        }
        Ok(())
    }
}

/// Reference configuration split into its center of mass and centered part.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceShape {
    pub p_star: Configuration,
    pub center: DVector<f64>,
    pub centered: Configuration,
}

impl ReferenceShape {
    pub fn dim(&self) -> usize {
        self.p_star.dim()
    }

    pub fn agents(&self) -> usize {
        self.p_star.agents()
    }
}

pub fn decompose_reference(p_star: Configuration) -> ReferenceShape {
    let center = p_star.centroid();
    let centered = p_star.translated(&-&center);
    ReferenceShape {
        p_star,
        center,
        centered,
    }
}

/// Stacked relative positions, one `m`-block per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelPosStack {
    pub m: usize,
    pub z: Vec<f64>,
}

impl RelPosStack {
    pub fn from_vector(m: usize, z: DVector<f64>) -> Self {
        RelPosStack {
            m,
            z: z.as_slice().to_vec(),
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.z)
    }

    pub fn edges(&self) -> usize {
        self.z.len() / self.m
    }

    /// Edge-major table, one row per edge.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.z.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Block `k` is `p_tail(k) - p_head(k)`.
pub fn relative_positions(graph: &Graph, p: &Configuration) -> Result<RelPosStack> {
    p.check_agents(graph.node_count(), p.dim())?;
    let m = p.dim();
    let v = p.as_vector();
    let mut z = Vec::with_capacity(graph.edge_count() * m);
    for e in graph.edges() {
        for d in 0..m {
            z.push(v[e.tail * m + d] - v[e.head * m + d]);
        }
    }
    Ok(RelPosStack { m, z })
}

/// Outcome of the desired-shape membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub in_shape: bool,
    pub offset: DVector<f64>,
    pub residual: f64,
}

/// Default membership tolerance `1e-6 · max(1, ‖z*‖)`.
pub fn default_membership_tolerance(z_star: &RelPosStack) -> f64 {
    1e-6 * z_star.norm().max(1.0)
}

/// Whether `p` is a pure translation of the reference configuration.
pub fn shape_membership(p: &Configuration, shape: &ReferenceShape, tol: f64) -> Result<Membership> {
    if !(tol > 0.0) {
        return Err(FormationError::InvalidParameter(format!(
            "membership tolerance must be positive, got {tol}"
        )));
    }
    p.check_agents(shape.agents(), shape.dim())?;
    let diff = p.as_vector() - shape.p_star.as_vector();
    let offset = linalg::block_mean(&diff, p.dim());
    let residual = (diff - linalg::repeat_block(&offset, p.agents())).norm();
    Ok(Membership {
        in_shape: residual <= tol,
        offset,
        residual,
    })
}

/// Rebuilds a configuration from relative positions by walking a spanning
/// tree rooted at `root`, then moves its center of mass to the origin.
///
/// For graphs with cycles only the spanning-tree edges are used.
pub fn configuration_from_relative(graph: &Graph, z: &RelPosStack, root: usize) -> Result<Configuration> {
    let n = graph.node_count();
    let m = z.m;
    if z.edges() != graph.edge_count() {
        return Err(FormationError::DimensionMismatch {
            what: "relative-position stack edge count",
            expected: graph.edge_count(),
            found: z.edges(),
        });
    }
    if root >= n {
        return Err(FormationError::InvalidParameter(format!("root {} out of range", root + 1)));
    }
    let mut p = DVector::zeros(n * m);
    let mut placed = vec![false; n];
    placed[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for (k, e) in graph.edges().iter().enumerate() {
            let Some(w) = e.other(v) else { continue };
            if placed[w] {
                continue;
            }
            // z_k = p_tail - p_head
            let sign = if e.tail == v { -1.0 } else { 1.0 };
            for d in 0..m {
                p[w * m + d] = p[v * m + d] + sign * z.z[k * m + d];
            }
            placed[w] = true;
            queue.push_back(w);
        }
    }
    if placed.iter().any(|x| !x) {
        return Err(FormationError::NotConnected {
            components: graph.components().len(),
        });
    }
    let config = Configuration::new(m, p)?;
    let center = config.centroid();
    Ok(config.translated(&-center))
}
