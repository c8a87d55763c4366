use nalgebra::{DMatrix, DVector};

use crate::error::{FormationError, Result};
use crate::graph::{self, Graph, IncidenceMatrix, Laplacian};
use crate::shape::{self, Configuration, ReferenceShape, RelPosStack};

/// A graph paired with a reference shape, with the lifted matrices cached.
#[derive(Debug, Clone)]
pub struct Framework {
    pub graph: Graph,
    pub shape: ReferenceShape,
    pub incidence: IncidenceMatrix,
    pub laplacian: Laplacian,
    /// `B ⊗ I_m`
    pub b_bar: DMatrix<f64>,
    /// `L ⊗ I_m`
    pub l_bar: DMatrix<f64>,
    /// `diag(w) ⊗ I_m`
    pub w_bar: DMatrix<f64>,
    pub z_star: RelPosStack,
}

impl Framework {
    pub fn new(graph: Graph, p_star: Configuration) -> Result<Self> {
        let m = p_star.dim();
        if p_star.agents() != graph.node_count() {
            return Err(FormationError::DimensionMismatch {
                what: "reference shape agent count",
                expected: graph.node_count(),
                found: p_star.agents(),
            });
        }
        let incidence = graph::build_incidence(&graph);
        let laplacian = graph::build_laplacian(&graph);
        let b_bar = incidence.lifted(m);
        let l_bar = laplacian.lifted(m);
        let w_bar = crate::linalg::lift(&graph::weight_matrix(&graph), m);
        let z_star = shape::relative_positions(&graph, &p_star)?;
        Ok(Framework {
            graph,
            shape: shape::decompose_reference(p_star),
            incidence,
            laplacian,
            b_bar,
            l_bar,
            w_bar,
            z_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn agents(&self) -> usize {
        self.graph.node_count()
    }

    pub fn p_star(&self) -> &DVector<f64> {
        self.shape.p_star.as_vector()
    }

    /// Nominal displacement-consensus law `u = -L̄ (p - p*)`.
    pub fn nominal_control(&self, p: &Configuration) -> Result<DVector<f64>> {
        p.check_agents(self.agents(), self.dim())?;
        Ok(-(&self.l_bar * (p.as_vector() - self.p_star())))
    }
}
