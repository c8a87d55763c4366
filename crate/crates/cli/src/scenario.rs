//! Scenario files: JSON description of a framework, a controller and a run.
//!
//! ```json
//! {
//!   "name": "fig2_square",
//!   "dimension": 2,
//!   "nodes": { "positions": [[0, 0], [0, 10], [10, 10], [10, 0]] },
//!   "edges": [[1, 2], [2, 3, 1.0], { "tail": 1, "head": 4 }],
//!   "controller": "maneuver",
//!   "maneuver": { "v_star": [0.5, 0.5], "mode": "matrix", "kappa_bound_fraction": 0.5 },
//!   "initial": { "random": { "seed": 7, "half_width": 20 } },
//!   "integration": { "dt": 0.01, "t_final": 100 }
//! }
//! ```
//!
//! Node indices are 1-based. Angles are in radians.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use formation_core::maneuver::{MotionMode, MotionParams};
use formation_core::robustness::SensorModel;
use formation_core::simulator::random_configuration;
use formation_core::{Configuration, FormationError, Framework, Graph};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_FINAL: f64 = 100.0;
pub const DEFAULT_HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub nodes: Nodes,
    pub edges: Vec<EdgeSpec>,
    pub controller: ControllerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maneuver: Option<ManeuverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialCondition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration: Option<Integration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nodes {
    /// Optional, must match `positions.len()` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Reference shape `p*`, one point per agent.
    pub positions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Pair([usize; 2]),
    Weighted(usize, usize, f64),
    Object {
        tail: usize,
        head: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
}

impl EdgeSpec {
    pub fn parts(&self) -> (usize, usize, f64) {
        match *self {
            EdgeSpec::Pair([t, h]) => (t, h, 1.0),
            EdgeSpec::Weighted(t, h, w) => (t, h, w),
            EdgeSpec::Object { tail, head, weight } => (tail, head, weight.unwrap_or(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Nominal,
    Maneuver,
    Faulty,
}

impl ControllerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Nominal => "nominal",
            ControllerKind::Maneuver => "maneuver",
            ControllerKind::Faulty => "faulty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Scalar,
    Matrix,
}

impl From<ModeSpec> for MotionMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Scalar => MotionMode::Scalar,
            ModeSpec::Matrix => MotionMode::Matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverSection {
    /// Target velocity. Mutually exclusive with `mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_star: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// `κ` as a fraction of the analytic bound, with `μ` designed at `κ = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_bound_fraction: Option<f64>,
    /// Explicit motion parameters instead of a design from `v_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<MuSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSpec {
    pub agent: usize,
    pub neighbor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub scales: Vec<f64>,
    /// Planar misalignments in radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
    /// Explicit `m × m` rotations, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotations: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Positions(Vec<Vec<f64>>),
    Random(RandomInit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integration {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_t_final() -> f64 {
    DEFAULT_T_FINAL
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_json: Option<String>,
}

/// Parses scenario JSON, reporting the failing field path and position.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        CliError::Parse {
            origin: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

impl Scenario {
    fn invalid(&self, message: impl Into<String>) -> CliError {
        CliError::Scenario {
            scenario: self.name.clone(),
            message: message.into(),
        }
    }

    fn stage(&self, stage: &'static str) -> impl Fn(FormationError) -> CliError + '_ {
        move |source| CliError::Stage {
            scenario: self.name.clone(),
            stage,
            source,
        }
    }

    pub fn agents(&self) -> usize {
        self.nodes.positions.len()
    }

    /// Structural checks that do not need any linear algebra.
    pub fn validate_sections(&self) -> Result<(), CliError> {
        if self.dimension == 0 {
            return Err(self.invalid("dimension must be at least 1"));
        }
        if let Some(count) = self.nodes.count {
            if count != self.agents() {
                return Err(self.invalid(format!(
                    "nodes.count = {count} but {} positions given",
                    self.agents()
                )));
            }
        }
        let want = |present: bool, section: &str, kind: ControllerKind| -> Result<(), CliError> {
            let needed = match section {
                "maneuver" => kind == ControllerKind::Maneuver,
                _ => kind == ControllerKind::Faulty,
            };
            match (needed, present) {
                (true, false) => Err(self.invalid(format!(
                    "controller \"{}\" needs a \"{section}\" section",
                    kind.as_str()
                ))),
                (false, true) => Err(self.invalid(format!(
                    "\"{section}\" section given but controller is \"{}\"",
                    kind.as_str()
                ))),
                _ => Ok(()),
            }
        };
        want(self.maneuver.is_some(), "maneuver", self.controller)?;
        want(self.sensor.is_some(), "sensor", self.controller)?;
        if let Some(integ) = &self.integration {
            if !(integ.dt > 0.0) || !(integ.t_final >= integ.dt) {
                return Err(self.invalid(format!(
                    "integration needs dt > 0 and t_final >= dt (dt = {}, t_final = {})",
                    integ.dt, integ.t_final
                )));
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<Graph, CliError> {
        let (pairs, weights): (Vec<_>, Vec<_>) = self
            .edges
            .iter()
            .map(|e| {
                let (t, h, w) = e.parts();
                ((t, h), w)
            })
            .unzip();
        Graph::with_weights(self.agents(), &pairs, &weights).map_err(self.stage("graph"))
    }

    pub fn reference(&self) -> Result<Configuration, CliError> {
        points_to_configuration(&self.nodes.positions, self.dimension).map_err(|e| self.invalid(format!("nodes.positions: {e}")))
    }

    pub fn framework(&self) -> Result<Framework, CliError> {
        self.validate_sections()?;
        let graph = self.graph()?;
        Framework::new(graph, self.reference()?).map_err(self.stage("framework"))
    }

    pub fn sensor_model(&self) -> Result<Option<SensorModel>, CliError> {
        let Some(s) = &self.sensor else { return Ok(None) };
        let n = self.agents();
        let m = self.dimension;
        if s.scales.len() != n {
            return Err(self.invalid(format!("sensor.scales has {} entries for {n} agents", s.scales.len())));
        }
        let model = match (&s.angles, &s.rotations) {
            (Some(_), Some(_)) => return Err(self.invalid("sensor: give either angles or rotations, not both")),
            (Some(angles), None) => {
                if m != 2 {
                    return Err(self.invalid("sensor.angles only applies to dimension 2, use rotations"));
                }
                if angles.len() != n {
                    return Err(self.invalid(format!("sensor.angles has {} entries for {n} agents", angles.len())));
                }
                SensorModel::planar(s.scales.clone(), angles)
            }
            (None, Some(rots)) => {
                if rots.len() != n {
                    return Err(self.invalid(format!("sensor.rotations has {} entries for {n} agents", rots.len())));
                }
                let mut mats = Vec::with_capacity(n);
                for (i, r) in rots.iter().enumerate() {
                    mats.push(rows_to_matrix(r, m).map_err(|e| self.invalid(format!("sensor.rotations[{i}]: {e}")))?);
                }
                SensorModel::new(s.scales.clone(), mats)
            }
            (None, None) => SensorModel::new(s.scales.clone(), vec![DMatrix::identity(m, m); n]),
        };
        model.map(Some).map_err(self.stage("sensor"))
    }

    /// Explicit motion parameters, 0-based keys.
    pub fn explicit_mu(&self) -> Result<Option<MotionParams>, CliError> {
        let Some(section) = &self.maneuver else { return Ok(None) };
        let Some(entries) = &section.mu else { return Ok(None) };
        let m = self.dimension;
        let n = self.agents();
        let check = |k: usize, e: &MuSpec| -> Result<(usize, usize), CliError> {
            for idx in [e.agent, e.neighbor] {
                if idx == 0 || idx > n {
                    return Err(self.invalid(format!("maneuver.mu[{k}]: agent index {idx} outside 1..={n}")));
                }
            }
            Ok((e.agent - 1, e.neighbor - 1))
        };
        match section.mode {
            ModeSpec::Scalar => {
                let mut map = BTreeMap::new();
                for (k, e) in entries.iter().enumerate() {
                    let key = check(k, e)?;
                    let value = match (e.value, &e.block) {
                        (Some(v), None) => v,
                        _ => return Err(self.invalid(format!("maneuver.mu[{k}]: scalar mode needs \"value\" only"))),
                    };
                    map.insert(key, value);
                }
                Ok(Some(MotionParams::Scalar(map)))
            }
            ModeSpec::Matrix => {
                let mut blocks = BTreeMap::new();
                for (k, e) in entries.iter().enumerate() {
                    let key = check(k, e)?;
                    let block = match (e.value, &e.block) {
                        (None, Some(b)) => rows_to_matrix(b, m).map_err(|msg| self.invalid(format!("maneuver.mu[{k}]: {msg}")))?,
                        _ => return Err(self.invalid(format!("maneuver.mu[{k}]: matrix mode needs \"block\" only"))),
                    };
                    blocks.insert(key, block);
                }
                Ok(Some(MotionParams::Matrix { m, blocks }))
            }
        }
    }

    pub fn integration(&self) -> Integration {
        self.integration.clone().unwrap_or(Integration {
            dt: DEFAULT_DT,
            t_final: DEFAULT_T_FINAL,
        })
    }

    /// Seed actually used for a random start, after the command-line override.
    pub fn effective_seed(&self, seed_override: Option<u64>) -> Option<u64> {
        match &self.initial {
            Some(InitialCondition::Positions(_)) => None,
            Some(InitialCondition::Random(r)) => Some(seed_override.unwrap_or(r.seed)),
            None => Some(seed_override.unwrap_or(0)),
        }
    }

    pub fn initial_configuration(&self, seed_override: Option<u64>) -> Result<Configuration, CliError> {
        let n = self.agents();
        let m = self.dimension;
        match &self.initial {
            Some(InitialCondition::Positions(points)) => {
                if points.len() != n {
                    return Err(self.invalid(format!("initial.positions has {} points for {n} agents", points.len())));
                }
                if seed_override.is_some() {
                    log::warn!("{}: explicit initial positions, --seed ignored", self.name);
                }
                points_to_configuration(points, m).map_err(|e| self.invalid(format!("initial.positions: {e}")))
            }
            Some(InitialCondition::Random(r)) => {
                if !(r.half_width > 0.0) || !r.half_width.is_finite() {
                    return Err(self.invalid(format!("initial.random.half_width must be positive, got {}", r.half_width)));
                }
                Ok(random_configuration(n, m, seed_override.unwrap_or(r.seed), r.half_width))
            }
            None => Ok(random_configuration(n, m, seed_override.unwrap_or(0), DEFAULT_HALF_WIDTH)),
        }
    }
}

fn points_to_configuration(points: &[Vec<f64>], m: usize) -> Result<Configuration, String> {
    let mut flat = Vec::with_capacity(points.len() * m);
    for (i, p) in points.iter().enumerate() {
        if p.len() != m {
            return Err(format!("point {} has {} coordinates, expected {m}", i + 1, p.len()));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(format!("point {} has a non-finite coordinate", i + 1));
        }
        flat.extend_from_slice(p);
    }
    Configuration::new(m, DVector::from_vec(flat)).map_err(|e| e.to_string())
}

fn rows_to_matrix(rows: &[Vec<f64>], m: usize) -> Result<DMatrix<f64>, String> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(format!("expected a {m}x{m} matrix"));
    }
    Ok(DMatrix::from_fn(m, m, |r, c| rows[r][c]))
}
