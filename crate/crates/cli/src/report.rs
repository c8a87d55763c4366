//! Analysis report written after every run, plus the JSON float formatting
//! shared by all outputs.

use std::io;

use formation_core::graph::GraphClass;
use formation_core::robustness::SensorSummary;
use formation_core::spectrum::{Eigenvalue, SpectrumReport};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Check,
    Design,
    Predict,
    Simulate,
    Full,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Design => "design",
            Command::Predict => "predict",
            Command::Simulate => "simulate",
            Command::Full => "full",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "check" => Ok(Command::Check),
            "design" => Ok(Command::Design),
            "predict" => Ok(Command::Predict),
            "simulate" => Ok(Command::Simulate),
            "full" => Ok(Command::Full),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub command: Command,
    pub scenario: Scenario,
    pub graph: GraphClass,
    /// Spectrum of the scenario's closed-loop system matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PredictionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub files: Vec<FileEntry>,
}

/// `SpectrumReport` with the infinite "no nonzero eigenvalue" case made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<Eigenvalue>,
    pub zero_count: usize,
    /// `None` when every eigenvalue is zero.
    pub min_nonzero_real: Option<f64>,
    pub kernel_residual: f64,
    pub zero_tolerance: f64,
    pub stable: bool,
}

impl From<&SpectrumReport> for SpectrumSummary {
    fn from(r: &SpectrumReport) -> Self {
        SpectrumSummary {
            eigenvalues: r.eigenvalues.clone(),
            zero_count: r.zero_count,
            min_nonzero_real: r.min_nonzero_real.is_finite().then_some(r.min_nonzero_real),
            kernel_residual: r.kernel_residual,
            zero_tolerance: r.zero_tolerance,
            stable: r.stable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub agent: usize,
    pub neighbor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub mode: String,
    pub kappa: f64,
    /// Analytic bound on `|κ|`; `None` when not applicable or infinite.
    pub kappa_bound: Option<f64>,
    pub kappa_bound_infinite: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_bound_note: Option<String>,
    /// Requested velocity at unit gain, when designed from `v_star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_target: Option<Vec<f64>>,
    /// Steady velocity produced by `κ` and `μ`.
    pub v_star: Vec<f64>,
    pub mu: Vec<MuEntry>,
    pub spectrum: SpectrumSummary,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub edge: usize,
    pub tail: usize,
    pub head: usize,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub sensor: SensorSummary,
    /// Distorted relative positions, one row per edge in input order.
    pub z_tilde: Vec<EdgeRow>,
    pub v_tilde: Vec<f64>,
    pub m_breve_max_abs: f64,
    pub consistency_residual: f64,
    /// Centered distorted shape.
    pub p_tilde: Vec<Vec<f64>>,
    pub closed_loop: SpectrumSummary,
    pub realizable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    /// `z*` and the designed `v*` (zero without a maneuver).
    Nominal,
    /// `ž*` and `ṽ*` from the distortion prediction.
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub controller: String,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub reference: ReferenceKind,
    pub z_ref: Vec<EdgeRow>,
    pub v_ref: Vec<f64>,
    pub final_shape_error: f64,
    pub final_velocity_error: f64,
    /// Mean of the agents' final velocities.
    pub final_velocity: Vec<f64>,
    pub final_relative_positions: Vec<EdgeRow>,
    pub threshold: f64,
    pub settled: bool,
    pub settling_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub kind: String,
    pub path: String,
}

impl AnalysisReport {
    /// Re-checks the echoed scenario and the internal consistency of the report.
    pub fn validate(&self) -> Result<(), CliError> {
        let fw = self.scenario.framework()?;
        let bad = |message: String| CliError::Scenario {
            scenario: self.scenario.name.clone(),
            message,
        };
        let m = self.scenario.dimension;
        let n = fw.agents();
        let e = fw.graph.edge_count();
        if let Some(s) = &self.spectrum {
            if s.eigenvalues.len() != n * m {
                return Err(bad(format!("spectrum has {} eigenvalues, expected {}", s.eigenvalues.len(), n * m)));
            }
        }
        if let Some(d) = &self.design {
            if d.v_star.len() != m {
                return Err(bad("design.v_star has the wrong dimension".into()));
            }
        }
        if let Some(p) = &self.prediction {
            if p.z_tilde.len() != e || p.z_tilde.iter().any(|r| r.value.len() != m) {
                return Err(bad("prediction.z_tilde does not match the edge set".into()));
            }
            if p.p_tilde.len() != n || p.v_tilde.len() != m {
                return Err(bad("prediction dimensions do not match the framework".into()));
            }
        }
        if let Some(s) = &self.simulation {
            let below = s.final_shape_error < s.threshold && s.final_velocity_error < s.threshold;
            if below != s.settled || s.settled != s.settling_time.is_some() {
                return Err(bad("simulation settled flag is inconsistent with its errors".into()));
            }
            if s.z_ref.len() != e || s.final_relative_positions.len() != e {
                return Err(bad("simulation reference does not match the edge set".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            CliError::Parse {
                origin: "report".into(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: inner.to_string(),
            }
        })
    }
}

/// Pretty JSON with every float written at 17 significant digits.
#[derive(Debug, Default)]
pub struct PreciseFormatter {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.pretty.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl serde_json::ser::Formatter for PreciseFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    delegate! {
        begin_array(); end_array();
        begin_array_value(first: bool); end_array_value();
        begin_object(); end_object();
        begin_object_key(first: bool); end_object_value();
        begin_object_value();
    }
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFormatter::default());
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}
