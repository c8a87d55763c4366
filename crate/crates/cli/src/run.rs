use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use formation_core::graph::{self, Graph};
use formation_core::linalg;
use formation_core::maneuver::{
    build_maneuver, design_motion_params, kappa_bound, spectrum_check, ManeuverDesign, MotionMode, MotionParams,
};
use formation_core::robustness::{predict_distortion, RobustnessPrediction, SensorModel, SensorSummary};
use formation_core::shape::{relative_positions, RelPosStack};
use formation_core::simulator::{self, convergence_metrics, ConvergenceMetrics, Controller, DynamicsSpec, Trajectory};
use formation_core::spectrum::spectrum_report;
use formation_core::{Configuration, FormationError, Framework};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::CliError;
use crate::report::{
    AnalysisReport, Command, DesignReport, EdgeRow, FileEntry, MuEntry, PredictionReport, ReferenceKind,
    SimulationSummary, SpectrumSummary,
};
use crate::scenario::{load_scenario, ControllerKind, ManeuverSection, Scenario};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output directory; falls back to the scenario's `output.dir`. No files
    /// are written when neither is set.
    pub out_dir: Option<PathBuf>,
    /// Overrides the scenario seed for random initial conditions.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: AnalysisReport,
    pub trajectory: Option<Trajectory>,
    pub metrics: Option<ConvergenceMetrics>,
    pub prediction: Option<RobustnessPrediction>,
    pub design: Option<ManeuverDesign>,
}

pub fn run_scenario_file(path: &Path, command: Command, opts: &RunOptions) -> Result<RunOutput, CliError> {
    run_scenario(&load_scenario(path)?, command, opts)
}

pub type BatchResults = Vec<(PathBuf, Result<RunOutput, CliError>)>;

/// Runs every `*.json` scenario in `dir` in parallel, each into its own
/// `<out>/<scenario name>` directory. Results are sorted by path.
pub fn run_batch(dir: &Path, command: Command, opts: &RunOptions) -> Result<BatchResults, CliError> {
    let io_err = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths
        .into_par_iter()
        .map(|path| {
            let result = load_scenario(&path).and_then(|s| {
                let mut local = opts.clone();
                local.out_dir = opts.out_dir.as_ref().map(|d| d.join(&s.name));
                run_scenario(&s, command, &local)
            });
            (path, result)
        })
        .collect())
}

fn stage_err<'a>(scenario: &'a Scenario, stage: &'static str) -> impl Fn(FormationError) -> CliError + 'a {
    move |source| CliError::Stage {
        scenario: scenario.name.clone(),
        stage,
        source,
    }
}

fn invalid(scenario: &Scenario, message: impl Into<String>) -> CliError {
    CliError::Scenario {
        scenario: scenario.name.clone(),
        message: message.into(),
    }
}

pub fn run_scenario(scenario: &Scenario, command: Command, opts: &RunOptions) -> Result<RunOutput, CliError> {
    let fw = scenario.framework()?;
    let class = graph::require_connected(&fw.graph).map_err(stage_err(scenario, "check"))?;
    let m = fw.dim();
    let mut notes = Vec::new();

    match (command, scenario.controller) {
        (Command::Design, k) if k != ControllerKind::Maneuver => {
            return Err(invalid(scenario, "command `design` needs a maneuver controller"));
        }
        (Command::Predict, k) if k != ControllerKind::Faulty => {
            return Err(invalid(scenario, "command `predict` needs a faulty controller with a sensor section"));
        }
        _ => {}
    }

    let sensor = scenario.sensor_model()?;
    let mut design = None;
    let mut design_report = None;
    if let Some(section) = &scenario.maneuver {
        let (d, r) = design_stage(scenario, &fw, section)?;
        design = Some(d);
        design_report = Some(r);
    }

    let controller = match scenario.controller {
        ControllerKind::Nominal => Controller::Nominal,
        ControllerKind::Maneuver => Controller::Maneuver(design.clone().expect("maneuver section validated")),
        ControllerKind::Faulty => Controller::Faulty(sensor.clone().expect("sensor section validated")),
    };
    let spec = DynamicsSpec::new(&fw, controller);

    let spectrum = if matches!(command, Command::Check | Command::Full) {
        let system = spec.linear_system().map_err(stage_err(scenario, "check"))?;
        let r = spectrum_report(&system.a, m).map_err(stage_err(scenario, "check"))?;
        if !r.stable {
            notes.push("closed-loop system matrix is not stable".into());
        }
        Some(SpectrumSummary::from(&r))
    } else {
        None
    };

    let mut prediction = None;
    let mut prediction_report = None;
    let wants_prediction = command == Command::Predict || (command == Command::Full && sensor.is_some());
    if wants_prediction {
        let model = sensor.as_ref().expect("faulty controller has a sensor model");
        if !class.tree && command == Command::Full {
            notes.push("distortion prediction skipped: it requires a tree graph".into());
        } else {
            let p = predict_distortion(&fw, model).map_err(stage_err(scenario, "predict"))?;
            if !p.realizable {
                notes.push("unstable closed loop: prediction not attractive".into());
            }
            prediction_report = Some(prediction_summary(&fw.graph, model, &p));
            prediction = Some(p);
        }
    }

    let mut trajectory = None;
    let mut metrics = None;
    let mut simulation = None;
    if matches!(command, Command::Simulate | Command::Full) {
        let integ = scenario.integration();
        let p0 = scenario.initial_configuration(opts.seed)?;
        let traj = simulator::simulate(&spec, &p0, integ.dt, integ.t_final).map_err(stage_err(scenario, "simulate"))?;
        let (kind, z_ref, v_ref) = match (&prediction, &design) {
            (Some(p), _) if command == Command::Full => (ReferenceKind::Predicted, p.z_tilde.clone(), p.v_tilde.clone()),
            (_, Some(d)) => (ReferenceKind::Nominal, fw.z_star.clone(), d.v_star.clone()),
            _ => (ReferenceKind::Nominal, fw.z_star.clone(), DVector::zeros(m)),
        };
        let met = convergence_metrics(&traj, &fw, &z_ref, &v_ref).map_err(stage_err(scenario, "simulate"))?;
        let final_config = Configuration::new(m, traj.final_state().clone()).map_err(stage_err(scenario, "simulate"))?;
        let z_final = relative_positions(&fw.graph, &final_config).map_err(stage_err(scenario, "simulate"))?;
        simulation = Some(SimulationSummary {
            controller: scenario.controller.as_str().into(),
            dt: integ.dt,
            t_final: integ.t_final,
            steps: traj.len() - 1,
            seed: scenario.effective_seed(opts.seed),
            reference: kind,
            z_ref: edge_rows(&fw.graph, &z_ref),
            v_ref: v_ref.iter().cloned().collect(),
            final_shape_error: met.final_shape_error,
            final_velocity_error: met.final_velocity_error,
            final_velocity: linalg::block_mean(traj.final_velocity(), m).iter().cloned().collect(),
            final_relative_positions: edge_rows(&fw.graph, &z_final),
            threshold: met.threshold,
            settled: met.settled,
            settling_time: met.settling_time,
        });
        trajectory = Some(traj);
        metrics = Some(met);
    }

    let mut report = AnalysisReport {
        command,
        scenario: scenario.clone(),
        graph: class,
        spectrum,
        design: design_report.filter(|_| command != Command::Predict),
        prediction: prediction_report,
        simulation,
        notes,
        files: Vec::new(),
    };

    if let Some(dir) = opts.out_dir.clone().or_else(|| scenario.output.as_ref().and_then(|o| o.dir.clone())) {
        write_outputs(&dir, scenario, &mut report, trajectory.as_ref(), metrics.as_ref())?;
    }

    Ok(RunOutput {
        report,
        trajectory,
        metrics,
        prediction,
        design,
    })
}

fn design_stage(
    scenario: &Scenario,
    fw: &Framework,
    section: &ManeuverSection,
) -> Result<(ManeuverDesign, DesignReport), CliError> {
    let m = fw.dim();
    let err = stage_err(scenario, "design");
    let mode: MotionMode = section.mode.into();
    let explicit = scenario.explicit_mu()?;

    let omega_star = fw.graph.uniform_weight();
    let tree = graph::classify_graph(&fw.graph).tree;
    let bound_note = match (tree, omega_star) {
        (false, _) => Some("analytic kappa bound needs a tree graph; see the spectrum instead".to_string()),
        (true, None) => Some("analytic kappa bound needs uniform edge weights; see the spectrum instead".to_string()),
        _ => None,
    };
    let bound_of = |d: &ManeuverDesign| -> Result<Option<f64>, CliError> {
        match (bound_note.is_none(), omega_star) {
            (true, Some(w)) => kappa_bound(fw, &d.m_hat, w).map(Some).map_err(&err),
            _ => Ok(None),
        }
    };

    let v_target = match (&section.v_star, &explicit) {
        (Some(_), Some(_)) => return Err(invalid(scenario, "maneuver: give either v_star or mu, not both")),
        (None, None) => return Err(invalid(scenario, "maneuver: needs v_star or mu")),
        (Some(v), None) => {
            if v.len() != m {
                return Err(invalid(scenario, format!("maneuver.v_star has {} entries, expected {m}", v.len())));
            }
            Some(DVector::from_column_slice(v))
        }
        (None, Some(_)) => None,
    };

    let unit_motion = |kappa: f64| -> Result<MotionParams, CliError> {
        match (&explicit, &v_target) {
            (Some(mu), _) => Ok(mu.clone()),
            (None, Some(v)) => design_motion_params(fw, v, kappa, mode).map_err(&err),
            (None, None) => unreachable!("checked above"),
        }
    };

    let design = match (section.kappa, section.kappa_bound_fraction) {
        (Some(k), None) => build_maneuver(unit_motion(k)?, fw, k).map_err(&err)?,
        (None, Some(f)) => {
            if !(f > 0.0) || !f.is_finite() {
                return Err(invalid(scenario, format!("kappa_bound_fraction must be positive, got {f}")));
            }
            if let Some(note) = &bound_note {
                return Err(invalid(scenario, format!("kappa_bound_fraction: {note}")));
            }
            let unit = build_maneuver(unit_motion(1.0)?, fw, 1.0).map_err(&err)?;
            let bound = bound_of(&unit)?.expect("bound applicable");
            if !bound.is_finite() {
                return Err(invalid(scenario, "kappa_bound_fraction: the bound is infinite (no motion), set kappa directly"));
            }
            unit.with_kappa(fw, f * bound).map_err(&err)?
        }
        _ => return Err(invalid(scenario, "maneuver: give exactly one of kappa or kappa_bound_fraction")),
    };

    let bound = bound_of(&design)?;
    let spectrum = spectrum_check(&fw.l_bar, design.kappa, &design.lambda_hat, m).map_err(&err)?;
    let report = DesignReport {
        mode: match mode {
            MotionMode::Scalar => "scalar".into(),
            MotionMode::Matrix => "matrix".into(),
        },
        kappa: design.kappa,
        kappa_bound: bound.filter(|b| b.is_finite()),
        kappa_bound_infinite: bound.is_some_and(|b| b.is_infinite()),
        kappa_bound_note: bound_note,
        v_target: v_target.map(|v| v.iter().cloned().collect()),
        v_star: design.v_star.iter().cloned().collect(),
        mu: mu_entries(&design.motion),
        stable: spectrum.stable,
        spectrum: SpectrumSummary::from(&spectrum),
    };
    Ok((design, report))
}

fn mu_entries(motion: &MotionParams) -> Vec<MuEntry> {
    match motion {
        MotionParams::Scalar(map) => map
            .iter()
            .map(|(&(i, j), &v)| MuEntry {
                agent: i + 1,
                neighbor: j + 1,
                value: Some(v),
                block: None,
            })
            .collect(),
        MotionParams::Matrix { blocks, .. } => blocks
            .iter()
            .map(|(&(i, j), b)| MuEntry {
                agent: i + 1,
                neighbor: j + 1,
                value: None,
                block: Some(b.row_iter().map(|r| r.iter().cloned().collect()).collect()),
            })
            .collect(),
    }
}

fn prediction_summary(g: &Graph, model: &SensorModel, p: &RobustnessPrediction) -> PredictionReport {
    PredictionReport {
        sensor: SensorSummary::from(model),
        z_tilde: edge_rows(g, &p.z_tilde),
        v_tilde: p.v_tilde.iter().cloned().collect(),
        m_breve_max_abs: p.m_breve_max_abs(),
        consistency_residual: p.consistency_residual,
        p_tilde: p.p_tilde.points(),
        closed_loop: SpectrumSummary::from(&p.closed_loop),
        realizable: p.realizable,
    }
}

pub fn edge_rows(g: &Graph, z: &RelPosStack) -> Vec<EdgeRow> {
    g.edges()
        .iter()
        .zip(z.rows())
        .enumerate()
        .map(|(k, (e, value))| EdgeRow {
            edge: k + 1,
            tail: e.tail + 1,
            head: e.head + 1,
            value,
        })
        .collect()
}

fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    report: &mut AnalysisReport,
    trajectory: Option<&Trajectory>,
    metrics: Option<&ConvergenceMetrics>,
) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let output = scenario.output.clone().unwrap_or_default();
    let name = &scenario.name;
    let traj_name = output.trajectory_csv.unwrap_or_else(|| format!("{name}_trajectory.csv"));
    let metrics_name = output.metrics_csv.unwrap_or_else(|| format!("{name}_metrics.csv"));
    let report_name = output.report_json.unwrap_or_else(|| format!("{name}_report.json"));

    if let Some(traj) = trajectory {
        let path = dir.join(&traj_name);
        let mut w = BufWriter::new(File::create(&path).map_err(io(&path))?);
        traj.write_csv(&mut w).and_then(|_| w.flush()).map_err(io(&path))?;
        report.files.push(FileEntry {
            kind: "trajectory".into(),
            path: traj_name,
        });
    }
    if let Some(met) = metrics {
        let path = dir.join(&metrics_name);
        let mut w = BufWriter::new(File::create(&path).map_err(io(&path))?);
        met.write_csv(&mut w).and_then(|_| w.flush()).map_err(io(&path))?;
        report.files.push(FileEntry {
            kind: "metrics".into(),
            path: metrics_name,
        });
    }
    report.files.push(FileEntry {
        kind: "report".into(),
        path: report_name.clone(),
    });
    let path = dir.join(&report_name);
    fs::write(&path, report.to_json()).map_err(io(&path))?;
    Ok(())
}
