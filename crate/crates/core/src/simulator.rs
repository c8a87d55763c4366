//! Fixed-step RK4 integration of the single-integrator closed loops.
//!
//! Every controller in the crate yields a linear system `ṗ = -A p + f`:
//!
//! | controller | `A`          | `f`      |
//! |------------|--------------|----------|
//! | nominal    | `L̄`          | `L̄ p*`   |
//! | maneuver   | `L̄ - κ Λ̂`    | `L̄ p*`   |
//! | faulty     | `D_x L̄`      | `L̄ p*`   |

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FormationError, Result};
use crate::framework::Framework;
use crate::linalg;
use crate::maneuver::ManeuverDesign;
use crate::robustness::{build_sensor_matrix, SensorModel};
use crate::shape::{self, Configuration, RelPosStack};

/// Norm of `p` beyond which a run is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone)]
pub enum Controller {
    Nominal,
    Maneuver(ManeuverDesign),
    Faulty(SensorModel),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Nominal => "nominal",
            Controller::Maneuver(_) => "maneuver",
            Controller::Faulty(_) => "faulty",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DynamicsSpec<'a> {
    pub framework: &'a Framework,
    pub controller: Controller,
}

/// `ṗ = -A p + f`
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub f: DVector<f64>,
}

impl LinearSystem {
    pub fn velocity(&self, p: &DVector<f64>) -> DVector<f64> {
        &self.f - &self.a * p
    }
}

impl<'a> DynamicsSpec<'a> {
    pub fn new(framework: &'a Framework, controller: Controller) -> Self {
        DynamicsSpec { framework, controller }
    }

    pub fn linear_system(&self) -> Result<LinearSystem> {
        let fw = self.framework;
        let a = match &self.controller {
            Controller::Nominal => fw.l_bar.clone(),
            Controller::Maneuver(design) => {
                if design.lambda_hat.shape() != fw.l_bar.shape() {
                    return Err(FormationError::DimensionMismatch {
                        what: "Λ̂ rows",
                        expected: fw.l_bar.nrows(),
                        found: design.lambda_hat.nrows(),
                    });
                }
                design.system_matrix(fw)
            }
            Controller::Faulty(model) => {
                if model.agents() != fw.agents() {
                    return Err(FormationError::DimensionMismatch {
                        what: "sensor model agent count",
                        expected: fw.agents(),
                        found: model.agents(),
                    });
                }
                build_sensor_matrix(model, fw.dim())? * &fw.l_bar
            }
        };
        Ok(LinearSystem {
            a,
            f: &fw.l_bar * fw.p_star(),
        })
    }
}

/// Time-stamped configurations with the exact velocity `u(p(t))` per sample.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub m: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_velocity(&self) -> &DVector<f64> {
        self.velocities.last().expect("trajectory has at least the initial sample")
    }

    /// `t,p1x,p1y,...` with one row per step, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.len() / self.m);
        let mut header = String::from("t");
        for i in 1..=n {
            for d in 0..self.m {
                header.push_str(&format!(",p{i}{}", axis_label(d, self.m)));
            }
        }
        writeln!(w, "{header}")?;
        for (t, p) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt17(*t))?;
            for x in p.iter() {
                write!(w, ",{}", fmt17(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn axis_label(d: usize, m: usize) -> String {
    if m <= 3 {
        ["x", "y", "z"][d].to_string()
    } else {
        format!("_{}", d + 1)
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Uniform random configuration in the box `[-half_width, half_width]^(mn)`.
pub fn random_configuration(n: usize, m: usize, seed: u64, half_width: f64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = DVector::from_fn(n * m, |_, _| rng.random_range(-half_width..=half_width));
    Configuration::new(m, p).expect("length is a multiple of m")
}

/// Largest stable step `1 / (2 max |Re λ(A)|)` for the explicit integrator.
pub fn max_step(system: &LinearSystem) -> Result<f64> {
    let max_re = linalg::eigenvalues(&system.a)?
        .iter()
        .fold(0.0f64, |acc, e| acc.max(e.re.abs()));
    Ok(if max_re == 0.0 { f64::INFINITY } else { 0.5 / max_re })
}

/// Classic RK4 with fixed step `dt` from `0` to `t_final`, recording every step.
pub fn simulate(spec: &DynamicsSpec<'_>, p0: &Configuration, dt: f64, t_final: f64) -> Result<Trajectory> {
    let fw = spec.framework;
    p0.check_agents(fw.agents(), fw.dim())?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FormationError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_final >= dt) || !t_final.is_finite() {
        return Err(FormationError::InvalidParameter(format!(
            "final time {t_final} must be at least dt = {dt}"
        )));
    }
    let system = spec.linear_system()?;
    let dt_max = max_step(&system)?;
    if dt > dt_max {
        return Err(FormationError::StepTooLarge { dt, suggested: dt_max });
    }

    let steps = (t_final / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);

    let mut p = p0.as_vector().clone();
    let mut v = system.velocity(&p);
    times.push(0.0);
    states.push(p.clone());
    velocities.push(v.clone());

    for step in 1..=steps {
        let k1 = &v;
        let k2 = system.velocity(&(&p + k1 * (0.5 * dt)));
        let k3 = system.velocity(&(&p + &k2 * (0.5 * dt)));
        let k4 = system.velocity(&(&p + &k3 * dt));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);

        let time = step as f64 * dt;
        let norm = p.norm();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(FormationError::Divergence { step, time, norm });
        }
        v = system.velocity(&p);
        times.push(time);
        states.push(p.clone());
        velocities.push(v.clone());
    }

    Ok(Trajectory {
        m: fw.dim(),
        times,
        states,
        velocities,
    })
}

/// Shape and velocity error series against reference relative positions and a
/// reference common velocity.
#[derive(Debug, Clone)]
pub struct ConvergenceMetrics {
    pub times: Vec<f64>,
    /// `‖z(t) - z_ref‖`
    pub shape_error: Vec<f64>,
    /// `‖ṗ(t) - 1_n ⊗ v_ref‖`
    pub velocity_error: Vec<f64>,
    pub final_shape_error: f64,
    pub final_velocity_error: f64,
    pub threshold: f64,
    pub settled: bool,
    /// First time after which both errors stay below the threshold.
    pub settling_time: Option<f64>,
}

impl ConvergenceMetrics {
    /// `t,shape_error,velocity_error`
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,shape_error,velocity_error")?;
        for ((t, s), v) in self.times.iter().zip(&self.shape_error).zip(&self.velocity_error) {
            writeln!(w, "{},{},{}", fmt17(*t), fmt17(*s), fmt17(*v))?;
        }
        Ok(())
    }
}

pub fn convergence_metrics(
    traj: &Trajectory,
    fw: &Framework,
    z_ref: &RelPosStack,
    v_ref: &DVector<f64>,
) -> Result<ConvergenceMetrics> {
    let m = traj.m;
    if z_ref.edges() != fw.graph.edge_count() || z_ref.m != m {
        return Err(FormationError::DimensionMismatch {
            what: "reference relative positions",
            expected: fw.graph.edge_count() * m,
            found: z_ref.z.len(),
        });
    }
    if v_ref.len() != m {
        return Err(FormationError::DimensionMismatch {
            what: "reference velocity dimension",
            expected: m,
            found: v_ref.len(),
        });
    }
    let z_ref_v = z_ref.to_vector();
    let drift = linalg::repeat_block(v_ref, fw.agents());
    let mut shape_error = Vec::with_capacity(traj.len());
    let mut velocity_error = Vec::with_capacity(traj.len());
    for (p, v) in traj.states.iter().zip(&traj.velocities) {
        let config = Configuration::new(m, p.clone())?;
        let z = shape::relative_positions(&fw.graph, &config)?.to_vector();
        shape_error.push((z - &z_ref_v).norm());
        velocity_error.push((v - &drift).norm());
    }

    let threshold = 1e-3 * z_ref.norm().max(1.0);
    let below = |k: usize| shape_error[k] < threshold && velocity_error[k] < threshold;
    let last = traj.len().saturating_sub(1);
    let settled = !traj.is_empty() && below(last);
    let settling_time = settled.then(|| {
        let mut k = last;
        while k > 0 && below(k - 1) {
            k -= 1;
        }
        traj.times[k]
    });

    Ok(ConvergenceMetrics {
        times: traj.times.clone(),
        final_shape_error: shape_error.last().copied().unwrap_or(f64::NAN),
        final_velocity_error: velocity_error.last().copied().unwrap_or(f64::NAN),
        shape_error,
        velocity_error,
        threshold,
        settled,
        settling_time,
    })
}
