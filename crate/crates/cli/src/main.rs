use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use formation_cli::error::{EXIT_OK, EXIT_VALIDATION};
use formation_cli::{run_batch, run_scenario_file, AnalysisReport, CliError, Command, RunOptions};

/// Formation-control lab: graph checks, maneuver design, sensing-fault
/// prediction and closed-loop simulation driven by scenario files.
#[derive(Debug, Parser)]
#[command(name = "formlab", version)]
struct Args {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "batch", required_unless_present = "batch")]
    scenario: Option<PathBuf>,

    /// Run every scenario in a directory in parallel.
    #[arg(long)]
    batch: Option<PathBuf>,

    /// Stage to run: check, design, predict, simulate or full.
    #[arg(long, default_value = "full")]
    command: Command,

    /// Output directory for the report and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for random initial conditions (overrides the scenario).
    #[arg(long)]
    seed: Option<u64>,

    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn summary(report: &AnalysisReport) -> String {
    let mut parts = vec![format!("{} [{}]", report.scenario.name, report.command.as_str())];
    let g = &report.graph;
    parts.push(format!("graph: connected={} tree={}", g.connected, g.tree));
    if let Some(s) = &report.spectrum {
        parts.push(format!("spectrum: stable={} zeros={}", s.stable, s.zero_count));
    }
    if let Some(d) = &report.design {
        let bound = match (d.kappa_bound, d.kappa_bound_infinite) {
            (Some(b), _) => format!("{b:.6}"),
            (None, true) => "inf".into(),
            (None, false) => "n/a".into(),
        };
        parts.push(format!("design: kappa={:.6} bound={bound} v*={:?}", d.kappa, d.v_star));
    }
    if let Some(p) = &report.prediction {
        parts.push(format!("prediction: v~*={:?} realizable={}", p.v_tilde, p.realizable));
    }
    if let Some(s) = &report.simulation {
        parts.push(format!(
            "simulation: shape_error={:.3e} velocity_error={:.3e} settled={}",
            s.final_shape_error, s.final_velocity_error, s.settled
        ));
    }
    for note in &report.notes {
        parts.push(format!("note: {note}"));
    }
    for f in &report.files {
        parts.push(format!("wrote {} ({})", f.path, f.kind));
    }
    parts.join("\n  ")
}

fn report_error(err: &CliError) -> i32 {
    eprintln!("error: {err}");
    err.exit_code()
}

fn main() -> ExitCode {
    let args = Args::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if args.quiet { "error" } else { "warn" }))
        .init();

    let opts = RunOptions {
        out_dir: Some(args.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
        seed: args.seed,
    };

    let code = if let Some(dir) = &args.batch {
        match run_batch(dir, args.command, &opts) {
            Err(e) => report_error(&e),
            Ok(results) => results
                .iter()
                .map(|(path, result)| match result {
                    Ok(out) => {
                        if !args.quiet {
                            println!("{}: {}", path.display(), summary(&out.report));
                        }
                        EXIT_OK
                    }
                    Err(e) => {
                        eprint!("{}: ", path.display());
                        report_error(e)
                    }
                })
                .max()
                .unwrap_or(EXIT_OK),
        }
    } else {
        let path = args.scenario.as_ref().expect("clap enforces --scenario without --batch");
        match run_scenario_file(path, args.command, &opts) {
            Ok(out) => {
                if !args.quiet {
                    println!("{}", summary(&out.report));
                }
                EXIT_OK
            }
            Err(e) => report_error(&e),
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_VALIDATION as u8))
}
