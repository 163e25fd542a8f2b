//! Command-line driver for the phase-field flow simulator.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vpflow::diagnostics;
use vpflow::harness::{self, exec, io, plot, scenario, sweep, RunConfig};

#[derive(Parser)]
#[command(
    name = "vpflow",
    about = "Volume-preserving mean curvature flow via a penalized Allen-Cahn phase field on the torus",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation from a TOML configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path overrides, e.g. --override model.eps=0.01
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a named scenario with its default configuration.
    Scenario {
        /// One of: stationary-disk, two-disks, dumbbell, slab-1d,
        /// rs-comparison, barrier
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Artifact directory (default out/<name>).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print the scenario's default configuration and exit.
        #[arg(long)]
        show_config: bool,
    },
    /// Run one configuration per axis value and print a summary table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis spec key=v1,v2,... e.g. --axis model.eps=0.04,0.02
        #[arg(long)]
        axis: String,
    },
    /// Recompute a diagnostics record from a stored snapshot.
    Diagnose {
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Emit SVG plots of a diagnostics CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "out/plots")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(ok) => {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool, vpflow::Error> {
    match cli.command {
        Command::Run { config, overrides } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| vpflow::Error::io(&config, e))?;
            let cfg = RunConfig::parse_with_overrides(&text, &overrides)?;
            let report = exec::execute(&cfg, &exec::ExecExtras::default())?;
            print_run_summary(&report);
            if !report.battery.is_empty() {
                eprintln!("invariant battery failures:");
                for b in &report.battery {
                    eprintln!("  {b}");
                }
                return Ok(false);
            }
            Ok(true)
        }
        Command::Scenario {
            name,
            overrides,
            out_dir,
            show_config,
        } => {
            if show_config {
                let cfg = scenario::scenario_config(&name)?;
                println!("{}", cfg.to_toml());
                return Ok(true);
            }
            let out = out_dir.unwrap_or_else(|| PathBuf::from("out").join(&name));
            let report = scenario::run_scenario(&name, &overrides, &out)?;
            print!("{}", report.render());
            println!("artifacts in {}", out.display());
            Ok(report.passed())
        }
        Command::Sweep { config, axis } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| vpflow::Error::io(&config, e))?;
            let (key, vals) = axis.split_once('=').ok_or_else(|| vpflow::Error::Config {
                field: "--axis".into(),
                constraint: "expected key=v1,v2,...".into(),
            })?;
            let values: Vec<String> = vals.split(',').map(str::to_string).collect();
            let table = sweep::sweep(&text, key, &values);
            print!("{}", table.render());
            Ok(table.rows.iter().all(|r| r.outcome.is_ok()))
        }
        Command::Diagnose { snapshot } => {
            let (header, field) = io::read_snapshot(&snapshot)?;
            let params = vpflow::model::ModelParams::new(
                header.eps,
                header.alpha,
                header.kind,
                header.m0,
            )?;
            // the snapshot does not carry E_S(0); use the stored field's own
            // surface energy for the deficit bound (exact for t=0 snapshots)
            let e_s = diagnostics::surface_energy(&field, header.eps);
            let rec =
                diagnostics::make_record(&field, &params, header.t, f64::NAN, f64::NAN, e_s);
            println!("{}", vpflow::diagnostics::DiagnosticsRecord::CSV_HEADER);
            println!("{}", rec.csv_row());
            Ok(true)
        }
        Command::Plot { csv, out_dir } => {
            let records = io::read_csv(&csv)?;
            let files = plot::plot_csv(&records, &out_dir)?;
            for f in files {
                println!("wrote {f}");
            }
            Ok(true)
        }
    }
}

fn print_run_summary(report: &harness::ExecReport) {
    let first = report.records.first().unwrap();
    let last = report.records.last().unwrap();
    println!(
        "steps {}  dt {:.3e}  t {:.6}",
        report.steps, report.dt, last.t
    );
    println!(
        "E {:.6} -> {:.6}   dissipation {:.6}   int_lambda^2 {:.6e}",
        first.e, last.e, report.dissipation, report.int_lambda_sq
    );
    println!(
        "mass deficit {:.3e} (bound {:.3e})   sup|phi| {:.9}",
        last.mass_deficit, last.mass_bound, last.sup_abs_phi
    );
    if !report.density_cap.is_nan() {
        println!("density cap {:.5}", report.density_cap);
    }
}
