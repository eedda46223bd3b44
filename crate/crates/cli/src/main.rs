use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maglev_cli::feasibility::run_feasibility;
use maglev_cli::manifest::StageStatus;
use maglev_cli::pipeline::run_scenario;
use maglev_cli::plotdata::emit_plotdata;
use maglev_cli::sweep::{parse_values, run_sweep, workers_from_env};
use maglev_cli::{CliError, Scenario};

/// Digital twin of a magnetically levitated superconducting microsphere.
#[derive(Parser)]
#[command(name = "maglev", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the staged cooling sequence of a scenario.
    Run {
        scenario: PathBuf,
        /// Output directory; overrides run.output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Repeat a run for each value of one scenario key.
    Sweep {
        scenario: PathBuf,
        /// Dotted scenario key, e.g. interferometric.gamma_fb.
        #[arg(long)]
        param: String,
        /// Comma-separated values with units, e.g. "1 Hz, 10 Hz".
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write plot data for a figure from a run, sweep or feasibility manifest.
    Plotdata {
        manifest: PathBuf,
        /// fig2, fig3, fig4a, fig4b or fig5.
        #[arg(long)]
        fig: String,
    },
    /// Ground-state budgets, finesse sweep and quench model.
    Feasibility {
        scenario: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn output_dir(s: &Scenario, flag: Option<PathBuf>) -> PathBuf {
    flag.unwrap_or_else(|| PathBuf::from(s.text("run.output")))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { scenario, output } => {
            let s = Scenario::from_file(&scenario)?;
            let out = output_dir(&s, output);
            let outcome = run_scenario(&s, &out)?;
            for st in &outcome.manifest.stages {
                let exit = st.exit_rms_m.map(|x| format!("{x:.3e} m")).unwrap_or_else(|| "-".into());
                let status = match st.status {
                    StageStatus::Ok => "ok",
                    StageStatus::Disabled => "disabled",
                    StageStatus::Aborted => "ABORTED",
                };
                println!("{:<16} {:<9} rms {:.3e} m -> {}", st.name, status, st.entry_rms_m, exit);
            }
            println!("manifest: {}", outcome.manifest_path.display());
            match outcome.error {
                Some(e) => Err(e),
                None => Ok(0),
            }
        }
        Command::Sweep {
            scenario,
            param,
            values,
            output,
        } => {
            let s = Scenario::from_file(&scenario)?;
            let list = parse_values(&param, &values)?;
            let out = output_dir(&s, output);
            let outcome = run_sweep(&s, &param, &list, &out, workers_from_env()?)?;
            for r in &outcome.manifest.runs {
                println!("{:>4}  {:<24} exit {}", r.index, r.value, r.exit_code);
            }
            println!("manifest: {}", outcome.manifest_path.display());
            Ok(outcome.exit_code)
        }
        Command::Plotdata { manifest, fig } => {
            for p in emit_plotdata(&manifest, &fig)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Feasibility { scenario, output } => {
            let s = Scenario::from_file(&scenario)?;
            let out = output_dir(&s, output);
            let (_, path) = run_feasibility(&s, &out)?;
            let report = std::fs::read_to_string(Path::new(&out).join(maglev_cli::feasibility::REPORT_FILE))
                .map_err(|e| CliError::io(&out, e))?;
            print!("{report}");
            println!("manifest: {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
