use branchtime_cli::{
    cmd_build, cmd_check, cmd_graph, cmd_solve, parse_horizon, CliError, InitialCondition, SolveRequest,
};
use branchtime_core::cauchy::SolverConfig;
use branchtime_core::timeline::Horizon;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "branchtime", version, about = "Branched time structures and Cauchy problems on them")]
struct Cli {
    /// Override the spec file's horizon, e.g. --horizon=-20,20
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = horizon_arg)]
    horizon: Option<Horizon>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and validate a structure, printing its counts
    Build { spec: PathBuf },
    /// Solve x' = f(x) on a structure
    Solve {
        spec: PathBuf,
        /// Right-hand side, e.g. "x*(1-x)"
        #[arg(long = "f", allow_hyphen_values = true)]
        f: String,
        /// Initial condition path@t=value, e.g. "[]@-1=1"; repeatable
        #[arg(long = "ic", required = true, allow_hyphen_values = true, value_parser = ic_arg)]
        ic: Vec<InitialCondition>,
        #[arg(long, default_value_t = SolverConfig::default().step)]
        step: f64,
        #[arg(long = "tol-abs", alias = "tol", default_value_t = SolverConfig::default().tol_abs)]
        tol_abs: f64,
        #[arg(long = "tol-rel", default_value_t = SolverConfig::default().tol_rel)]
        tol_rel: f64,
        #[arg(long = "blowup-cap", default_value_t = SolverConfig::default().blowup_cap)]
        blowup_cap: f64,
        /// Trajectory CSV; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
        /// Consistency report; on failure it goes to stdout when absent
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Export the oriented graph as DOT
    Graph {
        spec: PathBuf,
        /// DOT file; stdout when absent
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Diagnose the chronological relation and separation
    Check {
        spec: PathBuf,
        /// Diagnose the Hausdorff quotient instead
        #[arg(long)]
        mccabe: bool,
    },
}

fn horizon_arg(text: &str) -> Result<Horizon, String> {
    parse_horizon(text).map_err(|e| e.to_string())
}

fn ic_arg(text: &str) -> Result<InitialCondition, String> {
    text.parse().map_err(|e: CliError| e.to_string())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Build { spec } => cmd_build(&spec, cli.horizon, &mut stdout),
        Command::Solve {
            spec,
            f,
            ic,
            step,
            tol_abs,
            tol_rel,
            blowup_cap,
            out,
            report,
        } => {
            let req = SolveRequest {
                spec,
                horizon: cli.horizon,
                f,
                conditions: ic,
                config: SolverConfig {
                    step,
                    tol_abs,
                    tol_rel,
                    blowup_cap,
                    ..SolverConfig::default()
                },
                out,
                report,
            };
            cmd_solve(&req, &mut stdout)
        }
        Command::Graph { spec, dot } => cmd_graph(&spec, cli.horizon, dot.as_deref(), &mut stdout),
        Command::Check { spec, mccabe } => cmd_check(&spec, cli.horizon, mccabe, &mut stdout),
    }
}

fn main() -> ExitCode {
    // usage errors are input errors; clap's own code 2 is reserved here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
