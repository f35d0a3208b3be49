use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod table;

#[derive(Parser, Debug)]
#[command(
    name = "c1quintic",
    version,
    about = "C1 quintic splines on conic domains and a Monge-Ampere solver"
)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a built-in problem on a sequence of uniformly refined meshes.
    Solve(commands::SolveArgs),
    /// Mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Spline space utilities.
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Export data for external tools.
    #[command(subcommand)]
    Export(ExportCommand),
}

#[derive(Subcommand, Debug)]
enum MeshCommand {
    /// Check a mesh file against the admissibility conditions.
    Validate { mesh: String },
    /// Refine a mesh uniformly.
    Refine(commands::RefineArgs),
}

#[derive(Subcommand, Debug)]
enum SpaceCommand {
    /// Dimension of the spline space and the size of each dof category.
    Info(commands::InfoArgs),
}

#[derive(Subcommand, Debug)]
enum ExportCommand {
    /// Sample a saved solution on a lattice as x,y,value rows.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Spline file written by `solve --save-solution`.
    solution: PathBuf,
    /// Lattice points per axis.
    #[arg(long, default_value_t = 50)]
    lattice: usize,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Mesh(MeshCommand::Validate { mesh }) => commands::validate(&mesh),
        Command::Mesh(MeshCommand::Refine(a)) => commands::refine(a),
        Command::Space(SpaceCommand::Info(a)) => commands::space_info(a),
        Command::Export(ExportCommand::Plot(a)) => commands::export_plot(&a.solution, a.lattice, a.out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
