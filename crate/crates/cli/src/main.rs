use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Rank-two hypersurfaces of R^4 from hyperplane envelopes, and their
/// infinitesimal bendings.
#[derive(Debug, Parser)]
#[command(name = "bendkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Node counts `NUxNV` or `NUxNVxNS`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Multiplies every gate.
    #[arg(long)]
    pub gate_scale: Option<f64>,
    /// Built-in example used when the configuration names none.
    #[arg(long)]
    pub example: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solves the family phi_0 .. phi_{n+1} and writes family.json.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Builds the hypersurface and OBJ slices from a family.
    Build {
        #[command(flatten)]
        common: Common,
        /// Family file; defaults to <out>/family.json when present.
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Classifies the hypersurface, synthesizes and checks its bending.
    Bend {
        #[command(flatten)]
        common: Common,
        /// Hypersurface file; defaults to <out>/hypersurface.json.
        #[arg(long)]
        hypersurface: Option<PathBuf>,
    },
    /// Checks a displacement field at several deformation parameters.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Bending file; defaults to <out>/bending.json.
        #[arg(long)]
        bending: Option<PathBuf>,
        /// Comma-separated deformation parameters.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<f64>>,
    },
    /// Pointwise and global dimension of the space of bendings.
    Rigidity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hypersurface: Option<PathBuf>,
    },
    /// Writes OBJ meshes of the fiber slices.
    ExportMesh {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        hypersurface: Option<PathBuf>,
        /// Comma-separated ambient coordinates used for vertices.
        #[arg(long, value_delimiter = ',')]
        coords: Option<Vec<usize>>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { common } => commands::solve(&common),
        Command::Build { common, family } => commands::build(&common, family),
        Command::Bend { common, hypersurface } => commands::bend(&common, hypersurface),
        Command::Verify { common, bending, t } => commands::verify(&common, bending, t),
        Command::Rigidity { common, hypersurface } => commands::rigidity(&common, hypersurface),
        Command::ExportMesh { common, hypersurface, coords } => commands::export_mesh(&common, hypersurface, coords),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_class().code() as u8)
        }
    }
}
