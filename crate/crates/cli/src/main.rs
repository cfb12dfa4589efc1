use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "fullgroup-lab",
    version,
    about = "Finite-window experiments on line-like Cantor actions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Window {
    /// Radius of the ball around the basepoint.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Use the level-n Schreier graph instead of a ball.
    #[arg(long)]
    pub level: Option<usize>,
    /// Vertex cap for ball and level construction.
    #[arg(long, default_value_t = fullgroup_core::schreier::DEFAULT_VERTEX_CAP)]
    pub cap: usize,
}

#[derive(Args, Clone)]
pub struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum ActionCommand {
    /// Print the JSON description of an action.
    Dump {
        action: String,
        #[command(flatten)]
        output: Output,
    },
    /// Load an action and check inverses and (for grigorchuk) the defining relations.
    Check {
        action: String,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Subcommand)]
pub enum ElementCommand {
    /// Validate an element file.
    Check {
        action: String,
        #[arg(long)]
        element: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Apply an element to a point given as `pre(period)`.
    Apply {
        action: String,
        #[arg(long)]
        element: PathBuf,
        point: String,
        #[command(flatten)]
        output: Output,
    },
    /// Compose two elements (pass --element twice): the first after the second.
    Compose {
        action: String,
        #[arg(long, required = true)]
        element: Vec<PathBuf>,
        #[arg(long, default_value_t = fullgroup_core::full_group::DEFAULT_DEPTH_CAP)]
        depth_cap: usize,
        #[command(flatten)]
        output: Output,
    },
    Invert {
        action: String,
        #[arg(long)]
        element: PathBuf,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Subcommand)]
pub enum Command {
    #[command(subcommand)]
    Action(ActionCommand),
    /// Schreier ball or level graph as JSON or DOT.
    Graph {
        action: String,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        no_loops: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Fit a quasi-isometry chart and check its certificates.
    Qi {
        action: String,
        #[command(flatten)]
        window: Window,
        #[command(flatten)]
        output: Output,
    },
    #[command(subcommand)]
    Element(ElementCommand),
    /// Cocycle value of an element on the half-space Y.
    Cocycle {
        action: String,
        #[arg(long)]
        element: PathBuf,
        #[arg(long, default_value_t = 60)]
        radius: usize,
        #[arg(long, default_value_t = fullgroup_core::schreier::DEFAULT_VERTEX_CAP)]
        cap: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Transport Y to pattern matches of the basepoint.
    Transport {
        action: String,
        #[command(flatten)]
        family: Family,
        /// Vertex to transport to; defaults to every match up to --points.
        #[arg(long)]
        z: Option<usize>,
        #[arg(long, default_value_t = fullgroup_core::verify::TRANSPORT_POINTS)]
        points: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Nested half-spaces along the geodesic and the finite order of ⟨F⟩.
    Stabilizer {
        action: String,
        #[command(flatten)]
        family: Family,
        #[arg(long, default_value_t = fullgroup_core::permgroup::DEFAULT_ORDER_CAP)]
        order_cap: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Exact escape probabilities; `tree3` selects the 3-regular tree control.
    Recurrence {
        action: String,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8, 16, 32])]
        radii: Vec<usize>,
        /// Also run this many simulated walks per radius.
        #[arg(long)]
        simulate: Option<usize>,
        #[arg(long, default_value_t = fullgroup_core::schreier::DEFAULT_VERTEX_CAP)]
        cap: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Run every check and emit one report.
    Verify {
        action: String,
        #[arg(long, default_value_t = 200)]
        radius: usize,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long = "F")]
        family: Option<PathBuf>,
        #[arg(long, default_value_t = fullgroup_core::schreier::DEFAULT_VERTEX_CAP)]
        cap: usize,
        #[arg(long, default_value_t = fullgroup_core::permgroup::DEFAULT_ORDER_CAP)]
        order_cap: usize,
        #[arg(long, default_value_t = fullgroup_core::full_group::DEFAULT_DEPTH_CAP)]
        depth_cap: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Record wall-clock times (makes the report nondeterministic).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args, Clone)]
pub struct Family {
    /// JSON array of element files; defaults to the built-in kernel element.
    #[arg(long = "F")]
    pub file: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub radius: usize,
    #[arg(long, default_value_t = fullgroup_core::schreier::DEFAULT_VERTEX_CAP)]
    pub cap: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
    }
}
