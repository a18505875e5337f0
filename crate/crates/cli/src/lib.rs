//! The `catdet` command: run the cascade over recorded sequences, evaluate
//! detections, summarise run costs, and generate synthetic sequences.

mod cost_report;
mod error;
mod eval_cmd;
mod gen;
pub mod manifest;
mod output;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
pub use error::CliError;
pub use manifest::RunManifest;

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CATDET_CONFIG";

#[derive(Debug, Parser)]
#[command(
    name = "catdet",
    version,
    about = "Tracker-assisted cascaded detection over recorded video sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the detection pipeline over one or more sequence directories.
    Run(RunArgs),
    /// Score detections against KITTI tracking labels: AP, mAP and mean delay.
    Eval(EvalArgs),
    /// Summarise the per-frame operation counts of a finished run.
    CostReport(CostReportArgs),
    /// Generate a synthetic sequence directory from a scenario file.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Pipeline config file. Ignored with --manifest.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Sequence directory (meta.toml, proposal.txt, refinement.txt). Repeatable.
    #[arg(long = "sequence", required_unless_present = "manifest")]
    pub sequences: Vec<PathBuf>,
    /// Replay the config and inputs recorded in a previous run's manifest.
    #[arg(long, conflicts_with_all = ["sequences", "mode", "c_thresh", "t_thresh", "margin", "nms_iou"])]
    pub manifest: Option<PathBuf>,
    /// Overrides the config's pipeline mode.
    #[arg(long, value_parser = ["single", "cascaded", "catdet"])]
    pub mode: Option<String>,
    /// Output directory; must not exist yet.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the refinement regions of every frame.
    #[arg(long)]
    pub dump_masks: bool,
    /// Sequences processed in parallel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Minimum proposal score sent to refinement; above 1 disables proposals.
    #[arg(long)]
    pub c_thresh: Option<f64>,
    /// Minimum final score fed to the tracker; above 1 disables the tracker.
    #[arg(long)]
    pub t_thresh: Option<f64>,
    /// Pixels added around each region before refinement.
    #[arg(long)]
    pub margin: Option<f64>,
    /// IoU above which the final NMS suppresses a detection.
    #[arg(long)]
    pub nms_iou: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// KITTI tracking label file. Repeatable, paired in order with --detections.
    #[arg(long = "labels", required = true)]
    pub labels: Vec<PathBuf>,
    /// Detection file. Repeatable.
    #[arg(long = "detections", required = true)]
    pub detections: Vec<PathBuf>,
    /// Config file; only its class list and [eval] section are used.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Comma-separated frame indices: evaluate only these (sparse labels).
    #[arg(long, value_delimiter = ',')]
    pub labeled_frames: Option<Vec<u32>>,
    /// Target mean precision of the delay operating point.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Write per-class precision/recall/delay curves here (tab-separated).
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CostReportArgs {
    /// Output directory of `catdet run`.
    #[arg(long)]
    pub run: PathBuf,
    /// Also evaluate the run's detections against the sequences' labels.
    #[arg(long)]
    pub eval: bool,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output sequence directory; must not exist yet.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file supplying the class list.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run::cmd_run(&a, out),
        Command::Eval(a) => eval_cmd::cmd_eval(&a, out),
        Command::CostReport(a) => cost_report::cmd_cost_report(&a, out),
        Command::GenSynthetic(a) => gen::cmd_gen(&a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
