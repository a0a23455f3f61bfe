#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod manifest;
mod svg;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "hapticsim",
    version,
    about = "Vibrotactile / pneumatic fingertip display simulator"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base seed; per-run seeds are derived from it
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config file (plant/gains for step-sweep, scenario for scenario)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (or file for synth/trials when it has an extension)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory searched for default configs
    #[arg(
        long,
        env = "HAPTICSIM_CONFIG_DIR",
        default_value = "configs",
        global = true
    )]
    pub config_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pressure step responses across targets, with metrics table and plots
    StepSweep(commands::StepSweepArgs),
    /// Render a drive waveform from a speed trace or a constant speed to WAV
    Synth(commands::SynthArgs),
    /// Generate a participant's trial plan as CSV
    Trials(commands::TrialsArgs),
    /// Rank stimuli that make one material feel like another
    Recommend(commands::RecommendArgs),
    /// Run an end-to-end scenario
    Scenario(commands::ScenarioArgs),
    /// Overlap of two rating distributions
    Overlap(commands::OverlapArgs),
}

fn fail(err: &CliError) -> ExitCode {
    let body = serde_json::json!({ "error": { "kind": err.kind, "message": err.message } });
    eprintln!("{body}");
    ExitCode::from(err.code)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::usage(e.render().to_string().trim_end()));
        }
    };
    match commands::run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
