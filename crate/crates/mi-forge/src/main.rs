use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mi_forge::config::PipelineConfig;
use mi_forge::pipeline::{Pipeline, StageOutcome};

#[derive(Parser)]
#[command(name = "mi-forge", version, about = "Generate and evaluate coded counseling dialogues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Regenerate items that already exist in the output files
    #[arg(long)]
    force: bool,
    /// Override the configured base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Ablation: drop the situational story from client prompts
    #[arg(long)]
    no_story: bool,
    /// Ablation: skip strategy selection and MI-code conditioning
    #[arg(long)]
    no_mi_code: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fill questionnaires for the configured number of profiles
    Profile(Common),
    /// Expand profiles into situational stories
    Story(Common),
    /// Run dialogue sessions over the profiles
    Simulate(Common),
    /// Compute lexical and strategy metrics per session
    Eval(Common),
    /// Rubric-score sessions with the judge model
    Judge {
        #[command(flatten)]
        common: Common,
        /// Show therapist MI codes to the judge
        #[arg(long)]
        include_codes: bool,
    },
    /// Agreement and judge-human alignment statistics
    Stats {
        #[command(flatten)]
        common: Common,
        /// Human rating CSVs (session_id, annotator, six dimension columns)
        #[arg(long, required = true, num_args = 1..)]
        ratings: Vec<PathBuf>,
    },
    /// Render the Markdown report
    Report(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Profile(c)
            | Command::Story(c)
            | Command::Simulate(c)
            | Command::Eval(c)
            | Command::Report(c) => c,
            Command::Judge { common, .. } => common,
            Command::Stats { common, .. } => common,
        }
    }
}

fn build_pipeline(common: &Common) -> anyhow::Result<Pipeline> {
    let mut config = PipelineConfig::load(&common.config).map_err(anyhow::Error::msg)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if common.no_story {
        config.ablation.use_story = false;
    }
    if common.no_mi_code {
        config.ablation.use_mi_code = false;
    }
    Pipeline::new(config)
}

fn print_outcome(stage: &str, outcome: &StageOutcome) {
    println!(
        "{stage}: {} generated, {} kept, wrote {}",
        outcome.generated,
        outcome.skipped,
        outcome.path.display()
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let common = cli.command.common();
    let pipeline = build_pipeline(common)?;
    let force = common.force;
    match &cli.command {
        Command::Profile(_) => print_outcome("profile", &pipeline.cmd_profile(force)?),
        Command::Story(_) => print_outcome("story", &pipeline.cmd_story(force)?),
        Command::Simulate(_) => print_outcome("simulate", &pipeline.cmd_simulate(force)?),
        Command::Eval(_) => print_outcome("eval", &pipeline.cmd_eval(force)?),
        Command::Judge { include_codes, .. } => {
            print_outcome("judge", &pipeline.cmd_judge(force, *include_codes)?)
        }
        Command::Stats { ratings, .. } => {
            let (agreement, correlations) = pipeline.cmd_stats(ratings)?;
            println!("stats: wrote {} and {}", agreement.display(), correlations.display());
        }
        Command::Report(_) => {
            let path = pipeline.cmd_report()?;
            println!("report: wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
