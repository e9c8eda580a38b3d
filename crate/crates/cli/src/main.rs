use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shapdbm::config::RunConfig;
use shapdbm::pipeline::{self, Stage};

/// Exit code for configuration problems (unreadable file, bad key or value).
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "shapdbm", version, about = "Decision boundary maps in data space and Shapley space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (sectioned key = value). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `section.key=value`; may be repeated, applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; takes precedence over `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run(Common),
    /// Load or generate the dataset and split it.
    Ingest(Common),
    /// Train and evaluate the classifier.
    Train(Common),
    /// Shapley attributions of the projected samples.
    Shap(Common),
    /// t-SNE embeddings of every map space.
    Project(Common),
    /// Fit inverse projections.
    Inverse(Common),
    /// Render decision maps and images.
    Render(Common),
    /// Map accuracy, precision and recall, plus the comparison table.
    Eval(Common),
    /// Round-trip reconstructions.
    Roundtrip(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, common) = match cli.command {
        Command::Run(c) => (None, c),
        Command::Ingest(c) => (Some(Stage::Ingest), c),
        Command::Train(c) => (Some(Stage::Train), c),
        Command::Shap(c) => (Some(Stage::Shap), c),
        Command::Project(c) => (Some(Stage::Project), c),
        Command::Inverse(c) => (Some(Stage::Inverse), c),
        Command::Render(c) => (Some(Stage::Render), c),
        Command::Eval(c) => (Some(Stage::Eval), c),
        Command::Roundtrip(c) => (Some(Stage::Roundtrip), c),
    };

    let loaded = match &common.config {
        Some(path) => RunConfig::load(path, &common.overrides),
        None => RunConfig::parse_with_overrides("", &common.overrides),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(out) = common.out {
        cfg.run.out = out;
    }

    let result = match stage {
        None => pipeline::run_pipeline(&cfg),
        Some(stage) => pipeline::run_stage(&cfg, stage),
    };
    match result {
        Ok(manifest) => {
            for (stage, secs) in &manifest.timings {
                eprintln!("{stage:>10}  {secs:8.2}s");
            }
            println!("{}", cfg.run.out.join(pipeline::MANIFEST).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
