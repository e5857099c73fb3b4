//! `emoxai`: one subcommand per pipeline stage.

mod config;
mod fail;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::fail::Report;

#[derive(Debug, Parser)]
#[command(
    name = "emoxai",
    version,
    about = "Explainable emotion decoding pipeline"
)]
struct Cli {
    /// JSON config with one section per stage.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the root seed and every section seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where outputs and manifests go; default inputs are read from here too.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads for stage-internal parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Predictor server launched through `sh -c`.
    #[arg(long, global = true, conflicts_with = "predictor_tcp")]
    predictor_cmd: Option<String>,
    /// Predictor server at `host:port`.
    #[arg(long, global = true)]
    predictor_tcp: Option<String>,
    /// Config override `section.key=value`; the value is parsed as JSON when possible.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic subject with planted regions, movie frames, gaze and faces.
    GenSynthetic,
    /// Binary labels for the target emotion.
    PrepAnnotations(stages::PrepAnnotations),
    /// Decoder dataset from annotations and region series.
    PrepFmri(stages::PrepFmri),
    /// TR-grid frames, label dedup and face labels.
    BuildFrames(stages::BuildFrames),
    /// Cross-validated evaluation and a final model.
    Train(stages::Train),
    /// Architecture and regularization search.
    Gridsearch(stages::Gridsearch),
    /// Brain maps from a decoder, or saliency heatmaps from the predictor.
    Explain(stages::Explain),
    /// Importances of models trained on shuffled labels.
    Nullmodel(stages::Nullmodel),
    /// Per-region permutation p-values.
    Significance(stages::Significance),
    /// Spearman correlation between two maps with a spin null.
    Spin(stages::Spin),
    /// Gaze/saliency overlap per frame.
    Overlap(stages::Overlap),
    /// Per-region correlation between overlap and attributions.
    AttnMap(stages::AttnMap),
    /// Kolmogorov-Smirnov distance between two score distributions.
    Ks(stages::Ks),
    /// Heatmap PNG or macro-area table.
    Render(stages::Render),
    /// Serves a toy predictor on standard input and output.
    ServeToy(ServeToy),
    /// Plays the bundled protocol transcript against `--predictor-cmd`.
    Conformance(Conformance),
    /// Prints the effective config.
    PrintConfig,
}

#[derive(Debug, Args)]
struct ServeToy {
    #[arg(long, default_value = "quadrant-brightness")]
    kind: String,
}

#[derive(Debug, Args)]
struct Conformance {
    /// Also compare against the golden values of this toy predictor.
    #[arg(long)]
    golden: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()?;
    }
    let ctx = stages::Ctx {
        out: cli.out_dir,
        cfg,
        predictor_cmd: cli.predictor_cmd,
        predictor_tcp: cli.predictor_tcp,
    };
    match cli.command {
        Command::GenSynthetic => stages::gen_synthetic(&ctx),
        Command::PrepAnnotations(a) => stages::prep_annotations(&ctx, &a),
        Command::PrepFmri(a) => stages::prep_fmri(&ctx, &a),
        Command::BuildFrames(a) => stages::build_frames(&ctx, &a),
        Command::Train(a) => stages::train(&ctx, &a),
        Command::Gridsearch(a) => stages::gridsearch(&ctx, &a),
        Command::Explain(a) => stages::explain(&ctx, &a),
        Command::Nullmodel(a) => stages::nullmodel(&ctx, &a),
        Command::Significance(a) => stages::significance(&ctx, &a),
        Command::Spin(a) => stages::spin(&ctx, &a),
        Command::Overlap(a) => stages::overlap(&ctx, &a),
        Command::AttnMap(a) => stages::attn_map(&ctx, &a),
        Command::Ks(a) => stages::ks(&ctx, &a),
        Command::Render(a) => stages::render(&ctx, &a),
        Command::ServeToy(a) => {
            let mut p = emoxai::predictor::builtin(&a.kind, None)?;
            let stdin = std::io::stdin();
            emoxai::predictor::protocol::serve(&mut p, stdin.lock(), std::io::stdout().lock())?;
            Ok(())
        }
        Command::Conformance(a) => stages::conformance(&ctx, a.golden.as_deref()),
        Command::PrintConfig => {
            println!("{}", serde_json::to_string_pretty(&ctx.cfg)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = Report {
                kind: "usage".into(),
                message: e.to_string().trim_end().to_string(),
            };
            eprintln!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = Report::from_error(&e);
            eprintln!(
                "{}",
                serde_json::to_string(&report).expect("report serializes")
            );
            ExitCode::FAILURE
        }
    }
}
