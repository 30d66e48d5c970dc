use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use roadaudit::pipeline::{self, RunOptions};
use roadaudit::raster::{load_class_mask, ClassSet};
use roadaudit::report::{detection_map, mask_miou};
use roadaudit::signs::load_detections;
use roadaudit::Error;

#[derive(Parser)]
#[command(name = "roadaudit", version, about = "Road inspection post-processing and damage maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze every frame of a scene manifest and write a GeoJSON report.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, required_unless_present = "validate_only")]
        output: Option<PathBuf>,
        /// Write refined / hot / flagged marking masks here.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
        /// Parallel frame workers (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Check the manifest and stop.
        #[arg(long)]
        validate_only: bool,
    },
    /// List manifest problems.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Mean average precision of JSON-lines detections against ground truth.
    EvalMap {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Mean IoU of two P5 class masks over the given classes.
    EvalMiou {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        classes: Vec<u8>,
    },
}

const EXIT_INVALID: u8 = 1;
const EXIT_OUTPUT: u8 = 2;

fn report_problems(problems: &[String]) -> ExitCode {
    if problems.is_empty() {
        println!("manifest ok");
        return ExitCode::SUCCESS;
    }
    for p in problems {
        eprintln!("problem: {p}");
    }
    ExitCode::from(EXIT_INVALID)
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { manifest } => report_problems(&pipeline::validate(manifest)),
        Command::Run {
            manifest,
            output,
            debug_dir,
            jobs,
            validate_only,
        } => {
            if validate_only {
                return report_problems(&pipeline::validate(manifest));
            }
            let opts = RunOptions {
                output: output.expect("clap requires --output"),
                debug_dir,
                jobs,
            };
            match pipeline::run(&manifest, &opts) {
                Ok(summary) => {
                    for d in &summary.diagnostics {
                        eprintln!("diagnostic: {d}");
                    }
                    print_json(&summary);
                    ExitCode::SUCCESS
                }
                Err(Error::ManifestInvalid(msg)) => {
                    eprintln!("invalid manifest: {msg}");
                    ExitCode::from(EXIT_INVALID)
                }
                Err(e) => {
                    eprintln!("cannot write output: {e}");
                    ExitCode::from(EXIT_OUTPUT)
                }
            }
        }
        Command::EvalMap { pred, truth, iou } => {
            let result = load_detections(pred)
                .and_then(|p| Ok((p, load_detections(truth)?)))
                .and_then(|(p, t)| detection_map(&p, &t, iou));
            match result {
                Ok(r) => {
                    print_json(&r);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INVALID)
                }
            }
        }
        Command::EvalMiou { pred, truth, classes } => {
            let classes: ClassSet = classes.into_iter().collect();
            let result = load_class_mask(pred)
                .and_then(|p| Ok((p, load_class_mask(truth)?)))
                .and_then(|(p, t)| mask_miou(&p, &t, &classes));
            match result {
                Ok(m) => {
                    print_json(&serde_json::json!({ "miou": m }));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_INVALID)
                }
            }
        }
    }
}
