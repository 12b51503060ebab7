//! Command-line driver: argument parsing and the five subcommands.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod generate;
pub mod mask_demo;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use occbench::occluder::import_directory;
use occbench::report::Condition;
use occbench::Category;

use crate::config::{FileConfig, RunConfig, DEFAULT_THRESHOLDS};
use crate::error::{error_list_json, CliError, Failure};
use crate::evaluate::{run_evaluate, run_report, EvaluateConfig};
use crate::generate::run_generate;
use crate::mask_demo::{run_mask_demo, MaskDemoConfig};

pub const EXIT_OK: i32 = 0;
/// Some video or input failed.
pub const EXIT_FAILURE: i32 = 1;
/// Bad flags or configuration; nothing was run.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "occbench", version, about = "Occlusion robustness benchmark toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add a directory of RGBA PNG cutouts to an occluder library
    ImportOccluders(ImportArgs),
    /// Render occluded copies of every video in a manifest
    Generate(GenerateArgs),
    /// Score predictions against a manifest (v-mAP, f-mAP, kappa)
    Evaluate(EvaluateArgs),
    /// Build the robustness table from a clean report and occluded reports
    Report(ReportArgs),
    /// Apply Bernoulli token masking to a token sequence
    MaskDemo(MaskDemoArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Directory of source PNG cutouts
    #[arg(long, alias = "dir")]
    pub occluders: PathBuf,
    /// Library directory to add the sprites to
    #[arg(long)]
    pub out: PathBuf,
    /// indoor or outdoor
    #[arg(long)]
    pub category: Category,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML or JSON file with defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Occluder library directory
    #[arg(long)]
    pub occluders: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub fg: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub bg: Option<u8>,
    /// static, linear, circle, sinusoid, zoom-in, zoom-out or random
    #[arg(long)]
    pub motion: Option<String>,
    /// train or test; defaults to the split the motion belongs to
    #[arg(long)]
    pub split: Option<String>,
    /// indoor, outdoor or all
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Stop at the first failing video
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ground-truth manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Prediction document (manifest layout with tube scores)
    #[arg(long)]
    pub predictions: PathBuf,
    /// Native per-frame detections for f-mAP (JSON array)
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Comma-separated IoU thresholds
    #[arg(long, value_delimiter = ',')]
    pub iou: Option<Vec<f64>>,
    /// Label the report with the severity cell it was run under
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), requires = "bg")]
    pub fg: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3), requires = "fg")]
    pub bg: Option<u8>,
    /// Label the report with the motion it was run under
    #[arg(long, conflicts_with = "fg")]
    pub motion: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report of the unoccluded run
    #[arg(long)]
    pub clean: PathBuf,
    /// Reports of occluded runs
    pub occluded: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskDemoArgs {
    /// Token sequence, one comma/space separated row per line
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Token count
    #[arg(long)]
    pub l: Option<usize>,
    /// Embedding dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Masking probability
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_file_config(path: Option<&PathBuf>) -> Result<FileConfig, CliError> {
    path.map_or(Ok(FileConfig::default()), |p| FileConfig::load(p))
}

impl GenerateArgs {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let flags = FileConfig {
            manifest: self.manifest.clone(),
            occluders: self.occluders.clone(),
            out: self.out.clone(),
            fg: self.fg,
            bg: self.bg,
            motion: self.motion.clone(),
            split: self.split.clone(),
            seed: self.seed,
            workers: self.workers,
            strict: self.strict.then_some(true),
            category: self.category.clone(),
            ..FileConfig::default()
        };
        RunConfig::resolve(flags.or(load_file_config(self.config.as_ref())?))
    }
}

impl EvaluateArgs {
    pub fn evaluate_config(&self) -> Result<EvaluateConfig, CliError> {
        let file = load_file_config(self.config.as_ref())?;
        let manifest = self
            .manifest
            .clone()
            .or(file.manifest)
            .ok_or_else(|| CliError::Config("--manifest is required".into()))?;
        let thresholds = self
            .iou
            .clone()
            .or(file.iou)
            .unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
        if let Some(bad) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(CliError::Config(format!("IoU threshold {bad} is not in (0, 1]")));
        }
        let condition = match (self.fg, self.bg, &self.motion) {
            (Some(fg_level), Some(bg_level), _) => Condition::Severity { fg_level, bg_level },
            (_, _, Some(m)) => {
                let kind: occbench::MotionKind = m.parse().map_err(CliError::Config)?;
                Condition::Motion {
                    motion: kind.to_string(),
                }
            }
            _ => Condition::Clean,
        };
        Ok(EvaluateConfig {
            manifest,
            predictions: self.predictions.clone(),
            detections: self.detections.clone(),
            thresholds,
            condition,
            out: self.out.clone().or(file.out),
        })
    }
}

fn print_json(out: &mut impl Write, value: &impl serde::Serialize) {
    let _ = writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn report_error(err: &CliError) -> i32 {
    eprintln!("{}", error_list_json(&[Failure::new(None, err)]));
    match err {
        CliError::Config(_) | CliError::Plan(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Execute a parsed command and return the process exit code. Results go to
/// stdout; errors go to stderr as a JSON error list.
pub fn execute(cli: Cli) -> i32 {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::ImportOccluders(args) => {
            match import_directory(&args.occluders, args.category, &args.out) {
                Ok(summary) => {
                    let skipped: Vec<Failure> = summary
                        .skipped
                        .iter()
                        .map(|(path, e)| Failure {
                            video_id: None,
                            kind: e.kind().to_string(),
                            message: format!("{}: {e}", path.display()),
                        })
                        .collect();
                    print_json(
                        &mut stdout,
                        &serde_json::json!({ "imported": summary.imported, "skipped": skipped }),
                    );
                    if skipped.is_empty() {
                        EXIT_OK
                    } else {
                        eprintln!("{}", error_list_json(&skipped));
                        EXIT_FAILURE
                    }
                }
                Err(e) => report_error(&e.into()),
            }
        }
        Command::Generate(args) => {
            let cfg = match args.run_config() {
                Ok(cfg) => cfg,
                Err(e) => return report_error(&e),
            };
            match run_generate(&cfg) {
                Ok(summary) => {
                    print_json(&mut stdout, &summary);
                    if summary.success() {
                        EXIT_OK
                    } else {
                        eprintln!("{}", error_list_json(&summary.failures));
                        EXIT_FAILURE
                    }
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Evaluate(args) => {
            let result = args.evaluate_config().and_then(|cfg| run_evaluate(&cfg));
            match result {
                Ok(report) => {
                    let _ = write!(stdout, "{}", report.to_csv());
                    EXIT_OK
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Report(args) => match run_report(&args.clean, &args.occluded, args.out.as_deref()) {
            Ok(table) => {
                let _ = write!(stdout, "{}", table.to_csv());
                EXIT_OK
            }
            Err(e) => report_error(&e),
        },
        Command::MaskDemo(args) => {
            let cfg = MaskDemoConfig {
                input: args.input,
                tokens: args.l,
                dim: args.d,
                p: args.p,
                seed: args.seed,
                out: args.out.clone(),
            };
            match run_mask_demo(&cfg) {
                Ok(output) => {
                    if args.out.is_none() {
                        let _ = write!(stdout, "# mask\n{}# masked\n{}", output.mask_text(), output.masked.to_text());
                    } else {
                        let _ = writeln!(
                            stdout,
                            "masked {} of {} tokens",
                            output.mask.masked_count(),
                            output.mask.len()
                        );
                    }
                    EXIT_OK
                }
                Err(e) => report_error(&e),
            }
        }
    }
}

/// Parse arguments and execute. Argument errors print clap's message and
/// return its exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}
