//! `xdice` command-line interface.
//!
//! Exit status: 0 on success, 1 on input errors, 2 when some manifest rows
//! failed while the rest were processed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use xdice::io::DatasetManifest;
use xdice::pipeline::{
    default_sources, pairwise_to_csv, run_curves, run_eval, run_grad_check, run_loss, run_pairwise,
    run_regions, run_roc, write_curves, write_gradient, MaskSource, Options,
};
use xdice::{HausdorffMode, IntensityStat};

#[derive(Parser, Debug)]
#[command(
    name = "xdice",
    version,
    about = "Evaluate segmentations against multiple acceptable annotations"
)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Dataset manifest (.csv or .json)
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (0 = all cores, 1 = serial)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[arg(long, global = true, default_value = "region")]
    hausdorff_mode: HausdorffMode,

    /// Soft predictions are foreground strictly above this probability
    #[arg(long, global = true, default_value_t = 0.5)]
    binarize_threshold: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score predictions against each annotator, the majority vote and the acceptable region
    Eval,
    /// Average pairwise Dice between annotators
    Pairwise,
    /// Write inner, outer and majority-vote masks
    Regions {
        /// Raster format of written masks: pgm or png
        #[arg(long, default_value = "pgm", value_parser = ["pgm", "png"])]
        format: String,
    },
    /// Frame-intensity curves per subject
    Curves {
        /// prediction, consensus, or an annotator id (repeatable; default: all)
        #[arg(long = "source")]
        sources: Vec<MaskSource>,
        #[arg(long, default_value = "mean")]
        intensity_stat: IntensityStat,
    },
    /// ROC curve and AUC of metric scores against grades
    Roc {
        /// Report column to score with (repeatable)
        #[arg(long = "metric", default_values_t = ["dice_majority".to_string(), "extended_dice".to_string()])]
        metrics: Vec<String>,
    },
    /// Extended-Dice loss and gradient of a soft prediction grid
    Loss(LossArgs),
    /// Compare the analytic loss gradient with central finite differences
    GradCheck {
        #[command(flatten)]
        files: LossArgs,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        /// Exit with status 2 when the error exceeds this bound
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct LossArgs {
    /// Prediction grid: "width height" header then row-major probabilities
    #[arg(long)]
    prediction: PathBuf,
    /// Inner-region mask raster
    #[arg(long)]
    inner: PathBuf,
    /// Outer-region mask raster
    #[arg(long)]
    outer: PathBuf,
}

enum Outcome {
    Done,
    Partial,
}

impl Global {
    fn options(&self) -> Result<Options> {
        if !(0.0..=1.0).contains(&self.binarize_threshold) {
            bail!(
                "--binarize-threshold must lie in [0, 1], got {}",
                self.binarize_threshold
            );
        }
        Ok(Options {
            jobs: self.jobs,
            hausdorff_mode: self.hausdorff_mode,
            binarize_threshold: self.binarize_threshold,
        })
    }

    fn manifest(&self) -> Result<DatasetManifest> {
        let path = self.manifest.as_deref().context("--manifest is required")?;
        Ok(DatasetManifest::load(path)?)
    }

    fn out(&self) -> Result<&Path> {
        let out = self.out.as_deref().context("--out is required")?;
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    let options = g.options()?;
    match cli.command {
        Command::Eval => {
            let manifest = g.manifest()?;
            let out = g.out()?;
            let report = run_eval(&manifest, &options)?;
            report.write(out)?;
            for (name, stat) in &report.aggregates {
                match stat {
                    Some(s) => println!("{name:<28} {s}  n={}", s.count),
                    None => println!("{name:<28} -"),
                }
            }
            for (name, auc) in &report.auc {
                println!("auc {name:<24} {auc:.4}");
            }
            let failed = report.failed_rows().count();
            if failed > 0 {
                for r in report.failed_rows() {
                    eprintln!("{}: {}", r.image_id, r.error.as_deref().unwrap_or_default());
                }
                return Ok(Outcome::Partial);
            }
        }
        Command::Pairwise => {
            let manifest = g.manifest()?;
            let out = g.out()?;
            let matrix = run_pairwise(&manifest, &options)?;
            let csv = pairwise_to_csv(&matrix);
            print!("{csv}");
            write(out.join("pairwise.csv"), &csv)?;
            write(
                out.join("pairwise.json"),
                json_text(&serde_json::to_value(&matrix)?),
            )?;
        }
        Command::Regions { format } => {
            let manifest = g.manifest()?;
            let out = g.out.as_deref().context("--out is required")?;
            let results = run_regions(&manifest, out, &format, &options)?;
            let mut failed = false;
            for (entry, r) in manifest.entries.iter().zip(results) {
                if let Err(e) = r {
                    eprintln!("{}: {e}", entry.image_id);
                    failed = true;
                }
            }
            if failed {
                return Ok(Outcome::Partial);
            }
        }
        Command::Curves {
            sources,
            intensity_stat,
        } => {
            let manifest = g.manifest()?;
            let out = g.out()?;
            let sources = if sources.is_empty() {
                default_sources(&manifest)
            } else {
                sources
            };
            let subjects = run_curves(&manifest, &sources, intensity_stat, &options)?;
            write_curves(out, &subjects)?;
            for s in &subjects {
                for c in &s.sources {
                    match c.error {
                        Some(e) => println!("{} {:<16} {e:.4}", s.subject_id, c.source),
                        None => println!("{} {:<16} -", s.subject_id, c.source),
                    }
                }
            }
        }
        Command::Roc { metrics } => {
            let manifest = g.manifest()?;
            let out = g.out()?;
            let curves = run_roc(&manifest, &metrics, &options)?;
            let mut doc = serde_json::Map::new();
            for (name, curve) in &curves {
                println!("{name:<24} auc {:.4}", curve.auc);
                write(out.join(format!("roc_{name}.txt")), curve.to_text())?;
                doc.insert(name.clone(), serde_json::to_value(curve)?);
            }
            write(out.join("roc.json"), json_text(&doc.into()))?;
        }
        Command::Loss(files) => {
            let out = g.out()?;
            let result = run_loss(&files.prediction, &files.inner, &files.outer)?;
            write_gradient(&out.join("gradient.grid"), &result)?;
            write(
                out.join("loss.json"),
                json_text(&json!({
                    "value": result.value,
                    "width": result.width,
                    "height": result.height,
                })),
            )?;
            println!("{:?}", result.value);
        }
        Command::GradCheck {
            files,
            step,
            tolerance,
        } => {
            let err = run_grad_check(&files.prediction, &files.inner, &files.outer, step)?;
            println!("{err:e}");
            if tolerance.is_some_and(|t| err > t) {
                eprintln!("gradient error {err:e} exceeds tolerance");
                return Ok(Outcome::Partial);
            }
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
