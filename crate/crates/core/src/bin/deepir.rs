use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use deepir::backbone::load_weights;
use deepir::baselines::Method;
use deepir::compare::{compare, write_comparison};
use deepir::inversion::InversionConfig;
use deepir::metrics::score;
use deepir::pipeline::{retarget, FeatureOperator, RetargetConfig};
use deepir::{Axis, Image};

/// Content-aware image retargeting in deep feature space.
#[derive(Parser, Debug)]
#[command(name = "deepir", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Retarget one image with the feature-space pipeline.
    Retarget(RetargetArgs),
    /// Run a pixel-space baseline.
    Baseline(BaselineArgs),
    /// Score a retargeted image against its original as JSON.
    Metrics(MetricsArgs),
    /// Run every operator and write a contact sheet plus scores.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AxisArg {
    Cols,
    Rows,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Cols => Axis::Columns,
            AxisArg::Rows => Axis::Rows,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OperatorArg {
    Urs,
    Scl,
    Cr,
    Sc,
    Colrm,
}

impl From<OperatorArg> for FeatureOperator {
    fn from(o: OperatorArg) -> Self {
        match o {
            OperatorArg::Urs => FeatureOperator::Urs,
            OperatorArg::Scl => FeatureOperator::Scl,
            OperatorArg::Cr => FeatureOperator::Crop,
            OperatorArg::Sc => FeatureOperator::SeamCarving,
            OperatorArg::Colrm => FeatureOperator::ColumnRemoval,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Scl,
    Cr,
    Sc,
    Colrm,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Scl => Method::Scl,
            MethodArg::Cr => Method::Crop,
            MethodArg::Sc => Method::SeamCarving,
            MethodArg::Colrm => Method::ColumnRemoval,
        }
    }
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("epsilon must be in (0,1]".into())
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("alpha must be in [0,1]".into())
    }
}

#[derive(Args, Debug)]
struct Common {
    /// Input image (PNG or JPEG).
    #[arg(long)]
    input: PathBuf,

    /// Target size as a fraction of the original, in (0,1].
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: f64,

    #[arg(long, value_enum, default_value = "cols")]
    axis: AxisArg,
}

#[derive(Args, Debug)]
struct RetargetArgs {
    #[command(flatten)]
    common: Common,

    /// DIRW weights file.
    #[arg(long)]
    weights: PathBuf,

    /// Fusion weights for levels 1, 2, 3.
    #[arg(long, value_delimiter = ',', num_args = 1, value_parser = parse_alpha, default_value = "0.7,0.8,0.9")]
    alpha: Vec<f64>,

    #[arg(long, value_enum, default_value = "urs")]
    operator: OperatorArg,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Write intermediate features, fields and previews here.
    #[arg(long)]
    dump_intermediate: Option<PathBuf>,

    /// Iteration cap for each feature inversion.
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,

    /// Clamp inverted features to be non-negative.
    #[arg(long)]
    project_nonneg: bool,

    /// Output PNG.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,

    #[arg(long, value_enum)]
    method: MethodArg,

    /// Fixed crop window offset (0-based) instead of the automatic one.
    #[arg(long)]
    crop_offset: Option<usize>,

    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    original: PathBuf,

    #[arg(long)]
    retargeted: PathBuf,

    #[arg(long)]
    weights: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,

    #[arg(long)]
    weights: PathBuf,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    out_dir: PathBuf,
}

fn image(path: &Path) -> Result<Image, String> {
    Image::load(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn weights(path: &Path) -> Result<deepir::backbone::WeightsBundle, String> {
    load_weights(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cmd: Command) -> Result<(), String> {
    let fail = |e: deepir::Error| e.to_string();
    match cmd {
        Command::Retarget(a) => {
            let img = image(&a.common.input)?;
            let w = weights(&a.weights)?;
            let cfg = RetargetConfig {
                epsilon: a.common.epsilon,
                axis: a.common.axis.into(),
                alphas: [a.alpha[0], a.alpha[1], a.alpha[2]],
                seed: a.seed,
                operator: a.operator.into(),
                dump_dir: a.dump_intermediate,
                inversion: InversionConfig {
                    max_iterations: a.max_iterations,
                    project_nonneg: a.project_nonneg,
                    ..Default::default()
                },
                ..Default::default()
            };
            let res = retarget(&img, &w, &cfg).map_err(fail)?;
            res.image.save_png(&a.output).map_err(fail)?;
            let summary = json!({
                "width": res.image.width(),
                "height": res.image.height(),
                "frr": res.metrics.map(|m| m.frr),
                "fd": res.metrics.map(|m| m.fd),
                "millis": res.total_millis(),
            });
            println!("{summary}");
        }
        Command::Baseline(a) => {
            let img = image(&a.common.input)?;
            let method: Method = a.method.into();
            let out = method.apply(&img, a.common.epsilon, a.common.axis.into(), a.crop_offset).map_err(fail)?;
            out.save_png(&a.output).map_err(fail)?;
        }
        Command::Metrics(a) => {
            let w = weights(&a.weights)?;
            let s = score(&image(&a.original)?, &image(&a.retargeted)?, &w).map_err(fail)?;
            println!("{}", json!({ "frr": s.frr, "fd": s.fd }));
        }
        Command::Compare(a) => {
            let img = image(&a.common.input)?;
            let w = weights(&a.weights)?;
            let cfg = RetargetConfig {
                epsilon: a.common.epsilon,
                axis: a.common.axis.into(),
                seed: a.seed,
                ..Default::default()
            };
            write_comparison(&compare(&img, &w, &cfg).map_err(fail)?, &a.out_dir).map_err(fail)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Command::Retarget(a) = &cli.command {
        if a.alpha.len() != 3 {
            eprintln!("error: --alpha takes 3 comma-separated values, got {}", a.alpha.len());
            return ExitCode::from(1);
        }
    }
    if let Some(n) = std::env::var("DEEPIR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
