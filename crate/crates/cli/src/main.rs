//! `crosssdf`: slice meshes into cross-sections, train a neural SDF on
//! them, extract and evaluate the reconstructed surface.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "crosssdf", version, about = "Surface reconstruction from planar cross-sections")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "CROSSSDF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut a closed OBJ mesh into planar cross-sections.
    Slice(SliceArgs),
    /// Train a field on cross-sections.
    Train(TrainArgs),
    /// Extract the zero level set of a trained field as an OBJ mesh.
    Extract(ExtractArgs),
    /// Compare a reconstruction against a reference mesh.
    Eval(EvalArgs),
    /// Hold out roughly a tenth of the slices for evaluation.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
pub struct SliceArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Plane layout as `aligned:N[:AXIS]` or `nonaligned:N[:AXIS]`.
    #[arg(long, conflicts_with_all = ["aligned", "nonaligned"])]
    pub planes: Option<String>,
    /// N parallel planes perpendicular to --axis.
    #[arg(long, conflicts_with = "nonaligned")]
    pub aligned: Option<usize>,
    /// Half parallel planes, half rotated about --axis.
    #[arg(long)]
    pub nonaligned: Option<usize>,
    #[arg(long, default_value = "z")]
    pub axis: String,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Cross-sections JSON in input coordinates.
    #[arg(long)]
    pub sections: PathBuf,
    /// `key = value` settings applied on top of the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the laptop-scale preset instead of the full defaults.
    #[arg(long)]
    pub desk: bool,
    #[arg(long)]
    pub out_checkpoint: PathBuf,
    /// Per-epoch CSV log; defaults to the checkpoint path with a `.csv`
    /// extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Single worker with ordered reductions.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_mesh: PathBuf,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 256)]
    pub res: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Trained checkpoint, needed for held-out IoU.
    #[arg(long, requires = "heldout")]
    pub field: Option<PathBuf>,
    /// Held-out cross-sections JSON in input coordinates.
    #[arg(long, requires = "field")]
    pub heldout: Option<PathBuf>,
    /// Report path; `.csv` writes a CSV row, anything else JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crosssdf::metrics::DEFAULT_SURFACE_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compute volume IoU on a grid of this resolution.
    #[arg(long)]
    pub volume_res: Option<usize>,
    /// Pixel resolution of the held-out IoU window.
    #[arg(long, default_value_t = 512)]
    pub iou_res: usize,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub sections: PathBuf,
    #[arg(long)]
    pub train_out: PathBuf,
    #[arg(long)]
    pub heldout_out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let deterministic = matches!(&cli.command, Command::Train(t) if t.deterministic);
    let threads = if deterministic { Some(1) } else { cli.threads };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Slice(a) => commands::slice(a),
        Command::Train(a) => commands::train(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Split(a) => commands::split(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
