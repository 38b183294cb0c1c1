//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "shellforge",
    version,
    about = "Turn a sculpted scan into printable shell parts that hold a circuit board",
    propagate_version = true
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Global {
    /// Voxel pitch in mm for field-based stages [default: 0.2]
    #[arg(long, global = true, value_parser = positive)]
    pub pitch: Option<f64>,
    /// Directory that receives every output file
    #[arg(short, long = "out", global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Progress on standard error; repeat for more detail
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
    /// No summary on standard output
    #[arg(short, long, global = true)]
    #[serde(skip)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the printable stand-in for a circuit board
    Blank(BlankArgs),
    /// Generate the mounting tray for a circuit board
    Bracket(BracketArgs),
    /// Check that a mesh is a closed, consistently oriented solid
    Validate(ValidateArgs),
    /// Hollow a solid to a uniform wall thickness
    Shell(ShellArgs),
    /// Cut a solid into two closed pieces along a plane
    Split(SplitArgs),
    /// Fuse the board bracket into a piece at the pose given by three fiducial points
    Place(PlaceArgs),
    /// Add friction-fit bosses and cavities to two mating pieces
    Fasten(FastenArgs),
    /// Run repair, registration, shell, split, window, bracket and fasteners in one pass
    Pipeline(PipelineArgs),
    /// Gesture recognizer: synthesize, train, evaluate, classify, check window designs
    #[command(subcommand)]
    Gesture(GestureCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Blank(_) => "blank",
            Command::Bracket(_) => "bracket",
            Command::Validate(_) => "validate",
            Command::Shell(_) => "shell",
            Command::Split(_) => "split",
            Command::Place(_) => "place",
            Command::Fasten(_) => "fasten",
            Command::Pipeline(_) => "pipeline",
            Command::Gesture(g) => match g {
                GestureCommand::Synth(_) => "gesture-synth",
                GestureCommand::Train(_) => "gesture-train",
                GestureCommand::Eval(_) => "gesture-eval",
                GestureCommand::Classify(_) => "gesture-classify",
                GestureCommand::Check(_) => "gesture-check",
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BlankArgs {
    /// Blank or circuit spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BracketArgs {
    /// Blank or circuit spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Gap between board and tray on each side (mm)
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    pub clearance: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Mesh file (binary or ASCII STL, OBJ)
    #[arg(long)]
    pub mesh: PathBuf,
    /// Weld, drop degenerate faces and fix orientation first; writes the repaired mesh
    #[arg(long)]
    pub repair: bool,
    /// Weld distance for --repair (mm)
    #[arg(long, default_value_t = 1e-4, value_parser = positive)]
    pub weld: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ShellArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Wall thickness (mm)
    #[arg(long, default_value_t = 3.0, value_parser = positive)]
    pub thickness: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// A point on the cutting plane, `x,y,z` [default: volume centroid]
    #[arg(long, value_parser = vec3, allow_hyphen_values = true)]
    pub point: Option<[f64; 3]>,
    /// Plane normal, `x,y,z`; piece A lies on its positive side
    #[arg(long, value_parser = vec3, allow_hyphen_values = true, default_value = "0,0,1")]
    pub normal: [f64; 3],
}

#[derive(Debug, Args, Serialize)]
pub struct PlaceArgs {
    /// Shell that receives the bracket, usually before it is split
    #[arg(long)]
    pub piece: PathBuf,
    /// Blank or circuit spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Three fiducial points in scan coordinates, one `x y z` per line
    #[arg(long)]
    pub fiducials: PathBuf,
    /// Board-to-tray clearance (mm)
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    pub clearance: f64,
    /// Depth the support stem sinks into the wall (mm)
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub overlap: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FastenArgs {
    /// Piece on the positive side of the split plane (receives bosses)
    #[arg(long)]
    pub a: PathBuf,
    /// Piece on the negative side (receives cavities)
    #[arg(long)]
    pub b: PathBuf,
    /// Assembly plan (JSON), or a pipeline report that contains one
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Scanned sculpture
    #[arg(long)]
    pub scan: PathBuf,
    /// Blank spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Three fiducial points in scan coordinates, one `x y z` per line
    #[arg(long)]
    pub fiducials: PathBuf,
    /// Partial plan (JSON) whose fields replace the defaults
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Output file prefix [default: scan file stem]
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum GestureCommand {
    /// Write a labelled synthetic stroke corpus
    Synth(SynthArgs),
    /// Train a classifier on labelled strokes
    Train(TrainArgs),
    /// Held-out accuracy over repeated random splits
    Eval(EvalArgs),
    /// Label strokes with a trained model
    Classify(ClassifyArgs),
    /// Check a sensing-window design against the sensor's limits
    Check(CheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Samples per class
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    /// Positional noise before smoothing, relative to gesture size
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    pub sigma: f64,
    /// Synthetic users the samples are attributed to
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    pub users: u32,
    /// Device tag written on every stroke
    #[arg(long, default_value = "desk-sensor")]
    pub device: String,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainOptions {
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    pub epochs: u32,
    #[arg(long = "rate", default_value_t = 0.05, value_parser = positive)]
    pub learning_rate: f64,
    /// Hidden layer width override
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub hidden: Option<u32>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Labelled strokes (JSON lines)
    #[arg(long)]
    pub strokes: PathBuf,
    /// Device the model is for [default: the strokes' device tag]
    #[arg(long)]
    pub device: Option<String>,
    #[command(flatten)]
    pub train: TrainOptions,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// `synth` for the built-in synthetic corpus, or a labelled strokes file
    #[arg(long, default_value = "synth")]
    pub corpus: String,
    /// Synthetic samples per class
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub n: u32,
    /// Synthetic noise level
    #[arg(long, default_value_t = 0.15, value_parser = non_negative)]
    pub sigma: f64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub splits: u32,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub train_fraction: f64,
    #[command(flatten)]
    pub train: TrainOptions,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Trained model (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Strokes (JSON lines)
    #[arg(long)]
    pub strokes: PathBuf,
    /// Treat the file as one continuous capture and cut it at pauses
    #[arg(long)]
    pub stream: bool,
    /// Pause that ends a stroke with --stream (ms)
    #[arg(long, default_value_t = 250, value_parser = clap::value_parser!(u64).range(1..))]
    pub idle_ms: u64,
    /// Device the strokes come from [default: their own tags]
    #[arg(long)]
    pub device: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    /// Window hole diameter (mm)
    #[arg(long, value_parser = positive)]
    pub hole: f64,
    /// Clear cover thickness (mm); omit for an open hole
    #[arg(long, value_parser = positive)]
    pub cover: Option<f64>,
    /// Gap from the lens to the underside of the cover (mm)
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub standoff: f64,
    /// Sensor geometry (JSON) [default: built-in mouse sensor]
    #[arg(long)]
    pub sensor: Option<PathBuf>,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0, 1), got {v}"))
    }
}

fn vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got `{s}`"));
    }
    Ok([number(parts[0])?, number(parts[1])?, number(parts[2])?])
}
