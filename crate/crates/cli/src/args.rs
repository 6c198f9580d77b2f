use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ssc_fusion::metrics::Region;
use ssc_fusion::voxel::VoxelBounds;
use ssc_fusion::FuseConfig;

/// Temporal point-feature fusion, voxelization and SSC evaluation.
#[derive(Debug, Parser, Serialize)]
#[command(name = "sscfuse", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Print the command summary as JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Lift, align and concatenate the latest frames of a sequence.
    Fuse(FuseCmd),
    /// Aggregate a fused cloud into a voxel feature grid.
    Voxelize(VoxelizeCmd),
    /// Score a predicted label grid against ground truth.
    Eval(EvalCmd),
    /// Generate a synthetic sequence directory.
    Synth(SynthCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct SequenceArgs {
    /// Sequence directory with calib.txt, poses.txt, depth/ and features/.
    #[arg(long)]
    pub seq: PathBuf,
    /// Index of the current frame; defaults to the last pose.
    #[arg(long)]
    pub frame: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct FusionArgs {
    /// Number of fused frames, current included.
    #[arg(long = "frames", default_value_t = 4)]
    pub n_frames: usize,
    /// Upsampling factor of the current frame.
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Keep historical features unweighted.
    #[arg(long)]
    pub no_hcb: bool,
    /// Lift the current frame at its native resolution.
    #[arg(long)]
    pub no_ccfd: bool,
}

impl FusionArgs {
    pub fn config(&self) -> FuseConfig {
        FuseConfig {
            n_frames: self.n_frames,
            densify_factor: self.factor,
            enable_hcb: !self.no_hcb,
            enable_ccfd: !self.no_ccfd,
            channel_projection: None,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FuseCmd {
    #[command(flatten)]
    pub sequence: SequenceArgs,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Output directory for the cloud tensors and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write cloud.ply.
    #[arg(long)]
    pub ply: bool,
    /// Omit wall-clock timing from the manifest.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundsArgs {
    /// Grid extent "x0,x1,y0,y1,z0,z1" in meters, ego frame.
    #[arg(long, value_parser = parse_extent)]
    pub bounds: Option<[f64; 6]>,
    /// Grid resolution "X,Y,Z".
    #[arg(long, value_parser = parse_res)]
    pub res: Option<[usize; 3]>,
}

impl BoundsArgs {
    /// Overrides the extent and resolution of `default`.
    pub fn resolve(&self, default: VoxelBounds) -> ssc_fusion::Result<VoxelBounds> {
        let (min, max) = match self.bounds {
            Some(e) => ([e[0], e[2], e[4]], [e[1], e[3], e[5]]),
            None => (default.min, default.max),
        };
        VoxelBounds::new(min, max, self.res.unwrap_or(default.resolution))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct VoxelizeCmd {
    /// Directory written by `fuse`.
    #[arg(long, conflicts_with = "seq")]
    pub cloud: Option<PathBuf>,
    /// Fuse this sequence inline instead of reading a cloud.
    #[arg(long, required_unless_present = "cloud")]
    pub seq: Option<PathBuf>,
    /// Index of the current frame for --seq; defaults to the last pose.
    #[arg(long)]
    pub frame: Option<usize>,
    #[command(flatten)]
    pub fusion: FusionArgs,
    #[command(flatten)]
    pub grid: BoundsArgs,
    /// Output directory for the grid, masks and statistics.
    #[arg(long)]
    pub out: PathBuf,
    /// Fixed-order accumulation, identical for any thread count; also omits
    /// timing from the manifest.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionArg {
    All,
    Inview,
    Oov,
}

impl From<RegionArg> for Region {
    fn from(r: RegionArg) -> Self {
        match r {
            RegionArg::All => Region::All,
            RegionArg::Inview => Region::InView,
            RegionArg::Oov => Region::Oov,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EvalCmd {
    /// Predicted labels: a .label file or a voxel grid .tensor (argmaxed).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth .label file; defaults to labels/<frame>.label of --seq.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Ground-truth .invalid file; defaults to the .label path with an
    /// .invalid extension when that file exists.
    #[arg(long)]
    pub gt_invalid: Option<PathBuf>,
    /// Sequence providing calib.txt, the image size and labels.
    #[arg(long)]
    pub seq: Option<PathBuf>,
    /// Frame whose labels and depth size --seq provides; defaults to the last pose.
    #[arg(long)]
    pub frame: Option<usize>,
    /// calib.txt for the view-region masks.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Image size "W,H" for --calib.
    #[arg(long, value_parser = parse_size)]
    pub image: Option<[usize; 2]>,
    #[command(flatten)]
    pub grid: BoundsArgs,
    #[arg(long, value_enum, default_value_t = RegionArg::All)]
    pub region: RegionArg,
    /// Number of label ids including empty (0); defaults to the largest id
    /// present plus one.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Also write metrics.json and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    OovCar,
    Corridor,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthCmd {
    /// Scene template; conflicts with --spec.
    #[arg(long, value_enum, required_unless_present = "spec", conflicts_with = "spec")]
    pub template: Option<Template>,
    /// SceneSpec JSON document.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output sequence directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the depth noise generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Total frame count of a template scene.
    #[arg(long = "frames")]
    pub frame_count: Option<usize>,
    /// Forward motion per frame in meters for a template scene.
    #[arg(long)]
    pub speed: Option<f64>,
    /// Standard deviation of Gaussian depth noise in meters.
    #[arg(long)]
    pub noise: Option<f64>,
}

fn parse_list<T: std::str::FromStr, const N: usize>(s: &str) -> Result<[T; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated values, got {}", parts.len()));
    }
    let mut out = Vec::with_capacity(N);
    for p in parts {
        out.push(p.parse::<T>().map_err(|_| format!("'{p}' is not a valid number"))?);
    }
    out.try_into().map_err(|_| unreachable!())
}

fn parse_extent(s: &str) -> Result<[f64; 6], String> {
    parse_list(s)
}

fn parse_res(s: &str) -> Result<[usize; 3], String> {
    parse_list(s)
}

fn parse_size(s: &str) -> Result<[usize; 2], String> {
    parse_list(s)
}
