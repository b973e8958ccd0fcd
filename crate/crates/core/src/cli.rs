//! Command line front end.
//!
//! Every subcommand resolves its settings in three layers: built-in
//! defaults, then an optional JSON config file (`--config`), then flags.
//! Settings are validated before any file is read or written.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal invariant violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fusion::FusionConfig;
use crate::geometry::{Frame, NormalFrame, NormalMap, Vec3};
use crate::io::{
    load_dataset, load_mesh, save_dataset, save_mesh, write_json, write_normal_png, DatasetManifest,
};
use crate::isooctree::{Aabb, OctreeConfig};
use crate::metrics::{evaluate_with, EvalConfig, MeshMetrics};
use crate::pipeline::{
    build_volume, filter_frames, mesh_volume, run_pipeline, FusedMesh, Mesher, PipelineConfig,
};
use crate::priors::{
    anr_filter_normals, dnc_filter_frame, evaluate_losses, render_normal_from_depth, AnrConfig,
    CovarianceCenter, DncConfig, FilterReport, LossInputs, LossReport, LossSchedule,
};
use crate::synth::{render_scene, NoiseConfig, SyntheticScene};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Self {
            status: ExitStatus::Usage,
            message: msg.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self {
            status: if e.is_data_error() {
                ExitStatus::Data
            } else {
                ExitStatus::Internal
            },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            status: ExitStatus::Data,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Everything a subcommand can be configured with. The JSON config file
/// has this shape; absent keys keep their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Seeds synthetic noise and evaluation sampling.
    pub seed: u64,
    pub scene: String,
    pub width: usize,
    pub height: usize,
    pub noise: NoiseConfig,
    /// Meters per unit of written depth PNGs.
    pub depth_scale: f64,
    /// Voxel size of the analytic ground-truth mesh.
    pub gt_voxel: f64,
    pub filters: bool,
    pub dnc: DncConfig,
    pub anr: AnrConfig,
    pub schedule: LossSchedule,
    pub fusion: FusionConfig,
    pub octree: OctreeConfig,
    pub mesher: Mesher,
    pub voxel_size: f64,
    pub eval: EvalConfig,
    /// Crop evaluation to the synthetic scene bounds when no explicit crop
    /// is set.
    pub crop_to_scene: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: 0,
            scene: "room".into(),
            width: 320,
            height: 240,
            noise: NoiseConfig::default(),
            depth_scale: 0.00025,
            gt_voxel: 0.01,
            filters: p.filters,
            dnc: p.dnc,
            anr: p.anr,
            schedule: LossSchedule::default(),
            fusion: p.fusion,
            octree: p.octree,
            mesher: p.mesher,
            voxel_size: p.voxel_size,
            eval: p.eval,
            crop_to_scene: true,
        }
    }
}

impl Settings {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            filters: self.filters,
            dnc: self.dnc,
            anr: self.anr,
            fusion: self.fusion,
            octree: self.octree,
            mesher: self.mesher,
            voxel_size: self.voxel_size,
            eval: EvalConfig {
                seed: self.seed,
                ..self.eval.clone()
            },
        }
    }

    pub fn validate(&self) -> CliResult {
        let check = || -> crate::Result<()> {
            self.noise.validate()?;
            self.schedule.validate()?;
            self.pipeline().validate()?;
            if self.width < 2 || self.height < 2 {
                return Err(Error::InvalidInput(format!(
                    "image size {}x{} too small",
                    self.width, self.height
                )));
            }
            if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "depth_scale must be positive, got {}",
                    self.depth_scale
                )));
            }
            if !(self.gt_voxel > 0.0 && self.gt_voxel.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "gt_voxel must be positive, got {}",
                    self.gt_voxel
                )));
            }
            Ok(())
        };
        check().map_err(CliError::usage)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "priorfuse",
    version,
    about = "Prior filtering, depth-adaptive fusion and octree meshing"
)]
pub struct Cli {
    /// JSON settings file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for synthetic noise and evaluation sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Render a synthetic dataset and its ground-truth mesh.
    Synth(SynthCmd),
    /// Depth-normal consistency filter on every frame of a dataset.
    FilterDepth(FilterDepthCmd),
    /// Adaptive normal filter against rendered normals.
    FilterNormal(FilterNormalCmd),
    /// Regularisation losses at a training step.
    Loss(LossCmd),
    /// Fuse a dataset into a mesh.
    FuseMesh(FuseMeshCmd),
    /// Compare two PLY meshes.
    Eval(EvalCmd),
    /// Synthesize or load, filter, fuse, mesh and evaluate.
    Pipeline(PipelineCmd),
}

fn parse_center(s: &str) -> Result<CovarianceCenter, String> {
    match s {
        "query" => Ok(CovarianceCenter::Query),
        "centroid" => Ok(CovarianceCenter::Centroid),
        _ => Err(format!("expected query or centroid, got {s:?}")),
    }
}

fn parse_box(s: &str) -> Result<Aabb, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if v.len() != 6 {
        return Err("expected minx,miny,minz,maxx,maxy,maxz".into());
    }
    Aabb::new(Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Args)]
pub struct SceneArgs {
    /// Built-in scene: plane-sphere, room or floor-object.
    #[arg(long)]
    pub scene: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Start from the moderate noise preset; the noise flags below refine it.
    #[arg(long)]
    pub moderate_noise: bool,
    /// Gaussian depth noise, meters.
    #[arg(long)]
    pub depth_sigma: Option<f64>,
    /// Fraction of depth pixels replaced by uniform outliers.
    #[arg(long)]
    pub outlier_fraction: Option<f64>,
    /// Corrupt pixels at depth discontinuities.
    #[arg(long)]
    pub edge_noise: bool,
    /// Prior-normal jitter, degrees.
    #[arg(long)]
    pub normal_sigma_deg: Option<f64>,
    /// Fraction of prior normals tilted by 30 to 80 degrees.
    #[arg(long)]
    pub normal_outlier_fraction: Option<f64>,
    /// Voxel size of the ground-truth mesh.
    #[arg(long)]
    pub gt_voxel: Option<f64>,
}

impl SceneArgs {
    fn apply(&self, s: &mut Settings) {
        set(&mut s.scene, self.scene.clone());
        set(&mut s.width, self.width);
        set(&mut s.height, self.height);
        if self.moderate_noise {
            s.noise = NoiseConfig::moderate();
        }
        set(&mut s.noise.depth_sigma, self.depth_sigma);
        set(&mut s.noise.outlier_fraction, self.outlier_fraction);
        if self.edge_noise {
            s.noise.edge_noise = true;
        }
        set(&mut s.noise.normal_sigma_deg, self.normal_sigma_deg);
        set(
            &mut s.noise.normal_outlier_fraction,
            self.normal_outlier_fraction,
        );
        set(&mut s.gt_voxel, self.gt_voxel);
    }
}

#[derive(Debug, Default, Args)]
pub struct DncArgs {
    /// Neighbours per PCA normal.
    #[arg(long)]
    pub k: Option<usize>,
    /// Depth filter angle threshold, degrees.
    #[arg(long)]
    pub tau_d: Option<f64>,
    /// Covariance center: query or centroid.
    #[arg(long, value_parser = parse_center)]
    pub center: Option<CovarianceCenter>,
}

impl DncArgs {
    fn apply(&self, s: &mut Settings) {
        set(&mut s.dnc.k, self.k);
        set(&mut s.dnc.tau_d, self.tau_d);
        set(&mut s.dnc.center, self.center);
    }
}

#[derive(Debug, Default, Args)]
pub struct AnrArgs {
    /// Normal filter angle threshold, degrees.
    #[arg(long)]
    pub tau_n: Option<f64>,
}

impl AnrArgs {
    fn apply(&self, s: &mut Settings) {
        set(&mut s.anr.tau_n, self.tau_n);
    }
}

#[derive(Debug, Default, Args)]
pub struct MeshArgs {
    /// Truncation as a fraction of observed depth.
    #[arg(long)]
    pub tau_rel: Option<f64>,
    /// Depth-edge threshold as a fraction of depth.
    #[arg(long)]
    pub edge_rel: Option<f64>,
    /// Second-pass normal cutoff, degrees.
    #[arg(long)]
    pub normal_cutoff_deg: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<u32>,
    /// Hint points needed to split a cell.
    #[arg(long)]
    pub expand_threshold: Option<usize>,
    /// Uniform marching cubes over the octree root box instead of the
    /// octree extractor.
    #[arg(long)]
    pub uniform: bool,
    /// Voxel size of the uniform extractor, meters.
    #[arg(long)]
    pub voxel_size: Option<f64>,
}

impl MeshArgs {
    fn apply(&self, s: &mut Settings) {
        set(&mut s.fusion.tau_rel, self.tau_rel);
        set(&mut s.fusion.edge_rel, self.edge_rel);
        set(&mut s.fusion.normal_cutoff_deg, self.normal_cutoff_deg);
        set(&mut s.octree.max_depth, self.max_depth);
        set(&mut s.octree.expand_threshold, self.expand_threshold);
        if self.uniform {
            s.mesher = Mesher::Uniform;
        }
        set(&mut s.voxel_size, self.voxel_size);
    }
}

#[derive(Debug, Default, Args)]
pub struct EvalArgs {
    /// Surface samples per mesh.
    #[arg(long)]
    pub samples: Option<usize>,
    /// F-score distance threshold, meters.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Crop box minx,miny,minz,maxx,maxy,maxz applied to both meshes.
    #[arg(long, value_parser = parse_box, allow_hyphen_values = true)]
    pub crop: Option<Aabb>,
}

impl EvalArgs {
    fn apply(&self, s: &mut Settings) {
        set(&mut s.eval.samples, self.samples);
        set(&mut s.eval.threshold, self.threshold);
        if self.crop.is_some() {
            s.eval.crop = self.crop;
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Args)]
pub struct FilterDepthCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub dnc: DncArgs,
}

#[derive(Debug, Args)]
pub struct FilterNormalCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dataset whose normal maps are the rendered normals; normals derived
    /// from the depth maps are used when absent.
    #[arg(long)]
    pub rendered: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub anr: AnrArgs,
}

#[derive(Debug, Args)]
pub struct LossCmd {
    /// Sensor dataset: raw depth and prior normals.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dataset holding rendered depth and normals; the sensor depth and its
    /// derived normals are used when absent.
    #[arg(long)]
    pub rendered: Option<PathBuf>,
    #[arg(long)]
    pub step: u64,
    /// Writes the JSON report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub t_d: Option<u64>,
    #[arg(long)]
    pub t_n: Option<u64>,
    #[arg(long)]
    pub normal_start: Option<u64>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    #[arg(long)]
    pub lambda_n: Option<f64>,
    #[command(flatten)]
    pub dnc: DncArgs,
    #[command(flatten)]
    pub anr: AnrArgs,
}

#[derive(Debug, Args)]
pub struct FuseMeshCmd {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output PLY.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub mesh: MeshArgs,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Writes the JSON record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    /// Dataset to reconstruct instead of a synthetic scene.
    #[arg(long, conflicts_with = "scene")]
    pub manifest: Option<PathBuf>,
    /// Ground-truth mesh for a loaded dataset.
    #[arg(long, requires = "manifest")]
    pub gt: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Skip the depth and normal filters.
    #[arg(long, conflicts_with = "filters")]
    pub no_filters: bool,
    /// Apply the depth and normal filters.
    #[arg(long)]
    pub filters: bool,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub dnc: DncArgs,
    #[command(flatten)]
    pub anr: AnrArgs,
    #[command(flatten)]
    pub mesh: MeshArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Defaults, then the config file, then the flags of `cli`.
pub fn resolve_settings(cli: &Cli) -> CliResult<Settings> {
    let mut s = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    set(&mut s.seed, cli.seed);
    match &cli.command {
        Command::Synth(c) => c.scene.apply(&mut s),
        Command::FilterDepth(c) => c.dnc.apply(&mut s),
        Command::FilterNormal(c) => c.anr.apply(&mut s),
        Command::Loss(c) => {
            set(&mut s.schedule.t_d, c.t_d);
            set(&mut s.schedule.t_n, c.t_n);
            set(&mut s.schedule.normal_start, c.normal_start);
            set(&mut s.schedule.total_steps, c.total_steps);
            set(&mut s.schedule.lambda_d, c.lambda_d);
            set(&mut s.schedule.lambda_n, c.lambda_n);
            c.dnc.apply(&mut s);
            c.anr.apply(&mut s);
        }
        Command::FuseMesh(c) => c.mesh.apply(&mut s),
        Command::Eval(c) => c.eval.apply(&mut s),
        Command::Pipeline(c) => {
            if c.no_filters {
                s.filters = false;
            }
            if c.filters {
                s.filters = true;
            }
            c.scene.apply(&mut s);
            c.dnc.apply(&mut s);
            c.anr.apply(&mut s);
            c.mesh.apply(&mut s);
            c.eval.apply(&mut s);
        }
    }
    s.validate()?;
    Ok(s)
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Success
            };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return status;
        }
    };
    match execute(&cli, out) {
        Ok(()) => ExitStatus::Success,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.status
        }
    }
}

/// Resolves settings and runs the command, on a dedicated pool when
/// `--threads` is given. Output is buffered until the command finishes.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    let settings = resolve_settings(cli)?;
    let mut buf = Vec::new();
    let r = match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError {
                    status: ExitStatus::Internal,
                    message: e.to_string(),
                })?;
            pool.install(|| dispatch(&cli.command, &settings, &mut buf))
        }
        None => dispatch(&cli.command, &settings, &mut buf),
    };
    out.write_all(&buf)?;
    r
}

fn dispatch(cmd: &Command, s: &Settings, out: &mut (dyn Write + Send)) -> CliResult {
    match cmd {
        Command::Synth(c) => cmd_synth(c, s, out),
        Command::FilterDepth(c) => cmd_filter_depth(c, s, out),
        Command::FilterNormal(c) => cmd_filter_normal(c, s, out),
        Command::Loss(c) => cmd_loss(c, s, out),
        Command::FuseMesh(c) => cmd_fuse_mesh(c, s, out),
        Command::Eval(c) => cmd_eval(c, s, out),
        Command::Pipeline(c) => cmd_pipeline(c, s, out),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct FrameFilterRecord<'a> {
    id: &'a str,
    #[serde(flatten)]
    report: &'a FilterReport,
}

/// Synthetic dataset layout: `manifest.json` with noisy depth and prior
/// normals, `clean/manifest.json` with the noise-free maps, `gt.ply`,
/// `gt_observed.ply` (the part some camera sees), and `scene.json`.
fn cmd_synth(c: &SynthCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let scene = SyntheticScene::named(&s.scene, s.width, s.height)?;
    let frames = render_scene(&scene, &s.noise, s.seed)?;
    create_dir(&c.out)?;
    let noisy: Vec<Frame> = frames.iter().map(|f| f.noisy.clone()).collect();
    let clean: Vec<Frame> = frames.into_iter().map(|f| f.clean).collect();
    let manifest = save_dataset(&c.out, &noisy, s.depth_scale)?;
    save_dataset(c.out.join("clean"), &clean, s.depth_scale)?;
    let gt = scene.gt_mesh(s.gt_voxel)?;
    save_mesh(c.out.join("gt.ply"), &gt)?;
    save_mesh(
        c.out.join("gt_observed.ply"),
        &scene.observed_gt_mesh(s.gt_voxel)?,
    )?;
    write_json(&c.out.join("scene.json"), &scene)?;
    writeln!(
        out,
        "wrote {} frames to {} and a ground-truth mesh with {} triangles",
        noisy.len(),
        manifest.display(),
        gt.triangle_count()
    )?;
    Ok(())
}

/// Writes `{id}_depth.png` for each filtered frame, the prior normals
/// alongside, a manifest over both, and `report.json`.
fn cmd_filter_depth(c: &FilterDepthCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let manifest = DatasetManifest::read(&c.manifest)?;
    let frames = load_dataset(&c.manifest)?;
    let results = frames
        .iter()
        .map(|f| {
            let n_p = camera_normals(f);
            dnc_filter_frame(&f.depth, &f.intrinsics, &f.pose, &n_p, &s.dnc)
                .map_err(|e| e.in_frame(&f.id))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let filtered: Vec<Frame> = frames
        .iter()
        .zip(&results)
        .map(|(f, (d, _, _))| Frame {
            depth: d.clone(),
            ..f.clone()
        })
        .collect();
    save_dataset(&c.out, &filtered, manifest.depth_scale)?;
    let records: Vec<_> = frames
        .iter()
        .zip(&results)
        .map(|(f, (_, _, r))| FrameFilterRecord {
            id: &f.id,
            report: r,
        })
        .collect();
    write_json(&c.out.join("report.json"), &records)?;
    for r in &records {
        writeln!(
            out,
            "{} kept {} removed {} invalid {}",
            r.id, r.report.kept, r.report.removed, r.report.invalid
        )?;
    }
    Ok(())
}

fn camera_normals(f: &Frame) -> NormalMap {
    match f.normals.frame() {
        NormalFrame::Camera => f.normals.clone(),
        NormalFrame::World => f.normals.to_camera(&f.pose),
    }
}

fn load_rendered(sensor: &[Frame], path: Option<&Path>) -> CliResult<Vec<Frame>> {
    let Some(p) = path else {
        return Ok(sensor.to_vec());
    };
    let rendered = load_dataset(p)?;
    if rendered.len() != sensor.len() || rendered.iter().zip(sensor).any(|(a, b)| a.id != b.id) {
        return Err(CliError {
            status: ExitStatus::Data,
            message: "rendered dataset must list the same frame ids in the same order".into(),
        });
    }
    Ok(rendered)
}

/// Rendered normals of `r`; derived from its depth when `from_depth`.
fn rendered_normals(r: &Frame, from_depth: bool) -> crate::Result<NormalMap> {
    if from_depth {
        render_normal_from_depth(&r.depth, &r.intrinsics)
    } else {
        Ok(camera_normals(r))
    }
}

fn cmd_filter_normal(c: &FilterNormalCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let frames = load_dataset(&c.manifest)?;
    let rendered = load_rendered(&frames, c.rendered.as_deref())?;
    create_dir(&c.out)?;
    let mut records = Vec::new();
    for (f, r) in frames.iter().zip(&rendered) {
        let n_hat = rendered_normals(r, c.rendered.is_none()).map_err(|e| e.in_frame(&f.id))?;
        let (n_f, report) = anr_filter_normals(&n_hat, &camera_normals(f), &s.anr)
            .map_err(|e| e.in_frame(&f.id))?;
        write_normal_png(c.out.join(format!("{}_normal.png", f.id)), &n_f)?;
        writeln!(
            out,
            "{} kept {} removed {} invalid {}",
            f.id, report.kept, report.removed, report.invalid
        )?;
        records.push((f.id.clone(), report));
    }
    let records: Vec<_> = records
        .iter()
        .map(|(id, r)| FrameFilterRecord { id, report: r })
        .collect();
    write_json(&c.out.join("report.json"), &records)?;
    Ok(())
}

#[derive(Serialize)]
struct LossRecord {
    id: String,
    #[serde(flatten)]
    report: LossReport,
}

fn cmd_loss(c: &LossCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let frames = load_dataset(&c.manifest)?;
    let rendered = load_rendered(&frames, c.rendered.as_deref())?;
    let mut records = Vec::new();
    for (f, r) in frames.iter().zip(&rendered) {
        let report = (|| {
            let n_p = camera_normals(f);
            let (d_f, _, _) = dnc_filter_frame(&f.depth, &f.intrinsics, &f.pose, &n_p, &s.dnc)?;
            let n_hat = rendered_normals(r, c.rendered.is_none())?;
            let (n_f, _) = anr_filter_normals(&n_hat, &n_p, &s.anr)?;
            let color = match (&r.color, &f.color) {
                (Some(a), Some(b)) if c.rendered.is_some() => Some((a, b)),
                _ => None,
            };
            let inputs = LossInputs {
                d_hat: &r.depth,
                d_raw: &f.depth,
                d_filtered: &d_f,
                n_hat: &n_hat,
                n_p: &n_p,
                n_f: &n_f,
                color,
            };
            evaluate_losses(&inputs, c.step, &s.schedule)
        })()
        .map_err(|e| e.in_frame(&f.id))?;
        records.push(LossRecord {
            id: f.id.clone(),
            report,
        });
    }
    let text = serde_json::to_string_pretty(&records).map_err(Error::from)? + "\n";
    out.write_all(text.as_bytes())?;
    if let Some(p) = &c.out {
        write_json(p, &records)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MeshSummary {
    vertices: usize,
    triangles: usize,
    leaves: usize,
    corners: usize,
    finest_voxel: f64,
    mesher: Mesher,
}

impl MeshSummary {
    fn new(f: &FusedMesh, mesher: Mesher) -> Self {
        Self {
            vertices: f.mesh.vertex_count(),
            triangles: f.mesh.triangle_count(),
            leaves: f.leaf_count,
            corners: f.corner_count,
            finest_voxel: f.finest_voxel,
            mesher,
        }
    }
}

fn cmd_fuse_mesh(c: &FuseMeshCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let frames = load_dataset(&c.manifest)?;
    let filtered = filter_frames(&frames, false, &s.dnc, &s.anr)?;
    let volume = build_volume(&filtered, &s.fusion)?;
    let fused = mesh_volume(&volume, &s.octree, s.mesher, s.voxel_size)?;
    save_mesh(&c.out, &fused.mesh)?;
    let summary =
        serde_json::to_string_pretty(&MeshSummary::new(&fused, s.mesher)).map_err(Error::from)?;
    writeln!(out, "{summary}")?;
    Ok(())
}

fn cmd_eval(c: &EvalCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let pred = load_mesh(&c.pred)?;
    let gt = load_mesh(&c.gt)?;
    let cfg = s.pipeline().eval;
    let m = evaluate_with(&pred, &gt, &cfg)?;
    write!(out, "{}", m.to_text())?;
    if let Some(p) = &c.out {
        write_json(p, &m)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PipelineRecord<'a> {
    settings: &'a Settings,
    mesh: MeshSummary,
    filters: Vec<PipelineFrameRecord<'a>>,
    metrics: Option<&'a MeshMetrics>,
}

#[derive(Serialize)]
struct PipelineFrameRecord<'a> {
    id: &'a str,
    dnc: Option<&'a FilterReport>,
    anr: Option<&'a FilterReport>,
}

/// Writes `mesh.ply`, `report.json` and, with ground truth, `metrics.json`
/// to the output directory; prints the metrics. Synthetic scenes are scored
/// against the observed part of their ground truth.
fn cmd_pipeline(c: &PipelineCmd, s: &Settings, out: &mut dyn Write) -> CliResult {
    let mut cfg = s.pipeline();
    let (frames, gt) = match &c.manifest {
        Some(m) => (load_dataset(m)?, c.gt.as_ref().map(load_mesh).transpose()?),
        None => {
            let scene = SyntheticScene::named(&s.scene, s.width, s.height)?;
            if s.crop_to_scene && cfg.eval.crop.is_none() {
                cfg.eval.crop = Some(scene.bounds);
            }
            let frames = render_scene(&scene, &s.noise, s.seed)?
                .into_iter()
                .map(|f| f.noisy)
                .collect();
            (frames, Some(scene.observed_gt_mesh(s.gt_voxel)?))
        }
    };
    let result = run_pipeline(&frames, gt.as_ref(), &cfg)?;
    create_dir(&c.out)?;
    save_mesh(c.out.join("mesh.ply"), &result.fused.mesh)?;
    let record = PipelineRecord {
        settings: s,
        mesh: MeshSummary::new(&result.fused, cfg.mesher),
        filters: result
            .frames
            .iter()
            .map(|f| PipelineFrameRecord {
                id: &f.id,
                dnc: f.dnc.as_ref(),
                anr: f.anr.as_ref(),
            })
            .collect(),
        metrics: result.metrics.as_ref(),
    };
    write_json(&c.out.join("report.json"), &record)?;
    writeln!(
        out,
        "mesh {} vertices {} triangles finest_voxel {}",
        record.mesh.vertices, record.mesh.triangles, record.mesh.finest_voxel
    )?;
    if let Some(m) = &result.metrics {
        write_json(&c.out.join("metrics.json"), m)?;
        write!(out, "{}", m.to_text())?;
    }
    Ok(())
}

/// Entry point of the binary.
pub fn main_status() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock()) as i32
}
