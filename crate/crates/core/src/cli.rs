//! Command-line driver: `track`, `sim`, `eval` and `ablate`.
//!
//! A data root holds one file per sequence in each of `camera/`, `lidar/`,
//! `calib/`, and optionally `gt/`, `labels/` (`<seq>_camera.txt`,
//! `<seq>_lidar.txt`) and `faults/`. `sim` writes exactly this layout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;

use crate::affinity::{
    EmbeddingCosineProvider, OracleProvider, ProviderKind, SimilarityProvider, ZeroProvider,
};
use crate::error::{Error, Result};
use crate::eval::{clear_mot, ClearReport, Trajectories};
use crate::io;
use crate::sim::{generate, scripted_case, FaultSpec, ScriptedCase};
use crate::suite::{ablate, ablation_modes, format_table, Sequence};
use crate::tracker::PipelineMode;
use crate::types::{default_config, Stream, TrackerConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "crosstrack",
    version,
    about = "Camera/LiDAR cross-correction tracker"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track every sequence under a data root and write KITTI tracking files.
    Track(TrackArgs),
    /// Generate synthetic sequences with injected faults.
    Sim(SimArgs),
    /// Score tracking output against ground truth.
    Eval(EvalArgs),
    /// Run the LiDAR-only baseline and each cumulative case mask, and tabulate.
    Ablate(AblateArgs),
}

#[derive(Debug, Args, Clone)]
pub struct TrackerOpts {
    /// Key-value file with tracker parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one parameter, `key=value`; repeatable, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Similarity provider: oracle, file, embed or zero.
    #[arg(long, default_value = "zero")]
    pub provider: ProviderKind,
    /// Directory of `<seq>.txt` score files for `--provider file`.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Directory of `<seq>_camera.txt` / `<seq>_lidar.txt` embedding files for `--provider embed`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Comma-separated sequence names; all sequences when omitted.
    #[arg(long, value_delimiter = ',')]
    pub sequences: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Enabled correction cases (e.g. `abcde`, `ab`, `none`) or `lidar` for the baseline.
    #[arg(long, default_value = "abcde")]
    pub cases: PipelineMode,
    /// Recorded in the manifest; tracking itself draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: TrackerOpts,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Write one scripted scenario (a, b, c, d, e or boundary) instead of random ones.
    #[arg(long)]
    pub case: Option<ScriptedCase>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random sequences; sequence k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
    #[arg(long, default_value_t = 5)]
    pub objects: usize,
    #[arg(long, default_value_t = 100)]
    pub frames: usize,
    #[arg(long, default_value_t = 0.0)]
    pub p_miss_cam: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_miss_lidar: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_miss_both: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_false_cam: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_false_lidar: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_px: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_m: f64,
    #[arg(long)]
    pub boundary_exit: bool,
    /// Tracker parameters shape the scripted gaps.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth file, or directory of `<seq>.txt` files.
    #[arg(long, required_unless_present = "data")]
    pub gt: Option<PathBuf>,
    /// Hypothesis file, or directory matching `--gt`.
    #[arg(long, required_unless_present = "data")]
    pub hyp: Option<PathBuf>,
    /// Data root to track and score under each of `--cases`.
    #[arg(long, requires = "cases")]
    pub data: Option<PathBuf>,
    /// Comma-separated pipeline modes, e.g. `a,ab,abc,abcd,abcde`.
    #[arg(long, value_delimiter = ',')]
    pub cases: Vec<PipelineMode>,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Machine-readable report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrackerOpts,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    pub data: PathBuf,
    /// Modes to run; the LiDAR baseline and `a,ab,abc,abcd,abcde` by default.
    #[arg(long, value_delimiter = ',')]
    pub cases: Vec<PipelineMode>,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub opts: TrackerOpts,
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let res = match cli.command {
        Command::Track(a) => cmd_track(&a),
        Command::Sim(a) => cmd_sim(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Ablate(a) => cmd_ablate(&a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// 2 for bad input (files, formats, parameters), 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::InvalidConfig { .. }
        | Error::CalibrationMissing
        | Error::InvalidCalibration(_)
        | Error::FrameMismatch(_)
        | Error::InfeasibleScene(_) => 2,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<TrackerConfig> {
    let mut cfg = match path {
        Some(p) => io::parse_config(&io::read_text(p)?, p, default_config())?,
        None => default_config(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("`{o}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn require(path: &Path) -> Result<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        })
    }
}

/// Sequence names under `root/camera`, sorted, filtered by `wanted` if non-empty.
pub fn list_sequences(root: &Path, wanted: &[String]) -> Result<Vec<String>> {
    let dir = root.join("camera");
    let rd = std::fs::read_dir(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut names: Vec<String> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    if !wanted.is_empty() {
        for w in wanted {
            if !names.contains(w) {
                let path = io::scenario_paths(root, w).camera;
                require(&path)?;
            }
        }
        names.retain(|n| wanted.contains(n));
    }
    Ok(names)
}

/// Reads one sequence and builds its providers. Ground truth is empty when
/// the data root has none.
pub fn load_sequence(root: &Path, name: &str, opts: &TrackerOpts) -> Result<Sequence> {
    let p = io::scenario_paths(root, name);
    let calib_path = require(&p.calib).map_err(|_| Error::Io {
        path: p.calib.clone(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing calibration file"),
    })?;
    let calib = io::parse_calibration(&io::read_text(calib_path)?, calib_path)?;
    let cam_path = require(&p.camera)?;
    let lid_path = require(&p.lidar)?;
    let mut camera = io::parse_camera_detections(&io::read_text(cam_path)?, cam_path)?;
    let mut lidar = io::parse_lidar_detections(&io::read_text(lid_path)?, lid_path)?;

    let (camera_provider, lidar_provider): (
        Arc<dyn SimilarityProvider>,
        Arc<dyn SimilarityProvider>,
    ) = match opts.provider {
        ProviderKind::Zero => (Arc::new(ZeroProvider), Arc::new(ZeroProvider)),
        ProviderKind::Oracle => {
            let mut o = OracleProvider::new();
            for (path, stream) in [
                (&p.camera_labels, Stream::Camera),
                (&p.lidar_labels, Stream::Lidar),
            ] {
                let path = require(path)?;
                io::parse_labels_into(&io::read_text(path)?, path, stream, &mut o)?;
            }
            let o = Arc::new(o);
            (o.clone(), o)
        }
        ProviderKind::FileScores => {
            let dir = opts
                .scores
                .as_ref()
                .ok_or_else(|| Error::config("scores", "--provider file needs --scores"))?;
            let path = dir.join(format!("{name}.txt"));
            let s = Arc::new(io::parse_scores(&io::read_text(require(&path)?)?, &path)?);
            (s.clone(), s)
        }
        ProviderKind::EmbeddingCosine => {
            let dir = opts.embeddings.as_ref().ok_or_else(|| {
                Error::config("embeddings", "--provider embed needs --embeddings")
            })?;
            for (frames, stream) in [(&mut camera, Stream::Camera), (&mut lidar, Stream::Lidar)] {
                let path = dir.join(format!("{name}_{stream}.txt"));
                io::attach_embeddings(&io::read_text(require(&path)?)?, &path, frames)?;
            }
            (
                Arc::new(EmbeddingCosineProvider),
                Arc::new(EmbeddingCosineProvider),
            )
        }
    };

    let n = camera.len().max(lidar.len());
    let mut gt: Trajectories = if p.gt.is_file() {
        io::tracking_trajectories(&io::parse_tracking(&io::read_text(&p.gt)?, &p.gt)?)
    } else {
        Vec::new()
    };
    if gt.len() < n {
        gt.resize_with(n, Vec::new);
    }
    Ok(Sequence {
        name: name.to_string(),
        calib,
        camera,
        lidar,
        gt,
        camera_provider,
        lidar_provider,
    })
}

fn load_all(root: &Path, opts: &TrackerOpts) -> Result<Vec<Sequence>> {
    let names = list_sequences(root, &opts.sequences)?;
    names
        .par_iter()
        .map(|n| load_sequence(root, n, opts))
        .collect()
}

fn manifest_base(
    command: &str,
    opts: &TrackerOpts,
    cfg: &TrackerConfig,
) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("command".into(), command.into());
    m.insert("tool_version".into(), VERSION.into());
    m.insert("provider".into(), opts.provider.to_string());
    for (k, v) in cfg.entries() {
        m.insert(format!("config.{k}"), v);
    }
    m
}

pub fn cmd_track(a: &TrackArgs) -> Result<()> {
    let cfg = load_config(a.opts.config.as_deref(), &a.opts.overrides)?;
    let seqs = load_all(&a.data, &a.opts)?;
    let outputs = seqs
        .par_iter()
        .map(|s| {
            let out = s.track(&cfg, a.cases)?;
            let path = a.out.join(format!("{}.txt", s.name));
            io::write_atomic(&path, &io::write_tracking(&out))?;
            info!("{}: {} frames -> {}", s.name, out.len(), path.display());
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    let mut m = manifest_base("track", &a.opts, &cfg);
    m.insert("cases".into(), a.cases.to_string());
    m.insert("seed".into(), a.seed.to_string());
    m.insert("data".into(), a.data.display().to_string());
    let names: Vec<&str> = seqs.iter().map(|s| s.name.as_str()).collect();
    m.insert("sequences".into(), names.join(","));
    for s in &seqs {
        let p = io::scenario_paths(&a.data, &s.name);
        m.insert(
            format!("input.{}.camera", s.name),
            p.camera.display().to_string(),
        );
        m.insert(
            format!("input.{}.lidar", s.name),
            p.lidar.display().to_string(),
        );
        m.insert(
            format!("input.{}.calib", s.name),
            p.calib.display().to_string(),
        );
    }
    io::write_atomic(&a.out.join("manifest.txt"), &io::write_manifest(&m))?;
    info!("tracked {} sequences", outputs.len());
    Ok(())
}

pub fn cmd_sim(a: &SimArgs) -> Result<()> {
    let mut m = BTreeMap::new();
    m.insert("command".to_string(), "sim".to_string());
    m.insert("tool_version".to_string(), VERSION.to_string());
    if let Some(case) = a.case {
        let cfg = load_config(a.config.as_deref(), &a.overrides)?;
        let sc = scripted_case(case, &cfg);
        io::export_scenario(&sc, &a.out, "0000")?;
        m.insert("case".into(), case.to_string());
        m.insert("frames".into(), sc.n_frames.to_string());
        for (k, v) in cfg.entries() {
            m.insert(format!("config.{k}"), v);
        }
    } else {
        let base = FaultSpec {
            p_miss_cam: a.p_miss_cam,
            p_miss_lidar: a.p_miss_lidar,
            p_miss_both: a.p_miss_both,
            p_false_cam: a.p_false_cam,
            p_false_lidar: a.p_false_lidar,
            pos_noise_px: a.noise_px,
            pos_noise_m: a.noise_m,
            boundary_exit: a.boundary_exit,
            seed: a.seed,
        };
        base.validate()?;
        (0..a.sequences)
            .into_par_iter()
            .map(|k| {
                let spec = FaultSpec {
                    seed: a.seed.wrapping_add(k as u64),
                    ..base.clone()
                };
                let sc = generate(a.objects, a.frames, &spec)?;
                io::export_scenario(&sc, &a.out, &format!("{k:04}"))?;
                Ok(())
            })
            .collect::<Result<Vec<()>>>()?;
        for (k, v) in [
            ("seed", a.seed.to_string()),
            ("sequences", a.sequences.to_string()),
            ("objects", a.objects.to_string()),
            ("frames", a.frames.to_string()),
            ("p_miss_cam", a.p_miss_cam.to_string()),
            ("p_miss_lidar", a.p_miss_lidar.to_string()),
            ("p_miss_both", a.p_miss_both.to_string()),
            ("p_false_cam", a.p_false_cam.to_string()),
            ("p_false_lidar", a.p_false_lidar.to_string()),
            ("noise_px", a.noise_px.to_string()),
            ("noise_m", a.noise_m.to_string()),
            ("boundary_exit", a.boundary_exit.to_string()),
        ] {
            m.insert(k.to_string(), v);
        }
    }
    io::write_atomic(&a.out.join("manifest.txt"), &io::write_manifest(&m))?;
    info!("scenario written to {}", a.out.display());
    Ok(())
}

fn read_trajectories(path: &Path) -> Result<Trajectories> {
    Ok(io::tracking_trajectories(&io::parse_tracking(
        &io::read_text(path)?,
        path,
    )?))
}

fn emit_report(text: &str, kv: Option<(&Path, String)>) -> Result<()> {
    print!("{text}");
    if let Some((path, body)) = kv {
        io::write_atomic(path, &body)?;
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if let Some(data) = &a.data {
        let cfg = load_config(a.opts.config.as_deref(), &a.opts.overrides)?;
        let seqs = load_all(data, &a.opts)?;
        let rows = ablate(&seqs, &cfg, &a.cases, a.iou)?;
        let table = format_table(&rows);
        return emit_report(&table, a.out.as_deref().map(|p| (p, table.clone())));
    }
    let (gt, hyp) = (
        a.gt.as_ref().expect("required by clap"),
        a.hyp.as_ref().expect("required by clap"),
    );
    let mut per_seq: Vec<(String, ClearReport)> = Vec::new();
    if gt.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(gt)
            .map_err(|source| Error::Io {
                path: gt.clone(),
                source,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect();
        names.sort();
        if !a.opts.sequences.is_empty() {
            names.retain(|n| a.opts.sequences.contains(n));
        }
        for n in names {
            let g = read_trajectories(&gt.join(format!("{n}.txt")))?;
            let h = read_trajectories(require(&hyp.join(format!("{n}.txt")))?)?;
            per_seq.push((n, clear_mot(&g, &h, a.iou)?));
        }
    } else {
        let g = read_trajectories(require(gt)?)?;
        let h = read_trajectories(require(hyp)?)?;
        per_seq.push(("all".to_string(), clear_mot(&g, &h, a.iou)?));
    }
    let total = ClearReport::combine(per_seq.iter().map(|(_, r)| r));
    let mut text = String::new();
    if per_seq.len() > 1 {
        for (n, r) in &per_seq {
            text.push_str(&format!("{n}: {r}\n"));
        }
    }
    text.push_str(&format!("{total}\n"));
    emit_report(&text, a.out.as_deref().map(|p| (p, total.kv_lines())))
}

pub fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let cfg = load_config(a.opts.config.as_deref(), &a.opts.overrides)?;
    let seqs = load_all(&a.data, &a.opts)?;
    let modes = if a.cases.is_empty() {
        ablation_modes()
    } else {
        a.cases.clone()
    };
    let rows = ablate(&seqs, &cfg, &modes, a.iou)?;
    let table = format_table(&rows);
    emit_report(&table, a.out.as_deref().map(|p| (p, table.clone())))
}
