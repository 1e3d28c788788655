//! KITTI-style text formats.
//!
//! * camera detections: `frame -1 type trunc occ alpha left top right bottom score`
//! * LiDAR detections: `frame -1 type trunc occ alpha left top right bottom h w l x y z rot_y score`
//! * tracking output: `frame track_id type trunc occ alpha left top right bottom h w l x y z rot_y score`
//!
//! Fields may be separated by whitespace or commas. In files `y` is the
//! bottom face center as in KITTI labels; in memory boxes are centered, so
//! readers subtract `h / 2` and writers add it back. Floats are written with
//! six decimals. Detection ids are assigned from the record order per file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::affinity::{FileScoresProvider, OracleProvider};
use crate::error::{Error, Result};
use crate::eval::{LabeledBox, Trajectories};
use crate::geometry::project_box_3d;
use crate::sim::{FaultKind, FaultRecord, Scenario};
use crate::tracker::{OutputFrame, TrackId};
use crate::types::{wrap_angle, BBox2D, BBox3D, Calibration, Detection, Stream, TrackerConfig};

pub const OBJECT_TYPE: &str = "Car";
/// KITTI's "not available" value for alpha.
pub const NO_ALPHA: f64 = -10.0;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

fn records(text: &str) -> impl Iterator<Item = Record<'_>> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            return None;
        }
        let fields = l
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        Some(Record {
            line: k + 1,
            fields,
        })
    })
}

struct Ctx<'p> {
    path: &'p Path,
}

impl Ctx<'_> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, r: &Record, k: usize, what: &str) -> Result<T> {
        r.fields
            .get(k)
            .ok_or_else(|| self.err(r.line, format!("missing {what}")))?
            .parse()
            .map_err(|_| self.err(r.line, format!("bad {what} `{}`", r.fields[k])))
    }

    fn expect_len(&self, r: &Record, n: usize) -> Result<()> {
        if r.fields.len() != n {
            return Err(self.err(
                r.line,
                format!("expected {n} fields, found {}", r.fields.len()),
            ));
        }
        Ok(())
    }
}

fn push_at<T>(frames: &mut Vec<Vec<T>>, frame: usize, item: T) {
    if frames.len() <= frame {
        frames.resize_with(frame + 1, Vec::new);
    }
    frames[frame].push(item);
}

fn box3d_from_kitti(ctx: &Ctx, r: &Record, at: usize) -> Result<BBox3D> {
    let h: f64 = ctx.num(r, at, "h")?;
    let w = ctx.num(r, at + 1, "w")?;
    let l = ctx.num(r, at + 2, "l")?;
    let x = ctx.num(r, at + 3, "x")?;
    let y_bottom: f64 = ctx.num(r, at + 4, "y")?;
    let z = ctx.num(r, at + 5, "z")?;
    let ry = ctx.num(r, at + 6, "rot_y")?;
    BBox3D::new(x, y_bottom - 0.5 * h, z, l, w, h, ry).map_err(|e| ctx.err(r.line, e.to_string()))
}

fn box2d_at(ctx: &Ctx, r: &Record, at: usize) -> Result<BBox2D> {
    BBox2D::new(
        ctx.num(r, at, "left")?,
        ctx.num(r, at + 1, "top")?,
        ctx.num(r, at + 2, "right")?,
        ctx.num(r, at + 3, "bottom")?,
    )
    .map_err(|e| ctx.err(r.line, e.to_string()))
}

pub fn parse_camera_detections(text: &str, path: &Path) -> Result<Vec<Vec<Detection>>> {
    let ctx = Ctx { path };
    let mut frames = Vec::new();
    for (k, r) in records(text).enumerate() {
        ctx.expect_len(&r, 11)?;
        let frame: usize = ctx.num(&r, 0, "frame")?;
        let b = box2d_at(&ctx, &r, 6)?;
        let score = ctx.num(&r, 10, "score")?;
        let d = Detection::camera(frame, k as u64, b, score)
            .map_err(|e| ctx.err(r.line, e.to_string()))?;
        push_at(&mut frames, frame, d);
    }
    Ok(frames)
}

pub fn parse_lidar_detections(text: &str, path: &Path) -> Result<Vec<Vec<Detection>>> {
    let ctx = Ctx { path };
    let mut frames = Vec::new();
    for (k, r) in records(text).enumerate() {
        ctx.expect_len(&r, 18)?;
        let frame: usize = ctx.num(&r, 0, "frame")?;
        let b = box3d_from_kitti(&ctx, &r, 10)?;
        let score = ctx.num(&r, 17, "score")?;
        let d = Detection::lidar(frame, k as u64, b, score)
            .map_err(|e| ctx.err(r.line, e.to_string()))?;
        push_at(&mut frames, frame, d);
    }
    Ok(frames)
}

fn fmt_3d(s: &mut String, b: &BBox3D) {
    let _ = write!(
        s,
        " {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
        b.h,
        b.w,
        b.l,
        b.x,
        b.y + 0.5 * b.h,
        b.z,
        b.yaw
    );
}

fn fmt_2d(s: &mut String, b: &BBox2D) {
    let _ = write!(
        s,
        " {:.6} {:.6} {:.6} {:.6}",
        b.left, b.top, b.right, b.bottom
    );
}

/// A value as it reads back from a file.
pub fn at_file_precision(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

/// The box as it reads back from a detection file.
pub fn at_file_precision_2d(b: &BBox2D) -> BBox2D {
    BBox2D {
        left: at_file_precision(b.left),
        top: at_file_precision(b.top),
        right: at_file_precision(b.right),
        bottom: at_file_precision(b.bottom),
    }
}

/// The box as it reads back from a detection file.
pub fn at_file_precision_3d(b: &BBox3D) -> BBox3D {
    let h = at_file_precision(b.h);
    BBox3D {
        x: at_file_precision(b.x),
        y: at_file_precision(b.y + 0.5 * b.h) - 0.5 * h,
        z: at_file_precision(b.z),
        l: at_file_precision(b.l),
        w: at_file_precision(b.w),
        h,
        yaw: at_file_precision(b.yaw),
    }
}

/// Observation angle from rotation and position.
pub fn alpha_of(b: &BBox3D) -> f64 {
    wrap_angle(b.yaw - b.x.atan2(b.z))
}

pub fn write_camera_detections(frames: &[Vec<Detection>]) -> String {
    let mut s = String::new();
    for d in frames.iter().flatten() {
        let Some(b) = &d.box2d else { continue };
        let _ = write!(s, "{} -1 {OBJECT_TYPE} 0 0 {NO_ALPHA:.6}", d.frame);
        fmt_2d(&mut s, b);
        let _ = writeln!(s, " {:.6}", d.score);
    }
    s
}

/// The 2D fields hold the projected box, or zeros when the box does not project.
pub fn write_lidar_detections(frames: &[Vec<Detection>], calib: &Calibration) -> String {
    let mut s = String::new();
    for d in frames.iter().flatten() {
        let Some(b) = &d.box3d else { continue };
        let _ = write!(s, "{} -1 {OBJECT_TYPE} 0 0 {:.6}", d.frame, alpha_of(b));
        match project_box_3d(b, calib) {
            Ok(p) => fmt_2d(&mut s, &p),
            Err(_) => s.push_str(" 0.000000 0.000000 0.000000 0.000000"),
        }
        fmt_3d(&mut s, b);
        let _ = writeln!(s, " {:.6}", d.score);
    }
    s
}

pub fn write_tracking(frames: &[OutputFrame]) -> String {
    let records: Vec<TrackingRecord> = frames
        .iter()
        .flat_map(|f| {
            f.entries.iter().map(|e| TrackingRecord {
                frame: f.frame,
                track_id: e.track_id,
                alpha: alpha_of(&e.box3d),
                box2d: e.box2d,
                box3d: e.box3d,
                score: e.score,
            })
        })
        .collect();
    write_tracking_records(&records)
}

/// Writes records as given, so parsed records reproduce their file.
pub fn write_tracking_records(records: &[TrackingRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = write!(
            s,
            "{} {} {OBJECT_TYPE} 0 0 {:.6}",
            r.frame, r.track_id, r.alpha
        );
        fmt_2d(&mut s, &r.box2d);
        fmt_3d(&mut s, &r.box3d);
        let _ = writeln!(s, " {:.6}", r.score);
    }
    s
}

/// One parsed line of tracking output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingRecord {
    pub frame: usize,
    pub track_id: TrackId,
    pub alpha: f64,
    pub box2d: BBox2D,
    pub box3d: BBox3D,
    pub score: f64,
}

pub fn parse_tracking(text: &str, path: &Path) -> Result<Vec<TrackingRecord>> {
    let ctx = Ctx { path };
    records(text)
        .map(|r| {
            ctx.expect_len(&r, 18)?;
            Ok(TrackingRecord {
                frame: ctx.num(&r, 0, "frame")?,
                track_id: ctx.num(&r, 1, "track id")?,
                alpha: ctx.num(&r, 5, "alpha")?,
                box2d: box2d_at(&ctx, &r, 6)?,
                box3d: box3d_from_kitti(&ctx, &r, 10)?,
                score: ctx.num(&r, 17, "score")?,
            })
        })
        .collect()
}

/// Tracking records back into output frames; `n_frames` pads the tail.
pub fn tracking_frames(records: &[TrackingRecord], n_frames: usize) -> Vec<OutputFrame> {
    let n = records
        .iter()
        .map(|r| r.frame + 1)
        .max()
        .unwrap_or(0)
        .max(n_frames);
    let mut out: Vec<OutputFrame> = (0..n)
        .map(|frame| OutputFrame {
            frame,
            entries: Vec::new(),
        })
        .collect();
    for r in records {
        out[r.frame].entries.push(crate::tracker::OutputEntry {
            track_id: r.track_id,
            box3d: r.box3d,
            box2d: r.box2d,
            score: r.score,
        });
    }
    out
}

/// Image-plane trajectories from any 2D-bearing file: tracking output or
/// ground truth (which uses the same layout).
pub fn tracking_trajectories(records: &[TrackingRecord]) -> Trajectories {
    let mut out: Trajectories = Vec::new();
    for r in records {
        push_at(
            &mut out,
            r.frame,
            LabeledBox {
                id: r.track_id,
                bbox: r.box2d,
            },
        );
    }
    out
}

/// `P2: 12 numbers` plus an optional `image_size: W H`; other keys are
/// ignored. Without `image_size` the KITTI image size is assumed.
pub fn parse_calibration(text: &str, path: &Path) -> Result<Calibration> {
    let ctx = Ctx { path };
    let default = Calibration::kitti_default();
    let mut p2: Option<[[f64; 4]; 3]> = None;
    let (mut w, mut h) = (default.image_width, default.image_height);
    for (k, line) in text.lines().enumerate() {
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let vals: Vec<&str> = rest.split_whitespace().collect();
        let nums = || -> Result<Vec<f64>> {
            vals.iter()
                .map(|v| {
                    v.parse()
                        .map_err(|_| ctx.err(k + 1, format!("bad number `{v}`")))
                })
                .collect()
        };
        match key.trim() {
            "P2" => {
                let v = nums()?;
                if v.len() != 12 {
                    return Err(ctx.err(k + 1, format!("P2 needs 12 values, found {}", v.len())));
                }
                let mut m = [[0.0; 4]; 3];
                for (i, x) in v.into_iter().enumerate() {
                    m[i / 4][i % 4] = x;
                }
                p2 = Some(m);
            }
            "image_size" => {
                let v = nums()?;
                if v.len() != 2 {
                    return Err(ctx.err(k + 1, "image_size needs width and height"));
                }
                (w, h) = (v[0], v[1]);
            }
            _ => {}
        }
    }
    let p2 = p2.ok_or_else(|| ctx.err(0, "no P2 entry"))?;
    Calibration::new(p2, w, h).map_err(|e| ctx.err(0, e.to_string()))
}

pub fn write_calibration(calib: &Calibration) -> String {
    let p = &calib.projection;
    let mut s = String::from("P2:");
    for i in 0..3 {
        for j in 0..4 {
            let _ = write!(s, " {:e}", p[(i, j)]);
        }
    }
    let _ = writeln!(
        s,
        "\nimage_size: {} {}",
        calib.image_width, calib.image_height
    );
    s
}

/// Ground truth in tracking layout, score 1.
pub fn write_ground_truth(sc: &Scenario) -> String {
    let mut s = String::new();
    for f in 0..sc.n_frames {
        for g in &sc.gt_tracks {
            let Some(b) = g.boxes[f] else { continue };
            let Ok(p) = project_box_3d(&b, &sc.calib) else {
                continue;
            };
            let _ = write!(s, "{f} {} {OBJECT_TYPE} 0 0 {:.6}", g.gt_id, alpha_of(&b));
            fmt_2d(&mut s, &p);
            fmt_3d(&mut s, &b);
            s.push_str(" 1.000000\n");
        }
    }
    s
}

/// `frame det_id gt_id` for labelled detections of one stream.
pub fn write_labels(dets: &[Vec<Detection>], labels: &[Vec<Option<u64>>]) -> String {
    let mut s = String::new();
    for (d, l) in dets.iter().flatten().zip(labels.iter().flatten()) {
        if let Some(gt) = l {
            let _ = writeln!(s, "{} {} {gt}", d.frame, d.det_id);
        }
    }
    s
}

pub fn parse_labels_into(
    text: &str,
    path: &Path,
    stream: Stream,
    oracle: &mut OracleProvider,
) -> Result<()> {
    let ctx = Ctx { path };
    for r in records(text) {
        ctx.expect_len(&r, 3)?;
        oracle.insert(stream, ctx.num(&r, 1, "det id")?, ctx.num(&r, 2, "gt id")?);
    }
    Ok(())
}

/// `frame stream prior_id det_id score`.
pub fn parse_scores(text: &str, path: &Path) -> Result<FileScoresProvider> {
    let ctx = Ctx { path };
    let mut p = FileScoresProvider::new();
    for r in records(text) {
        ctx.expect_len(&r, 5)?;
        let stream: Stream = r.fields[1]
            .parse()
            .map_err(|e: String| ctx.err(r.line, e))?;
        let score: f64 = ctx.num(&r, 4, "score")?;
        if !(0.0..=1.0).contains(&score) {
            return Err(ctx.err(r.line, format!("score {score} is outside [0, 1]")));
        }
        p.insert(
            ctx.num(&r, 0, "frame")?,
            stream,
            ctx.num(&r, 2, "prior id")?,
            ctx.num(&r, 3, "det id")?,
            score,
        );
    }
    Ok(p)
}

/// `frame det_id v1 v2 ...` attached to the detection with that id.
pub fn attach_embeddings(text: &str, path: &Path, frames: &mut [Vec<Detection>]) -> Result<()> {
    let ctx = Ctx { path };
    for r in records(text) {
        if r.fields.len() < 3 {
            return Err(ctx.err(r.line, "expected frame, det id and at least one value"));
        }
        let frame: usize = ctx.num(&r, 0, "frame")?;
        let det_id: u64 = ctx.num(&r, 1, "det id")?;
        let v = (2..r.fields.len())
            .map(|k| ctx.num(&r, k, "embedding value"))
            .collect::<Result<Vec<f64>>>()?;
        let d = frames
            .get_mut(frame)
            .and_then(|f| f.iter_mut().find(|d| d.det_id == det_id))
            .ok_or_else(|| ctx.err(r.line, format!("no detection {det_id} in frame {frame}")))?;
        d.embedding = Some(v.into());
    }
    Ok(())
}

pub fn write_fault_log(log: &[FaultRecord]) -> String {
    let mut s = String::new();
    for r in log {
        let gt = r.gt_id.map_or_else(|| "-".to_string(), |g| g.to_string());
        let _ = writeln!(s, "{} {gt} {}", r.frame, r.kind.as_str());
    }
    s
}

pub fn parse_fault_log(text: &str, path: &Path) -> Result<Vec<FaultRecord>> {
    let ctx = Ctx { path };
    records(text)
        .map(|r| {
            ctx.expect_len(&r, 3)?;
            let gt_id = match r.fields[1] {
                "-" => None,
                _ => Some(ctx.num(&r, 1, "gt id")?),
            };
            let kind: FaultKind = r.fields[2]
                .parse()
                .map_err(|e: String| ctx.err(r.line, e))?;
            Ok(FaultRecord {
                frame: ctx.num(&r, 0, "frame")?,
                gt_id,
                kind,
            })
        })
        .collect()
}

/// `key = value` or `key value` lines applied on top of `base`.
pub fn parse_config(text: &str, path: &Path, mut base: TrackerConfig) -> Result<TrackerConfig> {
    let ctx = Ctx { path };
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(char::is_whitespace))
            .ok_or_else(|| ctx.err(k + 1, "expected `key = value`"))?;
        base.set(key.trim(), value.trim())
            .map_err(|e| ctx.err(k + 1, e.to_string()))?;
    }
    base.validate()?;
    Ok(base)
}

pub fn write_config(cfg: &TrackerConfig) -> String {
    cfg.entries()
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Sorted `key = value` lines; no timestamps, so equal runs give equal files.
pub fn write_manifest(entries: &BTreeMap<String, String>) -> String {
    entries
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Files written for an exported scenario, relative to the data root.
pub fn scenario_paths(root: &Path, seq: &str) -> ScenarioPaths {
    ScenarioPaths {
        camera: root.join("camera").join(format!("{seq}.txt")),
        lidar: root.join("lidar").join(format!("{seq}.txt")),
        calib: root.join("calib").join(format!("{seq}.txt")),
        gt: root.join("gt").join(format!("{seq}.txt")),
        faults: root.join("faults").join(format!("{seq}.txt")),
        camera_labels: root.join("labels").join(format!("{seq}_camera.txt")),
        lidar_labels: root.join("labels").join(format!("{seq}_lidar.txt")),
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioPaths {
    pub camera: PathBuf,
    pub lidar: PathBuf,
    pub calib: PathBuf,
    pub gt: PathBuf,
    pub faults: PathBuf,
    pub camera_labels: PathBuf,
    pub lidar_labels: PathBuf,
}

pub fn export_scenario(sc: &Scenario, root: &Path, seq: &str) -> Result<ScenarioPaths> {
    let p = scenario_paths(root, seq);
    write_atomic(&p.camera, &write_camera_detections(&sc.camera_dets))?;
    write_atomic(&p.lidar, &write_lidar_detections(&sc.lidar_dets, &sc.calib))?;
    write_atomic(&p.calib, &write_calibration(&sc.calib))?;
    write_atomic(&p.gt, &write_ground_truth(sc))?;
    write_atomic(&p.faults, &write_fault_log(&sc.fault_log))?;
    write_atomic(
        &p.camera_labels,
        &write_labels(&sc.camera_dets, &sc.camera_labels),
    )?;
    write_atomic(
        &p.lidar_labels,
        &write_labels(&sc.lidar_dets, &sc.lidar_labels),
    )?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate, FaultSpec};

    fn p() -> &'static Path {
        Path::new("test.txt")
    }

    #[test]
    fn camera_line_layout() {
        let d =
            Detection::camera(3, 0, BBox2D::new(1.0, 2.5, 30.25, 40.0).unwrap(), 0.875).unwrap();
        assert_eq!(
            write_camera_detections(&[vec![], vec![], vec![], vec![d]]),
            "3 -1 Car 0 0 -10.000000 1.000000 2.500000 30.250000 40.000000 0.875000\n"
        );
    }

    #[test]
    fn comma_separated_input() {
        let f = parse_camera_detections(
            "0,-1,Car,0,0,-10,1,2,30,40,0.9\n1,-1,Car,0,0,-10,5,6,50,60,0.8\n",
            p(),
        )
        .unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1][0].det_id, 1);
        assert_eq!(f[1][0].box2d.unwrap().right, 50.0);
    }

    #[test]
    fn lidar_y_is_bottom_center_in_files() {
        let line = "0 -1 Car 0 0 0 0 0 10 10 1.5 1.6 4 1 2 20 1.57 0.9\n";
        let f = parse_lidar_detections(line, p()).unwrap();
        let b = f[0][0].box3d.unwrap();
        assert!((b.y - 1.25).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = parse_camera_detections("0 -1 Car 0 0 -10 1 2 30 40 0.9\n0 -1 Car 0 0\n", p())
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
    }

    #[test]
    fn calibration_round_trip() {
        let c = Calibration::kitti_default();
        let back = parse_calibration(&write_calibration(&c), p()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn kitti_calib_without_size() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 7.215377e+02 0.000000e+00 6.095593e+02 4.485728e+01 0.000000e+00 7.215377e+02 1.728540e+02 2.163791e-01 0.000000e+00 0.000000e+00 1.000000e+00 2.745884e-03\nR0_rect: 1 0 0 0 1 0 0 0 1\n";
        let c = parse_calibration(text, p()).unwrap();
        assert_eq!(c, Calibration::kitti_default());
    }

    #[test]
    fn detection_export_is_byte_stable() {
        let sc = generate(4, 20, &FaultSpec::fault_suite(3)).unwrap();
        let cam = write_camera_detections(&sc.camera_dets);
        let lid = write_lidar_detections(&sc.lidar_dets, &sc.calib);
        let cam2 = write_camera_detections(&parse_camera_detections(&cam, p()).unwrap());
        let lid2 = write_lidar_detections(&parse_lidar_detections(&lid, p()).unwrap(), &sc.calib);
        assert_eq!(cam, cam2);
        assert_eq!(lid, lid2);
    }

    #[test]
    fn fault_log_round_trip() {
        let sc = generate(5, 50, &FaultSpec::fault_suite(4)).unwrap();
        assert_eq!(
            parse_fault_log(&write_fault_log(&sc.fault_log), p()).unwrap(),
            sc.fault_log
        );
    }

    #[test]
    fn config_file_overrides() {
        let cfg = parse_config(
            "# comment\ntheta_iou = 0.4\nmax_age_n 5\n",
            p(),
            crate::types::default_config(),
        )
        .unwrap();
        assert_eq!(cfg.theta_iou, 0.4);
        assert_eq!(cfg.max_age_n, 5);
        assert!(parse_config("nope = 1\n", p(), crate::types::default_config()).is_err());
        let round = parse_config(&write_config(&cfg), p(), crate::types::default_config()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn scores_and_embeddings() {
        let s = parse_scores("1 camera 0 3 0.75\n", p()).unwrap();
        assert_eq!(s.len(), 1);
        assert!(parse_scores("1 camera 0 3 1.5\n", p()).is_err());
        let mut frames = vec![vec![Detection::camera(
            0,
            0,
            BBox2D::new(0.0, 0.0, 1.0, 1.0).unwrap(),
            0.5,
        )
        .unwrap()]];
        attach_embeddings("0 0 1 0 0\n", p(), &mut frames).unwrap();
        assert_eq!(
            frames[0][0].embedding.as_deref(),
            Some(&[1.0, 0.0, 0.0][..])
        );
        assert!(attach_embeddings("0 9 1\n", p(), &mut frames).is_err());
    }
}
