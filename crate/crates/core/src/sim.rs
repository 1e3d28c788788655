//! Deterministic synthetic scenarios with injected detection faults.
//!
//! Random draws come from ChaCha8 seeded with [`FaultSpec::seed`]. ChaCha8
//! is a fixed, platform-independent stream cipher, so a seed reproduces a
//! scenario bit for bit everywhere. Each object-frame consumes the same
//! number of draws whatever the probabilities are.
//!
//! Objects move with piecewise-constant velocity: each keeps its own angular
//! sector of the field of view and a depth band, and reflects off their
//! edges. With `boundary_exit` the lateral edges are open and objects leave
//! the image; their ground truth ends when the projection vanishes.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::affinity::OracleProvider;
use crate::error::{Error, Result};
use crate::eval::{LabeledBox, Trajectories};
use crate::geometry::{iou_2d, project_box_3d};
use crate::io::{at_file_precision, at_file_precision_2d, at_file_precision_3d};
use crate::types::{BBox2D, BBox3D, Calibration, Detection, Stream, TrackerConfig};

const CAMERA_HEIGHT: f64 = 1.65;
const Z_NEAR: f64 = 15.0;
const Z_FAR: f64 = 45.0;
/// Horizontal image margin kept clear by non-exiting objects, in pixels.
const SIDE_MARGIN_PX: f64 = 60.0;
const FALSE_MAX_IOU: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub p_miss_cam: f64,
    pub p_miss_lidar: f64,
    pub p_miss_both: f64,
    /// Expected false detections per frame.
    pub p_false_cam: f64,
    pub p_false_lidar: f64,
    pub pos_noise_px: f64,
    pub pos_noise_m: f64,
    pub boundary_exit: bool,
    pub seed: u64,
}

impl FaultSpec {
    /// No faults, no noise.
    pub fn clean(seed: u64) -> Self {
        FaultSpec {
            p_miss_cam: 0.0,
            p_miss_lidar: 0.0,
            p_miss_both: 0.0,
            p_false_cam: 0.0,
            p_false_lidar: 0.0,
            pos_noise_px: 0.0,
            pos_noise_m: 0.0,
            boundary_exit: false,
            seed,
        }
    }

    /// The fault-rich mix used by the ablation suite.
    pub fn fault_suite(seed: u64) -> Self {
        FaultSpec {
            p_miss_cam: 0.1,
            p_miss_lidar: 0.1,
            p_miss_both: 0.03,
            p_false_cam: 0.05,
            p_false_lidar: 0.05,
            pos_noise_px: 1.0,
            pos_noise_m: 0.05,
            boundary_exit: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("p_miss_cam", self.p_miss_cam),
            ("p_miss_lidar", self.p_miss_lidar),
            ("p_miss_both", self.p_miss_both),
        ];
        for (name, v) in unit {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::config(name, format!("{v} is not a probability")));
            }
        }
        let non_neg = [
            ("p_false_cam", self.p_false_cam),
            ("p_false_lidar", self.p_false_lidar),
            ("pos_noise_px", self.pos_noise_px),
            ("pos_noise_m", self.pos_noise_m),
        ];
        for (name, v) in non_neg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("{v} must be non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaultKind {
    MissCamera,
    MissLidar,
    MissBoth,
    FalseCamera,
    FalseLidar,
}

impl FaultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::MissCamera => "miss_camera",
            FaultKind::MissLidar => "miss_lidar",
            FaultKind::MissBoth => "miss_both",
            FaultKind::FalseCamera => "false_camera",
            FaultKind::FalseLidar => "false_lidar",
        }
    }

    /// Whether this fault removes a detection from `stream`.
    pub fn misses(self, stream: Stream) -> bool {
        matches!(
            (self, stream),
            (FaultKind::MissBoth, _)
                | (FaultKind::MissCamera, Stream::Camera)
                | (FaultKind::MissLidar, Stream::Lidar)
        )
    }
}

impl FromStr for FaultKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "miss_camera" => FaultKind::MissCamera,
            "miss_lidar" => FaultKind::MissLidar,
            "miss_both" => FaultKind::MissBoth,
            "false_camera" => FaultKind::FalseCamera,
            "false_lidar" => FaultKind::FalseLidar,
            other => return Err(format!("unknown fault kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultRecord {
    pub frame: usize,
    /// `None` for false detections.
    pub gt_id: Option<u64>,
    pub kind: FaultKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtTrack {
    pub gt_id: u64,
    /// Box per frame, `None` while the object is absent.
    pub boxes: Vec<Option<BBox3D>>,
}

/// The object and frames a scripted case is about.
#[derive(Debug, Clone, PartialEq)]
pub struct Focus {
    pub gt_id: u64,
    pub frames: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub calib: Calibration,
    pub n_frames: usize,
    pub gt_tracks: Vec<GtTrack>,
    pub camera_dets: Vec<Vec<Detection>>,
    pub lidar_dets: Vec<Vec<Detection>>,
    /// Ground-truth id of each detection, parallel to the detection lists;
    /// `None` marks a false detection.
    pub camera_labels: Vec<Vec<Option<u64>>>,
    pub lidar_labels: Vec<Vec<Option<u64>>>,
    pub fault_log: Vec<FaultRecord>,
    pub focus: Option<Focus>,
}

impl Scenario {
    fn empty(calib: Calibration, n_frames: usize) -> Self {
        Scenario {
            calib,
            n_frames,
            gt_tracks: Vec::new(),
            camera_dets: vec![Vec::new(); n_frames],
            lidar_dets: vec![Vec::new(); n_frames],
            camera_labels: vec![Vec::new(); n_frames],
            lidar_labels: vec![Vec::new(); n_frames],
            fault_log: Vec::new(),
            focus: None,
        }
    }

    /// Ground truth in the image plane, for evaluation.
    pub fn gt_trajectories(&self) -> Trajectories {
        (0..self.n_frames)
            .map(|f| {
                self.gt_tracks
                    .iter()
                    .filter_map(|g| {
                        let b = g.boxes[f]?;
                        let bbox = project_box_3d(&b, &self.calib).ok()?;
                        Some(LabeledBox { id: g.gt_id, bbox })
                    })
                    .collect()
            })
            .collect()
    }

    pub fn visible_gt_boxes(&self) -> usize {
        self.gt_trajectories().iter().map(Vec::len).sum()
    }

    pub fn oracle_provider(&self) -> OracleProvider {
        let mut o = OracleProvider::new();
        for (dets, labels) in self
            .camera_dets
            .iter()
            .zip(&self.camera_labels)
            .chain(self.lidar_dets.iter().zip(&self.lidar_labels))
        {
            for (d, l) in dets.iter().zip(labels) {
                if let Some(gt) = l {
                    o.insert(d.stream, d.det_id, *gt);
                }
            }
        }
        o
    }
}

struct Mover {
    gt_id: u64,
    pos: [f64; 3],
    vel: [f64; 2],
    dims: [f64; 3],
    yaw: f64,
    sector: Range<f64>,
    gone: bool,
}

impl Mover {
    fn bbox(&self) -> BBox3D {
        BBox3D {
            x: self.pos[0],
            y: self.pos[1],
            z: self.pos[2],
            l: self.dims[0],
            w: self.dims[1],
            h: self.dims[2],
            yaw: self.yaw,
        }
    }

    fn lateral_half_extent(&self) -> f64 {
        let (s, c) = self.yaw.sin_cos();
        0.5 * (self.dims[0] * c.abs() + self.dims[1] * s.abs())
    }

    /// Horizontal angle range covered by the box at depth `z` and lateral `x`.
    fn angles(&self, x: f64, z: f64) -> (f64, f64) {
        let e = self.lateral_half_extent();
        let near = (z - self.dims[0].max(self.dims[1]) * 0.5).max(1.0);
        (
            (x - e).atan2(near).min((x - e).atan2(z)),
            (x + e).atan2(near).max((x + e).atan2(z)),
        )
    }

    fn step(&mut self, open_sides: bool) {
        let [x, _, z] = self.pos;
        let mut nz = z + self.vel[1];
        if !(Z_NEAR..=Z_FAR).contains(&nz) {
            self.vel[1] = -self.vel[1];
            nz = z + self.vel[1];
        }
        let mut nx = x + self.vel[0];
        if !open_sides {
            let inside = |m: &Mover, x: f64| {
                let (lo, hi) = m.angles(x, nz);
                lo >= m.sector.start && hi <= m.sector.end
            };
            if !inside(self, nx) {
                self.vel[0] = -self.vel[0];
                nx = x + self.vel[0];
                if !inside(self, nx) {
                    // depth change narrowed the sector; slide back toward its center
                    let mid = 0.5 * (self.sector.start + self.sector.end);
                    nx = nz * mid.tan();
                }
            }
        }
        self.pos[0] = nx;
        self.pos[2] = nz;
    }
}

fn image_angle_range(calib: &Calibration) -> (f64, f64) {
    let p = &calib.projection;
    let (fx, cx) = (p[(0, 0)], p[(0, 2)]);
    (
        ((SIDE_MARGIN_PX - cx) / fx).atan(),
        ((calib.image_width - SIDE_MARGIN_PX - cx) / fx).atan(),
    )
}

fn noisy_camera_box(b: &BBox2D, noise: &[f64; 4], calib: &Calibration) -> BBox2D {
    let mut l = b.left + noise[0];
    let mut t = b.top + noise[1];
    let mut r = b.right + noise[2];
    let mut bt = b.bottom + noise[3];
    l = l.clamp(0.0, calib.image_width - 1.0);
    t = t.clamp(0.0, calib.image_height - 1.0);
    r = r.clamp(l + 1.0, calib.image_width);
    bt = bt.clamp(t + 1.0, calib.image_height);
    BBox2D {
        left: l,
        top: t,
        right: r,
        bottom: bt,
    }
}

/// Random scene with `n_objects` cars over `n_frames` frames.
pub fn generate(n_objects: usize, n_frames: usize, spec: &FaultSpec) -> Result<Scenario> {
    spec.validate()?;
    if n_objects < 1 || n_frames < 2 {
        return Err(Error::InfeasibleScene(format!(
            "need at least one object and two frames, got {n_objects} and {n_frames}"
        )));
    }
    let calib = Calibration::kitti_default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (a_lo, a_hi) = image_angle_range(&calib);
    let width = (a_hi - a_lo) / n_objects as f64;

    let mut movers = Vec::with_capacity(n_objects);
    for k in 0..n_objects {
        let dims = [
            rng.gen_range(3.6..4.6),
            rng.gen_range(1.5..1.8),
            rng.gen_range(1.4..1.6),
        ];
        let yaw = std::f64::consts::FRAC_PI_2 + rng.gen_range(-0.05..0.05);
        let sector = (a_lo + k as f64 * width)..(a_lo + (k + 1) as f64 * width);
        let z: f64 = rng.gen_range(Z_NEAR + 2.0..Z_FAR - 2.0);
        let speed_x = if spec.boundary_exit {
            rng.gen_range(0.2..0.5)
        } else {
            rng.gen_range(0.02..0.15)
        };
        let vx = if rng.gen_bool(0.5) { speed_x } else { -speed_x };
        let vz = rng.gen_range(-0.4..0.4);
        let mut m = Mover {
            gt_id: k as u64,
            pos: [0.0, CAMERA_HEIGHT - 0.5 * dims[2], z],
            vel: [vx, vz],
            dims,
            yaw,
            sector: sector.clone(),
            gone: false,
        };
        // the object must fit its sector at the nearest depth it can reach
        let (lo, hi) = m.angles(0.0, Z_NEAR);
        if hi - lo >= 0.8 * width {
            return Err(Error::InfeasibleScene(format!(
                "{n_objects} objects do not fit side by side in the field of view"
            )));
        }
        let mid = 0.5 * (sector.start + sector.end);
        m.pos[0] = z * mid.tan();
        movers.push(m);
    }

    let mut sc = Scenario::empty(calib.clone(), n_frames);
    sc.gt_tracks = movers
        .iter()
        .map(|m| GtTrack {
            gt_id: m.gt_id,
            boxes: vec![None; n_frames],
        })
        .collect();

    let px = Normal::new(0.0, spec.pos_noise_px.max(0.0)).expect("finite std");
    let metric = Normal::new(0.0, spec.pos_noise_m.max(0.0)).expect("finite std");
    let false_cam =
        (spec.p_false_cam > 0.0).then(|| Poisson::new(spec.p_false_cam).expect("positive rate"));
    let false_lid = (spec.p_false_lidar > 0.0)
        .then(|| Poisson::new(spec.p_false_lidar).expect("positive rate"));
    let (mut cam_id, mut lid_id) = (0u64, 0u64);

    for f in 0..n_frames {
        if f > 0 {
            for m in movers.iter_mut().filter(|m| !m.gone) {
                m.step(spec.boundary_exit);
            }
        }
        let mut gt_2d = Vec::new();
        for (k, m) in movers.iter_mut().enumerate() {
            let u_both: f64 = rng.gen();
            let u_cam: f64 = rng.gen();
            let u_lid: f64 = rng.gen();
            let cam_noise = [
                px.sample(&mut rng),
                px.sample(&mut rng),
                px.sample(&mut rng),
                px.sample(&mut rng),
            ];
            let lid_noise = [
                metric.sample(&mut rng),
                metric.sample(&mut rng),
                metric.sample(&mut rng),
            ];
            let s_cam = at_file_precision(rng.gen_range(0.6..1.0));
            let s_lid = at_file_precision(rng.gen_range(0.6..1.0));
            if m.gone {
                continue;
            }
            let b3 = m.bbox();
            let Ok(b2) = project_box_3d(&b3, &calib) else {
                m.gone = true;
                continue;
            };
            sc.gt_tracks[k].boxes[f] = Some(b3);
            gt_2d.push(b2);

            let both = u_both < spec.p_miss_both;
            let cam_miss = !both && u_cam < spec.p_miss_cam;
            let lid_miss = !both && u_lid < spec.p_miss_lidar;
            let gt = Some(m.gt_id);
            if both {
                sc.fault_log.push(FaultRecord {
                    frame: f,
                    gt_id: gt,
                    kind: FaultKind::MissBoth,
                });
            }
            if cam_miss {
                sc.fault_log.push(FaultRecord {
                    frame: f,
                    gt_id: gt,
                    kind: FaultKind::MissCamera,
                });
            }
            if lid_miss {
                sc.fault_log.push(FaultRecord {
                    frame: f,
                    gt_id: gt,
                    kind: FaultKind::MissLidar,
                });
            }
            if !both && !cam_miss {
                let b = at_file_precision_2d(&noisy_camera_box(&b2, &cam_noise, &calib));
                sc.camera_dets[f].push(Detection::camera(f, cam_id, b, s_cam)?);
                sc.camera_labels[f].push(gt);
                cam_id += 1;
            }
            if !both && !lid_miss {
                let b = at_file_precision_3d(&BBox3D {
                    x: b3.x + lid_noise[0],
                    y: b3.y + lid_noise[1],
                    z: b3.z + lid_noise[2],
                    ..b3
                });
                sc.lidar_dets[f].push(Detection::lidar(f, lid_id, b, s_lid)?);
                sc.lidar_labels[f].push(gt);
                lid_id += 1;
            }
        }

        let n_cam = false_cam
            .as_ref()
            .map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_cam {
            if let Some(b) =
                place_false_camera(&mut rng, &calib, &gt_2d).map(|b| at_file_precision_2d(&b))
            {
                let s = at_file_precision(rng.gen_range(0.5..0.9));
                sc.camera_dets[f].push(Detection::camera(f, cam_id, b, s)?);
                sc.camera_labels[f].push(None);
                sc.fault_log.push(FaultRecord {
                    frame: f,
                    gt_id: None,
                    kind: FaultKind::FalseCamera,
                });
                cam_id += 1;
            }
        }
        let n_lid = false_lid
            .as_ref()
            .map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_lid {
            if let Some(b) =
                place_false_lidar(&mut rng, &calib, &gt_2d).map(|b| at_file_precision_3d(&b))
            {
                let s = at_file_precision(rng.gen_range(0.5..0.9));
                sc.lidar_dets[f].push(Detection::lidar(f, lid_id, b, s)?);
                sc.lidar_labels[f].push(None);
                sc.fault_log.push(FaultRecord {
                    frame: f,
                    gt_id: None,
                    kind: FaultKind::FalseLidar,
                });
                lid_id += 1;
            }
        }
    }
    Ok(sc)
}

fn clear_of(b: &BBox2D, gt: &[BBox2D]) -> bool {
    gt.iter().all(|g| iou_2d(b, g) <= FALSE_MAX_IOU)
}

fn place_false_camera(rng: &mut ChaCha8Rng, calib: &Calibration, gt: &[BBox2D]) -> Option<BBox2D> {
    for _ in 0..20 {
        let w = rng.gen_range(30.0..120.0);
        let h = rng.gen_range(25.0..90.0);
        let l = rng.gen_range(0.0..calib.image_width - w);
        let t = rng.gen_range(0.0..calib.image_height - h);
        let b = BBox2D {
            left: l,
            top: t,
            right: l + w,
            bottom: t + h,
        };
        if clear_of(&b, gt) {
            return Some(b);
        }
    }
    None
}

fn place_false_lidar(rng: &mut ChaCha8Rng, calib: &Calibration, gt: &[BBox2D]) -> Option<BBox3D> {
    let (a_lo, a_hi) = image_angle_range(calib);
    for _ in 0..20 {
        let z: f64 = rng.gen_range(Z_NEAR..Z_FAR);
        let a: f64 = rng.gen_range(a_lo..a_hi);
        let h = rng.gen_range(1.4..1.6);
        let b = BBox3D {
            x: z * a.tan(),
            y: CAMERA_HEIGHT - 0.5 * h,
            z,
            l: rng.gen_range(3.6..4.6),
            w: rng.gen_range(1.5..1.8),
            h,
            yaw: std::f64::consts::FRAC_PI_2,
        };
        if let Ok(p) = project_box_3d(&b, calib) {
            if clear_of(&p, gt) {
                return Some(b);
            }
        }
    }
    None
}

/// Hand-scripted single-object scenarios, one per cross-correction case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScriptedCase {
    /// LiDAR first sees the object two frames after the camera.
    A,
    /// The object appears in both streams at once.
    B,
    /// Camera misses the object for a short gap.
    C,
    /// LiDAR misses the object for a short gap.
    D,
    /// Both streams miss the object for one frame, mid-image.
    E,
    /// Both streams miss the object for one frame at the image border.
    Boundary,
}

impl ScriptedCase {
    pub const ALL: [ScriptedCase; 6] = [
        ScriptedCase::A,
        ScriptedCase::B,
        ScriptedCase::C,
        ScriptedCase::D,
        ScriptedCase::E,
        ScriptedCase::Boundary,
    ];
}

impl fmt::Display for ScriptedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScriptedCase::A => "a",
            ScriptedCase::B => "b",
            ScriptedCase::C => "c",
            ScriptedCase::D => "d",
            ScriptedCase::E => "e",
            ScriptedCase::Boundary => "boundary",
        })
    }
}

impl FromStr for ScriptedCase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "a" => ScriptedCase::A,
            "b" => ScriptedCase::B,
            "c" => ScriptedCase::C,
            "d" => ScriptedCase::D,
            "e" => ScriptedCase::E,
            "boundary" => ScriptedCase::Boundary,
            other => return Err(format!("unknown scripted case `{other}`")),
        })
    }
}

pub const SCRIPTED_FRAMES: usize = 14;

/// Minimal noise-free scenario for one case. Gaps start once both tracks
/// have `theta_hits` observations and last at most `max_age_n` frames.
pub fn scripted_case(case: ScriptedCase, cfg: &TrackerConfig) -> Scenario {
    let calib = Calibration::kitti_default();
    let n = SCRIPTED_FRAMES;
    let dims = [4.2, 1.7, 1.5];
    let y = CAMERA_HEIGHT - 0.5 * dims[2];
    let yaw = std::f64::consts::FRAC_PI_2;
    let gap_start = (cfg.theta_hits as usize + 3).max(6);
    let gap = |len: usize| gap_start..gap_start + len.min(cfg.max_age_n as usize).max(1);

    // start position and per-frame velocity
    let (start, vel) = match case {
        ScriptedCase::Boundary => {
            // center about 30 px from the left border, drifting outward
            let p = &calib.projection;
            let z = 20.0;
            let x = (30.0 - p[(0, 2)]) * z / p[(0, 0)];
            ([x, y, z], [-0.02, 0.05])
        }
        _ => ([-2.0, y, 20.0], [0.1, 0.15]),
    };

    let (present, cam_missing, lid_missing, focus): (
        Range<usize>,
        Range<usize>,
        Range<usize>,
        Range<usize>,
    ) = match case {
        ScriptedCase::A => (0..n, 0..0, 0..2, 2..3),
        ScriptedCase::B => (3..n, 0..0, 0..0, 3..4),
        ScriptedCase::C => (0..n, gap(2), 0..0, gap(2)),
        ScriptedCase::D => (0..n, 0..0, gap(2), gap(2)),
        ScriptedCase::E | ScriptedCase::Boundary => (0..n, gap(1), gap(1), gap(1)),
    };

    let mut sc = Scenario::empty(calib.clone(), n);
    let mut boxes = vec![None; n];
    let (mut cam_id, mut lid_id) = (0u64, 0u64);
    for f in present.clone() {
        let k = (f - present.start) as f64;
        let b3 = BBox3D {
            x: start[0] + vel[0] * k,
            y: start[1],
            z: start[2] + vel[1] * k,
            l: dims[0],
            w: dims[1],
            h: dims[2],
            yaw,
        };
        boxes[f] = Some(b3);
        let b2 = project_box_3d(&b3, &calib).expect("scripted object is in view");
        let (cm, lm) = (cam_missing.contains(&f), lid_missing.contains(&f));
        match (cm, lm) {
            (true, true) => sc.fault_log.push(FaultRecord {
                frame: f,
                gt_id: Some(0),
                kind: FaultKind::MissBoth,
            }),
            (true, false) => sc.fault_log.push(FaultRecord {
                frame: f,
                gt_id: Some(0),
                kind: FaultKind::MissCamera,
            }),
            (false, true) => sc.fault_log.push(FaultRecord {
                frame: f,
                gt_id: Some(0),
                kind: FaultKind::MissLidar,
            }),
            _ => {}
        }
        if !cm {
            let b = at_file_precision_2d(&b2);
            sc.camera_dets[f].push(Detection::camera(f, cam_id, b, 0.9).expect("valid box"));
            sc.camera_labels[f].push(Some(0));
            cam_id += 1;
        }
        if !lm {
            let b = at_file_precision_3d(&b3);
            sc.lidar_dets[f].push(Detection::lidar(f, lid_id, b, 0.9).expect("valid box"));
            sc.lidar_labels[f].push(Some(0));
            lid_id += 1;
        }
    }
    sc.gt_tracks.push(GtTrack { gt_id: 0, boxes });
    sc.focus = Some(Focus {
        gt_id: 0,
        frames: focus,
    });
    sc
}
