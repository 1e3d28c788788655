//! Two-stage camera/LiDAR tracking.
//!
//! Stage one runs an independent tracking-by-detection step per stream and
//! sorts every track into matched trajectories (`T`), unmatched detections
//! (`UD`) and unmatched trajectories (`UT`). Stage two cross-corrects the
//! streams in three steps:
//!
//! * step 1 promotes new LiDAR detections confirmed by a tracked camera
//!   object (case a) or by a new camera detection (case b);
//! * step 2 bridges single-stream misses: a LiDAR trajectory backed by a
//!   tracked camera object (case d) and a camera trajectory backed by a
//!   tracked LiDAR object (case c);
//! * step 3 bridges simultaneous misses in both streams away from the image
//!   border (case e).
//!
//! Every track is predicted to the current frame exactly once, inside the
//! stage-one step. A correction commits that prediction as the new state
//! without a measurement update.
//!
//! `hits` counts consecutive frames with a real or corrected observation. A
//! trajectory that misses a frame keeps its count through the refinement
//! steps (the `theta_hits` gates read it) and drops to 0 when the frame
//! closes without a correction.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::affinity::{sgc_matrix, similarity_matrix, total_cost, PriorBox, SimilarityProvider};
use crate::association::{greedy_match, greedy_match_iou};
use crate::error::{Error, Result};
use crate::geometry::{at_image_boundary, iou_2d, project_box_3d};
use crate::motion::{MotionState, StateBox};
use crate::types::{BBox2D, BBox3D, Calibration, Detection, Stream, TrackerConfig};

pub type TrackId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Matched,
    UnmatchedDetection,
    UnmatchedTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: TrackId,
    pub stream: Stream,
    pub kf: MotionState,
    pub hits: u32,
    pub time_since_update: u32,
    /// Consecutive frames without a detection in the track's own stream;
    /// corrections do not reset it.
    pub unobserved: u32,
    /// Most recent real observation; represents the track for similarity scoring.
    pub last_detection: Detection,
    /// Partner track in the other stream for the current frame.
    pub link_id: Option<TrackId>,
    pub status: TrackStatus,
    pub birth_frame: usize,
}

impl Track {
    fn from_detection(track_id: TrackId, det: &Detection) -> Result<Self> {
        Ok(Track {
            track_id,
            stream: det.stream,
            kf: MotionState::init(det)?,
            hits: 1,
            time_since_update: 0,
            unobserved: 0,
            last_detection: det.clone(),
            link_id: None,
            status: TrackStatus::UnmatchedDetection,
            birth_frame: det.frame,
        })
    }

    pub fn prior_box(&self) -> PriorBox {
        match self.kf.bbox() {
            Ok(StateBox::Image(b)) => PriorBox::Image(b),
            Ok(StateBox::Space(b)) => PriorBox::Space(b),
            Err(_) => PriorBox::Unavailable,
        }
    }

    pub fn space_box(&self) -> Option<BBox3D> {
        match self.kf.bbox() {
            Ok(StateBox::Space(b)) => Some(b),
            _ => None,
        }
    }

    /// Current image-plane box: the filter box for camera tracks, the
    /// projected filter box for LiDAR tracks.
    pub fn image_box(&self, calib: &Calibration) -> Option<BBox2D> {
        match self.kf.bbox().ok()? {
            StateBox::Image(b) => Some(b),
            StateBox::Space(b) => project_box_3d(&b, calib).ok(),
        }
    }

    fn commit_prediction(&mut self) {
        self.hits += 1;
        self.time_since_update = 0;
        self.status = TrackStatus::Matched;
    }
}

/// Per-stream track sets, each kept sorted by track id.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamState {
    pub stream: Stream,
    pub matched: Vec<Track>,
    pub unmatched_dets: Vec<Track>,
    pub unmatched_trajs: Vec<Track>,
    pub next_frame: usize,
    next_track_id: TrackId,
}

impl StreamState {
    pub fn new(stream: Stream) -> Self {
        StreamState {
            stream,
            matched: Vec::new(),
            unmatched_dets: Vec::new(),
            unmatched_trajs: Vec::new(),
            next_frame: 0,
            next_track_id: 0,
        }
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.matched
            .iter()
            .chain(&self.unmatched_dets)
            .chain(&self.unmatched_trajs)
    }

    fn tracks_mut(&mut self) -> impl Iterator<Item = &mut Track> {
        self.matched
            .iter_mut()
            .chain(self.unmatched_dets.iter_mut())
            .chain(self.unmatched_trajs.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.matched.len() + self.unmatched_dets.len() + self.unmatched_trajs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks().find(|t| t.track_id == id)
    }

    fn get_mut(&mut self, id: TrackId) -> Option<&mut Track> {
        self.tracks_mut().find(|t| t.track_id == id)
    }

    fn sort_sets(&mut self) {
        self.matched.sort_by_key(|t| t.track_id);
        self.unmatched_dets.sort_by_key(|t| t.track_id);
        self.unmatched_trajs.sort_by_key(|t| t.track_id);
    }

    /// Set partition, id uniqueness, stream and status consistency.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut ids: Vec<TrackId> = self.tracks().map(|t| t.track_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("{} track ids are not unique", self.stream));
        }
        let sets = [
            (&self.matched, TrackStatus::Matched),
            (&self.unmatched_dets, TrackStatus::UnmatchedDetection),
            (&self.unmatched_trajs, TrackStatus::UnmatchedTrajectory),
        ];
        for (set, status) in sets {
            for t in set {
                if t.stream != self.stream {
                    return Err(format!("track {} is in the wrong stream", t.track_id));
                }
                if t.status != status {
                    return Err(format!(
                        "track {} has status {:?} in the {status:?} set",
                        t.track_id, t.status
                    ));
                }
                if status == TrackStatus::Matched && t.time_since_update != 0 {
                    return Err(format!("matched track {} has a pending gap", t.track_id));
                }
                if status != TrackStatus::UnmatchedTrajectory && t.hits < 1 {
                    return Err(format!("track {} has no hits", t.track_id));
                }
            }
        }
        Ok(())
    }

    fn take_from(set: &mut Vec<Track>, ids: &[TrackId]) -> Vec<Track> {
        let (taken, kept): (Vec<Track>, Vec<Track>) =
            set.drain(..).partition(|t| ids.contains(&t.track_id));
        *set = kept;
        taken
    }
}

/// Checks that every link names a live track in the other stream which links back.
pub fn check_links(lidar: &StreamState, camera: &StreamState) -> std::result::Result<(), String> {
    for (a, b) in [(lidar, camera), (camera, lidar)] {
        for t in a.tracks() {
            if let Some(p) = t.link_id {
                match b.get(p) {
                    Some(partner) if partner.link_id == Some(t.track_id) => {}
                    Some(_) => {
                        return Err(format!(
                            "{} track {} link is not mutual",
                            a.stream, t.track_id
                        ))
                    }
                    None => {
                        return Err(format!(
                            "{} track {} links to a dead track",
                            a.stream, t.track_id
                        ))
                    }
                }
            }
        }
    }
    Ok(())
}

/// Enabled cross-correction cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CaseMask(u8);

impl CaseMask {
    /// New LiDAR detection confirmed by a tracked camera object.
    pub const A: CaseMask = CaseMask(1);
    /// New object in both streams.
    pub const B: CaseMask = CaseMask(1 << 1);
    /// Camera miss bridged by a tracked LiDAR object.
    pub const C: CaseMask = CaseMask(1 << 2);
    /// LiDAR miss bridged by a tracked camera object.
    pub const D: CaseMask = CaseMask(1 << 3);
    /// Simultaneous miss in both streams.
    pub const E: CaseMask = CaseMask(1 << 4);
    pub const NONE: CaseMask = CaseMask(0);
    pub const ALL: CaseMask = CaseMask(0b11111);

    /// Bits 0..=4 enable cases a..=e; higher bits are ignored.
    pub fn from_bits(bits: u8) -> CaseMask {
        CaseMask(bits & CaseMask::ALL.0)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, other: CaseMask) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: CaseMask) -> CaseMask {
        CaseMask(self.0 | other.0)
    }

    pub fn without(self, other: CaseMask) -> CaseMask {
        CaseMask(self.0 & !other.0)
    }

    /// `a`, `ab`, `abc`, `abcd`, `abcde`.
    pub fn prefixes() -> [CaseMask; 5] {
        let mut out = [CaseMask::NONE; 5];
        let mut acc = CaseMask::NONE;
        for (k, c) in [
            CaseMask::A,
            CaseMask::B,
            CaseMask::C,
            CaseMask::D,
            CaseMask::E,
        ]
        .into_iter()
        .enumerate()
        {
            acc = acc.union(c);
            out[k] = acc;
        }
        out
    }
}

impl fmt::Display for CaseMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("none");
        }
        for (k, ch) in ['a', 'b', 'c', 'd', 'e'].iter().enumerate() {
            if self.0 & (1 << k) != 0 {
                write!(f, "{ch}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for CaseMask {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") || s.is_empty() {
            return Ok(CaseMask::NONE);
        }
        if s.eq_ignore_ascii_case("all") {
            return Ok(CaseMask::ALL);
        }
        let mut m = 0u8;
        for ch in s.chars() {
            let k = match ch.to_ascii_lowercase() {
                'a' => 0,
                'b' => 1,
                'c' => 2,
                'd' => 3,
                'e' => 4,
                other => return Err(format!("unknown case `{other}` in `{s}`")),
            };
            m |= 1 << k;
        }
        Ok(CaseMask(m))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputMode {
    /// LiDAR trajectories confirmed by any camera-side set.
    Fused,
    /// Single-stream LiDAR tracker; the camera stream is ignored.
    LidarOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PipelineMode {
    pub cases: CaseMask,
    pub output: OutputMode,
}

impl PipelineMode {
    pub fn full() -> Self {
        PipelineMode {
            cases: CaseMask::ALL,
            output: OutputMode::Fused,
        }
    }

    pub fn lidar_baseline() -> Self {
        PipelineMode {
            cases: CaseMask::NONE,
            output: OutputMode::LidarOnly,
        }
    }

    pub fn fused(cases: CaseMask) -> Self {
        PipelineMode {
            cases,
            output: OutputMode::Fused,
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.output {
            OutputMode::LidarOnly => f.write_str("lidar"),
            OutputMode::Fused => write!(f, "{}", self.cases),
        }
    }
}

impl FromStr for PipelineMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "lidar" | "baseline" => Ok(PipelineMode::lidar_baseline()),
            other => Ok(PipelineMode::fused(other.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputEntry {
    pub track_id: TrackId,
    pub box3d: BBox3D,
    pub box2d: BBox2D,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFrame {
    pub frame: usize,
    pub entries: Vec<OutputEntry>,
}

/// Stage one for a single stream: associate this frame's detections with
/// every prior track and re-sort the three sets.
pub fn ctg_step(
    state: &mut StreamState,
    dets: &[Detection],
    provider: &dyn SimilarityProvider,
    cfg: &TrackerConfig,
) -> Result<()> {
    for d in dets {
        if d.stream != state.stream {
            return Err(Error::InvalidDetection(format!(
                "{} detection {} fed to the {} stream",
                d.stream, d.det_id, state.stream
            )));
        }
        if d.frame != state.next_frame {
            return Err(Error::FrameOrderViolation {
                stream: state.stream,
                expected: state.next_frame,
                got: d.frame,
            });
        }
        d.validate()?;
    }
    let frame = state.next_frame;

    let mut dets: Vec<Detection> = dets.to_vec();
    dets.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.det_id.cmp(&b.det_id))
    });

    let mut prior: Vec<Track> = Vec::with_capacity(state.len());
    prior.append(&mut state.matched);
    prior.append(&mut state.unmatched_dets);
    prior.append(&mut state.unmatched_trajs);
    for t in &mut prior {
        t.kf = t.kf.predict();
    }

    let boxes: Vec<PriorBox> = prior.iter().map(Track::prior_box).collect();
    let reps: Vec<&Detection> = prior.iter().map(|t| &t.last_detection).collect();
    let s = similarity_matrix(provider, &reps, &dets)?;
    let g = sgc_matrix(&boxes, &dets, state.stream)?;
    let c = total_cost(&s, &g, cfg, state.stream)?;
    let assignment = greedy_match(&c, cfg.sentinel);

    let mut slots: Vec<Option<Track>> = prior.into_iter().map(Some).collect();
    for &(i, j, _) in &assignment.matches {
        let mut t = slots[i].take().expect("rows are matched once");
        let d = &dets[j];
        t.kf = t.kf.update(d)?;
        t.hits += 1;
        t.time_since_update = 0;
        t.unobserved = 0;
        t.last_detection = d.clone();
        t.status = TrackStatus::Matched;
        state.matched.push(t);
    }
    for t in slots.into_iter().flatten() {
        let mut t = t;
        t.time_since_update += 1;
        t.unobserved += 1;
        t.status = TrackStatus::UnmatchedTrajectory;
        state.unmatched_trajs.push(t);
    }
    for &j in &assignment.unmatched_cols {
        let id = state.next_track_id;
        state.next_track_id += 1;
        state
            .unmatched_dets
            .push(Track::from_detection(id, &dets[j])?);
    }
    state.next_frame = frame + 1;
    state.sort_sets();
    Ok(())
}

fn link(lidar: &mut StreamState, lid: TrackId, camera: &mut StreamState, cid: TrackId) {
    if let Some(t) = lidar.get_mut(lid) {
        t.link_id = Some(cid);
    }
    if let Some(t) = camera.get_mut(cid) {
        t.link_id = Some(lid);
    }
}

fn boxes_of<'a>(
    tracks: impl Iterator<Item = &'a Track>,
    calib: &Calibration,
) -> (Vec<TrackId>, Vec<BBox2D>) {
    tracks
        .filter_map(|t| t.image_box(calib).map(|b| (t.track_id, b)))
        .unzip()
}

fn iou_pairs(
    rows: (Vec<TrackId>, Vec<BBox2D>),
    cols: (Vec<TrackId>, Vec<BBox2D>),
    theta_iou: f64,
) -> Vec<(TrackId, TrackId)> {
    greedy_match_iou(&rows.1, &cols.1, theta_iou)
        .matches
        .iter()
        .map(|&(i, j, _)| (rows.0[i], cols.0[j]))
        .collect()
}

/// Links `T^l` and `T^c` by image-plane IoU. Links from the previous frame
/// survive when both ends are still matched and still overlap enough; the
/// rest are re-matched greedily. Returns `(lidar_id, camera_id)` pairs.
pub fn tr_prematch(
    lidar: &mut StreamState,
    camera: &mut StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
) -> Vec<(TrackId, TrackId)> {
    let previous: Vec<(TrackId, TrackId)> = lidar
        .matched
        .iter()
        .filter_map(|t| t.link_id.map(|c| (t.track_id, c)))
        .collect();
    for t in lidar.tracks_mut().chain(camera.tracks_mut()) {
        t.link_id = None;
    }

    let mut pairs = Vec::new();
    for (lid, cid) in previous {
        let Some(lt) = lidar.matched.iter().find(|t| t.track_id == lid) else {
            continue;
        };
        let Some(ct) = camera.matched.iter().find(|t| t.track_id == cid) else {
            continue;
        };
        if let (Some(a), Some(b)) = (lt.image_box(calib), ct.image_box(calib)) {
            if iou_2d(&a, &b) >= cfg.theta_iou {
                pairs.push((lid, cid));
            }
        }
    }
    for &(l, c) in &pairs {
        link(lidar, l, camera, c);
    }

    let rows = boxes_of(lidar.matched.iter().filter(|t| t.link_id.is_none()), calib);
    let cols = boxes_of(camera.matched.iter().filter(|t| t.link_id.is_none()), calib);
    for (l, c) in iou_pairs(rows, cols, cfg.theta_iou) {
        link(lidar, l, camera, c);
        pairs.push((l, c));
    }
    pairs.sort_unstable();
    pairs
}

fn promote(state: &mut StreamState, from_trajs: bool, ids: &[TrackId], commit: bool) {
    let set = if from_trajs {
        &mut state.unmatched_trajs
    } else {
        &mut state.unmatched_dets
    };
    for mut t in StreamState::take_from(set, ids) {
        if commit {
            t.commit_prediction();
        } else {
            t.status = TrackStatus::Matched;
        }
        state.matched.push(t);
    }
    state.sort_sets();
}

/// Drops `UD` tracks (when `dets`) or `UT` tracks (otherwise) whose gap has
/// reached `max_age_n`, clearing the partner's link.
fn age_out(state: &mut StreamState, other: &mut StreamState, dets: bool, cfg: &TrackerConfig) {
    let set = if dets {
        &mut state.unmatched_dets
    } else {
        &mut state.unmatched_trajs
    };
    let mut dropped = Vec::new();
    set.retain(|t| {
        let keep = t.time_since_update < cfg.max_age_n;
        if !keep {
            if let Some(p) = t.link_id {
                dropped.push(p);
            }
        }
        keep
    });
    for p in dropped {
        if let Some(t) = other.get_mut(p) {
            t.link_id = None;
        }
    }
}

/// Step 1: promote new LiDAR detections (cases a and b) and discard stale
/// unmatched detections.
pub fn tr_step1(
    lidar: &mut StreamState,
    camera: &mut StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
    cases: CaseMask,
) {
    if cases.contains(CaseMask::A) {
        let rows = boxes_of(lidar.unmatched_dets.iter(), calib);
        let cols = boxes_of(camera.matched.iter().filter(|t| t.link_id.is_none()), calib);
        let pairs = iou_pairs(rows, cols, cfg.theta_iou);
        let ids: Vec<TrackId> = pairs.iter().map(|p| p.0).collect();
        promote(lidar, false, &ids, false);
        for (l, c) in pairs {
            link(lidar, l, camera, c);
        }
    }
    if cases.contains(CaseMask::B) {
        let rows = boxes_of(lidar.unmatched_dets.iter(), calib);
        let cols = boxes_of(camera.unmatched_dets.iter(), calib);
        let pairs = iou_pairs(rows, cols, cfg.theta_iou);
        let lids: Vec<TrackId> = pairs.iter().map(|p| p.0).collect();
        let cids: Vec<TrackId> = pairs.iter().map(|p| p.1).collect();
        promote(lidar, false, &lids, false);
        promote(camera, false, &cids, false);
        for (l, c) in pairs {
            link(lidar, l, camera, c);
        }
    }
    age_out(lidar, camera, true, cfg);
    age_out(camera, lidar, true, cfg);
}

/// Step 2: bridge single-stream misses against the other stream's tracked
/// objects; both sides need `theta_hits`.
pub fn tr_step2(
    lidar: &mut StreamState,
    camera: &mut StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
    cases: CaseMask,
) {
    let hits = cfg.theta_hits;
    if cases.contains(CaseMask::D) {
        let rows = boxes_of(
            lidar.unmatched_trajs.iter().filter(|t| t.hits >= hits),
            calib,
        );
        let cols = boxes_of(
            camera
                .matched
                .iter()
                .filter(|t| t.link_id.is_none() && t.hits >= hits),
            calib,
        );
        let pairs = iou_pairs(rows, cols, cfg.theta_iou);
        let ids: Vec<TrackId> = pairs.iter().map(|p| p.0).collect();
        promote(lidar, true, &ids, true);
        for (l, c) in pairs {
            link(lidar, l, camera, c);
        }
    }
    if cases.contains(CaseMask::C) {
        let rows = boxes_of(
            camera.unmatched_trajs.iter().filter(|t| t.hits >= hits),
            calib,
        );
        let cols = boxes_of(
            lidar
                .matched
                .iter()
                .filter(|t| t.link_id.is_none() && t.hits >= hits),
            calib,
        );
        let pairs = iou_pairs(rows, cols, cfg.theta_iou);
        let ids: Vec<TrackId> = pairs.iter().map(|p| p.0).collect();
        promote(camera, true, &ids, true);
        for (c, l) in pairs {
            link(lidar, l, camera, c);
        }
    }
}

/// Step 3: bridge simultaneous misses whose predictions agree and stay
/// clear of the image border, then discard trajectories whose gap reached
/// `max_age_n`.
pub fn tr_step3(
    lidar: &mut StreamState,
    camera: &mut StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
    cases: CaseMask,
) {
    if cases.contains(CaseMask::E) {
        let inside = |b: &BBox2D| !at_image_boundary(b, calib, cfg.boundary_margin);
        let pick = |s: &StreamState| -> (Vec<TrackId>, Vec<BBox2D>) {
            s.unmatched_trajs
                .iter()
                // a pair carried only by predictions expires like any other gap
                .filter(|t| t.hits >= cfg.theta_hits && t.unobserved < cfg.max_age_n)
                .filter_map(|t| t.image_box(calib).map(|b| (t.track_id, b)))
                .filter(|(_, b)| inside(b))
                .unzip()
        };
        let pairs = iou_pairs(pick(camera), pick(lidar), cfg.theta_iou);
        let cids: Vec<TrackId> = pairs.iter().map(|p| p.0).collect();
        let lids: Vec<TrackId> = pairs.iter().map(|p| p.1).collect();
        promote(camera, true, &cids, true);
        promote(lidar, true, &lids, true);
        for (c, l) in pairs {
            link(lidar, l, camera, c);
        }
    }
    age_out(lidar, camera, false, cfg);
    age_out(camera, lidar, false, cfg);
}

fn entry(t: &Track, calib: &Calibration) -> Option<OutputEntry> {
    let box3d = t.space_box()?;
    let box2d = project_box_3d(&box3d, calib).ok()?;
    Some(OutputEntry {
        track_id: t.track_id,
        box3d,
        box2d,
        score: t.last_detection.score,
    })
}

/// Emits the `T^l` tracks that overlap a camera track in `T^c`, `UD^c` or `UT^c`.
pub fn finalize_output(
    lidar: &StreamState,
    camera: &StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
) -> OutputFrame {
    let candidates: Vec<OutputEntry> = lidar
        .matched
        .iter()
        .filter(|t| t.hits >= cfg.min_output_hits)
        .filter_map(|t| entry(t, calib))
        .collect();
    let rows: Vec<BBox2D> = candidates.iter().map(|e| e.box2d).collect();
    let (_, cols) = boxes_of(camera.tracks(), calib);
    let a = greedy_match_iou(&rows, &cols, cfg.theta_iou);
    let mut keep: Vec<usize> = a.matches.iter().map(|m| m.0).collect();
    keep.sort_unstable();
    OutputFrame {
        frame: lidar.next_frame.saturating_sub(1),
        entries: keep.into_iter().map(|i| candidates[i].clone()).collect(),
    }
}

/// Every `T^l` track, without camera confirmation.
pub fn lidar_only_output(
    lidar: &StreamState,
    calib: &Calibration,
    cfg: &TrackerConfig,
) -> OutputFrame {
    OutputFrame {
        frame: lidar.next_frame.saturating_sub(1),
        entries: lidar
            .matched
            .iter()
            .filter(|t| t.hits >= cfg.min_output_hits)
            .filter_map(|t| entry(t, calib))
            .collect(),
    }
}

/// End of frame: gaps that were not bridged reset `hits`.
fn close_frame(state: &mut StreamState) {
    for t in &mut state.unmatched_trajs {
        t.hits = 0;
    }
}

/// Online tracker for one sequence.
pub struct FusionTracker {
    cfg: TrackerConfig,
    calib: Calibration,
    mode: PipelineMode,
    camera_provider: Arc<dyn SimilarityProvider>,
    lidar_provider: Arc<dyn SimilarityProvider>,
    lidar: StreamState,
    camera: StreamState,
}

impl FusionTracker {
    pub fn new(
        calib: Option<Calibration>,
        camera_provider: Arc<dyn SimilarityProvider>,
        lidar_provider: Arc<dyn SimilarityProvider>,
        cfg: TrackerConfig,
        mode: PipelineMode,
    ) -> Result<Self> {
        cfg.validate()?;
        let calib = calib.ok_or(Error::CalibrationMissing)?;
        calib.validate()?;
        Ok(FusionTracker {
            cfg,
            calib,
            mode,
            camera_provider,
            lidar_provider,
            lidar: StreamState::new(Stream::Lidar),
            camera: StreamState::new(Stream::Camera),
        })
    }

    pub fn next_frame(&self) -> usize {
        self.lidar.next_frame
    }

    pub fn lidar_state(&self) -> &StreamState {
        &self.lidar
    }

    pub fn camera_state(&self) -> &StreamState {
        &self.camera
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn mode(&self) -> PipelineMode {
        self.mode
    }

    /// Processes one frame of both streams.
    pub fn step(
        &mut self,
        camera_dets: &[Detection],
        lidar_dets: &[Detection],
    ) -> Result<OutputFrame> {
        let (cfg, calib) = (&self.cfg, &self.calib);
        ctg_step(
            &mut self.lidar,
            lidar_dets,
            self.lidar_provider.as_ref(),
            cfg,
        )?;
        let out = match self.mode.output {
            OutputMode::LidarOnly => {
                // keep the camera clock in step even though its detections are ignored
                self.camera.next_frame = self.lidar.next_frame;
                age_out(&mut self.lidar, &mut self.camera, true, cfg);
                age_out(&mut self.lidar, &mut self.camera, false, cfg);
                lidar_only_output(&self.lidar, calib, cfg)
            }
            OutputMode::Fused => {
                ctg_step(
                    &mut self.camera,
                    camera_dets,
                    self.camera_provider.as_ref(),
                    cfg,
                )?;
                let cases = self.mode.cases;
                tr_prematch(&mut self.lidar, &mut self.camera, calib, cfg);
                tr_step1(&mut self.lidar, &mut self.camera, calib, cfg, cases);
                tr_step2(&mut self.lidar, &mut self.camera, calib, cfg, cases);
                tr_step3(&mut self.lidar, &mut self.camera, calib, cfg, cases);
                finalize_output(&self.lidar, &self.camera, calib, cfg)
            }
        };
        close_frame(&mut self.lidar);
        close_frame(&mut self.camera);
        debug_assert_eq!(self.lidar.check_invariants(), Ok(()));
        debug_assert_eq!(self.camera.check_invariants(), Ok(()));
        debug_assert_eq!(check_links(&self.lidar, &self.camera), Ok(()));
        Ok(out)
    }
}

/// Runs a whole sequence. Frame `k` of each input holds that frame's
/// detections; the shorter input is padded with empty frames.
pub fn track_sequence(
    camera_dets: &[Vec<Detection>],
    lidar_dets: &[Vec<Detection>],
    calib: &Calibration,
    provider_c: Arc<dyn SimilarityProvider>,
    provider_l: Arc<dyn SimilarityProvider>,
    cfg: &TrackerConfig,
    mode: PipelineMode,
) -> Result<Vec<OutputFrame>> {
    let mut tracker = FusionTracker::new(
        Some(calib.clone()),
        provider_c,
        provider_l,
        cfg.clone(),
        mode,
    )?;
    let n = camera_dets.len().max(lidar_dets.len());
    let empty: Vec<Detection> = Vec::new();
    (0..n)
        .map(|k| {
            tracker.step(
                camera_dets.get(k).unwrap_or(&empty),
                lidar_dets.get(k).unwrap_or(&empty),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::{OracleProvider, ZeroProvider};
    use crate::types::default_config;

    fn cam(frame: usize, id: u64, l: f64, score: f64) -> Detection {
        Detection::camera(
            frame,
            id,
            BBox2D::new(l, 100.0, l + 40.0, 140.0).unwrap(),
            score,
        )
        .unwrap()
    }

    fn lid(frame: usize, id: u64, x: f64) -> Detection {
        Detection::lidar(
            frame,
            id,
            BBox3D::new(x, 1.0, 20.0, 4.0, 1.8, 1.5, 1.57).unwrap(),
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn cold_start_creates_unmatched_detections() {
        let mut s = StreamState::new(Stream::Camera);
        let dets = vec![
            cam(0, 0, 10.0, 0.5),
            cam(0, 1, 200.0, 0.9),
            cam(0, 2, 400.0, 0.7),
        ];
        ctg_step(&mut s, &dets, &ZeroProvider, &default_config()).unwrap();
        assert_eq!(s.unmatched_dets.len(), 3);
        assert!(s.matched.is_empty() && s.unmatched_trajs.is_empty());
        assert!(s
            .unmatched_dets
            .iter()
            .all(|t| t.hits == 1 && t.time_since_update == 0));
        // ids follow descending score order
        let by_id: Vec<u64> = s
            .unmatched_dets
            .iter()
            .map(|t| t.last_detection.det_id)
            .collect();
        assert_eq!(by_id, vec![1, 2, 0]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn single_track_rematches_with_oracle() {
        let mut o = OracleProvider::new();
        o.insert(Stream::Camera, 0, 7);
        o.insert(Stream::Camera, 1, 7);
        let mut s = StreamState::new(Stream::Camera);
        let cfg = default_config();
        ctg_step(&mut s, &[cam(0, 0, 10.0, 0.9)], &o, &cfg).unwrap();
        ctg_step(&mut s, &[cam(1, 1, 12.0, 0.9)], &o, &cfg).unwrap();
        assert_eq!(s.matched.len(), 1);
        assert_eq!(s.matched[0].hits, 2);
        assert_eq!(s.matched[0].track_id, 0);
        s.check_invariants().unwrap();
    }

    #[test]
    fn unmatched_prior_becomes_trajectory() {
        let mut s = StreamState::new(Stream::Lidar);
        let cfg = default_config();
        ctg_step(&mut s, &[lid(0, 0, 0.0)], &ZeroProvider, &cfg).unwrap();
        ctg_step(&mut s, &[], &ZeroProvider, &cfg).unwrap();
        assert_eq!(s.unmatched_trajs.len(), 1);
        assert_eq!(s.unmatched_trajs[0].time_since_update, 1);
        assert_eq!(
            s.unmatched_trajs[0].status,
            TrackStatus::UnmatchedTrajectory
        );
    }

    #[test]
    fn frame_order_is_enforced() {
        let mut s = StreamState::new(Stream::Camera);
        let err = ctg_step(
            &mut s,
            &[cam(3, 0, 10.0, 0.9)],
            &ZeroProvider,
            &default_config(),
        );
        assert!(matches!(
            err,
            Err(Error::FrameOrderViolation {
                expected: 0,
                got: 3,
                ..
            })
        ));
        let err = ctg_step(&mut s, &[lid(0, 0, 0.0)], &ZeroProvider, &default_config());
        assert!(matches!(err, Err(Error::InvalidDetection(_))));
    }

    #[test]
    fn case_mask_text() {
        assert_eq!("abcde".parse::<CaseMask>().unwrap(), CaseMask::ALL);
        assert_eq!("ac".parse::<CaseMask>().unwrap().to_string(), "ac");
        assert_eq!(CaseMask::NONE.to_string(), "none");
        assert!("az".parse::<CaseMask>().is_err());
        let p = CaseMask::prefixes();
        assert_eq!(
            p.map(|m| m.to_string()),
            ["a", "ab", "abc", "abcd", "abcde"]
        );
        assert_eq!(
            "lidar".parse::<PipelineMode>().unwrap(),
            PipelineMode::lidar_baseline()
        );
        assert_eq!(
            "abcde".parse::<PipelineMode>().unwrap(),
            PipelineMode::full()
        );
    }

    #[test]
    fn tracker_requires_calibration() {
        let r = FusionTracker::new(
            None,
            Arc::new(ZeroProvider),
            Arc::new(ZeroProvider),
            default_config(),
            PipelineMode::full(),
        );
        assert!(matches!(r, Err(Error::CalibrationMissing)));
    }

    #[test]
    fn prematch_on_empty_camera_is_empty() {
        let calib = Calibration::kitti_default();
        let cfg = default_config();
        let mut l = StreamState::new(Stream::Lidar);
        let mut c = StreamState::new(Stream::Camera);
        ctg_step(&mut l, &[lid(0, 0, 0.0)], &ZeroProvider, &cfg).unwrap();
        ctg_step(&mut l, &[lid(1, 1, 0.0)], &ZeroProvider, &cfg).unwrap();
        ctg_step(&mut c, &[], &ZeroProvider, &cfg).unwrap();
        assert!(tr_prematch(&mut l, &mut c, &calib, &cfg).is_empty());
    }
}
