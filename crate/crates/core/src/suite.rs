//! Running and scoring many sequences under several pipeline modes.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::affinity::SimilarityProvider;
use crate::error::Result;
use crate::eval::{clear_mot, ClearReport, LabeledBox, Trajectories};
use crate::sim::{generate, FaultSpec, Scenario};
use crate::tracker::{track_sequence, CaseMask, OutputFrame, PipelineMode};
use crate::types::{Calibration, Detection, TrackerConfig};

/// Everything needed to track and score one sequence.
#[derive(Clone)]
pub struct Sequence {
    pub name: String,
    pub calib: Calibration,
    pub camera: Vec<Vec<Detection>>,
    pub lidar: Vec<Vec<Detection>>,
    pub gt: Trajectories,
    pub camera_provider: Arc<dyn SimilarityProvider>,
    pub lidar_provider: Arc<dyn SimilarityProvider>,
}

impl Sequence {
    pub fn from_scenario(
        name: impl Into<String>,
        sc: &Scenario,
        camera_provider: Arc<dyn SimilarityProvider>,
        lidar_provider: Arc<dyn SimilarityProvider>,
    ) -> Self {
        Sequence {
            name: name.into(),
            calib: sc.calib.clone(),
            camera: sc.camera_dets.clone(),
            lidar: sc.lidar_dets.clone(),
            gt: sc.gt_trajectories(),
            camera_provider,
            lidar_provider,
        }
    }

    pub fn track(&self, cfg: &TrackerConfig, mode: PipelineMode) -> Result<Vec<OutputFrame>> {
        track_sequence(
            &self.camera,
            &self.lidar,
            &self.calib,
            self.camera_provider.clone(),
            self.lidar_provider.clone(),
            cfg,
            mode,
        )
    }
}

/// Tracker output as image-plane trajectories.
pub fn output_trajectories(out: &[OutputFrame]) -> Trajectories {
    out.iter()
        .map(|f| {
            f.entries
                .iter()
                .map(|e| LabeledBox {
                    id: e.track_id,
                    bbox: e.box2d,
                })
                .collect()
        })
        .collect()
}

/// Seeds `seed0, seed0 + 1, ...`, one generated scene each.
pub fn fault_suite(
    n_sequences: usize,
    n_objects: usize,
    n_frames: usize,
    base: &FaultSpec,
) -> Result<Vec<Scenario>> {
    (0..n_sequences as u64)
        .into_par_iter()
        .map(|k| {
            let spec = FaultSpec {
                seed: base.seed.wrapping_add(k),
                ..base.clone()
            };
            generate(n_objects, n_frames, &spec)
        })
        .collect()
}

/// The LiDAR-only baseline followed by the cumulative case masks.
pub fn ablation_modes() -> Vec<PipelineMode> {
    std::iter::once(PipelineMode::lidar_baseline())
        .chain(CaseMask::prefixes().into_iter().map(PipelineMode::fused))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: PipelineMode,
    pub report: ClearReport,
    pub per_sequence: Vec<ClearReport>,
}

pub fn evaluate_mode(
    seqs: &[Sequence],
    cfg: &TrackerConfig,
    mode: PipelineMode,
    iou_threshold: f64,
) -> Result<AblationRow> {
    let per_sequence = seqs
        .par_iter()
        .map(|s| {
            let out = s.track(cfg, mode)?;
            clear_mot(&s.gt, &output_trajectories(&out), iou_threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationRow {
        mode,
        report: ClearReport::combine(&per_sequence),
        per_sequence,
    })
}

pub fn ablate(
    seqs: &[Sequence],
    cfg: &TrackerConfig,
    modes: &[PipelineMode],
    iou_threshold: f64,
) -> Result<Vec<AblationRow>> {
    modes
        .iter()
        .map(|&m| evaluate_mode(seqs, cfg, m, iou_threshold))
        .collect()
}

pub fn format_table(rows: &[AblationRow]) -> String {
    let mut s = String::from("mode     MOTA(%)    FP     FN   IDSW   FRAG    MT    ML\n");
    for r in rows {
        let p = &r.report;
        let _ = writeln!(
            s,
            "{:<7} {:>8.2} {:>5} {:>6} {:>6} {:>6} {:>5} {:>5}",
            r.mode.to_string(),
            100.0 * p.mota,
            p.fp,
            p.fn_,
            p.idsw,
            p.frag,
            p.mt,
            p.ml
        );
    }
    s
}
