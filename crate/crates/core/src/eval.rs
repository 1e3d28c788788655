//! CLEAR-MOT scoring of 2D trajectories.
//!
//! Per frame, correspondences from the previous frame are kept when the pair
//! is still present and overlaps by at least the threshold. The remaining
//! pairs are matched greedily by descending IoU, ties broken by ground-truth
//! index and then hypothesis index. An identity switch is counted when a
//! ground-truth object is matched to a different hypothesis id than at its
//! last match. A fragmentation is counted each time tracking resumes after
//! the object was present but unmatched.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::iou_2d;
use crate::types::BBox2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub id: u64,
    pub bbox: BBox2D,
}

/// Boxes per frame, indexed by frame number.
pub type Trajectories = Vec<Vec<LabeledBox>>;

pub const MOSTLY_TRACKED: f64 = 0.8;
pub const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClearReport {
    pub mota: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub frag: usize,
    pub mt: usize,
    pub ml: usize,
    pub gt_tracks: usize,
    pub total_gt: usize,
    pub recall: f64,
    pub precision: f64,
}

impl ClearReport {
    fn from_counts(c: &Counts) -> Self {
        let total = c.total_gt;
        let errors = c.fp + c.fn_ + c.idsw;
        let precision = if c.tp + c.fp == 0 {
            if total == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            c.tp as f64 / (c.tp + c.fp) as f64
        };
        ClearReport {
            mota: 1.0 - errors as f64 / total.max(1) as f64,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            idsw: c.idsw,
            frag: c.frag,
            mt: c.mt,
            ml: c.ml,
            gt_tracks: c.gt_tracks,
            total_gt: total,
            recall: if total == 0 {
                1.0
            } else {
                c.tp as f64 / total as f64
            },
            precision,
        }
    }

    /// Sums the counts of several reports and recomputes the ratios.
    pub fn combine<'a>(reports: impl IntoIterator<Item = &'a ClearReport>) -> ClearReport {
        let mut c = Counts::default();
        for r in reports {
            c.tp += r.tp;
            c.fp += r.fp;
            c.fn_ += r.fn_;
            c.idsw += r.idsw;
            c.frag += r.frag;
            c.mt += r.mt;
            c.ml += r.ml;
            c.gt_tracks += r.gt_tracks;
            c.total_gt += r.total_gt;
        }
        ClearReport::from_counts(&c)
    }

    pub fn kv_lines(&self) -> String {
        format!(
            "mota={:.6}\ntp={}\nfp={}\nfn={}\nidsw={}\nfrag={}\nmt={}\nml={}\ngt_tracks={}\ntotal_gt={}\nrecall={:.6}\nprecision={:.6}\n",
            self.mota,
            self.tp,
            self.fp,
            self.fn_,
            self.idsw,
            self.frag,
            self.mt,
            self.ml,
            self.gt_tracks,
            self.total_gt,
            self.recall,
            self.precision
        )
    }
}

impl fmt::Display for ClearReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MOTA {:.4}  FP {}  FN {}  IDSW {}  FRAG {}  MT {}/{}  ML {}/{}  recall {:.4}  precision {:.4}",
            self.mota,
            self.fp,
            self.fn_,
            self.idsw,
            self.frag,
            self.mt,
            self.gt_tracks,
            self.ml,
            self.gt_tracks,
            self.recall,
            self.precision
        )
    }
}

#[derive(Debug, Default, Clone)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
    idsw: usize,
    frag: usize,
    mt: usize,
    ml: usize,
    gt_tracks: usize,
    total_gt: usize,
}

/// What happened in one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatches {
    /// `(gt_id, hyp_id)`.
    pub matched: Vec<(u64, u64)>,
    pub missed: Vec<u64>,
    pub false_positives: Vec<u64>,
    /// Ground-truth ids whose match switched identity in this frame.
    pub switches: Vec<u64>,
}

impl FrameMatches {
    pub fn hyp_for(&self, gt_id: u64) -> Option<u64> {
        self.matched
            .iter()
            .find(|&&(g, _)| g == gt_id)
            .map(|&(_, h)| h)
    }
}

#[derive(Debug, Default, Clone)]
struct GtHistory {
    present: usize,
    matched: usize,
    ever_matched: bool,
    matched_last_time: bool,
    last_hyp: Option<u64>,
}

/// Frame-by-frame CLEAR-MOT accumulator.
#[derive(Debug, Clone)]
pub struct ClearAccumulator {
    iou_threshold: f64,
    previous: HashMap<u64, u64>,
    history: HashMap<u64, GtHistory>,
    counts: Counts,
}

impl ClearAccumulator {
    pub fn new(iou_threshold: f64) -> Self {
        ClearAccumulator {
            iou_threshold,
            previous: HashMap::new(),
            history: HashMap::new(),
            counts: Counts::default(),
        }
    }

    pub fn push_frame(&mut self, gt: &[LabeledBox], hyp: &[LabeledBox]) -> FrameMatches {
        let thr = self.iou_threshold;
        let mut gt_used = vec![false; gt.len()];
        let mut hyp_used = vec![false; hyp.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        for (i, g) in gt.iter().enumerate() {
            let Some(&h_id) = self.previous.get(&g.id) else {
                continue;
            };
            let found = hyp
                .iter()
                .enumerate()
                .find(|&(j, h)| !hyp_used[j] && h.id == h_id && iou_2d(&g.bbox, &h.bbox) >= thr);
            if let Some((j, _)) = found {
                gt_used[i] = true;
                hyp_used[j] = true;
                pairs.push((i, j));
            }
        }

        let mut cand: Vec<(f64, usize, usize)> = Vec::new();
        for (i, g) in gt.iter().enumerate().filter(|&(i, _)| !gt_used[i]) {
            for (j, h) in hyp.iter().enumerate().filter(|&(j, _)| !hyp_used[j]) {
                let iou = iou_2d(&g.bbox, &h.bbox);
                if iou >= thr {
                    cand.push((iou, i, j));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, i, j) in cand {
            if !gt_used[i] && !hyp_used[j] {
                gt_used[i] = true;
                hyp_used[j] = true;
                pairs.push((i, j));
            }
        }
        pairs.sort_unstable();

        let mut out = FrameMatches::default();
        let mut matched_gt = vec![None; gt.len()];
        for &(i, j) in &pairs {
            matched_gt[i] = Some(hyp[j].id);
        }
        self.previous.clear();
        for (i, g) in gt.iter().enumerate() {
            let hist = self.history.entry(g.id).or_default();
            hist.present += 1;
            self.counts.total_gt += 1;
            match matched_gt[i] {
                Some(h) => {
                    self.counts.tp += 1;
                    hist.matched += 1;
                    if hist.last_hyp.is_some_and(|prev| prev != h) {
                        self.counts.idsw += 1;
                        out.switches.push(g.id);
                    }
                    if hist.ever_matched && !hist.matched_last_time {
                        self.counts.frag += 1;
                    }
                    hist.ever_matched = true;
                    hist.matched_last_time = true;
                    hist.last_hyp = Some(h);
                    self.previous.insert(g.id, h);
                    out.matched.push((g.id, h));
                }
                None => {
                    self.counts.fn_ += 1;
                    hist.matched_last_time = false;
                    out.missed.push(g.id);
                }
            }
        }
        for (j, h) in hyp.iter().enumerate() {
            if !hyp_used[j] {
                self.counts.fp += 1;
                out.false_positives.push(h.id);
            }
        }
        out
    }

    pub fn report(&self) -> ClearReport {
        let mut c = self.counts.clone();
        c.gt_tracks = self.history.len();
        for h in self.history.values() {
            let cov = h.matched as f64 / h.present as f64;
            if cov >= MOSTLY_TRACKED {
                c.mt += 1;
            }
            if cov <= MOSTLY_LOST {
                c.ml += 1;
            }
        }
        ClearReport::from_counts(&c)
    }
}

/// Scores `hyp` against `gt`. Hypothesis frames past the end of `gt` are an
/// error; missing trailing hypothesis frames count as empty.
pub fn clear_mot_detailed(
    gt: &[Vec<LabeledBox>],
    hyp: &[Vec<LabeledBox>],
    iou_threshold: f64,
) -> Result<(ClearReport, Vec<FrameMatches>)> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::config(
            "iou_threshold",
            format!("{iou_threshold} is not in (0, 1]"),
        ));
    }
    if hyp.len() > gt.len() {
        return Err(Error::FrameMismatch(format!(
            "hypotheses span {} frames but ground truth only {}",
            hyp.len(),
            gt.len()
        )));
    }
    let mut acc = ClearAccumulator::new(iou_threshold);
    let frames = gt
        .iter()
        .enumerate()
        .map(|(f, g)| acc.push_frame(g, hyp.get(f).map_or(&[][..], Vec::as_slice)))
        .collect();
    Ok((acc.report(), frames))
}

pub fn clear_mot(
    gt: &[Vec<LabeledBox>],
    hyp: &[Vec<LabeledBox>],
    iou_threshold: f64,
) -> Result<ClearReport> {
    clear_mot_detailed(gt, hyp, iou_threshold).map(|(r, _)| r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lb(id: u64, x: f64) -> LabeledBox {
        LabeledBox {
            id,
            bbox: BBox2D::new(x, 0.0, x + 10.0, 10.0).unwrap(),
        }
    }

    #[test]
    fn identical_is_perfect() {
        let gt: Trajectories = (0..5)
            .map(|f| vec![lb(1, f as f64), lb(2, 100.0)])
            .collect();
        let r = clear_mot(&gt, &gt, 0.5).unwrap();
        assert_eq!(r.mota, 1.0);
        assert_eq!((r.fp, r.fn_, r.idsw, r.frag), (0, 0, 0, 0));
        assert_eq!(r.mt, 2);
    }

    #[test]
    fn empty_hypotheses() {
        let gt: Trajectories = (0..4).map(|_| vec![lb(1, 0.0), lb(2, 50.0)]).collect();
        let r = clear_mot(&gt, &[], 0.5).unwrap();
        assert_eq!(r.mota, 0.0);
        assert_eq!(r.fn_, 8);
        assert_eq!(r.ml, 2);
        assert_eq!(r.mt, 0);
    }

    #[test]
    fn swap_fixture() {
        // A: 10, 10, -, 11, 11 ; B: 20 throughout
        let gt: Trajectories = (0..5).map(|_| vec![lb(1, 0.0), lb(2, 50.0)]).collect();
        let a_ids = [Some(10), Some(10), None, Some(11), Some(11)];
        let hyp: Trajectories = a_ids
            .iter()
            .map(|a| {
                let mut v = vec![lb(20, 50.0)];
                if let Some(id) = a {
                    v.push(lb(*id, 0.0));
                }
                v
            })
            .collect();
        let (r, frames) = clear_mot_detailed(&gt, &hyp, 0.5).unwrap();
        assert_eq!(r.idsw, 1);
        assert_eq!(r.frag, 1);
        assert_eq!(r.fn_, 1);
        assert_eq!(r.fp, 0);
        assert!((r.mota - 0.8).abs() < 1e-12);
        assert_eq!(frames[3].switches, vec![1]);
    }

    #[test]
    fn persistence_beats_better_overlap() {
        // gt 1 keeps hypothesis 7 while it still overlaps enough
        let gt = vec![vec![lb(1, 0.0)], vec![lb(1, 0.0)]];
        let hyp = vec![vec![lb(7, 0.0)], vec![lb(7, 2.0), lb(8, 0.0)]];
        let (r, frames) = clear_mot_detailed(&gt, &hyp, 0.5).unwrap();
        assert_eq!(frames[1].hyp_for(1), Some(7));
        assert_eq!(r.idsw, 0);
        assert_eq!(r.fp, 1);
    }

    #[test]
    fn frame_mismatch() {
        let gt = vec![vec![lb(1, 0.0)]];
        let hyp = vec![vec![], vec![]];
        assert!(matches!(
            clear_mot(&gt, &hyp, 0.5),
            Err(Error::FrameMismatch(_))
        ));
    }

    #[test]
    fn combine_sums_counts() {
        let gt: Trajectories = (0..4).map(|_| vec![lb(1, 0.0)]).collect();
        let a = clear_mot(&gt, &gt, 0.5).unwrap();
        let b = clear_mot(&gt, &[], 0.5).unwrap();
        let c = ClearReport::combine([&a, &b]);
        assert_eq!(c.total_gt, 8);
        assert_eq!(c.fn_, 4);
        assert!((c.mota - 0.5).abs() < 1e-12);
    }
}
