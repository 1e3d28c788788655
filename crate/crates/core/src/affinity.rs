//! Association matrices: appearance similarity `S`, spatial geometric
//! constraint `G`, and the gated total cost `C`.
//!
//! The total cost is `(1 - S) + G_hat` when `S >= theta_s` or `G <= theta_g`,
//! and the sentinel otherwise. `G_hat` is `1 - IoU` on the camera stream and
//! the centroid distance divided by `theta_g_3d`, clamped to 1, on the LiDAR
//! stream. Gating always compares the raw `G` to the stream's threshold.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{centroid_distance_3d, iou_2d};
use crate::types::{BBox2D, BBox3D, Detection, Stream, TrackerConfig};

/// Dense row-major matrix with row (prior object) and column (detection) ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub row_ids: Vec<u64>,
    pub col_ids: Vec<u64>,
}

impl ScoreMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        ScoreMatrix {
            rows,
            cols,
            values: vec![value; rows * cols],
            row_ids: (0..rows as u64).collect(),
            col_ids: (0..cols as u64).collect(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        ScoreMatrix {
            rows,
            cols,
            values,
            row_ids: (0..rows as u64).collect(),
            col_ids: (0..cols as u64).collect(),
        }
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(ScoreMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
    }

    pub fn with_ids(mut self, row_ids: Vec<u64>, col_ids: Vec<u64>) -> Result<Self> {
        if row_ids.len() != self.rows || col_ids.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} ids for a {}x{} matrix",
                row_ids.len(),
                col_ids.len(),
                self.rows,
                self.cols
            )));
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (k / self.cols.max(1), k % self.cols.max(1), v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProviderKind {
    Oracle,
    FileScores,
    EmbeddingCosine,
    Zero,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ProviderKind::Oracle),
            "file" | "file_scores" => Ok(ProviderKind::FileScores),
            "embed" | "embedding_cosine" => Ok(ProviderKind::EmbeddingCosine),
            "zero" => Ok(ProviderKind::Zero),
            other => Err(format!("unknown provider `{other}`")),
        }
    }
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProviderKind::Oracle => "oracle",
            ProviderKind::FileScores => "file",
            ProviderKind::EmbeddingCosine => "embed",
            ProviderKind::Zero => "zero",
        })
    }
}

/// Consistency probability between an earlier observation of an object and
/// a current detection. Implementations are immutable and deterministic, and
/// return values in `[0, 1]`.
pub trait SimilarityProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    fn similarity(&self, prior: &Detection, det: &Detection) -> Result<f64>;
}

/// Always 0: association then rests on the geometric gate alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProvider;

impl SimilarityProvider for ZeroProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Zero
    }

    fn similarity(&self, _prior: &Detection, _det: &Detection) -> Result<f64> {
        Ok(0.0)
    }
}

/// Ground-truth identity lookup: 1 when both detections carry the same label.
#[derive(Debug, Clone, Default)]
pub struct OracleProvider {
    labels: HashMap<(Stream, u64), u64>,
}

impl OracleProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, stream: Stream, det_id: u64, gt_id: u64) {
        self.labels.insert((stream, det_id), gt_id);
    }

    pub fn label(&self, stream: Stream, det_id: u64) -> Option<u64> {
        self.labels.get(&(stream, det_id)).copied()
    }
}

impl SimilarityProvider for OracleProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Oracle
    }

    fn similarity(&self, prior: &Detection, det: &Detection) -> Result<f64> {
        let a = self.label(prior.stream, prior.det_id);
        let b = self.label(det.stream, det.det_id);
        Ok(match (a, b) {
            (Some(a), Some(b)) if a == b => 1.0,
            _ => 0.0,
        })
    }
}

/// Precomputed scores keyed by `(frame, stream, prior det_id, det_id)`.
/// A missing pair scores 0.
#[derive(Debug, Clone, Default)]
pub struct FileScoresProvider {
    scores: HashMap<(usize, Stream, u64, u64), f64>,
}

impl FileScoresProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: usize, stream: Stream, prior_id: u64, det_id: u64, score: f64) {
        self.scores.insert((frame, stream, prior_id, det_id), score);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl SimilarityProvider for FileScoresProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::FileScores
    }

    fn similarity(&self, prior: &Detection, det: &Detection) -> Result<f64> {
        Ok(self
            .scores
            .get(&(det.frame, det.stream, prior.det_id, det.det_id))
            .copied()
            .unwrap_or(0.0))
    }
}

/// Cosine similarity of attached embeddings mapped to `[0, 1]` by `(cos + 1) / 2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmbeddingCosineProvider;

impl SimilarityProvider for EmbeddingCosineProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::EmbeddingCosine
    }

    fn similarity(&self, prior: &Detection, det: &Detection) -> Result<f64> {
        let missing = |d: &Detection| Error::MissingEmbedding {
            frame: d.frame,
            det_id: d.det_id,
        };
        let a = prior.embedding.as_deref().ok_or_else(|| missing(prior))?;
        let b = det.embedding.as_deref().ok_or_else(|| missing(det))?;
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "embedding lengths {} and {}",
                a.len(),
                b.len()
            )));
        }
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let cos = if na > 0.0 && nb > 0.0 {
            dot / (na * nb)
        } else {
            0.0
        };
        Ok(((cos + 1.0) * 0.5).clamp(0.0, 1.0))
    }
}

/// A prior object's box predicted to the current frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorBox {
    Image(BBox2D),
    Space(BBox3D),
    /// The filter could not be decoded; scores as maximally distant.
    Unavailable,
}

/// `G`: `1 - IoU` for the camera stream, centroid distance for the LiDAR stream.
pub fn sgc_matrix(prior: &[PriorBox], dets: &[Detection], stream: Stream) -> Result<ScoreMatrix> {
    let mut g = ScoreMatrix::filled(prior.len(), dets.len(), 0.0);
    for d in dets {
        if d.stream != stream {
            return Err(Error::DimensionMismatch(format!(
                "{} detection in a {stream} matrix",
                d.stream
            )));
        }
    }
    for (i, p) in prior.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            let v = match (stream, p) {
                (Stream::Camera, PriorBox::Image(a)) => {
                    let b = d.box2d.as_ref().ok_or(Error::MissingBox("2D"))?;
                    1.0 - iou_2d(a, b)
                }
                (Stream::Camera, PriorBox::Unavailable) => 1.0,
                (Stream::Lidar, PriorBox::Space(a)) => {
                    let b = d.box3d.as_ref().ok_or(Error::MissingBox("3D"))?;
                    centroid_distance_3d(a, b)
                }
                (Stream::Lidar, PriorBox::Unavailable) => f64::INFINITY,
                _ => {
                    return Err(Error::DimensionMismatch(format!(
                        "prior box {i} does not belong to the {stream} stream"
                    )))
                }
            };
            g.set(i, j, v);
        }
    }
    g.with_ids(
        (0..prior.len() as u64).collect(),
        dets.iter().map(|d| d.det_id).collect(),
    )
}

/// `S`: provider similarity between each prior object's most recent
/// observation and each detection.
pub fn similarity_matrix(
    provider: &dyn SimilarityProvider,
    prior: &[&Detection],
    dets: &[Detection],
) -> Result<ScoreMatrix> {
    let mut s = ScoreMatrix::filled(prior.len(), dets.len(), 0.0);
    for (i, p) in prior.iter().enumerate() {
        for (j, d) in dets.iter().enumerate() {
            let v = provider.similarity(p, d)?;
            if !v.is_finite() {
                return Err(Error::DimensionMismatch(format!(
                    "provider {} returned non-finite similarity",
                    provider.kind()
                )));
            }
            s.set(i, j, v.clamp(0.0, 1.0));
        }
    }
    s.with_ids(
        prior.iter().map(|d| d.det_id).collect(),
        dets.iter().map(|d| d.det_id).collect(),
    )
}

/// `C`: gated total cost.
pub fn total_cost(
    s: &ScoreMatrix,
    g: &ScoreMatrix,
    cfg: &TrackerConfig,
    stream: Stream,
) -> Result<ScoreMatrix> {
    if s.shape() != g.shape() {
        return Err(Error::DimensionMismatch(format!(
            "S is {:?}, G is {:?}",
            s.shape(),
            g.shape()
        )));
    }
    let theta_g = match stream {
        Stream::Camera => cfg.theta_g_2d,
        Stream::Lidar => cfg.theta_g_3d,
    };
    let c = ScoreMatrix::from_fn(s.rows(), s.cols(), |i, j| {
        let sv = s.get(i, j);
        let gv = g.get(i, j);
        if sv >= cfg.theta_s || gv <= theta_g {
            let g_hat = match stream {
                Stream::Camera => gv.clamp(0.0, 1.0),
                Stream::Lidar => (gv / cfg.theta_g_3d).min(1.0),
            };
            (1.0 - sv) + g_hat
        } else {
            cfg.sentinel
        }
    });
    c.with_ids(g.row_ids.clone(), g.col_ids.clone())
}
