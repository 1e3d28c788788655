//! Shared domain types: boxes, detections, calibration and tracker configuration.
//!
//! All 3D quantities are expressed in the reference camera frame (x right,
//! y down, z forward). The calibration maps camera-frame points to pixels.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix3x4, Vector3, Vector4};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    Camera,
    Lidar,
}

impl Stream {
    pub fn other(self) -> Stream {
        match self {
            Stream::Camera => Stream::Lidar,
            Stream::Lidar => Stream::Camera,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Camera => "camera",
            Stream::Lidar => "lidar",
        }
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stream {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "camera" | "c" | "cam" => Ok(Stream::Camera),
            "lidar" | "l" => Ok(Stream::Lidar),
            other => Err(format!("unknown stream `{other}`")),
        }
    }
}

/// Axis-aligned image box in pixels, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox2D {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl BBox2D {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Result<Self> {
        let b = BBox2D {
            left,
            top,
            right,
            bottom,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.left, self.top, self.right, self.bottom];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox2D(format!(
                "non-finite coordinate in {self:?}"
            )));
        }
        if self.left >= self.right || self.top >= self.bottom {
            return Err(Error::InvalidBox2D(format!("empty extent in {self:?}")));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.left + self.right),
            0.5 * (self.top + self.bottom),
        )
    }
}

/// Oriented 3D box: centroid, extents (length along the heading, width, height)
/// and heading angle about the camera y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

impl BBox3D {
    pub fn new(x: f64, y: f64, z: f64, l: f64, w: f64, h: f64, yaw: f64) -> Result<Self> {
        let b = BBox3D {
            x,
            y,
            z,
            l,
            w,
            h,
            yaw,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x, self.y, self.z, self.l, self.w, self.h, self.yaw];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBox3D(format!("non-finite field in {self:?}")));
        }
        if self.l <= 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox3D(format!(
                "non-positive extent in {self:?}"
            )));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&self.yaw) {
            return Err(Error::InvalidBox3D(format!(
                "yaw {} outside [-pi, pi]",
                self.yaw
            )));
        }
        Ok(())
    }

    pub fn centroid(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// One sensor observation at one frame.
///
/// `det_id` is unique per stream within a sequence; file readers assign it
/// from the record order. Embeddings are opaque and only read by
/// similarity providers.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub stream: Stream,
    pub box2d: Option<BBox2D>,
    pub box3d: Option<BBox3D>,
    pub score: f64,
    pub det_id: u64,
    pub embedding: Option<Arc<[f64]>>,
}

impl Detection {
    pub fn camera(frame: usize, det_id: u64, box2d: BBox2D, score: f64) -> Result<Self> {
        Detection::new(frame, Stream::Camera, Some(box2d), None, score, det_id)
    }

    pub fn lidar(frame: usize, det_id: u64, box3d: BBox3D, score: f64) -> Result<Self> {
        Detection::new(frame, Stream::Lidar, None, Some(box3d), score, det_id)
    }

    pub fn new(
        frame: usize,
        stream: Stream,
        box2d: Option<BBox2D>,
        box3d: Option<BBox3D>,
        score: f64,
        det_id: u64,
    ) -> Result<Self> {
        let d = Detection {
            frame,
            stream,
            box2d,
            box3d,
            score,
            det_id,
            embedding: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_embedding(mut self, embedding: impl Into<Arc<[f64]>>) -> Self {
        self.embedding = Some(embedding.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.stream {
            Stream::Camera if self.box2d.is_none() => {
                return Err(Error::InvalidDetection(
                    "camera detection without a 2D box".into(),
                ))
            }
            Stream::Lidar if self.box3d.is_none() => {
                return Err(Error::InvalidDetection(
                    "lidar detection without a 3D box".into(),
                ))
            }
            _ => {}
        }
        if let Some(b) = &self.box2d {
            b.validate()?;
        }
        if let Some(b) = &self.box3d {
            b.validate()?;
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidDetection(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }
}

/// Camera projection (KITTI `P2` semantics) plus the image size.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub projection: Matrix3x4<f64>,
    pub image_width: f64,
    pub image_height: f64,
}

impl Calibration {
    pub fn new(projection: [[f64; 4]; 3], image_width: f64, image_height: f64) -> Result<Self> {
        let m = Matrix3x4::from_fn(|r, c| projection[r][c]);
        let calib = Calibration {
            projection: m,
            image_width,
            image_height,
        };
        calib.validate()?;
        Ok(calib)
    }

    pub fn validate(&self) -> Result<()> {
        if self.projection.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration(
                "non-finite projection entry".into(),
            ));
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0)
            || !self.image_width.is_finite()
            || !self.image_height.is_finite()
        {
            return Err(Error::InvalidCalibration(format!(
                "image size {}x{} must be positive",
                self.image_width, self.image_height
            )));
        }
        let scale = self.projection.amax().max(1.0);
        if self.projection.rank(1e-12 * scale) < 3 {
            return Err(Error::InvalidCalibration(
                "projection matrix is rank deficient".into(),
            ));
        }
        Ok(())
    }

    /// The KITTI tracking `P2` of sequence 0000 with the usual 1242x375 image.
    pub fn kitti_default() -> Self {
        Calibration::new(
            [
                [721.5377, 0.0, 609.5593, 44.85728],
                [0.0, 721.5377, 172.854, 0.2163791],
                [0.0, 0.0, 1.0, 0.002745884],
            ],
            1242.0,
            375.0,
        )
        .expect("built-in calibration is valid")
    }

    /// Projects a camera-frame point. Returns `(u, v, depth)`.
    pub fn project_point(&self, p: [f64; 3]) -> (f64, f64, f64) {
        let h: Vector3<f64> = self.projection * Vector4::new(p[0], p[1], p[2], 1.0);
        (h.x / h.z, h.y / h.z, h.z)
    }
}

/// Tracker thresholds.
///
/// `theta_g_2d` gates `1 - IoU` on the camera stream, `theta_g_3d` gates the
/// centroid distance (meters) on the LiDAR stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub theta_s: f64,
    pub theta_g_2d: f64,
    pub theta_g_3d: f64,
    pub theta_iou: f64,
    pub theta_hits: u32,
    pub max_age_n: u32,
    pub boundary_margin: f64,
    pub sentinel: f64,
    pub min_output_hits: u32,
}

/// Largest finite total cost: `(1 - S) + G_hat` with both terms in [0, 1].
pub const MAX_FINITE_COST: f64 = 2.0;

impl Default for TrackerConfig {
    fn default() -> Self {
        default_config()
    }
}

/// Documented defaults. `max_age_n = 3` is the value that maximized MOTA in a
/// sweep over the synthetic fault suite (see `tests/config_sweep.rs`).
pub fn default_config() -> TrackerConfig {
    TrackerConfig {
        theta_s: 0.5,
        theta_g_2d: 0.7,
        theta_g_3d: 3.0,
        theta_iou: 0.3,
        theta_hits: 3,
        max_age_n: 3,
        boundary_margin: 10.0,
        sentinel: 1000.0,
        min_output_hits: 1,
    }
}

impl TrackerConfig {
    pub const KEYS: [&'static str; 9] = [
        "theta_s",
        "theta_g_2d",
        "theta_g_3d",
        "theta_iou",
        "theta_hits",
        "max_age_n",
        "boundary_margin",
        "sentinel",
        "min_output_hits",
    ];

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(name, format!("{v} is not in [0, 1]")))
            }
        };
        unit("theta_s", self.theta_s)?;
        unit("theta_g_2d", self.theta_g_2d)?;
        unit("theta_iou", self.theta_iou)?;
        if self.theta_iou == 0.0 {
            return Err(Error::config("theta_iou", "must be positive"));
        }
        if !(self.theta_g_3d.is_finite() && self.theta_g_3d > 0.0) {
            return Err(Error::config(
                "theta_g_3d",
                format!("{} is not a positive distance", self.theta_g_3d),
            ));
        }
        if self.max_age_n < 1 {
            return Err(Error::config("max_age_n", "must be at least 1"));
        }
        if !(self.boundary_margin.is_finite() && self.boundary_margin >= 0.0) {
            return Err(Error::config(
                "boundary_margin",
                format!("{} is not a non-negative pixel count", self.boundary_margin),
            ));
        }
        if !(self.sentinel.is_finite() && self.sentinel > MAX_FINITE_COST) {
            return Err(Error::config(
                "sentinel",
                format!(
                    "{} must be finite and exceed the largest attainable cost {MAX_FINITE_COST}",
                    self.sentinel
                ),
            ));
        }
        Ok(())
    }

    /// Sets one field from its textual key/value form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let real = |v: &str| {
            v.parse::<f64>()
                .map_err(|e| Error::config(&key, format!("`{v}`: {e}")))
        };
        let count = |v: &str| {
            v.parse::<u32>()
                .map_err(|e| Error::config(&key, format!("`{v}`: {e}")))
        };
        match key.as_str() {
            "theta_s" => self.theta_s = real(value)?,
            "theta_g_2d" => self.theta_g_2d = real(value)?,
            "theta_g_3d" => self.theta_g_3d = real(value)?,
            "theta_iou" => self.theta_iou = real(value)?,
            "theta_hits" => self.theta_hits = count(value)?,
            "max_age_n" => self.max_age_n = count(value)?,
            "boundary_margin" => self.boundary_margin = real(value)?,
            "sentinel" => self.sentinel = real(value)?,
            "min_output_hits" => self.min_output_hits = count(value)?,
            _ => return Err(Error::config(&key, "unknown key")),
        }
        Ok(())
    }

    /// `(key, value)` pairs in a fixed order, values in their canonical text form.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("theta_s", self.theta_s.to_string()),
            ("theta_g_2d", self.theta_g_2d.to_string()),
            ("theta_g_3d", self.theta_g_3d.to_string()),
            ("theta_iou", self.theta_iou.to_string()),
            ("theta_hits", self.theta_hits.to_string()),
            ("max_age_n", self.max_age_n.to_string()),
            ("boundary_margin", self.boundary_margin.to_string()),
            ("sentinel", self.sentinel.to_string()),
            ("min_output_hits", self.min_output_hits.to_string()),
        ]
    }
}
