//! C interface to the crosstrack tracker.
//!
//! A tracker is an opaque handle created by [`ct_tracker_new`] and released
//! by [`ct_tracker_free`]. Every call returns a [`CtStatus`]; on failure the
//! message is available from [`ct_last_error`] on the same thread. Detection
//! ids are assigned by the handle in submission order, and association uses
//! geometry only.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use crosstrack::affinity::{SimilarityProvider, ZeroProvider};
use crosstrack::geometry::iou_2d;
use crosstrack::tracker::{CaseMask, FusionTracker, OutputEntry, OutputMode, PipelineMode};
use crosstrack::types::{default_config, BBox2D, BBox3D, Calibration, Detection, TrackerConfig};
use crosstrack::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidCalibration = 3,
    InvalidConfig = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtConfig {
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

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtBox2D {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

/// Centroid in camera coordinates, extents in meters, yaw about the y axis.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtBox3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub yaw: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtCameraDetection {
    pub bbox: CtBox2D,
    pub score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtLidarDetection {
    pub bbox: CtBox3D,
    pub score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtOutputEntry {
    pub track_id: u64,
    pub box2d: CtBox2D,
    pub box3d: CtBox3D,
    pub score: f64,
}

pub const CT_CASE_A: u32 = 1;
pub const CT_CASE_B: u32 = 1 << 1;
pub const CT_CASE_C: u32 = 1 << 2;
pub const CT_CASE_D: u32 = 1 << 3;
pub const CT_CASE_E: u32 = 1 << 4;
pub const CT_CASES_ALL: u32 = 0x1f;

/// Opaque tracker handle.
pub struct CtTracker {
    inner: FusionTracker,
    next_camera_id: u64,
    next_lidar_id: u64,
    last_output: Vec<OutputEntry>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: CtStatus, msg: impl Into<String>) -> CtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn status_of(e: &Error) -> CtStatus {
    match e {
        Error::InvalidCalibration(_) | Error::CalibrationMissing => CtStatus::InvalidCalibration,
        Error::InvalidConfig { .. } => CtStatus::InvalidConfig,
        Error::InvalidBox2D(_) | Error::InvalidBox3D(_) | Error::InvalidDetection(_) => {
            CtStatus::InvalidArgument
        }
        _ => CtStatus::Internal,
    }
}

fn guarded(f: impl FnOnce() -> Result<(), (CtStatus, String)>) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtStatus::Ok,
        Ok(Err((s, m))) => fail(s, m),
        Err(_) => fail(CtStatus::Internal, "panic inside crosstrack"),
    }
}

fn lift(e: Error) -> (CtStatus, String) {
    (status_of(&e), e.to_string())
}

impl From<TrackerConfig> for CtConfig {
    fn from(c: TrackerConfig) -> Self {
        CtConfig {
            theta_s: c.theta_s,
            theta_g_2d: c.theta_g_2d,
            theta_g_3d: c.theta_g_3d,
            theta_iou: c.theta_iou,
            theta_hits: c.theta_hits,
            max_age_n: c.max_age_n,
            boundary_margin: c.boundary_margin,
            sentinel: c.sentinel,
            min_output_hits: c.min_output_hits,
        }
    }
}

impl From<CtConfig> for TrackerConfig {
    fn from(c: CtConfig) -> Self {
        TrackerConfig {
            theta_s: c.theta_s,
            theta_g_2d: c.theta_g_2d,
            theta_g_3d: c.theta_g_3d,
            theta_iou: c.theta_iou,
            theta_hits: c.theta_hits,
            max_age_n: c.max_age_n,
            boundary_margin: c.boundary_margin,
            sentinel: c.sentinel,
            min_output_hits: c.min_output_hits,
        }
    }
}

impl From<CtBox2D> for BBox2D {
    fn from(b: CtBox2D) -> Self {
        BBox2D {
            left: b.left,
            top: b.top,
            right: b.right,
            bottom: b.bottom,
        }
    }
}

impl From<BBox2D> for CtBox2D {
    fn from(b: BBox2D) -> Self {
        CtBox2D {
            left: b.left,
            top: b.top,
            right: b.right,
            bottom: b.bottom,
        }
    }
}

impl From<CtBox3D> for BBox3D {
    fn from(b: CtBox3D) -> Self {
        BBox3D {
            x: b.x,
            y: b.y,
            z: b.z,
            l: b.l,
            w: b.w,
            h: b.h,
            yaw: b.yaw,
        }
    }
}

impl From<BBox3D> for CtBox3D {
    fn from(b: BBox3D) -> Self {
        CtBox3D {
            x: b.x,
            y: b.y,
            z: b.z,
            l: b.l,
            w: b.w,
            h: b.h,
            yaw: b.yaw,
        }
    }
}

/// Slice from a C pointer and length; a null pointer is only valid with length 0.
///
/// # Safety
/// `ptr` must point to `len` initialized values when non-null.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], (CtStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err((
            CtStatus::NullPointer,
            "null array with non-zero length".into(),
        ));
    }
    // SAFETY: caller guarantees `len` readable elements at `ptr`.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

#[no_mangle]
pub extern "C" fn ct_default_config() -> CtConfig {
    default_config().into()
}

#[no_mangle]
pub extern "C" fn ct_iou_2d(a: CtBox2D, b: CtBox2D) -> f64 {
    iou_2d(&a.into(), &b.into())
}

/// Creates a tracker.
///
/// `projection` is the row-major 3x4 camera matrix. `cases` is a bit set of
/// `CT_CASE_*`; with `lidar_only` set the camera stream is ignored and every
/// confirmed LiDAR trajectory is reported. A null `config` means defaults.
///
/// # Safety
/// `projection` must point to 12 doubles, `config` must be null or valid, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_tracker_new(
    projection: *const f64,
    image_width: f64,
    image_height: f64,
    config: *const CtConfig,
    cases: u32,
    lidar_only: bool,
    out: *mut *mut CtTracker,
) -> CtStatus {
    guarded(|| {
        if projection.is_null() || out.is_null() {
            return Err((
                CtStatus::NullPointer,
                "projection and out must not be null".into(),
            ));
        }
        // SAFETY: caller guarantees 12 readable doubles.
        let p = unsafe { slice(projection, 12)? };
        let mut rows = [[0.0; 4]; 3];
        for (k, v) in p.iter().enumerate() {
            rows[k / 4][k % 4] = *v;
        }
        let calib = Calibration::new(rows, image_width, image_height).map_err(lift)?;
        let cfg: TrackerConfig = if config.is_null() {
            default_config()
        } else {
            // SAFETY: non-null and valid per the contract.
            unsafe { *config }.into()
        };
        let mode = if lidar_only {
            PipelineMode {
                cases: CaseMask::NONE,
                output: OutputMode::LidarOnly,
            }
        } else {
            PipelineMode::fused(CaseMask::from_bits(cases as u8))
        };
        let provider: Arc<dyn SimilarityProvider> = Arc::new(ZeroProvider);
        let inner =
            FusionTracker::new(Some(calib), provider.clone(), provider, cfg, mode).map_err(lift)?;
        let handle = Box::new(CtTracker {
            inner,
            next_camera_id: 0,
            next_lidar_id: 0,
            last_output: Vec::new(),
        });
        // SAFETY: `out` is non-null and writable.
        unsafe { *out = Box::into_raw(handle) };
        Ok(())
    })
}

/// Processes the next frame. `n_out` receives the number of reported tracks,
/// which [`ct_tracker_output`] then copies out.
///
/// # Safety
/// `tracker` must come from [`ct_tracker_new`]; each array must hold its
/// stated number of elements (or be null with length 0); `n_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn ct_tracker_step(
    tracker: *mut CtTracker,
    camera: *const CtCameraDetection,
    n_camera: usize,
    lidar: *const CtLidarDetection,
    n_lidar: usize,
    n_out: *mut usize,
) -> CtStatus {
    guarded(|| {
        // SAFETY: a live handle per the contract.
        let t = unsafe { tracker.as_mut() }
            .ok_or((CtStatus::NullPointer, "null tracker".to_string()))?;
        // SAFETY: lengths are the caller's.
        let (cam, lid) = unsafe { (slice(camera, n_camera)?, slice(lidar, n_lidar)?) };
        let frame = t.inner.next_frame();
        let cam_dets = cam
            .iter()
            .enumerate()
            .map(|(k, d)| {
                Detection::camera(frame, t.next_camera_id + k as u64, d.bbox.into(), d.score)
            })
            .collect::<crosstrack::Result<Vec<_>>>()
            .map_err(lift)?;
        let lid_dets = lid
            .iter()
            .enumerate()
            .map(|(k, d)| {
                Detection::lidar(frame, t.next_lidar_id + k as u64, d.bbox.into(), d.score)
            })
            .collect::<crosstrack::Result<Vec<_>>>()
            .map_err(lift)?;
        let out = t.inner.step(&cam_dets, &lid_dets).map_err(lift)?;
        t.next_camera_id += cam.len() as u64;
        t.next_lidar_id += lid.len() as u64;
        t.last_output = out.entries;
        if !n_out.is_null() {
            // SAFETY: non-null and writable.
            unsafe { *n_out = t.last_output.len() };
        }
        Ok(())
    })
}

/// Copies the last frame's reported tracks into `buf`. Fails with
/// `BufferTooSmall` (and sets `written` to the needed count) when `cap` is short.
///
/// # Safety
/// `tracker` must be live, `buf` must have room for `cap` entries (or be null
/// with `cap` 0), and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_tracker_output(
    tracker: *const CtTracker,
    buf: *mut CtOutputEntry,
    cap: usize,
    written: *mut usize,
) -> CtStatus {
    guarded(|| {
        // SAFETY: a live handle per the contract.
        let t = unsafe { tracker.as_ref() }
            .ok_or((CtStatus::NullPointer, "null tracker".to_string()))?;
        if written.is_null() {
            return Err((CtStatus::NullPointer, "null written".into()));
        }
        let n = t.last_output.len();
        // SAFETY: `written` is non-null.
        unsafe { *written = n };
        if n > cap {
            return Err((
                CtStatus::BufferTooSmall,
                format!("{n} entries, capacity {cap}"),
            ));
        }
        if n > 0 && buf.is_null() {
            return Err((CtStatus::NullPointer, "null buffer".into()));
        }
        for (k, e) in t.last_output.iter().enumerate() {
            let entry = CtOutputEntry {
                track_id: e.track_id,
                box2d: e.box2d.into(),
                box3d: e.box3d.into(),
                score: e.score,
            };
            // SAFETY: k < n <= cap.
            unsafe { ptr::write(buf.add(k), entry) };
        }
        Ok(())
    })
}

/// Releases a tracker; null is a no-op.
///
/// # Safety
/// `tracker` must be null or come from [`ct_tracker_new`], and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ct_tracker_free(tracker: *mut CtTracker) {
    if !tracker.is_null() {
        // SAFETY: created by Box::into_raw in ct_tracker_new.
        drop(unsafe { Box::from_raw(tracker) });
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `cap`; returns the full message length without the NUL.
///
/// # Safety
/// `buf` must have room for `cap` bytes, or be null with `cap` 0.
#[no_mangle]
pub unsafe extern "C" fn ct_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            // SAFETY: n + 1 <= cap bytes are writable.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}
