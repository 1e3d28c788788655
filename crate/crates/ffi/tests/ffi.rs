use std::path::Path;
use std::process::Command;
use std::ptr;
use std::sync::Arc;

use crosstrack::affinity::{SimilarityProvider, ZeroProvider};
use crosstrack::sim::{scripted_case, ScriptedCase};
use crosstrack::tracker::{track_sequence, PipelineMode};
use crosstrack::types::{default_config, Calibration};
use crosstrack_ffi::*;

fn projection(c: &Calibration) -> [f64; 12] {
    let mut p = [0.0; 12];
    for i in 0..3 {
        for j in 0..4 {
            p[i * 4 + j] = c.projection[(i, j)];
        }
    }
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { ct_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn default_config_matches_core() {
    let c: crosstrack::types::TrackerConfig = ct_default_config().into();
    assert_eq!(c, default_config());
}

#[test]
fn iou_through_the_abi() {
    let a = CtBox2D {
        left: 0.0,
        top: 0.0,
        right: 10.0,
        bottom: 10.0,
    };
    let b = CtBox2D {
        left: 5.0,
        top: 0.0,
        right: 15.0,
        bottom: 10.0,
    };
    assert!((ct_iou_2d(a, b) - 50.0 / 150.0).abs() < 1e-12);
}

#[test]
fn constructor_errors() {
    let calib = Calibration::kitti_default();
    let p = projection(&calib);
    let mut t: *mut CtTracker = ptr::null_mut();
    let s = unsafe {
        ct_tracker_new(
            ptr::null(),
            1242.0,
            375.0,
            ptr::null(),
            CT_CASES_ALL,
            false,
            &mut t,
        )
    };
    assert_eq!(s, CtStatus::NullPointer);

    let zeros = [0.0; 12];
    let s = unsafe {
        ct_tracker_new(
            zeros.as_ptr(),
            1242.0,
            375.0,
            ptr::null(),
            CT_CASES_ALL,
            false,
            &mut t,
        )
    };
    assert_eq!(s, CtStatus::InvalidCalibration);
    assert!(!last_error().is_empty());

    let mut cfg = ct_default_config();
    cfg.theta_iou = 2.0;
    let s = unsafe { ct_tracker_new(p.as_ptr(), 1242.0, 375.0, &cfg, CT_CASES_ALL, false, &mut t) };
    assert_eq!(s, CtStatus::InvalidConfig);
    assert!(t.is_null());
    unsafe { ct_tracker_free(ptr::null_mut()) };
}

#[test]
fn handle_matches_core_tracker() {
    let cfg = default_config();
    for (case, lidar_only) in [
        (ScriptedCase::E, false),
        (ScriptedCase::D, false),
        (ScriptedCase::D, true),
    ] {
        let sc = scripted_case(case, &cfg);
        let z: Arc<dyn SimilarityProvider> = Arc::new(ZeroProvider);
        let mode = if lidar_only {
            PipelineMode::lidar_baseline()
        } else {
            PipelineMode::full()
        };
        let expected = track_sequence(
            &sc.camera_dets,
            &sc.lidar_dets,
            &sc.calib,
            z.clone(),
            z,
            &cfg,
            mode,
        )
        .unwrap();

        let p = projection(&sc.calib);
        let mut t: *mut CtTracker = ptr::null_mut();
        let s = unsafe {
            ct_tracker_new(
                p.as_ptr(),
                sc.calib.image_width,
                sc.calib.image_height,
                ptr::null(),
                CT_CASES_ALL,
                lidar_only,
                &mut t,
            )
        };
        assert_eq!(s, CtStatus::Ok);
        for (f, want_frame) in expected.iter().enumerate() {
            let cam: Vec<CtCameraDetection> = sc.camera_dets[f]
                .iter()
                .map(|d| CtCameraDetection {
                    bbox: d.box2d.unwrap().into(),
                    score: d.score,
                })
                .collect();
            let lid: Vec<CtLidarDetection> = sc.lidar_dets[f]
                .iter()
                .map(|d| CtLidarDetection {
                    bbox: d.box3d.unwrap().into(),
                    score: d.score,
                })
                .collect();
            let mut n = 0usize;
            let s = unsafe {
                ct_tracker_step(t, cam.as_ptr(), cam.len(), lid.as_ptr(), lid.len(), &mut n)
            };
            assert_eq!(s, CtStatus::Ok);
            let mut buf = vec![
                CtOutputEntry {
                    track_id: 0,
                    box2d: CtBox2D {
                        left: 0.0,
                        top: 0.0,
                        right: 0.0,
                        bottom: 0.0
                    },
                    box3d: CtBox3D {
                        x: 0.0,
                        y: 0.0,
                        z: 0.0,
                        l: 0.0,
                        w: 0.0,
                        h: 0.0,
                        yaw: 0.0
                    },
                    score: 0.0,
                };
                n
            ];
            let mut written = 0usize;
            let s = unsafe { ct_tracker_output(t, buf.as_mut_ptr(), buf.len(), &mut written) };
            assert_eq!(s, CtStatus::Ok);
            assert_eq!(written, want_frame.entries.len());
            for (got, want) in buf.iter().zip(&want_frame.entries) {
                assert_eq!(got.track_id, want.track_id);
                assert_eq!(got.box3d, want.box3d.into());
                assert_eq!(got.box2d, want.box2d.into());
            }
        }
        unsafe { ct_tracker_free(t) };
    }
}

#[test]
fn short_buffer_reports_needed_size() {
    let sc = scripted_case(ScriptedCase::B, &default_config());
    let p = projection(&sc.calib);
    let mut t: *mut CtTracker = ptr::null_mut();
    unsafe {
        ct_tracker_new(
            p.as_ptr(),
            1242.0,
            375.0,
            ptr::null(),
            CT_CASES_ALL,
            false,
            &mut t,
        )
    };
    let f = 5;
    for k in 0..=f {
        let cam: Vec<CtCameraDetection> = sc.camera_dets[k]
            .iter()
            .map(|d| CtCameraDetection {
                bbox: d.box2d.unwrap().into(),
                score: d.score,
            })
            .collect();
        let lid: Vec<CtLidarDetection> = sc.lidar_dets[k]
            .iter()
            .map(|d| CtLidarDetection {
                bbox: d.box3d.unwrap().into(),
                score: d.score,
            })
            .collect();
        unsafe {
            ct_tracker_step(
                t,
                cam.as_ptr(),
                cam.len(),
                lid.as_ptr(),
                lid.len(),
                ptr::null_mut(),
            )
        };
    }
    let mut written = 0usize;
    let s = unsafe { ct_tracker_output(t, ptr::null_mut(), 0, &mut written) };
    assert_eq!(s, CtStatus::BufferTooSmall);
    assert_eq!(written, 1);

    let bad = [CtCameraDetection {
        bbox: CtBox2D {
            left: 5.0,
            top: 0.0,
            right: 1.0,
            bottom: 1.0,
        },
        score: 0.5,
    }];
    let s = unsafe { ct_tracker_step(t, bad.as_ptr(), 1, ptr::null(), 0, ptr::null_mut()) };
    assert_eq!(s, CtStatus::InvalidArgument);
    let s = unsafe { ct_tracker_step(t, ptr::null(), 3, ptr::null(), 0, ptr::null_mut()) };
    assert_eq!(s, CtStatus::NullPointer);
    unsafe { ct_tracker_free(t) };
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("crosstrack.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "ct_tracker_new",
        "ct_tracker_step",
        "ct_tracker_output",
        "ct_tracker_free",
        "ct_last_error",
        "ct_iou_2d",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    // compile check only where a C compiler is installed
    if let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-x", "c"])
        .arg(&header)
        .output()
    {
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
