//! Geometric kernels on image boxes and 3D boxes.

use crate::error::{Error, Result};
use crate::types::{BBox2D, BBox3D, Calibration};

/// Intersection over union of two image boxes.
pub fn iou_2d(a: &BBox2D, b: &BBox2D) -> f64 {
    let iw = (a.right.min(b.right) - a.left.max(b.left)).max(0.0);
    let ih = (a.bottom.min(b.bottom) - a.top.max(b.top)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Euclidean distance between the two centroids.
pub fn centroid_distance_3d(a: &BBox3D, b: &BBox3D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// The eight corners of a box, heading rotating about the camera y axis
/// (KITTI `rotation_y` convention, length along x at zero heading).
pub fn box_corners(b: &BBox3D) -> [[f64; 3]; 8] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw, hh) = (0.5 * b.l, 0.5 * b.w, 0.5 * b.h);
    let mut out = [[0.0; 3]; 8];
    let mut k = 0;
    for dx in [hl, -hl] {
        for dy in [hh, -hh] {
            for dz in [hw, -hw] {
                out[k] = [b.x + c * dx + s * dz, b.y + dy, b.z - s * dx + c * dz];
                k += 1;
            }
        }
    }
    out
}

/// Image-plane box of a 3D box: the axis-aligned hull of the corners that
/// project with positive depth, clipped to the image.
pub fn project_box_3d(b: &BBox3D, calib: &Calibration) -> Result<BBox2D> {
    let mut hull: Option<[f64; 4]> = None;
    for p in box_corners(b) {
        let (u, v, depth) = calib.project_point(p);
        if depth <= 0.0 || !u.is_finite() || !v.is_finite() {
            continue;
        }
        hull = Some(match hull {
            None => [u, v, u, v],
            Some([l, t, r, bt]) => [l.min(u), t.min(v), r.max(u), bt.max(v)],
        });
    }
    let [l, t, r, bt] = hull.ok_or(Error::AllBehindCamera)?;
    let left = l.clamp(0.0, calib.image_width);
    let right = r.clamp(0.0, calib.image_width);
    let top = t.clamp(0.0, calib.image_height);
    let bottom = bt.clamp(0.0, calib.image_height);
    if right <= left || bottom <= top {
        return Err(Error::DegenerateProjection);
    }
    Ok(BBox2D {
        left,
        top,
        right,
        bottom,
    })
}

/// True when any edge of the box lies within `margin` pixels of the image border.
pub fn at_image_boundary(b: &BBox2D, calib: &Calibration, margin: f64) -> bool {
    b.left <= margin
        || b.top <= margin
        || b.right >= calib.image_width - margin
        || b.bottom >= calib.image_height - margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b2(l: f64, t: f64, r: f64, b: f64) -> BBox2D {
        BBox2D::new(l, t, r, b).unwrap()
    }

    fn pinhole() -> Calibration {
        Calibration::new(
            [
                [500.0, 0.0, 320.0, 0.0],
                [0.0, 500.0, 240.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            640.0,
            480.0,
        )
        .unwrap()
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = b2(1.0, 2.0, 11.0, 7.0);
        assert_eq!(iou_2d(&a, &a), 1.0);
        assert_eq!(iou_2d(&a, &b2(20.0, 20.0, 30.0, 30.0)), 0.0);
        // touching edges do not overlap
        assert_eq!(iou_2d(&a, &b2(11.0, 2.0, 20.0, 7.0)), 0.0);
    }

    #[test]
    fn iou_half_shift_matches_raster() {
        // 0.01 px raster: cell centers inside both boxes over cells inside either.
        let a = b2(0.0, 0.0, 10.0, 10.0);
        let b = b2(5.0, 0.0, 15.0, 10.0);
        let (mut inter, mut union) = (0u64, 0u64);
        for i in 0..1500 {
            let x = (i as f64 + 0.5) * 0.01;
            let (ina, inb) = ((0.0..10.0).contains(&x), (5.0..15.0).contains(&x));
            inter += (ina && inb) as u64;
            union += (ina || inb) as u64;
        }
        // rows are identical for both boxes, so the ratio is the column ratio
        let raster = inter as f64 / union as f64;
        assert_abs_diff_eq!(iou_2d(&a, &b), raster, epsilon = 1e-3);
    }

    #[test]
    fn centroid_distance_examples() {
        let a = BBox3D::new(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let b = BBox3D::new(3.0, 4.0, 0.0, 2.0, 1.0, 1.0, 0.3).unwrap();
        assert_eq!(centroid_distance_3d(&a, &a), 0.0);
        assert_abs_diff_eq!(centroid_distance_3d(&a, &b), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_symmetric_on_axis() {
        let calib = pinhole();
        let cube = BBox3D::new(0.0, 0.0, 10.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        let p = project_box_3d(&cube, &calib).unwrap();
        let (cu, cv) = p.center();
        assert_abs_diff_eq!(cu, 320.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cv, 240.0, epsilon = 1e-9);
        // nearest face at z = 9.5
        assert_abs_diff_eq!(p.right - 320.0, 500.0 * 0.5 / 9.5, epsilon = 1e-9);
    }

    #[test]
    fn projection_out_of_view_is_degenerate() {
        let calib = pinhole();
        let left = BBox3D::new(-100.0, 0.0, 10.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            project_box_3d(&left, &calib),
            Err(Error::DegenerateProjection)
        ));
        let behind = BBox3D::new(0.0, 0.0, -10.0, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            project_box_3d(&behind, &calib),
            Err(Error::AllBehindCamera)
        ));
    }

    #[test]
    fn projection_matches_per_corner_matrix_multiply() {
        let calib = Calibration::kitti_default();
        let bx = BBox3D::new(2.5, 1.2, 18.0, 4.2, 1.7, 1.5, 0.4).unwrap();
        let p = calib.projection;
        let mut hull = [
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ];
        let (s, c) = bx.yaw.sin_cos();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let (ox, oy, oz) = (sx * bx.l / 2.0, sy * bx.h / 2.0, sz * bx.w / 2.0);
                    let pt = [
                        bx.x + c * ox + s * oz,
                        bx.y + oy,
                        bx.z - s * ox + c * oz,
                        1.0,
                    ];
                    let row = |r: usize| (0..4).map(|k| p[(r, k)] * pt[k]).sum::<f64>();
                    let (hu, hv, hz) = (row(0), row(1), row(2));
                    let (u, v) = (hu / hz, hv / hz);
                    hull = [
                        hull[0].min(u),
                        hull[1].min(v),
                        hull[2].max(u),
                        hull[3].max(v),
                    ];
                }
            }
        }
        let got = project_box_3d(&bx, &calib).unwrap();
        assert_abs_diff_eq!(got.left, hull[0], epsilon = 1e-6);
        assert_abs_diff_eq!(got.top, hull[1], epsilon = 1e-6);
        assert_abs_diff_eq!(got.right, hull[2], epsilon = 1e-6);
        assert_abs_diff_eq!(got.bottom, hull[3], epsilon = 1e-6);
    }

    #[test]
    fn boundary_examples() {
        let calib = pinhole();
        assert!(at_image_boundary(
            &b2(0.0, 100.0, 50.0, 150.0),
            &calib,
            10.0
        ));
        assert!(!at_image_boundary(
            &b2(200.0, 200.0, 300.0, 300.0),
            &calib,
            10.0
        ));
        assert!(at_image_boundary(
            &b2(500.0, 200.0, 635.0, 300.0),
            &calib,
            10.0
        ));
    }

    fn arb_box2d() -> impl Strategy<Value = BBox2D> {
        (0.0..100.0f64, 0.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64)
            .prop_map(|(l, t, w, h)| BBox2D::new(l, t, l + w, t + h).unwrap())
    }

    fn arb_box3d() -> impl Strategy<Value = BBox3D> {
        (-20.0..20.0f64, -3.0..3.0f64, 1.0..60.0f64)
            .prop_map(|(x, y, z)| BBox3D::new(x, y, z, 4.0, 1.8, 1.5, 0.0).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box2d(), b in arb_box2d()) {
            let ab = iou_2d(&a, &b);
            prop_assert_eq!(ab, iou_2d(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_one_iff_equal(a in arb_box2d(), b in arb_box2d()) {
            let same = (a.left - b.left).abs() < 1e-9 && (a.top - b.top).abs() < 1e-9
                && (a.right - b.right).abs() < 1e-9 && (a.bottom - b.bottom).abs() < 1e-9;
            prop_assert_eq!(iou_2d(&a, &b) > 1.0 - 1e-9, same);
            prop_assert!(iou_2d(&a, &a) > 1.0 - 1e-12);
        }

        #[test]
        fn centroid_triangle_inequality(a in arb_box3d(), b in arb_box3d(), c in arb_box3d()) {
            let ab = centroid_distance_3d(&a, &b);
            let bc = centroid_distance_3d(&b, &c);
            let ac = centroid_distance_3d(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab, centroid_distance_3d(&b, &a));
        }

        #[test]
        fn receding_box_never_grows(x in -3.0..3.0f64, y in -1.0..1.0f64, z in 6.0..40.0f64,
                                    dz in 0.0..20.0f64, yaw in -3.1..3.1f64) {
            let calib = pinhole();
            let near = BBox3D::new(x, y, z, 4.0, 1.8, 1.5, yaw).unwrap();
            let far = BBox3D { z: z + dz, ..near };
            if let (Ok(a), Ok(b)) = (project_box_3d(&near, &calib), project_box_3d(&far, &calib)) {
                // clipping can hide part of the near box, so only unclipped hulls are compared
                if !at_image_boundary(&a, &calib, 0.0) {
                    prop_assert!(b.area() <= a.area() + 1e-6);
                }
            }
        }
    }
}
