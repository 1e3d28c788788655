//! Constant-velocity Kalman filters.
//!
//! The image-plane filter uses the SORT layout `[u, v, s, r, du, dv, ds]`
//! (center, area, aspect ratio and their rates, aspect ratio held constant).
//! The 3D filter uses the AB3DMOT layout `[x, y, z, yaw, l, w, h, dx, dy, dz]`;
//! yaw is measured but carries no angular rate.
//!
//! Noise magnitudes (all in state units, one frame per step):
//!
//! | filter | initial P (measured / rates) | Q (measured / rates) | R |
//! |--------|------------------------------|----------------------|---|
//! | 2D     | 10 / 10 000                  | 1 / 0.01 (area 1e-4)  | 1, 1, 10, 10 |
//! | 3D     | 10 / 10 000                  | 1 / 0.01              | 1 |
//!
//! These are the published SORT/AB3DMOT magnitudes. On a noise-free
//! constant-velocity track they give a one-step-ahead error well under
//! 0.1 px (2D) and 0.05 m (3D) by the tenth update; `tests/acceptance.rs`
//! pins that.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::types::{wrap_angle, BBox2D, BBox3D, Detection, Stream};

pub const POSITION_VARIANCE: f64 = 10.0;
pub const RATE_VARIANCE_FACTOR: f64 = 1000.0;

type Vec7 = SVector<f64, 7>;
type Mat7 = SMatrix<f64, 7, 7>;
type Vec10 = SVector<f64, 10>;
type Mat10 = SMatrix<f64, 10, 10>;

fn kf_predict<const N: usize>(
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
    f: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let m = f * mean;
    let p = f * cov * f.transpose() + q;
    (m, symmetrize(p))
}

/// Measurement update in Joseph form. `innovation` is `z - H x` already
/// adjusted by the caller (angle wrapping).
fn kf_correct<const N: usize, const M: usize>(
    mean: &SVector<f64, N>,
    cov: &SMatrix<f64, N, N>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
    innovation: &SVector<f64, M>,
) -> (SVector<f64, N>, SMatrix<f64, N, N>) {
    let s = h * cov * h.transpose() + r;
    let s_inv = s
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| s.try_inverse())
        .expect("innovation covariance is positive definite");
    let k = cov * h.transpose() * s_inv;
    let m = mean + k * innovation;
    let i_kh = SMatrix::<f64, N, N>::identity() - k * h;
    let p = i_kh * cov * i_kh.transpose() + k * r * k.transpose();
    (m, symmetrize(p))
}

fn symmetrize<const N: usize>(p: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Image-plane filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Kf2dState {
    pub mean: Vec7,
    pub covariance: Mat7,
    /// Innovation of the last measurement update, `[du, dv, ds, dr]`.
    pub innovation: Option<SVector<f64, 4>>,
}

/// 3D filter state.
#[derive(Debug, Clone, PartialEq)]
pub struct Kf3dState {
    pub mean: Vec10,
    pub covariance: Mat10,
    /// Innovation of the last measurement update, `[dx, dy, dz, dyaw, dl, dw, dh]`.
    pub innovation: Option<SVector<f64, 7>>,
}

fn encode_2d(b: &BBox2D) -> SVector<f64, 4> {
    let w = b.width();
    let h = b.height();
    let (u, v) = b.center();
    SVector::<f64, 4>::new(u, v, w * h, w / h)
}

fn encode_3d(b: &BBox3D) -> SVector<f64, 7> {
    SVector::<f64, 7>::from_column_slice(&[b.x, b.y, b.z, b.yaw, b.l, b.w, b.h])
}

impl Kf2dState {
    fn transition() -> Mat7 {
        let mut f = Mat7::identity();
        f[(0, 4)] = 1.0;
        f[(1, 5)] = 1.0;
        f[(2, 6)] = 1.0;
        f
    }

    fn observation() -> SMatrix<f64, 4, 7> {
        SMatrix::<f64, 4, 7>::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
    }

    fn process_noise() -> Mat7 {
        Mat7::from_diagonal(&Vec7::from_column_slice(&[
            1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4,
        ]))
    }

    fn measurement_noise() -> SMatrix<f64, 4, 4> {
        SMatrix::<f64, 4, 4>::from_diagonal(&SVector::<f64, 4>::new(1.0, 1.0, 10.0, 10.0))
    }

    pub fn init(b: &BBox2D) -> Self {
        let z = encode_2d(b);
        let mut mean = Vec7::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let pos = POSITION_VARIANCE;
        let rate = POSITION_VARIANCE * RATE_VARIANCE_FACTOR;
        let covariance = Mat7::from_diagonal(&Vec7::from_column_slice(&[
            pos, pos, pos, pos, rate, rate, rate,
        ]));
        Kf2dState {
            mean,
            covariance,
            innovation: None,
        }
    }

    pub fn predict(&self) -> Self {
        let mut mean = self.mean;
        // keep the predicted area positive
        if mean[2] + mean[6] <= 0.0 {
            mean[6] = 0.0;
        }
        let (mean, covariance) = kf_predict(
            &mean,
            &self.covariance,
            &Self::transition(),
            &Self::process_noise(),
        );
        Kf2dState {
            mean,
            covariance,
            innovation: self.innovation,
        }
    }

    pub fn update(&self, b: &BBox2D) -> Self {
        let h = Self::observation();
        let innovation = encode_2d(b) - h * self.mean;
        let (mean, covariance) = kf_correct(
            &self.mean,
            &self.covariance,
            &h,
            &Self::measurement_noise(),
            &innovation,
        );
        Kf2dState {
            mean,
            covariance,
            innovation: Some(innovation),
        }
    }

    pub fn bbox(&self) -> Result<BBox2D> {
        let (u, v, s, r) = (self.mean[0], self.mean[1], self.mean[2], self.mean[3]);
        if !(s > 0.0 && r > 0.0) {
            return Err(Error::NonPositiveExtent);
        }
        let w = (s * r).sqrt();
        let h = s / w;
        BBox2D::new(u - 0.5 * w, v - 0.5 * h, u + 0.5 * w, v + 0.5 * h)
            .map_err(|_| Error::NonPositiveExtent)
    }
}

impl Kf3dState {
    fn transition() -> Mat10 {
        let mut f = Mat10::identity();
        f[(0, 7)] = 1.0;
        f[(1, 8)] = 1.0;
        f[(2, 9)] = 1.0;
        f
    }

    fn observation() -> SMatrix<f64, 7, 10> {
        SMatrix::<f64, 7, 10>::from_fn(|r, c| if r == c { 1.0 } else { 0.0 })
    }

    fn process_noise() -> Mat10 {
        let mut q = Mat10::identity();
        for i in 7..10 {
            q[(i, i)] = 0.01;
        }
        q
    }

    pub fn init(b: &BBox3D) -> Self {
        let mut mean = Vec10::zeros();
        mean.fixed_rows_mut::<7>(0).copy_from(&encode_3d(b));
        let mut covariance = Mat10::identity() * POSITION_VARIANCE;
        for i in 7..10 {
            covariance[(i, i)] *= RATE_VARIANCE_FACTOR;
        }
        Kf3dState {
            mean,
            covariance,
            innovation: None,
        }
    }

    pub fn predict(&self) -> Self {
        let (mut mean, covariance) = kf_predict(
            &self.mean,
            &self.covariance,
            &Self::transition(),
            &Self::process_noise(),
        );
        mean[3] = wrap_angle(mean[3]);
        Kf3dState {
            mean,
            covariance,
            innovation: self.innovation,
        }
    }

    pub fn update(&self, b: &BBox3D) -> Self {
        let h = Self::observation();
        let mut innovation = encode_3d(b) - h * self.mean;
        innovation[3] = wrap_angle(innovation[3]);
        let (mut mean, covariance) = kf_correct(
            &self.mean,
            &self.covariance,
            &h,
            &SMatrix::<f64, 7, 7>::identity(),
            &innovation,
        );
        mean[3] = wrap_angle(mean[3]);
        Kf3dState {
            mean,
            covariance,
            innovation: Some(innovation),
        }
    }

    pub fn bbox(&self) -> Result<BBox3D> {
        let m = &self.mean;
        if !(m[4] > 0.0 && m[5] > 0.0 && m[6] > 0.0) {
            return Err(Error::NonPositiveExtent);
        }
        Ok(BBox3D {
            x: m[0],
            y: m[1],
            z: m[2],
            yaw: wrap_angle(m[3]),
            l: m[4],
            w: m[5],
            h: m[6],
        })
    }
}

/// A track's motion filter; the variant follows the track's stream.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum MotionState {
    Image(Kf2dState),
    Space(Kf3dState),
}

/// Decoded filter box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateBox {
    Image(BBox2D),
    Space(BBox3D),
}

impl MotionState {
    pub fn init(det: &Detection) -> Result<Self> {
        match det.stream {
            Stream::Camera => det
                .box2d
                .as_ref()
                .map(|b| MotionState::Image(Kf2dState::init(b)))
                .ok_or(Error::MissingBox("2D")),
            Stream::Lidar => det
                .box3d
                .as_ref()
                .map(|b| MotionState::Space(Kf3dState::init(b)))
                .ok_or(Error::MissingBox("3D")),
        }
    }

    pub fn predict(&self) -> Self {
        match self {
            MotionState::Image(s) => MotionState::Image(s.predict()),
            MotionState::Space(s) => MotionState::Space(s.predict()),
        }
    }

    pub fn update(&self, det: &Detection) -> Result<Self> {
        match self {
            MotionState::Image(s) => det
                .box2d
                .as_ref()
                .map(|b| MotionState::Image(s.update(b)))
                .ok_or(Error::MissingBox("2D")),
            MotionState::Space(s) => det
                .box3d
                .as_ref()
                .map(|b| MotionState::Space(s.update(b)))
                .ok_or(Error::MissingBox("3D")),
        }
    }

    pub fn bbox(&self) -> Result<StateBox> {
        match self {
            MotionState::Image(s) => s.bbox().map(StateBox::Image),
            MotionState::Space(s) => s.bbox().map(StateBox::Space),
        }
    }

    pub fn covariance_trace(&self) -> f64 {
        match self {
            MotionState::Image(s) => s.covariance.trace(),
            MotionState::Space(s) => s.covariance.trace(),
        }
    }

    pub fn is_covariance_spd(&self) -> bool {
        match self {
            MotionState::Image(s) => s.covariance.cholesky().is_some(),
            MotionState::Space(s) => s.covariance.cholesky().is_some(),
        }
    }
}
