//! Rigid head-pose estimation from a six-landmark subset via
//! Perspective-n-Point, solved with damped (Levenberg-Marquardt) nonlinear
//! least squares on the reprojection residuals.
//!
//! # Conventions
//!
//! * Canonical head frame: origin at the nose tip, x to the subject's
//!   image-left, y up, z toward the camera.
//! * Camera frame: x right, y down (image convention), z into the scene;
//!   translation is the nose-tip position in this frame, in millimeters.
//! * The zero pose is an upright face looking straight at the camera; the
//!   axis flip between the head frame (y up) and the camera frame (y down)
//!   is part of the pose model, so Euler angles of a frontal upright face
//!   come out as (0, 0, 0) and solver initialization at the frontal pose
//!   works on real detector output.
//! * Euler composition is intrinsic yaw (about y), then pitch (about x),
//!   then roll (about z). Positive pitch raises the nose; a downward nod is
//!   negative pitch and plots as a dip.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LandmarkTrack, MotionTrack, Point2, Unit, LANDMARK_COUNT};

/// A 3D point in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// The six-point rigid face geometry used for pose solving, together with
/// the landmark indices those points correspond to in the 68-point scheme.
///
/// The default is a conventional generic head. Only angles matter for the
/// pitch analysis, so the absolute scale of the model is arbitrary; it is
/// absorbed by the recovered translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceModel3D {
    pub nose_tip: Point3,
    pub chin: Point3,
    /// Outer corner of the eye on the image-left side (subject's right).
    pub left_eye_outer: Point3,
    /// Outer corner of the eye on the image-right side (subject's left).
    pub right_eye_outer: Point3,
    pub mouth_left: Point3,
    pub mouth_right: Point3,
    /// Landmark indices of the six points above, in the same order.
    pub landmark_indices: [usize; 6],
}

impl Default for FaceModel3D {
    fn default() -> Self {
        Self {
            nose_tip: Point3::new(0.0, 0.0, 0.0),
            chin: Point3::new(0.0, -330.0, -65.0),
            left_eye_outer: Point3::new(-225.0, 170.0, -135.0),
            right_eye_outer: Point3::new(225.0, 170.0, -135.0),
            mouth_left: Point3::new(-150.0, -150.0, -125.0),
            mouth_right: Point3::new(150.0, -150.0, -125.0),
            landmark_indices: [30, 8, 36, 45, 48, 54],
        }
    }
}

impl FaceModel3D {
    /// Model points in landmark-index order.
    pub fn points(&self) -> [Point3; 6] {
        [
            self.nose_tip,
            self.chin,
            self.left_eye_outer,
            self.right_eye_outer,
            self.mouth_left,
            self.mouth_right,
        ]
    }

    /// Ensures the six points span 3D: the smallest singular value of the
    /// centered coordinates must exceed 1e-6 of the largest.
    pub fn validate(&self) -> Result<(), PoseError> {
        for (i, p) in self.points().iter().enumerate() {
            if !p.is_finite() {
                return Err(PoseError::InvalidModel(format!(
                    "non-finite model point at position {i}"
                )));
            }
        }
        for idx in self.landmark_indices {
            if idx >= LANDMARK_COUNT {
                return Err(PoseError::InvalidModel(format!(
                    "landmark index {idx} out of range"
                )));
            }
        }
        let pts = self.points();
        let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + p.vector()) / 6.0;
        let centered = nalgebra::DMatrix::from_fn(6, 3, |r, c| (pts[r].vector() - centroid)[c]);
        let svals = centered.svd(false, false).singular_values;
        let (max, min) = (svals.max(), svals.min());
        if min.is_nan() || min <= 1e-6 * max {
            return Err(PoseError::InvalidModel(
                "model points are coplanar or degenerate".into(),
            ));
        }
        Ok(())
    }
}

/// Pinhole camera parameters (no lens distortion).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for CameraIntrinsics {
    /// Webcam approximation for a 1280x720 image.
    fn default() -> Self {
        Self {
            fx: 1280.0,
            fy: 1280.0,
            cx: 640.0,
            cy: 360.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, PoseError> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(PoseError::InvalidCamera { fx, fy });
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// Common webcam approximation: focal lengths equal to the image width,
    /// principal point at the image center.
    pub fn for_image(width: f64, height: f64) -> Result<Self, PoseError> {
        Self::new(width, width, width / 2.0, height / 2.0)
    }
}

/// A rigid head pose: Euler angles in degrees, nose-tip translation in
/// camera-frame millimeters, plus the reprojection RMSE of the solve that
/// produced it (0 for constructed poses).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub translation: Point3,
    pub reprojection_rmse: f64,
}

impl Pose {
    pub fn new(pitch: f64, yaw: f64, roll: f64, translation: Point3) -> Self {
        Self {
            pitch,
            yaw,
            roll,
            translation,
            reprojection_rmse: 0.0,
        }
    }

    /// Frontal pose at the given depth.
    pub fn frontal(z_mm: f64) -> Self {
        Self::new(0.0, 0.0, 0.0, Point3::new(0.0, 0.0, z_mm))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("invalid face model: {0}")]
    InvalidModel(String),
    #[error("camera focal lengths must be positive, got fx={fx}, fy={fy}")]
    InvalidCamera { fx: f64, fy: f64 },
    #[error("point {index} is at or behind the camera plane (z = {z} mm)")]
    BehindCamera { index: usize, z: f64 },
    #[error("non-finite image point at position {0}")]
    NonFiniteImagePoint(usize),
    #[error("degenerate configuration: the six image points are collinear")]
    DegenerateConfiguration,
    #[error("PnP did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<PoseError>,
    },
}

/// Axis flip between the head frame (y up, z toward camera) and the camera
/// frame (y down, z into the scene). Equal to a 180-degree rotation about x.
fn rest_rotation() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Pitch rotation about x, signed so that positive pitch raises the nose
/// (+z axis tilts toward +y).
fn rot_pitch(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Full model-to-camera rotation for Euler angles in radians.
fn rotation(pitch: f64, yaw: f64, roll: f64) -> Matrix3<f64> {
    rot_y(yaw) * rot_pitch(pitch) * rot_z(roll) * rest_rotation()
}

/// Maps an angle in degrees into (-180, 180].
fn normalize_degrees(a: f64) -> f64 {
    let mut r = a.rem_euclid(360.0);
    if r > 180.0 {
        r -= 360.0;
    }
    r
}

fn project_camera_point(p: &Vector3<f64>, cam: &CameraIntrinsics) -> Point2 {
    Point2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy)
}

/// Projects an arbitrary set of head-frame points under `pose`.
///
/// This is the forward model behind [`project`]; it is also used to render
/// whole synthetic landmark frames.
pub fn project_points(
    points: &[Point3],
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<Vec<Point2>, PoseError> {
    let rot = rotation(
        pose.pitch.to_radians(),
        pose.yaw.to_radians(),
        pose.roll.to_radians(),
    );
    let t = pose.translation.vector();
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let cam_pt = rot * p.vector() + t;
            if cam_pt.z <= 1e-9 {
                return Err(PoseError::BehindCamera {
                    index: i,
                    z: cam_pt.z,
                });
            }
            Ok(project_camera_point(&cam_pt, cam))
        })
        .collect()
}

/// Pinhole projection of the six model points under `pose`.
pub fn project(
    model: &FaceModel3D,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<[Point2; 6], PoseError> {
    let pts = project_points(&model.points(), pose, cam)?;
    Ok([pts[0], pts[1], pts[2], pts[3], pts[4], pts[5]])
}

/// Maximum LM iterations for one solve.
const MAX_ITERATIONS: usize = 100;
/// Stop once the summed squared residual falls below this (px^2).
const COST_TOLERANCE: f64 = 1e-10;
const STEP_TOLERANCE: f64 = 1e-12;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e12;

struct PnpProblem<'a> {
    model_cam_frame: [Vector3<f64>; 6], // model points pre-multiplied by the rest rotation
    observed: &'a [Point2; 6],
    cam: &'a CameraIntrinsics,
}

impl PnpProblem<'_> {
    /// Residual vector (12 entries: u then v error per point) and cost.
    fn residuals(&self, params: &Vector6<f64>) -> Option<(Vec<f64>, f64)> {
        let rot = rot_y(params[1]) * rot_pitch(params[0]) * rot_z(params[2]);
        let t = Vector3::new(params[3], params[4], params[5]);
        let mut r = Vec::with_capacity(12);
        let mut cost = 0.0;
        for (x, obs) in self.model_cam_frame.iter().zip(self.observed) {
            let p = rot * x + t;
            if p.z <= 1e-9 {
                return None;
            }
            let proj = project_camera_point(&p, self.cam);
            let (du, dv) = (proj.x - obs.x, proj.y - obs.y);
            r.push(du);
            r.push(dv);
            cost += du * du + dv * dv;
        }
        Some((r, cost))
    }

    /// Analytic Jacobian of the residuals, 12x6, plus the residuals.
    fn jacobian(
        &self,
        params: &Vector6<f64>,
    ) -> Option<(nalgebra::SMatrix<f64, 12, 6>, Vec<f64>, f64)> {
        let (pitch, yaw, roll) = (params[0], params[1], params[2]);
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        let (sr, cr) = roll.sin_cos();

        let ry = rot_y(yaw);
        let rp = rot_pitch(pitch);
        let rz = rot_z(roll);
        let rot = ry * rp * rz;

        let d_rp = Matrix3::new(0.0, 0.0, 0.0, 0.0, -sp, cp, 0.0, -cp, -sp);
        let d_ry = Matrix3::new(-sy, 0.0, cy, 0.0, 0.0, 0.0, -cy, 0.0, -sy);
        let d_rz = Matrix3::new(-sr, -cr, 0.0, cr, -sr, 0.0, 0.0, 0.0, 0.0);

        let d_rot_pitch = ry * d_rp * rz;
        let d_rot_yaw = d_ry * rp * rz;
        let d_rot_roll = ry * rp * d_rz;

        let t = Vector3::new(params[3], params[4], params[5]);
        let mut jac = nalgebra::SMatrix::<f64, 12, 6>::zeros();
        let mut res = Vec::with_capacity(12);
        let mut cost = 0.0;

        for (i, (x, obs)) in self.model_cam_frame.iter().zip(self.observed).enumerate() {
            let p = rot * x + t;
            if p.z <= 1e-9 {
                return None;
            }
            let proj = project_camera_point(&p, self.cam);
            let (du, dv) = (proj.x - obs.x, proj.y - obs.y);
            res.push(du);
            res.push(dv);
            cost += du * du + dv * dv;

            let inv_z = 1.0 / p.z;
            // d(u,v)/d(camera point)
            let du_dp = Vector3::new(self.cam.fx * inv_z, 0.0, -self.cam.fx * p.x * inv_z * inv_z);
            let dv_dp = Vector3::new(0.0, self.cam.fy * inv_z, -self.cam.fy * p.y * inv_z * inv_z);

            let dp = [
                d_rot_pitch * x,
                d_rot_yaw * x,
                d_rot_roll * x,
                Vector3::x(),
                Vector3::y(),
                Vector3::z(),
            ];
            for (col, d) in dp.iter().enumerate() {
                jac[(2 * i, col)] = du_dp.dot(d);
                jac[(2 * i + 1, col)] = dv_dp.dot(d);
            }
        }
        Some((jac, res, cost))
    }
}

fn pose_to_params(pose: &Pose) -> Vector6<f64> {
    Vector6::new(
        pose.pitch.to_radians(),
        pose.yaw.to_radians(),
        pose.roll.to_radians(),
        pose.translation.x,
        pose.translation.y,
        pose.translation.z,
    )
}

fn params_to_pose(params: &Vector6<f64>, rmse: f64) -> Pose {
    Pose {
        pitch: normalize_degrees(params[0].to_degrees()),
        yaw: normalize_degrees(params[1].to_degrees()),
        roll: normalize_degrees(params[2].to_degrees()),
        translation: Point3::new(params[3], params[4], params[5]),
        reprojection_rmse: rmse,
    }
}

/// True when the six observed points are collinear within numerical
/// tolerance (smallest singular value of the centered coordinates below
/// 1e-9 of the largest).
fn points_collinear(points: &[Point2; 6]) -> bool {
    let cx = points.iter().map(|p| p.x).sum::<f64>() / 6.0;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / 6.0;
    let m = nalgebra::DMatrix::from_fn(6, 2, |r, c| {
        if c == 0 {
            points[r].x - cx
        } else {
            points[r].y - cy
        }
    });
    let svals = m.svd(false, false).singular_values;
    svals.min() <= 1e-9 * svals.max()
}

fn lm_minimize(problem: &PnpProblem, init: Vector6<f64>) -> Result<(Vector6<f64>, f64), PoseError> {
    let mut params = init;
    let (_, mut cost) = problem
        .residuals(&params)
        .ok_or(PoseError::NonConvergence(0))?;
    let mut lambda = LAMBDA_INIT;

    for _ in 0..MAX_ITERATIONS {
        if cost <= COST_TOLERANCE {
            return Ok((params, cost));
        }
        let Some((jac, res, _)) = problem.jacobian(&params) else {
            return Err(PoseError::NonConvergence(MAX_ITERATIONS));
        };
        let jt = jac.transpose();
        let hessian: Matrix6<f64> = jt * jac;
        let gradient: Vector6<f64> =
            jt * nalgebra::SVector::<f64, 12>::from_iterator(res.iter().copied());

        if gradient.amax() < 1e-14 {
            return Ok((params, cost));
        }

        // Damped step; raise lambda until the augmented system is solvable
        // and the step actually reduces the cost.
        let mut stepped = false;
        while lambda <= LAMBDA_MAX {
            let damped = hessian + Matrix6::identity() * lambda;
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-gradient));
            let candidate = params + delta;
            match problem.residuals(&candidate) {
                Some((_, new_cost)) if new_cost < cost => {
                    let cost_drop = cost - new_cost;
                    params = candidate;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    stepped = true;
                    if delta.norm() < STEP_TOLERANCE
                        || cost <= COST_TOLERANCE
                        || cost_drop <= 1e-14 * cost.max(1.0)
                    {
                        return Ok((params, cost));
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                }
            }
        }
        if !stepped {
            // Damping saturated without an acceptable step: we are at a
            // (possibly noisy) local minimum.
            return Ok((params, cost));
        }
    }
    Err(PoseError::NonConvergence(MAX_ITERATIONS))
}

/// Estimates the pose whose projection of `model` best matches the six
/// observed image points, in the least-squares sense.
///
/// With `init` the solver is warm-started (e.g. from the previous video
/// frame); otherwise it starts from the frontal pose at z = 1000 mm and,
/// if that attempt fails to converge, retries from eight coarse
/// pitch/yaw seeds at +/-20 degrees.
pub fn solve_pnp(
    points: &[Point2; 6],
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
    init: Option<&Pose>,
) -> Result<Pose, PoseError> {
    model.validate()?;
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(PoseError::NonFiniteImagePoint(i));
    }
    if points_collinear(points) {
        return Err(PoseError::DegenerateConfiguration);
    }

    let rest = rest_rotation();
    let model_pts = model.points();
    let problem = PnpProblem {
        model_cam_frame: std::array::from_fn(|i| rest * model_pts[i].vector()),
        observed: points,
        cam,
    };

    let finish = |params: Vector6<f64>, cost: f64| params_to_pose(&params, (cost / 6.0).sqrt());

    if let Some(p) = init {
        let (params, cost) = lm_minimize(&problem, pose_to_params(p))?;
        return Ok(finish(params, cost));
    }

    let frontal = pose_to_params(&Pose::frontal(1000.0));
    let mut best: Option<(Vector6<f64>, f64)> = None;
    let mut last_err = PoseError::NonConvergence(MAX_ITERATIONS);
    let seeds: [(f64, f64); 9] = [
        (0.0, 0.0),
        (20.0, 0.0),
        (-20.0, 0.0),
        (0.0, 20.0),
        (0.0, -20.0),
        (20.0, 20.0),
        (20.0, -20.0),
        (-20.0, 20.0),
        (-20.0, -20.0),
    ];
    for (i, (pitch, yaw)) in seeds.iter().enumerate() {
        let mut seed = frontal;
        seed[0] = pitch.to_radians();
        seed[1] = yaw.to_radians();
        match lm_minimize(&problem, seed) {
            Ok((params, cost)) => {
                if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                    best = Some((params, cost));
                }
                // The frontal attempt succeeding with a tight fit is the
                // common case; the grid is only a fallback.
                if i == 0 && cost <= 1e-8 {
                    break;
                }
            }
            Err(e) => last_err = e,
        }
    }
    match best {
        Some((params, cost)) => Ok(finish(params, cost)),
        None => Err(last_err),
    }
}

/// Per-frame pitch extraction over a whole track.
///
/// Each frame's solve is warm-started from the previous frame's pose. The
/// output has the track's fps and uses the first-frame pitch as rest
/// value. Errors carry the offending frame index.
pub fn pitch_track(
    track: &LandmarkTrack,
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
) -> Result<MotionTrack, PoseError> {
    model.validate()?;
    let mut values = Vec::with_capacity(track.frames.len());
    let mut previous: Option<Pose> = None;
    for (i, frame) in track.frames.iter().enumerate() {
        let observed: [Point2; 6] =
            std::array::from_fn(|k| frame.points[model.landmark_indices[k]]);
        let pose = solve_pnp(&observed, model, cam, previous.as_ref()).map_err(|e| {
            PoseError::AtFrame {
                frame: i,
                source: Box::new(e),
            }
        })?;
        values.push(pose.pitch);
        previous = Some(pose);
    }
    MotionTrack::new(track.fps, Unit::Degrees, values)
        .map_err(|e| PoseError::InvalidModel(format!("pitch track construction: {e}")))
}
