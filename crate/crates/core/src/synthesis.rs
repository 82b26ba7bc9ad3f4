//! Parametric "expression strength" scaling of motion tracks and synthetic
//! narrow-focus stimuli.
//!
//! Strength scaling is defined about the rest value: 0% freezes the track
//! at its neutral level, 100% is the identity, 200% doubles every
//! excursion. This is the motion model behind the virtual human's global
//! strength parameter.
//!
//! The focus stimuli follow the characteristic narrow-focus pattern: a
//! head raise ending at focus onset, a pronounced downward pitch during
//! the focal interval, and an eyebrow raise held through the interval with
//! a release afterwards. Trajectories are built from raised-cosine
//! segments (C1-smooth, exact extrema), with a seeded skew so different
//! "talkers" produce slightly different but deterministic shapes. The
//! stimuli can be rendered into full 68-point landmark tracks through the
//! same projection model the analysis pipeline inverts, which makes them
//! end-to-end oracles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::head_pose::{project_points, CameraIntrinsics, FaceModel3D, Point3, Pose, PoseError};
use crate::types::{LandmarkFrame, LandmarkTrack, MotionTrack, Unit, LANDMARK_COUNT};

/// Global motion-magnitude parameter in percent, 0 (frozen) to 200
/// (doubled excursions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressionStrength {
    percent: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("expression strength must lie in [0, 200], got {0}")]
    InvalidStrength(f64),
    #[error("invalid stimulus spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Motion(#[from] crate::types::MotionError),
}

impl ExpressionStrength {
    pub fn new(percent: f64) -> Result<Self, SynthError> {
        if !(percent.is_finite() && (0.0..=200.0).contains(&percent)) {
            return Err(SynthError::InvalidStrength(percent));
        }
        Ok(Self { percent })
    }

    pub fn percent(&self) -> f64 {
        self.percent
    }
}

/// Scales every excursion about the rest value by `s.percent() / 100`.
/// Unit, fps, rest value, and gap positions are preserved.
pub fn apply_strength(base: &MotionTrack, s: ExpressionStrength) -> MotionTrack {
    let factor = s.percent / 100.0;
    let rest = base.rest_value();
    let values = base
        .values()
        .iter()
        .map(|v| v.map(|x| rest + factor * (x - rest)))
        .collect();
    MotionTrack::with_rest(base.fps(), base.unit(), values, rest)
        .expect("scaling a valid track stays valid")
}

/// Parameters of one synthetic narrow-focus stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusStimulusSpec {
    /// Total duration in seconds.
    pub duration: f64,
    /// Frame rate of the generated tracks.
    pub fps: f64,
    /// Start of the focal (stressed-word) interval, seconds.
    pub focus_start: f64,
    /// End of the focal interval, seconds.
    pub focus_end: f64,
    /// Head-raise amplitude before the focus, degrees.
    pub pre_raise_amp: f64,
    /// Downward pitch excursion during the focus, degrees.
    pub focal_pitch_amp: f64,
    /// Eyebrow-raise amplitude, millimeters.
    pub brow_raise_amp: f64,
    /// Seed for talker-idiosyncratic shape variation.
    pub idiosyncrasy_seed: u64,
}

impl FocusStimulusSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SynthError::InvalidSpec("duration must be positive".into()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SynthError::InvalidSpec("fps must be positive".into()));
        }
        if !(0.0 <= self.focus_start
            && self.focus_start < self.focus_end
            && self.focus_end <= self.duration)
        {
            return Err(SynthError::InvalidSpec(format!(
                "need 0 <= start < end <= duration, got [{}, {}] in {}",
                self.focus_start, self.focus_end, self.duration
            )));
        }
        for (name, amp) in [
            ("pre_raise_amp", self.pre_raise_amp),
            ("focal_pitch_amp", self.focal_pitch_amp),
            ("brow_raise_amp", self.brow_raise_amp),
        ] {
            if !(amp.is_finite() && amp >= 0.0) {
                return Err(SynthError::InvalidSpec(format!(
                    "{name} must be non-negative, got {amp}"
                )));
            }
        }
        Ok(())
    }
}

/// Skewed raised-cosine bump on [t0, t1]: rises 0 -> 1 over the first
/// `skew` fraction of the interval and falls back 1 -> 0 over the rest.
/// C1-smooth, exact unit peak at t0 + skew * (t1 - t0), zero outside.
fn bump(t: f64, t0: f64, t1: f64, skew: f64) -> f64 {
    if t1 <= t0 || t <= t0 || t >= t1 {
        return 0.0;
    }
    let u = (t - t0) / (t1 - t0);
    if u < skew {
        0.5 * (1.0 - (std::f64::consts::PI * u / skew).cos())
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (u - skew) / (1.0 - skew)).cos())
    }
}

/// Half raised-cosine rising 0 -> 1 on [t0, t1], clamped outside.
fn rise(t: f64, t0: f64, t1: f64) -> f64 {
    if t1 <= t0 || t >= t1 {
        return if t >= t1 { 1.0 } else { 0.0 };
    }
    if t <= t0 {
        return 0.0;
    }
    let u = (t - t0) / (t1 - t0);
    0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

struct StimulusShape {
    pre_start: f64,
    pre_skew: f64,
    focal_skew: f64,
    brow_lead: f64,
    brow_release_end: f64,
}

/// Snaps a bump's peak to the nearest interior sampling-grid point, so the
/// sampled track attains the bump amplitude exactly. Falls back to the raw
/// skew when the interval holds no interior sample.
fn snap_skew(raw_skew: f64, t0: f64, t1: f64, fps: f64) -> f64 {
    let len = t1 - t0;
    if len <= 0.0 {
        return raw_skew;
    }
    let lo = (t0 * fps).floor() as i64 + 1;
    let hi = (t1 * fps).ceil() as i64 - 1;
    if lo > hi {
        return raw_skew;
    }
    let k = ((t0 + raw_skew * len) * fps).round() as i64;
    let k = k.clamp(lo, hi);
    ((k as f64 / fps - t0) / len).clamp(1e-6, 1.0 - 1e-6)
}

/// Seeded shape parameters. The skews move bump peaks around without
/// changing the extremal values, so the contract on amplitudes stays
/// exact while different seeds give visibly different trajectories.
fn shape_for(spec: &FocusStimulusSpec) -> StimulusShape {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.idiosyncrasy_seed);
    let focal_len = spec.focus_end - spec.focus_start;
    let pre_len = spec.focus_start.min(focal_len) * rng.random_range(0.7..1.0);
    let release = (spec.duration - spec.focus_end).min(focal_len) * rng.random_range(0.6..1.0);
    let pre_start = spec.focus_start - pre_len;
    let pre_skew = snap_skew(
        rng.random_range(0.35..0.65),
        pre_start,
        spec.focus_start,
        spec.fps,
    );
    let focal_skew = snap_skew(
        rng.random_range(0.35..0.65),
        spec.focus_start,
        spec.focus_end,
        spec.fps,
    );
    StimulusShape {
        pre_start,
        pre_skew,
        focal_skew,
        brow_lead: pre_len * rng.random_range(0.8..1.0),
        brow_release_end: spec.focus_end + release,
    }
}

/// Generates the pitch and eyebrow trajectories for one focus stimulus.
///
/// The pitch track rests at 0 degrees, raises by `pre_raise_amp` ending at
/// focus onset, and dips to exactly `-focal_pitch_amp` inside the focal
/// interval. The brow track rests at 0 mm, reaches exactly
/// `brow_raise_amp` before the focus, holds it through the interval, and
/// releases afterwards. Deterministic for a given seed.
pub fn synth_focus_motion(
    spec: &FocusStimulusSpec,
) -> Result<(MotionTrack, MotionTrack), SynthError> {
    spec.validate()?;
    let shape = shape_for(spec);
    let n = (spec.duration * spec.fps + 1e-9).floor() as usize + 1;

    let mut pitch = Vec::with_capacity(n);
    let mut brow = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / spec.fps;
        let raise = spec.pre_raise_amp * bump(t, shape.pre_start, spec.focus_start, shape.pre_skew);
        let dip =
            spec.focal_pitch_amp * bump(t, spec.focus_start, spec.focus_end, shape.focal_skew);
        pitch.push(raise - dip);

        let attack = rise(t, spec.focus_start - shape.brow_lead, spec.focus_start);
        let release = 1.0 - rise(t, spec.focus_end, shape.brow_release_end);
        brow.push(spec.brow_raise_amp * attack.min(release));
    }

    let pitch = MotionTrack::with_rest(
        spec.fps,
        Unit::Degrees,
        pitch.into_iter().map(Some).collect(),
        0.0,
    )?;
    let brow = MotionTrack::with_rest(
        spec.fps,
        Unit::Millimeters,
        brow.into_iter().map(Some).collect(),
        0.0,
    )?;
    Ok((pitch, brow))
}

/// Canonical 68-point head geometry, consistent with the default
/// [`FaceModel3D`] anchors. Constructed so the default eyebrow-metric
/// landmarks line up vertically: the inner brow point (21) sits directly
/// above the inner eye corner (39) at the same depth, which makes the
/// projected brow-raise metric respond linearly to head-frame brow
/// displacement.
pub fn canonical_face_points() -> [Point3; LANDMARK_COUNT] {
    let p = Point3::new;
    // subject-right half of the jaw, ear to chin
    let jaw_right = [
        p(-318.0, 165.0, -345.0),
        p(-312.0, 80.0, -325.0),
        p(-300.0, -10.0, -300.0),
        p(-275.0, -95.0, -270.0),
        p(-235.0, -170.0, -230.0),
        p(-180.0, -235.0, -185.0),
        p(-120.0, -285.0, -140.0),
        p(-60.0, -318.0, -95.0),
    ];
    let mut pts = [p(0.0, 0.0, 0.0); LANDMARK_COUNT];
    // 0-16 jaw line
    for (i, q) in jaw_right.iter().enumerate() {
        pts[i] = *q;
        pts[16 - i] = Point3::new(-q.x, q.y, q.z);
    }
    pts[8] = p(0.0, -330.0, -65.0); // chin
                                    // 17-21 subject-right eyebrow (21 innermost), 22-26 mirrored
    let brow_right = [
        p(-262.0, 228.0, -115.0),
        p(-215.0, 243.0, -110.0),
        p(-165.0, 248.0, -110.0),
        p(-115.0, 238.0, -120.0),
        p(-70.0, 200.0, -135.0),
    ];
    for (i, q) in brow_right.iter().enumerate() {
        pts[17 + i] = *q;
        pts[26 - i] = Point3::new(-q.x, q.y, q.z);
    }
    // 27-30 nose bridge, 31-35 nose base
    pts[27] = p(0.0, 170.0, -90.0);
    pts[28] = p(0.0, 112.0, -55.0);
    pts[29] = p(0.0, 55.0, -25.0);
    pts[30] = p(0.0, 0.0, 0.0); // nose tip
    pts[31] = p(-55.0, -52.0, -60.0);
    pts[32] = p(-28.0, -56.0, -45.0);
    pts[33] = p(0.0, -58.0, -40.0);
    pts[34] = p(28.0, -56.0, -45.0);
    pts[35] = p(55.0, -52.0, -60.0);
    // 36-41 subject-right eye (36 outer corner, 39 inner corner)
    pts[36] = p(-225.0, 170.0, -135.0);
    pts[37] = p(-180.0, 190.0, -140.0);
    pts[38] = p(-118.0, 192.0, -140.0);
    pts[39] = p(-70.0, 170.0, -135.0);
    pts[40] = p(-118.0, 150.0, -140.0);
    pts[41] = p(-180.0, 148.0, -140.0);
    // 42-47 subject-left eye (42 inner corner, 45 outer corner)
    for (right, left) in [(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46)] {
        let q = pts[right];
        pts[left] = Point3::new(-q.x, q.y, q.z);
    }
    // 48-59 outer lip ring, 60-67 inner lip ring
    let outer = [
        p(-150.0, -150.0, -125.0),
        p(-100.0, -120.0, -110.0),
        p(-40.0, -105.0, -100.0),
        p(0.0, -100.0, -95.0),
        p(40.0, -105.0, -100.0),
        p(100.0, -120.0, -110.0),
        p(150.0, -150.0, -125.0),
        p(100.0, -185.0, -110.0),
        p(40.0, -200.0, -100.0),
        p(0.0, -205.0, -95.0),
        p(-40.0, -200.0, -100.0),
        p(-100.0, -185.0, -110.0),
    ];
    pts[48..60].copy_from_slice(&outer);
    let inner = [
        p(-110.0, -150.0, -115.0),
        p(-40.0, -135.0, -100.0),
        p(0.0, -132.0, -98.0),
        p(40.0, -135.0, -100.0),
        p(110.0, -150.0, -115.0),
        p(40.0, -165.0, -100.0),
        p(0.0, -168.0, -98.0),
        p(-40.0, -165.0, -100.0),
    ];
    pts[60..68].copy_from_slice(&inner);
    pts
}

/// Camera depth (model units along the optical axis) at which synthetic
/// faces are rendered. Deliberately weak perspective: the head pivots at
/// the nose tip, so the eye region's depth varies with pitch by roughly
/// y_eye * sin(pitch), and the projected eyebrow distance picks up
/// first-order errors of order (y_eye / depth) * sin(pitch) that the
/// cosine compensation cannot remove. At this depth those residuals stay
/// well inside the pipeline's recovery tolerances.
pub const SYNTH_CAMERA_DEPTH_MM: f64 = 32000.0;

/// 3D distance between the default interocular calibration landmarks
/// (inner eye corners) of the canonical face.
pub fn canonical_interocular_mm() -> f64 {
    let pts = canonical_face_points();
    let (a, b) = (pts[39], pts[42]);
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// Renders a focus stimulus into a 68-point landmark track.
///
/// Per frame, the head is posed with the stimulus pitch (yaw and roll
/// zero) at a fixed translation, the inner-brow landmark is displaced
/// along the head-frame up axis by the brow trajectory, and all 68 points
/// are projected through the pinhole camera. The six PnP anchor points of
/// `model` replace the canonical entries at `model.landmark_indices`, so
/// analysis with the same model inverts the rendering; brow displacement
/// uses landmark 21 (the default inner-brow index).
pub fn synth_landmark_track(
    spec: &FocusStimulusSpec,
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
) -> Result<LandmarkTrack, SynthError> {
    let (pitch, brow) = synth_focus_motion(spec)?;
    render_motion_to_landmarks(&pitch, &brow, model, cam)
}

/// Shared rendering backend for [`synth_landmark_track`] and for rendering
/// strength-scaled variants of the same stimulus, at the default depth.
pub fn render_motion_to_landmarks(
    pitch: &MotionTrack,
    brow: &MotionTrack,
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
) -> Result<LandmarkTrack, SynthError> {
    render_motion_at_depth(pitch, brow, model, cam, SYNTH_CAMERA_DEPTH_MM)
}

/// Renders pitch/brow trajectories into landmark frames with the head
/// posed at an explicit camera depth (model units).
pub fn render_motion_at_depth(
    pitch: &MotionTrack,
    brow: &MotionTrack,
    model: &FaceModel3D,
    cam: &CameraIntrinsics,
    depth: f64,
) -> Result<LandmarkTrack, SynthError> {
    model.validate()?;
    let mut base = canonical_face_points();
    let anchors = model.points();
    for (k, &idx) in model.landmark_indices.iter().enumerate() {
        base[idx] = anchors[k];
    }

    let brow_index = 21;
    let mut frames = Vec::with_capacity(pitch.len());
    for (k, (pv, bv)) in pitch.values().iter().zip(brow.values()).enumerate() {
        let (pitch_deg, brow_mm) = (
            pv.ok_or_else(|| SynthError::InvalidSpec("gap in pitch trajectory".into()))?,
            bv.ok_or_else(|| SynthError::InvalidSpec("gap in brow trajectory".into()))?,
        );
        let mut pts = base;
        pts[brow_index].y += brow_mm - brow.rest_value();
        let pose = Pose::new(pitch_deg, 0.0, 0.0, Point3::new(0.0, 0.0, depth));
        let projected = project_points(&pts, &pose, cam)?;
        frames.push(LandmarkFrame::new(k as f64 / pitch.fps(), projected));
    }
    Ok(LandmarkTrack::new(pitch.fps(), frames))
}

/// Crude voiced stimulus audio for demos and figures: a pulse train whose
/// rate and amplitude rise during the focal interval, mirroring the
/// F0/intensity excursion on a stressed word. Not a speech synthesizer.
pub fn synth_focus_audio(
    spec: &FocusStimulusSpec,
    sample_rate: f64,
) -> Result<Vec<f64>, SynthError> {
    spec.validate()?;
    let shape = shape_for(spec);
    let n = (spec.duration * sample_rate) as usize;
    let mut samples = vec![0.0; n];
    let mut t = 0.0;
    while t < spec.duration {
        let excursion = bump(t, spec.focus_start, spec.focus_end, shape.focal_skew);
        let f0 = 110.0 + 45.0 * excursion;
        let amp = 0.25 + 0.55 * excursion;
        let start = (t * sample_rate) as usize;
        // short decaying pulse so frames carry measurable energy
        for i in 0..64 {
            if start + i >= n {
                break;
            }
            samples[start + i] += amp * (-(i as f64) / 16.0).exp();
        }
        t += 1.0 / f0;
    }
    for s in &mut samples {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(samples)
}
