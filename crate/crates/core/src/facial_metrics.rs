//! Eyebrow-raise measurement: raw pixel distance, perspective compensation
//! by the head-pitch cosine, pixel-to-millimeter calibration from the
//! interocular distance, and first-frame normalization.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LandmarkFrame, LandmarkTrack, MotionTrack, Unit, LANDMARK_COUNT};

/// Pitch magnitude (degrees) beyond which cosine compensation is rejected
/// and the sample is stored as a gap.
pub const PITCH_GUARD_DEGREES: f64 = 89.0;

/// Landmark indices for the eyebrow metric.
///
/// Defaults use the subject's right eye: inner corner 39 and innermost brow
/// point 21; the calibration pair is the two inner eye corners (39, 42).
/// Detector conventions vary, so all indices are configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EyebrowConfig {
    pub eye_inner_corner_index: usize,
    pub brow_inner_index: usize,
    pub interocular_indices: (usize, usize),
}

impl Default for EyebrowConfig {
    fn default() -> Self {
        Self {
            eye_inner_corner_index: 39,
            brow_inner_index: 21,
            interocular_indices: (39, 42),
        }
    }
}

impl EyebrowConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let idx = [
            self.eye_inner_corner_index,
            self.brow_inner_index,
            self.interocular_indices.0,
            self.interocular_indices.1,
        ];
        if let Some(&bad) = idx.iter().find(|&&i| i >= LANDMARK_COUNT) {
            return Err(MetricError::IndexOutOfRange(bad));
        }
        // The brow-distance pair and the calibration pair must each be
        // distinct; sharing the eye corner across the two pairs is fine
        // (and is the default).
        if self.eye_inner_corner_index == self.brow_inner_index
            || self.interocular_indices.0 == self.interocular_indices.1
            || self.brow_inner_index == self.interocular_indices.0
            || self.brow_inner_index == self.interocular_indices.1
        {
            return Err(MetricError::IndicesNotDistinct);
        }
        Ok(())
    }
}

/// Pixel-to-millimeter scale for one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScale {
    pub mm_per_pixel: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("landmark index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("eyebrow landmark indices must be pairwise distinct")]
    IndicesNotDistinct,
    #[error("pitch {0:.2} deg exceeds the +/-{PITCH_GUARD_DEGREES} deg compensation guard")]
    PitchOutOfRange(f64),
    #[error("interocular pixel distance is zero or degenerate")]
    DegenerateInterocular,
    #[error("interocular_mm must be positive and finite, got {0}")]
    InvalidInterocular(f64),
    #[error("landmark track ({landmarks} frames @ {landmark_fps} fps) does not match pitch track ({pitch} frames @ {pitch_fps} fps)")]
    TrackMismatch {
        landmarks: usize,
        landmark_fps: f64,
        pitch: usize,
        pitch_fps: f64,
    },
    #[error("track has no samples")]
    Empty,
    #[error(transparent)]
    Motion(#[from] crate::types::MotionError),
}

/// Euclidean pixel distance between the configured inner eye corner and
/// inner brow landmarks.
pub fn eyebrow_raise_raw(frame: &LandmarkFrame, cfg: &EyebrowConfig) -> f64 {
    let corner = frame.points[cfg.eye_inner_corner_index];
    let brow = frame.points[cfg.brow_inner_index];
    corner.distance(&brow)
}

/// Removes the foreshortening of a vertical facial distance under head
/// pitch by dividing by cos(pitch).
pub fn compensate_pitch(raw_px: f64, pitch_deg: f64) -> Result<f64, MetricError> {
    if !(pitch_deg.is_finite() && pitch_deg.abs() < PITCH_GUARD_DEGREES) {
        return Err(MetricError::PitchOutOfRange(pitch_deg));
    }
    Ok(raw_px / pitch_deg.to_radians().cos())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Derives the mm-per-pixel scale from the median interocular pixel
/// distance across the track and the talker's measured interocular
/// distance. The median resists occasional outlier frames.
pub fn calibration_from_track(
    track: &LandmarkTrack,
    cfg: &EyebrowConfig,
    interocular_mm: f64,
) -> Result<CalibrationScale, MetricError> {
    cfg.validate()?;
    if !(interocular_mm.is_finite() && interocular_mm > 0.0) {
        return Err(MetricError::InvalidInterocular(interocular_mm));
    }
    if track.frames.is_empty() {
        return Err(MetricError::Empty);
    }
    let (a, b) = cfg.interocular_indices;
    let mut distances: Vec<f64> = track
        .frames
        .iter()
        .map(|f| f.points[a].distance(&f.points[b]))
        .collect();
    let med = median(&mut distances);
    if !(med.is_finite() && med > f64::EPSILON) {
        return Err(MetricError::DegenerateInterocular);
    }
    Ok(CalibrationScale {
        mm_per_pixel: interocular_mm / med,
    })
}

/// Full eyebrow-raise trajectory in millimeters: raw pixel distance per
/// frame, cosine pitch compensation, then mm scaling.
///
/// Frames whose pitch exceeds the guard (or is a gap) are stored as gaps
/// and excluded pairwise from downstream correlations. The rest value is
/// the first valid sample.
pub fn eyebrow_track(
    track: &LandmarkTrack,
    pitch: &MotionTrack,
    cfg: &EyebrowConfig,
    scale: &CalibrationScale,
) -> Result<MotionTrack, MetricError> {
    cfg.validate()?;
    if track.frames.len() != pitch.len() || (track.fps - pitch.fps()).abs() > 1e-9 {
        return Err(MetricError::TrackMismatch {
            landmarks: track.frames.len(),
            landmark_fps: track.fps,
            pitch: pitch.len(),
            pitch_fps: pitch.fps(),
        });
    }
    let values: Vec<Option<f64>> = track
        .frames
        .iter()
        .zip(pitch.values())
        .map(|(frame, p)| {
            let raw = eyebrow_raise_raw(frame, cfg);
            p.and_then(|pitch_deg| {
                compensate_pitch(raw, pitch_deg)
                    .ok()
                    .map(|px| px * scale.mm_per_pixel)
            })
        })
        .collect();
    Ok(MotionTrack::with_gaps(
        track.fps,
        Unit::Millimeters,
        values,
    )?)
}

/// Subtracts the first (valid) sample from every sample, so trajectories
/// start at zero. Idempotent; the rest value becomes 0.
pub fn normalize_to_first_frame(track: &MotionTrack) -> Result<MotionTrack, MetricError> {
    let first = track
        .iter_valid()
        .next()
        .map(|(_, v)| v)
        .ok_or(MetricError::Empty)?;
    let values = track
        .values()
        .iter()
        .map(|v| v.map(|x| x - first))
        .collect();
    Ok(MotionTrack::with_rest(
        track.fps(),
        track.unit(),
        values,
        0.0,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{LandmarkFrame, Point2};
    use approx::assert_abs_diff_eq;

    fn frame_with(corner: Point2, brow: Point2) -> LandmarkFrame {
        let cfg = EyebrowConfig::default();
        let mut points = vec![Point2::new(1.0, 1.0); LANDMARK_COUNT];
        points[cfg.eye_inner_corner_index] = corner;
        points[cfg.brow_inner_index] = brow;
        LandmarkFrame::new(0.0, points)
    }

    #[test]
    fn vertical_offset_distance() {
        let f = frame_with(Point2::new(100.0, 100.0), Point2::new(100.0, 90.0));
        assert_abs_diff_eq!(
            eyebrow_raise_raw(&f, &EyebrowConfig::default()),
            10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn three_four_five_triangle() {
        let f = frame_with(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0));
        assert_abs_diff_eq!(
            eyebrow_raise_raw(&f, &EyebrowConfig::default()),
            5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coincident_points_give_zero() {
        let f = frame_with(Point2::new(7.0, 7.0), Point2::new(7.0, 7.0));
        assert_eq!(eyebrow_raise_raw(&f, &EyebrowConfig::default()), 0.0);
    }

    #[test]
    fn cosine_compensation() {
        assert_abs_diff_eq!(compensate_pitch(10.0, 0.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(compensate_pitch(10.0, 60.0).unwrap(), 20.0, epsilon = 1e-9);
        assert!(matches!(
            compensate_pitch(10.0, 89.5),
            Err(MetricError::PitchOutOfRange(_))
        ));
        // compensation never shrinks the measurement
        for p in [-45.0, -10.0, 0.0, 10.0, 45.0, 80.0] {
            assert!(compensate_pitch(10.0, p).unwrap() >= 10.0);
        }
    }

    fn calib_track(interocular_px: &[f64]) -> LandmarkTrack {
        let cfg = EyebrowConfig::default();
        let frames = interocular_px
            .iter()
            .enumerate()
            .map(|(k, &d)| {
                let mut points = vec![Point2::new(0.0, 0.0); LANDMARK_COUNT];
                points[cfg.interocular_indices.0] = Point2::new(0.0, 0.0);
                points[cfg.interocular_indices.1] = Point2::new(d, 0.0);
                LandmarkFrame::new(k as f64 / 30.0, points)
            })
            .collect();
        LandmarkTrack::new(30.0, frames)
    }

    #[test]
    fn calibration_ratio_and_median() {
        let scale = calibration_from_track(
            &calib_track(&[100.0, 100.0]),
            &EyebrowConfig::default(),
            63.0,
        )
        .unwrap();
        assert_abs_diff_eq!(scale.mm_per_pixel, 0.63, epsilon = 1e-12);

        let scale = calibration_from_track(
            &calib_track(&[90.0, 100.0, 110.0]),
            &EyebrowConfig::default(),
            63.0,
        )
        .unwrap();
        assert_abs_diff_eq!(scale.mm_per_pixel, 0.63, epsilon = 1e-12);
    }

    #[test]
    fn coincident_eyes_rejected() {
        assert!(matches!(
            calibration_from_track(&calib_track(&[0.0, 0.0]), &EyebrowConfig::default(), 63.0),
            Err(MetricError::DegenerateInterocular)
        ));
    }

    #[test]
    fn static_face_constant_track() {
        let cfg = EyebrowConfig::default();
        let mut points = vec![Point2::new(0.0, 0.0); LANDMARK_COUNT];
        points[cfg.eye_inner_corner_index] = Point2::new(50.0, 100.0);
        points[cfg.brow_inner_index] = Point2::new(50.0, 80.0);
        points[cfg.interocular_indices.1] = Point2::new(150.0, 100.0);
        points[cfg.interocular_indices.0] = Point2::new(50.0, 100.0);
        let frames: Vec<LandmarkFrame> = (0..5)
            .map(|k| LandmarkFrame::new(k as f64 / 30.0, points.clone()))
            .collect();
        let track = LandmarkTrack::new(30.0, frames);
        let pitch = MotionTrack::new(30.0, Unit::Degrees, vec![0.0; 5]).unwrap();
        let scale = calibration_from_track(&track, &cfg, 63.0).unwrap();
        let brow = eyebrow_track(&track, &pitch, &cfg, &scale).unwrap();
        assert_eq!(brow.unit(), Unit::Millimeters);
        for (_, v) in brow.iter_valid() {
            assert_abs_diff_eq!(v, 20.0 * 0.63, epsilon = 1e-9);
        }
    }

    #[test]
    fn guard_violations_become_gaps() {
        let cfg = EyebrowConfig::default();
        let track = calib_track(&[100.0, 100.0, 100.0]);
        let pitch = MotionTrack::new(30.0, Unit::Degrees, vec![0.0, 89.5, 10.0]).unwrap();
        let scale = CalibrationScale { mm_per_pixel: 1.0 };
        let brow = eyebrow_track(&track, &pitch, &cfg, &scale).unwrap();
        assert!(brow.values()[0].is_some());
        assert!(brow.values()[1].is_none());
        assert!(brow.values()[2].is_some());
    }

    #[test]
    fn mismatched_tracks_rejected() {
        let cfg = EyebrowConfig::default();
        let track = calib_track(&[100.0, 100.0]);
        let pitch = MotionTrack::new(30.0, Unit::Degrees, vec![0.0; 3]).unwrap();
        let scale = CalibrationScale { mm_per_pixel: 1.0 };
        assert!(matches!(
            eyebrow_track(&track, &pitch, &cfg, &scale),
            Err(MetricError::TrackMismatch { .. })
        ));
    }

    #[test]
    fn normalization_shifts_and_is_idempotent() {
        let t = MotionTrack::new(30.0, Unit::Millimeters, vec![3.0, 4.0, 5.0]).unwrap();
        let n = normalize_to_first_frame(&t).unwrap();
        let vals: Vec<f64> = n.iter_valid().map(|(_, v)| v).collect();
        assert_eq!(vals, vec![0.0, 1.0, 2.0]);
        assert_eq!(n.rest_value(), 0.0);
        assert_eq!(n.unit(), Unit::Millimeters);
        let twice = normalize_to_first_frame(&n).unwrap();
        assert_eq!(n, twice);
    }

    #[test]
    fn normalization_preserves_differences() {
        let t = MotionTrack::new(30.0, Unit::Degrees, vec![2.0, -1.0, 7.5, 2.0]).unwrap();
        let n = normalize_to_first_frame(&t).unwrap();
        let orig: Vec<f64> = t.iter_valid().map(|(_, v)| v).collect();
        let norm: Vec<f64> = n.iter_valid().map(|(_, v)| v).collect();
        for i in 1..orig.len() {
            assert_abs_diff_eq!(
                orig[i] - orig[i - 1],
                norm[i] - norm[i - 1],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn calibration_homogeneity() {
        // Scaling all coordinates by k leaves the final mm track unchanged.
        let cfg = EyebrowConfig::default();
        let build = |k: f64| {
            let frames: Vec<LandmarkFrame> = (0..4)
                .map(|f| {
                    let mut points = vec![Point2::new(0.0, 0.0); LANDMARK_COUNT];
                    points[cfg.eye_inner_corner_index] = Point2::new(50.0 * k, 100.0 * k);
                    points[cfg.brow_inner_index] = Point2::new(50.0 * k, (80.0 - f as f64) * k);
                    points[cfg.interocular_indices.1] = Point2::new(150.0 * k, 100.0 * k);
                    LandmarkFrame::new(f as f64 / 30.0, points)
                })
                .collect();
            LandmarkTrack::new(30.0, frames)
        };
        let pitch = MotionTrack::new(30.0, Unit::Degrees, vec![5.0; 4]).unwrap();
        for k in [0.5, 2.0, 13.7] {
            let t1 = build(1.0);
            let tk = build(k);
            let s1 = calibration_from_track(&t1, &cfg, 63.0).unwrap();
            let sk = calibration_from_track(&tk, &cfg, 63.0).unwrap();
            let b1 = eyebrow_track(&t1, &pitch, &cfg, &s1).unwrap();
            let bk = eyebrow_track(&tk, &pitch, &cfg, &sk).unwrap();
            for ((_, a), (_, b)) in b1.iter_valid().zip(bk.iter_valid()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }
}
