//! Shared data model: landmark frames and tracks, scalar motion tracks, and
//! session manifests.
//!
//! All types are immutable values after construction and may be shared
//! freely between threads. Validation happens at the boundaries
//! ([`LandmarkTrack::validate`], the `MotionTrack` constructors); everything
//! downstream may assume the invariants hold.
//!
//! Landmark indexing follows the standard 68-point facial scheme:
//! 0-16 jaw line, 17-26 eyebrows, 27-35 nose, 36-47 eyes, 48-67 mouth.
//! Image coordinates have the origin at the top-left corner with y
//! increasing downward.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of landmarks per frame in the 68-point scheme.
pub const LANDMARK_COUNT: usize = 68;

/// Tolerance, in seconds, for timestamp uniformity checks.
pub const TIMESTAMP_TOLERANCE_S: f64 = 1e-6;

/// A 2D image point in pixels (origin top-left, y increases downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One video frame's worth of facial landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    /// Timestamp in seconds from the start of the recording.
    pub t: f64,
    /// Exactly 68 points indexed by the standard scheme.
    pub points: Vec<Point2>,
}

impl LandmarkFrame {
    pub fn new(t: f64, points: Vec<Point2>) -> Self {
        Self { t, points }
    }
}

/// A fixed-rate sequence of landmark frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkTrack {
    /// Frame rate in frames per second.
    pub fps: f64,
    pub frames: Vec<LandmarkFrame>,
}

/// Validation failure for a [`LandmarkTrack`], pointing at the first
/// offending frame.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("track must contain at least one frame")]
    Empty,
    #[error("wrong point count at frame {frame}: expected {LANDMARK_COUNT}, got {got}")]
    WrongPointCount { frame: usize, got: usize },
    #[error("non-finite coordinate at frame {frame}, landmark {landmark}")]
    NonFinitePoint { frame: usize, landmark: usize },
    #[error("negative or non-finite timestamp at frame {frame}: {t}")]
    BadTimestamp { frame: usize, t: f64 },
    #[error(
        "non-uniform spacing at frame {frame}: dt {dt:.9} s differs from 1/fps {expected:.9} s"
    )]
    NonUniformSpacing {
        frame: usize,
        dt: f64,
        expected: f64,
    },
}

impl LandmarkTrack {
    pub fn new(fps: f64, frames: Vec<LandmarkFrame>) -> Self {
        Self { fps, frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks every track invariant: fps > 0, at least one frame, exactly 68
    /// finite points per frame, non-negative timestamps, and uniform frame
    /// spacing of 1/fps within [`TIMESTAMP_TOLERANCE_S`].
    ///
    /// Returns the error for the first offending frame. Validating an
    /// already-valid track is a no-op (idempotent).
    pub fn validate(&self) -> Result<&Self, TrackError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(TrackError::InvalidFps(self.fps));
        }
        if self.frames.is_empty() {
            return Err(TrackError::Empty);
        }
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.points.len() != LANDMARK_COUNT {
                return Err(TrackError::WrongPointCount {
                    frame: i,
                    got: frame.points.len(),
                });
            }
            if let Some(bad) = frame.points.iter().position(|p| !p.is_finite()) {
                return Err(TrackError::NonFinitePoint {
                    frame: i,
                    landmark: bad,
                });
            }
            if !frame.t.is_finite() || frame.t < 0.0 {
                return Err(TrackError::BadTimestamp {
                    frame: i,
                    t: frame.t,
                });
            }
        }
        let expected_dt = 1.0 / self.fps;
        for i in 1..self.frames.len() {
            let dt = self.frames[i].t - self.frames[i - 1].t;
            if dt <= 0.0 || (dt - expected_dt).abs() > TIMESTAMP_TOLERANCE_S {
                return Err(TrackError::NonUniformSpacing {
                    frame: i,
                    dt,
                    expected: expected_dt,
                });
            }
        }
        Ok(self)
    }
}

/// Convenience for building and validating in one step.
pub fn validate_track(track: LandmarkTrack) -> Result<LandmarkTrack, TrackError> {
    track.validate()?;
    Ok(track)
}

/// Physical unit of a [`MotionTrack`] sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Degrees,
    Millimeters,
    Pixels,
    Dimensionless,
    Hertz,
    Decibels,
}

impl std::fmt::Display for Unit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Unit::Degrees => "degrees",
            Unit::Millimeters => "mm",
            Unit::Pixels => "px",
            Unit::Dimensionless => "",
            Unit::Hertz => "Hz",
            Unit::Decibels => "dB",
        };
        f.write_str(s)
    }
}

/// Error constructing or consuming a [`MotionTrack`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("fps must be positive and finite, got {0}")]
    InvalidFps(f64),
    #[error("track must contain at least one sample")]
    Empty,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("non-finite rest value {0}")]
    NonFiniteRest(f64),
    #[error("track has no valid (non-gap) samples")]
    AllGaps,
}

/// A scalar time series sampled at a fixed rate.
///
/// Samples are `Option<f64>`: `None` marks an explicit gap (an unvoiced
/// audio frame, or a motion sample dropped by a numerical guard). Gaps
/// propagate through resampling and are excluded pairwise from
/// correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionTrack {
    fps: f64,
    unit: Unit,
    /// Reference/neutral level in the track's unit.
    rest_value: f64,
    values: Vec<Option<f64>>,
}

impl MotionTrack {
    /// Builds a gap-free track; `rest_value` defaults to the first sample.
    pub fn new(fps: f64, unit: Unit, values: Vec<f64>) -> Result<Self, MotionError> {
        let rest = *values.first().ok_or(MotionError::Empty)?;
        Self::with_rest(fps, unit, values.into_iter().map(Some).collect(), rest)
    }

    /// Builds a track that may contain gaps; `rest_value` defaults to the
    /// first valid sample.
    pub fn with_gaps(fps: f64, unit: Unit, values: Vec<Option<f64>>) -> Result<Self, MotionError> {
        let rest = values
            .iter()
            .flatten()
            .next()
            .copied()
            .ok_or(MotionError::AllGaps)?;
        Self::with_rest(fps, unit, values, rest)
    }

    /// Builds a track with an explicit rest value.
    pub fn with_rest(
        fps: f64,
        unit: Unit,
        values: Vec<Option<f64>>,
        rest_value: f64,
    ) -> Result<Self, MotionError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(MotionError::InvalidFps(fps));
        }
        if values.is_empty() {
            return Err(MotionError::Empty);
        }
        if let Some(bad) = values
            .iter()
            .position(|v| v.is_some_and(|x| !x.is_finite()))
        {
            return Err(MotionError::NonFiniteSample(bad));
        }
        if !rest_value.is_finite() {
            return Err(MotionError::NonFiniteRest(rest_value));
        }
        Ok(Self {
            fps,
            unit,
            rest_value,
            values,
        })
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn rest_value(&self) -> f64 {
        self.rest_value
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time span from the first to the last sample, in seconds.
    pub fn duration(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 / self.fps
    }

    /// Number of non-gap samples.
    pub fn valid_count(&self) -> usize {
        self.values.iter().flatten().count()
    }

    /// Iterates over `(index, value)` for non-gap samples.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|x| (i, x)))
    }

    /// Largest minus smallest valid sample, or `None` when no valid samples
    /// exist.
    pub fn peak_to_peak(&self) -> Option<f64> {
        let mut it = self.values.iter().flatten();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Some(max - min)
    }

    /// Returns a copy with every valid sample mapped through `f`; gaps stay
    /// gaps. The rest value is mapped as well.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            fps: self.fps,
            unit: self.unit,
            rest_value: f(self.rest_value),
            values: self.values.iter().map(|v| v.map(&f)).collect(),
        }
    }
}

/// Error raised when a [`SessionManifest`] violates its invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifestError {
    #[error("interocular_mm must be positive and finite, got {0}")]
    InvalidInterocular(f64),
    #[error("strength_percent must lie in [0, 200], got {0}")]
    InvalidStrength(f64),
}

/// Bookkeeping for one recorded session: where its files live and how to
/// calibrate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    /// Condition label, e.g. a focus condition such as "MANN".
    pub label: String,
    /// Path to the landmark CSV/JSON file (relative paths are resolved
    /// against the manifest's directory).
    pub landmark_path: String,
    /// Optional path to a mono WAV file with the session audio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
    /// Measured interocular distance of the talker, in millimeters.
    pub interocular_mm: f64,
    /// Expression strength of the session, when it is a parametrized
    /// animation (percent, 0-200).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength_percent: Option<f64>,
}

impl SessionManifest {
    pub fn validate(&self) -> Result<&Self, ManifestError> {
        if !(self.interocular_mm.is_finite() && self.interocular_mm > 0.0) {
            return Err(ManifestError::InvalidInterocular(self.interocular_mm));
        }
        if let Some(s) = self.strength_percent {
            if !(0.0..=200.0).contains(&s) {
                return Err(ManifestError::InvalidStrength(s));
            }
        }
        Ok(self)
    }
}
