//! # avprosody
//!
//! Audiovisual prosody motion analysis: from 2D facial-landmark tracks and
//! audio to smoothed head-pitch and calibrated eyebrow-raise trajectories,
//! F0/intensity contours, correlation statistics between real and animated
//! talkers, and parametric expression-strength scaling.
//!
//! The pipeline mirrors a standard evaluation setup for virtual-human
//! animation:
//!
//! 1. **Ingest** 68-point landmark tracks (CSV/JSON) and optional WAV audio.
//! 2. **Smooth** landmark coordinates with a Savitzky-Golay filter
//!    (default window 13, order 2) to reduce inter-frame jitter.
//! 3. **Head pose** per frame from six landmarks via Perspective-n-Point
//!    (Levenberg-Marquardt on reprojection residuals); the pitch angle is
//!    the vertical head-rotation trajectory.
//! 4. **Eyebrow raise** as the eye-corner-to-inner-brow distance,
//!    perspective-compensated by the pitch cosine and calibrated to
//!    millimeters via the interocular distance.
//! 5. **Acoustics**: F0 contour (normalized difference function) and
//!    intensity contour from the session audio.
//! 6. **Compare** real vs. animated sessions with Pearson correlations per
//!    expression strength, and estimate the linear strength gain.
//! 7. **Synthesize** narrow-focus stimuli and render them to landmark
//!    tracks, which doubles as an end-to-end oracle for the whole chain.
//!
//! See the `avprosody-cli` crate for the command-line frontend.

pub mod acoustics;
pub mod comparison;
pub mod facial_metrics;
pub mod filtering;
pub mod head_pose;
pub mod io;
pub mod pipeline;
pub mod plot;
pub mod stats;
pub mod synthesis;
pub mod types;

pub use pipeline::{analyze, compare_sessions, AnalysisConfig, AnalysisResult};
pub use types::{LandmarkFrame, LandmarkTrack, MotionTrack, Point2, SessionManifest, Unit};
