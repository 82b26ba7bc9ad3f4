//! The end-to-end analysis pipeline: landmark ingestion, smoothing, pose
//! and eyebrow extraction, optional audio contours, and session
//! comparison with Table-style reports.
//!
//! Pipeline order: validate -> smooth landmarks -> pitch (PnP) ->
//! calibrate -> eyebrow (cosine-compensated, mm) -> normalize both to the
//! first frame; audio contours are added when the session has audio.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::{prosody_contours, F0Config, ProsodyContours};
use crate::comparison::{
    correlation_matrix, estimate_strength_gain, CorrelationCell, MagnitudeFeature, StrengthGain,
};
use crate::facial_metrics::{
    calibration_from_track, eyebrow_track, normalize_to_first_frame, CalibrationScale,
    EyebrowConfig,
};
use crate::filtering::{smooth_landmarks, SgConfig};
use crate::head_pose::{pitch_track, CameraIntrinsics, FaceModel3D, PoseError};
use crate::io::{read_landmark_file, read_wav};
use crate::types::{MotionTrack, SessionManifest};

/// Every knob of the analysis, bundled so results carry their full
/// provenance. Fields omitted from a config file fall back to their
/// defaults (the camera default is the webcam approximation for 1280x720).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub sg: SgConfig,
    pub model: FaceModel3D,
    pub camera: CameraIntrinsics,
    pub eyebrow: EyebrowConfig,
    pub f0: F0Config,
}

/// Config snapshot embedded in every result, sufficient to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength_percent: Option<f64>,
    pub interocular_mm: f64,
    pub calibration: CalibrationScale,
    pub config: AnalysisConfig,
}

/// Output of [`analyze`]: normalized pitch and eyebrow trajectories plus
/// optional audio contours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    /// Head pitch in degrees, normalized to the first frame.
    pub pitch: MotionTrack,
    /// Eyebrow raise in millimeters, normalized to the first frame.
    pub eyebrow: MotionTrack,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contours: Option<ProsodyContours>,
    pub provenance: Provenance,
}

/// Whether a failure stems from bad input or from a numerical breakdown;
/// the CLI maps these to different exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numerical,
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub kind: ErrorKind,
    pub message: String,
}

/// Joins an error with its source chain, "outer: inner: ...". Skips
/// sources whose message the wrapper already repeats (transparent
/// wrappers, errors that format their cause inline).
fn chain_string(err: &(dyn std::error::Error + 'static)) -> String {
    let mut msg = err.to_string();
    let mut cursor = err.source();
    while let Some(cause) = cursor {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        cursor = cause.source();
    }
    msg
}

impl PipelineError {
    fn input(stage: &'static str, err: impl std::error::Error + 'static) -> Self {
        Self {
            stage,
            kind: ErrorKind::Input,
            message: chain_string(&err),
        }
    }

    fn numerical(stage: &'static str, err: impl std::error::Error + 'static) -> Self {
        Self {
            stage,
            kind: ErrorKind::Numerical,
            message: chain_string(&err),
        }
    }
}

fn pose_error_kind(e: &PoseError) -> ErrorKind {
    match e {
        PoseError::NonConvergence(_)
        | PoseError::DegenerateConfiguration
        | PoseError::BehindCamera { .. } => ErrorKind::Numerical,
        PoseError::AtFrame { source, .. } => pose_error_kind(source),
        _ => ErrorKind::Input,
    }
}

fn resolve(base: &Path, relative: &str) -> PathBuf {
    let p = Path::new(relative);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Runs the full analysis for one session. `base_dir` anchors the
/// manifest's relative paths (usually the manifest's own directory).
pub fn analyze(
    manifest: &SessionManifest,
    base_dir: &Path,
    config: &AnalysisConfig,
) -> Result<AnalysisResult, PipelineError> {
    manifest
        .validate()
        .map_err(|e| PipelineError::input("manifest", e))?;

    let raw = read_landmark_file(resolve(base_dir, &manifest.landmark_path))
        .map_err(|e| PipelineError::input("ingest", e))?;

    let smoothed =
        smooth_landmarks(&raw, &config.sg).map_err(|e| PipelineError::input("smooth", e))?;

    let pitch =
        pitch_track(&smoothed, &config.model, &config.camera).map_err(|e| PipelineError {
            stage: "pitch",
            kind: pose_error_kind(&e),
            message: e.to_string(),
        })?;

    let calibration = calibration_from_track(&smoothed, &config.eyebrow, manifest.interocular_mm)
        .map_err(|e| PipelineError::numerical("calibrate", e))?;

    let eyebrow = eyebrow_track(&smoothed, &pitch, &config.eyebrow, &calibration)
        .map_err(|e| PipelineError::numerical("eyebrow", e))?;

    let pitch =
        normalize_to_first_frame(&pitch).map_err(|e| PipelineError::numerical("normalize", e))?;
    let eyebrow =
        normalize_to_first_frame(&eyebrow).map_err(|e| PipelineError::numerical("normalize", e))?;

    let contours = match &manifest.audio_path {
        Some(rel) => {
            let audio =
                read_wav(resolve(base_dir, rel)).map_err(|e| PipelineError::input("audio", e))?;
            Some(
                prosody_contours(&audio, &config.f0)
                    .map_err(|e| PipelineError::numerical("contours", e))?,
            )
        }
        None => None,
    };

    Ok(AnalysisResult {
        pitch,
        eyebrow,
        contours,
        provenance: Provenance {
            label: manifest.label.clone(),
            strength_percent: manifest.strength_percent,
            interocular_mm: manifest.interocular_mm,
            calibration,
            config: config.clone(),
        },
    })
}

/// Correlations and strength-gain estimates between one real session and a
/// family of virtual-human sessions at different strengths.
///
/// The report embeds the provenance of every session that went into it,
/// so a result is reproducible from the report file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionComparison {
    pub real_label: String,
    /// Head-rotation block, one cell per strength (descending).
    pub pitch: Vec<CorrelationCell>,
    /// Eyebrow-raise block, one cell per strength (descending).
    pub eyebrow: Vec<CorrelationCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_gain: Option<StrengthGain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eyebrow_gain: Option<StrengthGain>,
    /// Processing notes (automatic resampling and the like).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub real_provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vh_provenance: Vec<Provenance>,
}

/// Compares an analyzed real session with analyzed virtual-human sessions.
///
/// Strengths come from each VH session's provenance (100% when absent).
/// Individual cell failures are recorded in the cell, not raised.
pub fn compare_sessions(real: &AnalysisResult, vh: &[AnalysisResult]) -> SessionComparison {
    let mut notes = Vec::new();
    let strength_of = |r: &AnalysisResult| r.provenance.strength_percent.unwrap_or(100.0);

    for v in vh {
        if (v.pitch.fps() - real.pitch.fps()).abs() > 1e-9 {
            notes.push(format!(
                "strength {}%: fps {} differs from real {}; resampled to the lower rate",
                strength_of(v),
                v.pitch.fps(),
                real.pitch.fps()
            ));
        }
    }

    let pitch_family: Vec<(f64, MotionTrack)> = vh
        .iter()
        .map(|v| (strength_of(v), v.pitch.clone()))
        .collect();
    let eyebrow_family: Vec<(f64, MotionTrack)> = vh
        .iter()
        .map(|v| (strength_of(v), v.eyebrow.clone()))
        .collect();

    let pitch_cells = correlation_matrix(&real.pitch, &real.provenance.label, &pitch_family);
    let eyebrow_cells = correlation_matrix(&real.eyebrow, &real.provenance.label, &eyebrow_family);

    let mut gain = |family: &[(f64, MotionTrack)], what: &str| match estimate_strength_gain(
        family,
        MagnitudeFeature::PeakToPeak,
    ) {
        Ok(g) => Some(g),
        Err(e) => {
            if !family.is_empty() {
                notes.push(format!("{what} gain not estimated: {e}"));
            }
            None
        }
    };
    let pitch_gain = gain(&pitch_family, "pitch");
    let eyebrow_gain = gain(&eyebrow_family, "eyebrow");

    SessionComparison {
        real_label: real.provenance.label.clone(),
        pitch: pitch_cells,
        eyebrow: eyebrow_cells,
        pitch_gain,
        eyebrow_gain,
        notes,
        real_provenance: real.provenance.clone(),
        vh_provenance: vh.iter().map(|v| v.provenance.clone()).collect(),
    }
}

fn render_block(
    out: &mut String,
    title: &str,
    rows: &[&SessionComparison],
    pick: impl Fn(&SessionComparison) -> &[CorrelationCell],
) {
    use std::fmt::Write;

    // union of strengths across rows, descending
    let mut strengths: Vec<f64> = rows
        .iter()
        .flat_map(|r| pick(r).iter().map(|c| c.strength_percent))
        .collect();
    strengths.sort_by(|a, b| b.total_cmp(a));
    strengths.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let _ = writeln!(out, "{title}");
    let _ = write!(out, "{:<16}", "Strength [%]");
    for s in &strengths {
        let _ = write!(out, "{:>9}", format_strength(*s));
    }
    let _ = writeln!(out);
    for row in rows {
        let _ = write!(out, "{:<16}", truncate(&row.real_label, 15));
        for s in &strengths {
            let cell = pick(row)
                .iter()
                .find(|c| (c.strength_percent - s).abs() < 1e-9);
            let text = match cell {
                Some(c) => match &c.report {
                    Some(rep) => format!("{:.2}", rep.r),
                    None => "n/a".to_string(),
                },
                None => "-".to_string(),
            };
            let _ = write!(out, "{text:>9}");
        }
        let _ = writeln!(out);
    }
}

fn format_strength(s: f64) -> String {
    if (s - s.round()).abs() < 1e-9 {
        format!("{}", s.round() as i64)
    } else {
        format!("{s}")
    }
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_string()
    } else {
        s.chars().take(max).collect()
    }
}

/// Renders comparisons as a plain-text table: one block per metric, rows
/// per session label, columns per strength (descending), followed by the
/// strength-gain estimates and a significance footnote.
pub fn render_table(comparisons: &[SessionComparison]) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "Pearson correlation, real talker vs. virtual human");
    let _ = writeln!(out);
    let rows: Vec<&SessionComparison> = comparisons.iter().collect();
    render_block(&mut out, "Head rotation (pitch)", &rows, |c| &c.pitch);
    let _ = writeln!(out);
    render_block(&mut out, "Eyebrow raise", &rows, |c| &c.eyebrow);

    let gains: Vec<String> = comparisons
        .iter()
        .flat_map(|c| {
            let mut lines = Vec::new();
            if let Some(g) = &c.pitch_gain {
                lines.push(format!(
                    "  {}: pitch {:+.2} deg per 50% strength (r^2 = {:.3})",
                    c.real_label, g.per_50_delta, g.fit_r2
                ));
            }
            if let Some(g) = &c.eyebrow_gain {
                lines.push(format!(
                    "  {}: eyebrow {:+.2} mm per 50% strength (r^2 = {:.3})",
                    c.real_label, g.per_50_delta, g.fit_r2
                ));
            }
            lines
        })
        .collect();
    if !gains.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "Strength gain (linear fit of peak-to-peak magnitude)");
        for line in gains {
            let _ = writeln!(out, "{line}");
        }
    }

    let ps: Vec<f64> = comparisons
        .iter()
        .flat_map(|c| c.pitch.iter().chain(&c.eyebrow))
        .filter_map(|cell| cell.report.as_ref().map(|r| r.p_value))
        .collect();
    if !ps.is_empty() {
        let max_p = ps.iter().cloned().fold(0.0, f64::max);
        let _ = writeln!(out);
        if max_p < 0.001 {
            let _ = writeln!(out, "All p < 0.001.");
        } else {
            let _ = writeln!(out, "Max p = {max_p:.4}.");
        }
    }
    out
}
