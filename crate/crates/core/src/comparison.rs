//! Statistical comparison of motion tracks: resampling onto a common grid,
//! Pearson correlation with t-distribution significance, correlation
//! matrices over expression strengths, and linear strength-gain
//! estimation.
//!
//! Gap samples are handled by pairwise deletion: a sample pair enters the
//! correlation only when both tracks are valid at that index, and the
//! reported `n` is the used-pair count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::student_t_two_sided_p;
use crate::types::{MotionTrack, Unit};

/// Pearson correlation between two tracks, with significance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Sample correlation coefficient in [-1, 1].
    pub r: f64,
    /// Two-sided p-value from t = r * sqrt((n-2)/(1-r^2)) with n-2 degrees
    /// of freedom; exactly 0 when |r| = 1.
    pub p_value: f64,
    /// Number of jointly valid sample pairs used.
    pub n: usize,
    pub label_a: String,
    pub label_b: String,
}

/// Linear effect of the expression-strength parameter on a magnitude
/// feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthGain {
    /// Change of the magnitude feature per 50 percentage points of
    /// strength, in the track's unit.
    pub per_50_delta: f64,
    /// Feature value extrapolated to strength 0%.
    pub intercept: f64,
    /// Coefficient of determination of the linear fit.
    pub fit_r2: f64,
}

/// Magnitude feature used by [`estimate_strength_gain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnitudeFeature {
    /// Peak-to-peak range of the valid samples.
    PeakToPeak,
    /// Largest absolute deviation from the rest value inside a labeled
    /// focus interval (seconds).
    FocalExtremum { start: f64, end: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("track needs at least 2 samples to resample, got {0}")]
    TooShortToResample(usize),
    #[error("target fps must be positive and finite, got {0}")]
    InvalidTargetFps(f64),
    #[error("tracks differ in length ({0} vs {1}) or fps; resample first")]
    LengthMismatch(usize, usize),
    #[error("fewer than 3 jointly valid sample pairs ({0})")]
    TooFewPairs(usize),
    #[error("track '{0}' is constant; correlation undefined")]
    ConstantTrack(String),
    #[error("need at least 2 distinct strengths, got {0}")]
    TooFewStrengths(usize),
    #[error("strengths have zero variance")]
    ZeroStrengthVariance,
    #[error("track for strength {0}% has no valid samples")]
    EmptyTrack(f64),
    #[error(transparent)]
    Motion(#[from] crate::types::MotionError),
}

/// Linearly interpolates a track onto a uniform grid at `target_fps`
/// spanning the same time interval. A resampled point is a gap whenever
/// either neighboring source sample is a gap.
pub fn resample(track: &MotionTrack, target_fps: f64) -> Result<MotionTrack, CompareError> {
    if track.len() < 2 {
        return Err(CompareError::TooShortToResample(track.len()));
    }
    if !(target_fps.is_finite() && target_fps > 0.0) {
        return Err(CompareError::InvalidTargetFps(target_fps));
    }
    let ratio = track.fps() / target_fps;
    let duration = track.duration();
    let count = (duration * target_fps + 1e-9).floor() as usize + 1;
    let src = track.values();
    let max_index = (src.len() - 1) as f64;

    let values: Vec<Option<f64>> = (0..count)
        .map(|j| {
            let u = (j as f64 * ratio).min(max_index);
            let i0 = u.floor() as usize;
            let frac = u - i0 as f64;
            if frac <= 1e-12 {
                src[i0]
            } else if frac >= 1.0 - 1e-12 {
                src[i0 + 1]
            } else {
                match (src[i0], src[i0 + 1]) {
                    (Some(a), Some(b)) => Some(a + frac * (b - a)),
                    _ => None,
                }
            }
        })
        .collect();

    Ok(MotionTrack::with_rest(
        target_fps,
        track.unit(),
        values,
        track.rest_value(),
    )?)
}

/// Resamples both tracks to the lower of the two frame rates and truncates
/// them to the common time span, so they can be correlated index-by-index.
pub fn align(a: &MotionTrack, b: &MotionTrack) -> Result<(MotionTrack, MotionTrack), CompareError> {
    let target_fps = a.fps().min(b.fps());
    let duration = a.duration().min(b.duration());
    let count = (duration * target_fps + 1e-9).floor() as usize + 1;
    let cut = |t: &MotionTrack| -> Result<MotionTrack, CompareError> {
        let r = resample(t, target_fps)?;
        let values = r.values()[..count.min(r.len())].to_vec();
        Ok(MotionTrack::with_rest(
            target_fps,
            r.unit(),
            values,
            r.rest_value(),
        )?)
    };
    Ok((cut(a)?, cut(b)?))
}

/// Sample Pearson correlation over jointly valid pairs, with a two-sided
/// p-value from the t distribution.
///
/// Requires equal length and fps (use [`align`] first), at least 3 valid
/// pairs, and non-constant tracks.
pub fn pearson(
    a: &MotionTrack,
    b: &MotionTrack,
    label_a: &str,
    label_b: &str,
) -> Result<ComparisonReport, CompareError> {
    if a.len() != b.len() || (a.fps() - b.fps()).abs() > 1e-9 {
        return Err(CompareError::LengthMismatch(a.len(), b.len()));
    }
    let pairs: Vec<(f64, f64)> = a
        .values()
        .iter()
        .zip(b.values())
        .filter_map(|(x, y)| x.zip(*y))
        .collect();
    let n = pairs.len();
    if n < 3 {
        return Err(CompareError::TooFewPairs(n));
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 {
        return Err(CompareError::ConstantTrack(label_a.to_string()));
    }
    if syy <= 0.0 {
        return Err(CompareError::ConstantTrack(label_b.to_string()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let p_value = if (1.0 - r * r) <= f64::EPSILON {
        0.0
    } else {
        let t = r * ((nf - 2.0) / (1.0 - r * r)).sqrt();
        student_t_two_sided_p(t, nf - 2.0)
    };
    Ok(ComparisonReport {
        r,
        p_value,
        n,
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
    })
}

/// One cell of a strength-comparison table. Failed cells keep their error
/// message so one bad cell cannot abort the rest of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub strength_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Correlates a real-talker track against one virtual-human track per
/// strength. Cells are ordered by descending strength.
pub fn correlation_matrix(
    real: &MotionTrack,
    real_label: &str,
    vh: &[(f64, MotionTrack)],
) -> Vec<CorrelationCell> {
    let mut cells: Vec<CorrelationCell> = vh
        .iter()
        .map(|(strength, track)| {
            let outcome = align(real, track)
                .and_then(|(a, b)| pearson(&a, &b, real_label, &format!("{strength}%")));
            match outcome {
                Ok(report) => CorrelationCell {
                    strength_percent: *strength,
                    report: Some(report),
                    error: None,
                },
                Err(e) => CorrelationCell {
                    strength_percent: *strength,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    cells.sort_by(|a, b| b.strength_percent.total_cmp(&a.strength_percent));
    cells
}

fn magnitude(track: &MotionTrack, feature: MagnitudeFeature) -> Option<f64> {
    match feature {
        MagnitudeFeature::PeakToPeak => track.peak_to_peak(),
        MagnitudeFeature::FocalExtremum { start, end } => track
            .iter_valid()
            .filter(|(i, _)| {
                let t = *i as f64 / track.fps();
                t >= start && t <= end
            })
            .map(|(_, v)| (v - track.rest_value()).abs())
            .fold(None, |acc: Option<f64>, m| {
                Some(acc.map_or(m, |a| a.max(m)))
            }),
    }
}

/// Ordinary least squares of the per-track magnitude feature against the
/// strength percentage; `per_50_delta` is 50 times the slope.
pub fn estimate_strength_gain(
    tracks: &[(f64, MotionTrack)],
    feature: MagnitudeFeature,
) -> Result<StrengthGain, CompareError> {
    let mut strengths: Vec<f64> = tracks.iter().map(|(s, _)| *s).collect();
    strengths.sort_by(f64::total_cmp);
    strengths.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if strengths.len() < 2 {
        return Err(CompareError::TooFewStrengths(strengths.len()));
    }

    let points: Vec<(f64, f64)> = tracks
        .iter()
        .map(|(s, t)| {
            magnitude(t, feature)
                .map(|m| (*s, m))
                .ok_or(CompareError::EmptyTrack(*s))
        })
        .collect::<Result<_, _>>()?;

    let n = points.len() as f64;
    let mean_s = points.iter().map(|(s, _)| s).sum::<f64>() / n;
    let mean_m = points.iter().map(|(_, m)| m).sum::<f64>() / n;
    let (mut sss, mut ssm) = (0.0, 0.0);
    for (s, m) in &points {
        sss += (s - mean_s) * (s - mean_s);
        ssm += (s - mean_s) * (m - mean_m);
    }
    if sss <= 0.0 {
        return Err(CompareError::ZeroStrengthVariance);
    }
    let slope = ssm / sss;
    let intercept = mean_m - slope * mean_s;

    let ss_tot: f64 = points
        .iter()
        .map(|(_, m)| (m - mean_m) * (m - mean_m))
        .sum();
    let ss_res: f64 = points
        .iter()
        .map(|(s, m)| {
            let fit = intercept + slope * s;
            (m - fit) * (m - fit)
        })
        .sum();
    let fit_r2 = if ss_tot <= f64::EPSILON {
        if ss_res <= f64::EPSILON {
            1.0
        } else {
            0.0
        }
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };

    Ok(StrengthGain {
        per_50_delta: 50.0 * slope,
        intercept,
        fit_r2,
    })
}

/// Unit-preserving helper used by tests and the synthetic pipeline.
pub fn track_from_values(fps: f64, unit: Unit, values: Vec<f64>) -> MotionTrack {
    MotionTrack::new(fps, unit, values).expect("caller provides non-empty finite values")
}
