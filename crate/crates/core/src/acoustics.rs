//! F0 and intensity contour extraction from mono audio.
//!
//! F0 uses the difference-function family of estimators: per analysis
//! frame, compute the squared difference function over candidate lags,
//! normalize it by its cumulative mean, take the first dip below the
//! voicing threshold, walk to the local minimum, and refine the lag by
//! parabolic interpolation. Frames with no dip below the threshold are
//! unvoiced and stored as gaps.
//!
//! Intensity is mean-square frame energy in dB relative to digital full
//! scale, floored at -120 dB. Both contours share the same framing, so
//! they always have identical lengths and hops.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{MotionTrack, Unit};

/// Intensity floor in dB for silent frames.
pub const INTENSITY_FLOOR_DB: f64 = -120.0;

/// Mono audio in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: f64,
    samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AudioError {
    #[error("sample rate must be positive and finite, got {0}")]
    InvalidSampleRate(f64),
    #[error("sample {index} is outside [-1, 1] or non-finite: {value}")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("audio too short: {samples} samples is less than one frame of {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("invalid F0 configuration: {0}")]
    InvalidConfig(String),
}

impl AudioBuffer {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self, AudioError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > 1.0)
        {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// F0 extraction parameters. The defaults cover typical adult speech,
/// including focal excursions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Config {
    /// Lower bound of the F0 search range, Hz.
    pub fmin: f64,
    /// Upper bound of the F0 search range, Hz.
    pub fmax: f64,
    /// Analysis frame length in seconds.
    pub frame_length: f64,
    /// Hop between frame starts in seconds.
    pub hop: f64,
    /// Threshold on the normalized difference function below which a frame
    /// counts as voiced.
    pub voicing_threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            fmin: 75.0,
            fmax: 400.0,
            frame_length: 0.040,
            hop: 0.010,
            voicing_threshold: 0.45,
        }
    }
}

impl F0Config {
    pub fn validate(&self, sample_rate: f64) -> Result<(), AudioError> {
        if !(self.fmin > 0.0 && self.fmin < self.fmax) {
            return Err(AudioError::InvalidConfig(format!(
                "need 0 < fmin < fmax, got fmin={}, fmax={}",
                self.fmin, self.fmax
            )));
        }
        if self.fmax >= sample_rate / 2.0 {
            return Err(AudioError::InvalidConfig(format!(
                "fmax {} exceeds the Nyquist limit {}",
                self.fmax,
                sample_rate / 2.0
            )));
        }
        if self.frame_length < 2.0 / self.fmin {
            return Err(AudioError::InvalidConfig(format!(
                "frame_length {} must cover at least two periods of fmin ({})",
                self.frame_length,
                2.0 / self.fmin
            )));
        }
        if !self.hop.is_finite() || self.hop <= 0.0 {
            return Err(AudioError::InvalidConfig("hop must be positive".into()));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return Err(AudioError::InvalidConfig(
                "voicing threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// F0 contour and intensity contour sharing one framing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodyContours {
    /// Hz; unvoiced frames are gaps.
    pub f0: MotionTrack,
    /// dB re full scale.
    pub intensity: MotionTrack,
    /// Hop in seconds (the contours' sample period).
    pub hop: f64,
}

struct Framing {
    frame_len: usize,
    hop_len: usize,
    count: usize,
}

fn framing(audio: &AudioBuffer, cfg: &F0Config) -> Result<Framing, AudioError> {
    cfg.validate(audio.sample_rate)?;
    let frame_len = (cfg.frame_length * audio.sample_rate).round() as usize;
    let hop_len = ((cfg.hop * audio.sample_rate).round() as usize).max(1);
    if audio.len() < frame_len || frame_len < 4 {
        return Err(AudioError::TooShort {
            samples: audio.len(),
            needed: frame_len,
        });
    }
    let count = (audio.len() - frame_len) / hop_len + 1;
    Ok(Framing {
        frame_len,
        hop_len,
        count,
    })
}

/// Squared difference function with a fixed integration window, so each lag
/// sums the same number of terms.
fn difference_function(frame: &[f64], tau_max: usize) -> Vec<f64> {
    let window = frame.len() - tau_max;
    let mut d = vec![0.0; tau_max + 1];
    for (tau, slot) in d.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for i in 0..window {
            let diff = frame[i] - frame[i + tau];
            acc += diff * diff;
        }
        *slot = acc;
    }
    d
}

/// Cumulative-mean-normalized difference function: d'(0) = 1 and
/// d'(tau) = d(tau) * tau / sum_{1..=tau} d(j).
fn cumulative_mean_normalize(d: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0; d.len()];
    let mut running = 0.0;
    for tau in 1..d.len() {
        running += d[tau];
        out[tau] = if running > 0.0 {
            d[tau] * tau as f64 / running
        } else {
            1.0
        };
    }
    out
}

/// Estimates the period of one frame in samples, or `None` when unvoiced.
fn frame_period(frame: &[f64], sample_rate: f64, cfg: &F0Config) -> Option<f64> {
    let tau_min = ((sample_rate / cfg.fmax).floor() as usize).max(2);
    let tau_max = (sample_rate / cfg.fmin).ceil() as usize;
    debug_assert!(tau_max < frame.len());

    let energy: f64 = frame.iter().map(|x| x * x).sum();
    if energy <= f64::EPSILON {
        return None;
    }

    let d = difference_function(frame, tau_max);
    let cmnd = cumulative_mean_normalize(&d);

    // First dip below the threshold, then walk down to its local minimum.
    let mut tau = (tau_min..=tau_max).find(|&t| cmnd[t] < cfg.voicing_threshold)?;
    while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }

    // Parabolic interpolation around the minimum.
    let refined = if tau > tau_min && tau < tau_max {
        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-12 {
            tau as f64 + 0.5 * (a - c) / denom
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    Some(refined)
}

/// Per-frame fundamental-frequency contour; unvoiced frames are gaps.
///
/// The output track's fps is 1/hop. Voiced values are clamped to
/// [fmin, fmax] (parabolic refinement can nudge an estimate marginally
/// past a range edge).
pub fn f0_contour(audio: &AudioBuffer, cfg: &F0Config) -> Result<MotionTrack, AudioError> {
    let framing = framing(audio, cfg)?;
    let values: Vec<Option<f64>> = (0..framing.count)
        .map(|k| {
            let start = k * framing.hop_len;
            let frame = &audio.samples[start..start + framing.frame_len];
            frame_period(frame, audio.sample_rate, cfg)
                .map(|period| (audio.sample_rate / period).clamp(cfg.fmin, cfg.fmax))
        })
        .collect();
    let fps = audio.sample_rate / framing.hop_len as f64;
    if values.iter().all(|v| v.is_none()) {
        // Fully unvoiced audio still yields a contour; rest value 0.
        return Ok(MotionTrack::with_rest(fps, Unit::Hertz, values, 0.0)
            .expect("framing guarantees at least one frame"));
    }
    Ok(MotionTrack::with_gaps(fps, Unit::Hertz, values).expect("values checked voiced and finite"))
}

/// Per-frame intensity in dB re full scale, same framing as [`f0_contour`].
pub fn intensity_contour(audio: &AudioBuffer, cfg: &F0Config) -> Result<MotionTrack, AudioError> {
    let framing = framing(audio, cfg)?;
    let values: Vec<f64> = (0..framing.count)
        .map(|k| {
            let start = k * framing.hop_len;
            let frame = &audio.samples[start..start + framing.frame_len];
            let mean_square = frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64;
            (10.0 * mean_square.log10()).max(INTENSITY_FLOOR_DB)
        })
        .collect();
    let fps = audio.sample_rate / framing.hop_len as f64;
    Ok(MotionTrack::new(fps, Unit::Decibels, values)
        .expect("framing guarantees at least one finite frame"))
}

/// Convenience wrapper producing both contours from one call.
pub fn prosody_contours(
    audio: &AudioBuffer,
    cfg: &F0Config,
) -> Result<ProsodyContours, AudioError> {
    Ok(ProsodyContours {
        f0: f0_contour(audio, cfg)?,
        intensity: intensity_contour(audio, cfg)?,
        hop: cfg.hop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Band-limited pulse train: a sum of harmonics of the fundamental
    /// with 1/k rolloff, normalized to the requested peak amplitude. The
    /// period is exact by construction even when it is a fractional number
    /// of samples.
    fn pulse_train(sample_rate: f64, f0: f64, duration: f64, amplitude: f64) -> AudioBuffer {
        let n = (sample_rate * duration) as usize;
        let harmonics = ((0.45 * sample_rate / f0) as usize).clamp(1, 20);
        let mut samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sample_rate;
                (1..=harmonics)
                    .map(|k| (2.0 * std::f64::consts::PI * k as f64 * f0 * t).sin() / k as f64)
                    .sum()
            })
            .collect();
        let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in &mut samples {
            *s *= amplitude / peak;
        }
        AudioBuffer::new(sample_rate, samples).unwrap()
    }

    fn sine(sample_rate: f64, f0: f64, duration: f64, amplitude: f64) -> AudioBuffer {
        let n = (sample_rate * duration) as usize;
        let samples = (0..n)
            .map(|i| amplitude * (2.0 * std::f64::consts::PI * f0 * i as f64 / sample_rate).sin())
            .collect();
        AudioBuffer::new(sample_rate, samples).unwrap()
    }

    #[test]
    fn pulse_train_f0_within_one_hz() {
        let audio = pulse_train(44_100.0, 120.0, 1.0, 0.9);
        let f0 = f0_contour(&audio, &F0Config::default()).unwrap();
        let voiced: Vec<f64> = f0.iter_valid().map(|(_, v)| v).collect();
        assert!(
            voiced.len() as f64 >= 0.95 * f0.len() as f64,
            "too few voiced frames: {}/{}",
            voiced.len(),
            f0.len()
        );
        for v in &voiced {
            assert!((v - 120.0).abs() <= 1.0, "estimate {v} off from 120 Hz");
        }
    }

    #[test]
    fn no_octave_errors_on_pulse_train() {
        let audio = pulse_train(44_100.0, 120.0, 1.0, 0.9);
        let f0 = f0_contour(&audio, &F0Config::default()).unwrap();
        for (_, v) in f0.iter_valid() {
            assert!((v - 240.0).abs() > 0.05 * 240.0, "octave-up error: {v}");
            assert!((v - 60.0).abs() > 0.05 * 60.0, "octave-down error: {v}");
        }
    }

    #[test]
    fn sine_f0_within_one_hz() {
        let audio = sine(48_000.0, 200.0, 0.5, 0.8);
        let f0 = f0_contour(&audio, &F0Config::default()).unwrap();
        assert!(f0.valid_count() > 0);
        for (_, v) in f0.iter_valid() {
            assert!((v - 200.0).abs() <= 1.0, "estimate {v} off from 200 Hz");
        }
    }

    #[test]
    fn silence_is_fully_unvoiced() {
        let audio = AudioBuffer::new(44_100.0, vec![0.0; 44_100]).unwrap();
        let f0 = f0_contour(&audio, &F0Config::default()).unwrap();
        assert_eq!(f0.valid_count(), 0);
        assert!(!f0.is_empty());
    }

    #[test]
    fn full_scale_square_wave_is_zero_db() {
        let n = 44_100;
        let samples: Vec<f64> = (0..n)
            .map(|i| if (i / 100) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let audio = AudioBuffer::new(44_100.0, samples).unwrap();
        let intensity = intensity_contour(&audio, &F0Config::default()).unwrap();
        for (_, v) in intensity.iter_valid() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 0.01);
        }
    }

    #[test]
    fn halving_amplitude_drops_six_db() {
        let audio = sine(44_100.0, 150.0, 0.5, 0.8);
        let half =
            AudioBuffer::new(44_100.0, audio.samples().iter().map(|x| x / 2.0).collect()).unwrap();
        let a = intensity_contour(&audio, &F0Config::default()).unwrap();
        let b = intensity_contour(&half, &F0Config::default()).unwrap();
        assert_eq!(a.len(), b.len());
        for ((_, x), (_, y)) in a.iter_valid().zip(b.iter_valid()) {
            assert_abs_diff_eq!(x - y, 6.02, epsilon = 0.01);
        }
    }

    #[test]
    fn silence_hits_intensity_floor() {
        let audio = AudioBuffer::new(44_100.0, vec![0.0; 8_820]).unwrap();
        let intensity = intensity_contour(&audio, &F0Config::default()).unwrap();
        for (_, v) in intensity.iter_valid() {
            assert_eq!(v, INTENSITY_FLOOR_DB);
        }
    }

    #[test]
    fn scale_law_above_floor() {
        let audio = sine(44_100.0, 220.0, 0.3, 0.5);
        for k in [0.1, 0.25, 0.9] {
            let scaled =
                AudioBuffer::new(44_100.0, audio.samples().iter().map(|x| x * k).collect())
                    .unwrap();
            let a = intensity_contour(&audio, &F0Config::default()).unwrap();
            let b = intensity_contour(&scaled, &F0Config::default()).unwrap();
            for ((_, x), (_, y)) in a.iter_valid().zip(b.iter_valid()) {
                assert_abs_diff_eq!(y - x, 20.0 * k.log10(), epsilon = 0.01);
            }
        }
    }

    #[test]
    fn contours_share_framing() {
        let audio = sine(48_000.0, 180.0, 0.73, 0.6);
        let contours = prosody_contours(&audio, &F0Config::default()).unwrap();
        assert_eq!(contours.f0.len(), contours.intensity.len());
        assert_abs_diff_eq!(contours.f0.fps(), contours.intensity.fps(), epsilon = 1e-12);
    }

    #[test]
    fn periodic_signals_within_one_percent() {
        // 95% of voiced frames within 1% of truth, across the search range.
        for (sr, f) in [(44_100.0, 100.0), (44_100.0, 330.0), (48_000.0, 85.0)] {
            let audio = sine(sr, f, 0.5, 0.7);
            let f0 = f0_contour(&audio, &F0Config::default()).unwrap();
            let voiced: Vec<f64> = f0.iter_valid().map(|(_, v)| v).collect();
            assert!(!voiced.is_empty());
            let close = voiced.iter().filter(|v| (*v - f).abs() <= 0.01 * f).count();
            assert!(
                close as f64 >= 0.95 * voiced.len() as f64,
                "only {close}/{} frames within 1% of {f} Hz",
                voiced.len()
            );
        }
    }

    #[test]
    fn too_short_audio_rejected() {
        let audio = AudioBuffer::new(44_100.0, vec![0.1; 100]).unwrap();
        assert!(matches!(
            f0_contour(&audio, &F0Config::default()),
            Err(AudioError::TooShort { .. })
        ));
    }

    #[test]
    fn out_of_range_sample_rejected() {
        assert!(matches!(
            AudioBuffer::new(44_100.0, vec![0.0, 1.5]),
            Err(AudioError::SampleOutOfRange { index: 1, .. })
        ));
    }
}
