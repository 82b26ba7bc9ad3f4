//! File formats: landmark CSV/JSON, RIFF/WAV PCM audio, session manifests,
//! and JSON serialization of analysis results.
//!
//! # Landmark CSV
//!
//! Header `frame,t,x0,y0,...,x67,y67` (138 columns), one row per frame,
//! UTF-8, `.` decimal separator, no gaps. The frame rate is inferred from
//! the timestamp column, so CSV files need at least two rows; the JSON
//! variant carries `fps` explicitly and accepts single-frame tracks.
//!
//! # WAV
//!
//! 16-bit signed little-endian PCM, mono or stereo (stereo is downmixed by
//! averaging). Extra RIFF chunks before `data` are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::AudioBuffer;
use crate::types::{
    LandmarkFrame, LandmarkTrack, Point2, SessionManifest, TrackError, LANDMARK_COUNT,
};

/// Columns in a landmark CSV row: frame, t, then 68 (x, y) pairs.
pub const CSV_COLUMNS: usize = 2 + 2 * LANDMARK_COUNT;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid JSON")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: invalid landmark track")]
    InvalidTrack {
        path: String,
        #[source]
        source: TrackError,
    },
    #[error("{path}: unsupported WAV: {message}")]
    UnsupportedWav { path: String, message: String },
    #[error("{path}: {message}")]
    Audio { path: String, message: String },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn expected_header() -> String {
    let mut h = String::from("frame,t");
    for i in 0..LANDMARK_COUNT {
        h.push_str(&format!(",x{i},y{i}"));
    }
    h
}

/// Serde mirror of the CSV schema for the JSON variant.
#[derive(Serialize, Deserialize)]
struct LandmarkFileJson {
    fps: f64,
    frames: Vec<LandmarkFrame>,
}

/// Reads a landmark track from CSV or JSON (decided by file extension;
/// anything but `.json` is treated as CSV). The result always passes
/// track validation.
pub fn read_landmark_file(path: impl AsRef<Path>) -> Result<LandmarkTrack, IoError> {
    let path = path.as_ref();
    let track = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        read_landmark_json(path)?
    } else {
        read_landmark_csv(path)?
    };
    track.validate().map_err(|source| IoError::InvalidTrack {
        path: path.display().to_string(),
        source,
    })?;
    Ok(track)
}

fn read_landmark_csv(path: &Path) -> Result<LandmarkTrack, IoError> {
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.map_err(|e| file_err(path, e))?;
    if header.trim() != expected_header() {
        return Err(parse_err(
            path,
            1,
            format!(
                "malformed header: expected 'frame,t,x0,y0,...,x67,y67' ({CSV_COLUMNS} columns), got '{}'",
                header.chars().take(48).collect::<String>()
            ),
        ));
    }

    let mut frames = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| file_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != CSV_COLUMNS {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {CSV_COLUMNS} columns, got {}", cells.len()),
            ));
        }
        let mut nums = Vec::with_capacity(CSV_COLUMNS);
        for (col, cell) in cells.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(
                    path,
                    line_no,
                    format!("column {col} is not a number: '{cell}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("column {col} is not finite"),
                ));
            }
            nums.push(v);
        }
        let t = nums[1];
        let points = nums[2..]
            .chunks_exact(2)
            .map(|xy| Point2::new(xy[0], xy[1]))
            .collect();
        frames.push(LandmarkFrame::new(t, points));
    }

    if frames.len() < 2 {
        return Err(parse_err(
            path,
            frames.len() + 1,
            "need at least 2 frames to infer the frame rate from timestamps",
        ));
    }
    let dt = frames[1].t - frames[0].t;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(parse_err(path, 3, "timestamps are not increasing"));
    }
    Ok(LandmarkTrack::new(1.0 / dt, frames))
}

fn read_landmark_json(path: &Path) -> Result<LandmarkTrack, IoError> {
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    let parsed: LandmarkFileJson =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
    Ok(LandmarkTrack::new(parsed.fps, parsed.frames))
}

/// Writes a landmark track as CSV (see the module docs for the schema).
pub fn write_landmark_csv(track: &LandmarkTrack, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| file_err(path, e))?;
    let mut w = BufWriter::new(file);
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{}", expected_header())?;
        for (k, frame) in track.frames.iter().enumerate() {
            write!(w, "{k},{}", format_float(frame.t))?;
            for p in &frame.points {
                write!(w, ",{},{}", format_float(p.x), format_float(p.y))?;
            }
            writeln!(w)?;
        }
        w.flush()
    };
    run(&mut w).map_err(|e| file_err(path, e))
}

/// Writes a landmark track as JSON (same schema plus an explicit fps).
pub fn write_landmark_json(track: &LandmarkTrack, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let json = LandmarkFileJson {
        fps: track.fps,
        frames: track.frames.clone(),
    };
    write_json(&json, path)
}

/// Shortest round-trip float formatting; keeps CSV output deterministic
/// and exact.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Reads a session manifest (JSON). Relative landmark/audio paths are kept
/// as-is; see [`SessionManifest`].
pub fn read_manifest(path: impl AsRef<Path>) -> Result<SessionManifest, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    let manifest: SessionManifest =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
    manifest.validate().map_err(|e| IoError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok(manifest)
}

/// Serializes any value as pretty JSON. Used for manifests, analysis
/// results, and reports; key order is the struct field order, so output is
/// deterministic.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| file_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    w.write_all(b"\n").map_err(|e| file_err(path, e))?;
    w.flush().map_err(|e| file_err(path, e))
}

/// Deserializes a JSON file.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| file_err(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn read_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

fn read_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

/// Reads a 16-bit PCM RIFF/WAV file into a mono buffer in [-1, 1].
/// Stereo files are downmixed by averaging the channels.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, IoError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| file_err(path, e))?;

    let unsupported = |message: &str| IoError::UnsupportedWav {
        path: path.display().to_string(),
        message: message.to_string(),
    };

    if bytes.len() < 44 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(unsupported("not a RIFF/WAVE file"));
    }

    let mut pos = 12;
    let mut format: Option<(u16, u32, u16)> = None; // channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(&bytes, pos + 4) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(unsupported("truncated chunk"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(unsupported("fmt chunk too small"));
                }
                let audio_format = read_u16(&bytes, pos + 8);
                if audio_format != 1 {
                    return Err(unsupported("only PCM (format 1) is supported"));
                }
                format = Some((
                    read_u16(&bytes, pos + 10),
                    read_u32(&bytes, pos + 12),
                    read_u16(&bytes, pos + 22),
                ));
            }
            b"data" => {
                data = Some(&bytes[pos + 8..body_end]);
            }
            _ => {}
        }
        pos = body_end + (size % 2); // chunks are word-aligned
    }

    let (channels, sample_rate, bits) = format.ok_or_else(|| unsupported("missing fmt chunk"))?;
    let data = data.ok_or_else(|| unsupported("missing data chunk"))?;
    if bits != 16 {
        return Err(unsupported(&format!(
            "only 16-bit PCM is supported, got {bits}-bit"
        )));
    }
    if channels == 0 || channels > 2 {
        return Err(unsupported(&format!(
            "unsupported channel count {channels}"
        )));
    }

    let frame_bytes = 2 * channels as usize;
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            let mut acc = 0.0;
            for ch in 0..channels as usize {
                let v = i16::from_le_bytes([frame[2 * ch], frame[2 * ch + 1]]);
                acc += v as f64 / 32768.0;
            }
            acc / channels as f64
        })
        .collect();

    AudioBuffer::new(sample_rate as f64, samples).map_err(|e| IoError::Audio {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(samples: &[f64], sample_rate: u32, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| file_err(path, e))?;
    let mut w = BufWriter::new(file);
    let data_size = (samples.len() * 2) as u32;
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(b"RIFF")?;
        w.write_all(&(36 + data_size).to_le_bytes())?;
        w.write_all(b"WAVE")?;
        w.write_all(b"fmt ")?;
        w.write_all(&16u32.to_le_bytes())?;
        w.write_all(&1u16.to_le_bytes())?; // PCM
        w.write_all(&1u16.to_le_bytes())?; // mono
        w.write_all(&sample_rate.to_le_bytes())?;
        w.write_all(&(sample_rate * 2).to_le_bytes())?; // byte rate
        w.write_all(&2u16.to_le_bytes())?; // block align
        w.write_all(&16u16.to_le_bytes())?; // bits per sample
        w.write_all(b"data")?;
        w.write_all(&data_size.to_le_bytes())?;
        for &s in samples {
            let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    run(&mut w).map_err(|e| file_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use tempfile::tempdir;

    fn sample_track(n: usize, fps: f64) -> LandmarkTrack {
        let frames = (0..n)
            .map(|k| {
                let points = (0..LANDMARK_COUNT)
                    .map(|i| Point2::new(i as f64 + 0.25 * k as f64, 100.0 - i as f64 * 0.5))
                    .collect();
                LandmarkFrame::new(k as f64 / fps, points)
            })
            .collect();
        LandmarkTrack::new(fps, frames)
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("track.csv");
        let track = sample_track(5, 30.0);
        write_landmark_csv(&track, &path).unwrap();
        let back = read_landmark_file(&path).unwrap();
        assert_abs_diff_eq!(back.fps, track.fps, epsilon = 1e-9);
        assert_eq!(back.frames.len(), track.frames.len());
        for (a, b) in back.frames.iter().zip(&track.frames) {
            assert_eq!(a.points, b.points);
            assert_abs_diff_eq!(a.t, b.t, epsilon = 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("track.json");
        let track = sample_track(3, 29.97);
        write_landmark_json(&track, &path).unwrap();
        let back = read_landmark_file(&path).unwrap();
        assert_eq!(back, track);
    }

    #[test]
    fn minimal_two_row_csv_parses() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut content = expected_header();
        for k in 0..2 {
            content.push_str(&format!("\n{k},{}", k as f64 / 30.0));
            for i in 0..LANDMARK_COUNT {
                content.push_str(&format!(",{}.0,{}.0", i, i * 2));
            }
        }
        std::fs::write(&path, content).unwrap();
        let track = read_landmark_file(&path).unwrap();
        assert_eq!(track.frames.len(), 2);
        assert_abs_diff_eq!(track.fps, 30.0, epsilon = 1e-6);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut content = expected_header();
        content.push_str("\n0,0.0");
        for _ in 0..(LANDMARK_COUNT * 2 - 1) {
            content.push_str(",1.0");
        }
        std::fs::write(&path, content).unwrap();
        let err = read_landmark_file(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "line number missing: {msg}");
        assert!(msg.contains("137"), "column count missing: {msg}");
    }

    #[test]
    fn non_numeric_cell_names_line_and_column() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut row = String::from("0,0.0");
        for _ in 0..LANDMARK_COUNT * 2 {
            row.push_str(",1.0");
        }
        let mut bad = String::from("1,0.0333");
        bad.push_str(&",1.0".repeat(LANDMARK_COUNT * 2 - 1));
        bad.push_str(",oops");
        let content = format!("{}\n{row}\n{bad}", expected_header());
        std::fs::write(&path, content).unwrap();
        let err = read_landmark_file(&path).unwrap_err().to_string();
        assert!(err.contains(":3:"), "line missing: {err}");
        assert!(err.contains("not a number"), "{err}");
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "frame,time,x0\n").unwrap();
        let err = read_landmark_file(&path).unwrap_err().to_string();
        assert!(err.contains("malformed header"), "{err}");
    }

    #[test]
    fn missing_file_is_reported() {
        let err = read_landmark_file("/nonexistent/l.csv").unwrap_err();
        assert!(matches!(err, IoError::File { .. }));
    }

    #[test]
    fn wav_round_trip_mono() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.05).sin() * 0.8).collect();
        write_wav(&samples, 44_100, &path).unwrap();
        let audio = read_wav(&path).unwrap();
        assert_eq!(audio.sample_rate(), 44_100.0);
        assert_eq!(audio.len(), samples.len());
        for (a, b) in audio.samples().iter().zip(&samples) {
            assert_abs_diff_eq!(a, b, epsilon = 2.0 / 32768.0);
        }
    }

    #[test]
    fn stereo_wav_downmixes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.wav");
        // hand-build a 2-channel file: L = 0.5, R = -0.5 -> mono 0
        let mut bytes = Vec::new();
        let n_frames = 64u32;
        let data_size = n_frames * 4;
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + data_size).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&48_000u32.to_le_bytes());
        bytes.extend_from_slice(&(48_000u32 * 4).to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&data_size.to_le_bytes());
        for _ in 0..n_frames {
            bytes.extend_from_slice(&(16384i16).to_le_bytes());
            bytes.extend_from_slice(&(-16384i16).to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let audio = read_wav(&path).unwrap();
        assert_eq!(audio.sample_rate(), 48_000.0);
        for s in audio.samples() {
            assert_abs_diff_eq!(*s, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn non_pcm_wav_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&40u32.to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&44_100u32.to_le_bytes());
        bytes.extend_from_slice(&(44_100u32 * 4).to_le_bytes());
        bytes.extend_from_slice(&4u16.to_le_bytes());
        bytes.extend_from_slice(&32u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("PCM"), "{err}");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("session.json");
        let manifest = SessionManifest {
            label: "GELBES".into(),
            landmark_path: "gelbes.csv".into(),
            audio_path: Some("gelbes.wav".into()),
            interocular_mm: 63.0,
            strength_percent: Some(150.0),
        };
        write_json(&manifest, &path).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, manifest);
    }
}
