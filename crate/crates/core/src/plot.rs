//! SVG session figures: stacked panels with the audio contours (when
//! present), the head-pitch trajectories, and the eyebrow trajectories,
//! with overlay series labeled by expression strength.
//!
//! Output is deterministic: identical inputs produce byte-identical files
//! (fixed-precision coordinates, no timestamps, stable series order).

use std::io::Write as _;
use std::path::Path;

use crate::pipeline::AnalysisResult;
use crate::types::MotionTrack;

const WIDTH: f64 = 840.0;
const PANEL_HEIGHT: f64 = 190.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 30.0;
const PANEL_GAP: f64 = 34.0;

const F0_COLOR: &str = "#1f6fd0"; // blue
const INTENSITY_COLOR: &str = "#2ca02c"; // green
const REAL_COLOR: &str = "#222222";
const OVERLAY_COLORS: [&str; 6] = [
    "#d62728", "#ff7f0e", "#9467bd", "#17becf", "#8c564b", "#e377c2",
];

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct PlotError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

struct Panel {
    title: String,
    y_label: String,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    t_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        self.x0 + (t / self.t_max.max(1e-9)) * self.w
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(1e-9);
        self.y0 + self.h - ((v - self.y_min) / span) * self.h
    }

    fn frame(&self, svg: &mut String) {
        use std::fmt::Write;
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#888888" stroke-width="1"/>"##,
            fmt(self.x0),
            fmt(self.y0),
            fmt(self.w),
            fmt(self.h)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="13" fill="#222222">{}</text>"##,
            fmt(self.x0),
            fmt(self.y0 - 8.0),
            self.title
        );
        // y-axis extremes and label
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="#444444" text-anchor="end">{}</text>"##,
            fmt(self.x0 - 6.0),
            fmt(self.y0 + 10.0),
            trim_num(self.y_max)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="#444444" text-anchor="end">{}</text>"##,
            fmt(self.x0 - 6.0),
            fmt(self.y0 + self.h),
            trim_num(self.y_min)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="#222222" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"##,
            fmt(self.x0 - 44.0),
            fmt(self.y0 + self.h / 2.0),
            fmt(self.x0 - 44.0),
            fmt(self.y0 + self.h / 2.0),
            self.y_label
        );
        // x ticks at whole seconds
        let mut t = 0.0;
        while t <= self.t_max + 1e-9 {
            let _ = writeln!(
                svg,
                r##"<line x1="{x}" y1="{y1}" x2="{x}" y2="{y2}" stroke="#888888" stroke-width="1"/>"##,
                x = fmt(self.x(t)),
                y1 = fmt(self.y0 + self.h),
                y2 = fmt(self.y0 + self.h + 4.0)
            );
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="#444444" text-anchor="middle">{}</text>"##,
                fmt(self.x(t)),
                fmt(self.y0 + self.h + 15.0),
                trim_num(t)
            );
            t += 1.0;
        }
    }

    /// Polyline segments for a (possibly gappy) track; gaps split the line.
    fn polyline(&self, svg: &mut String, track: &MotionTrack, color: &str, dashed: bool) {
        use std::fmt::Write;
        let dash = if dashed {
            r##" stroke-dasharray="6 4""##
        } else {
            ""
        };
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, svg: &mut String| {
            if segment.len() >= 2 {
                let _ = writeln!(
                    svg,
                    r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{}/>"##,
                    segment.join(" "),
                    color,
                    dash
                );
            }
            segment.clear();
        };
        for (i, v) in track.values().iter().enumerate() {
            match v {
                Some(value) => {
                    let t = i as f64 / track.fps();
                    segment.push(format!("{},{}", fmt(self.x(t)), fmt(self.y(*value))));
                }
                None => flush(&mut segment, svg),
            }
        }
        flush(&mut segment, svg);
    }

    fn legend(&self, svg: &mut String, entries: &[(String, &str, bool)]) {
        use std::fmt::Write;
        for (i, (label, color, dashed)) in entries.iter().enumerate() {
            let y = self.y0 + 12.0 + 16.0 * i as f64;
            let x = self.x0 + self.w + 10.0;
            let dash = if *dashed {
                r##" stroke-dasharray="6 4""##
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1.5"{}/>"##,
                fmt(x),
                fmt(y),
                fmt(x + 22.0),
                fmt(y),
                color,
                dash
            );
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="#222222">{}</text>"##,
                fmt(x + 27.0),
                fmt(y + 3.5),
                label
            );
        }
    }
}

fn trim_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn track_range<'a>(tracks: impl Iterator<Item = &'a MotionTrack>) -> (f64, f64) {
    let mut min = f64::MAX;
    let mut max = f64::MIN;
    for t in tracks {
        for (_, v) in t.iter_valid() {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if min > max {
        (0.0, 1.0)
    } else if (max - min) < 1e-9 {
        (min - 1.0, max + 1.0)
    } else {
        let pad = 0.05 * (max - min);
        (min - pad, max + pad)
    }
}

fn strength_label(result: &AnalysisResult) -> String {
    match result.provenance.strength_percent {
        Some(s) => format!("VH {}%", trim_num(s)),
        None => format!("VH ({})", result.provenance.label),
    }
}

/// Writes the session figure for `result`, overlaying the motion panels
/// with the given (typically strength-parametrized) results. Three panels
/// when audio contours are present, two otherwise.
pub fn plot_session(
    result: &AnalysisResult,
    overlays: &[AnalysisResult],
    path: impl AsRef<Path>,
) -> Result<(), PlotError> {
    let path = path.as_ref();
    let svg = render_session_svg(result, overlays);
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(svg.as_bytes())?;
        f.flush()
    };
    write().map_err(|source| PlotError {
        path: path.display().to_string(),
        source,
    })
}

/// Renders the figure as an SVG string (the file content of
/// [`plot_session`]).
pub fn render_session_svg(result: &AnalysisResult, overlays: &[AnalysisResult]) -> String {
    use std::fmt::Write;

    let has_audio = result.contours.is_some();
    let panel_count = if has_audio { 3 } else { 2 };
    let height = MARGIN_TOP + panel_count as f64 * (PANEL_HEIGHT + PANEL_GAP) + 10.0;

    let t_max = {
        let mut t = result.pitch.duration().max(result.eyebrow.duration());
        for o in overlays {
            t = t.max(o.pitch.duration()).max(o.eyebrow.duration());
        }
        if let Some(c) = &result.contours {
            t = t.max(c.f0.duration());
        }
        t.max(1e-3)
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"##,
        trim_num(WIDTH),
        trim_num(height),
        trim_num(WIDTH),
        trim_num(height)
    );
    let _ = writeln!(
        svg,
        r##"<rect width="{}" height="{}" fill="#ffffff"/>"##,
        trim_num(WIDTH),
        trim_num(height)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="18" font-family="sans-serif" font-size="14" fill="#111111">Session: {}</text>"##,
        fmt(MARGIN_LEFT),
        result.provenance.label
    );

    let panel_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let mut y_cursor = MARGIN_TOP + 14.0;

    if let Some(contours) = &result.contours {
        let (f0_min, f0_max) = track_range(std::iter::once(&contours.f0));
        let panel = Panel {
            title: "Audio: F0 (blue, Hz) and intensity (green, dB)".into(),
            y_label: "F0 [Hz]".into(),
            x0: MARGIN_LEFT,
            y0: y_cursor,
            w: panel_w,
            h: PANEL_HEIGHT,
            t_max,
            y_min: f0_min,
            y_max: f0_max,
        };
        panel.frame(&mut svg);
        panel.polyline(&mut svg, &contours.f0, F0_COLOR, false);
        // intensity drawn on its own scale within the same panel
        let (db_min, db_max) = track_range(std::iter::once(&contours.intensity));
        let db_panel = Panel {
            y_min: db_min,
            y_max: db_max,
            title: String::new(),
            y_label: String::new(),
            ..panel
        };
        db_panel.polyline(&mut svg, &contours.intensity, INTENSITY_COLOR, false);
        panel.legend(
            &mut svg,
            &[
                ("F0".to_string(), F0_COLOR, false),
                ("intensity".to_string(), INTENSITY_COLOR, false),
            ],
        );
        y_cursor += PANEL_HEIGHT + PANEL_GAP;
    }

    for (title, y_label, pick) in [
        (
            "Head rotation (pitch), normalized to t=0",
            "pitch [deg]",
            0usize,
        ),
        ("Eyebrow raise, normalized to t=0", "raise [mm]", 1usize),
    ] {
        let series = |r: &AnalysisResult| -> MotionTrack {
            if pick == 0 {
                r.pitch.clone()
            } else {
                r.eyebrow.clone()
            }
        };
        let all: Vec<MotionTrack> = std::iter::once(series(result))
            .chain(overlays.iter().map(series))
            .collect();
        let (y_min, y_max) = track_range(all.iter());
        let panel = Panel {
            title: title.into(),
            y_label: y_label.into(),
            x0: MARGIN_LEFT,
            y0: y_cursor,
            w: panel_w,
            h: PANEL_HEIGHT,
            t_max,
            y_min,
            y_max,
        };
        panel.frame(&mut svg);
        let mut legend: Vec<(String, &str, bool)> = Vec::new();
        panel.polyline(&mut svg, &all[0], REAL_COLOR, true);
        legend.push(("real".to_string(), REAL_COLOR, true));
        for (i, track) in all[1..].iter().enumerate() {
            let color = OVERLAY_COLORS[i % OVERLAY_COLORS.len()];
            panel.polyline(&mut svg, track, color, false);
            legend.push((strength_label(&overlays[i]), color, false));
        }
        panel.legend(&mut svg, &legend);
        y_cursor += PANEL_HEIGHT + PANEL_GAP;
    }

    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" fill="#444444">time [s]</text>"##,
        fmt(MARGIN_LEFT + panel_w / 2.0 - 18.0),
        fmt(y_cursor - PANEL_GAP + 28.0)
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facial_metrics::CalibrationScale;
    use crate::pipeline::{AnalysisConfig, Provenance};
    use crate::types::{MotionTrack, Unit};
    use tempfile::tempdir;

    fn result(label: &str, strength: Option<f64>, scale: f64) -> AnalysisResult {
        let values: Vec<f64> = (0..90).map(|k| scale * ((k as f64) * 0.1).sin()).collect();
        AnalysisResult {
            pitch: MotionTrack::new(30.0, Unit::Degrees, values.clone()).unwrap(),
            eyebrow: MotionTrack::new(30.0, Unit::Millimeters, values).unwrap(),
            contours: None,
            provenance: Provenance {
                label: label.into(),
                strength_percent: strength,
                interocular_mm: 63.0,
                calibration: CalibrationScale { mm_per_pixel: 1.0 },
                config: AnalysisConfig::default(),
            },
        }
    }

    #[test]
    fn no_audio_gives_two_panels() {
        let svg = render_session_svg(&result("A", None, 1.0), &[]);
        assert_eq!(svg.matches("<rect").count(), 3); // background + 2 frames
        assert!(svg.contains("Head rotation"));
        assert!(svg.contains("Eyebrow raise"));
        assert!(!svg.contains("Audio:"));
    }

    #[test]
    fn identical_inputs_are_byte_identical() {
        let r = result("A", None, 1.0);
        let overlays = vec![result("A", Some(50.0), 0.5), result("A", Some(200.0), 2.0)];
        let a = render_session_svg(&r, &overlays);
        let b = render_session_svg(&r, &overlays);
        assert_eq!(a, b);
    }

    #[test]
    fn overlay_count_matches_series_count() {
        let r = result("A", None, 1.0);
        let overlays: Vec<AnalysisResult> = [50.0, 100.0, 150.0, 200.0]
            .iter()
            .map(|&s| result("A", Some(s), s / 100.0))
            .collect();
        let svg = render_session_svg(&r, &overlays);
        // 5 series per motion panel = 10 polylines total
        assert_eq!(svg.matches("<polyline").count(), 10);
        for s in ["VH 50%", "VH 100%", "VH 150%", "VH 200%"] {
            assert!(svg.contains(s), "legend missing {s}");
        }
    }

    #[test]
    fn gaps_split_polylines() {
        let mut r = result("A", None, 1.0);
        let mut values: Vec<Option<f64>> = r.pitch.values().to_vec();
        values[40] = None;
        values[41] = None;
        r.pitch = MotionTrack::with_rest(30.0, Unit::Degrees, values, 0.0).unwrap();
        let svg = render_session_svg(&r, &[]);
        // pitch panel now contributes 2 polylines, eyebrow 1
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn plot_writes_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fig.svg");
        plot_session(&result("A", None, 1.0), &[], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert!(content.starts_with("<svg"));
        assert!(content.trim_end().ends_with("</svg>"));
    }
}
