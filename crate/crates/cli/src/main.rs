//! Command-line frontend: session analysis, comparison reports, synthetic
//! stimulus generation, and figure plotting.
//!
//! Exit codes: 0 success, 1 input error (bad files, bad arguments),
//! 2 numerical failure (e.g. pose solver non-convergence).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use avprosody::head_pose::CameraIntrinsics;
use avprosody::io;
use avprosody::pipeline::{
    analyze, compare_sessions, render_table, AnalysisConfig, AnalysisResult, ErrorKind,
    PipelineError, SessionComparison,
};
use avprosody::plot::plot_session;
use avprosody::synthesis::{
    apply_strength, canonical_interocular_mm, render_motion_to_landmarks, synth_focus_audio,
    synth_focus_motion, ExpressionStrength, FocusStimulusSpec, SYNTH_CAMERA_DEPTH_MM,
};
use avprosody::types::SessionManifest;

#[derive(Parser)]
#[command(
    name = "avprosody",
    version,
    about = "Head-pitch, eyebrow-raise, and prosody-contour analysis of talking-face sessions"
)]
struct Cli {
    #[command(flatten)]
    overrides: ConfigOverrides,

    #[command(subcommand)]
    command: Command,
}

/// Analysis configuration: defaults, overridden by --config, overridden by
/// individual flags.
#[derive(Args)]
struct ConfigOverrides {
    /// JSON file with a full analysis configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Savitzky-Golay window length (odd, frames).
    #[arg(long, global = true)]
    sg_window: Option<usize>,

    /// Savitzky-Golay polynomial order.
    #[arg(long, global = true)]
    sg_order: Option<usize>,

    /// Camera focal length x (pixels).
    #[arg(long, global = true)]
    fx: Option<f64>,

    /// Camera focal length y (pixels).
    #[arg(long, global = true)]
    fy: Option<f64>,

    /// Principal point x (pixels).
    #[arg(long, global = true)]
    cx: Option<f64>,

    /// Principal point y (pixels).
    #[arg(long, global = true)]
    cy: Option<f64>,

    /// Derive intrinsics from an image size (fx = fy = width, principal
    /// point at the center).
    #[arg(long, global = true)]
    image_width: Option<f64>,

    /// Image height for --image-width.
    #[arg(long, global = true)]
    image_height: Option<f64>,

    /// Landmark index of the inner eye corner for the brow metric.
    #[arg(long, global = true)]
    eye_inner_index: Option<usize>,

    /// Landmark index of the inner brow point.
    #[arg(long, global = true)]
    brow_inner_index: Option<usize>,

    /// Two landmark indices for the interocular calibration distance.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..=2)]
    interocular_indices: Option<Vec<usize>>,

    /// Override the measured interocular distance (mm) from the manifests.
    #[arg(long, global = true)]
    interocular_mm: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one session manifest into motion tracks and contours.
    Analyze {
        /// Session manifest (JSON).
        manifest: PathBuf,
        /// Output path for the result JSON (default: <manifest>.result.json).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Analyze a real session and virtual-human sessions, then write the
    /// correlation report (JSON + text table) and the session figure (SVG).
    Compare {
        /// Manifest of the real-talker session.
        real: PathBuf,
        /// Manifests of the virtual-human sessions (one per strength).
        #[arg(required = true)]
        vh: Vec<PathBuf>,
        /// Directory for report.json, report.txt, and figure.svg.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Generate synthetic focus-stimulus sessions at several expression
    /// strengths, ready for analyze/compare.
    Synth {
        /// Stimulus spec (JSON).
        spec: PathBuf,
        /// Expression strengths in percent.
        #[arg(long, value_delimiter = ',', default_values_t = vec![50.0, 100.0, 150.0, 200.0])]
        strengths: Vec<f64>,
        /// Output directory for landmark files and manifests.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also synthesize stimulus audio (WAV) for the sessions.
        #[arg(long)]
        audio: bool,
    },
    /// Render a session figure from saved analysis results; extra results
    /// become overlays.
    Plot {
        /// Analysis result JSON files (first = base session, rest overlays).
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Output SVG path.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Build the comparison report from saved analysis results (first =
    /// real, rest = virtual-human sessions).
    Report {
        /// Analysis result JSON files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Directory for report.json and report.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn build_config(o: &ConfigOverrides) -> Result<AnalysisConfig> {
    let mut config: AnalysisConfig = match &o.config {
        Some(path) => io::read_json(path)?,
        None => AnalysisConfig::default(),
    };
    if let Some(w) = o.sg_window {
        config.sg.window = w;
    }
    if let Some(ord) = o.sg_order {
        config.sg.order = ord;
    }
    if let (Some(w), h) = (o.image_width, o.image_height) {
        config.camera = CameraIntrinsics::for_image(w, h.unwrap_or(w * 9.0 / 16.0))?;
    }
    if let Some(fx) = o.fx {
        config.camera.fx = fx;
    }
    if let Some(fy) = o.fy {
        config.camera.fy = fy;
    }
    if let Some(cx) = o.cx {
        config.camera.cx = cx;
    }
    if let Some(cy) = o.cy {
        config.camera.cy = cy;
    }
    if let Some(i) = o.eye_inner_index {
        config.eyebrow.eye_inner_corner_index = i;
    }
    if let Some(i) = o.brow_inner_index {
        config.eyebrow.brow_inner_index = i;
    }
    if let Some(pair) = &o.interocular_indices {
        if pair.len() != 2 {
            bail!("--interocular-indices needs exactly two comma-separated indices");
        }
        config.eyebrow.interocular_indices = (pair[0], pair[1]);
    }
    config.sg.validate()?;
    config.eyebrow.validate()?;
    CameraIntrinsics::new(
        config.camera.fx,
        config.camera.fy,
        config.camera.cx,
        config.camera.cy,
    )?;
    Ok(config)
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn analyze_manifest(
    path: &Path,
    config: &AnalysisConfig,
    interocular_override: Option<f64>,
) -> Result<AnalysisResult> {
    let mut manifest = io::read_manifest(path)?;
    if let Some(mm) = interocular_override {
        manifest.interocular_mm = mm;
    }
    let result = analyze(&manifest, &manifest_dir(path), config)
        .with_context(|| format!("analyzing {}", path.display()))?;
    Ok(result)
}

fn write_report(comparison: &SessionComparison, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let json_path = out_dir.join("report.json");
    let txt_path = out_dir.join("report.txt");
    io::write_json(comparison, &json_path)?;
    std::fs::write(&txt_path, render_table(std::slice::from_ref(comparison)))
        .with_context(|| format!("writing {}", txt_path.display()))?;
    Ok((json_path, txt_path))
}

fn run(cli: Cli) -> Result<()> {
    let config = build_config(&cli.overrides)?;
    let interocular = cli.overrides.interocular_mm;
    match cli.command {
        Command::Analyze { manifest, out } => {
            let result = analyze_manifest(&manifest, &config, interocular)?;
            let out = out.unwrap_or_else(|| manifest.with_extension("result.json"));
            io::write_json(&result, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Compare { real, vh, out_dir } => {
            let real_result = analyze_manifest(&real, &config, interocular)?;
            let vh_results: Vec<AnalysisResult> = vh
                .iter()
                .map(|p| analyze_manifest(p, &config, interocular))
                .collect::<Result<_>>()?;
            let comparison = compare_sessions(&real_result, &vh_results);
            let (json_path, txt_path) = write_report(&comparison, &out_dir)?;
            let fig_path = out_dir.join("figure.svg");
            plot_session(&real_result, &vh_results, &fig_path)?;
            print!("{}", render_table(std::slice::from_ref(&comparison)));
            println!(
                "wrote {}, {}, {}",
                json_path.display(),
                txt_path.display(),
                fig_path.display()
            );
        }
        Command::Synth {
            spec,
            strengths,
            out_dir,
            audio,
        } => {
            let spec: FocusStimulusSpec = io::read_json(&spec)?;
            spec.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
            for &s in &strengths {
                ExpressionStrength::new(s).map_err(|e| anyhow::anyhow!("{e}"))?;
            }
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;

            // Synthetic sessions use the canonical face rendered at a fixed
            // depth; fx = fy = depth keeps the projected face at a natural
            // pixel scale regardless of the configured camera.
            let cam =
                CameraIntrinsics::new(SYNTH_CAMERA_DEPTH_MM, SYNTH_CAMERA_DEPTH_MM, 640.0, 360.0)?;
            let interocular = canonical_interocular_mm();
            let (pitch, brow) = synth_focus_motion(&spec)?;

            let audio_name = if audio {
                let samples = synth_focus_audio(&spec, 44_100.0)?;
                let name = "stimulus.wav".to_string();
                io::write_wav(&samples, 44_100, out_dir.join(&name))?;
                Some(name)
            } else {
                None
            };

            let write_session = |label: &str,
                                 file_stem: &str,
                                 strength: Option<f64>,
                                 pitch: &avprosody::MotionTrack,
                                 brow: &avprosody::MotionTrack|
             -> Result<()> {
                let track = render_motion_to_landmarks(pitch, brow, &config.model, &cam)?;
                let landmark_name = format!("{file_stem}.csv");
                io::write_landmark_csv(&track, out_dir.join(&landmark_name))?;
                let manifest = SessionManifest {
                    label: label.to_string(),
                    landmark_path: landmark_name,
                    audio_path: audio_name.clone(),
                    interocular_mm: interocular,
                    strength_percent: strength,
                };
                io::write_json(&manifest, out_dir.join(format!("{file_stem}.json")))?;
                Ok(())
            };

            write_session("real", "real", None, &pitch, &brow)?;
            for &s in &strengths {
                let strength = ExpressionStrength::new(s).expect("validated above");
                let p = apply_strength(&pitch, strength);
                let b = apply_strength(&brow, strength);
                write_session(
                    &format!("VH {s}%"),
                    &format!("vh_{}", s.round() as i64),
                    Some(s),
                    &p,
                    &b,
                )?;
            }
            println!(
                "wrote real + {} VH sessions to {}",
                strengths.len(),
                out_dir.display()
            );
        }
        Command::Plot { results, out } => {
            let loaded: Vec<AnalysisResult> = results
                .iter()
                .map(io::read_json)
                .collect::<Result<_, _>>()?;
            plot_session(&loaded[0], &loaded[1..], &out)?;
            println!("wrote {}", out.display());
        }
        Command::Report { results, out_dir } => {
            let loaded: Vec<AnalysisResult> = results
                .iter()
                .map(io::read_json)
                .collect::<Result<_, _>>()?;
            let comparison = compare_sessions(&loaded[0], &loaded[1..]);
            let (json_path, txt_path) = write_report(&comparison, &out_dir)?;
            print!("{}", render_table(std::slice::from_ref(&comparison)));
            println!("wrote {}, {}", json_path.display(), txt_path.display());
        }
    }
    Ok(())
}

/// Maps a failure to the documented exit codes.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    use avprosody::head_pose::PoseError;
    for cause in err.chain() {
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return match p.kind {
                ErrorKind::Input => 1,
                ErrorKind::Numerical => 2,
            };
        }
        if let Some(p) = cause.downcast_ref::<PoseError>() {
            return match p {
                PoseError::NonConvergence(_)
                | PoseError::DegenerateConfiguration
                | PoseError::BehindCamera { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
