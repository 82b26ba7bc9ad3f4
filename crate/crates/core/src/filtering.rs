//! Savitzky-Golay temporal smoothing of landmark coordinates and scalar
//! series.
//!
//! A Savitzky-Golay filter slides a window of `window` samples over the
//! series, fits a least-squares polynomial of degree `order` on each
//! window, and outputs the fitted value. Interior samples use the central
//! evaluation (a fixed convolution); the `(window - 1) / 2` samples at each
//! boundary are produced by fitting the first/last full window and
//! evaluating the polynomial at the sample's own position, which keeps
//! polynomial reproduction exact at the edges without padding.
//!
//! The default configuration (window 13, order 2) targets jitter reduction
//! in facial-landmark tracks at common video frame rates.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{LandmarkTrack, Point2};

/// Savitzky-Golay window length and polynomial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SgConfig {
    /// Window length in frames; must be odd and >= 3.
    pub window: usize,
    /// Polynomial order; must be < window.
    pub order: usize,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            window: 13,
            order: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("window must be an odd integer >= 3, got {0}")]
    InvalidWindow(usize),
    #[error("polynomial order {order} must be smaller than window {window}")]
    OrderTooHigh { order: usize, window: usize },
    #[error("series of length {len} is shorter than window {window}")]
    SeriesTooShort { len: usize, window: usize },
}

impl SgConfig {
    pub fn new(window: usize, order: usize) -> Result<Self, FilterError> {
        let cfg = Self { window, order };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(FilterError::InvalidWindow(self.window));
        }
        if self.order >= self.window {
            return Err(FilterError::OrderTooHigh {
                order: self.order,
                window: self.window,
            });
        }
        Ok(())
    }

    /// Half-width of the window.
    pub fn half(&self) -> usize {
        self.window / 2
    }
}

/// Precomputed evaluation weights for one (window, order) pair.
///
/// `weights[e]` holds the window-length weight vector that evaluates the
/// least-squares fit at stencil offset `e - half` from the window center,
/// so `weights[half]` is the central smoothing kernel.
#[derive(Debug)]
struct SgKernel {
    weights: Vec<Vec<f64>>,
}

impl SgKernel {
    fn compute(cfg: &SgConfig) -> Self {
        let w = cfg.window;
        let m = cfg.half() as i64;
        let cols = cfg.order + 1;

        // Vandermonde of the integer stencil -m..=m, factored once by QR.
        let a = DMatrix::from_fn(w, cols, |r, c| ((r as i64 - m) as f64).powi(c as i32));
        let qr = a.qr();
        let q = qr.q();
        let r = qr.r();

        // Fitted value at offset e is p(e)^T (A^T A)^{-1} A^T y = (Q R^{-T} p(e))^T y.
        let weights = (-m..=m)
            .map(|e| {
                let mut p = nalgebra::DVector::from_fn(cols, |k, _| (e as f64).powi(k as i32));
                r.transpose().solve_lower_triangular_mut(&mut p);
                (&q * p).iter().copied().collect()
            })
            .collect();
        Self { weights }
    }

    fn central(&self) -> &[f64] {
        &self.weights[self.weights.len() / 2]
    }
}

fn kernel_for(cfg: &SgConfig) -> Arc<SgKernel> {
    static CACHE: OnceLock<Mutex<HashMap<SgConfig, Arc<SgKernel>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("kernel cache poisoned");
    map.entry(*cfg)
        .or_insert_with(|| Arc::new(SgKernel::compute(cfg)))
        .clone()
}

/// Central-point smoothing weights for `cfg`.
///
/// The weights are symmetric about the center and sum to 1 within 1e-12;
/// convolving them with a polynomial of degree <= `order` reproduces it
/// exactly.
pub fn sg_coefficients(cfg: &SgConfig) -> Result<Vec<f64>, FilterError> {
    cfg.validate()?;
    Ok(kernel_for(cfg).central().to_vec())
}

/// Smooths a scalar series, preserving its length.
pub fn smooth_scalar(values: &[f64], cfg: &SgConfig) -> Result<Vec<f64>, FilterError> {
    cfg.validate()?;
    let n = values.len();
    let w = cfg.window;
    if n < w {
        return Err(FilterError::SeriesTooShort { len: n, window: w });
    }
    let kernel = kernel_for(cfg);
    let m = cfg.half();

    let dot = |window: &[f64], weights: &[f64]| -> f64 {
        window.iter().zip(weights).map(|(x, c)| x * c).sum()
    };

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (start, eval) = if i < m {
            (0, i) // leading edge: first window, evaluate at own offset
        } else if i + m >= n {
            (n - w, i + w - n) // trailing edge: last window
        } else {
            (i - m, m)
        };
        out.push(dot(&values[start..start + w], &kernel.weights[eval]));
    }
    Ok(out)
}

/// Smooths each of the 136 landmark coordinate series independently.
///
/// Timestamps and fps are unchanged. The track must already be valid.
pub fn smooth_landmarks(
    track: &LandmarkTrack,
    cfg: &SgConfig,
) -> Result<LandmarkTrack, FilterError> {
    cfg.validate()?;
    let n = track.frames.len();
    if n < cfg.window {
        return Err(FilterError::SeriesTooShort {
            len: n,
            window: cfg.window,
        });
    }
    let points_per_frame = track.frames[0].points.len();
    let mut smoothed: Vec<Vec<Point2>> = vec![Vec::with_capacity(points_per_frame); n];
    let mut series = Vec::with_capacity(n);
    for p in 0..points_per_frame {
        for axis in 0..2 {
            series.clear();
            series.extend(track.frames.iter().map(|f| {
                let pt = f.points[p];
                if axis == 0 {
                    pt.x
                } else {
                    pt.y
                }
            }));
            let out = smooth_scalar(&series, cfg)?;
            for (k, v) in out.into_iter().enumerate() {
                if axis == 0 {
                    smoothed[k].push(Point2::new(v, 0.0));
                } else {
                    smoothed[k][p].y = v;
                }
            }
        }
    }
    let frames = track
        .frames
        .iter()
        .zip(smoothed)
        .map(|(f, points)| crate::types::LandmarkFrame::new(f.t, points))
        .collect();
    Ok(LandmarkTrack::new(track.fps, frames))
}
