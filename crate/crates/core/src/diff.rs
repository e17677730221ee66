//! Screenshot difference: mean absolute per-channel RGB difference scaled to
//! `[0, 1]`.

use image::RgbImage;
use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 0.002;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot compare {a:?} with {b:?}")]
pub struct DimensionMismatch {
    pub a: (u32, u32),
    pub b: (u32, u32),
}

pub fn pixel_diff(a: &RgbImage, b: &RgbImage) -> Result<f64, DimensionMismatch> {
    if a.dimensions() != b.dimensions() {
        return Err(DimensionMismatch { a: a.dimensions(), b: b.dimensions() });
    }
    let samples = a.as_raw().len();
    if samples == 0 {
        return Ok(0.0);
    }
    let total: u64 = a.as_raw().iter().zip(b.as_raw()).map(|(x, y)| x.abs_diff(*y) as u64).sum();
    Ok(total as f64 / (samples as f64 * 255.0))
}

/// `(changed, diff)` with `changed` exactly when `diff > epsilon`.
pub fn detect_state_change(a: &RgbImage, b: &RgbImage, epsilon: f64) -> Result<(bool, f64), DimensionMismatch> {
    let d = pixel_diff(a, b)?;
    Ok((d > epsilon, d))
}
