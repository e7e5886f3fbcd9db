//! Image preprocessing: central square crop, bilinear resize, [-1, 1] range.
//!
//! Bilinear sampling is half-pixel centered: src = (dst + 0.5) * scale - 0.5,
//! clamped at the borders. When the crop side equals the target the mapping
//! is the identity, so same-size inputs are only range-remapped.

use crate::error::{S2iError, S2iResult};
use crate::nn::{Scalar, Tensor};

/// Interleaved RGB u8 (width x height) -> [3, target, target] in [-1, 1].
pub fn center_crop_resize<F: Scalar>(
    width: usize,
    height: usize,
    pixels: &[u8],
    target: usize,
) -> S2iResult<Tensor<F>> {
    if width == 0 || height == 0 || target == 0 {
        return Err(S2iError::Data("empty image or target".into()));
    }
    if pixels.len() != width * height * 3 {
        return Err(S2iError::shape(
            "center_crop_resize",
            format!("{} rgb bytes", width * height * 3),
            format!("{}", pixels.len()),
        ));
    }
    let side = width.min(height);
    let x0 = (width - side) / 2;
    let y0 = (height - side) / 2;
    let scale = side as f64 / target as f64;

    let sample = |x: usize, y: usize, c: usize| -> f64 {
        pixels[((y0 + y) * width + x0 + x) * 3 + c] as f64
    };

    let mut out = Tensor::zeros(&[3, target, target]);
    let od = out.data_mut();
    for dy in 0..target {
        let sy = ((dy as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
        let y_lo = sy.floor() as usize;
        let y_hi = (y_lo + 1).min(side - 1);
        let fy = sy - y_lo as f64;
        for dx in 0..target {
            let sx = ((dx as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
            let x_lo = sx.floor() as usize;
            let x_hi = (x_lo + 1).min(side - 1);
            let fx = sx - x_lo as f64;
            for c in 0..3 {
                let top = sample(x_lo, y_lo, c) * (1.0 - fx) + sample(x_hi, y_lo, c) * fx;
                let bot = sample(x_lo, y_hi, c) * (1.0 - fx) + sample(x_hi, y_hi, c) * fx;
                let v = top * (1.0 - fy) + bot * fy;
                od[c * target * target + dy * target + dx] = F::from_f64(v / 255.0 * 2.0 - 1.0);
            }
        }
    }
    Ok(out)
}

/// Central element, upper median for even counts.
pub fn select_central_frame<T>(frames: &[T]) -> S2iResult<&T> {
    if frames.is_empty() {
        return Err(S2iError::Data("empty frame list".into()));
    }
    Ok(&frames[frames.len() / 2])
}
