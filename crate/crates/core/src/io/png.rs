//! PNG image adapters and tensor conversions.
//!
//! Pixel convention: network tensors hold channel-first [3, h, w] values in
//! [-1, 1]; files hold interleaved RGB u8. The u8 -> tensor -> u8 round trip
//! is exact because 255 distinct float values stay distinct through the
//! affine maps.

use std::path::Path;

use image::{ImageBuffer, ImageReader, Rgb};

use crate::error::{S2iError, S2iResult};
use crate::nn::{Scalar, Tensor};

pub fn save_rgb8(path: &Path, width: u32, height: u32, pixels: &[u8]) -> S2iResult<()> {
    let expected = (width as usize) * (height as usize) * 3;
    if pixels.len() != expected {
        return Err(S2iError::shape(
            "save_rgb8",
            format!("{expected} bytes"),
            format!("{}", pixels.len()),
        ));
    }
    let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(width, height, pixels.to_vec())
        .expect("length checked above");
    img.save(path)
        .map_err(|e| S2iError::format(path.display().to_string(), format!("png encode: {e}")))
}

pub fn load_rgb8(path: &Path) -> S2iResult<(u32, u32, Vec<u8>)> {
    let img = ImageReader::open(path)
        .map_err(|e| S2iError::io(path.display().to_string(), e))?
        .decode()
        .map_err(|e| S2iError::format(path.display().to_string(), format!("png decode: {e}")))?
        .into_rgb8();
    let (w, h) = img.dimensions();
    Ok((w, h, img.into_raw()))
}

/// Interleaved RGB u8 -> [3, h, w] tensor in [-1, 1].
pub fn rgb8_to_tensor<F: Scalar>(width: usize, height: usize, pixels: &[u8]) -> S2iResult<Tensor<F>> {
    if pixels.len() != width * height * 3 {
        return Err(S2iError::shape(
            "rgb8_to_tensor",
            format!("{} bytes", width * height * 3),
            format!("{}", pixels.len()),
        ));
    }
    let mut t = Tensor::zeros(&[3, height, width]);
    let data = t.data_mut();
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let v = pixels[(y * width + x) * 3 + c] as f64 / 255.0 * 2.0 - 1.0;
                data[c * height * width + y * width + x] = F::from_f64(v);
            }
        }
    }
    Ok(t)
}

/// [3, h, w] tensor in [-1, 1] -> interleaved RGB u8, clamped.
pub fn tensor_to_rgb8<F: Scalar>(t: &Tensor<F>) -> S2iResult<(u32, u32, Vec<u8>)> {
    let dims = t.dims();
    if dims.len() != 3 || dims[0] != 3 {
        return Err(S2iError::shape(
            "tensor_to_rgb8",
            "[3, h, w]",
            format!("{dims:?}"),
        ));
    }
    let (h, w) = (dims[1], dims[2]);
    let data = t.data();
    let mut pixels = vec![0u8; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let v = data[c * h * w + y * w + x].to_f64();
                let byte = ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0);
                pixels[(y * w + x) * 3 + c] = byte as u8;
            }
        }
    }
    Ok((w as u32, h as u32, pixels))
}
