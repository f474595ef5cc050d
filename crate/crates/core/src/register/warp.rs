use rayon::prelude::*;

use super::homography::Homography;
use crate::cube_io::{RgbImage, SpectralCube, ValidityMask};
use crate::{Error, Result};

/// Slack allowed when deciding whether a preimage lies inside the input grid.
const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Tap {
    base: usize,
    dx: usize,
    dy: usize,
    fx: f64,
    fy: f64,
}

/// Bilinear taps for every output pixel; `None` where the preimage falls outside.
fn sample_table(
    inverse: &Homography,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<Option<Tap>> {
    let max_x = (in_w - 1) as f64;
    let max_y = (in_h - 1) as f64;
    let mut table = vec![None; out_h * out_w];
    table
        .par_chunks_mut(out_w.max(1))
        .enumerate()
        .for_each(|(r, row)| {
            for (c, slot) in row.iter_mut().enumerate() {
                let Some((x, y)) = inverse.apply(c as f64, r as f64) else {
                    continue;
                };
                if !(x >= -EDGE_TOLERANCE
                    && y >= -EDGE_TOLERANCE
                    && x <= max_x + EDGE_TOLERANCE
                    && y <= max_y + EDGE_TOLERANCE)
                {
                    continue;
                }
                let x = x.clamp(0.0, max_x);
                let y = y.clamp(0.0, max_y);
                let (x0, dx) = if in_w > 1 {
                    ((x.floor() as usize).min(in_w - 2), 1)
                } else {
                    (0, 0)
                };
                let (y0, dy) = if in_h > 1 {
                    ((y.floor() as usize).min(in_h - 2), in_w)
                } else {
                    (0, 0)
                };
                *slot = Some(Tap {
                    base: y0 * in_w + x0,
                    dx,
                    dy,
                    fx: x - x0 as f64,
                    fy: y - y0 as f64,
                });
            }
        });
    table
}

#[inline]
fn interpolate(plane: &[f32], t: &Tap) -> f32 {
    let v00 = f64::from(plane[t.base]);
    let v01 = f64::from(plane[t.base + t.dx]);
    let v10 = f64::from(plane[t.base + t.dy]);
    let v11 = f64::from(plane[t.base + t.dy + t.dx]);
    let (fx, fy) = (t.fx, t.fy);
    let v = v00 * (1.0 - fx) * (1.0 - fy)
        + v01 * fx * (1.0 - fy)
        + v10 * (1.0 - fx) * fy
        + v11 * fx * fy;
    v as f32
}

/// Inverse-warps `cube` onto an `out_height × out_width` grid: output pixel
/// `p` samples the input at `h⁻¹·p` bilinearly. Pixels whose preimage lies
/// outside the input are zero and invalid.
pub fn warp_cube(
    cube: &SpectralCube,
    h: &Homography,
    out_height: usize,
    out_width: usize,
) -> Result<(SpectralCube, ValidityMask)> {
    if out_height == 0 || out_width == 0 {
        return Err(Error::InvalidInput(
            "output raster must be non-empty".into(),
        ));
    }
    let inverse = h.inverse()?;
    let table = sample_table(&inverse, cube.height(), cube.width(), out_height, out_width);
    let plane = out_height * out_width;
    let mut data = vec![0.0f32; plane * cube.bands()];
    data.par_chunks_mut(out_width)
        .enumerate()
        .for_each(|(row_idx, out_row)| {
            let band = row_idx / out_height;
            let r = row_idx % out_height;
            let src = cube.band(band);
            let taps = &table[r * out_width..(r + 1) * out_width];
            for (o, tap) in out_row.iter_mut().zip(taps) {
                if let Some(t) = tap {
                    *o = interpolate(src, t);
                }
            }
        });
    let valid = table.iter().map(Option::is_some).collect();
    let out = SpectralCube::new(
        out_height,
        out_width,
        cube.wavelengths().clone(),
        cube.state(),
        data,
    )?
    .with_integration_time(cube.integration_time_ms())?;
    Ok((out, ValidityMask::new(out_height, out_width, valid)?))
}

pub fn warp_rgb(
    image: &RgbImage,
    h: &Homography,
    out_height: usize,
    out_width: usize,
) -> Result<(RgbImage, ValidityMask)> {
    let (cube, valid) = warp_cube(&image.to_cube(), h, out_height, out_width)?;
    Ok((RgbImage::from_cube(&cube)?, valid))
}

/// Resamples a cube onto the RGB frame's pixel grid. Invalid pixels of the
/// returned mask should be excluded from training and evaluation.
pub fn register_cube_to_rgb(
    cube: &SpectralCube,
    rgb: &RgbImage,
    h: &Homography,
) -> Result<(SpectralCube, ValidityMask)> {
    warp_cube(cube, h, rgb.height(), rgb.width())
}
