//! Raster types and on-disk formats.

mod manifest;
mod pnm;
mod raster;
mod rcube;

pub use manifest::{reference_role, CalibrationInputs, SceneManifest, SceneRole};
pub use pnm::{
    decode_mask, decode_pgm, decode_ppm, encode_mask, encode_pgm, encode_ppm, load_mask, save_mask,
    save_pgm, GrayImage,
};
pub use raster::{
    CalibrationState, LabelMask, RgbImage, SpectralCube, ValidityMask, WavelengthGrid,
    MAX_WAVELENGTH_NM, MIN_WAVELENGTH_NM, RGB_NOMINAL_NM,
};
pub use rcube::{
    decode_cube, encode_cube, encode_header, load_cube, load_rgb, save_cube, save_rgb,
};

use ndarray::Array2;

use crate::{Error, Result};

/// Collects the spectra of every non-ignored pixel in row-major scan order.
///
/// Returns an `N×B` feature matrix and the matching `{0, 1}` labels.
pub fn flatten_pixels(cube: &SpectralCube, mask: &LabelMask) -> Result<(Array2<f32>, Vec<u8>)> {
    if cube.height() != mask.height() || cube.width() != mask.width() {
        return Err(Error::Dimension(format!(
            "cube is {}x{}, mask is {}x{}",
            cube.height(),
            cube.width(),
            mask.height(),
            mask.width()
        )));
    }
    let selected: Vec<usize> = mask
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != LabelMask::IGNORE)
        .map(|(i, _)| i)
        .collect();
    let bands = cube.bands();
    let mut features = Array2::<f32>::zeros((selected.len(), bands));
    for b in 0..bands {
        let plane = cube.band(b);
        for (row, &idx) in selected.iter().enumerate() {
            features[[row, b]] = plane[idx];
        }
    }
    let labels = selected.iter().map(|&i| mask.labels()[i]).collect();
    Ok((features, labels))
}
