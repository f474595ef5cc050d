use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lowest and highest band center accepted by [`WavelengthGrid`], in nm.
pub const MIN_WAVELENGTH_NM: f64 = 300.0;
pub const MAX_WAVELENGTH_NM: f64 = 2500.0;

/// Nominal band centers of the RGB camera, in increasing-wavelength order
/// (blue, green, red).
pub const RGB_NOMINAL_NM: [f64; 3] = [470.0, 540.0, 620.0];

/// Band centers of a cube, strictly increasing, in nanometers.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WavelengthGrid(Vec<f64>);

impl WavelengthGrid {
    pub fn new(centers_nm: Vec<f64>) -> Result<Self> {
        if centers_nm.is_empty() {
            return Err(Error::InvalidInput("wavelength grid is empty".into()));
        }
        for (i, &c) in centers_nm.iter().enumerate() {
            if !c.is_finite() || !(MIN_WAVELENGTH_NM..=MAX_WAVELENGTH_NM).contains(&c) {
                return Err(Error::InvalidInput(format!(
                    "band center {c} nm at index {i} outside [{MIN_WAVELENGTH_NM}, {MAX_WAVELENGTH_NM}]"
                )));
            }
        }
        if centers_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "wavelength grid must be strictly increasing".into(),
            ));
        }
        Ok(Self(centers_nm))
    }

    /// 33-band VNIR+SWIR grid spanning 665–1700 nm: 24 mosaic bands between
    /// 665 and 960 nm followed by 9 bands between 1100 and 1700 nm.
    pub fn snapshot_vnir_swir() -> Self {
        let vnir = (0..24).map(|i| 665.0 + (960.0 - 665.0) * i as f64 / 23.0);
        let swir = (0..9).map(|i| 1100.0 + 75.0 * i as f64);
        Self(vnir.chain(swir).collect())
    }

    pub fn rgb_nominal() -> Self {
        Self(RGB_NOMINAL_NM.to_vec())
    }

    pub fn centers(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the band whose center is closest to `nm` (lowest index wins ties).
    pub fn nearest(&self, nm: f64) -> usize {
        let mut best = 0;
        for (i, &c) in self.0.iter().enumerate() {
            if (c - nm).abs() < (self.0[best] - nm).abs() {
                best = i;
            }
        }
        best
    }
}

impl<'de> Deserialize<'de> for WavelengthGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        WavelengthGrid::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationState {
    RawCounts,
    Reflectance,
}

/// An H×W×B datacube stored band-sequentially: element
/// `data[b·H·W + r·W + c]` is band `b` at pixel `(r, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCube {
    height: usize,
    width: usize,
    data: Vec<f32>,
    wavelengths: WavelengthGrid,
    state: CalibrationState,
    integration_time_ms: Option<f64>,
}

impl SpectralCube {
    pub fn new(
        height: usize,
        width: usize,
        wavelengths: WavelengthGrid,
        state: CalibrationState,
        data: Vec<f32>,
    ) -> Result<Self> {
        let expected = height
            .checked_mul(width)
            .and_then(|p| p.checked_mul(wavelengths.len()))
            .ok_or_else(|| Error::Dimension("cube dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "{height}x{width}x{} cube needs {expected} values, got {}",
                wavelengths.len(),
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if state == CalibrationState::Reflectance {
            if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidInput(format!(
                    "reflectance value {} at element {i} outside [0, 1]",
                    data[i]
                )));
            }
        }
        Ok(Self {
            height,
            width,
            data,
            wavelengths,
            state,
            integration_time_ms: None,
        })
    }

    /// Builds a cube by evaluating `f(band, row, col)` for every element.
    pub fn from_fn(
        height: usize,
        width: usize,
        wavelengths: WavelengthGrid,
        state: CalibrationState,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let bands = wavelengths.len();
        let mut data = Vec::with_capacity(height * width * bands);
        for b in 0..bands {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(b, r, c));
                }
            }
        }
        Self::new(height, width, wavelengths, state, data)
    }

    pub fn with_integration_time(mut self, ms: Option<f64>) -> Result<Self> {
        if let Some(t) = ms {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidInput(format!("integration time {t} ms")));
            }
        }
        self.integration_time_ms = ms;
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn wavelengths(&self) -> &WavelengthGrid {
        &self.wavelengths
    }

    pub fn state(&self) -> CalibrationState {
        self.state
    }

    pub fn integration_time_ms(&self) -> Option<f64> {
        self.integration_time_ms
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// All values of band `b`, row-major.
    pub fn band(&self, b: usize) -> &[f32] {
        let plane = self.pixels();
        &self.data[b * plane..(b + 1) * plane]
    }

    #[inline]
    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[band * self.pixels() + row * self.width + col]
    }

    /// Spectrum of pixel `(row, col)`.
    pub fn pixel(&self, row: usize, col: usize) -> Vec<f32> {
        let idx = row * self.width + col;
        let plane = self.pixels();
        (0..self.bands())
            .map(|b| self.data[b * plane + idx])
            .collect()
    }

    pub(crate) fn same_shape(&self, other: &SpectralCube) -> bool {
        self.height == other.height && self.width == other.width && self.bands() == other.bands()
    }
}

/// Three-channel image with pixel-interleaved `[r, g, b]` values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::Dimension(format!(
                "{height}x{width} RGB image needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(format!(
                "RGB value {} at element {i} outside [0, 1]",
                data[i]
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn rgb(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Band-sequential 3-band reflectance cube with bands ordered blue, green, red.
    pub fn to_cube(&self) -> SpectralCube {
        let plane = self.height * self.width;
        let mut data = vec![0.0f32; plane * 3];
        for p in 0..plane {
            // band 0 = 470 nm (blue), band 2 = 620 nm (red)
            data[p] = self.data[p * 3 + 2];
            data[plane + p] = self.data[p * 3 + 1];
            data[2 * plane + p] = self.data[p * 3];
        }
        SpectralCube {
            height: self.height,
            width: self.width,
            data,
            wavelengths: WavelengthGrid::rgb_nominal(),
            state: CalibrationState::Reflectance,
            integration_time_ms: None,
        }
    }

    /// Inverse of [`RgbImage::to_cube`]; channels are picked by nearest band center.
    pub fn from_cube(cube: &SpectralCube) -> Result<Self> {
        if cube.bands() != 3 {
            return Err(Error::Dimension(format!(
                "RGB image needs a 3-band cube, got {} bands",
                cube.bands()
            )));
        }
        let grid = cube.wavelengths();
        let [b_nm, g_nm, r_nm] = RGB_NOMINAL_NM;
        let order = [grid.nearest(r_nm), grid.nearest(g_nm), grid.nearest(b_nm)];
        let plane = cube.pixels();
        let mut data = Vec::with_capacity(plane * 3);
        for p in 0..plane {
            for &band in &order {
                data.push(cube.data[band * plane + p]);
            }
        }
        Self::new(cube.height, cube.width, data)
    }
}

/// Per-pixel class codes. `0` non-plastic, `1` plastic, `255` ignore.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMask {
    pub const NON_PLASTIC: u8 = 0;
    pub const PLASTIC: u8 = 1;
    pub const IGNORE: u8 = 255;

    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        if let Some(i) = labels
            .iter()
            .position(|&l| !matches!(l, Self::NON_PLASTIC | Self::PLASTIC | Self::IGNORE))
        {
            return Err(Error::InvalidInput(format!(
                "label {} at pixel {i} is not one of 0, 1, 255",
                labels[i]
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: u8) -> Result<Self> {
        Self::new(height, width, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    pub fn ignored(&self) -> usize {
        self.labels.iter().filter(|&&l| l == Self::IGNORE).count()
    }

    /// Marks every pixel that `validity` flags as invalid with the ignore code.
    pub fn apply_validity(&mut self, validity: &ValidityMask) -> Result<()> {
        if validity.height != self.height || validity.width != self.width {
            return Err(Error::Dimension(format!(
                "validity mask {}x{} vs label mask {}x{}",
                validity.height, validity.width, self.height, self.width
            )));
        }
        for (label, &ok) in self.labels.iter_mut().zip(&validity.valid) {
            if !ok {
                *label = Self::IGNORE;
            }
        }
        Ok(())
    }
}

/// Per-pixel validity produced by calibration and warping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityMask {
    height: usize,
    width: usize,
    valid: Vec<bool>,
}

impl ValidityMask {
    pub fn new(height: usize, width: usize, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != height * width {
            return Err(Error::Dimension(format!(
                "{height}x{width} validity mask needs {} flags, got {}",
                height * width,
                valid.len()
            )));
        }
        Ok(Self {
            height,
            width,
            valid,
        })
    }

    pub fn all_valid(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            valid: vec![true; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn flags(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Pixel-wise AND.
    pub fn and(&self, other: &ValidityMask) -> Result<ValidityMask> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::Dimension("validity masks differ in size".into()));
        }
        Ok(ValidityMask {
            height: self.height,
            width: self.width,
            valid: self
                .valid
                .iter()
                .zip(&other.valid)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    /// Encodes validity as a label mask: valid → 1, invalid → 0.
    pub fn to_pgm_mask(&self) -> Vec<u8> {
        self.valid.iter().map(|&v| u8::from(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_grid_has_33_increasing_bands_in_range() {
        let g = WavelengthGrid::snapshot_vnir_swir();
        assert_eq!(g.len(), 33);
        assert!(WavelengthGrid::new(g.centers().to_vec()).is_ok());
        assert_eq!(g.centers()[0], 665.0);
        assert_eq!(*g.centers().last().unwrap(), 1700.0);
    }

    #[test]
    fn grid_rejects_unsorted_and_out_of_range() {
        assert!(WavelengthGrid::new(vec![620.0, 540.0]).is_err());
        assert!(WavelengthGrid::new(vec![500.0, 500.0]).is_err());
        assert!(WavelengthGrid::new(vec![200.0]).is_err());
        assert!(WavelengthGrid::new(vec![f64::NAN]).is_err());
        assert!(WavelengthGrid::new(vec![]).is_err());
    }

    #[test]
    fn reflectance_cube_rejects_out_of_range_values() {
        let g = WavelengthGrid::new(vec![700.0]).unwrap();
        let err = SpectralCube::new(1, 1, g.clone(), CalibrationState::Reflectance, vec![1.5]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        assert!(SpectralCube::new(1, 1, g, CalibrationState::RawCounts, vec![1.5]).is_ok());
    }

    #[test]
    fn band_sequential_accessor() {
        let g = WavelengthGrid::new(vec![700.0, 800.0]).unwrap();
        let cube = SpectralCube::from_fn(2, 3, g, CalibrationState::RawCounts, |b, r, c| {
            (b * 100 + r * 10 + c) as f32
        })
        .unwrap();
        assert_eq!(cube.get(1, 1, 2), 112.0);
        assert_eq!(cube.data()[6 + 3 + 2], 112.0);
        assert_eq!(cube.pixel(1, 0), vec![10.0, 110.0]);
        assert_eq!(cube.band(1)[0], 100.0);
    }

    #[test]
    fn rgb_cube_conversion_round_trips() {
        let img = RgbImage::new(1, 2, vec![0.9, 0.5, 0.1, 0.2, 0.3, 0.4]).unwrap();
        let cube = img.to_cube();
        assert_eq!(cube.wavelengths().centers(), &RGB_NOMINAL_NM);
        assert_eq!(cube.pixel(0, 0), vec![0.1, 0.5, 0.9]);
        assert_eq!(RgbImage::from_cube(&cube).unwrap(), img);
    }

    #[test]
    fn label_mask_validates_codes() {
        assert!(LabelMask::new(1, 3, vec![0, 1, 255]).is_ok());
        assert!(LabelMask::new(1, 3, vec![0, 2, 255]).is_err());
        assert!(LabelMask::new(1, 2, vec![0, 1, 1]).is_err());
    }

    #[test]
    fn validity_marks_ignore() {
        let mut m = LabelMask::new(1, 3, vec![0, 1, 1]).unwrap();
        let v = ValidityMask::new(1, 3, vec![true, false, true]).unwrap();
        m.apply_validity(&v).unwrap();
        assert_eq!(m.labels(), &[0, 255, 1]);
    }
}
