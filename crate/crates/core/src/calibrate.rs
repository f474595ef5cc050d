//! Reflectance calibration against dark frames and a white reference panel.
//!
//! `reflectance = (signal − dark) / (reference − dark)`, clamped to `[0, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube_io::{CalibrationState, SpectralCube, ValidityMask};
use crate::{Error, Result};

/// Certified reflectivity of a compressed-PTFE reference panel.
pub const PTFE_REFLECTIVITY: f64 = 0.95;

/// Denominators at or below this many counts mark a pixel invalid.
pub const DENOMINATOR_EPS: f64 = 1e-6;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelRegion {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl PanelRegion {
    fn check_within(&self, height: usize, width: usize) -> Result<()> {
        let fits = self.height > 0
            && self.width > 0
            && self
                .row
                .checked_add(self.height)
                .is_some_and(|e| e <= height)
            && self.col.checked_add(self.width).is_some_and(|e| e <= width);
        if fits {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "panel region {self:?} outside {height}x{width} cube"
            )))
        }
    }

    fn pixel_indices(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        (self.row..self.row + self.height)
            .flat_map(move |r| (self.col..self.col + self.width).map(move |c| r * width + c))
    }
}

/// Mean dark signal, either per element of the cube or one scalar per band.
#[derive(Debug, Clone, PartialEq)]
pub enum DarkFrame {
    Full {
        height: usize,
        width: usize,
        bands: usize,
        /// Band-sequential, same layout as [`SpectralCube`].
        values: Vec<f64>,
    },
    PerBand(Vec<f64>),
}

impl DarkFrame {
    pub fn per_band(values: Vec<f64>) -> Result<Self> {
        check_dark_values(&values)?;
        Ok(DarkFrame::PerBand(values))
    }

    pub fn bands(&self) -> usize {
        match self {
            DarkFrame::Full { bands, .. } => *bands,
            DarkFrame::PerBand(v) => v.len(),
        }
    }

    /// Dark level of band `band` at flat pixel index `pixel`.
    #[inline]
    pub fn at(&self, band: usize, pixel: usize) -> f64 {
        match self {
            DarkFrame::Full {
                height,
                width,
                values,
                ..
            } => values[band * height * width + pixel],
            DarkFrame::PerBand(v) => v[band],
        }
    }

    fn check_matches(&self, cube: &SpectralCube) -> Result<()> {
        let ok = match self {
            DarkFrame::Full {
                height,
                width,
                bands,
                ..
            } => *height == cube.height() && *width == cube.width() && *bands == cube.bands(),
            DarkFrame::PerBand(v) => v.len() == cube.bands(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "dark frame does not match {}x{}x{} cube",
                cube.height(),
                cube.width(),
                cube.bands()
            )))
        }
    }
}

fn check_dark_values(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(i) => Err(Error::InvalidInput(format!(
            "dark value {} at element {i} is negative or non-finite",
            values[i]
        ))),
        None => Ok(()),
    }
}

/// Per-band white-reference signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpectrum {
    pub reference: Vec<f64>,
    pub panel_reflectivity: f64,
}

/// Averages covered-lens acquisitions element by element.
pub fn estimate_dark(frames: &[SpectralCube]) -> Result<DarkFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no dark frames given".into()))?;
    for f in frames {
        if !f.same_shape(first) {
            return Err(Error::Dimension("dark frames differ in size".into()));
        }
        if f.state() != CalibrationState::RawCounts {
            return Err(Error::InvalidInput("dark frames must be raw counts".into()));
        }
    }
    let mut sum = vec![0.0f64; first.data().len()];
    for f in frames {
        for (s, &v) in sum.iter_mut().zip(f.data()) {
            *s += f64::from(v);
        }
    }
    let n = frames.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    check_dark_values(&sum)?;
    Ok(DarkFrame::Full {
        height: first.height(),
        width: first.width(),
        bands: first.bands(),
        values: sum,
    })
}

/// Derives the reference signal from a panel of known reflectivity imaged in
/// `cube`, so that calibrating the panel pixels yields `panel_reflectivity`.
pub fn extract_reference(
    cube: &SpectralCube,
    panel: PanelRegion,
    dark: &DarkFrame,
    panel_reflectivity: f64,
) -> Result<ReferenceSpectrum> {
    if !(panel_reflectivity > 0.0 && panel_reflectivity <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "panel reflectivity {panel_reflectivity} outside (0, 1]"
        )));
    }
    panel.check_within(cube.height(), cube.width())?;
    dark.check_matches(cube)?;

    let count = (panel.height * panel.width) as f64;
    let mut reference = Vec::with_capacity(cube.bands());
    for b in 0..cube.bands() {
        let plane = cube.band(b);
        let (mut signal, mut dark_sum) = (0.0, 0.0);
        for p in panel.pixel_indices(cube.width()) {
            signal += f64::from(plane[p]);
            dark_sum += dark.at(b, p);
        }
        let signal = signal / count;
        let dark_mean = dark_sum / count;
        if signal <= dark_mean {
            return Err(Error::UnusableReference {
                band: b,
                panel: signal,
                dark: dark_mean,
            });
        }
        reference.push(dark_mean + (signal - dark_mean) / panel_reflectivity);
    }
    Ok(ReferenceSpectrum {
        reference,
        panel_reflectivity,
    })
}

/// Converts a raw-count cube to reflectance.
///
/// Pixels where any band's `reference − dark` is at most [`DENOMINATOR_EPS`]
/// are zeroed and flagged invalid in the returned mask.
pub fn reflectance(
    cube: &SpectralCube,
    dark: &DarkFrame,
    reference: &ReferenceSpectrum,
) -> Result<(SpectralCube, ValidityMask)> {
    if cube.state() != CalibrationState::RawCounts {
        return Err(Error::InvalidInput("cube is already reflectance".into()));
    }
    dark.check_matches(cube)?;
    if reference.reference.len() != cube.bands() {
        return Err(Error::Dimension(format!(
            "reference has {} bands, cube has {}",
            reference.reference.len(),
            cube.bands()
        )));
    }

    let plane = cube.pixels();
    let bands = cube.bands();
    let valid: Vec<bool> = (0..plane)
        .into_par_iter()
        .map(|p| (0..bands).all(|b| reference.reference[b] - dark.at(b, p) > DENOMINATOR_EPS))
        .collect();

    let mut out = vec![0.0f32; plane * bands];
    out.par_chunks_mut(plane)
        .enumerate()
        .for_each(|(b, out_band)| {
            let r = reference.reference[b];
            let src = cube.band(b);
            for (p, o) in out_band.iter_mut().enumerate() {
                if valid[p] {
                    let d = dark.at(b, p);
                    *o = ((f64::from(src[p]) - d) / (r - d)).clamp(0.0, 1.0) as f32;
                }
            }
        });

    let calibrated = SpectralCube::new(
        cube.height(),
        cube.width(),
        cube.wavelengths().clone(),
        CalibrationState::Reflectance,
        out,
    )?
    .with_integration_time(cube.integration_time_ms())?;
    Ok((
        calibrated,
        ValidityMask::new(cube.height(), cube.width(), valid)?,
    ))
}
