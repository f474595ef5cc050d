//! Stand-alone calibration and registration steps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::write_json;
use crate::calibrate::{
    estimate_dark, extract_reference, reflectance, DarkFrame, PanelRegion, PTFE_REFLECTIVITY,
};
use crate::cube_io::{load_cube, load_rgb, save_cube, save_pgm, ValidityMask};
use crate::register::{estimate_homography, load_correspondences, warp_cube, Homography};
use crate::{Error, Result};

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn default_reflectivity() -> f64 {
    PTFE_REFLECTIVITY
}

/// Raw-count cube plus either dark frames or per-band dark levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub cube: PathBuf,
    #[serde(default)]
    pub dark_frames: Vec<PathBuf>,
    #[serde(default)]
    pub dark_levels: Option<Vec<f64>>,
    pub panel: PanelRegion,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
}

impl CalibrateConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = read_config(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.cube);
        cfg.dark_frames.iter_mut().for_each(|p| resolve(base, p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dark_frames.is_empty() == self.dark_levels.is_none() {
            return Err(Error::Config(
                "give exactly one of dark_frames or dark_levels".into(),
            ));
        }
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return Err(Error::Config("reflectivity must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub reference: Vec<f64>,
    pub panel_reflectivity: f64,
    pub valid_pixels: usize,
    pub total_pixels: usize,
}

/// Writes `reflectance.rcube`, `validity.pgm` (1 valid, 0 invalid) and
/// `calibration.json`.
pub fn run_calibrate(cfg: &CalibrateConfig, out_dir: &Path) -> Result<CalibrationSummary> {
    cfg.validate()?;
    let cube = load_cube(&cfg.cube)?;
    let dark = match &cfg.dark_levels {
        Some(levels) => DarkFrame::per_band(levels.clone())?,
        None => {
            let frames = cfg
                .dark_frames
                .iter()
                .map(load_cube)
                .collect::<Result<Vec<_>>>()?;
            estimate_dark(&frames)?
        }
    };
    let reference = extract_reference(&cube, cfg.panel, &dark, cfg.reflectivity)?;
    let (refl, valid) = reflectance(&cube, &dark, &reference)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_cube(&refl, out_dir.join("reflectance.rcube"))?;
    save_validity(&valid, &out_dir.join("validity.pgm"))?;
    let summary = CalibrationSummary {
        reference: reference.reference,
        panel_reflectivity: reference.panel_reflectivity,
        valid_pixels: valid.count_valid(),
        total_pixels: refl.pixels(),
    };
    write_json(&out_dir.join("calibration.json"), &summary)?;
    Ok(summary)
}

fn save_validity(valid: &ValidityMask, path: &Path) -> Result<()> {
    save_pgm(valid.height(), valid.width(), &valid.to_pgm_mask(), path)
}

/// Cube to warp onto a target grid, with the transform given directly or
/// estimated from point correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterConfig {
    pub cube: PathBuf,
    #[serde(default)]
    pub correspondences: Option<PathBuf>,
    #[serde(default)]
    pub homography: Option<PathBuf>,
    /// RGB frame whose size defines the output grid.
    #[serde(default)]
    pub rgb: Option<PathBuf>,
    #[serde(default)]
    pub height: Option<usize>,
    #[serde(default)]
    pub width: Option<usize>,
}

impl RegisterConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: Self = read_config(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.cube);
        for p in [&mut cfg.correspondences, &mut cfg.homography, &mut cfg.rgb]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.correspondences.is_some() == self.homography.is_some() {
            return Err(Error::Config(
                "give exactly one of correspondences or homography".into(),
            ));
        }
        let explicit = self.height.is_some() && self.width.is_some();
        if self.rgb.is_some() == explicit {
            return Err(Error::Config(
                "give either rgb or both height and width for the output grid".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSummary {
    pub homography: Homography,
    /// Reprojection RMS over the correspondences, when estimated.
    pub rms: Option<f64>,
    pub height: usize,
    pub width: usize,
    pub valid_pixels: usize,
}

/// Writes `homography.json`, `registered.rcube`, `registration_validity.pgm`
/// and `registration.json`.
pub fn run_register(cfg: &RegisterConfig, out_dir: &Path) -> Result<RegistrationSummary> {
    cfg.validate()?;
    let cube = load_cube(&cfg.cube)?;
    let (homography, rms) = match (&cfg.homography, &cfg.correspondences) {
        (Some(h), _) => (Homography::load(h)?, None),
        (None, Some(c)) => {
            let est = estimate_homography(&load_correspondences(c)?)?;
            (est.homography, Some(est.rms))
        }
        (None, None) => unreachable!("validated"),
    };
    let (height, width) = match &cfg.rgb {
        Some(p) => {
            let rgb = load_rgb(p)?;
            (rgb.height(), rgb.width())
        }
        None => (cfg.height.unwrap_or(0), cfg.width.unwrap_or(0)),
    };
    let (warped, valid) = warp_cube(&cube, &homography, height, width)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    homography.save(out_dir.join("homography.json"))?;
    save_cube(&warped, out_dir.join("registered.rcube"))?;
    save_validity(&valid, &out_dir.join("registration_validity.pgm"))?;
    let summary = RegistrationSummary {
        homography,
        rms,
        height,
        width,
        valid_pixels: valid.count_valid(),
    };
    write_json(&out_dir.join("registration.json"), &summary)?;
    Ok(summary)
}
