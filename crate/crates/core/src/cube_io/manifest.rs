use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibrate::PanelRegion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneRole {
    #[serde(rename = "train", alias = "Train")]
    Train,
    #[serde(rename = "test", alias = "Test")]
    Test,
}

/// Train/test assignment of the ten reference scenarios: 1–6 train, 7–10 test.
pub fn reference_role(scenario_id: u32) -> Option<SceneRole> {
    match scenario_id {
        1..=6 => Some(SceneRole::Train),
        7..=10 => Some(SceneRole::Test),
        _ => None,
    }
}

/// Raw-count calibration inputs for a scene whose cube is not yet reflectance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInputs {
    /// Dark frames (covered-lens acquisitions) to average.
    pub dark: Vec<PathBuf>,
    /// White reference panel location inside the scene cube.
    pub panel: PanelRegion,
    #[serde(default = "default_reflectivity")]
    pub reflectivity: f64,
}

fn default_reflectivity() -> f64 {
    crate::calibrate::PTFE_REFLECTIVITY
}

/// One acquisition: cube, registered RGB frame, ground-truth mask and its
/// scenario metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scenario_id: u32,
    pub composition: Vec<String>,
    pub background: String,
    pub role: SceneRole,
    pub cube: PathBuf,
    pub rgb: PathBuf,
    pub mask: PathBuf,
    /// Present when `cube` holds raw counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationInputs>,
    /// Cube→RGB homography file; when present the cube is warped onto the
    /// RGB/mask grid before use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homography: Option<PathBuf>,
}

impl SceneManifest {
    pub fn validate(&self) -> Result<()> {
        if self.scenario_id == 0 {
            return Err(Error::Config("scenario_id must be >= 1".into()));
        }
        if let Some(expected) = reference_role(self.scenario_id) {
            if expected != self.role {
                return Err(Error::Config(format!(
                    "scenario {} is a {:?} scenario, manifest says {:?}",
                    self.scenario_id, expected, self.role
                )));
            }
        }
        if let Some(cal) = &self.calibration {
            if cal.dark.is_empty() {
                return Err(Error::Config(
                    "calibration needs at least one dark frame".into(),
                ));
            }
            if !(cal.reflectivity > 0.0 && cal.reflectivity <= 1.0) {
                return Err(Error::Config(format!(
                    "panel reflectivity {} outside (0, 1]",
                    cal.reflectivity
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let m: SceneManifest = serde_json::from_slice(bytes)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Reads a manifest and resolves its relative paths against the
    /// manifest's own directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_json_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base);
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.cube);
        fix(&mut self.rgb);
        fix(&mut self.mask);
        if let Some(h) = &mut self.homography {
            fix(h);
        }
        if let Some(cal) = &mut self.calibration {
            cal.dark.iter_mut().for_each(fix);
        }
    }
}
