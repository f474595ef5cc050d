//! Synthetic riverine scenes.
//!
//! Every material has a smooth base spectrum with Gaussian absorption dips.
//! Both plastic families carry exactly one SWIR dip (near 1210 or 1660 nm),
//! while natural and paper debris carry both or neither, so plastic is the
//! exclusive-or of two spectral features and no single band or linear score
//! separates the classes. RGB frames are rendered from the cube itself, which
//! keeps HSI and RGB pixels paired.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::calibrate::{PanelRegion, PTFE_REFLECTIVITY};
use crate::cube_io::{
    reference_role, save_cube, save_mask, save_rgb, CalibrationInputs, CalibrationState, LabelMask,
    RgbImage, SceneManifest, SceneRole, SpectralCube, WavelengthGrid, RGB_NOMINAL_NM,
};
use crate::{Error, Result};

/// Bands averaged into each synthetic RGB channel.
pub const RGB_AVERAGED_BANDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionDip {
    pub center_nm: f64,
    /// Standard deviation of the Gaussian profile.
    pub width_nm: f64,
    /// Fractional depth at the center, in `[0, 1)`.
    pub depth: f64,
}

/// `level · (1 + slope·(λ − 1000)/1000) · exp(−water·max(0, λ − 700)/500)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseSpectrum {
    pub level: f64,
    #[serde(default)]
    pub slope: f64,
    /// Strength of the near-infrared falloff typical of water.
    #[serde(default)]
    pub water: f64,
}

impl BaseSpectrum {
    pub fn at(&self, nm: f64) -> f64 {
        self.level
            * (1.0 + self.slope * (nm - 1000.0) / 1000.0)
            * (-self.water * (nm - 700.0).max(0.0) / 500.0).exp()
    }
}

/// Foreground material. Objects draw their own base spectrum; the material
/// fixes only its class and absorption features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub plastic: bool,
    #[serde(default)]
    pub dips: Vec<AbsorptionDip>,
    /// Opacity range for see-through materials; opaque when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opacity: Option<[f64; 2]>,
}

impl Material {
    fn transmission(&self, nm: f64, depth_scale: f64) -> f64 {
        self.dips
            .iter()
            .map(|d| {
                let z = (nm - d.center_nm) / d.width_nm;
                1.0 - (d.depth * depth_scale).min(0.99) * (-0.5 * z * z).exp()
            })
            .product()
    }
}

/// Background spectrum, optionally mixed with a second spectrum either per
/// pixel at random or in large patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub name: String,
    pub base: BaseSpectrum,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix_with: Option<BaseSpectrum>,
    /// Range of the per-pixel weight of `mix_with`.
    #[serde(default)]
    pub mix_fraction: [f64; 2],
    /// Absorption features of the base component, e.g. organic sediment.
    #[serde(default)]
    pub dips: Vec<AbsorptionDip>,
    /// When set, the mixing weight alternates between the two ends of
    /// `mix_fraction` in blobs of roughly this many pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch_period: Option<f64>,
    /// Per-pixel brightness multiplier range (surface texture).
    #[serde(default = "unit_gain")]
    pub gain: [f64; 2],
}

fn unit_gain() -> [f64; 2] {
    [1.0, 1.0]
}

const DIP_A: f64 = 1210.0;
const DIP_B: f64 = 1660.0;
const DIP_WIDTH: f64 = 40.0;
const DIP_DEPTH: f64 = 0.4;

fn dip(center_nm: f64) -> AbsorptionDip {
    AbsorptionDip {
        center_nm,
        width_nm: DIP_WIDTH,
        depth: DIP_DEPTH,
    }
}

/// Built-in foreground materials.
pub fn material_library() -> Vec<Material> {
    let m = |name: &str, plastic, dips: Vec<AbsorptionDip>| Material {
        name: name.into(),
        plastic,
        dips,
        opacity: None,
    };
    vec![
        m("polyolefin", true, vec![dip(DIP_A)]),
        m("polyester", true, vec![dip(DIP_B)]),
        m("vegetation", false, vec![dip(DIP_A), dip(DIP_B)]),
        m("wood", false, vec![dip(DIP_A), dip(DIP_B)]),
        m("paper", false, vec![dip(DIP_A), dip(DIP_B)]),
        m("cardboard", false, vec![dip(DIP_A), dip(DIP_B)]),
        Material {
            opacity: Some([0.2, 0.5]),
            ..m("glass", false, vec![])
        },
    ]
}

const SAND: BaseSpectrum = BaseSpectrum {
    level: 0.35,
    slope: 0.25,
    water: 0.0,
};
const CLEAR_WATER: BaseSpectrum = BaseSpectrum {
    level: 0.08,
    slope: 0.0,
    water: 1.5,
};
const SEDIMENT: BaseSpectrum = BaseSpectrum {
    level: 0.4,
    slope: 0.2,
    water: 0.0,
};

const TEXTURE_GAIN: [f64; 2] = [0.7, 1.8];

/// Built-in backgrounds.
pub fn background_library() -> Vec<Background> {
    let plain = |name: &str, base| Background {
        name: name.into(),
        base,
        mix_with: None,
        mix_fraction: [0.0, 0.0],
        dips: Vec::new(),
        patch_period: None,
        gain: unit_gain(),
    };
    vec![
        plain(
            "black_pe",
            BaseSpectrum {
                level: 0.05,
                slope: 0.0,
                water: 0.0,
            },
        ),
        plain("water", CLEAR_WATER),
        // wet riverbed sand: a per-pixel film of water
        Background {
            name: "sand".into(),
            base: SAND,
            mix_with: Some(CLEAR_WATER),
            mix_fraction: [0.0, 0.7],
            dips: Vec::new(),
            patch_period: None,
            gain: TEXTURE_GAIN,
        },
        // patches of clean sand and of organic sediment, which shares both
        // absorption features with vegetation
        Background {
            name: "settled_riverbed".into(),
            base: SEDIMENT,
            mix_with: Some(SAND),
            mix_fraction: [0.0, 1.0],
            dips: vec![dip(DIP_A), dip(DIP_B)],
            patch_period: Some(24.0),
            gain: TEXTURE_GAIN,
        },
        Background {
            name: "turbid_riverbed".into(),
            base: CLEAR_WATER,
            mix_with: Some(SAND),
            mix_fraction: [0.3, 0.6],
            dips: Vec::new(),
            patch_period: None,
            gain: unit_gain(),
        },
    ]
}

fn default_role_hint() -> Option<SceneRole> {
    None
}

/// One scene of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub scenario_id: u32,
    /// Defaults to the reference assignment of scenarios 1–10.
    #[serde(default = "default_role_hint")]
    pub role: Option<SceneRole>,
    pub composition: Vec<String>,
    /// Label written to the manifest.
    pub background_label: String,
    /// Background library entry; a second entry fills the right half.
    pub background: Vec<String>,
    /// Foreground materials objects are drawn from.
    pub materials: Vec<String>,
    pub object_count: usize,
    /// Contrast multiplier toward the background for every object pixel.
    #[serde(default)]
    pub turbidity: Option<f64>,
    /// Probability that a plastic object is partially transparent.
    #[serde(default)]
    pub transparent_fraction: f64,
}

fn default_sigma() -> f64 {
    0.02
}
fn default_size() -> usize {
    96
}
fn default_radius() -> [f64; 2] {
    [0.06, 0.14]
}
fn default_albedo() -> [f64; 2] {
    [0.25, 0.8]
}
fn default_slope() -> [f64; 2] {
    [-0.2, 0.2]
}
fn default_depth_scale() -> [f64; 2] {
    [0.75, 1.25]
}
fn default_opacity() -> [f64; 2] {
    [0.6, 0.85]
}

/// Parameters of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_size")]
    pub height: usize,
    #[serde(default = "default_size")]
    pub width: usize,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub wavelengths: Option<WavelengthGrid>,
    /// Object semi-axis range as a fraction of the shorter scene side.
    #[serde(default = "default_radius")]
    pub object_radius: [f64; 2],
    #[serde(default = "default_albedo")]
    pub albedo: [f64; 2],
    #[serde(default = "default_slope")]
    pub slope: [f64; 2],
    /// Per-object multiplier on the material's dip depths.
    #[serde(default = "default_depth_scale")]
    pub depth_scale: [f64; 2],
    #[serde(default = "default_opacity")]
    pub transparent_opacity: [f64; 2],
    /// Write raw counts with a dark frame and a reference panel instead of
    /// reflectance.
    #[serde(default)]
    pub raw_counts: bool,
    /// Materials added to (or replacing by name) the built-in library.
    #[serde(default)]
    pub materials: Vec<Material>,
    #[serde(default)]
    pub backgrounds: Vec<Background>,
    #[serde(default = "riverine_scenes")]
    pub scenes: Vec<SceneSpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// The ten reference scenarios: six lab scenes for training, four riverbed
/// scenes with unseen debris types, transparency and turbidity for testing.
pub fn riverine_scenes() -> Vec<SceneSpec> {
    let s = |id: u32,
             composition: &[&str],
             label: &str,
             background: &[&str],
             materials: &[&str],
             turbidity: Option<f64>,
             transparent_fraction: f64| SceneSpec {
        scenario_id: id,
        role: None,
        composition: composition.iter().map(|c| c.to_string()).collect(),
        background_label: label.into(),
        background: background.iter().map(|b| b.to_string()).collect(),
        materials: materials.iter().map(|m| m.to_string()).collect(),
        object_count: 8,
        turbidity,
        transparent_fraction,
    };
    let plastics = ["polyolefin", "polyester"];
    let debris = ["polyolefin", "polyester", "paper", "cardboard", "glass"];
    let all = [
        "polyolefin",
        "polyester",
        "paper",
        "cardboard",
        "glass",
        "vegetation",
        "wood",
    ];
    let mut scenes = vec![
        s(
            1,
            &["Native Vegetation"],
            "Black PE",
            &["black_pe"],
            &["vegetation", "wood"],
            None,
            0.0,
        ),
        s(
            2,
            &["Plastic Samples"],
            "Black PE",
            &["black_pe"],
            &plastics,
            None,
            0.0,
        ),
        s(
            3,
            &["Plastic Samples"],
            "Black PE, Water",
            &["black_pe", "water"],
            &plastics,
            None,
            0.0,
        ),
        s(
            4,
            &["Plastic Samples"],
            "Riverbed Sand",
            &["sand"],
            &plastics,
            None,
            0.0,
        ),
        s(
            5,
            &["Plastic Waste"],
            "Black PE",
            &["black_pe"],
            &plastics,
            None,
            0.0,
        ),
        s(
            6,
            &["Plastic Waste"],
            "Riverbed Sand",
            &["sand"],
            &plastics,
            None,
            0.0,
        ),
        s(
            7,
            &["Plastic Waste", "Non-plastic Waste"],
            "Settled Riverbed",
            &["settled_riverbed"],
            &debris,
            None,
            0.3,
        ),
        s(
            8,
            &["Plastic Waste", "Non-plastic Waste"],
            "Turbid Riverbed",
            &["turbid_riverbed"],
            &debris,
            Some(0.75),
            0.3,
        ),
        s(
            9,
            &["Plastic Waste", "Non-plastic Waste", "Native Vegetation"],
            "Settled Riverbed",
            &["settled_riverbed"],
            &all,
            None,
            0.3,
        ),
        s(
            10,
            &["Plastic Waste", "Non-plastic Waste", "Native Vegetation"],
            "Turbid Riverbed",
            &["turbid_riverbed"],
            &all,
            Some(0.75),
            0.3,
        ),
    ];
    // a dense vegetation mat
    scenes[0].object_count = 24;
    scenes
}

fn check_range(name: &str, r: [f64; 2], lo: f64, hi: f64) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && lo <= r[0] && r[0] <= r[1] && r[1] <= hi) {
        return Err(Error::Config(format!(
            "{name} range {r:?} must be ordered and inside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl SynthConfig {
    fn materials(&self) -> Vec<Material> {
        merge_by_name(material_library(), &self.materials, |m| &m.name)
    }

    fn backgrounds(&self) -> Vec<Background> {
        merge_by_name(background_library(), &self.backgrounds, |b| &b.name)
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_slice(&bytes)
    }

    pub fn grid(&self) -> WavelengthGrid {
        self.wavelengths
            .clone()
            .unwrap_or_else(WavelengthGrid::snapshot_vnir_swir)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::Config(format!(
                "scene size {}x{} is too small",
                self.height, self.width
            )));
        }
        if self.raw_counts && (self.height < 8 || self.width < 8) {
            return Err(Error::Config(
                "raw-count scenes need at least 8x8 pixels".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        check_range("object_radius", self.object_radius, 0.0, 1.0)?;
        check_range("albedo", self.albedo, 0.0, 1.0)?;
        check_range("slope", self.slope, -0.9, 0.9)?;
        check_range("depth_scale", self.depth_scale, 0.0, 2.0)?;
        check_range("transparent_opacity", self.transparent_opacity, 0.0, 1.0)?;
        if self.scenes.is_empty() {
            return Err(Error::Config("no scenes requested".into()));
        }
        let materials = self.materials();
        let backgrounds = self.backgrounds();
        let mut ids = std::collections::BTreeSet::new();
        let mut any_plastic = false;
        for s in &self.scenes {
            if !ids.insert(s.scenario_id) {
                return Err(Error::Config(format!(
                    "duplicate scenario {}",
                    s.scenario_id
                )));
            }
            if s.materials.is_empty() {
                return Err(Error::Config(format!(
                    "scenario {} has an empty material list",
                    s.scenario_id
                )));
            }
            if s.background.is_empty() || s.background.len() > 2 {
                return Err(Error::Config(format!(
                    "scenario {} needs one or two backgrounds",
                    s.scenario_id
                )));
            }
            for name in &s.materials {
                let m = find(&materials, name, |m| &m.name)?;
                any_plastic |= m.plastic;
                if let Some(o) = m.opacity {
                    check_range("opacity", o, 0.0, 1.0)?;
                }
            }
            for name in &s.background {
                find(&backgrounds, name, |b| &b.name)?;
            }
            if let Some(t) = s.turbidity {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::Config("turbidity must lie in (0, 1]".into()));
                }
            }
            if !(0.0..=1.0).contains(&s.transparent_fraction) {
                return Err(Error::Config(
                    "transparent_fraction must lie in [0, 1]".into(),
                ));
            }
            self.role_of(s)?;
        }
        if !any_plastic {
            return Err(Error::Config("no plastic material in any scene".into()));
        }
        Ok(())
    }

    fn role_of(&self, s: &SceneSpec) -> Result<SceneRole> {
        s.role
            .or_else(|| reference_role(s.scenario_id))
            .ok_or_else(|| {
                Error::Config(format!("scenario {} needs an explicit role", s.scenario_id))
            })
    }
}

fn merge_by_name<T: Clone>(mut base: Vec<T>, extra: &[T], name: impl Fn(&T) -> &String) -> Vec<T> {
    for e in extra {
        match base.iter().position(|b| name(b) == name(e)) {
            Some(i) => base[i] = e.clone(),
            None => base.push(e.clone()),
        }
    }
    base
}

fn find<'a, T>(items: &'a [T], wanted: &str, name: impl Fn(&T) -> &String) -> Result<&'a T> {
    items
        .iter()
        .find(|i| name(i) == wanted)
        .ok_or_else(|| Error::Config(format!("unknown material or background '{wanted}'")))
}

/// One generated scene held in memory.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub scenario_id: u32,
    pub role: SceneRole,
    /// Reflectance cube.
    pub cube: SpectralCube,
    pub rgb: RgbImage,
    pub mask: LabelMask,
}

struct Object {
    material: usize,
    center: (f64, f64),
    radii: (f64, f64),
    angle: f64,
    spectrum: Vec<f64>,
    opacity: f64,
}

impl Object {
    fn covers(&self, r: usize, c: usize) -> bool {
        let (dy, dx) = (r as f64 - self.center.0, c as f64 - self.center.1);
        let (s, co) = self.angle.sin_cos();
        let u = (co * dx + s * dy) / self.radii.1;
        let v = (-s * dx + co * dy) / self.radii.0;
        u * u + v * v <= 1.0
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

struct BackgroundSampler {
    base: Vec<f64>,
    mix: Option<Vec<f64>>,
    fraction: [f64; 2],
    patches: Option<(f64, f64, f64)>,
    gain: [f64; 2],
}

impl BackgroundSampler {
    fn new(b: &Background, centers: &[f64], rng: &mut ChaCha8Rng) -> Self {
        let absorber = Material {
            name: b.name.clone(),
            plastic: false,
            dips: b.dips.clone(),
            opacity: None,
        };
        let patches = b.patch_period.map(|period| {
            let phase = |rng: &mut ChaCha8Rng| rng.random_range(0.0..std::f64::consts::TAU);
            (period, phase(rng), phase(rng))
        });
        Self {
            base: centers
                .iter()
                .map(|&nm| b.base.at(nm) * absorber.transmission(nm, 1.0))
                .collect(),
            mix: b
                .mix_with
                .map(|m| centers.iter().map(|&nm| m.at(nm)).collect()),
            fraction: b.mix_fraction,
            patches,
            gain: b.gain,
        }
    }

    fn sample(&self, r: usize, c: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let g = uniform(rng, self.gain);
        let Some(mix) = &self.mix else {
            for (o, &b) in out.iter_mut().zip(&self.base) {
                *o = g * b;
            }
            return;
        };
        let f = match self.patches {
            Some((period, p1, p2)) => {
                let k = std::f64::consts::TAU / period;
                let wave = (k * r as f64 + p1).sin()
                    + (k * c as f64 + p2).sin()
                    + (k * 0.7 * (r + c) as f64 + p1 - p2).sin();
                if wave > 0.0 {
                    self.fraction[1]
                } else {
                    self.fraction[0]
                }
            }
            None => uniform(rng, self.fraction),
        };
        for ((o, &b), &m) in out.iter_mut().zip(&self.base).zip(mix) {
            *o = g * ((1.0 - f) * b + f * m);
        }
    }
}

/// Generates one scene. Each scene has its own random stream, so a scene
/// does not change when others are added or removed.
pub fn generate_scene(cfg: &SynthConfig, spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    let role = cfg.role_of(spec)?;
    let materials = cfg.materials();
    let backgrounds = cfg.backgrounds();
    let grid = cfg.grid();
    let centers = grid.centers().to_vec();
    let (h, w) = (cfg.height, cfg.width);
    let bands = centers.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(spec.scenario_id));

    let scene_materials: Vec<usize> = spec
        .materials
        .iter()
        .map(|n| {
            materials
                .iter()
                .position(|m| &m.name == n)
                .ok_or_else(|| Error::Config(format!("unknown material '{n}'")))
        })
        .collect::<Result<_>>()?;
    let scene_backgrounds: Vec<&Background> = spec
        .background
        .iter()
        .map(|n| find(&backgrounds, n, |b| &b.name))
        .collect::<Result<_>>()?;

    let side = h.min(w) as f64;
    let objects: Vec<Object> = (0..spec.object_count)
        .map(|i| {
            // cycle through the material list so every material appears
            let material = scene_materials[i % scene_materials.len()];
            let m = &materials[material];
            let base = BaseSpectrum {
                level: uniform(&mut rng, cfg.albedo),
                slope: uniform(&mut rng, cfg.slope),
                water: 0.0,
            };
            let depth_scale = uniform(&mut rng, cfg.depth_scale);
            let spectrum = centers
                .iter()
                .map(|&nm| base.at(nm) * m.transmission(nm, depth_scale))
                .collect();
            let transparent = m.plastic
                && spec.transparent_fraction > 0.0
                && rng.random_bool(spec.transparent_fraction);
            let opacity = match m.opacity {
                Some(range) => uniform(&mut rng, range),
                None if transparent => uniform(&mut rng, cfg.transparent_opacity),
                None => 1.0,
            };
            Object {
                material,
                center: (
                    rng.random_range(0.0..h as f64),
                    rng.random_range(0.0..w as f64),
                ),
                radii: (
                    uniform(&mut rng, cfg.object_radius) * side,
                    uniform(&mut rng, cfg.object_radius) * side,
                ),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                spectrum,
                opacity,
            }
        })
        .collect();

    let background_spectra: Vec<BackgroundSampler> = scene_backgrounds
        .iter()
        .map(|b| BackgroundSampler::new(b, &centers, &mut rng))
        .collect();

    let noise = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let plane = h * w;
    let mut data = vec![0.0f32; plane * bands];
    let mut labels = vec![LabelMask::NON_PLASTIC; plane];
    let mut pixel = vec![0.0f64; bands];
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let bg_index = if background_spectra.len() > 1 && c >= w / 2 {
                1
            } else {
                0
            };
            background_spectra[bg_index].sample(r, c, &mut rng, &mut pixel);
            // later objects occlude earlier ones
            if let Some(obj) = objects.iter().rev().find(|o| o.covers(r, c)) {
                for b in 0..bands {
                    let mut v = obj.opacity * obj.spectrum[b] + (1.0 - obj.opacity) * pixel[b];
                    if let Some(t) = spec.turbidity {
                        v = pixel[b] + t * (v - pixel[b]);
                    }
                    pixel[b] = v;
                }
                if materials[obj.material].plastic {
                    labels[p] = LabelMask::PLASTIC;
                }
            }
            for b in 0..bands {
                let n = noise.map_or(0.0, |d| d.sample(&mut rng));
                data[b * plane + p] = (pixel[b] + n).clamp(0.0, 1.0) as f32;
            }
        }
    }

    let cube = SpectralCube::new(h, w, grid, CalibrationState::Reflectance, data)?;
    let rgb = render_rgb(&cube)?;
    let mask = LabelMask::new(h, w, labels)?;
    Ok(SyntheticScene {
        scenario_id: spec.scenario_id,
        role,
        cube,
        rgb,
        mask,
    })
}

/// RGB frame whose channels average the [`RGB_AVERAGED_BANDS`] cube bands
/// nearest 620, 540 and 470 nm.
pub fn render_rgb(cube: &SpectralCube) -> Result<RgbImage> {
    let centers = cube.wavelengths().centers();
    let take = RGB_AVERAGED_BANDS.min(centers.len());
    let pick = |target: f64| {
        let mut idx: Vec<usize> = (0..centers.len()).collect();
        idx.sort_by(|&a, &b| {
            (centers[a] - target)
                .abs()
                .total_cmp(&(centers[b] - target).abs())
                .then(a.cmp(&b))
        });
        idx.truncate(take);
        idx
    };
    let [blue, green, red] = RGB_NOMINAL_NM;
    let channels = [pick(red), pick(green), pick(blue)];
    let plane = cube.pixels();
    let mut data = Vec::with_capacity(plane * 3);
    for p in 0..plane {
        for bands in &channels {
            let sum: f32 = bands.iter().map(|&b| cube.band(b)[p]).sum();
            data.push((sum / bands.len() as f32).clamp(0.0, 1.0));
        }
    }
    RgbImage::new(cube.height(), cube.width(), data)
}

/// Per-band dark level and white-reference level used for raw-count scenes.
const RAW_DARK: f32 = 60.0;
const RAW_WHITE: f32 = 3900.0;

fn raw_scene(
    scene: &SyntheticScene,
) -> Result<(SpectralCube, SpectralCube, PanelRegion, LabelMask)> {
    let cube = &scene.cube;
    let (h, w) = (cube.height(), cube.width());
    let side = (h.min(w) / 8).max(1);
    let panel = PanelRegion {
        row: 0,
        col: 0,
        height: side,
        width: side,
    };
    let in_panel = |r: usize, c: usize| r < side && c < side;
    let gain = RAW_WHITE - RAW_DARK;
    let raw = SpectralCube::from_fn(
        h,
        w,
        cube.wavelengths().clone(),
        CalibrationState::RawCounts,
        |b, r, c| {
            let refl = if in_panel(r, c) {
                PTFE_REFLECTIVITY as f32
            } else {
                cube.get(b, r, c)
            };
            RAW_DARK + refl * gain
        },
    )?
    .with_integration_time(Some(2.0))?;
    let dark = SpectralCube::from_fn(
        h,
        w,
        cube.wavelengths().clone(),
        CalibrationState::RawCounts,
        |_, _, _| RAW_DARK,
    )?
    .with_integration_time(Some(2.0))?;
    let mut labels = scene.mask.labels().to_vec();
    for r in 0..side {
        for c in 0..side {
            labels[r * w + c] = LabelMask::IGNORE;
        }
    }
    Ok((raw, dark, panel, LabelMask::new(h, w, labels)?))
}

/// Generates every scene of `cfg` and writes its cube, RGB frame, mask and
/// manifest into `out_dir`. Returns the manifest paths in scene order.
pub fn synth_gen(cfg: &SynthConfig, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut manifests = Vec::with_capacity(cfg.scenes.len());
    for spec in &cfg.scenes {
        let scene = generate_scene(cfg, spec, seed)?;
        let stem = format!("scene_{:02}", spec.scenario_id);
        let cube_name = format!("{stem}.rcube");
        let rgb_name = format!("{stem}_rgb.rcube");
        let mask_name = format!("{stem}_mask.pgm");
        save_rgb(&scene.rgb, out_dir.join(&rgb_name))?;
        let calibration = if cfg.raw_counts {
            let (raw, dark, panel, mask) = raw_scene(&scene)?;
            let dark_name = format!("{stem}_dark.rcube");
            save_cube(&raw, out_dir.join(&cube_name))?;
            save_cube(&dark, out_dir.join(&dark_name))?;
            save_mask(&mask, out_dir.join(&mask_name))?;
            Some(CalibrationInputs {
                dark: vec![dark_name.into()],
                panel,
                reflectivity: PTFE_REFLECTIVITY,
            })
        } else {
            save_cube(&scene.cube, out_dir.join(&cube_name))?;
            save_mask(&scene.mask, out_dir.join(&mask_name))?;
            None
        };
        let manifest = SceneManifest {
            scenario_id: spec.scenario_id,
            composition: spec.composition.clone(),
            background: spec.background_label.clone(),
            role: scene.role,
            cube: cube_name.into(),
            rgb: rgb_name.into(),
            mask: mask_name.into(),
            calibration,
            homography: None,
        };
        let path = out_dir.join(format!("{stem}.json"));
        manifest.save(&path)?;
        manifests.push(path);
    }
    Ok(manifests)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scenes: Vec<SceneSpec>) -> SynthConfig {
        SynthConfig {
            height: 24,
            width: 20,
            scenes,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn default_benchmark_is_valid() {
        let cfg = SynthConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.scenes.len(), 10);
        assert_eq!(cfg.grid().len(), 33);
    }

    #[test]
    fn every_scene_has_its_materials() {
        let cfg = small(riverine_scenes());
        for spec in &cfg.scenes {
            let s = generate_scene(&cfg, spec, 1).unwrap();
            assert_eq!(s.cube.bands(), 33);
            assert_eq!(s.role, reference_role(spec.scenario_id).unwrap());
            let positives = s.mask.labels().iter().filter(|&&l| l == 1).count();
            if spec.scenario_id == 1 {
                assert_eq!(positives, 0);
            }
        }
    }

    #[test]
    fn noiseless_plastic_region_is_uniform() {
        let mut spec = riverine_scenes()[1].clone();
        spec.object_count = 1;
        spec.materials = vec!["polyolefin".into()];
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            object_radius: [0.3, 0.3],
            ..small(vec![spec.clone()])
        };
        let s = generate_scene(&cfg, &spec, 5).unwrap();
        let plastic: Vec<usize> = (0..s.cube.pixels())
            .filter(|&p| s.mask.labels()[p] == 1)
            .collect();
        assert!(plastic.len() > 10);
        let first = plastic[0];
        for b in 0..s.cube.bands() {
            let band = s.cube.band(b);
            assert!(plastic.iter().all(|&p| band[p] == band[first]));
        }
    }

    #[test]
    fn scenes_are_seeded() {
        let cfg = small(riverine_scenes()[..2].to_vec());
        let a = generate_scene(&cfg, &cfg.scenes[1], 3).unwrap();
        let b = generate_scene(&cfg, &cfg.scenes[1], 3).unwrap();
        let c = generate_scene(&cfg, &cfg.scenes[1], 4).unwrap();
        assert_eq!(a.cube, b.cube);
        assert_ne!(a.cube, c.cube);
    }

    #[test]
    fn config_errors() {
        let mut cfg = small(riverine_scenes());
        cfg.height = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small(riverine_scenes());
        cfg.scenes[0].materials.clear();
        assert!(cfg.validate().is_err());
        let cfg = small(vec![riverine_scenes()[0].clone()]);
        assert!(cfg.validate().is_err(), "no plastic anywhere");
        let mut cfg = small(riverine_scenes());
        cfg.scenes[3].materials.push("unobtainium".into());
        assert!(cfg.validate().is_err());
        let mut cfg = small(riverine_scenes());
        cfg.scenes[2].scenario_id = 1;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<SynthConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn rgb_follows_cube() {
        let grid = WavelengthGrid::new(vec![470.0, 540.0, 620.0, 1200.0]).unwrap();
        let cube = SpectralCube::from_fn(1, 2, grid, CalibrationState::Reflectance, |b, _, c| {
            [0.1, 0.2, 0.3, 0.9][b] + 0.01 * c as f32
        })
        .unwrap();
        let rgb = render_rgb(&cube).unwrap();
        // red averages 620 and 540, green 540 and 470 (tie → lower index), blue 470 and 540
        let px = rgb.rgb(0, 0);
        assert!((px[0] - 0.25).abs() < 1e-6);
        assert!((px[1] - 0.15).abs() < 1e-6);
        assert!((px[2] - 0.15).abs() < 1e-6);
    }
}
