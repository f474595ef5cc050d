//! The `.rcube` datacube format.
//!
//! ```text
//! RCUBE 1
//! <H> <W> <B>
//! <B space-separated band centers in nm>
//! STATE raw|reflectance
//! INTEGRATION_MS <x>|-
//! <H·W·B little-endian f32, band-sequential>
//! ```
//!
//! Numbers in the header are written with Rust's shortest round-trip float
//! formatting, so `decode(encode(c)) == c` holds exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::raster::{CalibrationState, RgbImage, SpectralCube, WavelengthGrid};
use crate::{Error, Result};

const MAGIC: &str = "RCUBE";
const VERSION: &str = "1";
const HEADER_LINES: usize = 5;

pub fn encode_header(cube: &SpectralCube) -> String {
    let mut h = String::new();
    let _ = writeln!(h, "{MAGIC} {VERSION}");
    let _ = writeln!(h, "{} {} {}", cube.height(), cube.width(), cube.bands());
    let centers: Vec<String> = cube
        .wavelengths()
        .centers()
        .iter()
        .map(|c| c.to_string())
        .collect();
    let _ = writeln!(h, "{}", centers.join(" "));
    let state = match cube.state() {
        CalibrationState::RawCounts => "raw",
        CalibrationState::Reflectance => "reflectance",
    };
    let _ = writeln!(h, "STATE {state}");
    match cube.integration_time_ms() {
        Some(t) => {
            let _ = writeln!(h, "INTEGRATION_MS {t}");
        }
        None => h.push_str("INTEGRATION_MS -\n"),
    }
    h
}

pub fn encode_cube(cube: &SpectralCube) -> Vec<u8> {
    let header = encode_header(cube);
    let mut out = Vec::with_capacity(header.len() + cube.data().len() * 4);
    out.extend_from_slice(header.as_bytes());
    for v in cube.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cube(bytes: &[u8]) -> Result<SpectralCube> {
    let mut lines = Vec::with_capacity(HEADER_LINES);
    let mut start = 0;
    for _ in 0..HEADER_LINES {
        let nl = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Header("truncated header".into()))?;
        let line = std::str::from_utf8(&bytes[start..start + nl])
            .map_err(|_| Error::Header("header is not UTF-8".into()))?;
        lines.push(line);
        start += nl + 1;
    }
    let payload = &bytes[start..];

    if lines[0] != format!("{MAGIC} {VERSION}") {
        return Err(Error::Header(format!(
            "bad magic/version line {:?}",
            lines[0]
        )));
    }

    let dims = parse_fields::<usize>(lines[1], "dimensions")?;
    let [height, width, bands] = dims[..] else {
        return Err(Error::Header(format!(
            "expected \"H W B\", got {:?}",
            lines[1]
        )));
    };
    if height == 0 || width == 0 || bands == 0 {
        return Err(Error::Header("zero-sized dimension".into()));
    }

    let centers = parse_fields::<f64>(lines[2], "wavelengths")?;
    if centers.len() != bands {
        return Err(Error::Header(format!(
            "{} wavelengths for {bands} bands",
            centers.len()
        )));
    }
    let wavelengths = WavelengthGrid::new(centers).map_err(|e| Error::Header(e.to_string()))?;

    let state = match lines[3] {
        "STATE raw" => CalibrationState::RawCounts,
        "STATE reflectance" => CalibrationState::Reflectance,
        other => return Err(Error::Header(format!("bad state line {other:?}"))),
    };

    let integration = match lines[4].strip_prefix("INTEGRATION_MS ") {
        Some("-") => None,
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| Error::Header(format!("bad integration time {v:?}")))?,
        ),
        None => {
            return Err(Error::Header(format!(
                "bad integration line {:?}",
                lines[4]
            )))
        }
    };

    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(bands))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Header("dimensions overflow".into()))?;
    if payload.len() != expected {
        return Err(Error::PayloadLength {
            expected,
            actual: payload.len(),
        });
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    SpectralCube::new(height, width, wavelengths, state, data)?
        .with_integration_time(integration)
        .map_err(|e| Error::Header(e.to_string()))
}

fn parse_fields<T: std::str::FromStr>(line: &str, what: &str) -> Result<Vec<T>> {
    line.split(' ')
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::Header(format!("bad {what} field {tok:?}")))
        })
        .collect()
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<SpectralCube> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes)
}

pub fn save_cube(cube: &SpectralCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

/// Loads an RGB frame stored as a 3-band `.rcube`.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    RgbImage::from_cube(&load_cube(path)?)
}

pub fn save_rgb(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    save_cube(&image.to_cube(), path)
}
