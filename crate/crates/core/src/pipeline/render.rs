use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cube_io::{encode_ppm, LabelMask};
use crate::{Error, Result};

/// An 8-bit RGB color written as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Color(pub [u8; 3]);

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 6 && h.bytes().all(|b| b.is_ascii_hexdigit()))
            .ok_or_else(|| Error::Config(format!("color '{s}' is not #RRGGBB")))?;
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("hex digits");
        Ok(Color([channel(0), channel(2), channel(4)]))
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome colors of a detection map. Pixels ignored in either mask use
/// `ignored`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderPalette {
    pub true_positive: Color,
    pub true_negative: Color,
    pub false_positive: Color,
    pub false_negative: Color,
    pub ignored: Color,
}

impl Default for RenderPalette {
    fn default() -> Self {
        Self {
            true_positive: Color([0xC9, 0xA0, 0xDC]),
            true_negative: Color([0x4B, 0x00, 0x82]),
            false_positive: Color([0xFF, 0xF3, 0xA0]),
            false_negative: Color([0xD4, 0xB4, 0x00]),
            ignored: Color([0, 0, 0]),
        }
    }
}

impl RenderPalette {
    pub fn validate(&self) -> Result<()> {
        let four = [
            self.true_positive,
            self.true_negative,
            self.false_positive,
            self.false_negative,
        ];
        for i in 0..4 {
            for j in i + 1..4 {
                if four[i] == four[j] {
                    return Err(Error::Config(format!(
                        "palette reuses color {} for two outcomes",
                        four[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Color for one pixel given its predicted and true labels.
    pub fn color(&self, pred: u8, truth: u8) -> Color {
        match (pred, truth) {
            (LabelMask::IGNORE, _) | (_, LabelMask::IGNORE) => self.ignored,
            (1, 1) => self.true_positive,
            (0, 0) => self.true_negative,
            (1, _) => self.false_positive,
            _ => self.false_negative,
        }
    }
}

/// Interleaved RGB bytes of the detection map.
pub fn render_map(pred: &LabelMask, truth: &LabelMask, palette: &RenderPalette) -> Result<Vec<u8>> {
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(Error::Dimension(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    palette.validate()?;
    Ok(pred
        .labels()
        .iter()
        .zip(truth.labels())
        .flat_map(|(&p, &t)| palette.color(p, t).0)
        .collect())
}

/// The detection map encoded as a binary PPM.
pub fn render_ppm(pred: &LabelMask, truth: &LabelMask, palette: &RenderPalette) -> Result<Vec<u8>> {
    let rgb = render_map(pred, truth, palette)?;
    Ok(encode_ppm(pred.height(), pred.width(), &rgb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_colors() {
        let c: Color = "#c9A0dc".parse().unwrap();
        assert_eq!(c, Color([0xC9, 0xA0, 0xDC]));
        assert_eq!(c.to_string(), "#C9A0DC");
        assert!("C9A0DC".parse::<Color>().is_err());
        assert!("#C9A0D".parse::<Color>().is_err());
        assert!("#GGGGGG".parse::<Color>().is_err());
    }

    #[test]
    fn palette_json() {
        let p: RenderPalette = serde_json::from_str(r##"{"true_positive": "#010203"}"##).unwrap();
        assert_eq!(p.true_positive, Color([1, 2, 3]));
        assert_eq!(p.false_negative, RenderPalette::default().false_negative);
        let back: RenderPalette =
            serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn duplicate_colors_rejected() {
        let mut p = RenderPalette::default();
        p.false_positive = p.true_positive;
        assert!(p.validate().is_err());
        RenderPalette::default().validate().unwrap();
    }

    #[test]
    fn map_colors() {
        let pred = LabelMask::new(1, 5, vec![1, 0, 1, 0, 255]).unwrap();
        let truth = LabelMask::new(1, 5, vec![1, 0, 0, 1, 1]).unwrap();
        let p = RenderPalette::default();
        let map = render_map(&pred, &truth, &p).unwrap();
        let px: Vec<Color> = map.chunks(3).map(|c| Color([c[0], c[1], c[2]])).collect();
        assert_eq!(
            px,
            vec![
                p.true_positive,
                p.true_negative,
                p.false_positive,
                p.false_negative,
                p.ignored
            ]
        );
        let ppm = render_ppm(&pred, &truth, &p).unwrap();
        assert!(ppm.starts_with(b"P6\n5 1\n255\n"));
    }
}
