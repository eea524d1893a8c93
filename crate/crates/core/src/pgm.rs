//! Plain-text PGM (P2) images.
//!
//! Pixels are written in the same row-major order as [`crate::field::TestGrid`]
//! indices: image row `j` holds grid points `(j, 0) .. (j, side - 1)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u32>,
}

impl Pgm {
    pub fn new(width: usize, height: usize, maxval: u32, pixels: Vec<u32>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Pgm {
            width,
            height,
            maxval,
            pixels,
        })
    }

    /// Linearly maps `values` from `[lo, hi]` onto `0..=255`, clamping.
    pub fn from_scaled(side: usize, values: &[f64], lo: f64, hi: f64) -> Result<Self> {
        let span = if hi > lo { hi - lo } else { 1.0 };
        let pixels = values
            .iter()
            .map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u32)
            .collect();
        Pgm::new(side, side, 255, pixels)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
        for row in self.pixels.chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::config("image", msg.to_string());
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        if tokens.next() != Some("P2") {
            return Err(bad("not a plain PGM (P2) file"));
        }
        let mut number = |what: &str| -> Result<u32> {
            tokens
                .next()
                .and_then(|t| t.parse::<u32>().ok())
                .ok_or_else(|| bad(&format!("missing or invalid {what}")))
        };
        let width = number("width")? as usize;
        let height = number("height")? as usize;
        let maxval = number("maxval")?;
        if maxval == 0 {
            return Err(bad("maxval must be positive"));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for _ in 0..width * height {
            let v = number("pixel")?;
            if v > maxval {
                return Err(bad("pixel exceeds maxval"));
            }
            pixels.push(v);
        }
        Pgm::new(width, height, maxval, pixels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_with_comments() {
        let img = Pgm::new(3, 2, 1, vec![0, 1, 0, 1, 1, 0]).unwrap();
        let text = img.to_text();
        assert_eq!(text, "P2\n3 2\n1\n0 1 0\n1 1 0\n");
        let commented = text.replacen("P2\n", "P2\n# debug\n", 1);
        assert_eq!(Pgm::parse(&commented).unwrap(), img);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Pgm::parse("P5\n1 1\n255\n0").is_err());
        assert!(Pgm::parse("P2\n2 2\n1\n0 1 1").is_err());
        assert!(Pgm::parse("P2\n1 1\n1\n3").is_err());
    }

    #[test]
    fn scaling_clamps() {
        let img = Pgm::from_scaled(2, &[-5.0, -2.0, 0.0, 2.0], -2.0, 2.0).unwrap();
        assert_eq!(img.pixels, vec![0, 0, 128, 255]);
    }
}
