//! 8-bit parameter quantization.
//!
//! Signed parameters live in `[-1, 1]` and map onto the 256 levels with
//! `round((v + 1) / 2 * 255)`, rounding half away from zero. Unsigned
//! parameters (extents, scale, radius) use `level / 255` over `[0, 1]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// One 8-bit quantization bucket.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct QuantLevel(u8);

impl QuantLevel {
    pub const MIN: QuantLevel = QuantLevel(0);
    pub const MAX: QuantLevel = QuantLevel(255);

    pub const fn new(level: u8) -> Self {
        QuantLevel(level)
    }

    /// Checked conversion from an arbitrary integer.
    pub fn from_int(value: i64) -> Option<Self> {
        u8::try_from(value).ok().map(QuantLevel)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    /// Signed dequantization onto `[-1, 1]`.
    pub fn signed(self) -> f64 {
        dequantize(self)
    }

    /// Unsigned dequantization onto `[0, 1]`.
    pub fn unit(self) -> f64 {
        f64::from(self.0) / 255.0
    }

    /// Angle in `[-pi, pi]`.
    pub fn angle(self) -> f64 {
        PI * dequantize(self)
    }
}

impl fmt::Display for QuantLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u8> for QuantLevel {
    fn from(v: u8) -> Self {
        QuantLevel(v)
    }
}

/// Quantizes a signed value, clamping to `[-1, 1]` first. NaN maps to level 0.
pub fn quantize(v: f64) -> QuantLevel {
    let v = v.clamp(-1.0, 1.0);
    // f64::round rounds half away from zero.
    let level = ((v + 1.0) / 2.0 * 255.0).round();
    QuantLevel(level as u8)
}

/// Inverse of [`quantize`]: `2q/255 - 1`.
pub fn dequantize(q: QuantLevel) -> f64 {
    2.0 * f64::from(q.0) / 255.0 - 1.0
}

/// Quantizes an unsigned value in `[0, 1]` (clamped).
pub fn quantize_unit(v: f64) -> QuantLevel {
    let v = v.clamp(0.0, 1.0);
    QuantLevel((v * 255.0).round() as u8)
}

/// Quantizes an angle in radians after wrapping it into `[-pi, pi]`.
pub fn quantize_angle(theta: f64) -> QuantLevel {
    quantize(wrap_angle(theta) / PI)
}

pub(crate) fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta % two_pi;
    if t > PI {
        t -= two_pi;
    } else if t < -PI {
        t += two_pi;
    }
    t
}
