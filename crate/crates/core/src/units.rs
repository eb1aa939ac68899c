//! Physical constants and frequency unit helpers.
//!
//! Every frequency inside the crate is an angular frequency in rad/s and
//! every time is in seconds. Human-facing values are usually quoted as
//! "2π × f" in kHz or MHz; the helpers below convert between the two.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Electron mass in atomic mass units.
pub const ELECTRON_MASS_AMU: f64 = 5.485_799_090_65e-4;
/// Neutral ¹⁷¹Yb atomic mass in atomic mass units.
pub const YB171_ATOMIC_MASS_AMU: f64 = 170.936_325_8;
/// Singly ionised ¹⁷¹Yb⁺ mass in atomic mass units.
pub const YB171_ION_MASS_AMU: f64 = YB171_ATOMIC_MASS_AMU - ELECTRON_MASS_AMU;

pub const TWO_PI: f64 = 2.0 * PI;

/// Angular frequency of `f` hertz.
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Angular frequency of `f` kilohertz, i.e. 2π × f kHz.
pub fn khz(f: f64) -> f64 {
    TWO_PI * 1e3 * f
}

/// Angular frequency of `f` megahertz, i.e. 2π × f MHz.
pub fn mhz(f: f64) -> f64 {
    TWO_PI * 1e6 * f
}

/// Inverse of [`khz`].
pub fn to_khz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e3)
}

/// Inverse of [`mhz`].
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TWO_PI * 1e6)
}

pub fn micrometers(x: f64) -> f64 {
    x * 1e-6
}

pub fn microseconds(t: f64) -> f64 {
    t * 1e-6
}

pub fn milliseconds(t: f64) -> f64 {
    t * 1e-3
}

/// How plain numbers in configuration files map to angular frequencies.
///
/// With `two_pi` set (the default) a configured `2.5` in a MHz field means
/// 2π × 2.5 MHz. Without it the number is taken as rad/s scaled by the
/// unit prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitConvention {
    #[serde(default = "default_true")]
    pub two_pi: bool,
}

fn default_true() -> bool {
    true
}

impl Default for UnitConvention {
    fn default() -> Self {
        UnitConvention { two_pi: true }
    }
}

impl UnitConvention {
    pub fn khz(&self, v: f64) -> f64 {
        if self.two_pi {
            khz(v)
        } else {
            v * 1e3
        }
    }

    pub fn mhz(&self, v: f64) -> f64 {
        if self.two_pi {
            mhz(v)
        } else {
            v * 1e6
        }
    }

    pub fn to_khz(&self, omega: f64) -> f64 {
        if self.two_pi {
            to_khz(omega)
        } else {
            omega / 1e3
        }
    }

    pub fn to_mhz(&self, omega: f64) -> f64 {
        if self.two_pi {
            to_mhz(omega)
        } else {
            omega / 1e6
        }
    }
}
