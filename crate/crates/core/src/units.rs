//! Unit conversions between the internal angular-frequency convention and
//! the MHz values used in files and reports.

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// `value` given as frequency/2π in MHz, returned in rad/μs.
#[inline]
pub fn mhz(value: f64) -> f64 {
    TWO_PI * value
}

/// Angular frequency in rad/μs to frequency/2π in MHz.
#[inline]
pub fn to_mhz(rad_per_us: f64) -> f64 {
    rad_per_us / TWO_PI
}
