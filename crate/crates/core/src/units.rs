//! Physical constants in the crate's unit system (cm⁻¹, ps, fs).

/// Speed of light in cm/ps.
pub const C_CM_PER_PS: f64 = 0.029_979_245_8;

/// Speed of light in cm/fs.
pub const C_CM_PER_FS: f64 = 2.997_924_58e-5;

/// Second radiation constant hc/k in cm·K.
pub const HC_OVER_K: f64 = 1.438_776_9;

/// Intensity time-bandwidth product of a transform-limited Gaussian, 2 ln2 / π.
pub const GAUSSIAN_TBP: f64 = 2.0 * std::f64::consts::LN_2 / std::f64::consts::PI;

/// Angular frequency (rad/fs) per cm⁻¹ of wavenumber.
pub const RAD_PER_FS_PER_CM1: f64 = 2.0 * std::f64::consts::PI * C_CM_PER_FS;

/// Angular frequency (rad/ps) per cm⁻¹ of wavenumber.
pub const RAD_PER_PS_PER_CM1: f64 = 2.0 * std::f64::consts::PI * C_CM_PER_PS;

/// Ratio between the FWHM and the standard deviation of a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
