//! Physical constants and unit conversions, cgs.

/// Speed of light, cm s^-1.
pub const C_CGS: f64 = 2.997_924_58e10;
/// Newtonian gravitational constant, cm^3 g^-1 s^-2.
pub const G_CGS: f64 = 6.674e-8;
/// Megaparsec, cm.
pub const MPC_CM: f64 = 3.086e24;
/// Kilometre, cm.
pub const KM_CM: f64 = 1.0e5;
/// Solar mass, g.
pub const M_SUN_G: f64 = 1.989e33;
/// Gigayear (Julian), s.
pub const GYR_S: f64 = 3.155_76e16;
