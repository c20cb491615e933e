//! Physical constants and the single field-to-energy conversion.

/// Bohr magneton, J/T (CODATA 2018).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;

/// Boltzmann constant, J/K (exact, SI 2019).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Vacuum permeability, N/A² (CODATA 2018).
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;

/// `mu_B / k_B` in K/T: energy in kelvin of one Bohr magneton in one tesla.
pub const MU_B_OVER_K_B: f64 = BOHR_MAGNETON / BOLTZMANN;

pub const MILLITESLA: f64 = 1e-3;

#[inline]
pub fn mt_to_tesla(b_mt: f64) -> f64 {
    b_mt * MILLITESLA
}

#[inline]
pub fn tesla_to_mt(b: f64) -> f64 {
    b / MILLITESLA
}
