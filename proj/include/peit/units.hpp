#pragma once

#include <cmath>

// Unit conventions used throughout:
//   angular frequencies, detunings, Rabi frequencies, rates  ->  rad/us
//   time                                                     ->  us
//   wavevectors                                              ->  rad/um
// Config files and CSV output use MHz (ordinary frequency) and us; the
// conversion happens exactly once, at the I/O boundary.

namespace peit {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double mhz_to_rad_us(double f_mhz) { return two_pi * f_mhz; }
inline constexpr double rad_us_to_mhz(double w) { return w / two_pi; }

// SI constants, needed only where absolute length scales enter
// (Lamb-Dicke factors, equilibrium spacings).  CODATA 2018.
inline constexpr double hbar_si = 1.054571817e-34;        // J s
inline constexpr double amu_si = 1.66053906660e-27;       // kg
inline constexpr double elem_charge_si = 1.602176634e-19; // C
inline constexpr double eps0_si = 8.8541878128e-12;       // F/m

// 40Ca+ (atomic mass; the missing electron is well below our precision)
inline constexpr double ca40_mass_si = 39.9625908 * amu_si;

// S1/2 -> D5/2 quadrupole transition driven at 729 nm
inline constexpr double ca40_wavelength_nm = 729.147;

// Wavevector magnitude in rad/um for a wavelength in nm.
inline constexpr double wavevector_rad_um(double wavelength_nm) {
  return two_pi * 1.0e3 / wavelength_nm;
}

// Ground-state width sqrt(hbar / 2 M w) in um, for w in rad/us.
inline double ground_state_width_um(double mass_kg, double w_rad_us) {
  return std::sqrt(hbar_si / (2.0 * mass_kg * w_rad_us * 1.0e6)) * 1.0e6;
}

// Lamb-Dicke factor of a single ion: projected wavevector times the
// ground-state width of the mode.
inline double lamb_dicke_single(double k_proj_rad_um, double mass_kg,
                                double w_rad_us) {
  return k_proj_rad_um * ground_state_width_um(mass_kg, w_rad_us);
}

} // namespace peit
