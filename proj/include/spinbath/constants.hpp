#pragma once

// Unit conventions used throughout the library:
//   couplings, Hamiltonians, energies : Hz (linear frequency)
//   gyromagnetic ratios               : Hz per tesla
//   positions, distances              : angstrom
//   magnetic field                    : tesla
//   times                             : seconds
// Propagators carry an implicit 2*pi: U(t) = exp(-i 2*pi H t) for H in Hz.

namespace spinbath::constants {

inline constexpr double kPi = 3.14159265358979323846;

// CODATA 2018
inline constexpr double kMu0 = 1.25663706212e-6;  // T m / A
inline constexpr double kHbar = 1.054571817e-34;  // J s

// Gyromagnetic ratios in the linear-frequency convention. The electron value
// is a magnitude; its sign is folded into the -gamma_e B S_z form of the
// electron Zeeman term so that E_{-1} = +gamma_e B + J/4 lies highest.
inline constexpr double kGammaElectronHzPerT = 2.802495e10;
inline constexpr double kGammaProtonHzPerT = 4.25774785e7;

// Point-dipole coupling strength K in Hz for two moments with gyromagnetic
// ratios g1, g2 (Hz/T) separated by r angstrom:
//
//   K(r) = mu0 hbar g1 g2 / (2 r^3)
//
// Anchor values: electron-electron at 10 A gives 52.041 MHz, proton-proton
// at 1 A gives 120.12 kHz.
inline double dipole_coupling_hz(double g1_hz_per_t, double g2_hz_per_t,
                                 double r_angstrom) {
  const double r_m = r_angstrom * 1e-10;
  return kMu0 * kHbar * g1_hz_per_t * g2_hz_per_t / (2.0 * r_m * r_m * r_m);
}

}  // namespace spinbath::constants
