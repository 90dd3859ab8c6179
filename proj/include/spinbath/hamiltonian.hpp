#pragma once

#include <array>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "spinbath/bath.hpp"
#include "spinbath/constants.hpp"

namespace spinbath {

// Electron eigenlevels of the exchange-coupled pair: singlet and the three
// triplets labeled by their large-field magnetization. With the
// electron-electron dipolar coupling enabled the triplet labels acquire the
// usual tilde meaning (approximate magnetization labels).
enum class Level : int { S = 0, M1 = 1, Zero = 2, P1 = 3 };

// The six unordered level pairs tracked by every coherence series, in the
// fixed output order used by all CSV schemas.
inline constexpr std::array<std::pair<Level, Level>, 6> kLevelPairs = {{
    {Level::M1, Level::Zero},
    {Level::P1, Level::Zero},
    {Level::M1, Level::S},
    {Level::P1, Level::S},
    {Level::M1, Level::P1},
    {Level::S, Level::Zero},
}};

inline constexpr std::array<const char*, 6> kPairNames = {
    "L_m1_0", "L_1_0", "L_m1_S", "L_1_S", "L_m1_1", "L_S_0"};

/// Two exchange-coupled electrons in a field along +z. Relative orientation
/// of the inter-electron vector and the field is realized by placing the
/// electrons in the xz plane; the field direction never moves.
struct ElectronSystem {
  std::array<Vec3, 2> positions_a{Vec3(0, 0, -2.5), Vec3(0, 0, 2.5)};
  double exchange_hz = 1e10;  // isotropic J
  double field_t = 1.0;
  double gamma_e_hz_per_t = constants::kGammaElectronHzPerT;
  bool include_ee_dipolar = false;

  double distance_a() const {
    return (positions_a[0] - positions_a[1]).norm();
  }
  // Angle between the inter-electron vector and the field axis.
  double tilt_angle_rad() const;
  void validate() const;

  // Electrons at +-(d/2)(sin phi, 0, cos phi) around the origin.
  static ElectronSystem from_geometry(double distance_a, double tilt_rad);
};

/// Labeled eigenbasis of the electron Hamiltonian over the product basis
/// {uu, ud, du, dd}; column l holds |E_l> in Level order (S, -1, 0, +1).
struct EnergyBasis {
  Eigen::Matrix4cd states;
  Eigen::Vector4d energies_hz;

  const Eigen::Vector4cd state(Level l) const {
    return states.col(static_cast<int>(l));
  }
  double energy(Level l) const { return energies_hz[static_cast<int>(l)]; }
};

using DipolarTensor = Eigen::Matrix3d;

// Point-dipole tensor -K(r) [3 rhat rhat - I] in Hz; traceless symmetric.
DipolarTensor dipolar_tensor(const Vec3& r_a, double gamma1_hz_per_t,
                             double gamma2_hz_per_t);

// Secular proton-proton coupling d_nm for a field along z. Equals
// -(1/4) of the zz component of the proton-proton dipolar tensor.
double pair_coupling_dnm_hz(const Vec3& r_a);

// Hyperfine tensor between electron j of `sys` and a site position.
DipolarTensor hyperfine_tensor(const ElectronSystem& sys, int electron,
                               const Vec3& site_a);

Eigen::Matrix4cd electron_hamiltonian(const ElectronSystem& sys);

// Diagonalizes the electron Hamiltonian and assigns S/-1/0/+1 labels by
// overlap with the large-field limit states. Throws LabelingError when the
// assignment is ambiguous (degenerate labels).
EnergyBasis electron_eigenbasis(const ElectronSystem& sys);

inline constexpr int kMaxClusterSize = 6;

// Full Hamiltonian of the electrons plus the chosen bath sites, dimension
// 4 * 2^k over (electron product basis) x (site basis in cluster order).
Eigen::MatrixXcd cluster_hamiltonian(const ElectronSystem& sys,
                                     const BathConfiguration& bath,
                                     std::span<const int> cluster);

// Same operator with the electron factor expressed in `basis` columns.
Eigen::MatrixXcd cluster_hamiltonian_in_basis(const ElectronSystem& sys,
                                              const BathConfiguration& bath,
                                              std::span<const int> cluster,
                                              const Eigen::Matrix4cd& basis);

// Level-conditioned secular nuclear Hamiltonians {H_B;S, H_B;-1, H_B;0,
// H_B;+1} over the 2^k cluster space: nuclear Zeeman, flip-flop d_nm and
// Ising -2 d_nm per ordered pair, and the level-dependent secular hyperfine
// shift. Valid for the exchange-only model; throws UnsupportedRegimeError
// when the electron-electron dipolar coupling is enabled.
std::array<Eigen::MatrixXcd, 4> projected_nuclear_hamiltonians(
    const ElectronSystem& sys, const BathConfiguration& bath,
    std::span<const int> cluster);

// Ideal simultaneous pi rotation of both electrons about x:
// exp[-i pi (S_1x + S_2x)] = -sigma_x (x) sigma_x.
Eigen::Matrix4cd pi_xx_pulse();

/// Pure-dephasing check: largest hyperfine coupling against the smallest
/// level-pair gap |gamma_p B - |E_a - E_b||. A ratio above 0.1 indicates the
/// secular analytics are outside their regime; callers warn, never fail.
struct DephasingGuard {
  double max_hyperfine_hz = 0.0;
  double min_gap_hz = 0.0;
  bool ok = true;
};
DephasingGuard pure_dephasing_guard(const ElectronSystem& sys,
                                    const BathConfiguration& bath);

}  // namespace spinbath
