#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spinbath/bath.hpp"
#include "spinbath/coherence.hpp"
#include "spinbath/hamiltonian.hpp"

namespace spinbath {

/// Frozen product state of the bath: j_n = +1/2 (up) or -1/2 (down) per site.
struct NuclearProductState {
  std::vector<std::int8_t> updown;  // +1 up, -1 down

  double j(int site) const { return 0.5 * updown[site]; }
  int count_up() const;
};

// Balanced random up/down assignment, deterministic in the seed.
NuclearProductState sample_initial_state(const BathConfiguration& bath,
                                         std::uint64_t seed);

/// One candidate pair flip-flop |down_n up_m> -> |up_n down_m>, mapped to a
/// pseudospin precessing under level-dependent effective fields
/// chi_alpha = (2C, 0, D + E_alpha).
struct PseudospinExcitation {
  int n = 0;  // down site
  int m = 0;  // up site
  double coupling_c_hz = 0.0;  // C = d_nm, level independent
  double detuning_d_hz = 0.0;  // D, level independent
  double contrast_e_hz = 0.0;  // E_{-1}; E_{+1} = -E, E_S = E_0 = 0

  double contrast(Level l) const {
    if (l == Level::M1) return contrast_e_hz;
    if (l == Level::P1) return -contrast_e_hz;
    return 0.0;
  }
  Vec3 chi(Level l) const {
    return {2.0 * coupling_c_hz, 0.0, detuning_d_hz + contrast(l)};
  }
};

// Enumerates all (down n, up m) excitations with |d_nm| above the floor.
// Exchange-only, large-field construction.
std::vector<PseudospinExcitation> pseudospin_fields(
    const ElectronSystem& sys, const BathConfiguration& bath,
    const NuclearProductState& state, double min_coupling_hz = 1.0);

// Hahn-echo coherences as products of per-excitation pseudospin overlaps.
// `times_s` is the total sequence time t = 2 tau. L_S_0 is identically 1.
CoherenceSeries pca_hahn_coherences(const ElectronSystem& sys,
                                    const BathConfiguration& bath,
                                    const NuclearProductState& state,
                                    std::span<const double> times_s,
                                    double min_coupling_hz = 1.0);

// Decoherence measures of a single pair flip-flop at segment time tau:
// f_k for the (-1,0)-type coherences, g_k for (-1,+1). Both vanish when
// either the coupling C or the hyperfine contrast E vanishes.
double pair_decoherence_fk(double c_hz, double e_hz, double d_hz,
                           double tau_s);
double pair_decoherence_gk(double c_hz, double e_hz, double d_hz,
                           double tau_s);

// Inhomogeneous-dephasing width sigma^2 = sum_n (A1nzz+A2nzz)^2 / 4 and
// T2* = sqrt(2) / (2 pi sigma). Empty bath gives sigma = 0 and T2* = inf.
struct FidTheory {
  double sigma_hz = 0.0;
  double t2_star_s = 0.0;
};
FidTheory fid_sigma_t2star(const ElectronSystem& sys,
                           const BathConfiguration& bath);

// Gaussian free-induction profiles: L_m1_1 = exp[-(t/T2*)^2], the four
// single-quantum pairs decay at half that rate, L_S_0 is 1.
CoherenceSeries fid_analytic_series(const ElectronSystem& sys,
                                    const BathConfiguration& bath,
                                    std::span<const double> times_s);

// Secular hyperfine sum A1zz + A2zz as a function of position, and its
// gradient (analytic).
double hyperfine_zz_sum(const ElectronSystem& sys, const Vec3& at_a);
Vec3 hyperfine_zz_sum_gradient(const ElectronSystem& sys, const Vec3& at_a);

/// |A1zz+A2zz| and its in-plane gradient sampled over the xz plane. Points
/// within the exclusion radius of either electron are dropped.
struct FieldMapGrid {
  double spacing_a = 0.5;
  std::vector<double> x_a;
  std::vector<double> z_a;
  std::vector<double> abs_sum_hz;
  std::vector<Eigen::Vector2d> grad_hz_per_a;  // (d/dx, d/dz) of the sum
};
FieldMapGrid field_maps(const ElectronSystem& sys, double extent_a,
                        double spacing_a, double exclusion_radius_a);

struct PairRecord {
  int n = 0, m = 0;
  double r_a = 0.0;
  double theta_deg = 0.0;
  double c_hz = 0.0, e_hz = 0.0, d_hz = 0.0;
  double measure = 0.0;  // f_k or g_k
  Vec3 center_a = Vec3::Zero();
};

struct PairStatistics {
  std::vector<PairRecord> contributing;  // measure > threshold
  std::vector<int> histogram;            // theta_nm counts over [0, 180)
  double bin_width_deg = 5.0;
};

// Pairs whose f_k (or g_k) at segment time tau exceeds the threshold, plus
// the orientation histogram of their joining vectors.
PairStatistics pair_statistics(const ElectronSystem& sys,
                               const BathConfiguration& bath,
                               const NuclearProductState& state, double tau_s,
                               double threshold, bool use_gk = false,
                               int bins = 36, double min_coupling_hz = 1.0);

}  // namespace spinbath
