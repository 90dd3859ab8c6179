#include "spinbath/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include "spinbath/errors.hpp"
#include "spinbath/rng.hpp"

namespace spinbath {

using std::complex;

namespace {

// SU(2) matrix [[a, b], [-conj(b), conj(a)]].
struct Su2 {
  complex<double> a{1.0, 0.0};
  complex<double> b{0.0, 0.0};

  Su2 operator*(const Su2& o) const {
    return {a * o.a - b * std::conj(o.b), a * o.b + b * std::conj(o.a)};
  }
  Su2 adjoint() const { return {std::conj(a), -b}; }
  // <down| U |down> = conj(a)
  complex<double> down_down() const { return std::conj(a); }
};

// exp(-i 2 pi (chi . sigma / 2) s) for chi = (cx, 0, cz) in Hz, s in seconds.
Su2 rotation(double cx, double cz, double s) {
  const double mag = std::hypot(cx, cz);
  const double theta = constants::kPi * mag * s;
  if (mag == 0.0) return {};
  const double c = std::cos(theta);
  const double sn = std::sin(theta) / mag;
  return {complex<double>(c, -sn * cz), complex<double>(0.0, -sn * cx)};
}

struct PairOverlaps {
  double m1_0, p1_0, m1_s, p1_s, m1_p1;
};

// Per-excitation overlap moduli of the five decaying coherences at segment
// time tau. chi_S = chi_0, so the S pairs duplicate the 0 pairs.
PairOverlaps excitation_overlaps(const PseudospinExcitation& k, double tau) {
  const Vec3 chi0 = k.chi(Level::Zero);
  const Vec3 chim = k.chi(Level::M1);
  const Vec3 chip = k.chi(Level::P1);
  const Su2 u0 = rotation(chi0.x(), chi0.z(), 2.0 * tau);
  const Su2 um = rotation(chim.x(), chim.z(), tau);
  const Su2 up = rotation(chip.x(), chip.z(), tau);

  const Su2 fwd_m1 = um * up;  // branch ending in -1: tau under +1, then -1
  const Su2 fwd_p1 = up * um;

  PairOverlaps o;
  o.m1_0 = std::abs((u0.adjoint() * fwd_m1).down_down());
  o.p1_0 = std::abs((fwd_p1.adjoint() * u0).down_down());
  o.m1_s = o.m1_0;
  o.p1_s = o.p1_0;
  o.m1_p1 = std::abs((fwd_p1.adjoint() * fwd_m1).down_down());
  return o;
}

double azz_scalar(const ElectronSystem& sys, int electron, const Vec3& at) {
  const Vec3 v = at - sys.positions_a[electron];
  const double r = v.norm();
  const double k = constants::dipole_coupling_hz(
      sys.gamma_e_hz_per_t, constants::kGammaProtonHzPerT, r);
  const double cz = v.z() / r;
  return -k * (3.0 * cz * cz - 1.0);
}

Vec3 azz_gradient(const ElectronSystem& sys, int electron, const Vec3& at) {
  const Vec3 v = at - sys.positions_a[electron];
  const double r = v.norm();
  const double kappa = constants::dipole_coupling_hz(
                           sys.gamma_e_hz_per_t, constants::kGammaProtonHzPerT,
                           1.0);  // K(1 A), scales as r^-3
  // A_zz = -kappa (3 v_z^2 - v^2) / v^5 with v in angstrom
  const double r5 = std::pow(r, 5);
  const double r7 = r5 * r * r;
  const Vec3 zhat{0.0, 0.0, 1.0};
  const Vec3 grad = 6.0 * v.z() / r5 * zhat -
                    15.0 * v.z() * v.z() / r7 * v + 3.0 / r5 * v;
  return -kappa * grad;
}

}  // namespace

int NuclearProductState::count_up() const {
  int up = 0;
  for (const auto s : updown) up += s > 0;
  return up;
}

NuclearProductState sample_initial_state(const BathConfiguration& bath,
                                         std::uint64_t seed) {
  const std::size_t n = bath.sites.size();
  if (n == 0) throw DomainError("cannot sample a state for an empty bath");
  NuclearProductState state;
  state.updown.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    state.updown[i] = i < (n + 1) / 2 ? 1 : -1;
  Rng rng(derive_seed(seed, 0x9a7e5717u));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.index(i + 1);
    std::swap(state.updown[i], state.updown[j]);
  }
  return state;
}

std::vector<PseudospinExcitation> pseudospin_fields(
    const ElectronSystem& sys, const BathConfiguration& bath,
    const NuclearProductState& state, double min_coupling_hz) {
  sys.validate();
  if (sys.include_ee_dipolar)
    throw UnsupportedRegimeError(
        "pseudospin construction is derived for the exchange-only model");
  const int n = static_cast<int>(bath.sites.size());
  if (state.updown.size() != bath.sites.size())
    throw DomainError("product state does not match the bath");

  // d_nm rows and their j-weighted sums S_n = sum_l d_nl j_l
  std::vector<double> azz(n), row_sum(n, 0.0);
  for (int i = 0; i < n; ++i)
    azz[i] = hyperfine_zz_sum(sys, bath.sites[i].position_a);
  std::vector<std::vector<double>> dnm(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = pair_coupling_dnm_hz(bath.sites[j].position_a -
                                            bath.sites[i].position_a);
      dnm[i][j] = d;
      dnm[j][i] = d;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) row_sum[i] += dnm[i][j] * state.j(j);

  std::vector<PseudospinExcitation> out;
  for (int dn = 0; dn < n; ++dn) {
    if (state.updown[dn] > 0) continue;  // n runs over down sites
    for (int um = 0; um < n; ++um) {
      if (state.updown[um] < 0) continue;  // m runs over up sites
      const double c = dnm[dn][um];
      if (std::abs(c) < min_coupling_hz) continue;
      PseudospinExcitation k;
      k.n = dn;
      k.m = um;
      k.coupling_c_hz = c;
      // D = -4 sum_{m' != n,m} (d_nm' - d_mm') j_m'
      //   = -4 [S_n - S_m - d_nm (j_m - j_n)],  j_m - j_n = 1 here
      k.detuning_d_hz = -4.0 * (row_sum[dn] - row_sum[um] - c);
      k.contrast_e_hz = -0.5 * (azz[dn] - azz[um]);
      out.push_back(k);
    }
  }
  return out;
}

CoherenceSeries pca_hahn_coherences(const ElectronSystem& sys,
                                    const BathConfiguration& bath,
                                    const NuclearProductState& state,
                                    std::span<const double> times_s,
                                    double min_coupling_hz) {
  const auto excitations =
      pseudospin_fields(sys, bath, state, min_coupling_hz);

  CoherenceSeries series;
  series.times_s.assign(times_s.begin(), times_s.end());
  for (auto& v : series.modulus) v.assign(times_s.size(), 1.0);
  for (auto& v : series.flagged) v.assign(times_s.size(), 0);

  for (std::size_t it = 0; it < times_s.size(); ++it) {
    const double tau = times_s[it] / 2.0;
    double prod[5] = {1.0, 1.0, 1.0, 1.0, 1.0};
    for (const auto& k : excitations) {
      const PairOverlaps o = excitation_overlaps(k, tau);
      prod[0] *= o.m1_0;
      prod[1] *= o.p1_0;
      prod[2] *= o.m1_s;
      prod[3] *= o.p1_s;
      prod[4] *= o.m1_p1;
    }
    for (int p = 0; p < 5; ++p) series.modulus[p][it] = prod[p];
    // L_S_0 stays exactly 1: chi_S = chi_0
  }
  return series;
}

double pair_decoherence_fk(double c_hz, double e_hz, double d_hz,
                           double tau_s) {
  if (!(tau_s > 0.0)) throw DomainError("tau must be positive");
  PseudospinExcitation k;
  k.coupling_c_hz = c_hz;
  k.contrast_e_hz = e_hz;
  k.detuning_d_hz = d_hz;
  const double f = 1.0 - excitation_overlaps(k, tau_s).m1_0;
  return std::max(f, 0.0);
}

double pair_decoherence_gk(double c_hz, double e_hz, double d_hz,
                           double tau_s) {
  if (!(tau_s > 0.0)) throw DomainError("tau must be positive");
  PseudospinExcitation k;
  k.coupling_c_hz = c_hz;
  k.contrast_e_hz = e_hz;
  k.detuning_d_hz = d_hz;
  const double g = 1.0 - excitation_overlaps(k, tau_s).m1_p1;
  return std::max(g, 0.0);
}

double hyperfine_zz_sum(const ElectronSystem& sys, const Vec3& at_a) {
  return azz_scalar(sys, 0, at_a) + azz_scalar(sys, 1, at_a);
}

Vec3 hyperfine_zz_sum_gradient(const ElectronSystem& sys, const Vec3& at_a) {
  return azz_gradient(sys, 0, at_a) + azz_gradient(sys, 1, at_a);
}

FidTheory fid_sigma_t2star(const ElectronSystem& sys,
                           const BathConfiguration& bath) {
  sys.validate();
  if (sys.include_ee_dipolar)
    throw UnsupportedRegimeError(
        "inhomogeneous-dephasing theory is derived for the exchange-only "
        "model");
  double var = 0.0;
  for (const auto& site : bath.sites) {
    const double azz = hyperfine_zz_sum(sys, site.position_a);
    var += 0.25 * azz * azz;
  }
  FidTheory theory;
  theory.sigma_hz = std::sqrt(var);
  theory.t2_star_s =
      theory.sigma_hz > 0.0
          ? std::sqrt(2.0) / (2.0 * constants::kPi * theory.sigma_hz)
          : std::numeric_limits<double>::infinity();
  return theory;
}

CoherenceSeries fid_analytic_series(const ElectronSystem& sys,
                                    const BathConfiguration& bath,
                                    std::span<const double> times_s) {
  const FidTheory theory = fid_sigma_t2star(sys, bath);
  CoherenceSeries series;
  series.times_s.assign(times_s.begin(), times_s.end());
  for (auto& v : series.modulus) v.assign(times_s.size(), 1.0);
  for (auto& v : series.flagged) v.assign(times_s.size(), 0);
  for (std::size_t it = 0; it < times_s.size(); ++it) {
    const double x = times_s[it] / theory.t2_star_s;
    const double fast = std::exp(-x * x);          // L_m1_1
    const double slow = std::exp(-0.25 * x * x);   // T2* doubled
    series.modulus[0][it] = slow;
    series.modulus[1][it] = slow;
    series.modulus[2][it] = slow;
    series.modulus[3][it] = slow;
    series.modulus[4][it] = fast;
    // L_S_0 stays 1
  }
  return series;
}

FieldMapGrid field_maps(const ElectronSystem& sys, double extent_a,
                        double spacing_a, double exclusion_radius_a) {
  sys.validate();
  if (!(spacing_a > 0.0)) throw DomainError("grid spacing must be positive");
  FieldMapGrid grid;
  grid.spacing_a = spacing_a;
  const int half = static_cast<int>(std::floor(extent_a / spacing_a));
  for (int iz = -half; iz <= half; ++iz)
    for (int ix = -half; ix <= half; ++ix) {
      const Vec3 at{ix * spacing_a, 0.0, iz * spacing_a};
      if ((at - sys.positions_a[0]).norm() < exclusion_radius_a ||
          (at - sys.positions_a[1]).norm() < exclusion_radius_a)
        continue;
      grid.x_a.push_back(at.x());
      grid.z_a.push_back(at.z());
      grid.abs_sum_hz.push_back(std::abs(hyperfine_zz_sum(sys, at)));
      const Vec3 g = hyperfine_zz_sum_gradient(sys, at);
      grid.grad_hz_per_a.emplace_back(g.x(), g.z());
    }
  return grid;
}

PairStatistics pair_statistics(const ElectronSystem& sys,
                               const BathConfiguration& bath,
                               const NuclearProductState& state, double tau_s,
                               double threshold, bool use_gk, int bins,
                               double min_coupling_hz) {
  if (!(tau_s > 0.0)) throw DomainError("tau must be positive");
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  const auto excitations =
      pseudospin_fields(sys, bath, state, min_coupling_hz);

  PairStatistics stats;
  stats.histogram.assign(bins, 0);
  stats.bin_width_deg = 180.0 / bins;
  for (const auto& k : excitations) {
    const PairOverlaps o = excitation_overlaps(k, tau_s);
    const double measure = 1.0 - (use_gk ? o.m1_p1 : o.m1_0);
    if (measure <= threshold) continue;

    const Vec3 r = bath.sites[k.m].position_a - bath.sites[k.n].position_a;
    PairRecord rec;
    rec.n = k.n;
    rec.m = k.m;
    rec.r_a = r.norm();
    rec.theta_deg = std::acos(std::clamp(r.z() / rec.r_a, -1.0, 1.0)) *
                    180.0 / constants::kPi;
    rec.c_hz = k.coupling_c_hz;
    rec.e_hz = k.contrast_e_hz;
    rec.d_hz = k.detuning_d_hz;
    rec.measure = measure;
    rec.center_a =
        0.5 * (bath.sites[k.m].position_a + bath.sites[k.n].position_a);
    stats.contributing.push_back(rec);
    const int bin = std::min(bins - 1, static_cast<int>(rec.theta_deg /
                                                        stats.bin_width_deg));
    stats.histogram[bin] += 1;
  }
  return stats;
}

}  // namespace spinbath
