#include "spinbath/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "spinbath/errors.hpp"

namespace spinbath {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using Eigen::MatrixXcd;
using Eigen::Vector4cd;
using std::complex;

namespace {

constexpr complex<double> kI{0.0, 1.0};

// Spin-1/2 operators over the local basis {up, down}.
Matrix2cd spin_x() {
  Matrix2cd m;
  m << 0, 0.5, 0.5, 0;
  return m;
}
Matrix2cd spin_y() {
  Matrix2cd m;
  m << 0, -0.5 * kI, 0.5 * kI, 0;
  return m;
}
Matrix2cd spin_z() {
  Matrix2cd m;
  m << 0.5, 0, 0, -0.5;
  return m;
}

const std::array<Matrix2cd, 3>& spin_ops() {
  static const std::array<Matrix2cd, 3> ops = {spin_x(), spin_y(), spin_z()};
  return ops;
}

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b) {
  Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

// Electron-pair spin operators over {uu, ud, du, dd}.
Matrix4cd s1_op(int axis) { return kron2(spin_ops()[axis], Matrix2cd::Identity()); }
Matrix4cd s2_op(int axis) { return kron2(Matrix2cd::Identity(), spin_ops()[axis]); }

// Large-field reference states used for eigenlevel labeling, Level order.
Matrix4cd reference_states() {
  Matrix4cd ref = Matrix4cd::Zero();
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  ref.col(0) << 0, inv_sqrt2, -inv_sqrt2, 0;  // S
  ref.col(1) << 0, 0, 0, 1;                   // -1
  ref.col(2) << 0, inv_sqrt2, inv_sqrt2, 0;   // 0
  ref.col(3) << 1, 0, 0, 0;                   // +1
  return ref;
}

// Deterministic phase: rotate each column so its largest component is real
// and positive.
void fix_phases(Matrix4cd& states) {
  for (int c = 0; c < 4; ++c) {
    int imax = 0;
    states.col(c).cwiseAbs().maxCoeff(&imax);
    const complex<double> z = states(imax, c);
    if (std::abs(z) > 0) states.col(c) *= std::conj(z) / std::abs(z);
  }
}

// Place `bit` at position `pos` (0 = most significant) of a width-`k` index
// whose remaining k-1 bits are given by `rest` in order.
int insert_bit(int rest, int k, int pos, int bit) {
  const int low_width = k - 1 - pos;
  const int high = rest >> low_width;
  const int low = rest & ((1 << low_width) - 1);
  return (high << (low_width + 1)) | (bit << low_width) | low;
}

}  // namespace

double ElectronSystem::tilt_angle_rad() const {
  const Vec3 u = (positions_a[1] - positions_a[0]).normalized();
  return std::acos(std::min(1.0, std::abs(u.z())));
}

void ElectronSystem::validate() const {
  if (!(distance_a() > 0.0))
    throw DomainError("electron positions must be distinct");
  if (!(gamma_e_hz_per_t > 0.0))
    throw DomainError("electron gyromagnetic ratio must be positive");
  if (!(field_t >= 0.0)) throw DomainError("field magnitude must be >= 0");
}

ElectronSystem ElectronSystem::from_geometry(double distance_a,
                                             double tilt_rad) {
  ElectronSystem sys;
  const Vec3 axis{std::sin(tilt_rad), 0.0, std::cos(tilt_rad)};
  sys.positions_a = {Vec3(-0.5 * distance_a * axis),
                     Vec3(0.5 * distance_a * axis)};
  return sys;
}

DipolarTensor dipolar_tensor(const Vec3& r_a, double gamma1_hz_per_t,
                             double gamma2_hz_per_t) {
  const double r = r_a.norm();
  if (!(r > 0.0)) throw DomainError("dipolar tensor needs |r| > 0");
  const Vec3 u = r_a / r;
  const double k = constants::dipole_coupling_hz(gamma1_hz_per_t,
                                                 gamma2_hz_per_t, r);
  return -k * (3.0 * u * u.transpose() - Eigen::Matrix3d::Identity());
}

double pair_coupling_dnm_hz(const Vec3& r_a) {
  const double r = r_a.norm();
  if (!(r > 0.0)) throw DomainError("pair coupling needs |r| > 0");
  const double cos_theta = r_a.z() / r;
  const double k = constants::dipole_coupling_hz(
      constants::kGammaProtonHzPerT, constants::kGammaProtonHzPerT, r);
  return -0.25 * k * (1.0 - 3.0 * cos_theta * cos_theta);
}

DipolarTensor hyperfine_tensor(const ElectronSystem& sys, int electron,
                               const Vec3& site_a) {
  return dipolar_tensor(site_a - sys.positions_a[electron],
                        sys.gamma_e_hz_per_t, constants::kGammaProtonHzPerT);
}

Matrix4cd electron_hamiltonian(const ElectronSystem& sys) {
  sys.validate();
  Matrix4cd h = Matrix4cd::Zero();
  const double zeeman = -sys.gamma_e_hz_per_t * sys.field_t;
  h += zeeman * (s1_op(2) + s2_op(2));
  for (int a = 0; a < 3; ++a) h += sys.exchange_hz * s1_op(a) * s2_op(a);
  if (sys.include_ee_dipolar) {
    const DipolarTensor p = dipolar_tensor(
        sys.positions_a[1] - sys.positions_a[0], sys.gamma_e_hz_per_t,
        sys.gamma_e_hz_per_t);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (p(a, b) != 0.0) h += p(a, b) * s1_op(a) * s2_op(b);
  }
  return h;
}

EnergyBasis electron_eigenbasis(const ElectronSystem& sys) {
  const Matrix4cd h = electron_hamiltonian(sys);
  EnergyBasis basis;

  // Exchange-only, or dipolar with the electrons along the field: the
  // singlet/triplet set diagonalizes exactly, including at degeneracies.
  const bool closed_form =
      !sys.include_ee_dipolar || sys.tilt_angle_rad() < 1e-12;
  if (closed_form) {
    basis.states = reference_states();
    for (int l = 0; l < 4; ++l) {
      basis.energies_hz[l] =
          (basis.states.col(l).adjoint() * h * basis.states.col(l))(0).real();
    }
    return basis;
  }

  Eigen::SelfAdjointEigenSolver<Matrix4cd> solver(h);

  // Degenerate eigenvalues make the numeric eigenvectors an arbitrary basis
  // of the degenerate subspace; labels would be artifacts.
  const double span =
      solver.eigenvalues().maxCoeff() - solver.eigenvalues().minCoeff();
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      if (std::abs(solver.eigenvalues()[i] - solver.eigenvalues()[j]) <=
          1e-6 * std::max(span, 1.0))
        throw LabelingError(
            "eigenlevel labels are ambiguous: degenerate electron spectrum");

  const Matrix4cd ref = reference_states();
  const Eigen::Matrix4d overlap2 =
      (ref.adjoint() * solver.eigenvectors()).cwiseAbs2();

  // Best label-to-eigenvector assignment over all permutations.
  std::array<int, 4> perm = {0, 1, 2, 3};
  std::array<int, 4> best{};
  double best_score = -1.0, second_score = -1.0;
  std::sort(perm.begin(), perm.end());
  do {
    double score = 0.0;
    for (int l = 0; l < 4; ++l) score += overlap2(l, perm[l]);
    if (score > best_score) {
      second_score = best_score;
      best_score = score;
      best = perm;
    } else if (score > second_score) {
      second_score = score;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  double min_overlap = 1.0;
  for (int l = 0; l < 4; ++l)
    min_overlap = std::min(min_overlap, overlap2(l, best[l]));
  if (best_score - second_score < 1e-9 || min_overlap <= 0.5) {
    throw LabelingError(
        "eigenlevel labels are ambiguous (degenerate or strongly mixed "
        "spectrum); cannot assign S/-1/0/+1");
  }

  for (int l = 0; l < 4; ++l) {
    basis.states.col(l) = solver.eigenvectors().col(best[l]);
    basis.energies_hz[l] = solver.eigenvalues()[best[l]];
  }
  fix_phases(basis.states);
  return basis;
}

Matrix4cd pi_xx_pulse() {
  Matrix2cd sx2;
  sx2 << 0, 1, 1, 0;
  return -kron2(sx2, sx2);
}

MatrixXcd cluster_hamiltonian_in_basis(const ElectronSystem& sys,
                                       const BathConfiguration& bath,
                                       std::span<const int> cluster,
                                       const Matrix4cd& basis) {
  sys.validate();
  const int k = static_cast<int>(cluster.size());
  if (k > kMaxClusterSize)
    throw CapacityError("cluster exceeds the configured maximum size");
  for (int idx : cluster)
    if (idx < 0 || idx >= static_cast<int>(bath.sites.size()))
      throw DomainError("cluster refers to a site outside the bath");

  const int nb = 1 << k;
  const int dim = 4 * nb;
  MatrixXcd h = MatrixXcd::Zero(dim, dim);

  // Electron block on the bath identity.
  const Matrix4cd h_el = basis.adjoint() * electron_hamiltonian(sys) * basis;
  for (int e1 = 0; e1 < 4; ++e1)
    for (int e2 = 0; e2 < 4; ++e2) {
      if (h_el(e1, e2) == 0.0) continue;
      for (int b = 0; b < nb; ++b) h(e1 * nb + b, e2 * nb + b) += h_el(e1, e2);
    }

  // Nuclear Zeeman: bit 0 = up (m = +1/2), bit 1 = down (m = -1/2).
  const double gp = constants::kGammaProtonHzPerT;
  for (int b = 0; b < nb; ++b) {
    double zeeman = 0.0;
    for (int p = 0; p < k; ++p) {
      const int bit = (b >> (k - 1 - p)) & 1;
      zeeman += -gp * sys.field_t * (bit == 0 ? 0.5 : -0.5);
    }
    for (int e = 0; e < 4; ++e) h(e * nb + b, e * nb + b) += zeeman;
  }

  // Nuclear-nuclear dipolar couplings.
  const auto& ops = spin_ops();
  for (int p = 0; p < k; ++p)
    for (int q = p + 1; q < k; ++q) {
      const Vec3 r = bath.sites[cluster[q]].position_a -
                     bath.sites[cluster[p]].position_a;
      const DipolarTensor d = dipolar_tensor(r, gp, gp);
      Matrix4cd op = Matrix4cd::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (d(a, b) != 0.0) op += d(a, b) * kron2(ops[a], ops[b]);
      for (int s1 = 0; s1 < 4; ++s1)
        for (int s2 = 0; s2 < 4; ++s2) {
          if (op(s1, s2) == 0.0) continue;
          for (int rest = 0; rest < (1 << (k - 2)); ++rest) {
            const int b1 = insert_bit(insert_bit(rest, k - 1, q - 1, s1 & 1),
                                      k, p, s1 >> 1);
            const int b2 = insert_bit(insert_bit(rest, k - 1, q - 1, s2 & 1),
                                      k, p, s2 >> 1);
            for (int e = 0; e < 4; ++e)
              h(e * nb + b1, e * nb + b2) += op(s1, s2);
          }
        }
    }

  // Hyperfine: electron (x) single-site blocks.
  std::array<Matrix4cd, 3> s_rot;
  std::array<Matrix4cd, 3> s_rot2;
  for (int a = 0; a < 3; ++a) {
    s_rot[a] = basis.adjoint() * s1_op(a) * basis;
    s_rot2[a] = basis.adjoint() * s2_op(a) * basis;
  }
  for (int p = 0; p < k; ++p) {
    const Vec3 site = bath.sites[cluster[p]].position_a;
    const DipolarTensor a1 = hyperfine_tensor(sys, 0, site);
    const DipolarTensor a2 = hyperfine_tensor(sys, 1, site);
    Eigen::Matrix<complex<double>, 8, 8> block;
    block.setZero();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const Matrix4cd el = a1(a, b) * s_rot[a] + a2(a, b) * s_rot2[a];
        for (int e1 = 0; e1 < 4; ++e1)
          for (int e2 = 0; e2 < 4; ++e2) {
            if (el(e1, e2) == 0.0) continue;
            for (int s1 = 0; s1 < 2; ++s1)
              for (int s2 = 0; s2 < 2; ++s2)
                block(e1 * 2 + s1, e2 * 2 + s2) +=
                    el(e1, e2) * ops[b](s1, s2);
          }
      }
    for (int e1 = 0; e1 < 4; ++e1)
      for (int e2 = 0; e2 < 4; ++e2)
        for (int s1 = 0; s1 < 2; ++s1)
          for (int s2 = 0; s2 < 2; ++s2) {
            const complex<double> v = block(e1 * 2 + s1, e2 * 2 + s2);
            if (v == 0.0) continue;
            for (int rest = 0; rest < (1 << (k - 1)); ++rest) {
              const int b1 = insert_bit(rest, k, p, s1);
              const int b2 = insert_bit(rest, k, p, s2);
              h(e1 * nb + b1, e2 * nb + b2) += v;
            }
          }
  }
  return h;
}

MatrixXcd cluster_hamiltonian(const ElectronSystem& sys,
                              const BathConfiguration& bath,
                              std::span<const int> cluster) {
  return cluster_hamiltonian_in_basis(sys, bath, cluster,
                                      Matrix4cd::Identity());
}

std::array<MatrixXcd, 4> projected_nuclear_hamiltonians(
    const ElectronSystem& sys, const BathConfiguration& bath,
    std::span<const int> cluster) {
  sys.validate();
  if (sys.include_ee_dipolar)
    throw UnsupportedRegimeError(
        "secular projected Hamiltonians are derived for the exchange-only "
        "model");
  const int k = static_cast<int>(cluster.size());
  if (k > kMaxClusterSize)
    throw CapacityError("cluster exceeds the configured maximum size");

  const int nb = 1 << k;
  const double gp = constants::kGammaProtonHzPerT;
  std::array<MatrixXcd, 4> h;
  for (auto& m : h) m = MatrixXcd::Zero(nb, nb);

  // Spacing-independent part: nuclear Zeeman plus flip-flop d_nm I+I- and
  // Ising -2 d_nm Iz Iz per ordered pair.
  MatrixXcd common = MatrixXcd::Zero(nb, nb);
  std::vector<double> mz(k);
  for (int b = 0; b < nb; ++b) {
    double zeeman = 0.0;
    for (int p = 0; p < k; ++p) {
      const int bit = (b >> (k - 1 - p)) & 1;
      mz[p] = bit == 0 ? 0.5 : -0.5;
      zeeman += -gp * sys.field_t * mz[p];
    }
    double ising = 0.0;
    for (int p = 0; p < k; ++p)
      for (int q = 0; q < k; ++q) {
        if (p == q) continue;
        const Vec3 r = bath.sites[cluster[q]].position_a -
                       bath.sites[cluster[p]].position_a;
        ising += -2.0 * pair_coupling_dnm_hz(r) * mz[p] * mz[q];
      }
    common(b, b) += zeeman + ising;
    // flip-flop: I_p^+ I_q^- moves (p down, q up) -> (p up, q down)
    for (int p = 0; p < k; ++p)
      for (int q = 0; q < k; ++q) {
        if (p == q) continue;
        const int bp = (b >> (k - 1 - p)) & 1;
        const int bq = (b >> (k - 1 - q)) & 1;
        if (bp != 1 || bq != 0) continue;
        const int b2 = b ^ (1 << (k - 1 - p)) ^ (1 << (k - 1 - q));
        const Vec3 r = bath.sites[cluster[q]].position_a -
                       bath.sites[cluster[p]].position_a;
        common(b2, b) += pair_coupling_dnm_hz(r);
      }
  }

  // Level-dependent secular hyperfine shift: -+ (1/2) sum_n (A1nzz+A2nzz) Inz
  // for levels -1 / +1; none for S and 0.
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(nb);
  for (int b = 0; b < nb; ++b) {
    double acc = 0.0;
    for (int p = 0; p < k; ++p) {
      const Vec3 site = bath.sites[cluster[p]].position_a;
      const double azz = hyperfine_tensor(sys, 0, site)(2, 2) +
                         hyperfine_tensor(sys, 1, site)(2, 2);
      const int bit = (b >> (k - 1 - p)) & 1;
      acc += azz * (bit == 0 ? 0.5 : -0.5);
    }
    shift[b] = acc;
  }

  for (int l = 0; l < 4; ++l) h[l] = common;
  h[static_cast<int>(Level::M1)] -=
      0.5 * shift.asDiagonal().toDenseMatrix().cast<complex<double>>();
  h[static_cast<int>(Level::P1)] +=
      0.5 * shift.asDiagonal().toDenseMatrix().cast<complex<double>>();
  return h;
}

DephasingGuard pure_dephasing_guard(const ElectronSystem& sys,
                                    const BathConfiguration& bath) {
  DephasingGuard guard;
  const EnergyBasis basis = electron_eigenbasis(sys);
  guard.min_gap_hz = std::numeric_limits<double>::infinity();
  for (const auto& [la, lb] : kLevelPairs) {
    const double gap = std::abs(constants::kGammaProtonHzPerT * sys.field_t -
                                std::abs(basis.energy(la) - basis.energy(lb)));
    guard.min_gap_hz = std::min(guard.min_gap_hz, gap);
  }
  for (const auto& site : bath.sites) {
    const double r = std::min((site.position_a - sys.positions_a[0]).norm(),
                              (site.position_a - sys.positions_a[1]).norm());
    guard.max_hyperfine_hz =
        std::max(guard.max_hyperfine_hz,
                 constants::dipole_coupling_hz(
                     sys.gamma_e_hz_per_t, constants::kGammaProtonHzPerT, r));
  }
  guard.ok = guard.max_hyperfine_hz <= 0.1 * guard.min_gap_hz;
  return guard;
}

}  // namespace spinbath
