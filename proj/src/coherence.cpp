#include "spinbath/coherence.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>

#include "spinbath/errors.hpp"
#include "spinbath/parallel.hpp"

namespace spinbath {

using Eigen::Matrix4cd;
using Eigen::MatrixXcd;
using Eigen::Vector4cd;
using Eigen::VectorXd;
using std::complex;

namespace {

constexpr double kTildeFloor = 1e-6;
constexpr int kCombineChunk = 256;

Vector4cd default_initial_state() {
  return Vector4cd::Constant(complex<double>(0.5, 0.0));
}

void check_normalizations(const Vector4cd& psi) {
  for (std::size_t p = 0; p < kLevelPairs.size(); ++p) {
    const auto [la, lb] = kLevelPairs[p];
    const complex<double> denom = psi[static_cast<int>(la)] *
                                  std::conj(psi[static_cast<int>(lb)]);
    if (std::abs(denom) < 1e-12)
      throw NormalizationError(
          std::string("initial electron state gives zero normalization for ") +
          kPairNames[p]);
  }
}

// Evolves the electrons plus one cluster with a single eigendecomposition.
// Works in the (electron eigenbasis) x (cluster product basis)
// representation, so level indices address rows directly.
class ClusterEvolver {
 public:
  ClusterEvolver(const ElectronSystem& sys, const BathConfiguration& bath,
                 std::span<const int> cluster, const EnergyBasis& basis,
                 const Vector4cd& psi, bool need_pulse)
      : nb_(1 << cluster.size()), dim_(4 * nb_), psi_norm_(psi) {
    const MatrixXcd h =
        cluster_hamiltonian_in_basis(sys, bath, cluster, basis.states);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> solver(h);
    evals_ = solver.eigenvalues();
    evecs_ = solver.eigenvectors();

    // G = V^adj (psi (x) I); column j of (psi (x) I) is psi_a at rows (a, j).
    g_.resize(dim_, nb_);
    for (int j = 0; j < nb_; ++j)
      for (int p = 0; p < dim_; ++p) {
        complex<double> acc = 0.0;
        for (int a = 0; a < 4; ++a)
          acc += std::conj(evecs_(a * nb_ + j, p)) * psi[a];
        g_(p, j) = acc;
      }

    if (need_pulse) {
      const Matrix4cd p_eig =
          basis.states.adjoint() * pi_xx_pulse() * basis.states;
      MatrixXcd pulse = MatrixXcd::Zero(dim_, dim_);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          if (p_eig(a, b) == 0.0) continue;
          for (int j = 0; j < nb_; ++j)
            pulse(a * nb_ + j, b * nb_ + j) = p_eig(a, b);
        }
      q_.noalias() = evecs_.adjoint() * pulse * evecs_;
      // The pulse routes the (P a, P b) initial coherence into (a, b);
      // normalizing against the pulsed t = 0 state keeps L(0) = 1 and the
      // initial-state independence exact. For the default initial state the
      // modulus agrees with normalizing against rho_S(0) itself.
      psi_norm_ = p_eig * psi;
      check_normalizations(psi_norm_);
    }
  }

  PairSeries evaluate(PulseSequence seq, std::span<const double> times) {
    PairSeries out;
    for (auto& v : out) v.resize(times.size());

    Eigen::VectorXcd phase(dim_);
    MatrixXcd work1(dim_, nb_), work2(dim_, nb_), psi_t(dim_, nb_);

    for (std::size_t it = 0; it < times.size(); ++it) {
      const double tau = times[it] / (seq.pulses + 1);
      for (int p = 0; p < dim_; ++p)
        phase[p] = std::polar(1.0, -2.0 * constants::kPi * evals_[p] * tau);

      work1 = phase.asDiagonal() * g_;
      if (seq.pulses == 0) {
        psi_t.noalias() = evecs_ * work1;
      } else {
        work2.noalias() = q_ * work1;
        work1 = phase.asDiagonal() * work2;
        psi_t.noalias() = evecs_ * work1;
      }

      for (std::size_t p = 0; p < kLevelPairs.size(); ++p) {
        const int a = static_cast<int>(kLevelPairs[p].first);
        const int b = static_cast<int>(kLevelPairs[p].second);
        const complex<double> rdm =
            (psi_t.middleRows(a * nb_, nb_).array() *
             psi_t.middleRows(b * nb_, nb_).array().conjugate())
                .sum() /
            static_cast<double>(nb_);
        out[p][it] = rdm / (psi_norm_[a] * std::conj(psi_norm_[b]));
      }
    }
    return out;
  }

 private:
  int nb_;
  int dim_;
  Vector4cd psi_norm_;
  VectorXd evals_;
  MatrixXcd evecs_;
  MatrixXcd g_;
  MatrixXcd q_;
};

PairSeries evolve_with_basis(const ElectronSystem& sys,
                             const BathConfiguration& bath,
                             std::span<const int> cluster, PulseSequence seq,
                             std::span<const double> times,
                             const EnergyBasis& basis, const Vector4cd& psi) {
  ClusterEvolver evolver(sys, bath, cluster, basis, psi, seq.pulses > 0);
  return evolver.evaluate(seq, times);
}

// Streams tilde factors into the running product, retaining tildes of
// sub-top sizes for later subset lookups.
class CceAccumulator {
 public:
  CceAccumulator(std::span<const double> times, const PairSeries& empty)
      : n_times_(times.size()), empty_(empty) {
    for (auto& v : acc_) v.assign(n_times_, complex<double>(1.0, 0.0));
    for (auto& v : flags_) v.assign(n_times_, 0);
  }

  void add_cluster(const std::vector<int>& cluster, PairSeries raw,
                   bool retain) {
    // subset tilde lookup, empty cluster excluded (handled via empty_)
    const int k = static_cast<int>(cluster.size());
    std::vector<const PairSeries*> subsets;
    for (int mask = 1; mask < (1 << k) - 1; ++mask) {
      std::vector<int> sub;
      for (int i = 0; i < k; ++i)
        if (mask & (1 << i)) sub.push_back(cluster[i]);
      const auto it = stored_.find(sub);
      if (it != stored_.end()) subsets.push_back(&it->second);
    }

    for (std::size_t p = 0; p < raw.size(); ++p) {
      for (std::size_t t = 0; t < n_times_; ++t) {
        complex<double> denom = empty_[p][t];
        bool guard = false;
        for (const PairSeries* sub : subsets) {
          const complex<double> s = (*sub)[p][t];
          if (std::abs(s) < kTildeFloor) {
            guard = true;
            break;
          }
          denom *= s;
        }
        complex<double> tilde;
        if (guard || std::abs(denom) < kTildeFloor) {
          tilde = 1.0;
          flags_[p][t] = 1;
        } else {
          tilde = raw[p][t] / denom;
          if (!std::isfinite(tilde.real()) || !std::isfinite(tilde.imag())) {
            tilde = 1.0;
            flags_[p][t] = 1;
          }
        }
        acc_[p][t] *= tilde;
        raw[p][t] = tilde;  // reuse buffer for possible retention
      }
    }
    if (retain) stored_.emplace(cluster, std::move(raw));
  }

  CoherenceSeries finish(std::span<const double> times) {
    CoherenceSeries series;
    series.times_s.assign(times.begin(), times.end());
    for (std::size_t p = 0; p < acc_.size(); ++p) {
      series.amplitude[p].resize(n_times_);
      series.modulus[p].resize(n_times_);
      for (std::size_t t = 0; t < n_times_; ++t) {
        const complex<double> total = empty_[p][t] * acc_[p][t];
        series.amplitude[p][t] = total;
        series.modulus[p][t] = std::abs(total);
      }
      series.flagged[p] = flags_[p];
    }
    return series;
  }

 private:
  std::size_t n_times_;
  PairSeries empty_;
  PairSeries acc_;
  std::array<std::vector<std::uint8_t>, 6> flags_;
  std::map<std::vector<int>, PairSeries> stored_;
};

}  // namespace

bool CoherenceSeries::any_flagged() const {
  for (const auto& v : flagged)
    for (const auto f : v)
      if (f) return true;
  return false;
}

ClusterSet enumerate_clusters(const BathConfiguration& bath, int order,
                              const ClusterOptions& options) {
  if (order < 0) throw DomainError("cluster order must be >= 0");
  ClusterSet set;
  set.order = order;
  set.options = options;
  const int n = static_cast<int>(bath.sites.size());
  if (order == 0 || n == 0) return set;

  for (int i = 0; i < n; ++i) set.clusters.push_back({i});
  if (order == 1) return set;

  const auto pair_linked = [&](int i, int j, double cutoff) {
    const Vec3 r = bath.sites[j].position_a - bath.sites[i].position_a;
    if (options.min_pair_coupling_hz > 0.0)
      return std::abs(pair_coupling_dnm_hz(r)) >= options.min_pair_coupling_hz;
    return r.norm() <= cutoff;
  };

  std::vector<std::vector<int>> neighbors(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (pair_linked(i, j, options.pair_cutoff_a)) {
        set.clusters.push_back({i, j});
        neighbors[i].push_back(j);
        neighbors[j].push_back(i);
      }

  if (order >= 3) {
    // triples connected through at least two links within the triple cutoff
    const double cutoff3 =
        std::min(options.triple_cutoff_a, options.pair_cutoff_a);
    std::set<std::array<int, 3>> triples;
    for (int c = 0; c < n; ++c) {
      std::vector<int> close;
      for (int j : neighbors[c])
        if (pair_linked(c, j, cutoff3)) close.push_back(j);
      for (std::size_t a = 0; a < close.size(); ++a)
        for (std::size_t b = a + 1; b < close.size(); ++b) {
          std::array<int, 3> t = {c, close[a], close[b]};
          std::sort(t.begin(), t.end());
          triples.insert(t);
        }
    }
    for (const auto& t : triples) set.clusters.push_back({t[0], t[1], t[2]});
  }
  if (order > 3) {
    // orders above 3 are only used for small-bath oracle runs: all subsets
    if (n > kMaxClusterSize)
      throw CapacityError("cluster order above 3 requires a small bath");
    set.clusters.clear();
    for (int mask = 1; mask < (1 << n); ++mask) {
      if (std::popcount(static_cast<unsigned>(mask)) > order) continue;
      std::vector<int> c;
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) c.push_back(i);
      set.clusters.push_back(std::move(c));
    }
  }

  std::sort(set.clusters.begin(), set.clusters.end(),
            [](const auto& a, const auto& b) {
              if (a.size() != b.size()) return a.size() < b.size();
              return a < b;
            });
  return set;
}

PairSeries evolve_cluster_coherence(const ElectronSystem& sys,
                                    const BathConfiguration& bath,
                                    std::span<const int> cluster,
                                    PulseSequence seq,
                                    std::span<const double> times_s,
                                    const Vector4cd* initial_state) {
  const EnergyBasis basis = electron_eigenbasis(sys);
  const Vector4cd psi =
      initial_state ? *initial_state : default_initial_state();
  check_normalizations(psi);
  return evolve_with_basis(sys, bath, cluster, seq, times_s, basis, psi);
}

CoherenceSeries cce_combine(const ClusterSet& set,
                            const std::vector<PairSeries>& raw,
                            const PairSeries& empty_cluster,
                            std::span<const double> times_s) {
  if (raw.size() != set.clusters.size())
    throw DomainError("cce_combine: raw series do not align with the set");
  CceAccumulator acc(times_s, empty_cluster);
  const std::size_t top =
      set.clusters.empty() ? 0 : set.clusters.back().size();
  for (std::size_t c = 0; c < set.clusters.size(); ++c)
    acc.add_cluster(set.clusters[c], raw[c],
                    set.clusters[c].size() < top);
  return acc.finish(times_s);
}

CoherenceSeries gcce_coherence(const ElectronSystem& sys,
                               const BathConfiguration& bath,
                               PulseSequence seq,
                               std::span<const double> times_s,
                               const GcceOptions& opts) {
  const EnergyBasis basis = electron_eigenbasis(sys);
  const Vector4cd psi =
      opts.initial_state ? *opts.initial_state : default_initial_state();
  check_normalizations(psi);

  const ClusterSet set = enumerate_clusters(bath, opts.order, opts.clusters);
  const PairSeries empty =
      evolve_with_basis(sys, bath, {}, seq, times_s, basis, psi);

  CceAccumulator acc(times_s, empty);
  const std::size_t top =
      set.clusters.empty() ? 0 : set.clusters.back().size();

  std::size_t begin = 0;
  std::vector<PairSeries> chunk;
  while (begin < set.clusters.size()) {
    const std::size_t end =
        std::min(begin + kCombineChunk, set.clusters.size());
    chunk.resize(end - begin);
    parallel_for(end - begin, opts.workers, [&](std::size_t i) {
      chunk[i] = evolve_with_basis(sys, bath, set.clusters[begin + i], seq,
                                   times_s, basis, psi);
    });
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const auto& cluster = set.clusters[begin + i];
      acc.add_cluster(cluster, std::move(chunk[i]), cluster.size() < top);
    }
    begin = end;
  }
  return acc.finish(times_s);
}

CoherenceSeries exact_reference(const ElectronSystem& sys,
                                const BathConfiguration& bath,
                                PulseSequence seq,
                                std::span<const double> times_s,
                                const Vector4cd* initial_state) {
  const int n = static_cast<int>(bath.sites.size());
  if (n > kMaxClusterSize)
    throw CapacityError("exact reference limited to 4*2^k <= 256");
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;

  const PairSeries raw =
      evolve_cluster_coherence(sys, bath, all, seq, times_s, initial_state);
  CoherenceSeries series;
  series.times_s.assign(times_s.begin(), times_s.end());
  for (std::size_t p = 0; p < raw.size(); ++p) {
    series.amplitude[p] = raw[p];
    series.modulus[p].resize(raw[p].size());
    for (std::size_t t = 0; t < raw[p].size(); ++t)
      series.modulus[p][t] = std::abs(raw[p][t]);
    series.flagged[p].assign(raw[p].size(), 0);
  }
  return series;
}

EnsembleResult ensemble_average(const BathSpec& spec_template,
                                const std::array<Vec3, 2>& electrons,
                                const ElectronSystem& sys, PulseSequence seq,
                                std::span<const double> times_s,
                                const EnsembleOptions& opts) {
  if (opts.n_configs < 1)
    throw DomainError("ensemble needs at least one configuration");

  EnsembleResult result;
  result.per_config.resize(opts.n_configs);

  parallel_for(opts.n_configs, opts.gcce.workers, [&](std::size_t c) {
    BathSpec spec = spec_template;
    spec.config_index =
        spec_template.config_index + static_cast<std::uint32_t>(c);
    const BathConfiguration bath = generate_bath(spec, electrons);
    CoherenceSeries series = gcce_coherence(sys, bath, seq, times_s,
                                            opts.gcce);
    series.amplitude = {};  // persisted results keep moduli only
    result.per_config[c] = std::move(series);
  });

  for (int c = 0; c < opts.n_configs; ++c) {
    if (result.per_config[c].any_flagged()) result.excluded.push_back(c);
    if (opts.per_config_sink) opts.per_config_sink(c, result.per_config[c]);
  }
  const std::size_t kept = opts.n_configs - result.excluded.size();
  if (result.excluded.size() * 10 > static_cast<std::size_t>(opts.n_configs))
    throw RunError("more than 10% of ensemble configurations failed "
                   "convergence flags");
  if (kept == 0) throw RunError("every ensemble configuration was excluded");

  result.mean.times_s.assign(times_s.begin(), times_s.end());
  for (std::size_t p = 0; p < result.mean.modulus.size(); ++p) {
    result.mean.modulus[p].assign(times_s.size(), 0.0);
    for (int c = 0; c < opts.n_configs; ++c) {
      if (std::find(result.excluded.begin(), result.excluded.end(), c) !=
          result.excluded.end())
        continue;
      for (std::size_t t = 0; t < times_s.size(); ++t)
        result.mean.modulus[p][t] += result.per_config[c].modulus[p][t];
    }
    for (auto& v : result.mean.modulus[p]) v /= static_cast<double>(kept);
    result.mean.flagged[p].assign(times_s.size(), 0);
  }
  return result;
}

}  // namespace spinbath
