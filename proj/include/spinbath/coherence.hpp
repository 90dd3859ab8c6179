#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spinbath/bath.hpp"
#include "spinbath/hamiltonian.hpp"

namespace spinbath {

/// Instantaneous pi_xx pulses between equal free segments: 0 pulses is free
/// induction, 1 pulse is a Hahn echo. Total time t splits into segments of
/// tau = t/(pulses+1).
struct PulseSequence {
  int pulses = 0;
};

/// Time-resolved normalized coherences for the six level pairs, in
/// kLevelPairs order.
struct CoherenceSeries {
  std::vector<double> times_s;
  // Complex normalized coherence; left empty by ensemble averaging.
  std::array<std::vector<std::complex<double>>, 6> amplitude;
  std::array<std::vector<double>, 6> modulus;
  // Nonzero where the expansion hit the denominator guard.
  std::array<std::vector<std::uint8_t>, 6> flagged;

  bool any_flagged() const;
};

struct ClusterOptions {
  double pair_cutoff_a = 8.0;
  double triple_cutoff_a = 6.0;
  // When positive, pair selection switches from distance to |d_nm| >= this.
  double min_pair_coupling_hz = 0.0;
};

/// Subset-closed cluster list, sizes ascending then lexicographic. The empty
/// cluster (central system alone) is implicit and not listed.
struct ClusterSet {
  int order = 2;
  ClusterOptions options;
  std::vector<std::vector<int>> clusters;
};

// Singletons for every site; pairs within the cutoff; order-3 adds triples
// connected through at least two links within the (tighter) triple cutoff.
ClusterSet enumerate_clusters(const BathConfiguration& bath, int order,
                              const ClusterOptions& options = {});

// Complex normalized coherence per level pair, one vector per pair.
using PairSeries = std::array<std::vector<std::complex<double>>, 6>;

// Evolves rho_S(0) (x) I/2^k for the electrons plus one cluster through the
// pulse sequence and returns <E_a|Tr_B rho(t)|E_b> / <E_a|rho_S(0)|E_b>.
// `initial_state` gives eigenbasis coefficients of the electron pure state;
// the default (|E_S>+|E_-1>+|E_0>+|E_1>)/2 keeps every normalization finite.
// One Hermitian eigendecomposition is reused across the whole time grid.
PairSeries evolve_cluster_coherence(
    const ElectronSystem& sys, const BathConfiguration& bath,
    std::span<const int> cluster, PulseSequence seq,
    std::span<const double> times_s,
    const Eigen::Vector4cd* initial_state = nullptr);

// Inclusion-exclusion product over complex cluster coherences:
//   L = L_empty * prod_C L~_C,   L~_C = L_C / prod_{C' subset C} L~_{C'} .
// A subcluster tilde with modulus below 1e-6 makes the enclosing tilde 1 and
// flags the time point. `raw` must align with `set.clusters`.
CoherenceSeries cce_combine(const ClusterSet& set,
                            const std::vector<PairSeries>& raw,
                            const PairSeries& empty_cluster,
                            std::span<const double> times_s);

struct GcceOptions {
  int order = 2;
  ClusterOptions clusters;
  int workers = 0;
  const Eigen::Vector4cd* initial_state = nullptr;
};

// Full expansion for one bath configuration: enumerate, evolve every cluster
// (in parallel; the reduction order is fixed), combine.
CoherenceSeries gcce_coherence(const ElectronSystem& sys,
                               const BathConfiguration& bath,
                               PulseSequence seq,
                               std::span<const double> times_s,
                               const GcceOptions& opts = {});

// Direct evolution of the full electron-bath density matrix; ground truth
// for small baths (4 * 2^N <= 256).
CoherenceSeries exact_reference(const ElectronSystem& sys,
                                const BathConfiguration& bath,
                                PulseSequence seq,
                                std::span<const double> times_s,
                                const Eigen::Vector4cd* initial_state = nullptr);

struct EnsembleOptions {
  int n_configs = 20;
  GcceOptions gcce;
  // Called once per finished configuration, in configuration order.
  std::function<void(int, const CoherenceSeries&)> per_config_sink;
};

struct EnsembleResult {
  CoherenceSeries mean;  // modulus only
  std::vector<CoherenceSeries> per_config;
  std::vector<int> excluded;  // configs dropped by convergence flags
};

// Arithmetic mean of per-configuration moduli over config_index offsets
// 0..n-1 from the template spec. Configs with convergence flags are excluded;
// more than 10% exclusions is an error.
EnsembleResult ensemble_average(const BathSpec& spec_template,
                                const std::array<Vec3, 2>& electrons,
                                const ElectronSystem& sys, PulseSequence seq,
                                std::span<const double> times_s,
                                const EnsembleOptions& opts);

}  // namespace spinbath
