#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spinbath/analytic.hpp"
#include "spinbath/coherence.hpp"
#include "spinbath/config.hpp"
#include "spinbath/fitting.hpp"

namespace spinbath {

std::vector<double> linear_grid(double t_max_s, int points);

// Grid length for one pulse setting. Explicit time_max_s wins; otherwise an
// analytic estimate from configuration 0 (Gaussian T2* for free induction,
// pseudospin products for the echo) is extended by doubling until the
// fastest pair has dropped below 0.1 at the end of the grid, capped at 10 ms.
double resolve_time_max(const RunConfig& cfg, int pulses);

struct PairFitOutcome {
  std::optional<DecayFit> fit;
  std::string error;  // "nodecay" / fit failure text when empty fit
};

// Direct and envelope fits per pair; the lower-rmse method wins.
std::array<PairFitOutcome, 6> fit_series(const CoherenceSeries& series);

struct RunProducts {
  int pulses = 0;
  std::vector<double> times_s;
  EnsembleResult ensemble;
  std::array<PairFitOutcome, 6> fits;
};

// `run` pipeline: per pulse count, ensemble-averaged coherences plus decay
// fits; CSVs written under the resolved output directory when requested.
std::vector<RunProducts> run_experiment(const RunConfig& cfg,
                                        bool write_files = true);

struct SweepPoint {
  std::vector<std::pair<std::string, std::string>> assignment;
  std::vector<RunProducts> products;  // empty when the point failed
  std::string error;
};

// `sweep` pipeline: Cartesian product over the config's axes. Point
// failures are recorded and the sweep continues.
std::vector<SweepPoint> sweep_experiment(const RunConfig& cfg,
                                         bool write_files = true);

struct CompareProducts {
  int pulses = 0;
  std::vector<double> times_s;
  CoherenceSeries gcce;
  CoherenceSeries reference;  // pseudospin products (echo) or Gaussian (FID)
};

// `compare` pipeline on a single configuration.
std::vector<CompareProducts> compare_experiment(const RunConfig& cfg,
                                                bool write_files = true);

BathConfiguration generate_bath_product(const RunConfig& cfg,
                                        bool write_files = true);

void field_map_product(const RunConfig& cfg, bool write_files = true);
PairStatistics pair_stats_product(const RunConfig& cfg,
                                  bool write_files = true);

// Full command line; returns the process exit code (0 success, 1 physics
// failure, 2 usage error).
int cli_main(int argc, const char* const* argv);

}  // namespace spinbath
