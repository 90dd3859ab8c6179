#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "spinbath/coherence.hpp"
#include "spinbath/fitting.hpp"
#include "spinbath/runner.hpp"

using namespace spinbath;

// Expansion-order and cutoff convergence at the reference parameter point
// (J = 10 GHz, d = 5 A, R_S = 5 A, R_B = 2 A, n_B = 0.01 / A^3, B = 1 T,
// electrons parallel to the field). Single configuration; these runs carry
// the "slow" ctest label.

namespace {

struct Setup {
  ElectronSystem sys;
  BathConfiguration bath;
};

Setup reference_setup(std::uint64_t seed) {
  RunConfig cfg;
  cfg.bath.master_seed = seed;
  Setup s{cfg.electron_system(), {}};
  s.bath = generate_bath(cfg.bath, s.sys.positions_a);
  return s;
}

double max_diff_over_window(const CoherenceSeries& a,
                            const CoherenceSeries& b, std::size_t pair,
                            double floor) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.times_s.size(); ++t) {
    if (a.modulus[pair][t] < floor) break;
    worst = std::max(worst,
                     std::abs(a.modulus[pair][t] - b.modulus[pair][t]));
  }
  return worst;
}

}  // namespace

TEST_CASE("free induction converges at order 1") {
  const Setup s = reference_setup(2024);
  RunConfig cfg;
  cfg.bath.master_seed = 2024;
  const double t_max = resolve_time_max(cfg, 0);
  const auto times = linear_grid(t_max, 101);

  GcceOptions o1;
  o1.order = 1;
  o1.workers = 2;
  GcceOptions o2 = o1;
  o2.order = 2;
  const auto first = gcce_coherence(s.sys, s.bath, PulseSequence{0}, times,
                                    o1);
  const auto second = gcce_coherence(s.sys, s.bath, PulseSequence{0}, times,
                                     o2);
  for (std::size_t p = 0; p < 6; ++p) {
    const double worst = max_diff_over_window(second, first, p, 0.0);
    CAPTURE(p);
    CHECK(worst < 1e-2);
  }
}

TEST_CASE("echo converges at order 2") {
  const Setup s = reference_setup(2024);
  RunConfig cfg;
  cfg.bath.master_seed = 2024;
  const double t_max = resolve_time_max(cfg, 1);
  const auto times = linear_grid(t_max, 101);

  GcceOptions o2;
  o2.order = 2;
  o2.workers = 2;
  GcceOptions o3 = o2;
  o3.order = 3;
  const auto second = gcce_coherence(s.sys, s.bath, PulseSequence{1}, times,
                                     o2);
  const auto third = gcce_coherence(s.sys, s.bath, PulseSequence{1}, times,
                                    o3);
  for (std::size_t p = 0; p < 6; ++p) {
    const double worst = max_diff_over_window(second, third, p, 0.0);
    CAPTURE(p);
    CHECK(worst < 3e-2);
  }
}

TEST_CASE("pair cutoff 8 A is converged: 12 A moves fitted T2 by < 2%") {
  const Setup s = reference_setup(77);
  RunConfig cfg;
  cfg.bath.master_seed = 77;
  const double t_max = resolve_time_max(cfg, 1);
  const auto times = linear_grid(t_max, 101);

  GcceOptions base;
  base.order = 2;
  base.workers = 2;
  GcceOptions wide = base;
  wide.clusters.pair_cutoff_a = 12.0;

  const auto a = gcce_coherence(s.sys, s.bath, PulseSequence{1}, times, base);
  const auto b = gcce_coherence(s.sys, s.bath, PulseSequence{1}, times, wide);
  for (const std::size_t p : {std::size_t{2}, std::size_t{4}}) {
    const auto fa = fit_stretched_exponential(a.times_s, a.modulus[p]);
    const auto fb = fit_stretched_exponential(b.times_s, b.modulus[p]);
    CHECK(std::abs(fa.t_s - fb.t_s) / fa.t_s < 0.02);
  }
}

TEST_CASE("bath radius 30 A is converged: doubling moves fitted times by "
          "< 2%") {
  RunConfig cfg;
  cfg.bath.master_seed = 99;
  RunConfig big = cfg;
  big.bath.bath_radius_a = 60.0;

  const auto sys = cfg.electron_system();
  const auto bath30 = generate_bath(cfg.bath, sys.positions_a);
  const auto bath60 = generate_bath(big.bath, sys.positions_a);

  for (const int pulses : {0, 1}) {
    const double t_max = resolve_time_max(cfg, pulses);
    const auto times = linear_grid(t_max, 101);
    GcceOptions opts;
    opts.order = pulses == 0 ? 1 : 2;
    opts.workers = 2;
    const auto a =
        gcce_coherence(sys, bath30, PulseSequence{pulses}, times, opts);
    const auto b =
        gcce_coherence(sys, bath60, PulseSequence{pulses}, times, opts);
    for (const std::size_t p : {std::size_t{2}, std::size_t{4}}) {
      const auto fa = fit_stretched_exponential(a.times_s, a.modulus[p]);
      const auto fb = fit_stretched_exponential(b.times_s, b.modulus[p]);
      CAPTURE(pulses);
      CAPTURE(p);
      CHECK(std::abs(fa.t_s - fb.t_s) / fa.t_s < 0.02);
    }
  }
}
