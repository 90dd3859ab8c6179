#pragma once

#include <span>
#include <string>

namespace spinbath {

/// Stretched-exponential fit exp[-(t/T)^b] of a coherence modulus series.
struct DecayFit {
  double t_s = 0.0;   // decay time T
  double b = 1.0;     // stretch exponent, constrained to [0.5, 4]
  double rmse = 0.0;
  double window_lo_s = 0.0;
  double window_hi_s = 0.0;
  enum class Method { direct, envelope } method = Method::direct;

  const char* method_name() const {
    return method == Method::direct ? "direct" : "envelope";
  }
};

// Least-squares fit over [second sample, first crossing of 0.05 or series
// end]. Deterministic multistart (b in {1, 2, 3}) damped Gauss-Newton with
// the analytic Jacobian. Throws NoDecayError when the series never drops
// below 0.9 in the window, FitError when no start converges.
DecayFit fit_stretched_exponential(std::span<const double> times_s,
                                   std::span<const double> modulus);

// Envelope variant for oscillatory (ESEEM) series: fits through the strict
// local maxima (prominence >= 0.01) plus the first sample; falls back to the
// direct fit when fewer than 4 maxima exist.
DecayFit fit_envelope(std::span<const double> times_s,
                      std::span<const double> modulus);

}  // namespace spinbath
