#include "spinbath/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "spinbath/errors.hpp"

namespace spinbath {

namespace {

constexpr double kFitFloor = 0.05;   // fit window ends at this modulus
constexpr double kDecayBar = 0.9;    // "no decay" if the window stays above
constexpr double kBLo = 0.5, kBHi = 4.0;
constexpr int kMaxIterations = 200;
constexpr double kStepTolerance = 1e-10;

struct Window {
  std::vector<double> t;
  std::vector<double> y;
  double lo = 0.0, hi = 0.0;
};

// [second sample, first crossing of kFitFloor or end]
Window select_window(std::span<const double> times,
                     std::span<const double> modulus) {
  if (times.size() != modulus.size() || times.size() < 4)
    throw FitError("fit needs at least 4 samples");
  std::size_t end = times.size();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (modulus[i] < kFitFloor) {
      end = i + 1;
      break;
    }
  }
  Window w;
  for (std::size_t i = 1; i < end; ++i) {
    if (!(times[i] > 0.0)) continue;
    w.t.push_back(times[i]);
    w.y.push_back(modulus[i]);
  }
  if (w.t.size() < 3) throw FitError("fit window has fewer than 3 samples");
  w.lo = w.t.front();
  w.hi = w.t.back();
  return w;
}

double rmse_of(const Window& w, double log_t, double b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.t.size(); ++i) {
    const double u = std::exp(b * (std::log(w.t[i]) - log_t));
    const double r = std::exp(-u) - w.y[i];
    acc += r * r;
  }
  return std::sqrt(acc / w.t.size());
}

// Damped Gauss-Newton on parameters (log T, b); returns true on convergence.
bool gauss_newton(const Window& w, double& log_t, double& b) {
  double lambda = 1e-3;
  double cost = rmse_of(w, log_t, b);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < w.t.size(); ++i) {
      const double logratio = std::log(w.t[i]) - log_t;
      const double u = std::exp(b * logratio);
      const double f = std::exp(-u);
      const double r = f - w.y[i];
      // d f / d logT = f b u ;  d f / d b = -f u logratio
      const Eigen::Vector2d j{f * b * u, -f * u * logratio};
      jtj += j * j.transpose();
      jtr += j * r;
    }
    Eigen::Matrix2d damped = jtj;
    damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
    const Eigen::Vector2d step = damped.ldlt().solve(-jtr);
    if (!step.allFinite()) return false;

    const double new_log_t = log_t + step[0];
    const double new_b = std::clamp(b + step[1], kBLo, kBHi);
    const double new_cost = rmse_of(w, new_log_t, new_b);
    if (new_cost <= cost) {
      const double rel = std::abs(step[0]) + std::abs(new_b - b);
      log_t = new_log_t;
      b = new_b;
      cost = new_cost;
      lambda = std::max(lambda * 0.3, 1e-12);
      if (rel < kStepTolerance) return true;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) return false;
    }
  }
  return true;  // iteration cap reached with a usable optimum
}

DecayFit fit_window(const Window& w) {
  if (*std::min_element(w.y.begin(), w.y.end()) > kDecayBar)
    throw NoDecayError("series does not decay below 0.9 in the fit window");

  // T start: first crossing of 1/e, linearly interpolated
  double t_start = w.t.back();
  const double bar = std::exp(-1.0);
  for (std::size_t i = 0; i < w.y.size(); ++i) {
    if (w.y[i] < bar) {
      if (i == 0) {
        t_start = w.t[0];
      } else {
        const double frac = (w.y[i - 1] - bar) / (w.y[i - 1] - w.y[i]);
        t_start = w.t[i - 1] + frac * (w.t[i] - w.t[i - 1]);
      }
      break;
    }
  }

  bool any = false;
  double best_cost = std::numeric_limits<double>::infinity();
  double best_log_t = 0.0, best_b = 1.0;
  for (const double b0 : {1.0, 2.0, 3.0}) {
    double log_t = std::log(t_start);
    double b = b0;
    if (!gauss_newton(w, log_t, b)) continue;
    const double cost = rmse_of(w, log_t, b);
    if (cost < best_cost) {
      best_cost = cost;
      best_log_t = log_t;
      best_b = b;
      any = true;
    }
  }
  if (!any)
    throw FitError("stretched-exponential fit failed to converge from any "
                   "start (b in {1,2,3})");

  DecayFit fit;
  fit.t_s = std::exp(best_log_t);
  fit.b = best_b;
  fit.rmse = best_cost;
  fit.window_lo_s = w.lo;
  fit.window_hi_s = w.hi;
  return fit;
}

}  // namespace

DecayFit fit_stretched_exponential(std::span<const double> times_s,
                                   std::span<const double> modulus) {
  return fit_window(select_window(times_s, modulus));
}

DecayFit fit_envelope(std::span<const double> times_s,
                      std::span<const double> modulus) {
  if (times_s.size() != modulus.size() || times_s.size() < 4)
    throw FitError("fit needs at least 4 samples");

  // strict local maxima with a prominence floor
  constexpr double kProminence = 0.01;
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < modulus.size(); ++i) {
    if (!(modulus[i] > modulus[i - 1] && modulus[i] > modulus[i + 1]))
      continue;
    // prominence: drop to the lowest point before the next higher sample,
    // on each side
    double left_min = modulus[i];
    for (std::size_t j = i; j-- > 0;) {
      if (modulus[j] > modulus[i]) break;
      left_min = std::min(left_min, modulus[j]);
    }
    double right_min = modulus[i];
    for (std::size_t j = i + 1; j < modulus.size(); ++j) {
      if (modulus[j] > modulus[i]) break;
      right_min = std::min(right_min, modulus[j]);
    }
    if (modulus[i] - std::max(left_min, right_min) >= kProminence)
      peaks.push_back(i);
  }

  if (peaks.size() < 4) return fit_stretched_exponential(times_s, modulus);

  Window w;
  // keep the first sample as the t ~ 0 anchor (window selection drops t=0)
  if (times_s[0] > 0.0) {
    w.t.push_back(times_s[0]);
    w.y.push_back(modulus[0]);
  } else {
    w.t.push_back(times_s[1]);
    w.y.push_back(modulus[1]);
  }
  for (const auto i : peaks) {
    w.t.push_back(times_s[i]);
    w.y.push_back(modulus[i]);
    if (modulus[i] < kFitFloor) break;
  }
  w.lo = w.t.front();
  w.hi = w.t.back();
  DecayFit fit = fit_window(w);
  fit.method = DecayFit::Method::envelope;
  return fit;
}

}  // namespace spinbath
