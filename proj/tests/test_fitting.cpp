#include <doctest.h>

#include <cmath>
#include <vector>

#include "spinbath/errors.hpp"
#include "spinbath/fitting.hpp"

using namespace spinbath;

namespace {

std::vector<double> grid(double t_max, int points) {
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i)
    t[i] = t_max * static_cast<double>(i) / (points - 1);
  return t;
}

std::vector<double> stretched(const std::vector<double>& t, double big_t,
                              double b) {
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    y[i] = std::exp(-std::pow(t[i] / big_t, b));
  return y;
}

}  // namespace

TEST_CASE("exact model recovery") {
  SUBCASE("gaussian") {
    const auto t = grid(10e-6, 101);
    const auto y = stretched(t, 3e-6, 2.0);
    const auto fit = fit_stretched_exponential(t, y);
    CHECK(fit.t_s == doctest::Approx(3e-6).epsilon(1e-6));
    CHECK(fit.b == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(fit.rmse < 1e-8);
    CHECK(fit.method == DecayFit::Method::direct);
  }
  SUBCASE("plain exponential") {
    const auto t = grid(60e-6, 121);
    const auto y = stretched(t, 10e-6, 1.0);
    const auto fit = fit_stretched_exponential(t, y);
    CHECK(fit.t_s == doctest::Approx(10e-6).epsilon(1e-6));
    CHECK(fit.b == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.rmse < 1e-8);
  }
  SUBCASE("steep stretch") {
    const auto t = grid(8e-6, 161);
    const auto y = stretched(t, 4e-6, 3.1);
    const auto fit = fit_stretched_exponential(t, y);
    CHECK(fit.t_s == doctest::Approx(4e-6).epsilon(1e-5));
    CHECK(fit.b == doctest::Approx(3.1).epsilon(1e-5));
  }
}

TEST_CASE("fit window runs from the second sample to the 0.05 crossing") {
  const auto t = grid(40e-6, 201);
  auto y = stretched(t, 5e-6, 2.0);
  // corrupt the tail far below the crossing; the window must exclude it
  for (std::size_t i = 0; i < t.size(); ++i)
    if (y[i] < 0.01) y[i] = 0.3;
  const auto fit = fit_stretched_exponential(t, y);
  CHECK(fit.t_s == doctest::Approx(5e-6).epsilon(1e-3));
  CHECK(fit.window_lo_s == doctest::Approx(t[1]));
  CHECK(fit.window_hi_s < 13e-6);
}

TEST_CASE("time-axis rescaling rescales T and leaves b unchanged") {
  const auto t = grid(10e-6, 81);
  const auto y = stretched(t, 3e-6, 1.7);
  const auto base = fit_stretched_exponential(t, y);

  for (const double scale : {1e-3, 50.0}) {
    std::vector<double> ts(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) ts[i] = scale * t[i];
    const auto fit = fit_stretched_exponential(ts, y);
    CHECK(fit.t_s == doctest::Approx(scale * base.t_s).epsilon(1e-9));
    CHECK(fit.b == doctest::Approx(base.b).epsilon(1e-9));
  }
}

TEST_CASE("fits are deterministic") {
  const auto t = grid(20e-6, 61);
  auto y = stretched(t, 6e-6, 2.3);
  // mild deterministic ripple
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] *= 1.0 + 0.01 * std::sin(3.0 * i);
  const auto a = fit_stretched_exponential(t, y);
  const auto b = fit_stretched_exponential(t, y);
  CHECK(a.t_s == b.t_s);
  CHECK(a.b == b.b);
  CHECK(a.rmse == b.rmse);
}

TEST_CASE("error paths") {
  SUBCASE("no decay") {
    const auto t = grid(10e-6, 51);
    std::vector<double> y(t.size(), 0.97);
    y[0] = 1.0;
    CHECK_THROWS_AS(fit_stretched_exponential(t, y), NoDecayError);
  }
  SUBCASE("too short") {
    const std::vector<double> t = {0.0, 1e-6};
    const std::vector<double> y = {1.0, 0.5};
    CHECK_THROWS_AS(fit_stretched_exponential(t, y), FitError);
  }
}

TEST_CASE("stretch exponent stays within its bounds") {
  const auto t = grid(10e-6, 101);
  std::vector<double> y(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    y[i] = t[i] < 5e-6 ? 1.0 : 0.01;  // near-step decay
  const auto fit = fit_stretched_exponential(t, y);
  CHECK(fit.b <= 4.0);
  CHECK(fit.b >= 0.5);
}

TEST_CASE("envelope fitting") {
  SUBCASE("monotone series falls back to the direct fit") {
    const auto t = grid(10e-6, 101);
    const auto y = stretched(t, 3e-6, 2.0);
    const auto direct = fit_stretched_exponential(t, y);
    const auto envelope = fit_envelope(t, y);
    CHECK(envelope.method == DecayFit::Method::direct);
    CHECK(envelope.t_s == direct.t_s);
    CHECK(envelope.b == direct.b);
  }

  SUBCASE("modulated gaussian recovers the envelope time within 5%") {
    const double big_t = 30e-6;
    const double omega = 2.0 * 3.14159265358979 / 15e-6;
    const auto t = grid(80e-6, 401);
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double c = std::cos(omega * t[i]);
      y[i] = std::exp(-std::pow(t[i] / big_t, 2.0)) * (0.6 + 0.4 * c * c);
    }
    const auto fit = fit_envelope(t, y);
    CHECK(fit.method == DecayFit::Method::envelope);
    CHECK(fit.t_s == doctest::Approx(big_t).epsilon(0.05));
    CHECK(fit.b == doctest::Approx(2.0).epsilon(0.1));

    // the direct fit is dragged down by the modulation troughs
    const auto direct = fit_stretched_exponential(t, y);
    CHECK(direct.rmse > 3.0 * fit.rmse);
  }
}
