#include "spinbath/runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spinbath/errors.hpp"
#include "spinbath/rng.hpp"

namespace spinbath {

namespace fs = std::filesystem;

namespace {

constexpr double kTimeCap = 10e-3;          // grid auto-extension cap
constexpr std::uint64_t kPcaStateStream = 0x50c4u;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw RunError("cannot write " + path.string());
  return os;
}

void write_coherence_csv(const fs::path& path, const CoherenceSeries& s) {
  auto os = open_out(path);
  os << "t_s";
  for (const auto* name : kPairNames) os << ',' << name;
  os << '\n';
  for (std::size_t t = 0; t < s.times_s.size(); ++t) {
    os << fmt(s.times_s[t]);
    for (std::size_t p = 0; p < s.modulus.size(); ++p)
      os << ',' << fmt(s.modulus[p][t]);
    os << '\n';
  }
}

void write_complex_csv(const fs::path& path, const CoherenceSeries& s) {
  auto os = open_out(path);
  os << "t_s";
  for (const auto* name : kPairNames) os << ',' << name << "_re," << name
                                         << "_im";
  os << '\n';
  for (std::size_t t = 0; t < s.times_s.size(); ++t) {
    os << fmt(s.times_s[t]);
    for (std::size_t p = 0; p < s.amplitude.size(); ++p)
      os << ',' << fmt(s.amplitude[p][t].real()) << ','
         << fmt(s.amplitude[p][t].imag());
    os << '\n';
  }
}

void write_fits_csv(const fs::path& path,
                    const std::array<PairFitOutcome, 6>& fits) {
  auto os = open_out(path);
  os << "pair,T_s,b,rmse,method,window_lo_s,window_hi_s\n";
  for (std::size_t p = 0; p < fits.size(); ++p) {
    os << kPairNames[p] << ',';
    if (fits[p].fit) {
      const DecayFit& f = *fits[p].fit;
      os << fmt(f.t_s) << ',' << fmt(f.b) << ',' << fmt(f.rmse) << ','
         << f.method_name() << ',' << fmt(f.window_lo_s) << ','
         << fmt(f.window_hi_s) << '\n';
    } else {
      os << "inf,nan,nan," << (fits[p].error.empty() ? "failed" : fits[p].error)
         << ",nan,nan\n";
    }
  }
}

fs::path resolved_output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("OUTPUT_DIR"); env && *env)
    return fs::path(env);
  return fs::path(cfg.output_dir);
}

std::string run_id(const RunConfig& cfg, int pulses) {
  return cfg.id + "_N" + std::to_string(pulses);
}

void warn_pure_dephasing(const RunConfig& cfg, const ElectronSystem& sys,
                         const BathConfiguration& bath) {
  const DephasingGuard guard = pure_dephasing_guard(sys, bath);
  if (!guard.ok) {
    std::fprintf(stderr,
                 "warning: %s: outside the pure-dephasing regime "
                 "(max hyperfine %.3g Hz vs min level-pair gap %.3g Hz)\n",
                 cfg.id.c_str(), guard.max_hyperfine_hz, guard.min_gap_hz);
  }
}

double slowest_decaying_modulus(const CoherenceSeries& s, std::size_t t_idx) {
  // slowest of the five decaying pairs = max modulus among them
  double worst = 0.0;
  for (std::size_t p = 0; p < 5; ++p)
    worst = std::max(worst, s.modulus[p][t_idx]);
  return worst;
}

double min_pair_modulus(const CoherenceSeries& s, std::size_t t_idx) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < s.modulus.size(); ++p)
    lo = std::min(lo, s.modulus[p][t_idx]);
  return lo;
}

GcceOptions gcce_options(const RunConfig& cfg, int pulses) {
  GcceOptions opts;
  opts.order = pulses == 0 ? cfg.order_fid : cfg.order_hahn;
  opts.clusters = cfg.clusters;
  opts.workers = cfg.workers;
  return opts;
}

}  // namespace

std::vector<double> linear_grid(double t_max_s, int points) {
  if (points < 2 || !(t_max_s > 0.0))
    throw DomainError("time grid needs t_max > 0 and at least 2 points");
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i)
    t[i] = t_max_s * static_cast<double>(i) / (points - 1);
  return t;
}

double resolve_time_max(const RunConfig& cfg, int pulses) {
  if (cfg.time_max_s > 0.0) return cfg.time_max_s;

  const ElectronSystem sys = cfg.electron_system();
  const BathConfiguration bath0 =
      generate_bath(cfg.bath, sys.positions_a);

  double estimate = 100e-6;  // fallback, e.g. dipolar runs
  if (!sys.include_ee_dipolar && bath0.size() > 0) {
    if (pulses == 0) {
      const FidTheory theory = fid_sigma_t2star(sys, bath0);
      if (std::isfinite(theory.t2_star_s)) estimate = 4.5 * theory.t2_star_s;
    } else {
      // exponential search on the slowest pseudospin-product pair
      const NuclearProductState state =
          sample_initial_state(bath0, derive_seed(cfg.bath.master_seed,
                                                  kPcaStateStream));
      double t = 1e-6;
      while (t < kTimeCap) {
        const std::array<double, 1> probe = {t};
        const CoherenceSeries pca =
            pca_hahn_coherences(sys, bath0, state, probe);
        if (slowest_decaying_modulus(pca, 0) < 0.05) break;
        t *= 2.0;
      }
      estimate = std::min(1.2 * t, kTimeCap);
    }
  }

  // doubling rule on the actual expansion for configuration 0
  double t_max = std::min(estimate, kTimeCap);
  for (;;) {
    const std::array<double, 1> probe = {t_max};
    const CoherenceSeries check = gcce_coherence(
        sys, bath0, PulseSequence{pulses}, probe, gcce_options(cfg, pulses));
    if (min_pair_modulus(check, 0) < 0.1 || t_max >= kTimeCap) break;
    t_max = std::min(2.0 * t_max, kTimeCap);
  }
  return t_max;
}

std::array<PairFitOutcome, 6> fit_series(const CoherenceSeries& series) {
  std::array<PairFitOutcome, 6> out;
  for (std::size_t p = 0; p < out.size(); ++p) {
    std::optional<DecayFit> direct, envelope;
    std::string error;
    try {
      direct = fit_stretched_exponential(series.times_s, series.modulus[p]);
    } catch (const NoDecayError&) {
      error = "nodecay";
    } catch (const FitError& e) {
      error = e.what();
    }
    try {
      envelope = fit_envelope(series.times_s, series.modulus[p]);
    } catch (const FitError&) {
    }
    if (direct && (!envelope || direct->rmse <= envelope->rmse))
      out[p].fit = direct;
    else if (envelope)
      out[p].fit = envelope;
    else
      out[p].error = error.empty() ? "failed" : error;
  }
  return out;
}

std::vector<RunProducts> run_experiment(const RunConfig& cfg,
                                        bool write_files) {
  cfg.bath.validate();
  const ElectronSystem sys = cfg.electron_system();
  const fs::path out_dir = resolved_output_dir(cfg);

  {
    const BathConfiguration bath0 = generate_bath(cfg.bath, sys.positions_a);
    warn_pure_dephasing(cfg, sys, bath0);
  }

  std::vector<RunProducts> all;
  for (const int pulses : cfg.pulses) {
    RunProducts products;
    products.pulses = pulses;
    const double t_max = resolve_time_max(cfg, pulses);
    products.times_s = linear_grid(t_max, cfg.time_points);

    EnsembleOptions opts;
    opts.n_configs = cfg.ensemble_size;
    opts.gcce = gcce_options(cfg, pulses);
    if (write_files) {
      opts.per_config_sink = [out_dir, id = run_id(cfg, pulses)](
                                 int index, const CoherenceSeries& s) {
        write_coherence_csv(
            out_dir / (id + "_cfg" + std::to_string(index) + ".csv"), s);
      };
    }
    products.ensemble =
        ensemble_average(cfg.bath, sys.positions_a, sys,
                         PulseSequence{pulses}, products.times_s, opts);
    products.fits = fit_series(products.ensemble.mean);

    if (write_files) {
      const std::string id = run_id(cfg, pulses);
      write_coherence_csv(out_dir / (id + "_coherence.csv"),
                          products.ensemble.mean);
      write_fits_csv(out_dir / (id + "_fits.csv"), products.fits);
      if (!products.ensemble.excluded.empty()) {
        auto os = open_out(out_dir / (id + "_exclusions.txt"));
        for (int c : products.ensemble.excluded) os << c << '\n';
      }
    }
    all.push_back(std::move(products));
  }
  return all;
}

std::vector<SweepPoint> sweep_experiment(const RunConfig& cfg,
                                         bool write_files) {
  if (cfg.sweep.empty())
    throw ConfigError("sweep requires at least one [sweep] axis");
  const fs::path out_dir = resolved_output_dir(cfg);

  // Cartesian product, axes in declaration order.
  std::vector<std::size_t> radix(cfg.sweep.size());
  std::size_t total = 1;
  for (std::size_t a = 0; a < cfg.sweep.size(); ++a) {
    radix[a] = cfg.sweep[a].values.size();
    total *= radix[a];
  }

  std::vector<SweepPoint> points;
  for (std::size_t flat = 0; flat < total; ++flat) {
    SweepPoint point;
    RunConfig point_cfg = cfg;
    point_cfg.sweep.clear();
    std::size_t rem = flat;
    std::string suffix;
    for (std::size_t a = 0; a < cfg.sweep.size(); ++a) {
      const std::size_t idx = rem % radix[a];
      rem /= radix[a];
      const auto& axis = cfg.sweep[a];
      const std::string& value = axis.values[idx];
      point.assignment.emplace_back(axis.parameter, value);
      point_cfg = point_cfg.with_parameter(axis.parameter, value);
      suffix += "_" + axis.parameter + "=" + value;
    }
    point_cfg.id = cfg.id + suffix;
    try {
      point.products = run_experiment(point_cfg, write_files);
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    points.push_back(std::move(point));
  }

  if (write_files) {
    auto os = open_out(out_dir / (cfg.id + "_sweep.csv"));
    os << "param,value,pair,T_s,b,rmse,N\n";
    for (const auto& point : points) {
      if (!point.error.empty()) continue;
      std::string param, value;
      for (const auto& [p, v] : point.assignment) {
        if (!param.empty()) {
          param += ';';
          value += ';';
        }
        param += p;
        value += v;
      }
      for (const auto& products : point.products)
        for (std::size_t p = 0; p < products.fits.size(); ++p) {
          os << param << ',' << value << ',' << kPairNames[p] << ',';
          if (products.fits[p].fit) {
            const DecayFit& f = *products.fits[p].fit;
            os << fmt(f.t_s) << ',' << fmt(f.b) << ',' << fmt(f.rmse);
          } else {
            os << "inf,nan,nan";
          }
          os << ',' << products.pulses << '\n';
        }
    }
    std::size_t failures = 0;
    for (const auto& point : points) failures += !point.error.empty();
    if (failures > 0) {
      auto fo = open_out(out_dir / (cfg.id + "_sweep_failures.txt"));
      for (const auto& point : points) {
        if (point.error.empty()) continue;
        for (const auto& [p, v] : point.assignment) fo << p << '=' << v << ' ';
        fo << "error: " << point.error << '\n';
      }
    }
  }
  return points;
}

std::vector<CompareProducts> compare_experiment(const RunConfig& cfg,
                                                bool write_files) {
  cfg.bath.validate();
  const ElectronSystem sys = cfg.electron_system();
  const fs::path out_dir = resolved_output_dir(cfg);
  const BathConfiguration bath = generate_bath(cfg.bath, sys.positions_a);
  warn_pure_dephasing(cfg, sys, bath);

  std::vector<CompareProducts> all;
  for (const int pulses : cfg.pulses) {
    CompareProducts cmp;
    cmp.pulses = pulses;
    const double t_max = resolve_time_max(cfg, pulses);
    cmp.times_s = linear_grid(t_max, cfg.time_points);
    cmp.gcce = gcce_coherence(sys, bath, PulseSequence{pulses}, cmp.times_s,
                              gcce_options(cfg, pulses));
    if (bath.size() == 0) {
      cmp.reference.times_s = cmp.times_s;
      for (auto& v : cmp.reference.modulus) v.assign(cmp.times_s.size(), 1.0);
      for (auto& v : cmp.reference.flagged) v.assign(cmp.times_s.size(), 0);
    } else if (pulses == 0) {
      cmp.reference = fid_analytic_series(sys, bath, cmp.times_s);
    } else {
      const NuclearProductState state = sample_initial_state(
          bath, derive_seed(cfg.bath.master_seed, kPcaStateStream));
      cmp.reference = pca_hahn_coherences(sys, bath, state, cmp.times_s);
    }

    if (write_files) {
      const std::string id = run_id(cfg, pulses);
      auto os = open_out(out_dir / (id + "_compare.csv"));
      os << "t_s";
      for (const auto* name : kPairNames)
        os << ",gcce_" << name << ",ref_" << name << ",diff_" << name;
      os << '\n';
      for (std::size_t t = 0; t < cmp.times_s.size(); ++t) {
        os << fmt(cmp.times_s[t]);
        for (std::size_t p = 0; p < 6; ++p) {
          const double a = cmp.gcce.modulus[p][t];
          const double b = cmp.reference.modulus[p][t];
          os << ',' << fmt(a) << ',' << fmt(b) << ',' << fmt(std::abs(a - b));
        }
        os << '\n';
      }
      auto summary = open_out(out_dir / (id + "_compare_summary.csv"));
      summary << "pair,max_abs_diff,rms_diff\n";
      for (std::size_t p = 0; p < 6; ++p) {
        double mx = 0.0, acc = 0.0;
        for (std::size_t t = 0; t < cmp.times_s.size(); ++t) {
          const double d =
              std::abs(cmp.gcce.modulus[p][t] - cmp.reference.modulus[p][t]);
          mx = std::max(mx, d);
          acc += d * d;
        }
        summary << kPairNames[p] << ',' << fmt(mx) << ','
                << fmt(std::sqrt(acc / cmp.times_s.size())) << '\n';
      }
    }
    all.push_back(std::move(cmp));
  }
  return all;
}

BathConfiguration generate_bath_product(const RunConfig& cfg,
                                        bool write_files) {
  cfg.bath.validate();
  const ElectronSystem sys = cfg.electron_system();
  const BathConfiguration bath = generate_bath(cfg.bath, sys.positions_a);
  if (bath.empty_region_warning)
    std::fprintf(stderr,
                 "warning: %s: exclusion radius leaves no accessible volume; "
                 "bath is empty\n",
                 cfg.id.c_str());
  if (write_files) {
    auto os = open_out(resolved_output_dir(cfg) / (cfg.id + "_bath.txt"));
    save_bath_table(os, bath);
  }
  return bath;
}

void field_map_product(const RunConfig& cfg, bool write_files) {
  const ElectronSystem sys = cfg.electron_system();
  const fs::path out_dir = resolved_output_dir(cfg);

  if (cfg.fieldmap.map == "fk_ce_grid") {
    if (!write_files) return;
    auto os = open_out(out_dir / (cfg.id + "_fk_ce.csv"));
    os << "c_hz,e_hz,f_k,g_k\n";
    const int n = cfg.fieldmap.grid_points;
    for (int ie = 0; ie < n; ++ie)
      for (int ic = 0; ic < n; ++ic) {
        const double c =
            cfg.fieldmap.c_max_hz * (2.0 * ic / (n - 1) - 1.0);
        const double e =
            cfg.fieldmap.e_max_hz * (2.0 * ie / (n - 1) - 1.0);
        os << fmt(c) << ',' << fmt(e) << ','
           << fmt(pair_decoherence_fk(c, e, cfg.fieldmap.detuning_hz,
                                      cfg.fieldmap.tau_s))
           << ','
           << fmt(pair_decoherence_gk(c, e, cfg.fieldmap.detuning_hz,
                                      cfg.fieldmap.tau_s))
           << '\n';
      }
    return;
  }

  const FieldMapGrid grid =
      field_maps(sys, cfg.fieldmap.extent_a, cfg.fieldmap.spacing_a,
                 cfg.bath.min_electron_distance_a);
  if (!write_files) return;
  auto abs_os = open_out(out_dir / (cfg.id + "_fieldmap_abs.csv"));
  abs_os << "x_angstrom,z_angstrom,value\n";
  auto grad_os = open_out(out_dir / (cfg.id + "_fieldmap_grad.csv"));
  grad_os << "x_angstrom,z_angstrom,value\n";
  auto vec_os = open_out(out_dir / (cfg.id + "_fieldmap_gradvec.csv"));
  vec_os << "x_angstrom,z_angstrom,gx_hz_per_a,gz_hz_per_a\n";
  for (std::size_t i = 0; i < grid.x_a.size(); ++i) {
    abs_os << fmt(grid.x_a[i]) << ',' << fmt(grid.z_a[i]) << ','
           << fmt(grid.abs_sum_hz[i]) << '\n';
    grad_os << fmt(grid.x_a[i]) << ',' << fmt(grid.z_a[i]) << ','
            << fmt(grid.grad_hz_per_a[i].norm()) << '\n';
    vec_os << fmt(grid.x_a[i]) << ',' << fmt(grid.z_a[i]) << ','
           << fmt(grid.grad_hz_per_a[i].x()) << ','
           << fmt(grid.grad_hz_per_a[i].y()) << '\n';
  }
}

PairStatistics pair_stats_product(const RunConfig& cfg, bool write_files) {
  cfg.bath.validate();
  const ElectronSystem sys = cfg.electron_system();
  const BathConfiguration bath = generate_bath(cfg.bath, sys.positions_a);
  const NuclearProductState state =
      sample_initial_state(bath, derive_seed(cfg.bath.master_seed,
                                             cfg.pairstats.state_seed));
  const PairStatistics stats = pair_statistics(
      sys, bath, state, cfg.pairstats.tau_s, cfg.pairstats.threshold,
      cfg.pairstats.measure == "g", cfg.pairstats.bins);

  if (write_files) {
    const fs::path out_dir = resolved_output_dir(cfg);
    auto os = open_out(out_dir / (cfg.id + "_pairs.csv"));
    os << "n,m,R_angstrom,theta_deg,C_hz,E_hz,D_hz,f_k\n";
    for (const auto& rec : stats.contributing)
      os << rec.n << ',' << rec.m << ',' << fmt(rec.r_a) << ','
         << fmt(rec.theta_deg) << ',' << fmt(rec.c_hz) << ',' << fmt(rec.e_hz)
         << ',' << fmt(rec.d_hz) << ',' << fmt(rec.measure) << '\n';
    auto hist = open_out(out_dir / (cfg.id + "_pair_angle_hist.csv"));
    hist << "theta_deg,count\n";
    for (std::size_t b = 0; b < stats.histogram.size(); ++b)
      hist << fmt((b + 0.5) * stats.bin_width_deg) << ','
           << stats.histogram[b] << '\n';
  }
  return stats;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"nuclear-bath decoherence of two exchange-coupled electron "
               "spins"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int workers_override = -1;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment configuration file")
        ->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--workers", workers_override, "worker thread count");
  };

  CLI::App* cmd_generate = app.add_subcommand(
      "generate-bath", "generate and write one bath configuration");
  CLI::App* cmd_run = app.add_subcommand(
      "run", "ensemble coherence decay plus stretched-exponential fits");
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "parameter sweep of coherence times");
  CLI::App* cmd_compare = app.add_subcommand(
      "compare", "expansion vs closed-form overlays on one configuration");
  CLI::App* cmd_fieldmap = app.add_subcommand(
      "field-map", "hyperfine field maps or pair-decoherence grids");
  CLI::App* cmd_pairstats = app.add_subcommand(
      "pair-stats", "contributing flip-flop pairs and angle histogram");
  for (CLI::App* sub : {cmd_generate, cmd_run, cmd_sweep, cmd_compare,
                        cmd_fieldmap, cmd_pairstats})
    add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = parse_config_file(config_path);
    if (seed_set) cfg.bath.master_seed = seed_override;
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (workers_override >= 0) cfg.workers = workers_override;
    if (const char* env = std::getenv("WORKERS");
        env && *env && workers_override < 0)
      cfg.workers = std::atoi(env);

    if (cmd_generate->parsed()) {
      generate_bath_product(cfg);
    } else if (cmd_run->parsed()) {
      run_experiment(cfg);
    } else if (cmd_sweep->parsed()) {
      const auto points = sweep_experiment(cfg);
      std::size_t failures = 0;
      for (const auto& p : points) failures += !p.error.empty();
      if (failures == points.size())
        throw RunError("every sweep point failed");
      if (failures > 0)
        std::fprintf(stderr, "sweep finished with %zu failed points\n",
                     failures);
    } else if (cmd_compare->parsed()) {
      compare_experiment(cfg);
    } else if (cmd_fieldmap->parsed()) {
      field_map_product(cfg);
    } else if (cmd_pairstats->parsed()) {
      pair_stats_product(cfg);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "ERROR kind=config message=\"%s\"\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ERROR kind=run message=\"%s\"\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace spinbath
