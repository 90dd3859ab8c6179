#include "spinbath/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "spinbath/errors.hpp"

namespace spinbath {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not a number: " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': not an integer: " + value);
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': not a boolean: " + value);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double orientation_tilt_rad(const std::string& orientation, double angle_deg) {
  if (orientation == "parallel") return 0.0;
  if (orientation == "perpendicular") return 0.5 * constants::kPi;
  if (orientation == "angle") return angle_deg * constants::kPi / 180.0;
  throw ConfigError("unknown orientation: " + orientation);
}

}  // namespace

double RunConfig::tilt_rad() const {
  return orientation_tilt_rad(orientation, angle_deg);
}

ElectronSystem RunConfig::electron_system() const {
  ElectronSystem sys = ElectronSystem::from_geometry(distance_a, tilt_rad());
  sys.exchange_hz = exchange_hz;
  sys.field_t = field_t;
  sys.include_ee_dipolar = include_ee_dipolar;
  return sys;
}

const std::vector<std::string>& RunConfig::sweepable_parameters() {
  static const std::vector<std::string> names = {
      "field_tesla",
      "exchange_hz",
      "distance_angstrom",
      "min_electron_distance_angstrom",
      "min_nuclear_spacing_angstrom",
      "density_per_angstrom3",
      "orientation",
  };
  return names;
}

RunConfig RunConfig::with_parameter(const std::string& parameter,
                                    const std::string& value) const {
  RunConfig out = *this;
  out.raw_entries.clear();
  if (parameter == "field_tesla") {
    out.field_t = parse_double(parameter, value);
  } else if (parameter == "exchange_hz") {
    out.exchange_hz = parse_double(parameter, value);
  } else if (parameter == "distance_angstrom") {
    out.distance_a = parse_double(parameter, value);
  } else if (parameter == "min_electron_distance_angstrom") {
    out.bath.min_electron_distance_a = parse_double(parameter, value);
  } else if (parameter == "min_nuclear_spacing_angstrom") {
    out.bath.min_nuclear_spacing_a = parse_double(parameter, value);
  } else if (parameter == "density_per_angstrom3") {
    out.bath.density_per_a3 = parse_double(parameter, value);
  } else if (parameter == "orientation") {
    if (value == "parallel" || value == "perpendicular") {
      out.orientation = value;
    } else {
      out.orientation = "angle";
      out.angle_deg = parse_double(parameter, value);
    }
  } else {
    throw ConfigError("unknown sweep parameter: " + parameter);
  }
  return out;
}

RunConfig parse_config(std::istream& is, const std::string& name) {
  RunConfig cfg;
  cfg.id = name;

  using Setter = std::function<void(RunConfig&, const std::string&,
                                    const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"run",
       {
           {"id", [](RunConfig& c, const std::string&, const std::string& v) {
              c.id = v;
            }},
           {"pulses",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pulses.clear();
              for (const auto& tok : split_tokens(v)) {
                const long long n = parse_int(k, tok);
                if (n != 0 && n != 1)
                  throw ConfigError("config key 'pulses': only 0 and 1 are "
                                    "supported");
                c.pulses.push_back(static_cast<int>(n));
              }
              if (c.pulses.empty())
                throw ConfigError("config key 'pulses': empty list");
            }},
           {"time_points",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.time_points = static_cast<int>(parse_int(k, v));
              if (c.time_points < 4)
                throw ConfigError("config key 'time_points': need >= 4");
            }},
           {"time_max_s",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.time_max_s = v == "auto" ? 0.0 : parse_double(k, v);
            }},
           {"ensemble_size",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.ensemble_size = static_cast<int>(parse_int(k, v));
              if (c.ensemble_size < 1)
                throw ConfigError("config key 'ensemble_size': need >= 1");
            }},
           {"workers",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.workers = static_cast<int>(parse_int(k, v));
            }},
           {"write_complex",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.write_complex = parse_bool(k, v);
            }},
           {"output_dir",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.output_dir = v;
            }},
       }},
      {"system",
       {
           {"exchange_hz",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.exchange_hz = parse_double(k, v);
            }},
           {"distance_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.distance_a = parse_double(k, v);
            }},
           {"field_tesla",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.field_t = parse_double(k, v);
            }},
           {"orientation",
            [](RunConfig& c, const std::string&, const std::string& v) {
              if (v != "parallel" && v != "perpendicular" && v != "angle")
                throw ConfigError(
                    "config key 'orientation': expected parallel, "
                    "perpendicular or angle, got " + v);
              c.orientation = v;
            }},
           {"angle_deg",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.angle_deg = parse_double(k, v);
            }},
           {"include_ee_dipolar",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.include_ee_dipolar = parse_bool(k, v);
            }},
       }},
      {"bath",
       {
           {"density_per_angstrom3",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.bath.density_per_a3 = parse_double(k, v);
            }},
           {"min_electron_distance_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.bath.min_electron_distance_a = parse_double(k, v);
            }},
           {"min_nuclear_spacing_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.bath.min_nuclear_spacing_a = parse_double(k, v);
            }},
           {"bath_radius_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.bath.bath_radius_a = parse_double(k, v);
            }},
           {"master_seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.bath.master_seed = std::stoull(v);
              } catch (const std::exception&) {
                throw ConfigError("config key '" + k +
                                  "': not an unsigned integer: " + v);
              }
            }},
       }},
      {"gcce",
       {
           {"order_fid",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.order_fid = static_cast<int>(parse_int(k, v));
            }},
           {"order_hahn",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.order_hahn = static_cast<int>(parse_int(k, v));
            }},
           {"pair_cutoff_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.clusters.pair_cutoff_a = parse_double(k, v);
            }},
           {"triple_cutoff_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.clusters.triple_cutoff_a = parse_double(k, v);
            }},
           {"min_pair_coupling_hz",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.clusters.min_pair_coupling_hz = parse_double(k, v);
            }},
       }},
      {"fieldmap",
       {
           {"map",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v != "hyperfine" && v != "fk_ce_grid")
                throw ConfigError("config key '" + k +
                                  "': expected hyperfine or fk_ce_grid");
              c.fieldmap.map = v;
            }},
           {"extent_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.extent_a = parse_double(k, v);
            }},
           {"spacing_angstrom",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.spacing_a = parse_double(k, v);
            }},
           {"tau_s",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.tau_s = parse_double(k, v);
            }},
           {"detuning_hz",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.detuning_hz = parse_double(k, v);
            }},
           {"c_max_hz",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.c_max_hz = parse_double(k, v);
            }},
           {"e_max_hz",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.e_max_hz = parse_double(k, v);
            }},
           {"grid_points",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.fieldmap.grid_points = static_cast<int>(parse_int(k, v));
            }},
       }},
      {"pairstats",
       {
           {"tau_s",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pairstats.tau_s = parse_double(k, v);
            }},
           {"threshold",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pairstats.threshold = parse_double(k, v);
            }},
           {"measure",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v != "f" && v != "g")
                throw ConfigError("config key '" + k + "': expected f or g");
              c.pairstats.measure = v;
            }},
           {"state_seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              try {
                c.pairstats.state_seed = std::stoull(v);
              } catch (const std::exception&) {
                throw ConfigError("config key '" + k +
                                  "': not an unsigned integer: " + v);
              }
            }},
           {"bins",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.pairstats.bins = static_cast<int>(parse_int(k, v));
            }},
       }},
  };

  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) +
                          ": malformed section header: " + text);
      section = trim(text.substr(1, text.size() - 2));
      if (section != "sweep" && schema.find(section) == schema.end())
        throw ConfigError("unknown config section: [" + section + "]");
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value: " + text);
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config key '" + key + "' appears before any section");

    if (section == "sweep") {
      const auto& names = RunConfig::sweepable_parameters();
      if (std::find(names.begin(), names.end(), key) == names.end())
        throw ConfigError("unknown sweep parameter: " + key);
      SweepAxis axis;
      axis.parameter = key;
      axis.values = split_tokens(value);
      if (axis.values.empty())
        throw ConfigError("sweep axis '" + key + "' has no values");
      cfg.sweep.push_back(std::move(axis));
    } else {
      const auto& keys = schema.at(section);
      const auto it = keys.find(key);
      if (it == keys.end())
        throw ConfigError("unknown config key '" + key + "' in section [" +
                          section + "]");
      it->second(cfg, key, value);
    }
    cfg.raw_entries.push_back({section, key, value});
  }
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return parse_config(is, name);
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  if (!config.raw_entries.empty()) {
    std::string section;
    for (const auto& [sec, key, value] : config.raw_entries) {
      if (sec != section) {
        section = sec;
        out += "[" + section + "]\n";
      }
      out += key + " = " + value + "\n";
    }
    return out;
  }

  out += "[run]\n";
  out += "id = " + config.id + "\n";
  out += "pulses =";
  for (int n : config.pulses) out += " " + std::to_string(n);
  out += "\n";
  out += "time_points = " + std::to_string(config.time_points) + "\n";
  out += "time_max_s = " + (config.time_max_s > 0.0
                                ? format_double(config.time_max_s)
                                : std::string("auto")) + "\n";
  out += "ensemble_size = " + std::to_string(config.ensemble_size) + "\n";
  out += "workers = " + std::to_string(config.workers) + "\n";
  out += std::string("write_complex = ") +
         (config.write_complex ? "true" : "false") + "\n";
  out += "output_dir = " + config.output_dir + "\n";
  out += "[system]\n";
  out += "exchange_hz = " + format_double(config.exchange_hz) + "\n";
  out += "distance_angstrom = " + format_double(config.distance_a) + "\n";
  out += "field_tesla = " + format_double(config.field_t) + "\n";
  out += "orientation = " + config.orientation + "\n";
  out += "angle_deg = " + format_double(config.angle_deg) + "\n";
  out += std::string("include_ee_dipolar = ") +
         (config.include_ee_dipolar ? "true" : "false") + "\n";
  out += "[bath]\n";
  out += "density_per_angstrom3 = " + format_double(config.bath.density_per_a3) + "\n";
  out += "min_electron_distance_angstrom = " +
         format_double(config.bath.min_electron_distance_a) + "\n";
  out += "min_nuclear_spacing_angstrom = " +
         format_double(config.bath.min_nuclear_spacing_a) + "\n";
  out += "bath_radius_angstrom = " + format_double(config.bath.bath_radius_a) + "\n";
  out += "master_seed = " + std::to_string(config.bath.master_seed) + "\n";
  out += "[gcce]\n";
  out += "order_fid = " + std::to_string(config.order_fid) + "\n";
  out += "order_hahn = " + std::to_string(config.order_hahn) + "\n";
  out += "pair_cutoff_angstrom = " +
         format_double(config.clusters.pair_cutoff_a) + "\n";
  out += "triple_cutoff_angstrom = " +
         format_double(config.clusters.triple_cutoff_a) + "\n";
  out += "min_pair_coupling_hz = " +
         format_double(config.clusters.min_pair_coupling_hz) + "\n";
  if (!config.sweep.empty()) {
    out += "[sweep]\n";
    for (const auto& axis : config.sweep) {
      out += axis.parameter + " =";
      for (const auto& v : axis.values) out += " " + v;
      out += "\n";
    }
  }
  return out;
}

}  // namespace spinbath
