#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "spinbath/bath.hpp"
#include "spinbath/coherence.hpp"
#include "spinbath/hamiltonian.hpp"

namespace spinbath {

/// One sweep dimension: a declared parameter name and its value list. All
/// axes are numeric except `orientation`, whose values are orientation
/// tokens (parallel | perpendicular | angle in degrees).
struct SweepAxis {
  std::string parameter;
  std::vector<std::string> values;
};

struct FieldMapSettings {
  std::string map = "hyperfine";  // hyperfine | fk_ce_grid
  double extent_a = 20.0;
  double spacing_a = 0.5;
  // fk_ce_grid controls
  double tau_s = 20e-6;
  double detuning_hz = 5000.0;
  double c_max_hz = 3000.0;
  double e_max_hz = 40000.0;
  int grid_points = 81;
};

struct PairStatsSettings {
  double tau_s = 20e-6;
  double threshold = 1e-3;
  std::string measure = "f";  // f | g
  std::uint64_t state_seed = 1;
  int bins = 36;
};

/// Parsed experiment configuration. Defaults reproduce the reference
/// parameter point: J = 10 GHz, d = 5 A, R_S = 5 A, R_B = 2 A,
/// n_B = 0.01 / A^3, B = 1 T, electrons parallel to the field.
struct RunConfig {
  std::string id = "run";

  // [system]
  double exchange_hz = 1e10;
  double distance_a = 5.0;
  double field_t = 1.0;
  std::string orientation = "parallel";  // parallel | perpendicular | angle
  double angle_deg = 0.0;
  bool include_ee_dipolar = false;

  // [bath]
  BathSpec bath;

  // [gcce]
  int order_fid = 1;
  int order_hahn = 2;
  ClusterOptions clusters;

  // [run]
  std::vector<int> pulses = {0, 1};
  int time_points = 201;
  double time_max_s = 0.0;  // 0 = auto
  int ensemble_size = 20;
  int workers = 0;
  bool write_complex = false;
  std::string output_dir = "out";

  std::vector<SweepAxis> sweep;
  FieldMapSettings fieldmap;
  PairStatsSettings pairstats;

  // Populated by the parser in input order (section, key, value); the
  // serializer reproduces these verbatim so files round-trip.
  std::vector<std::array<std::string, 3>> raw_entries;

  double tilt_rad() const;
  ElectronSystem electron_system() const;

  // Copy with one swept parameter replaced; `value` uses the axis syntax.
  RunConfig with_parameter(const std::string& parameter,
                           const std::string& value) const;

  static const std::vector<std::string>& sweepable_parameters();
};

// Strict parser for the sectioned key-value format; unknown sections or keys
// raise ConfigError naming the offender. `name` seeds the run id when the
// file does not set one.
RunConfig parse_config(std::istream& is, const std::string& name = "run");
RunConfig parse_config_file(const std::string& path);

// Canonical serialization: the parse of a config re-serializes to the same
// text modulo comment and blank lines.
std::string serialize_config(const RunConfig& config);

}  // namespace spinbath
