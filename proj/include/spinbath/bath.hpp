#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace spinbath {

using Vec3 = Eigen::Vector3d;

/// Generation constraints for a random spin-1/2 proton bath.
struct BathSpec {
  double density_per_a3 = 0.01;         // n_B
  double min_electron_distance_a = 5.0; // R_S
  double min_nuclear_spacing_a = 2.0;   // R_B
  double bath_radius_a = 30.0;          // truncation radius around each electron
  std::uint64_t master_seed = 0;
  std::uint32_t config_index = 0;

  void validate() const;  // throws DomainError on violated invariants
};

struct NuclearSite {
  Vec3 position_a;
  double gamma_hz_per_t;  // spin is fixed 1/2
};

/// An immutable placed bath. Regenerating from (spec, electron_positions)
/// reproduces the site list bit for bit.
struct BathConfiguration {
  std::vector<NuclearSite> sites;
  BathSpec spec;
  std::array<Vec3, 2> electron_positions_a{Vec3::Zero(), Vec3::Zero()};
  // Set when R_S >= r_bath left no accessible volume for a nonzero density.
  bool empty_region_warning = false;

  std::size_t size() const { return sites.size(); }
};

struct BathDiagnostics {
  double min_site_spacing_a = std::numeric_limits<double>::infinity();
  double min_electron_distance_a = std::numeric_limits<double>::infinity();
  double realized_density_per_a3 = 0.0;
  std::size_t site_count = 0;
  std::size_t spacing_violations = 0;
  std::size_t electron_violations = 0;
  std::size_t outside_region = 0;

  bool ok() const {
    return spacing_violations == 0 && electron_violations == 0 &&
           outside_region == 0;
  }
};

// Volume of the sampling region (union of the two bath spheres) minus the
// R_S exclusion balls, in cubic angstrom.
double accessible_volume_a3(const BathSpec& spec,
                            const std::array<Vec3, 2>& electrons);

// Places round(n_B * accessible volume) protons uniformly in the accessible
// region by rejection sampling with a spatial hash for neighbour checks.
// Throws ConstraintError once the proposal budget (1e6) is exhausted.
BathConfiguration generate_bath(const BathSpec& spec,
                                const std::array<Vec3, 2>& electron_positions);

// Reports constraint violations without mutating the configuration.
BathDiagnostics validate_bath(const BathConfiguration& config);

// Plain-text site table; one site per line, header carries the spec fields.
// Values are written with 17 significant digits so the table round-trips
// exactly.
void save_bath_table(std::ostream& os, const BathConfiguration& config);
BathConfiguration load_bath_table(std::istream& is);

}  // namespace spinbath
