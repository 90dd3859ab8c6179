#include "spinbath/bath.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "spinbath/constants.hpp"
#include "spinbath/errors.hpp"
#include "spinbath/rng.hpp"

namespace spinbath {

namespace {

constexpr std::size_t kProposalBudget = 1000000;

double sphere_volume(double r) {
  return 4.0 / 3.0 * constants::kPi * r * r * r;
}

// Volume of the union of two equal spheres with centers d apart.
double union_volume(double r, double d) {
  if (r <= 0.0) return 0.0;
  if (d >= 2.0 * r) return 2.0 * sphere_volume(r);
  const double lens =
      constants::kPi * (4.0 * r + d) * (2.0 * r - d) * (2.0 * r - d) / 12.0;
  return 2.0 * sphere_volume(r) - lens;
}

struct HashGrid {
  double cell;
  std::map<std::array<long, 3>, std::vector<int>> cells;

  explicit HashGrid(double cell_size) : cell(cell_size) {}

  std::array<long, 3> key(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x() / cell)),
            static_cast<long>(std::floor(p.y() / cell)),
            static_cast<long>(std::floor(p.z() / cell))};
  }

  bool too_close(const Vec3& p, const std::vector<NuclearSite>& sites,
                 double min_dist) const {
    const auto k = key(p);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == cells.end()) continue;
          for (int idx : it->second) {
            if ((sites[idx].position_a - p).norm() < min_dist) return true;
          }
        }
    return false;
  }

  void insert(const Vec3& p, int idx) { cells[key(p)].push_back(idx); }
};

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void BathSpec::validate() const {
  if (!(density_per_a3 >= 0.0))
    throw DomainError("bath density must be >= 0");
  if (!(min_electron_distance_a > 0.0))
    throw DomainError("min electron-site distance R_S must be > 0");
  if (!(min_nuclear_spacing_a >= 0.0))
    throw DomainError("min site spacing R_B must be >= 0");
  if (!(bath_radius_a > 0.0))
    throw DomainError("bath truncation radius must be > 0");
}

double accessible_volume_a3(const BathSpec& spec,
                            const std::array<Vec3, 2>& electrons) {
  const double d = (electrons[0] - electrons[1]).norm();
  const double v = union_volume(spec.bath_radius_a, d) -
                   union_volume(std::min(spec.min_electron_distance_a,
                                         spec.bath_radius_a),
                                d);
  return std::max(v, 0.0);
}

BathConfiguration generate_bath(const BathSpec& spec,
                                const std::array<Vec3, 2>& electrons) {
  spec.validate();
  if ((electrons[0] - electrons[1]).norm() == 0.0)
    throw DomainError("electron positions must be distinct");

  BathConfiguration config;
  config.spec = spec;
  config.electron_positions_a = electrons;

  const double volume = accessible_volume_a3(spec, electrons);
  const auto target =
      static_cast<std::size_t>(std::llround(spec.density_per_a3 * volume));
  if (target == 0) {
    config.empty_region_warning =
        spec.density_per_a3 > 0.0 &&
        spec.min_electron_distance_a >= spec.bath_radius_a;
    return config;
  }

  // Bounding box of the two bath spheres.
  Vec3 lo = electrons[0].cwiseMin(electrons[1]).array() - spec.bath_radius_a;
  Vec3 hi = electrons[0].cwiseMax(electrons[1]).array() + spec.bath_radius_a;

  Rng rng(derive_seed(spec.master_seed, spec.config_index));
  const double grid_cell = spec.min_nuclear_spacing_a > 0.0
                               ? spec.min_nuclear_spacing_a
                               : spec.bath_radius_a;
  HashGrid grid(grid_cell);
  config.sites.reserve(target);

  std::size_t proposals = 0;
  while (config.sites.size() < target) {
    if (++proposals > kProposalBudget) {
      throw ConstraintError(
          "bath generation exhausted its rejection budget; target density "
          "unachievable under the spacing constraints");
    }
    Vec3 p{rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
           rng.uniform(lo.z(), hi.z())};
    const double r0 = (p - electrons[0]).norm();
    const double r1 = (p - electrons[1]).norm();
    if (r0 > spec.bath_radius_a && r1 > spec.bath_radius_a) continue;
    if (r0 < spec.min_electron_distance_a || r1 < spec.min_electron_distance_a)
      continue;
    if (spec.min_nuclear_spacing_a > 0.0 &&
        grid.too_close(p, config.sites, spec.min_nuclear_spacing_a))
      continue;
    grid.insert(p, static_cast<int>(config.sites.size()));
    config.sites.push_back({p, constants::kGammaProtonHzPerT});
  }
  return config;
}

BathDiagnostics validate_bath(const BathConfiguration& config) {
  BathDiagnostics diag;
  diag.site_count = config.sites.size();
  const auto& spec = config.spec;
  const auto& el = config.electron_positions_a;

  for (std::size_t i = 0; i < config.sites.size(); ++i) {
    const Vec3& p = config.sites[i].position_a;
    const double r0 = (p - el[0]).norm();
    const double r1 = (p - el[1]).norm();
    diag.min_electron_distance_a =
        std::min({diag.min_electron_distance_a, r0, r1});
    if (r0 < spec.min_electron_distance_a || r1 < spec.min_electron_distance_a)
      ++diag.electron_violations;
    if (std::min(r0, r1) > spec.bath_radius_a) ++diag.outside_region;
    for (std::size_t j = i + 1; j < config.sites.size(); ++j) {
      const double rij = (p - config.sites[j].position_a).norm();
      diag.min_site_spacing_a = std::min(diag.min_site_spacing_a, rij);
      if (rij < spec.min_nuclear_spacing_a) ++diag.spacing_violations;
    }
  }
  const double volume = accessible_volume_a3(spec, el);
  diag.realized_density_per_a3 =
      volume > 0.0 ? static_cast<double>(diag.site_count) / volume : 0.0;
  return diag;
}

void save_bath_table(std::ostream& os, const BathConfiguration& config) {
  std::string line = "# spinbath-table";
  const auto field = [&](const char* name, double v) {
    line += ' ';
    line += name;
    line += '=';
    format_double(line, v);
  };
  field("density_per_a3", config.spec.density_per_a3);
  field("min_electron_distance_a", config.spec.min_electron_distance_a);
  field("min_nuclear_spacing_a", config.spec.min_nuclear_spacing_a);
  field("bath_radius_a", config.spec.bath_radius_a);
  line += " master_seed=" + std::to_string(config.spec.master_seed);
  line += " config_index=" + std::to_string(config.spec.config_index);
  line += " empty_region_warning=";
  line += config.empty_region_warning ? '1' : '0';
  for (int e = 0; e < 2; ++e)
    for (int c = 0; c < 3; ++c) {
      line += ' ';
      line += 'e';
      line += static_cast<char>('1' + e);
      line += static_cast<char>('x' + c);
      line += '=';
      format_double(line, config.electron_positions_a[e][c]);
    }
  os << line << '\n';
  os << "x_angstrom y_angstrom z_angstrom gyromagnetic_hz_per_tesla\n";
  for (const auto& site : config.sites) {
    std::string row;
    format_double(row, site.position_a.x());
    row += ' ';
    format_double(row, site.position_a.y());
    row += ' ';
    format_double(row, site.position_a.z());
    row += ' ';
    format_double(row, site.gamma_hz_per_t);
    os << row << '\n';
  }
}

BathConfiguration load_bath_table(std::istream& is) {
  BathConfiguration config;
  std::string header;
  if (!std::getline(is, header) || header.rfind("# spinbath-table", 0) != 0)
    throw ConfigError("not a spinbath bath table: missing header");

  std::istringstream hs(header);
  std::string token;
  hs >> token >> token;  // skip "#" and "spinbath-table"
  std::istringstream rest(header.substr(header.find("table") + 5));
  while (rest >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos)
      throw ConfigError("malformed bath table header field: " + token);
    const std::string key = token.substr(0, eq);
    const std::string val = token.substr(eq + 1);
    if (key == "density_per_a3")
      config.spec.density_per_a3 = std::stod(val);
    else if (key == "min_electron_distance_a")
      config.spec.min_electron_distance_a = std::stod(val);
    else if (key == "min_nuclear_spacing_a")
      config.spec.min_nuclear_spacing_a = std::stod(val);
    else if (key == "bath_radius_a")
      config.spec.bath_radius_a = std::stod(val);
    else if (key == "master_seed")
      config.spec.master_seed = std::stoull(val);
    else if (key == "config_index")
      config.spec.config_index = static_cast<std::uint32_t>(std::stoul(val));
    else if (key == "empty_region_warning")
      config.empty_region_warning = val == "1";
    else if (key.size() == 3 && key[0] == 'e') {
      const int e = key[1] - '1';
      const int c = key[2] - 'x';
      if (e < 0 || e > 1 || c < 0 || c > 2)
        throw ConfigError("unknown bath table header field: " + key);
      config.electron_positions_a[e][c] = std::stod(val);
    } else {
      throw ConfigError("unknown bath table header field: " + key);
    }
  }

  std::string columns;
  std::getline(is, columns);  // column names
  std::string row;
  while (std::getline(is, row)) {
    if (row.empty()) continue;
    std::istringstream rs(row);
    NuclearSite site;
    if (!(rs >> site.position_a.x() >> site.position_a.y() >>
          site.position_a.z() >> site.gamma_hz_per_t))
      throw ConfigError("malformed bath table row: " + row);
    config.sites.push_back(site);
  }
  return config;
}

}  // namespace spinbath
