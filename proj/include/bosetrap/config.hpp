#pragma once

// Run configuration: a JSON document with nested sections. Unknown keys are
// errors, and every violation is collected before any computation starts.

#include "bosetrap/cgbasis.hpp"
#include "bosetrap/matelem.hpp"
#include "bosetrap/svm.hpp"
#include "bosetrap/twobody.hpp"
#include "bosetrap/units.hpp"

#include "json.hpp"

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bosetrap::config {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string s = "invalid configuration:";
    for (const auto& x : p) s += "\n  - " + x;
    return s;
  }
  std::vector<std::string> problems_;
};

enum class PotentialKind { none, gaussian, zero_range };

struct PotentialSpec {
  PotentialKind kind = PotentialKind::none;
  std::optional<double> v0_au;
  std::optional<double> target_a_au;
  double b_au = 11.65;
  double a_au = 0.0;
};

struct ObservablesSpec {
  int lmax = 4;
  int grid_points = 80;
  double r_min = 1e-5;
  double r_max = 10.0;
  int below = 2;
  int above = 4;
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"csv"};
};

struct RunConfig {
  double mass_amu = 86.909;
  double freq_hz = 77.87;
  PotentialSpec potential;
  int n_particles = 3;
  cgbasis::BasisFamily family = cgbasis::BasisFamily::pair;
  svm::SvmConfig svm;
  /// Sampling range of d; unset means the potential-dependent default.
  std::optional<double> d_min, d_max;
  std::string d_unit = "osc";
  ObservablesSpec observables;
  OutputSpec output;
};

namespace detail {

class Reader {
 public:
  std::vector<std::string> problems;

  void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
      problems.push_back(where + ": expected an object");
      return;
    }
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.count(key)) problems.push_back(where + ": unknown key '" + key + "'");
    }
  }

  template <class T>
  void get(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(where + "." + key + ": wrong type");
    }
  }

  template <class T>
  void get(const json& obj, const std::string& where, const char* key, std::optional<T>& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(where + "." + key + ": wrong type");
    }
  }

  void require(bool ok, const std::string& message) {
    if (!ok) problems.push_back(message);
  }
};

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  return root.contains(key) ? root.at(key) : empty;
}

}  // namespace detail

/// Parses and validates; throws ConfigError listing every problem found.
inline RunConfig parse(const json& root) {
  detail::Reader rd;
  RunConfig c;
  rd.check_keys(root, "config", {"system", "potential", "n_particles", "basis_family", "svm", "observables", "output"});
  if (!root.is_object()) throw ConfigError(rd.problems);

  const json& sys = detail::section(root, "system");
  rd.check_keys(sys, "system", {"mass_amu", "freq_hz"});
  rd.get(sys, "system", "mass_amu", c.mass_amu);
  rd.get(sys, "system", "freq_hz", c.freq_hz);
  rd.require(c.mass_amu > 0.0, "system.mass_amu must be positive");
  rd.require(c.freq_hz > 0.0, "system.freq_hz must be positive");

  const json& pot = detail::section(root, "potential");
  rd.check_keys(pot, "potential", {"type", "V0_au", "target_a_au", "b_au", "a_au"});
  std::string type = "none";
  rd.get(pot, "potential", "type", type);
  if (type == "none") {
    c.potential.kind = PotentialKind::none;
  } else if (type == "gaussian") {
    c.potential.kind = PotentialKind::gaussian;
    rd.get(pot, "potential", "V0_au", c.potential.v0_au);
    rd.get(pot, "potential", "target_a_au", c.potential.target_a_au);
    rd.get(pot, "potential", "b_au", c.potential.b_au);
    rd.require(c.potential.v0_au.has_value() != c.potential.target_a_au.has_value(),
               "potential: give exactly one of V0_au and target_a_au");
    rd.require(c.potential.b_au > 0.0, "potential.b_au must be positive");
    if (c.potential.target_a_au) rd.require(*c.potential.target_a_au > 0.0, "potential.target_a_au must be positive");
    if (c.potential.v0_au) rd.require(*c.potential.v0_au <= 0.0, "potential.V0_au must not be positive");
    rd.require(!pot.contains("a_au"), "potential.a_au belongs to the zero_range model");
  } else if (type == "zero_range") {
    c.potential.kind = PotentialKind::zero_range;
    rd.require(pot.contains("a_au"), "potential.a_au is required for zero_range");
    rd.get(pot, "potential", "a_au", c.potential.a_au);
    for (const char* k : {"V0_au", "target_a_au", "b_au"}) {
      rd.require(!pot.contains(k), std::string("potential.") + k + " belongs to the gaussian model");
    }
  } else {
    rd.problems.push_back("potential.type must be one of none, gaussian, zero_range");
  }

  rd.get(root, "config", "n_particles", c.n_particles);
  rd.require(c.n_particles >= 2, "n_particles must be at least 2");
  std::string family = "pair";
  rd.get(root, "config", "basis_family", family);
  try {
    c.family = cgbasis::parse_family(family);
  } catch (const std::invalid_argument&) {
    rd.problems.push_back("basis_family must be one of full, pair, hyperradial");
  }
  c.svm.family = c.family;
  if (c.potential.kind == PotentialKind::zero_range) {
    rd.require(c.family == cgbasis::BasisFamily::hyperradial,
               "the zero_range model requires basis_family = hyperradial");
  }
  if (c.family == cgbasis::BasisFamily::full) {
    rd.require(c.n_particles <= cgbasis::max_full_orbit_particles, "the full family supports at most 8 particles");
  }

  const json& s = detail::section(root, "svm");
  rd.check_keys(s, "svm", {"k_max", "trials", "d_min", "d_max", "d_unit", "beta_allow_negative", "seed",
                           "energy_tol", "window", "threshold", "candidate_min_norm", "refine_sweeps",
                           "max_null_steps", "jobs"});
  rd.get(s, "svm", "k_max", c.svm.k_max);
  rd.get(s, "svm", "trials", c.svm.trials);
  rd.get(s, "svm", "d_min", c.d_min);
  rd.get(s, "svm", "d_max", c.d_max);
  rd.get(s, "svm", "d_unit", c.d_unit);
  rd.get(s, "svm", "beta_allow_negative", c.svm.beta_allow_negative);
  rd.get(s, "svm", "seed", c.svm.seed);
  rd.get(s, "svm", "energy_tol", c.svm.energy_tol);
  rd.get(s, "svm", "window", c.svm.window);
  rd.get(s, "svm", "threshold", c.svm.threshold);
  rd.get(s, "svm", "candidate_min_norm", c.svm.candidate_min_norm);
  rd.get(s, "svm", "refine_sweeps", c.svm.refine_sweeps);
  rd.get(s, "svm", "max_null_steps", c.svm.max_null_steps);
  rd.get(s, "svm", "jobs", c.svm.jobs);
  rd.require(c.svm.k_max >= 1, "svm.k_max must be at least 1");
  rd.require(c.svm.trials >= 1, "svm.trials must be at least 1");
  rd.require(c.svm.window >= 1, "svm.window must be at least 1");
  rd.require(c.svm.energy_tol > 0.0, "svm.energy_tol must be positive");
  rd.require(c.svm.threshold > 0.0 && c.svm.threshold < 1.0, "svm.threshold must lie in (0, 1)");
  rd.require(c.svm.candidate_min_norm >= 0.0 && c.svm.candidate_min_norm < 1.0,
             "svm.candidate_min_norm must lie in [0, 1)");
  rd.require(c.svm.refine_sweeps >= 0, "svm.refine_sweeps must be non-negative");
  rd.require(c.svm.max_null_steps >= 1, "svm.max_null_steps must be at least 1");
  rd.require(c.svm.jobs >= 1, "svm.jobs must be at least 1");
  rd.require(c.d_unit == "osc" || c.d_unit == "au", "svm.d_unit must be 'osc' or 'au'");
  rd.require(c.d_min.has_value() == c.d_max.has_value(), "svm: give both d_min and d_max or neither");
  if (c.d_min && c.d_max) {
    rd.require(*c.d_min > 0.0, "svm.d_min must be positive");
    rd.require(*c.d_min <= *c.d_max, "svm.d_min must not exceed svm.d_max");
  }

  const json& o = detail::section(root, "observables");
  rd.check_keys(o, "observables", {"lmax", "grid_points", "r_min", "r_max", "below", "above"});
  rd.get(o, "observables", "lmax", c.observables.lmax);
  rd.get(o, "observables", "grid_points", c.observables.grid_points);
  rd.get(o, "observables", "r_min", c.observables.r_min);
  rd.get(o, "observables", "r_max", c.observables.r_max);
  rd.get(o, "observables", "below", c.observables.below);
  rd.get(o, "observables", "above", c.observables.above);
  rd.require(c.observables.lmax >= 0, "observables.lmax must be non-negative");
  rd.require(c.observables.grid_points >= 2, "observables.grid_points must be at least 2");
  rd.require(c.observables.r_min > 0.0 && c.observables.r_min < c.observables.r_max,
             "observables: need 0 < r_min < r_max");
  rd.require(c.observables.below >= 0 && c.observables.above >= 0, "observables.below/above must be non-negative");

  const json& out = detail::section(root, "output");
  rd.check_keys(out, "output", {"directory", "formats"});
  rd.get(out, "output", "directory", c.output.directory);
  rd.get(out, "output", "formats", c.output.formats);
  rd.require(!c.output.directory.empty(), "output.directory must not be empty");
  for (const auto& f : c.output.formats) {
    rd.require(f == "csv" || f == "json", "output.formats: unknown format '" + f + "'");
  }

  if (!rd.problems.empty()) throw ConfigError(rd.problems);
  return c;
}

inline RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json root;
  try {
    root = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({path + ": " + e.what()});
  }
  return parse(root);
}

/// Everything a solve needs, in oscillator units.
struct ResolvedRun {
  RunConfig config;
  units::PhysicalSystem system;
  std::optional<twobody::GaussianPotential> gaussian;
  PotentialModel potential = PotentialModel::none();
  svm::SvmConfig svm;

  double reduced_mass() const { return 0.5 * system.mass(); }
};

/// Default sampling range (trap units): (b, 3 b_t) for the Gaussian well,
/// (0.1, 10) b_t otherwise.
inline std::pair<double, double> default_d_range(const RunConfig& c, const units::PhysicalSystem& s) {
  if (c.potential.kind == PotentialKind::gaussian) return {c.potential.b_au / s.trap_length(), 3.0};
  return {0.1, 10.0};
}

inline ResolvedRun resolve(const RunConfig& c) {
  ResolvedRun r{c, units::make_system(c.mass_amu, c.freq_hz), std::nullopt, PotentialModel::none(), c.svm};
  switch (c.potential.kind) {
    case PotentialKind::none: break;
    case PotentialKind::gaussian: {
      twobody::GaussianPotential g{0.0, c.potential.b_au};
      if (c.potential.v0_au) {
        g.depth = *c.potential.v0_au;
      } else {
        g = twobody::tune_strength(c.potential.b_au, *c.potential.target_a_au, r.reduced_mass());
      }
      r.gaussian = g;
      r.potential = PotentialModel::from_gaussian(g, r.system);
      break;
    }
    case PotentialKind::zero_range:
      r.potential = PotentialModel::from_zero_range(c.potential.a_au, r.system);
      break;
  }
  auto [lo, hi] = default_d_range(c, r.system);
  if (c.d_min) {
    const double scale = c.d_unit == "au" ? 1.0 / r.system.trap_length() : 1.0;
    lo = *c.d_min * scale;
    hi = *c.d_max * scale;
  }
  r.svm.d_min = lo;
  r.svm.d_max = hi;
  r.svm.family = c.family;
  r.svm.validate();
  return r;
}

/// Fully resolved echo of a run, embedded in every output.
inline json echo(const ResolvedRun& r) {
  json pot;
  switch (r.config.potential.kind) {
    case PotentialKind::none: pot = {{"type", "none"}}; break;
    case PotentialKind::gaussian:
      pot = {{"type", "gaussian"}, {"V0_au", r.gaussian->depth}, {"b_au", r.gaussian->range}};
      if (r.config.potential.target_a_au) pot["target_a_au"] = *r.config.potential.target_a_au;
      break;
    case PotentialKind::zero_range: pot = {{"type", "zero_range"}, {"a_au", r.config.potential.a_au}}; break;
  }
  json s = svm::config_to_json(r.svm);
  s["jobs"] = r.svm.jobs;
  return {{"system",
           {{"mass_amu", r.config.mass_amu},
            {"freq_hz", r.config.freq_hz},
            {"trap_length_au", r.system.trap_length()},
            {"energy_quantum_au", r.system.energy_quantum()}}},
          {"potential", pot},
          {"n_particles", r.config.n_particles},
          {"basis_family", cgbasis::to_string(r.config.family)},
          {"svm", s},
          {"observables",
           {{"lmax", r.config.observables.lmax},
            {"grid_points", r.config.observables.grid_points},
            {"r_min", r.config.observables.r_min},
            {"r_max", r.config.observables.r_max},
            {"below", r.config.observables.below},
            {"above", r.config.observables.above}}},
          {"output", {{"directory", r.config.output.directory}, {"formats", r.config.output.formats}}}};
}

}  // namespace bosetrap::config
