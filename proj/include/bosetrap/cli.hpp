#pragma once

// Subcommands behind the `bosetrap` executable. Every output file carries the
// resolved configuration and code version in its header and is written
// atomically (temporary file, then rename).

#include "bosetrap/config.hpp"
#include "bosetrap/eigensolve.hpp"
#include "bosetrap/matelem.hpp"
#include "bosetrap/observables.hpp"
#include "bosetrap/reference.hpp"
#include "bosetrap/svm.hpp"
#include "bosetrap/twobody.hpp"
#include "bosetrap/units.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef BOSETRAP_VERSION
#define BOSETRAP_VERSION "0.1.0"
#endif

namespace bosetrap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* version = BOSETRAP_VERSION;

// ---------------------------------------------------------------------------
// Output plumbing.

inline void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string num(double x, int digits = 12) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  json metadata = json::object();

  void add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("Table: row width mismatch");
    rows.push_back(std::move(row));
  }

  /// Metadata as '#'-prefixed lines, then an RFC 4180 body.
  std::string to_csv() const {
    std::ostringstream out;
    json meta = metadata;
    meta["version"] = version;
    out << "# " << meta.dump() << "\r\n";
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << csv_field(r[i]);
      out << "\r\n";
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out.str();
  }

  json to_json() const {
    json body = json::array();
    for (const auto& r : rows) {
      json o = json::object();
      for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
      body.push_back(o);
    }
    json meta = metadata;
    meta["version"] = version;
    return {{"metadata", meta}, {"rows", body}};
  }
};

inline void write_table(const fs::path& dir, const std::string& stem, const Table& t,
                        const std::vector<std::string>& formats = {"csv"}) {
  for (const auto& f : formats) {
    if (f == "csv") atomic_write(dir / (stem + ".csv"), t.to_csv());
    if (f == "json") atomic_write(dir / (stem + ".json"), t.to_json().dump(2) + "\n");
  }
}

struct Options {
  std::optional<std::string> config_path;
  std::optional<fs::path> out;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> checkpoint;
  bool sweep = false;
  bool quiet = false;
  std::ostream* log = &std::cerr;
};

inline config::RunConfig load_config(const Options& o) {
  config::RunConfig c = o.config_path ? config::load(*o.config_path) : config::RunConfig{};
  if (o.jobs) {
    if (*o.jobs < 1) throw config::ConfigError({"--jobs must be at least 1"});
    c.svm.jobs = *o.jobs;
  }
  if (o.seed) c.svm.seed = *o.seed;
  if (o.out) c.output.directory = o.out->string();
  return c;
}

inline void say(const Options& o, const std::string& s) {
  if (!o.quiet && o.log) *o.log << s << '\n';
}

/// Exit codes: 0 success / converged, 2 finished unconverged, 1 error.
enum ExitCode { ok = 0, failure = 1, unconverged = 2 };

// ---------------------------------------------------------------------------
// tune

inline void add_tune_row(Table& t, const twobody::GaussianPotential& g, double mu,
                         std::optional<double> reference_a = std::nullopt) {
  const auto s = twobody::summarize(g, mu);
  std::vector<std::string> row{num(g.depth), num(s.scattering_length), num(s.effective_range),
                               s.bound_energies.empty() ? "" : num(s.bound_energies.front()),
                               std::to_string(s.n_bound)};
  if (t.columns.size() > 5) {
    row.push_back(reference_a ? num(*reference_a) : "");
    row.push_back(reference_a ? num(s.scattering_length / *reference_a - 1.0) : "");
  }
  t.add(row);
}

inline Table tune_table(const config::RunConfig& c, bool sweep) {
  const auto sys = units::make_system(c.mass_amu, c.freq_hz);
  const double mu = 0.5 * sys.mass();
  Table t;
  t.columns = {"V0_au", "a_au", "r_e_au", "E_bound_au", "n_bound"};
  t.metadata["reduced_mass_au"] = mu;
  t.metadata["b_au"] = c.potential.b_au;
  if (sweep) {
    t.columns.insert(t.columns.end(), {"a_reference_au", "a_rel_deviation"});
    for (const auto& row : reference::table2) {
      add_tune_row(t, {row.v0_au, c.potential.b_au}, mu, row.a_au);
    }
    return t;
  }
  if (c.potential.kind != config::PotentialKind::gaussian) {
    throw config::ConfigError({"tune needs a gaussian potential"});
  }
  twobody::GaussianPotential g{c.potential.v0_au.value_or(0.0), c.potential.b_au};
  if (c.potential.target_a_au) g = twobody::tune_strength(c.potential.b_au, *c.potential.target_a_au, mu);
  add_tune_row(t, g, mu);
  return t;
}

inline int cmd_tune(const Options& o) {
  const auto c = load_config(o);
  const auto t = tune_table(c, o.sweep);
  write_table(c.output.directory, "tune", t, c.output.formats);
  say(o, "wrote " + (fs::path(c.output.directory) / "tune.csv").string());
  return ok;
}

// ---------------------------------------------------------------------------
// solve / spectrum

struct SolveResult {
  config::ResolvedRun run;
  std::unique_ptr<matelem::HamiltonianEngine> engine;
  std::unique_ptr<svm::SvmState> state;
  svm::RunStatus status = svm::RunStatus::running;
  double seconds = 0.0;
};

inline Table spectrum_table(const eigensolve::SpectrumResult& sp, const json& echo) {
  Table t;
  t.columns = {"index", "energy_hbar_omega", "is_negative", "is_bec"};
  t.metadata["config"] = echo;
  t.metadata["threshold"] = sp.threshold;
  t.metadata["retained_dim"] = sp.retained_dim;
  t.metadata["n_negative"] = sp.n_negative;
  t.metadata["bec_index"] = sp.bec_index;
  t.metadata["energy_convention"] = "total energy including the 3/2 centre-of-mass zero point";
  for (int i = 0; i < sp.size(); ++i) {
    t.add({std::to_string(i), num(sp.energies[i]), eigensolve::is_negative(sp.energies[i]) ? "1" : "0",
           i == sp.bec_index ? "1" : "0"});
  }
  return t;
}

inline Table history_table(const std::vector<svm::HistoryEntry>& h) {
  Table t;
  t.columns = {"step", "basis_size", "n_negative", "bec_energy", "accepted"};
  for (const auto& e : h) {
    t.add({std::to_string(e.step), std::to_string(e.basis_size), std::to_string(e.n_negative), num(e.bec_energy),
           e.accepted ? "1" : "0"});
  }
  return t;
}

inline json checkpoint_json(const SolveResult& r) {
  json meta = {{"config", config::echo(r.run)}, {"version", version}};
  return svm::checkpoint_to_json(svm::make_checkpoint(*r.state, config::echo(r.run)["potential"], meta));
}

/// Runs (or resumes) the optimisation. With `checkpoint_dir` set, a checkpoint
/// is written after every step.
inline SolveResult solve(const config::RunConfig& c, std::optional<fs::path> checkpoint_dir = std::nullopt,
                         const std::optional<std::string>& resume = std::nullopt,
                         std::function<void(const svm::SvmState&)> progress = {}) {
  SolveResult r{config::resolve(c), nullptr, nullptr};
  r.engine = std::make_unique<matelem::HamiltonianEngine>(c.n_particles, c.family, r.run.potential);
  if (r.engine->contact_on_correlated_space()) {
    throw config::ConfigError({"the zero_range model requires basis_family = hyperradial"});
  }
  r.state = std::make_unique<svm::SvmState>(*r.engine, r.run.svm);
  if (resume) {
    std::ifstream in(*resume);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + *resume + "'");
    const auto cp = svm::checkpoint_from_json(json::parse(in));
    if (cp.config.family != c.family) throw std::invalid_argument("checkpoint family differs from the config");
    svm::restore(*r.state, cp);
  }
  const auto t0 = std::chrono::steady_clock::now();
  r.status = svm::run(*r.state, [&](const svm::SvmState& s) {
    if (checkpoint_dir) {
      atomic_write(*checkpoint_dir / "checkpoint.json", checkpoint_json(r).dump() + "\n");
    }
    if (progress) progress(s);
  });
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline int cmd_solve(const Options& o) {
  const auto c = load_config(o);
  const fs::path dir = c.output.directory;
  auto r = solve(c, dir, o.checkpoint, [&](const svm::SvmState& s) {
    if (s.step() % 25 == 0 && s.size() > 0) {
      say(o, "step " + std::to_string(s.step()) + "  K=" + std::to_string(s.size()) + "  n_negative=" +
                 std::to_string(s.spectrum().n_negative) + "  E_bec=" + num(s.spectrum().bec_energy(), 8));
    }
  });
  atomic_write(dir / "checkpoint.json", checkpoint_json(r).dump() + "\n");
  const json echo = config::echo(r.run);
  write_table(dir, "spectrum", spectrum_table(r.state->spectrum(), echo), c.output.formats);
  auto hist = history_table(r.state->history());
  hist.metadata["config"] = echo;
  write_table(dir, "history", hist, c.output.formats);
  std::ostringstream log;
  log << "status " << svm::to_string(r.status) << "\nbasis_size " << r.state->size() << "\nn_negative "
      << r.state->spectrum().n_negative << "\nbec_energy " << num(r.state->spectrum().bec_energy())
      << "\nseconds " << num(r.seconds, 4) << "\nconfig " << echo.dump() << "\nversion " << version << "\n";
  atomic_write(dir / "run.log", log.str());
  say(o, "status " + std::string(svm::to_string(r.status)) + ", E_bec = " + num(r.state->spectrum().bec_energy(), 8));
  return r.status == svm::RunStatus::converged ? ok : unconverged;
}

/// Rebuilds a solved state from a checkpoint (no further optimisation).
inline SolveResult reload(const config::RunConfig& c, const std::string& checkpoint) {
  SolveResult r{config::resolve(c), nullptr, nullptr};
  r.engine = std::make_unique<matelem::HamiltonianEngine>(c.n_particles, c.family, r.run.potential);
  r.state = std::make_unique<svm::SvmState>(*r.engine, r.run.svm);
  std::ifstream in(checkpoint);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + checkpoint + "'");
  const auto cp = svm::checkpoint_from_json(json::parse(in));
  svm::restore(*r.state, cp);
  if (r.state->size() == 0) throw std::runtime_error("checkpoint holds an empty basis");
  r.status = r.state->status();
  return r;
}

inline std::string checkpoint_path(const Options& o, const config::RunConfig& c) {
  return o.checkpoint ? *o.checkpoint : (fs::path(c.output.directory) / "checkpoint.json").string();
}

inline int cmd_spectrum(const Options& o) {
  const auto c = load_config(o);
  const auto r = reload(c, checkpoint_path(o, c));
  write_table(c.output.directory, "spectrum", spectrum_table(r.state->spectrum(), config::echo(r.run)),
              c.output.formats);
  say(o, "wrote spectrum of " + std::to_string(r.state->spectrum().size()) + " states");
  return ok;
}

// ---------------------------------------------------------------------------
// observables

inline observables::ObdmGridOptions grid_options(const config::RunConfig& c) {
  observables::ObdmGridOptions g;
  g.lmax = c.observables.lmax;
  g.grid = observables::RadialGrid::logarithmic(c.observables.grid_points, c.observables.r_min,
                                                c.observables.r_max);
  g.jobs = c.svm.jobs;
  return g;
}

inline Table scan_table(const std::vector<observables::ScanRow>& rows, const config::RunConfig& c,
                        const json& echo) {
  Table t;
  t.columns = {"index", "energy_hbar_omega", "is_negative", "is_bec", "condensate_fraction",
               "inverse_scaled_central_density", "trace_check"};
  t.metadata["config"] = echo;
  t.metadata["grid"] = {{"points", c.observables.grid_points},
                        {"r_min", c.observables.r_min},
                        {"r_max", c.observables.r_max},
                        {"mapping", "gauss-legendre in log r"}};
  t.metadata["lmax"] = c.observables.lmax;
  t.metadata["density_scale"] = "1 / (pi^{3/2} n(0,0)); equals 1 for the ideal-gas condensate";
  for (const auto& r : rows) {
    t.add({std::to_string(r.index), num(r.energy), r.negative ? "1" : "0", r.is_bec ? "1" : "0",
           num(r.condensate_fraction), num(r.inverse_scaled_density), num(r.trace_check)});
  }
  return t;
}

inline std::vector<observables::ScanRow> scan(const SolveResult& r, const config::RunConfig& c) {
  return observables::state_scan(*r.engine, r.state->prepared(), r.state->overlap(), r.state->spectrum(),
                                 c.observables.below, c.observables.above, grid_options(c));
}

inline int cmd_observables(const Options& o) {
  const auto c = load_config(o);
  const auto r = reload(c, checkpoint_path(o, c));
  const auto rows = scan(r, c);
  write_table(c.output.directory, "observables", scan_table(rows, c, config::echo(r.run)), c.output.formats);
  say(o, "wrote " + std::to_string(rows.size()) + " states");
  return ok;
}

// ---------------------------------------------------------------------------
// repro

/// Desk-scale budgets used when no config is given.
inline config::RunConfig desk_config(int n, config::PotentialKind kind, cgbasis::BasisFamily family) {
  config::RunConfig c;
  c.n_particles = n;
  c.family = family;
  c.svm.family = family;
  c.potential.kind = kind;
  if (kind == config::PotentialKind::zero_range) {
    c.potential.a_au = reference::scattering_length_au;
    c.svm.k_max = 200;
  } else {
    c.svm.k_max = 400;
  }
  return c;
}

inline config::RunConfig with_budget(config::RunConfig base, const std::optional<config::RunConfig>& user) {
  if (!user) return base;
  base.mass_amu = user->mass_amu;
  base.freq_hz = user->freq_hz;
  base.svm = user->svm;
  base.svm.family = base.family;
  base.observables = user->observables;
  return base;
}

inline std::string deviation(double value, double ref) { return num(value / ref - 1.0, 6); }

struct ReproContext {
  std::optional<config::RunConfig> user;
  fs::path out;
  std::vector<std::string> formats{"csv"};
  int jobs = 1;
  const Options* options = nullptr;
  bool full_basis = false;
  bool attractive = false;
  int rows = 6;
};

inline double bec_energy(const config::RunConfig& c) {
  auto r = solve(c);
  return r.state->spectrum().bec_energy();
}

inline Table repro_table1(const ReproContext& x) {
  Table t;
  t.columns = {"N", "E_zr", "E_zr_reference", "E_zr_abs_deviation", "E_attractive", "E_attractive_reference",
               "E_attractive_abs_deviation", "status"};
  t.metadata["tolerances"] = {{"zero_range_abs", reference::tolerance::zero_range_abs},
                              {"attractive_abs", reference::tolerance::attractive_abs}};
  for (const auto& row : reference::table1) {
    std::vector<std::string> r{std::to_string(row.n), "", num(row.zero_range), "", "", num(row.attractive), "", "ok"};
    try {
      auto c = with_budget(desk_config(row.n, config::PotentialKind::zero_range, cgbasis::BasisFamily::hyperradial),
                           x.user);
      c.svm.jobs = x.jobs;
      const double e = bec_energy(c);
      r[1] = num(e);
      r[3] = num(e - row.zero_range, 6);
      if (x.attractive) {
        auto a = with_budget(desk_config(row.n, config::PotentialKind::gaussian, cgbasis::BasisFamily::pair), x.user);
        a.potential.target_a_au = reference::scattering_length_au;
        a.svm.jobs = x.jobs;
        const double ea = bec_energy(a);
        r[4] = num(ea);
        r[6] = num(ea - row.attractive, 6);
      }
    } catch (const std::exception& e) {
      r[7] = std::string("failed: ") + e.what();
    }
    if (x.options) say(*x.options, "table1 N=" + r[0] + " E_zr=" + r[1] + " E_a=" + r[4]);
    t.add(r);
  }
  return t;
}

inline Table repro_table2(const ReproContext& x) {
  Table t;
  t.columns = {"V0_au", "a_reference_au", "a_au", "E_2b", "E_2b_reference", "E_2b_rel_deviation",
               "E_full", "E_full_reference", "E_full_rel_deviation", "status"};
  t.metadata["tolerance_rel"] = reference::tolerance::table2_rel;
  const auto sys = units::make_system(x.user ? x.user->mass_amu : 86.909, x.user ? x.user->freq_hz : 77.87);
  const int rows = std::min<int>(x.rows, reference::table2.size());
  for (int i = 0; i < rows; ++i) {
    const auto& row = reference::table2[i];
    std::vector<std::string> r{num(row.v0_au), num(row.a_au), "", "", num(row.e_pair), "", "",
                               num(row.e_full), "", "ok"};
    try {
      r[2] = num(twobody::scattering_length({row.v0_au, reference::gaussian_range_au}, 0.5 * sys.mass()));
      for (bool full : {false, true}) {
        if (full && !x.full_basis) continue;
        const auto fam = full ? cgbasis::BasisFamily::full : cgbasis::BasisFamily::pair;
        auto c = with_budget(desk_config(4, config::PotentialKind::gaussian, fam), x.user);
        c.potential.v0_au = row.v0_au;
        c.potential.target_a_au.reset();
        c.svm.jobs = x.jobs;
        const double e = bec_energy(c);
        r[full ? 6 : 3] = num(e);
        r[full ? 8 : 5] = deviation(e, full ? row.e_full : row.e_pair);
      }
    } catch (const std::exception& e) {
      r[9] = std::string("failed: ") + e.what();
    }
    if (x.options) say(*x.options, "table2 V0=" + r[0] + " E_2b=" + r[3] + " E_full=" + r[6]);
    t.add(r);
  }
  return t;
}

inline std::vector<int> fig_particle_numbers() { return {3, 4, 5}; }

inline Table repro_fig_e(const ReproContext& x) {
  Table t;
  t.columns = {"N", "a_au", "E", "E_per_N", "scaled_abscissa", "status"};
  t.metadata["scaled_abscissa"] = "(N-1) (a/b_t)^{1/2}";
  const auto sys = units::make_system(x.user ? x.user->mass_amu : 86.909, x.user ? x.user->freq_hz : 77.87);
  const int rows = std::min<int>(x.rows, reference::table2.size());
  for (int n : fig_particle_numbers()) {
    for (int i = 0; i < rows; ++i) {
      const double a = reference::table2[i].a_au;
      std::vector<std::string> r{std::to_string(n), num(a), "", "",
                                 num((n - 1) * std::sqrt(a / sys.trap_length())), "ok"};
      try {
        auto c = with_budget(desk_config(n, config::PotentialKind::gaussian, cgbasis::BasisFamily::pair), x.user);
        c.potential.target_a_au = a;
        c.svm.jobs = x.jobs;
        const double e = bec_energy(c);
        r[2] = num(e);
        r[3] = num(e / n);
      } catch (const std::exception& e) {
        r[5] = std::string("failed: ") + e.what();
      }
      if (x.options) say(*x.options, "fig_e N=" + r[0] + " a=" + r[1] + " E/N=" + r[3]);
      t.add(r);
    }
  }
  return t;
}

inline Table repro_fig_cf(const ReproContext& x) {
  Table t;
  t.columns = {"N", "a_au", "E_bec", "condensate_fraction", "status"};
  const int rows = std::min<int>(x.rows, reference::table2.size());
  for (int n : fig_particle_numbers()) {
    for (int i = 0; i < rows; ++i) {
      const double a = reference::table2[i].a_au;
      std::vector<std::string> r{std::to_string(n), num(a), "", "", "ok"};
      try {
        auto c = with_budget(desk_config(n, config::PotentialKind::gaussian, cgbasis::BasisFamily::pair), x.user);
        c.potential.target_a_au = a;
        c.svm.jobs = x.jobs;
        auto s = solve(c);
        const auto& sp = s.state->spectrum();
        const auto kernel = observables::obdm_kernel(*s.engine, s.state->prepared(), s.state->overlap(),
                                                     sp.coefficients.col(eigensolve::classify_bec(sp).index), x.jobs);
        r[2] = num(sp.bec_energy());
        r[3] = num(observables::obdm_eigen(kernel, grid_options(c)).condensate_fraction);
      } catch (const std::exception& e) {
        r[4] = std::string("failed: ") + e.what();
      }
      if (x.options) say(*x.options, "fig_cf N=" + r[0] + " a=" + r[1] + " lambda0=" + r[3]);
      t.add(r);
    }
  }
  return t;
}

inline Table repro_fig_states(const ReproContext& x) {
  auto c = with_budget(desk_config(5, config::PotentialKind::gaussian, cgbasis::BasisFamily::pair), x.user);
  c.potential.target_a_au = 500.0;
  c.svm.jobs = x.jobs;
  auto s = solve(c);
  return scan_table(scan(s, c), c, config::echo(s.run));
}

inline int cmd_repro(const std::string& which, const Options& o, const ReproContext& base) {
  ReproContext x = base;
  x.options = &o;
  if (o.config_path) x.user = config::load(*o.config_path);
  x.jobs = o.jobs.value_or(x.user ? x.user->svm.jobs : 1);
  if (x.user && o.seed) x.user->svm.seed = *o.seed;
  x.out = o.out ? *o.out : fs::path(x.user ? x.user->output.directory : "out");
  if (x.user) x.formats = x.user->output.formats;
  Table t;
  if (which == "table1") t = repro_table1(x);
  else if (which == "table2") t = repro_table2(x);
  else if (which == "fig_e") t = repro_fig_e(x);
  else if (which == "fig_cf") t = repro_fig_cf(x);
  else if (which == "fig_states") t = repro_fig_states(x);
  else throw std::invalid_argument("unknown repro target '" + which + "'");
  t.metadata["target"] = which;
  write_table(x.out, which, t, x.formats);
  say(o, "wrote " + (x.out / (which + ".csv")).string());
  return ok;
}

}  // namespace bosetrap::cli
