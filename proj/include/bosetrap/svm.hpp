#pragma once

// Stochastic variational method: the basis grows one function per step, each
// chosen as the best of M random trials under the lexicographic objective
// (more self-bound states first, then lower BEC energy). Every trial has its
// own RNG stream derived from (seed, step, trial), so selection is independent
// of how trials are scheduled and a run can resume from a checkpoint exactly.

#include "bosetrap/cgbasis.hpp"
#include "bosetrap/eigensolve.hpp"
#include "bosetrap/matelem.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bosetrap::svm {

using cgbasis::BasisFamily;
using cgbasis::BasisTerm;
using eigensolve::Score;
using eigensolve::SpectrumResult;

struct SvmConfig {
  BasisFamily family = BasisFamily::pair;
  int k_max = 600;
  int trials = 50;
  /// Sampled length scales d (trap units); nonlinear parameters are 1/d^2.
  double d_min = 1.0;
  double d_max = 1.0;
  bool beta_allow_negative = true;
  std::uint64_t seed = 1;
  double energy_tol = 1e-4;
  int window = 50;
  double threshold = eigensolve::default_threshold;
  /// A candidate whose component orthogonal to the basis has squared norm
  /// below this is rejected as linearly dependent.
  double candidate_min_norm = 1e-10;
  /// Optional re-optimisation sweeps over existing terms after growth.
  int refine_sweeps = 0;
  /// Consecutive rejected steps after which growth stops.
  int max_null_steps = 25;
  int jobs = 1;

  void validate() const {
    if (!(d_min > 0.0)) throw std::invalid_argument("SvmConfig: d_min must be positive");
    if (!(d_min <= d_max)) throw std::invalid_argument("SvmConfig: d_min must not exceed d_max");
    if (trials < 1) throw std::invalid_argument("SvmConfig: trials must be at least 1");
    if (k_max < 1) throw std::invalid_argument("SvmConfig: k_max must be at least 1");
    if (window < 1) throw std::invalid_argument("SvmConfig: window must be at least 1");
    if (!(energy_tol > 0.0)) throw std::invalid_argument("SvmConfig: energy_tol must be positive");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("SvmConfig: threshold must be in (0, 1)");
  }
};

// ---------------------------------------------------------------------------
// Random streams.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream for one trial: seed xor hash(step, trial). `domain` separates growth
/// trials from refinement trials.
inline std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t step, std::uint64_t trial,
                                    std::uint64_t domain = 0) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(domain) ^ step) ^ trial);
  return std::mt19937_64(seed ^ h);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double sample_length(std::mt19937_64& rng, double d_min, double d_max) {
  if (d_min == d_max) return d_min;
  const double lo = std::log(d_min), hi = std::log(d_max);
  return std::exp(lo + (hi - lo) * uniform01(rng));
}

inline double sample_strength(std::mt19937_64& rng, const SvmConfig& c) {
  const double d = sample_length(rng, c.d_min, c.d_max);
  return 1.0 / (d * d);
}

inline constexpr int max_rejections = 1000;

inline BasisTerm sample_candidate(std::mt19937_64& rng, const SvmConfig& config, int n_particles) {
  switch (config.family) {
    case BasisFamily::hyperradial: return cgbasis::HyperRadialTerm{sample_strength(rng, config)};
    case BasisFamily::pair: {
      for (int attempt = 0; attempt < max_rejections; ++attempt) {
        const double alpha = sample_strength(rng, config);
        double beta = sample_strength(rng, config);
        if (config.beta_allow_negative && uniform01(rng) < 0.5) beta = -beta;
        if (alpha + 2.0 * beta > 0.0) return cgbasis::PairTerm{alpha, beta};
      }
      throw std::runtime_error("sample_candidate: no admissible (alpha, beta) after 1000 rejections");
    }
    case BasisFamily::full: {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_particles, n_particles);
      for (int i = 0; i < n_particles; ++i)
        for (int j = i + 1; j < n_particles; ++j) a(i, j) = a(j, i) = sample_strength(rng, config);
      return cgbasis::FullTerm{std::move(a)};
    }
  }
  throw std::logic_error("sample_candidate: unknown family");
}

// ---------------------------------------------------------------------------

struct HistoryEntry {
  int step = 0;
  int basis_size = 0;
  int n_negative = 0;
  double bec_energy = std::numeric_limits<double>::infinity();
  bool accepted = false;
};

enum class RunStatus { running, converged, unconverged, stalled };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::converged: return "converged";
    case RunStatus::unconverged: return "unconverged";
    case RunStatus::stalled: return "stalled";
  }
  return "?";
}

inline RunStatus parse_status(const std::string& s) {
  if (s == "running") return RunStatus::running;
  if (s == "converged") return RunStatus::converged;
  if (s == "unconverged") return RunStatus::unconverged;
  if (s == "stalled") return RunStatus::stalled;
  throw std::invalid_argument("unknown run status '" + s + "'");
}

/// Objective value of a spectrum: the BEC energy, or +inf when every state is
/// negative. Candidates are ranked by `Score`, which orders by the number of
/// negative states first.
inline Score objective(const SpectrumResult& spectrum) {
  if (spectrum.energies.empty()) throw std::invalid_argument("objective: empty spectrum");
  return eigensolve::score_of(spectrum);
}

/// The growing basis with its matrices and solved spectrum.
class SvmState {
 public:
  SvmState(const matelem::HamiltonianEngine& engine, SvmConfig config)
      : engine_(&engine), config_(std::move(config)) {
    config_.validate();
    if (config_.family != engine.family()) throw std::invalid_argument("SvmState: family mismatch");
  }

  const SvmConfig& config() const { return config_; }
  const matelem::HamiltonianEngine& engine() const { return *engine_; }
  const std::vector<BasisTerm>& terms() const { return terms_; }
  const std::vector<matelem::PreparedTerm>& prepared() const { return prepared_; }
  const Eigen::MatrixXd& hamiltonian() const { return h_; }
  const Eigen::MatrixXd& overlap() const { return s_; }
  const SpectrumResult& spectrum() const { return spectrum_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  int size() const { return static_cast<int>(terms_.size()); }
  int step() const { return static_cast<int>(history_.size()); }
  RunStatus status() const { return status_; }
  void set_status(RunStatus s) { status_ = s; }

  Score score() const { return terms_.empty() ? Score{} : eigensolve::score_of(spectrum_); }

  /// Rebuilds matrices and spectrum from a term list (checkpoint restore).
  void reset(std::vector<BasisTerm> terms, std::vector<HistoryEntry> history) {
    terms_ = std::move(terms);
    history_ = std::move(history);
    prepared_.clear();
    for (const auto& t : terms_) prepared_.push_back(engine_->prepare(t));
    if (prepared_.empty()) {
      h_.resize(0, 0);
      s_.resize(0, 0);
      spectrum_ = {};
      return;
    }
    std::tie(h_, s_) = engine_->assemble(prepared_, config_.jobs);
    spectrum_ = eigensolve::generalized_eig(h_, s_, config_.threshold);
  }

  /// Couplings of a candidate to the current basis; element orientation is
  /// (existing, candidate) so a rebuild from terms reproduces them bit for bit.
  struct Column {
    Eigen::VectorXd h, s;
    double h_diag = 0.0, s_diag = 0.0;
  };

  Column column(const matelem::PreparedTerm& cand, int skip = -1) const {
    const int k = size();
    Column c;
    c.h.resize(k - (skip >= 0 ? 1 : 0));
    c.s.resize(c.h.size());
    int row = 0;
    for (int j = 0; j < k; ++j) {
      if (j == skip) continue;
      const auto e = engine_->element(prepared_[j], cand);
      c.h(row) = e.hamiltonian();
      c.s(row) = e.overlap;
      ++row;
    }
    const auto d = engine_->element(cand, cand);
    c.h_diag = d.hamiltonian();
    c.s_diag = d.overlap;
    return c;
  }

  void append(matelem::PreparedTerm cand, const Column& c) {
    const Eigen::Index k = size();
    h_.conservativeResize(k + 1, k + 1);
    s_.conservativeResize(k + 1, k + 1);
    h_.block(0, k, k, 1) = c.h;
    h_.block(k, 0, 1, k) = c.h.transpose();
    s_.block(0, k, k, 1) = c.s;
    s_.block(k, 0, 1, k) = c.s.transpose();
    h_(k, k) = c.h_diag;
    s_(k, k) = c.s_diag;
    terms_.push_back(cand.term);
    prepared_.push_back(std::move(cand));
    spectrum_ = eigensolve::generalized_eig(h_, s_, config_.threshold);
  }

  /// Replaces term i, recomputing its row with the (min, max) orientation.
  void replace(int i, matelem::PreparedTerm cand) {
    prepared_[i] = std::move(cand);
    terms_[i] = prepared_[i].term;
    for (int j = 0; j < size(); ++j) {
      const auto e = j <= i ? engine_->element(prepared_[j], prepared_[i]) : engine_->element(prepared_[i], prepared_[j]);
      h_(i, j) = h_(j, i) = e.hamiltonian();
      s_(i, j) = s_(j, i) = e.overlap;
    }
    spectrum_ = eigensolve::generalized_eig(h_, s_, config_.threshold);
  }

  void record(bool accepted) {
    HistoryEntry e;
    e.step = step();
    e.basis_size = size();
    e.accepted = accepted;
    if (!terms_.empty()) {
      e.n_negative = spectrum_.n_negative;
      e.bec_energy = spectrum_.bec_energy();
    }
    history_.push_back(e);
  }

 private:
  const matelem::HamiltonianEngine* engine_;
  SvmConfig config_;
  std::vector<BasisTerm> terms_;
  std::vector<matelem::PreparedTerm> prepared_;
  Eigen::MatrixXd h_, s_;
  SpectrumResult spectrum_;
  std::vector<HistoryEntry> history_;
  RunStatus status_ = RunStatus::running;
};

struct TrialResult {
  bool accepted = false;
  Score score;
};

namespace detail {

/// Evaluates trials [0, M) and returns the index of the best accepted one
/// (lowest index on ties), or -1.
template <class MakeCandidate>
int select_best(int trials, int jobs, MakeCandidate&& make, std::vector<TrialResult>& results) {
  results.assign(trials, {});
  bosetrap::detail::parallel_for(static_cast<std::size_t>(trials), jobs,
                                 [&](std::size_t t) { results[t] = make(static_cast<int>(t)); });
  int best = -1;
  for (int t = 0; t < trials; ++t) {
    if (!results[t].accepted) continue;
    if (best < 0 || results[t].score < results[best].score) best = t;
  }
  return best;
}

}  // namespace detail

/// One growth step: M candidates scored by the bordered update, best appended.
/// Returns false (basis unchanged) when every candidate is rejected.
inline bool grow_basis(SvmState& state, int trials, std::vector<TrialResult>* trial_log = nullptr) {
  const auto& cfg = state.config();
  const auto& engine = state.engine();
  const std::uint64_t step = static_cast<std::uint64_t>(state.step());
  const eigensolve::BorderedScorer scorer =
      state.size() > 0 ? eigensolve::BorderedScorer(state.spectrum()) : eigensolve::BorderedScorer();

  auto candidate = [&](int t) {
    auto rng = trial_stream(cfg.seed, step, static_cast<std::uint64_t>(t));
    return engine.prepare(sample_candidate(rng, cfg, engine.n_particles()));
  };
  std::vector<TrialResult> results;
  const int best = detail::select_best(trials, cfg.jobs, [&](int t) {
    TrialResult r;
    try {
      const auto cand = candidate(t);
      const auto col = state.column(cand);
      const auto o = scorer.score(col.h, col.s, col.h_diag, col.s_diag, cfg.candidate_min_norm);
      r.accepted = o.accepted;
      r.score = o.score;
    } catch (const std::domain_error&) {
      r.accepted = false;
    }
    return r;
  }, results);
  if (trial_log) *trial_log = results;

  if (best < 0) {
    state.record(false);
    return false;
  }
  auto cand = candidate(best);
  const auto col = state.column(cand);
  state.append(std::move(cand), col);
  state.record(true);
  return true;
}

/// Re-optimises each existing term against the rest of the basis; a term is
/// replaced only when a trial strictly improves the objective. Returns the
/// number of replacements.
inline int refine_sweep(SvmState& state, int sweep_index) {
  const auto& cfg = state.config();
  const auto& engine = state.engine();
  int replaced = 0;
  for (int i = 0; i < state.size(); ++i) {
    const Score current = state.score();
    // Spectrum of the basis without term i.
    std::vector<Eigen::Index> keep;
    for (int j = 0; j < state.size(); ++j)
      if (j != i) keep.push_back(j);
    if (keep.empty()) continue;
    const Eigen::MatrixXd h = state.hamiltonian()(keep, keep);
    const Eigen::MatrixXd s = state.overlap()(keep, keep);
    const auto reduced = eigensolve::generalized_eig(h, s, cfg.threshold);
    const eigensolve::BorderedScorer scorer(reduced);
    const std::uint64_t tag = (static_cast<std::uint64_t>(sweep_index) << 32) | static_cast<std::uint64_t>(i);
    auto candidate = [&](int t) {
      auto rng = trial_stream(cfg.seed, tag, static_cast<std::uint64_t>(t), 1);
      return engine.prepare(sample_candidate(rng, cfg, engine.n_particles()));
    };
    std::vector<TrialResult> results;
    const int best = detail::select_best(cfg.trials, cfg.jobs, [&](int t) {
      TrialResult r;
      try {
        const auto cand = candidate(t);
        const auto col = state.column(cand, i);
        const auto o = scorer.score(col.h, col.s, col.h_diag, col.s_diag, cfg.candidate_min_norm);
        r.accepted = o.accepted;
        r.score = o.score;
      } catch (const std::domain_error&) {
        r.accepted = false;
      }
      return r;
    }, results);
    if (best >= 0 && results[best].score < current) {
      state.replace(i, candidate(best));
      ++replaced;
    }
  }
  return replaced;
}

/// Converged when over the last `window` steps the BEC energy varied by less
/// than energy_tol and the number of negative states stayed constant.
inline bool converged(const std::vector<HistoryEntry>& history, const SvmConfig& cfg) {
  if (static_cast<int>(history.size()) < cfg.window) return false;
  const auto first = history.end() - cfg.window;
  double lo = first->bec_energy, hi = first->bec_energy;
  for (auto it = first; it != history.end(); ++it) {
    if (it->n_negative != first->n_negative) return false;
    if (!std::isfinite(it->bec_energy)) return false;
    lo = std::min(lo, it->bec_energy);
    hi = std::max(hi, it->bec_energy);
  }
  return hi - lo < cfg.energy_tol;
}

using StepCallback = std::function<void(const SvmState&)>;

/// Grows the basis until convergence, k_max, or too many null steps.
/// `max_steps` bounds this call (for partial runs that are resumed later).
inline RunStatus run(SvmState& state, const StepCallback& on_step = {},
                     std::optional<int> max_steps = std::nullopt) {
  const auto& cfg = state.config();
  int null_run = 0;
  for (int taken = 0;; ++taken) {
    if (converged(state.history(), cfg)) {
      state.set_status(RunStatus::converged);
      break;
    }
    if (state.size() >= cfg.k_max) {
      state.set_status(RunStatus::unconverged);
      break;
    }
    if (null_run >= cfg.max_null_steps) {
      state.set_status(RunStatus::stalled);
      break;
    }
    if (max_steps && taken >= *max_steps) {
      state.set_status(RunStatus::running);
      return RunStatus::running;
    }
    const bool ok = grow_basis(state, cfg.trials);
    null_run = ok ? 0 : null_run + 1;
    if (on_step) on_step(state);
  }
  for (int sweep = 0; sweep < cfg.refine_sweeps; ++sweep) {
    refine_sweep(state, sweep);
    if (on_step) on_step(state);
  }
  return state.status();
}

// ---------------------------------------------------------------------------
// Checkpoint serialisation (JSON). Terms are stored as their raw parameters.

inline constexpr const char* checkpoint_schema = "bosetrap.checkpoint/1";

inline nlohmann::json term_to_json(const BasisTerm& t) {
  using nlohmann::json;
  if (const auto* h = std::get_if<cgbasis::HyperRadialTerm>(&t)) {
    return {{"type", "hyperradial"}, {"alpha", h->alpha}};
  }
  if (const auto* p = std::get_if<cgbasis::PairTerm>(&t)) {
    return {{"type", "pair"}, {"alpha", p->alpha}, {"beta", p->beta}};
  }
  const auto& f = std::get<cgbasis::FullTerm>(t).alpha;
  json upper = json::array();
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    for (Eigen::Index j = i + 1; j < f.cols(); ++j) upper.push_back(f(i, j));
  return {{"type", "full"}, {"n", f.rows()}, {"alpha_upper", upper}};
}

inline BasisTerm term_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "hyperradial") return cgbasis::HyperRadialTerm{j.at("alpha").get<double>()};
  if (type == "pair") return cgbasis::PairTerm{j.at("alpha").get<double>(), j.at("beta").get<double>()};
  if (type == "full") {
    const int n = j.at("n").get<int>();
    const auto& upper = j.at("alpha_upper");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    std::size_t q = 0;
    for (int i = 0; i < n; ++i)
      for (int k = i + 1; k < n; ++k) a(i, k) = a(k, i) = upper.at(q++).get<double>();
    return cgbasis::FullTerm{std::move(a)};
  }
  throw std::invalid_argument("checkpoint: unknown term type '" + type + "'");
}

inline nlohmann::json config_to_json(const SvmConfig& c) {
  return {{"family", cgbasis::to_string(c.family)},
          {"k_max", c.k_max},
          {"trials", c.trials},
          {"d_min", c.d_min},
          {"d_max", c.d_max},
          {"beta_allow_negative", c.beta_allow_negative},
          {"seed", c.seed},
          {"energy_tol", c.energy_tol},
          {"window", c.window},
          {"threshold", c.threshold},
          {"candidate_min_norm", c.candidate_min_norm},
          {"refine_sweeps", c.refine_sweeps},
          {"max_null_steps", c.max_null_steps}};
}

/// Unknown fields are ignored for forward compatibility.
inline SvmConfig config_from_json(const nlohmann::json& j) {
  SvmConfig c;
  c.family = cgbasis::parse_family(j.at("family").get<std::string>());
  c.k_max = j.at("k_max").get<int>();
  c.trials = j.at("trials").get<int>();
  c.d_min = j.at("d_min").get<double>();
  c.d_max = j.at("d_max").get<double>();
  c.beta_allow_negative = j.value("beta_allow_negative", true);
  c.seed = j.at("seed").get<std::uint64_t>();
  c.energy_tol = j.at("energy_tol").get<double>();
  c.window = j.at("window").get<int>();
  c.threshold = j.at("threshold").get<double>();
  c.candidate_min_norm = j.value("candidate_min_norm", c.candidate_min_norm);
  c.refine_sweeps = j.value("refine_sweeps", 0);
  c.max_null_steps = j.value("max_null_steps", c.max_null_steps);
  return c;
}

struct Checkpoint {
  SvmConfig config;
  int n_particles = 0;
  nlohmann::json potential;  ///< echo of the physical potential description
  nlohmann::json extra;      ///< free-form metadata (run config echo, version)
  std::vector<BasisTerm> terms;
  std::vector<HistoryEntry> history;
  RunStatus status = RunStatus::running;
  // Spectrum summary (informational; recomputed on restore).
  int n_negative = 0;
  double bec_energy = std::numeric_limits<double>::infinity();
  std::vector<double> lowest_energies;
};

inline Checkpoint make_checkpoint(const SvmState& state, nlohmann::json potential = {},
                                  nlohmann::json extra = {}) {
  Checkpoint c;
  c.config = state.config();
  c.n_particles = state.engine().n_particles();
  c.potential = std::move(potential);
  c.extra = std::move(extra);
  c.terms = state.terms();
  c.history = state.history();
  c.status = state.status();
  if (state.size() > 0) {
    const auto& sp = state.spectrum();
    c.n_negative = sp.n_negative;
    c.bec_energy = sp.bec_energy();
    const int top = std::min(sp.size(), std::max(sp.n_negative + 10, 10));
    c.lowest_energies.assign(sp.energies.begin(), sp.energies.begin() + top);
  }
  return c;
}

inline double json_energy(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline nlohmann::json energy_json(double e) {
  return std::isfinite(e) ? nlohmann::json(e) : nlohmann::json(nullptr);
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c) {
  using nlohmann::json;
  json terms = json::array();
  for (const auto& t : c.terms) terms.push_back(term_to_json(t));
  json history = json::array();
  for (const auto& h : c.history) {
    history.push_back({{"step", h.step},
                       {"basis_size", h.basis_size},
                       {"n_negative", h.n_negative},
                       {"bec_energy", energy_json(h.bec_energy)},
                       {"accepted", h.accepted}});
  }
  json energies = json::array();
  for (double e : c.lowest_energies) energies.push_back(e);
  return {{"schema", checkpoint_schema},
          {"config", config_to_json(c.config)},
          {"n_particles", c.n_particles},
          {"potential", c.potential},
          {"metadata", c.extra},
          {"rng", {{"seed", c.config.seed}, {"next_step", c.history.size()}}},
          {"status", to_string(c.status)},
          {"spectrum", {{"n_negative", c.n_negative}, {"bec_energy", energy_json(c.bec_energy)}, {"lowest", energies}}},
          {"terms", terms},
          {"history", history}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  const std::string schema = j.at("schema").get<std::string>();
  if (schema.rfind("bosetrap.checkpoint/", 0) != 0) {
    throw std::invalid_argument("checkpoint: unrecognised schema '" + schema + "'");
  }
  Checkpoint c;
  c.config = config_from_json(j.at("config"));
  c.n_particles = j.at("n_particles").get<int>();
  c.potential = j.value("potential", nlohmann::json{});
  c.extra = j.value("metadata", nlohmann::json{});
  c.status = parse_status(j.value("status", std::string("running")));
  for (const auto& t : j.at("terms")) c.terms.push_back(term_from_json(t));
  for (const auto& h : j.at("history")) {
    c.history.push_back({h.at("step").get<int>(), h.at("basis_size").get<int>(), h.at("n_negative").get<int>(),
                         json_energy(h.at("bec_energy")), h.at("accepted").get<bool>()});
  }
  if (j.contains("spectrum")) {
    const auto& s = j.at("spectrum");
    c.n_negative = s.value("n_negative", 0);
    c.bec_energy = json_energy(s.value("bec_energy", nlohmann::json(nullptr)));
    for (const auto& e : s.value("lowest", nlohmann::json::array())) c.lowest_energies.push_back(e.get<double>());
  }
  return c;
}

/// Restores a state from a checkpoint; the engine must match its N and family.
inline void restore(SvmState& state, const Checkpoint& c) {
  if (c.n_particles != state.engine().n_particles()) {
    throw std::invalid_argument("restore: checkpoint N does not match the engine");
  }
  state.reset(c.terms, c.history);
  state.set_status(c.status == RunStatus::running ? RunStatus::running : c.status);
}

}  // namespace bosetrap::svm
