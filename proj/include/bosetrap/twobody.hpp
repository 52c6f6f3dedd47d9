#pragma once

// s-wave two-body problem for the attractive Gaussian well
// V(r) = V0 exp(-r^2/b^2), solved in atomic units (hbar = 1).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace bosetrap::twobody {

struct GaussianPotential {
  double depth;  ///< V0 in hartree, negative for attraction
  double range;  ///< b in bohr

  double operator()(double r) const { return depth * std::exp(-(r * r) / (range * range)); }
};

struct RadialOptions {
  /// Numerov step as a fraction of the range b.
  double step_fraction = 1.0 / 400.0;
  /// Matching radii in units of b; the well is numerically zero beyond ~20b.
  std::array<double, 3> match_radii{20.0, 40.0, 80.0};
  /// Allowed relative disagreement of the scattering length across match radii.
  double consistency_tol = 1e-6;
  /// Phase-shift momenta in units of 1/b.
  std::array<double, 4> k_window{0.02, 0.04, 0.06, 0.08};
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhaseShiftSample {
  double k;      ///< inverse bohr
  double delta;  ///< radians, in (-pi/2, pi/2]
  double k_cot_delta;
};

struct EffectiveRangeFit {
  double effective_range;   ///< r_e from the k^2 coefficient
  double intercept;         ///< fitted -1/a
  double quartic;           ///< k^4 coefficient
  double window_change;     ///< relative change of r_e when the k window is halved
  std::vector<PhaseShiftSample> samples;
};

struct ScatteringSummary {
  double scattering_length;
  double effective_range;
  int n_bound;
  std::vector<double> bound_energies;
  std::vector<PhaseShiftSample> phase_shift_samples;
};

namespace detail {

/// Last two grid values of the regular solution u(0) = 0 of
/// u'' = 2 mu (V(r) - E) u, propagated by Numerov to r_end.
struct RadialTail {
  double r1, r2;
  double u1, u2;
  int nodes;
};

inline RadialTail integrate_regular(const GaussianPotential& pot, double reduced_mass,
                                    double energy, double r_end, double step) {
  const int n = static_cast<int>(std::ceil(r_end / step));
  const double h = r_end / n;
  const double c = h * h / 12.0;
  auto f = [&](double r) { return 2.0 * reduced_mass * (pot(r) - energy); };

  double f_prev = f(0.0);
  double f_cur = f(h);
  double u_prev = 0.0;
  // Series start u(h) = h (1 + f(0) h^2 / 6) keeps the O(h^4) global order.
  double u_cur = h * (1.0 + f_prev * h * h / 6.0);
  int nodes = 0;
  for (int i = 1; i < n; ++i) {
    const double f_next = f((i + 1) * h);
    const double u_next =
        (2.0 * u_cur * (1.0 + 5.0 * c * f_cur) - u_prev * (1.0 - c * f_prev)) / (1.0 - c * f_next);
    if ((u_next < 0.0) != (u_cur < 0.0)) ++nodes;
    u_prev = u_cur;
    u_cur = u_next;
    f_prev = f_cur;
    f_cur = f_next;
    // Rescale to avoid overflow in classically forbidden regions.
    const double mag = std::abs(u_cur);
    if (mag > 1e100) {
      u_prev /= mag;
      u_cur /= mag;
    }
  }
  return {(n - 1) * h, n * h, u_prev, u_cur, nodes};
}

inline double step_for(const GaussianPotential& pot, const RadialOptions& opt) {
  return pot.range * opt.step_fraction;
}

/// Zero-energy tail fitted to u ~ (r - a); signed infinity when flat.
inline double tail_scattering_length(const RadialTail& t) {
  const double du = t.u2 - t.u1;
  const double a_slope_scale = std::abs(t.u2) * std::numeric_limits<double>::epsilon() * 16.0;
  if (std::abs(du) <= a_slope_scale) {
    const double sign = (t.u2 * du > 0.0) ? -1.0 : 1.0;
    return sign * std::numeric_limits<double>::infinity();
  }
  return t.r2 - t.u2 * (t.r2 - t.r1) / du;
}

/// Number of eigenvalues strictly below `energy` < 0, by Sturm node count.
inline int count_below(const GaussianPotential& pot, double reduced_mass, double energy,
                       const RadialOptions& opt) {
  const double r_end = opt.match_radii[0] * pot.range;
  const RadialTail t = integrate_regular(pot, reduced_mass, energy, r_end, step_for(pot, opt));
  const double kappa = std::sqrt(-2.0 * reduced_mass * energy);
  // Sign of the growing coefficient A in u = A e^{kr} + B e^{-kr}.
  const double growing = t.u2 - t.u1 * std::exp(-kappa * (t.r2 - t.r1));
  const int extra = ((growing < 0.0) != (t.u2 < 0.0)) ? 1 : 0;
  return t.nodes + extra;
}

}  // namespace detail

/// Zero-energy scattering length in bohr. At a pole returns +infinity.
/// Throws ConvergenceError if the match-radius sweep disagrees.
inline double scattering_length(const GaussianPotential& pot, double reduced_mass,
                                const RadialOptions& opt = {}) {
  if (!(pot.range > 0.0)) throw std::invalid_argument("scattering_length: range must be positive");
  if (!(reduced_mass > 0.0)) throw std::invalid_argument("scattering_length: reduced mass must be positive");
  if (pot.depth == 0.0) return 0.0;

  const double step = detail::step_for(pot, opt);
  std::array<double, 3> values{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto tail =
        detail::integrate_regular(pot, reduced_mass, 0.0, opt.match_radii[i] * pot.range, step);
    values[i] = detail::tail_scattering_length(tail);
  }
  if (std::isinf(values[0])) return values[0];
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (std::isinf(values[i])) return values[i];
    const double rel = std::abs(values[i] - values[0]) / std::max(std::abs(values[0]), pot.range);
    if (rel > opt.consistency_tol) {
      throw ConvergenceError("scattering_length: match-radius sweep disagrees (" +
                             std::to_string(values[0]) + " vs " + std::to_string(values[i]) + ")");
    }
  }
  return values[0];
}

/// Number of bound states: nodes of the zero-energy solution, including the
/// asymptotic node at r = a when a lies beyond the matching radius.
inline int bound_state_count(const GaussianPotential& pot, double reduced_mass,
                             const RadialOptions& opt = {}) {
  if (pot.depth >= 0.0) return 0;
  const double r_end = opt.match_radii[0] * pot.range;
  const auto tail = detail::integrate_regular(pot, reduced_mass, 0.0, r_end, detail::step_for(pot, opt));
  const double a = detail::tail_scattering_length(tail);
  return tail.nodes + ((std::isinf(a) || a > tail.r2) ? 1 : 0);
}

/// All s-wave bound-state energies (hartree), ascending, by bisection on the
/// Sturm count.
inline std::vector<double> bound_states(const GaussianPotential& pot, double reduced_mass,
                                        const RadialOptions& opt = {}) {
  if (!(pot.range > 0.0)) throw std::invalid_argument("bound_states: range must be positive");
  std::vector<double> energies;
  const int n = bound_state_count(pot, reduced_mass, opt);
  for (int level = 0; level < n; ++level) {
    // The level-th state is the energy where count_below crosses level -> level+1.
    double lo = pot.depth;  // count_below(lo) == 0
    double hi = 0.0;
    // Relative resolution once hi < 0, so threshold states are resolved too.
    for (int it = 0; it < 400; ++it) {
      if (hi < 0.0 && hi - lo <= 1e-14 * std::abs(hi)) break;
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (detail::count_below(pot, reduced_mass, mid, opt) > level) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    energies.push_back(0.5 * (lo + hi));
  }
  return energies;
}

/// k cot(delta) at momentum k from matching to sin(kr + delta) outside the well.
inline PhaseShiftSample phase_shift(const GaussianPotential& pot, double reduced_mass, double k,
                                    const RadialOptions& opt = {}) {
  const double energy = k * k / (2.0 * reduced_mass);
  const double r_end = opt.match_radii[0] * pot.range;
  const auto t = detail::integrate_regular(pot, reduced_mass, energy, r_end, detail::step_for(pot, opt));
  const double num = t.u2 * std::cos(k * t.r1) - t.u1 * std::cos(k * t.r2);
  const double den = t.u1 * std::sin(k * t.r2) - t.u2 * std::sin(k * t.r1);
  const double delta = std::atan2(den, num);
  return {k, std::remainder(delta, M_PI), k * num / den};
}

namespace detail {

inline std::array<double, 3> fit_k_cot_delta(const std::vector<PhaseShiftSample>& samples) {
  Eigen::MatrixXd design(samples.size(), 3);
  Eigen::VectorXd rhs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double k2 = samples[i].k * samples[i].k;
    design.row(i) << 1.0, k2, k2 * k2;
    rhs(i) = samples[i].k_cot_delta;
  }
  const Eigen::Vector3d c = design.colPivHouseholderQr().solve(rhs);
  return {c(0), c(1), c(2)};
}

}  // namespace detail

/// Effective range from a least-squares fit of k cot(delta) in powers of k^2.
inline EffectiveRangeFit effective_range_fit(const GaussianPotential& pot, double reduced_mass,
                                             const RadialOptions& opt = {}) {
  if (pot.depth == 0.0) {
    throw std::domain_error("effective_range: a = 0, effective range undefined");
  }
  auto sample_window = [&](double scale) {
    std::vector<PhaseShiftSample> s;
    for (double kb : opt.k_window) s.push_back(phase_shift(pot, reduced_mass, scale * kb / pot.range, opt));
    return s;
  };
  EffectiveRangeFit fit;
  fit.samples = sample_window(1.0);
  const auto full = detail::fit_k_cot_delta(fit.samples);
  const auto half = detail::fit_k_cot_delta(sample_window(0.5));
  fit.intercept = full[0];
  fit.effective_range = 2.0 * full[1];
  fit.quartic = full[2];
  fit.window_change = std::abs(2.0 * half[1] - fit.effective_range) / std::abs(fit.effective_range);
  return fit;
}

inline double effective_range(const GaussianPotential& pot, double reduced_mass,
                              const RadialOptions& opt = {}) {
  const auto fit = effective_range_fit(pot, reduced_mass, opt);
  if (!(fit.window_change < 1e-4)) {
    throw ConvergenceError("effective_range: unstable fit, window halving changed r_e by " +
                           std::to_string(fit.window_change) + " (relative), intercept " +
                           std::to_string(fit.intercept));
  }
  return fit.effective_range;
}

/// Finds V0 < 0 on the one-bound-state branch with scattering length target_a.
inline GaussianPotential tune_strength(double range, double target_a, double reduced_mass,
                                       const RadialOptions& opt = {}) {
  if (!(range > 0.0)) throw std::invalid_argument("tune_strength: range must be positive");
  if (!(target_a > 0.0)) {
    throw std::domain_error("tune_strength: target scattering length unreachable on the one-bound-state branch (need a > 0)");
  }
  auto count = [&](double depth) { return bound_state_count({-depth, range}, reduced_mass, opt); };
  // Born-scale depth: |a_Born| = target.
  double depth = 4.0 * target_a / (2.0 * reduced_mass * std::sqrt(M_PI) * range * range * range);

  auto threshold = [&](int below) {
    // Smallest depth where the count exceeds `below`.
    double lo = depth, hi = depth;
    while (count(lo) > below) lo /= 1.5;
    while (count(hi) <= below) hi *= 1.5;
    for (int it = 0; it < 200 && (hi - lo) > 1e-16 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      (count(mid) > below ? hi : lo) = mid;
    }
    return hi;
  };
  const double first = threshold(0);
  depth = first;
  const double second = threshold(1);

  // On (first, second) the scattering length decreases from +inf to -inf.
  auto a_of = [&](double d) { return scattering_length({-d, range}, reduced_mass, opt); };
  double lo = first, hi = second;
  for (int it = 0; it < 300 && (hi - lo) > 1e-17 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (a_of(mid) > target_a ? lo : hi) = mid;
  }
  const double best = std::abs(a_of(lo) - target_a) < std::abs(a_of(hi) - target_a) ? lo : hi;
  const GaussianPotential result{-best, range};
  const double achieved = a_of(best);
  if (!(std::abs(achieved - target_a) <= 1e-6 * target_a)) {
    throw ConvergenceError("tune_strength: reached a = " + std::to_string(achieved) +
                           " for target " + std::to_string(target_a));
  }
  return result;
}

inline ScatteringSummary summarize(const GaussianPotential& pot, double reduced_mass,
                                   const RadialOptions& opt = {}) {
  ScatteringSummary s;
  s.scattering_length = scattering_length(pot, reduced_mass, opt);
  s.bound_energies = bound_states(pot, reduced_mass, opt);
  s.n_bound = static_cast<int>(s.bound_energies.size());
  if (pot.depth != 0.0 && std::isfinite(s.scattering_length)) {
    const auto fit = effective_range_fit(pot, reduced_mass, opt);
    s.effective_range = fit.effective_range;
    s.phase_shift_samples = fit.samples;
  } else {
    s.effective_range = std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

}  // namespace bosetrap::twobody
