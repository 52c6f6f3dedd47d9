#pragma once

// One-body density matrix of a computed eigenstate, measured from the trap
// centre. Each basis function times the centre-of-mass ground state is a
// Gaussian exp(-r^T B r / 2) in the N particle coordinates, so integrating out
// all but one particle leaves bivariate Gaussians in (r, r').

#include "bosetrap/cgbasis.hpp"
#include "bosetrap/detail/parallel.hpp"
#include "bosetrap/eigensolve.hpp"
#include "bosetrap/matelem.hpp"
#include "bosetrap/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace bosetrap::observables {

using cgbasis::BasisFamily;

struct KernelTerm {
  double c;
  double p;
  double p_prime;
  double q;
};

/// n(r, r') = sum_t c_t [g_t(r, r') + g_t(r', r)], g_t = exp(-p r^2/2 - p' r'^2/2 + q r.r').
/// Each stored term stands for itself and its p <-> p' mirror, so the kernel
/// is Hermitian by construction.
struct ObdmKernel {
  std::vector<KernelTerm> terms;
  int n_particles = 0;

  double operator()(const Eigen::Vector3d& r, const Eigen::Vector3d& rp) const {
    const double r2 = r.squaredNorm(), rp2 = rp.squaredNorm(), rr = r.dot(rp);
    double sum = 0.0;
    for (const auto& t : terms) {
      sum += t.c * (std::exp(-0.5 * t.p * r2 - 0.5 * t.p_prime * rp2 + t.q * rr) +
                    std::exp(-0.5 * t.p_prime * r2 - 0.5 * t.p * rp2 + t.q * rr));
    }
    return sum;
  }

  /// Integral of n(r, r) over all space.
  double trace() const {
    double sum = 0.0;
    for (const auto& t : terms) {
      sum += 2.0 * t.c * std::pow(2.0 * std::numbers::pi / (t.p + t.p_prime - 2.0 * t.q), 1.5);
    }
    return sum;
  }

  double at_origin() const {
    double sum = 0.0;
    for (const auto& t : terms) sum += 2.0 * t.c;
    return sum;
  }
};

namespace detail {

/// Lab-frame matrix B of exp(-r^T B r / 2) for one unsymmetrised term, with
/// the pair term's distinguished pair at (i, j).
inline Eigen::MatrixXd lab_form_pair(int n, double alpha, double beta, int i, int j) {
  const double inv_n = 1.0 / n;
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(n, n, (1.0 - alpha) * inv_n);
  b.diagonal().array() += alpha;
  b(i, i) += beta;
  b(j, j) += beta;
  b(i, j) -= beta;
  b(j, i) -= beta;
  return b;
}

inline Eigen::MatrixXd lab_form_full(const Eigen::MatrixXd& alpha) {
  const auto n = alpha.rows();
  Eigen::MatrixXd b = -alpha;
  for (Eigen::Index i = 0; i < n; ++i) b(i, i) = alpha.row(i).sum() - alpha(i, i);
  b.array() += 1.0 / static_cast<double>(n);
  return b;
}

/// Integrates out every particle but `keep`; returns the term before the
/// orbit weight and linear coefficients are applied.
inline KernelTerm single_out(const Eigen::MatrixXd& bra, const Eigen::MatrixXd& ket, int keep) {
  const auto n = bra.rows();
  std::vector<Eigen::Index> rest;
  for (Eigen::Index i = 0; i < n; ++i)
    if (i != keep) rest.push_back(i);
  const Eigen::MatrixXd m = bra(rest, rest) + ket(rest, rest);
  const Eigen::VectorXd u = bra(rest, keep);
  const Eigen::VectorXd v = ket(rest, keep);
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw std::domain_error("obdm: eliminated block not positive definite");
  const Eigen::VectorXd mu = llt.solve(u), mv = llt.solve(v);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  const double d = static_cast<double>(m.rows());
  const double c = std::exp(1.5 * (d * std::log(2.0 * std::numbers::pi) - log_det));
  return {c, bra(keep, keep) - u.dot(mu), ket(keep, keep) - v.dot(mv), u.dot(mv)};
}

/// For the pair family: classes of (kept particle i, ket pair Q) relative to
/// the bra pair (0, 1), keyed by (i in P, i in Q, |P n Q|).
inline std::vector<std::tuple<int, int, int, int>> pair_channel_classes(int n) {
  std::map<std::tuple<int, int, int>, std::tuple<int, int, int, int>> classes;
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        const int in_p = i < 2;
        const int in_q = (i == a || i == b);
        const int shared = (a < 2) + (b < 2);
        auto [it, fresh] = classes.try_emplace({in_p, in_q, shared}, i, a, b, 0);
        ++std::get<3>(it->second);
      }
    }
  }
  std::vector<std::tuple<int, int, int, int>> out;
  for (const auto& [key, rep] : classes) out.push_back(rep);
  return out;
}

}  // namespace detail

/// Builds the OBDM of sum_k c_k S phi_k. `overlap` is the engine's S for the
/// same basis; the state must satisfy c^T S c = 1.
inline ObdmKernel obdm_kernel(const matelem::HamiltonianEngine& engine,
                              std::span<const matelem::PreparedTerm> basis, const Eigen::MatrixXd& overlap,
                              const Eigen::VectorXd& coefficients, int jobs = 1) {
  const int n = engine.n_particles();
  const auto k = static_cast<Eigen::Index>(basis.size());
  if (coefficients.size() != k || overlap.rows() != k || overlap.cols() != k) {
    throw std::invalid_argument("obdm_kernel: basis, overlap and coefficients disagree in size");
  }
  const double norm = coefficients.dot(overlap * coefficients);
  if (!(std::abs(norm - 1.0) < 1e-6)) {
    throw std::invalid_argument("obdm_kernel: state is not normalised (c^T S c = " + std::to_string(norm) + ")");
  }

  // Lab-frame forms per basis function, and for each ket the channels.
  const auto family = engine.family();
  const auto pair_classes = family == BasisFamily::pair ? detail::pair_channel_classes(n)
                                                        : std::vector<std::tuple<int, int, int, int>>{};
  auto bra_form = [&](const matelem::PreparedTerm& t) -> Eigen::MatrixXd {
    switch (family) {
      case BasisFamily::hyperradial:
        return detail::lab_form_pair(n, std::get<cgbasis::HyperRadialTerm>(t.term).alpha, 0.0, 0, 1);
      case BasisFamily::pair: {
        const auto& p = std::get<cgbasis::PairTerm>(t.term);
        return detail::lab_form_pair(n, p.alpha, p.beta, 0, 1);
      }
      case BasisFamily::full: return detail::lab_form_full(std::get<cgbasis::FullTerm>(t.term).alpha);
    }
    return {};
  };
  // (ket form, kept particle, weight) list for one ket basis function.
  auto ket_channels = [&](const matelem::PreparedTerm& t) {
    std::vector<std::tuple<Eigen::MatrixXd, int, double>> out;
    switch (family) {
      case BasisFamily::hyperradial:
        out.emplace_back(bra_form(t), 0, static_cast<double>(n));
        break;
      case BasisFamily::pair: {
        const auto& p = std::get<cgbasis::PairTerm>(t.term);
        for (const auto& [i, a, b, mult] : pair_classes) {
          out.emplace_back(detail::lab_form_pair(n, p.alpha, p.beta, a, b), i, static_cast<double>(mult));
        }
        break;
      }
      case BasisFamily::full:
        for (const auto& e : cgbasis::full_orbit(std::get<cgbasis::FullTerm>(t.term).alpha)) {
          const Eigen::MatrixXd form = detail::lab_form_full(e.alpha);
          for (int i = 0; i < n; ++i) out.emplace_back(form, i, static_cast<double>(e.weight));
        }
        break;
    }
    return out;
  };

  std::vector<Eigen::MatrixXd> bras;
  std::vector<std::vector<std::tuple<Eigen::MatrixXd, int, double>>> kets;
  for (const auto& t : basis) {
    bras.push_back(bra_form(t));
    kets.push_back(ket_channels(t));
  }

  // Row k holds the terms for (k, l >= k); concatenated in row order so the
  // kernel does not depend on the schedule.
  const double prefactor = 1.0 / (n * std::pow(std::numbers::pi, 1.5));
  std::vector<std::vector<KernelTerm>> rows(static_cast<std::size_t>(k));
  bosetrap::detail::parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t row) {
    const auto a = static_cast<Eigen::Index>(row);
    auto& out = rows[row];
    for (Eigen::Index b = a; b < k; ++b) {
      // (a, b) and (b, a) contribute mirror images; the stored term carries
      // its mirror, so off-diagonal pairs keep the full weight and the
      // diagonal is halved.
      const double cc = coefficients(a) * coefficients(b) * prefactor * (a == b ? 0.5 : 1.0);
      for (const auto& [ket, keep, weight] : kets[b]) {
        KernelTerm t = detail::single_out(bras[a], ket, keep);
        t.c *= cc * weight;
        out.push_back(t);
      }
    }
  });
  ObdmKernel kernel;
  kernel.n_particles = n;
  for (auto& r : rows) kernel.terms.insert(kernel.terms.end(), r.begin(), r.end());
  return kernel;
}

/// Kernel of an ideal-gas condensate: every particle in the oscillator ground
/// state.
inline ObdmKernel ideal_gas_kernel(int n_particles) {
  ObdmKernel k;
  k.n_particles = n_particles;
  k.terms.push_back({0.5 * std::pow(std::numbers::pi, -1.5), 1.0, 1.0, 0.0});
  return k;
}

// ---------------------------------------------------------------------------
// Partial-wave eigenproblem.

namespace detail {

/// Series of i_l(x) / (x^l / (2l+1)!!).
inline double bessel_i_series(double x, int l) {
  const double y = 0.5 * x * x;
  double term = 1.0, sum = 1.0;
  for (int j = 1; j < 1000; ++j) {
    term *= y / (j * (2.0 * l + 2.0 * j + 1.0));
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace detail

/// Modified spherical Bessel functions i_l(x), l = 0..lmax, for 0 <= x <= 700.
/// Small arguments use the power series for the two highest orders and
/// recur downwards; large arguments recur upwards from closed forms.
inline void bessel_i(double x, int lmax, double* out) {
  if (x < std::max(8.0, 2.0 * lmax)) {
    double lead = 1.0;  // x^l / (2l+1)!!
    for (int l = 1; l <= lmax; ++l) lead *= x / (2.0 * l + 1.0);
    out[lmax] = lead * detail::bessel_i_series(x, lmax);
    if (lmax == 0) return;
    out[lmax - 1] = lead * (2.0 * lmax + 1.0) / x * detail::bessel_i_series(x, lmax - 1);
    if (x == 0.0) {
      for (int l = 0; l <= lmax; ++l) out[l] = l == 0 ? 1.0 : 0.0;
      return;
    }
    for (int l = lmax - 1; l >= 1; --l) out[l - 1] = out[l + 1] + (2.0 * l + 1.0) / x * out[l];
    return;
  }
  const double sh = std::sinh(x), ch = std::cosh(x);
  out[0] = sh / x;
  if (lmax >= 1) out[1] = (ch - out[0]) / x;
  for (int l = 1; l < lmax; ++l) out[l + 1] = out[l - 1] - (2.0 * l + 1.0) / x * out[l];
}

/// e^{-x} i_l(x) for l = 0..lmax, any x >= 0.
inline void scaled_bessel_i(double x, int lmax, double* out) {
  if (x <= 700.0) {
    bessel_i(x, lmax, out);
    const double ex = std::exp(-x);
    for (int l = 0; l <= lmax; ++l) out[l] *= ex;
    return;
  }
  const double e2 = std::exp(-2.0 * x);
  out[0] = 0.5 * (1.0 - e2) / x;
  if (lmax >= 1) out[1] = 0.5 * (1.0 + e2) / x - out[0] / x;
  for (int l = 1; l < lmax; ++l) out[l + 1] = out[l - 1] - (2.0 * l + 1.0) / x * out[l];
}

struct RadialGrid {
  int points = 80;
  double r_min = 1e-5;
  double r_max = 10.0;
  std::vector<double> r;
  std::vector<double> w;  ///< weights for integrals of f(r) dr

  /// Gauss-Legendre in log r on [r_min, r_max].
  static RadialGrid logarithmic(int points = 80, double r_min = 1e-5, double r_max = 10.0) {
    if (points < 2) throw std::invalid_argument("RadialGrid: need at least two points");
    if (!(r_min > 0.0 && r_min < r_max)) throw std::invalid_argument("RadialGrid: need 0 < r_min < r_max");
    RadialGrid g;
    g.points = points;
    g.r_min = r_min;
    g.r_max = r_max;
    const auto rule = quadrature::scaled(quadrature::gauss_legendre(points), std::log(r_min), std::log(r_max));
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double r = std::exp(rule.nodes[i]);
      g.r.push_back(r);
      g.w.push_back(rule.weights[i] * r);
    }
    return g;
  }
};

class GridRefinementNeeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Channel {
  int l;
  Eigen::VectorXd eigenvalues;  ///< descending
  Eigen::MatrixXd orbitals;     ///< columns: chi(r_a) * r_a * sqrt(w_a) (orthonormal)
};

struct CondensateResult {
  std::vector<Channel> channels;
  double condensate_fraction = 0.0;
  int condensate_l = 0;
  Eigen::VectorXd natural_orbital;  ///< radial chi_0 at the grid nodes
  /// Grid integral of n(r, r) over all partial waves, divided by the analytic trace.
  double trace_check = 0.0;
  /// sum over retained channels of (2l+1) * sum(lambda).
  double partial_wave_sum = 0.0;
  double min_eigenvalue = 0.0;
};

struct ObdmGridOptions {
  int lmax = 4;
  RadialGrid grid = RadialGrid::logarithmic();
  double trace_tol = 1e-6;
  int jobs = 1;
};

/// Radial kernels n_l(r_a, r_b) * r_a r_b sqrt(w_a w_b) for l = 0..lmax.
/// Terms are split into a fixed number of chunks reduced in order, so the
/// result does not depend on `jobs`.
inline std::vector<Eigen::MatrixXd> radial_kernels(const ObdmKernel& kernel, const RadialGrid& grid, int lmax,
                                                   int jobs = 1) {
  const int n = static_cast<int>(grid.r.size());
  const int width = lmax + 1;
  double cmax = 0.0;
  for (const auto& t : kernel.terms) cmax = std::max(cmax, std::abs(t.c));
  std::vector<Eigen::MatrixXd> out(width, Eigen::MatrixXd::Zero(n, n));
  if (cmax == 0.0) return out;
  // Contributions below exp(cut) are negligible against the largest coefficient.
  const double cut = std::log(cmax) - 80.0;
  constexpr std::size_t chunks = 64;
  const std::size_t n_terms = kernel.terms.size();
  // Per chunk: lower triangle (a >= b) for each l, packed.
  const std::size_t packed = static_cast<std::size_t>(n) * (n + 1) / 2;
  std::vector<std::vector<double>> acc(chunks);
  bosetrap::detail::parallel_for(chunks, jobs, [&](std::size_t chunk) {
    auto& sum = acc[chunk];
    sum.assign(packed * width, 0.0);
    std::vector<double> lp(n), lq(n), gp(n), gq(n), bes(width);
    const std::size_t lo = n_terms * chunk / chunks, hi = n_terms * (chunk + 1) / chunks;
    for (std::size_t ti = lo; ti < hi; ++ti) {
      const auto& t = kernel.terms[ti];
      const double lc = std::log(std::abs(t.c));
      for (int a = 0; a < n; ++a) {
        const double r2 = grid.r[a] * grid.r[a];
        lp[a] = -0.5 * t.p * r2;
        lq[a] = -0.5 * t.p_prime * r2;
        gp[a] = std::exp(lp[a]);
        gq[a] = std::exp(lq[a]);
      }
      const double aq = std::abs(t.q);
      const bool odd_flip = t.q < 0.0;
      std::size_t idx = 0;
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b <= a; ++b, ++idx) {
          const double x = aq * grid.r[a] * grid.r[b];
          const double e1 = lp[a] + lq[b], e2 = lq[a] + lp[b];
          const double top = std::max(e1, e2) + x;
          if (top + lc < cut) continue;
          double f;
          if (x <= 600.0 && std::min(e1, e2) > -600.0) {
            bessel_i(x, lmax, bes.data());
            f = t.c * (gp[a] * gq[b] + gq[a] * gp[b]);
          } else {
            scaled_bessel_i(x, lmax, bes.data());
            f = t.c * (std::exp(e1 + x) + std::exp(e2 + x));
          }
          double* dst = sum.data() + idx * width;
          for (int l = 0; l < width; ++l) dst[l] += ((odd_flip && (l & 1)) ? -f : f) * bes[l];
        }
      }
    }
  });
  std::vector<double> total(packed * width, 0.0);
  for (const auto& sum : acc)
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += sum[i];
  std::size_t idx = 0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b <= a; ++b, ++idx) {
      const double scale =
          4.0 * std::numbers::pi * grid.r[a] * grid.r[b] * std::sqrt(grid.w[a] * grid.w[b]);
      for (int l = 0; l < width; ++l) out[l](a, b) = out[l](b, a) = total[idx * width + l] * scale;
    }
  }
  return out;
}

/// Eigen-decomposition of the OBDM per partial wave on a radial grid.
inline CondensateResult obdm_eigen(const ObdmKernel& kernel, const ObdmGridOptions& opt = {}) {
  if (opt.lmax < 0) throw std::invalid_argument("obdm_eigen: lmax must be non-negative");
  const double analytic = kernel.trace();
  if (!(std::abs(analytic - 1.0) < 1e-6)) {
    throw std::invalid_argument("obdm_eigen: kernel trace " + std::to_string(analytic) + " is not 1");
  }
  const auto& g = opt.grid;
  // Radial quadrature of the full diagonal n(r, r).
  double diag = 0.0;
  for (std::size_t a = 0; a < g.r.size(); ++a) {
    const double r = g.r[a];
    double nrr = 0.0;
    for (const auto& t : kernel.terms) nrr += 2.0 * t.c * std::exp(-0.5 * (t.p + t.p_prime - 2.0 * t.q) * r * r);
    diag += g.w[a] * 4.0 * std::numbers::pi * r * r * nrr;
  }
  CondensateResult res;
  res.trace_check = diag / analytic;
  if (std::abs(res.trace_check - 1.0) > opt.trace_tol) {
    throw GridRefinementNeeded("obdm_eigen: radial grid integrates the trace to " +
                               std::to_string(res.trace_check) + "; refine the grid");
  }
  const auto kernels = radial_kernels(kernel, g, opt.lmax, opt.jobs);
  res.min_eigenvalue = std::numeric_limits<double>::infinity();
  res.condensate_fraction = -std::numeric_limits<double>::infinity();
  for (int l = 0; l <= opt.lmax; ++l) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kernels[l]);
    Channel ch;
    ch.l = l;
    ch.eigenvalues = eig.eigenvalues().reverse();
    ch.orbitals = eig.eigenvectors().rowwise().reverse();
    res.partial_wave_sum += (2 * l + 1) * ch.eigenvalues.sum();
    res.min_eigenvalue = std::min(res.min_eigenvalue, ch.eigenvalues.minCoeff());
    if (ch.eigenvalues(0) > res.condensate_fraction) {
      res.condensate_fraction = ch.eigenvalues(0);
      res.condensate_l = l;
    }
    res.channels.push_back(std::move(ch));
  }
  const auto& top = res.channels[res.condensate_l].orbitals.col(0);
  res.natural_orbital.resize(top.size());
  for (Eigen::Index a = 0; a < top.size(); ++a) {
    res.natural_orbital(a) = top(a) / (g.r[a] * std::sqrt(g.w[a]));
  }
  if (res.natural_orbital(0) < 0.0) res.natural_orbital = -res.natural_orbital;
  return res;
}

struct CentralDensity {
  double n0;              ///< N n(0, 0)
  double inverse_scaled;  ///< 1 for the ideal-gas condensate
};

inline CentralDensity central_density(const ObdmKernel& kernel) {
  const double n00 = kernel.at_origin();
  return {kernel.n_particles * n00, 1.0 / (n00 * std::pow(std::numbers::pi, 1.5))};
}

struct ScanRow {
  int index;
  double energy;
  bool negative;
  bool is_bec;
  double condensate_fraction;
  double inverse_scaled_density;
  double trace_check;
};

/// States bec_index - below .. bec_index + above (clamped); when there is no
/// BEC state the window is centred on the top of the spectrum.
inline std::vector<ScanRow> state_scan(const matelem::HamiltonianEngine& engine,
                                       std::span<const matelem::PreparedTerm> basis, const Eigen::MatrixXd& overlap,
                                       const eigensolve::SpectrumResult& spectrum, int below, int above,
                                       const ObdmGridOptions& opt = {}) {
  const int centre = spectrum.has_bec() ? spectrum.bec_index : spectrum.size() - 1;
  const int first = std::max(0, centre - below);
  const int last = std::min(spectrum.size() - 1, centre + above);
  std::vector<ScanRow> rows;
  for (int i = first; i <= last; ++i) {
    const auto kernel = obdm_kernel(engine, basis, overlap, spectrum.coefficients.col(i), opt.jobs);
    const auto cond = obdm_eigen(kernel, opt);
    rows.push_back({i, spectrum.energies[i], eigensolve::is_negative(spectrum.energies[i]),
                    i == spectrum.bec_index, cond.condensate_fraction, central_density(kernel).inverse_scaled,
                    cond.trace_check});
  }
  return rows;
}

}  // namespace bosetrap::observables
