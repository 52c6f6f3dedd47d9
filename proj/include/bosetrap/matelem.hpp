#pragma once

// Matrix elements between internal correlated Gaussians exp(-x^T A x / 2)
// (x spans N-1 three-dimensional internal coordinates), in oscillator units.
// For a bra A and ket B with C = A + B and n = N - 1:
//
//   overlap        (2 pi)^{3n/2} det(C)^{-3/2}
//   kinetic        (3/2) tr(A C^-1 B)                     x overlap
//   trap           (3/2) tr(C^-1)                         x overlap
//   gaussian pair  V0 (1 + 2 c lambda)^{-3/2}             x overlap
//   contact pair   g (2 pi lambda)^{-3/2}                 x overlap
//
// with lambda = w^T C^-1 w for the pair vector w of r_i - r_j.

#include "bosetrap/cgbasis.hpp"
#include "bosetrap/detail/parallel.hpp"
#include "bosetrap/twobody.hpp"
#include "bosetrap/units.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

namespace bosetrap {

inline double inv_pow_1_5(double x) { return 1.0 / (x * std::sqrt(x)); }

/// Pair interaction in oscillator units.
struct PotentialModel {
  enum class Kind { none, gaussian, contact };

  Kind kind = Kind::none;
  double depth = 0.0;             ///< V0 / (hbar omega)
  double inv_range_sq = 0.0;      ///< c = (b_t / b)^2
  double contact_strength = 0.0;  ///< 4 pi a / b_t

  static PotentialModel none() { return {}; }
  static PotentialModel gaussian(double depth, double inv_range_sq) {
    return {Kind::gaussian, depth, inv_range_sq, 0.0};
  }
  /// a in trap lengths.
  static PotentialModel contact(double scattering_length) {
    return {Kind::contact, 0.0, 0.0, 4.0 * std::numbers::pi * scattering_length};
  }
  static PotentialModel from_gaussian(const twobody::GaussianPotential& v, const units::PhysicalSystem& s) {
    const double bt = s.trap_length();
    return gaussian(units::energy_to_oscillator(v.depth, s), (bt * bt) / (v.range * v.range));
  }
  static PotentialModel from_zero_range(double a_au, const units::PhysicalSystem& s) {
    return contact(units::length_to_oscillator(a_au, s));
  }

  /// Pair potential expectation factor for a given lambda = w^T C^-1 w.
  double factor(double lambda) const {
    switch (kind) {
      case Kind::none: return 0.0;
      case Kind::gaussian: return depth * inv_pow_1_5(1.0 + 2.0 * inv_range_sq * lambda);
      case Kind::contact: return contact_strength * inv_pow_1_5(2.0 * std::numbers::pi * lambda);
    }
    return 0.0;
  }
};

namespace matelem {

using cgbasis::BasisFamily;
using cgbasis::BasisTerm;
using cgbasis::InternalFrame;

/// Gaussian product C = A + B with its Cholesky factor; all elements between
/// the pair derive from it.
class GaussianProduct {
 public:
  GaussianProduct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
      : a_(&a), b_(&b), llt_(a + b) {
    if (a.rows() != b.rows()) throw std::invalid_argument("GaussianProduct: dimension mismatch");
    if (llt_.info() != Eigen::Success) throw std::domain_error("GaussianProduct: A + B not positive definite");
    const auto& l = llt_.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) log_det += 2.0 * std::log(l(i, i));
    if (!std::isfinite(log_det)) throw std::domain_error("GaussianProduct: det(C) not finite");
    const double n = static_cast<double>(a.rows());
    overlap_ = std::exp(1.5 * (n * std::log(2.0 * std::numbers::pi) - log_det));
  }

  double overlap() const { return overlap_; }

  double kinetic() const {
    const Eigen::MatrixXd cinv_b = llt_.solve(*b_);
    return 1.5 * (a_->cwiseProduct(cinv_b)).sum() * overlap_;
  }

  double trap() const {
    const Eigen::MatrixXd cinv =
        llt_.solve(Eigen::MatrixXd::Identity(a_->rows(), a_->cols()));
    return 1.5 * cinv.trace() * overlap_;
  }

  double lambda(const Eigen::VectorXd& w) const { return w.dot(llt_.solve(w)); }

  double gaussian_pair(const Eigen::VectorXd& w, double depth, double inv_range_sq) const {
    return depth * inv_pow_1_5(1.0 + 2.0 * inv_range_sq * lambda(w)) * overlap_;
  }

  double contact_pair(const Eigen::VectorXd& w, double strength) const {
    return strength * inv_pow_1_5(2.0 * std::numbers::pi * lambda(w)) * overlap_;
  }

  /// Sum of the pair interaction over all columns of `pair_vectors`.
  double pair_sum(const Eigen::MatrixXd& pair_vectors, const PotentialModel& v) const {
    if (v.kind == PotentialModel::Kind::none) return 0.0;
    const Eigen::MatrixXd solved = llt_.solve(pair_vectors);
    double sum = 0.0;
    for (Eigen::Index q = 0; q < pair_vectors.cols(); ++q) {
      sum += v.factor(pair_vectors.col(q).dot(solved.col(q)));
    }
    return sum * overlap_;
  }

 private:
  const Eigen::MatrixXd* a_;
  const Eigen::MatrixXd* b_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double overlap_;
};

inline double overlap(const InternalQuadraticForm& a, const InternalQuadraticForm& b) {
  return GaussianProduct(a.matrix(), b.matrix()).overlap();
}
inline double kinetic(const InternalQuadraticForm& a, const InternalQuadraticForm& b) {
  return GaussianProduct(a.matrix(), b.matrix()).kinetic();
}
inline double trap(const InternalQuadraticForm& a, const InternalQuadraticForm& b) {
  return GaussianProduct(a.matrix(), b.matrix()).trap();
}

inline void check_pair_vector(const Eigen::VectorXd& w) {
  if (std::abs(w.squaredNorm() - 2.0) > 1e-12) {
    throw std::invalid_argument("pair vector must satisfy |w|^2 = 2");
  }
}

/// c = 1 / b^2 in oscillator units.
inline double gaussian_pair(const InternalQuadraticForm& a, const InternalQuadraticForm& b,
                            const Eigen::VectorXd& w, double depth, double inv_range_sq) {
  check_pair_vector(w);
  return GaussianProduct(a.matrix(), b.matrix()).gaussian_pair(w, depth, inv_range_sq);
}

/// strength = 4 pi a / b_t for the zero-range model.
inline double contact_pair(const InternalQuadraticForm& a, const InternalQuadraticForm& b,
                           const Eigen::VectorXd& w, double strength) {
  check_pair_vector(w);
  return GaussianProduct(a.matrix(), b.matrix()).contact_pair(w, strength);
}

/// All N(N-1)/2 pair vectors of the frame as columns, ordered (0,1), (0,2), ...
inline Eigen::MatrixXd all_pair_vectors(const InternalFrame& frame) {
  const int n = frame.n_particles();
  Eigen::MatrixXd w(frame.dim(), n * (n - 1) / 2);
  int q = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) w.col(q++) = frame.pair_vector(i, j);
  return w;
}

struct ElementParts {
  double overlap = 0.0;
  double kinetic = 0.0;
  double trap = 0.0;
  double potential = 0.0;

  double hamiltonian() const { return kinetic + trap + potential; }

  ElementParts& add(const ElementParts& o, double weight) {
    overlap += weight * o.overlap;
    kinetic += weight * o.kinetic;
    trap += weight * o.trap;
    potential += weight * o.potential;
    return *this;
  }
};

/// All parts between two dense forms, potential summed over every pair.
/// Stack-sized storage covers N <= 8; larger forms go through GaussianProduct.
inline ElementParts dense_element(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& pair_vectors, const PotentialModel& v) {
  const Eigen::Index d = a.rows();
  if (d > 7 || pair_vectors.cols() > 28) {
    const GaussianProduct g(a, b);
    return {g.overlap(), g.kinetic(), g.trap(), g.pair_sum(pair_vectors, v)};
  }
  using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 7, 7>;
  using Pairs = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 7, 28>;
  if (b.rows() != d) throw std::invalid_argument("dense_element: dimension mismatch");
  const Small c = a + b;
  const Eigen::LLT<Small> llt(c);
  if (llt.info() != Eigen::Success) throw std::domain_error("dense_element: A + B not positive definite");
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  if (!std::isfinite(log_det)) throw std::domain_error("dense_element: det(C) not finite");
  ElementParts p;
  p.overlap = std::exp(1.5 * (d * std::log(2.0 * std::numbers::pi) - log_det));
  const Small cinv = llt.solve(Small::Identity(d, d));
  p.kinetic = 1.5 * (a.cwiseProduct(cinv * b)).sum() * p.overlap;
  p.trap = 1.5 * cinv.trace() * p.overlap;
  if (v.kind != PotentialModel::Kind::none) {
    const Pairs solved = cinv * pair_vectors;
    double sum = 0.0;
    for (Eigen::Index q = 0; q < pair_vectors.cols(); ++q) sum += v.factor(pair_vectors.col(q).dot(solved.col(q)));
    p.potential = sum * p.overlap;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Closed forms for the pair and hyper-radial families. Bra and ket are
// s I + rank-one updates along pair vectors u (bra) and v (ket), so C is the
// identity plus a rank-two update and every quantity reduces to 2x2 algebra
// on the Gram matrix of {u, v} and the potential pair vector w.

namespace detail {

/// For one ket class relative to the bra pair (0, 1): g = u.v, and the
/// potential pairs grouped by (u.w, v.w) with counts.
struct PairClassTable {
  int multiplicity;
  int uv;
  struct Group {
    int uw;
    int vw;
    int count;
  };
  std::vector<Group> groups;
};

inline PairClassTable make_class_table(int n_particles, int k, int l, int multiplicity) {
  PairClassTable t{multiplicity, cgbasis::pair_inner_product(0, 1, k, l), {}};
  for (int i = 0; i < n_particles; ++i) {
    for (int j = i + 1; j < n_particles; ++j) {
      const int uw = cgbasis::pair_inner_product(0, 1, i, j);
      const int vw = cgbasis::pair_inner_product(k, l, i, j);
      auto it = std::find_if(t.groups.begin(), t.groups.end(),
                             [&](const auto& g) { return g.uw == uw && g.vw == vw; });
      if (it == t.groups.end()) {
        t.groups.push_back({uw, vw, 1});
      } else {
        ++it->count;
      }
    }
  }
  return t;
}

}  // namespace detail

/// Element between exp(-a rho^2/2 - beta (w_u.x)^2/2) and
/// exp(-a' rho^2/2 - beta' (w_v.x)^2/2) for the ket pair described by `cls`.
inline ElementParts low_rank_element(int n_internal, double a, double beta, double a2, double beta2,
                                     const detail::PairClassTable& cls, const PotentialModel& v) {
  const double n = n_internal;
  const double s = a + a2;
  const double e1 = beta / s;
  const double e2 = beta2 / s;
  const double g = cls.uv;
  // M = I + E G with G = [[2, g], [g, 2]].
  const double det_m = (1.0 + 2.0 * e1) * (1.0 + 2.0 * e2) - g * g * e1 * e2;
  if (!(det_m > 0.0)) throw std::domain_error("low_rank_element: C not positive definite");
  // K = M^-1 E (symmetric).
  const double k11 = (1.0 + 2.0 * e2) * e1 / det_m;
  const double k22 = (1.0 + 2.0 * e1) * e2 / det_m;
  const double k12 = -g * e1 * e2 / det_m;
  auto quad = [&](double x1, double x2, double y1, double y2) {
    return x1 * (k11 * y1 + k12 * y2) + x2 * (k12 * y1 + k22 * y2);
  };
  // y^T C^-1 x = (y.x - p_y^T K p_x) / s with p = (u., v.)
  const double tr_cinv = (n - (2.0 * k11 + 2.0 * g * k12 + 2.0 * k22)) / s;
  const double u_cinv_u = (2.0 - quad(2.0, g, 2.0, g)) / s;
  const double v_cinv_v = (2.0 - quad(g, 2.0, g, 2.0)) / s;
  const double u_cinv_v = (g - quad(2.0, g, g, 2.0)) / s;

  const double log_det_c = n * std::log(s) + std::log(det_m);
  ElementParts p;
  p.overlap = std::exp(1.5 * (n * std::log(2.0 * std::numbers::pi) - log_det_c));
  const double tr_acb = a * a2 * tr_cinv + a2 * beta * u_cinv_u + a * beta2 * v_cinv_v +
                        beta * beta2 * g * u_cinv_v;
  p.kinetic = 1.5 * tr_acb * p.overlap;
  p.trap = 1.5 * tr_cinv * p.overlap;
  if (v.kind != PotentialModel::Kind::none) {
    double sum = 0.0;
    for (const auto& grp : cls.groups) {
      const double lambda = (2.0 - quad(grp.uw, grp.vw, grp.uw, grp.vw)) / s;
      sum += grp.count * v.factor(lambda);
    }
    p.potential = sum * p.overlap;
  }
  return p;
}

// ---------------------------------------------------------------------------

/// A basis term with everything the engine needs cached alongside it.
struct PreparedTerm {
  BasisTerm term;
  Eigen::MatrixXd bra_form;  ///< full family only
  std::vector<std::pair<Eigen::MatrixXd, int>> ket_orbit;  ///< full family only
};

/// Symmetrised Hamiltonian and overlap matrix elements for one family.
/// Elements use the unsymmetrised bra against the full symmetrised ket, which
/// equals <S phi_k|H|S phi_l> up to a family-wide constant.
class HamiltonianEngine {
 public:
  HamiltonianEngine(int n_particles, BasisFamily family, PotentialModel potential)
      : n_(n_particles),
        family_(family),
        potential_(potential),
        frame_(&cgbasis::frame_for(n_particles)),
        pair_vectors_(all_pair_vectors(*frame_)) {
    const auto mult = cgbasis::pair_class_multiplicities(n_);
    if (family_ == BasisFamily::hyperradial) {
      classes_.push_back(detail::make_class_table(n_, 0, 1, 1));
    } else {
      for (auto c : {cgbasis::PairClass::same, cgbasis::PairClass::share_one, cgbasis::PairClass::disjoint}) {
        const int m = mult[static_cast<int>(c)];
        if (m == 0) continue;
        const auto rep = cgbasis::pair_class_representative(c);
        classes_.push_back(detail::make_class_table(n_, rep[0], rep[1], m));
      }
    }
  }

  int n_particles() const { return n_; }
  BasisFamily family() const { return family_; }
  const PotentialModel& potential() const { return potential_; }
  const InternalFrame& frame() const { return *frame_; }

  /// The zero-range model is only meaningful on the uncorrelated space.
  bool contact_on_correlated_space() const {
    return potential_.kind == PotentialModel::Kind::contact && family_ != BasisFamily::hyperradial;
  }

  /// Sum of orbit weights of one symmetrised function.
  double orbit_weight() const {
    switch (family_) {
      case BasisFamily::full: return static_cast<double>(cgbasis::factorial(n_));
      case BasisFamily::pair: return n_ * (n_ - 1) / 2.0;
      case BasisFamily::hyperradial: return 1.0;
    }
    return 1.0;
  }

  PreparedTerm prepare(const BasisTerm& term) const {
    if (cgbasis::family_of(term) != family_) {
      throw std::invalid_argument("HamiltonianEngine: term family does not match engine family");
    }
    cgbasis::validate_term(term, *frame_);
    PreparedTerm p{term, {}, {}};
    if (family_ == BasisFamily::full) {
      const auto& alpha = std::get<cgbasis::FullTerm>(term).alpha;
      p.bra_form = cgbasis::internal_form(term, *frame_).matrix();
      for (auto& e : cgbasis::full_orbit(alpha)) {
        p.ket_orbit.emplace_back(InternalQuadraticForm(cgbasis::full_form_matrix(e.alpha, *frame_)).matrix(),
                                 e.weight);
      }
    }
    return p;
  }

  ElementParts element(const PreparedTerm& bra, const PreparedTerm& ket) const {
    ElementParts out;
    switch (family_) {
      case BasisFamily::full:
        for (const auto& [form, weight] : ket.ket_orbit) {
          out.add(dense_element(bra.bra_form, form, pair_vectors_, potential_), weight);
        }
        break;
      case BasisFamily::pair: {
        const auto& b = std::get<cgbasis::PairTerm>(bra.term);
        const auto& k = std::get<cgbasis::PairTerm>(ket.term);
        for (const auto& cls : classes_) {
          out.add(low_rank_element(n_ - 1, b.alpha, b.beta, k.alpha, k.beta, cls, potential_), cls.multiplicity);
        }
        break;
      }
      case BasisFamily::hyperradial: {
        const double a = std::get<cgbasis::HyperRadialTerm>(bra.term).alpha;
        const double a2 = std::get<cgbasis::HyperRadialTerm>(ket.term).alpha;
        out = low_rank_element(n_ - 1, a, 0.0, a2, 0.0, classes_.front(), potential_);
        break;
      }
    }
    return out;
  }

  /// H and S over the prepared basis; upper triangle computed, mirrored.
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble(std::span<const PreparedTerm> basis, int jobs = 1) const {
    const auto k = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd h(k, k), s(k, k);
    bosetrap::detail::parallel_for(static_cast<std::size_t>(k), jobs, [&](std::size_t row) {
      const auto i = static_cast<Eigen::Index>(row);
      for (Eigen::Index j = i; j < k; ++j) {
        const auto e = element(basis[i], basis[j]);
        h(i, j) = e.hamiltonian();
        s(i, j) = e.overlap;
      }
    });
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = i + 1; j < k; ++j) {
        h(j, i) = h(i, j);
        s(j, i) = s(i, j);
      }
    }
    if (!h.allFinite() || !s.allFinite()) throw std::runtime_error("assemble: non-finite matrix element");
    return {std::move(h), std::move(s)};
  }

 private:
  int n_;
  BasisFamily family_;
  PotentialModel potential_;
  const InternalFrame* frame_;
  Eigen::MatrixXd pair_vectors_;
  std::vector<detail::PairClassTable> classes_;
};

/// Generic dense assembly over symmetrised orbits: the bra is each orbit's
/// first term, the ket its whole orbit, the potential summed over all pairs.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble(std::span<const cgbasis::SymmetrisedOrbit> basis,
                                                            const PotentialModel& potential) {
  if (basis.empty()) return {};
  const int dim = basis.front().terms.front().form.dim();
  const InternalFrame& frame = cgbasis::frame_for(dim + 1);
  const Eigen::MatrixXd pairs = all_pair_vectors(frame);
  const auto k = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd h(k, k), s(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      ElementParts e;
      for (const auto& t : basis[j].terms) {
        if (t.form.dim() != dim) throw std::invalid_argument("assemble: orbits of different N");
        e.add(dense_element(basis[i].terms.front().form.matrix(), t.form.matrix(), pairs, potential), t.weight);
      }
      h(i, j) = h(j, i) = e.hamiltonian();
      s(i, j) = s(j, i) = e.overlap;
    }
  }
  if (!h.allFinite() || !s.allFinite()) throw std::runtime_error("assemble: non-finite matrix element");
  return {std::move(h), std::move(s)};
}

}  // namespace matelem
}  // namespace bosetrap
