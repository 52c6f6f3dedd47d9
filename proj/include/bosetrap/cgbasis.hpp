#pragma once

// Correlated-Gaussian basis families, the centre-of-mass-free internal frame,
// and expansion of the symmetrisation operator into weighted orbits.
//
// Every basis function is (internal Gaussian exp(-x^T A x / 2)) times the
// fixed centre-of-mass ground state exp(-N R^2 / 2); lengths are in trap
// units throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace bosetrap {

class NotPositiveDefinite : public std::domain_error {
 public:
  NotPositiveDefinite(const std::string& what, double eigenvalue)
      : std::domain_error(what + " (smallest eigenvalue " + std::to_string(eigenvalue) + ")"),
        eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Symmetric positive-definite (N-1)x(N-1) matrix A of exp(-x^T A x / 2).
class InternalQuadraticForm {
 public:
  InternalQuadraticForm() = default;
  explicit InternalQuadraticForm(Eigen::MatrixXd a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw std::invalid_argument("InternalQuadraticForm: matrix not square");
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale) {
      throw std::invalid_argument("InternalQuadraticForm: matrix not symmetric");
    }
    a_ = 0.5 * (a_ + a_.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(a_);
    if (llt.info() != Eigen::Success) {
      const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a_, Eigen::EigenvaluesOnly)
                                .eigenvalues()(0);
      throw NotPositiveDefinite("InternalQuadraticForm: not positive definite", lowest);
    }
  }

  const Eigen::MatrixXd& matrix() const { return a_; }
  int dim() const { return static_cast<int>(a_.rows()); }

 private:
  Eigen::MatrixXd a_;
};

namespace cgbasis {

/// Orthonormal Jacobi frame: rows of U map the N particle coordinates onto N-1
/// internal coordinates, each orthogonal to the uniform (centre-of-mass) row.
class InternalFrame {
 public:
  explicit InternalFrame(int n_particles) : n_(n_particles) {
    if (n_particles < 2) throw std::invalid_argument("InternalFrame: need at least two particles");
    u_ = Eigen::MatrixXd::Zero(n_ - 1, n_);
    for (int k = 1; k < n_; ++k) {
      const double norm = std::sqrt(static_cast<double>(k) / (k + 1));
      for (int i = 0; i < k; ++i) u_(k - 1, i) = norm / k;
      u_(k - 1, k) = -norm;
    }
    cm_row_ = Eigen::VectorXd::Constant(n_, 1.0 / std::sqrt(static_cast<double>(n_)));
  }

  int n_particles() const { return n_; }
  int dim() const { return n_ - 1; }
  const Eigen::MatrixXd& transform() const { return u_; }
  const Eigen::VectorXd& cm_row() const { return cm_row_; }

  /// w_ij with r_i - r_j = w_ij^T x; |w_ij|^2 = 2.
  Eigen::VectorXd pair_vector(int i, int j) const { return u_.col(i) - u_.col(j); }

  /// Rows of `r` are particle positions (N x 3); returns internal x ((N-1) x 3).
  Eigen::MatrixXd to_internal(const Eigen::MatrixXd& r) const { return u_ * r; }

  /// Internal representation T of a particle permutation, x -> T x, where
  /// particle i is relabelled perm[i].
  Eigen::MatrixXd permutation(const std::vector<int>& perm) const {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) p(perm[i], i) = 1.0;
    return u_ * p * u_.transpose();
  }

 private:
  int n_;
  Eigen::MatrixXd u_;
  Eigen::VectorXd cm_row_;
};

/// Frames are immutable and deterministic per N; shared across the process.
inline const InternalFrame& frame_for(int n_particles) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<InternalFrame>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n_particles];
  if (!slot) slot = std::make_unique<InternalFrame>(n_particles);
  return *slot;
}

/// exp(-alpha rho^2 / 2) over the internal hyper-radius.
struct HyperRadialTerm {
  double alpha;
};

/// exp(-alpha rho^2 / 2 - beta (r_1 - r_2)^2 / 2) before symmetrisation.
struct PairTerm {
  double alpha;
  double beta;
};

/// exp(-sum_{i<j} alpha_ij (r_i - r_j)^2 / 2); alpha is symmetric N x N with
/// zero diagonal.
struct FullTerm {
  Eigen::MatrixXd alpha;
};

using BasisTerm = std::variant<FullTerm, PairTerm, HyperRadialTerm>;

enum class BasisFamily { full, pair, hyperradial };

inline const char* to_string(BasisFamily f) {
  switch (f) {
    case BasisFamily::full: return "full";
    case BasisFamily::pair: return "pair";
    case BasisFamily::hyperradial: return "hyperradial";
  }
  return "?";
}

inline BasisFamily parse_family(const std::string& s) {
  if (s == "full") return BasisFamily::full;
  if (s == "pair") return BasisFamily::pair;
  if (s == "hyperradial") return BasisFamily::hyperradial;
  throw std::invalid_argument("unknown basis family '" + s + "'");
}

inline BasisFamily family_of(const BasisTerm& t) {
  if (std::holds_alternative<FullTerm>(t)) return BasisFamily::full;
  if (std::holds_alternative<PairTerm>(t)) return BasisFamily::pair;
  return BasisFamily::hyperradial;
}

/// Internal form of a pair term with its distinguished pair moved to (i, j).
inline Eigen::MatrixXd pair_form_matrix(const PairTerm& t, const InternalFrame& frame, int i, int j) {
  const Eigen::VectorXd w = frame.pair_vector(i, j);
  return t.alpha * Eigen::MatrixXd::Identity(frame.dim(), frame.dim()) + t.beta * w * w.transpose();
}

inline Eigen::MatrixXd full_form_matrix(const Eigen::MatrixXd& alpha, const InternalFrame& frame) {
  const int n = frame.n_particles();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(frame.dim(), frame.dim());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (alpha(i, j) == 0.0) continue;
      const Eigen::VectorXd w = frame.pair_vector(i, j);
      a.noalias() += alpha(i, j) * w * w.transpose();
    }
  }
  return a;
}

inline void validate_term(const BasisTerm& term, const InternalFrame& frame) {
  if (const auto* h = std::get_if<HyperRadialTerm>(&term)) {
    if (!(h->alpha > 0.0)) throw NotPositiveDefinite("HyperRadialTerm: alpha must be positive", h->alpha);
  } else if (const auto* p = std::get_if<PairTerm>(&term)) {
    if (!(p->alpha > 0.0)) throw NotPositiveDefinite("PairTerm: alpha must be positive", p->alpha);
    if (!(p->alpha + 2.0 * p->beta > 0.0)) {
      throw NotPositiveDefinite("PairTerm: alpha + 2 beta must be positive", p->alpha + 2.0 * p->beta);
    }
  } else {
    const auto& f = std::get<FullTerm>(term);
    const int n = frame.n_particles();
    if (f.alpha.rows() != n || f.alpha.cols() != n) {
      throw std::invalid_argument("FullTerm: coefficient matrix must be N x N");
    }
    for (int i = 0; i < n; ++i) {
      if (f.alpha(i, i) != 0.0) throw std::invalid_argument("FullTerm: diagonal must be zero");
      for (int j = i + 1; j < n; ++j) {
        if (f.alpha(i, j) != f.alpha(j, i)) throw std::invalid_argument("FullTerm: coefficients not symmetric");
        if (f.alpha(i, j) < 0.0) throw std::invalid_argument("FullTerm: coefficients must be nonnegative");
      }
    }
  }
}

/// Quadratic form of the unsymmetrised term in internal coordinates.
inline InternalQuadraticForm internal_form(const BasisTerm& term, const InternalFrame& frame) {
  validate_term(term, frame);
  const int d = frame.dim();
  if (const auto* h = std::get_if<HyperRadialTerm>(&term)) {
    return InternalQuadraticForm(h->alpha * Eigen::MatrixXd::Identity(d, d));
  }
  if (const auto* p = std::get_if<PairTerm>(&term)) {
    return InternalQuadraticForm(pair_form_matrix(*p, frame, 0, 1));
  }
  return InternalQuadraticForm(full_form_matrix(std::get<FullTerm>(term).alpha, frame));
}

// ---------------------------------------------------------------------------
// Symmetrisation.

struct OrbitTerm {
  InternalQuadraticForm form;
  int weight;
  /// Generating permutation (full terms) or the moved pair {i, j} (pair terms).
  std::vector<int> provenance;
};

struct SymmetrisedOrbit {
  std::vector<OrbitTerm> terms;

  int total_weight() const {
    int s = 0;
    for (const auto& t : terms) s += t.weight;
    return s;
  }
};

inline constexpr int max_full_orbit_particles = 8;

inline bool uniform_coefficients(const Eigen::MatrixXd& alpha) {
  const int n = static_cast<int>(alpha.rows());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (alpha(i, j) != alpha(0, 1)) return false;
  return true;
}

inline long long factorial(int n) {
  long long f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

/// Distinct permuted coefficient matrices with their stabiliser multiplicity.
/// Returns (permuted alpha, weight, generating permutation) triples.
struct FullOrbitEntry {
  Eigen::MatrixXd alpha;
  int weight;
  std::vector<int> perm;
};

inline std::vector<FullOrbitEntry> full_orbit(const Eigen::MatrixXd& alpha) {
  const int n = static_cast<int>(alpha.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (uniform_coefficients(alpha)) {
    if (factorial(n) > std::numeric_limits<int>::max()) {
      throw std::overflow_error("symmetrise: orbit weight overflows");
    }
    return {{alpha, static_cast<int>(factorial(n)), perm}};
  }
  if (n > max_full_orbit_particles) {
    throw std::overflow_error("symmetrise: full-term orbit too large for N = " + std::to_string(n));
  }
  // Canonical key: upper triangle of the permuted coefficients.
  std::map<std::vector<double>, std::size_t> index;
  std::vector<FullOrbitEntry> out;
  do {
    std::vector<double> key;
    key.reserve(n * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) key.push_back(alpha(perm[i], perm[j]));
    auto [it, inserted] = index.emplace(std::move(key), out.size());
    if (inserted) {
      Eigen::MatrixXd permuted(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) permuted(i, j) = alpha(perm[i], perm[j]);
      out.push_back({std::move(permuted), 1, perm});
    } else {
      ++out[it->second].weight;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

inline SymmetrisedOrbit symmetrise(const BasisTerm& term, const InternalFrame& frame) {
  validate_term(term, frame);
  SymmetrisedOrbit orbit;
  const int n = frame.n_particles();
  if (const auto* h = std::get_if<HyperRadialTerm>(&term)) {
    orbit.terms.push_back({internal_form(*h, frame), 1, {}});
  } else if (const auto* p = std::get_if<PairTerm>(&term)) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        orbit.terms.push_back({InternalQuadraticForm(pair_form_matrix(*p, frame, i, j)), 1, {i, j}});
  } else {
    for (auto& e : full_orbit(std::get<FullTerm>(term).alpha)) {
      orbit.terms.push_back({InternalQuadraticForm(full_form_matrix(e.alpha, frame)), e.weight, e.perm});
    }
  }
  return orbit;
}

// ---------------------------------------------------------------------------
// Pair classes. Against a fixed bra pair, the N(N-1)/2 ket pairs split into
// "same", "share one particle" and "disjoint".

enum class PairClass { same = 0, share_one = 1, disjoint = 2 };

inline PairClass classify_pairs(int i, int j, int k, int l) {
  const int shared = (i == k) + (i == l) + (j == k) + (j == l);
  if (shared == 2) return PairClass::same;
  return shared == 1 ? PairClass::share_one : PairClass::disjoint;
}

inline std::array<int, 3> pair_class_multiplicities(int n) {
  return {1, 2 * (n - 2), (n - 2) * (n - 3) / 2};
}

/// Representative ket pair of each class relative to the bra pair (0, 1).
inline std::array<int, 2> pair_class_representative(PairClass c) {
  switch (c) {
    case PairClass::same: return {0, 1};
    case PairClass::share_one: return {0, 2};
    case PairClass::disjoint: return {2, 3};
  }
  return {0, 1};
}

/// Inner product w_ij . w_kl in the internal frame (exact integer).
inline int pair_inner_product(int i, int j, int k, int l) {
  return (i == k) - (i == l) - (j == k) + (j == l);
}

}  // namespace cgbasis
}  // namespace bosetrap
