#pragma once

// Generalised symmetric eigenproblem H c = E S c by canonical
// orthogonalisation, spectrum classification (self-bound states vs the
// quasi-continuum) and the bordered update used to score one extra basis
// function without a full re-diagonalisation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace bosetrap::eigensolve {

/// Centre-of-mass ground-state energy added to every internal eigenvalue.
inline constexpr double cm_energy = 1.5;
/// |E| below this counts as positive when classifying states.
inline constexpr double zero_energy_tolerance = 1e-8;
inline constexpr double default_threshold = 1e-12;

inline bool is_negative(double total_energy) { return total_energy < -zero_energy_tolerance; }

struct SpectrumResult {
  std::vector<double> energies;  ///< total energies (hbar omega), ascending
  Eigen::MatrixXd coefficients;  ///< one S-normalised column per state
  int n_negative = 0;
  int bec_index = -1;            ///< first non-negative state, -1 when absent
  int retained_dim = 0;
  double threshold = default_threshold;

  int size() const { return static_cast<int>(energies.size()); }
  bool has_bec() const { return bec_index >= 0; }
  double bec_energy() const {
    return has_bec() ? energies[bec_index] : std::numeric_limits<double>::infinity();
  }
};

class NoBecState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void classify(SpectrumResult& r) {
  r.n_negative = static_cast<int>(std::count_if(r.energies.begin(), r.energies.end(), is_negative));
  r.bec_index = r.n_negative < r.size() ? r.n_negative : -1;
}

/// Canonical orthogonalisation: S is first scaled to unit diagonal, then
/// directions with eigenvalue below threshold * max are dropped.
inline SpectrumResult generalized_eig(const Eigen::MatrixXd& h, const Eigen::MatrixXd& s,
                                      double threshold = default_threshold) {
  if (h.rows() != h.cols() || s.rows() != s.cols() || h.rows() != s.rows()) {
    throw std::invalid_argument("generalized_eig: H and S must be square and of equal size");
  }
  if (!h.allFinite() || !s.allFinite()) throw std::invalid_argument("generalized_eig: non-finite input");
  const Eigen::Index k = h.rows();
  if (k == 0) throw std::invalid_argument("generalized_eig: empty basis");
  if ((s.diagonal().array() <= 0.0).any()) {
    throw std::invalid_argument("generalized_eig: overlap diagonal must be positive");
  }

  const Eigen::VectorXd d = s.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd s_unit = d.asDiagonal() * s * d.asDiagonal();
  const Eigen::MatrixXd h_unit = d.asDiagonal() * h * d.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s_eig(s_unit);
  const Eigen::VectorXd& sigma = s_eig.eigenvalues();
  const double cut = threshold * sigma(k - 1);
  Eigen::Index first = 0;
  while (first < k && sigma(first) <= cut) ++first;
  const Eigen::Index kept = k - first;
  if (kept == 0) throw std::runtime_error("generalized_eig: empty retained subspace");

  const Eigen::MatrixXd x =
      s_eig.eigenvectors().rightCols(kept) * sigma.tail(kept).cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::MatrixXd h_ortho = x.transpose() * h_unit * x;
  h_ortho = 0.5 * (h_ortho + h_ortho.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> h_eig(h_ortho);

  SpectrumResult r;
  r.threshold = threshold;
  r.retained_dim = static_cast<int>(kept);
  r.coefficients = d.asDiagonal() * (x * h_eig.eigenvectors());
  r.energies.resize(kept);
  for (Eigen::Index i = 0; i < kept; ++i) r.energies[i] = h_eig.eigenvalues()(i) + cm_energy;
  classify(r);
  return r;
}

struct BecClassification {
  int index;
  double energy;
  /// Gap to the next level (quasi-continuum spacing); NaN for the top state.
  double level_spacing;
};

inline BecClassification classify_bec(const SpectrumResult& r) {
  if (!r.has_bec()) {
    throw NoBecState("classify_bec: all energies negative, no BEC state in the basis");
  }
  const int i = r.bec_index;
  const double spacing = i + 1 < r.size() ? r.energies[i + 1] - r.energies[i]
                                          : std::numeric_limits<double>::quiet_NaN();
  return {i, r.energies[i], spacing};
}

/// Lexicographic objective: more self-bound states first, then lower BEC energy.
struct Score {
  int n_negative = 0;
  double bec_energy = std::numeric_limits<double>::infinity();

  friend bool operator<(const Score& a, const Score& b) {
    if (a.n_negative != b.n_negative) return a.n_negative > b.n_negative;
    return a.bec_energy < b.bec_energy;
  }
};

inline Score score_of(const SpectrumResult& r) { return {r.n_negative, r.bec_energy()}; }

/// Scores the spectrum obtained by appending one function to a solved basis,
/// using the arrowhead form of H in the current eigenbasis plus the new
/// orthogonalised direction.
class BorderedScorer {
 public:
  BorderedScorer() = default;
  explicit BorderedScorer(const SpectrumResult& current)
      : z_(&current.coefficients), internal_(current.energies.size()) {
    for (std::size_t i = 0; i < internal_.size(); ++i) internal_[i] = current.energies[i] - cm_energy;
  }

  struct Outcome {
    bool accepted = false;
    Score score;
  };

  /// h_col, s_col: couplings of the candidate to the current basis functions.
  Outcome score(const Eigen::VectorXd& h_col, const Eigen::VectorXd& s_col, double h_diag, double s_diag,
                double min_norm) const {
    Outcome out;
    if (!(s_diag > 0.0) || !std::isfinite(h_diag) || !h_col.allFinite() || !s_col.allFinite()) return out;
    const double scale = 1.0 / std::sqrt(s_diag);
    const double eps_raw = h_diag / s_diag;
    const double e0 = -zero_energy_tolerance - cm_energy;
    if (internal_.empty()) {
      out.accepted = true;
      const double e = eps_raw + cm_energy;
      out.score = is_negative(e) ? Score{1, std::numeric_limits<double>::infinity()} : Score{0, e};
      return out;
    }
    const Eigen::VectorXd b = z_->transpose() * (h_col * scale);
    const Eigen::VectorXd t = z_->transpose() * (s_col * scale);
    const double norm2 = 1.0 - t.squaredNorm();
    if (!(norm2 > min_norm)) return out;
    const Eigen::Map<const Eigen::VectorXd> e(internal_.data(), static_cast<Eigen::Index>(internal_.size()));
    const Eigen::VectorXd gamma = (b - e.cwiseProduct(t)) / std::sqrt(norm2);
    const double eps = (eps_raw - 2.0 * t.dot(b) + t.cwiseProduct(t).dot(e)) / norm2;
    if (!std::isfinite(eps) || !gamma.allFinite()) return out;
    const Eigen::VectorXd gamma2 = gamma.cwiseAbs2();

    const int m = static_cast<int>(internal_.size());
    auto count_below = [&](double x) {
      int c = 0;
      double g = eps - x;
      for (int i = 0; i < m; ++i) {
        if (internal_[i] < x) ++c;
        g -= gamma2(i) / (internal_[i] - x);
      }
      return c + (g < 0.0 ? 1 : 0);
    };

    const int k = count_below(e0);
    out.accepted = true;
    if (k == m + 1) {
      out.score = {k, std::numeric_limits<double>::infinity()};
      return out;
    }
    double lo = k > 0 ? std::max(e0, internal_[k - 1]) : e0;
    double hi;
    if (k < m) {
      hi = internal_[k];
    } else {
      hi = std::max(internal_[m - 1], eps) + gamma.cwiseAbs().sum() + 1.0;
    }
    // k-th root of the secular equation: smallest x with count_below(x) > k.
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (count_below(mid) > k ? hi : lo) = mid;
    }
    out.score = {k, 0.5 * (lo + hi) + cm_energy};
    return out;
  }

 private:
  const Eigen::MatrixXd* z_ = nullptr;
  std::vector<double> internal_;
};

}  // namespace bosetrap::eigensolve
