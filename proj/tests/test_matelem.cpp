#include "bosetrap/matelem.hpp"
#include "bosetrap/quadrature.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace bosetrap;
using namespace bosetrap::cgbasis;
using matelem::ElementParts;

namespace {

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = u(rng);
  return m * m.transpose() + 0.4 * Eigen::MatrixXd::Identity(d, d);
}

// Gauss-Hermite evaluation of the per-Cartesian-component integrals for
// bra exp(-y^T A y / 2), ket exp(-y^T B y / 2) in d <= 2 dimensions. The
// 3D element is a product of three identical component integrals.
struct ComponentIntegrals {
  double s = 0.0;  // int e
  double k = 0.0;  // int (A y).(B y) e
  double x = 0.0;  // int |y|^2 e
  std::vector<double> v;  // int exp(-c (w.y)^2) e per pair vector
};

ComponentIntegrals hermite_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& pairs,
                                  double c, int points) {
  const int d = static_cast<int>(a.rows());
  const Eigen::MatrixXd cm = a + b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * cm);
  const Eigen::MatrixXd t = eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            eig.eigenvectors().transpose();
  const double jac = t.determinant();
  const auto gh = quadrature::gauss_hermite(points);
  ComponentIntegrals out;
  out.v.assign(pairs.cols(), 0.0);
  std::vector<int> idx(d, 0);
  const int total = static_cast<int>(std::pow(points, d));
  for (int flat = 0; flat < total; ++flat) {
    Eigen::VectorXd z(d);
    double w = jac;
    int rem = flat;
    for (int k = 0; k < d; ++k) {
      const int i = rem % points;
      rem /= points;
      z(k) = gh.nodes[i];
      w *= gh.weights[i];
    }
    const Eigen::VectorXd y = t * z;
    out.s += w;
    out.k += w * (a * y).dot(b * y);
    out.x += w * y.squaredNorm();
    for (Eigen::Index q = 0; q < pairs.cols(); ++q) {
      const double r = pairs.col(q).dot(y);
      out.v[q] += w * std::exp(-c * r * r);
    }
  }
  return out;
}

void expect_close(const ElementParts& got, const ElementParts& want, double rel) {
  auto near = [&](double g, double w, const char* what) {
    EXPECT_NEAR(g, w, rel * std::max(1e-300, std::abs(w))) << what;
  };
  near(got.overlap, want.overlap, "overlap");
  near(got.kinetic, want.kinetic, "kinetic");
  near(got.trap, want.trap, "trap");
  near(got.potential, want.potential, "potential");
}

}  // namespace

TEST(Quadrature, HermiteAndLegendreMoments) {
  const auto gh = quadrature::gauss_hermite(20);
  double m0 = 0.0, m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    const double x2 = gh.nodes[i] * gh.nodes[i];
    m0 += gh.weights[i];
    m2 += gh.weights[i] * x2;
    m4 += gh.weights[i] * x2 * x2;
  }
  const double sp = std::sqrt(M_PI);
  EXPECT_NEAR(m0, sp, 1e-13);
  EXPECT_NEAR(m2, sp / 2.0, 1e-13);
  EXPECT_NEAR(m4, 3.0 * sp / 4.0, 1e-13);
  const auto gl = quadrature::scaled(quadrature::gauss_legendre(12), 0.0, 2.0);
  double p = 0.0;
  for (std::size_t i = 0; i < gl.size(); ++i) p += gl.weights[i] * std::pow(gl.nodes[i], 11);
  EXPECT_NEAR(p, std::pow(2.0, 12) / 12.0, 1e-10);
}

TEST(MatrixElements, GaussHermiteOracleTwoAndThreeParticles) {
  std::mt19937_64 rng(42);
  const double depth = -0.37, c = 0.8;
  const auto v = PotentialModel::gaussian(depth, c);
  for (int n : {2, 3}) {
    const auto pairs = matelem::all_pair_vectors(frame_for(n));
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXd a = random_spd(rng, n - 1), b = random_spd(rng, n - 1);
      const auto q = hermite_oracle(a, b, pairs, c, 60);
      ElementParts want;
      want.overlap = std::pow(q.s, 3);
      want.kinetic = 0.5 * 3.0 * q.k * q.s * q.s;
      want.trap = 0.5 * 3.0 * q.x * q.s * q.s;
      for (double vq : q.v) want.potential += depth * std::pow(vq, 3);
      expect_close(matelem::dense_element(a, b, pairs, v), want, 1e-7);
      const matelem::GaussianProduct g(a, b);
      EXPECT_NEAR(g.overlap() / want.overlap, 1.0, 1e-7);
    }
  }
}

TEST(MatrixElements, HyperradialClosedForms) {
  for (int d = 1; d <= 5; ++d) {
    const Eigen::MatrixXd a = 0.6 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd b = 1.7 * Eigen::MatrixXd::Identity(d, d);
    const matelem::GaussianProduct g(a, b);
    const double s = std::pow(2.0 * M_PI / 2.3, 1.5 * d);
    EXPECT_NEAR(g.overlap() / s, 1.0, 1e-13);
    EXPECT_NEAR(g.kinetic() / s, 1.5 * d * 0.6 * 1.7 / 2.3, 1e-13);
    EXPECT_NEAR(g.trap() / s, 1.5 * d / 2.3, 1e-13);
  }
}

TEST(MatrixElements, OscillatorGroundStateIsExact) {
  for (int n = 2; n <= 6; ++n) {
    const matelem::HamiltonianEngine e(n, BasisFamily::hyperradial, PotentialModel::none());
    const auto t = e.prepare(HyperRadialTerm{1.0});
    const auto p = e.element(t, t);
    EXPECT_NEAR(p.hamiltonian() / p.overlap, 1.5 * (n - 1), 1e-13);
    EXPECT_NEAR(p.kinetic / p.trap, 1.0, 1e-13);
  }
}

TEST(MatrixElements, ContactIsTheNarrowGaussianLimit) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = random_spd(rng, 2), b = random_spd(rng, 2);
  const auto pairs = matelem::all_pair_vectors(frame_for(3));
  const double g = 0.01, c = 1e9;
  const auto contact = matelem::dense_element(a, b, pairs, PotentialModel::contact(g / (4.0 * M_PI)));
  const auto narrow = matelem::dense_element(a, b, pairs, PotentialModel::gaussian(g * std::pow(c / M_PI, 1.5), c));
  EXPECT_NEAR(contact.potential / narrow.potential, 1.0, 1e-6);
}

TEST(MatrixElements, FirstOrderContactShiftForTwoParticles) {
  const double a = 1e-3;
  const matelem::HamiltonianEngine e(2, BasisFamily::hyperradial, PotentialModel::contact(a));
  const auto t = e.prepare(HyperRadialTerm{1.0});
  const auto p = e.element(t, t);
  EXPECT_NEAR(p.potential / p.overlap, std::sqrt(2.0 / M_PI) * a, 1e-15);
}

TEST(MatrixElements, DenseFastPathMatchesGeneralProduct) {
  std::mt19937_64 rng(9);
  const auto v = PotentialModel::gaussian(-2.0, 3.0);
  for (int n = 2; n <= 9; ++n) {
    const auto pairs = matelem::all_pair_vectors(frame_for(n));
    const Eigen::MatrixXd a = random_spd(rng, n - 1), b = random_spd(rng, n - 1);
    const auto fast = matelem::dense_element(a, b, pairs, v);
    const matelem::GaussianProduct g(a, b);
    expect_close(fast, {g.overlap(), g.kinetic(), g.trap(), g.pair_sum(pairs, v)}, 1e-12);
  }
}

TEST(MatrixElements, PairClassReductionMatchesBruteForce) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (auto v : {PotentialModel::gaussian(-5.0, 40.0), PotentialModel::contact(0.01), PotentialModel::none()}) {
    for (int n : {3, 4, 5}) {
      const matelem::HamiltonianEngine e(n, BasisFamily::pair, v);
      const auto& f = frame_for(n);
      const auto pairs = matelem::all_pair_vectors(f);
      for (int trial = 0; trial < 10; ++trial) {
        const double alpha = u(rng);
        const PairTerm bra{alpha, trial % 2 ? -0.3 * alpha : u(rng)};
        const PairTerm ket{u(rng), u(rng)};
        ElementParts brute;
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            brute.add(matelem::dense_element(pair_form_matrix(bra, f, 0, 1), pair_form_matrix(ket, f, i, j), pairs, v),
                      1.0);
        expect_close(e.element(e.prepare(bra), e.prepare(ket)), brute, 1e-12);
      }
    }
  }
}

TEST(MatrixElements, HyperradialReductionMatchesDense) {
  const auto v = PotentialModel::gaussian(-5.0, 40.0);
  for (int n : {2, 3, 6}) {
    const matelem::HamiltonianEngine e(n, BasisFamily::hyperradial, v);
    const auto pairs = matelem::all_pair_vectors(frame_for(n));
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n - 1, n - 1);
    expect_close(e.element(e.prepare(HyperRadialTerm{0.3}), e.prepare(HyperRadialTerm{2.2})),
                 matelem::dense_element(0.3 * id, 2.2 * id, pairs, v), 1e-12);
  }
}

TEST(MatrixElements, FullFamilyOrbitSumMatchesGenericAssembly) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  const int n = 4;
  const auto v = PotentialModel::gaussian(-3.0, 10.0);
  const matelem::HamiltonianEngine e(n, BasisFamily::full, v);
  std::vector<matelem::PreparedTerm> basis;
  std::vector<SymmetrisedOrbit> orbits;
  for (int k = 0; k < 3; ++k) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = u(rng);
    basis.push_back(e.prepare(FullTerm{a}));
    orbits.push_back(symmetrise(FullTerm{a}, e.frame()));
  }
  const auto [h, s] = e.assemble(basis);
  const auto [h2, s2] = matelem::assemble(std::span<const SymmetrisedOrbit>(orbits), v);
  EXPECT_LT((h - h2).norm(), 1e-12 * h.norm());
  EXPECT_LT((s - s2).norm(), 1e-12 * s.norm());
  EXPECT_LT((h - h.transpose()).norm(), 1e-12 * h.norm());
}

TEST(MatrixElements, PairEngineMatchesGenericAssembly) {
  const int n = 5;
  const auto v = PotentialModel::gaussian(-3.0, 10.0);
  const matelem::HamiltonianEngine e(n, BasisFamily::pair, v);
  std::vector<matelem::PreparedTerm> basis;
  std::vector<SymmetrisedOrbit> orbits;
  for (auto t : {PairTerm{1.0, 0.5}, PairTerm{0.4, -0.1}, PairTerm{2.0, 7.0}}) {
    basis.push_back(e.prepare(t));
    orbits.push_back(symmetrise(t, e.frame()));
  }
  const auto [h, s] = e.assemble(basis, 2);
  const auto [h2, s2] = matelem::assemble(std::span<const SymmetrisedOrbit>(orbits), v);
  EXPECT_LT((h - h2).norm(), 1e-12 * h.norm());
  EXPECT_LT((s - s2).norm(), 1e-12 * s.norm());
}

TEST(MatrixElements, EngineRejectsForeignTermsAndBadPairVectors) {
  const matelem::HamiltonianEngine e(3, BasisFamily::pair, PotentialModel::none());
  EXPECT_THROW(e.prepare(HyperRadialTerm{1.0}), std::invalid_argument);
  EXPECT_THROW(e.prepare(PairTerm{1.0, -0.6}), NotPositiveDefinite);
  const InternalQuadraticForm id(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(matelem::gaussian_pair(id, id, Eigen::Vector2d(1.0, 0.0), -1.0, 1.0), std::invalid_argument);
  EXPECT_TRUE(matelem::HamiltonianEngine(3, BasisFamily::pair, PotentialModel::contact(0.1)).contact_on_correlated_space());
  EXPECT_FALSE(
      matelem::HamiltonianEngine(3, BasisFamily::hyperradial, PotentialModel::contact(0.1)).contact_on_correlated_space());
}

TEST(MatrixElements, PhysicalPotentialConversion) {
  const auto s = units::reference_system();
  const auto v = PotentialModel::from_gaussian({-1.4e-7, 11.65}, s);
  EXPECT_NEAR(v.depth, -1.4e-7 / s.energy_quantum(), 1e-6);
  EXPECT_NEAR(v.inv_range_sq, std::pow(s.trap_length() / 11.65, 2), 1e-3);
  const auto zr = PotentialModel::from_zero_range(100.0, s);
  EXPECT_NEAR(zr.contact_strength, 4.0 * M_PI * 100.0 / s.trap_length(), 1e-15);
}
