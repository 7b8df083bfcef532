#include "cpm/attribution.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "cpm/features.hpp"
#include "cpm/rng.hpp"
#include "oracles.hpp"

namespace cpm {
namespace {

DifferentiableFunction Linear(const Eigen::VectorXd& w) {
  return {[w](const Eigen::VectorXd& z) { return w.dot(z); },
          [w](const Eigen::VectorXd&) { return w; }};
}

// softplus(w.z) + 0.5 (u.z)^2
DifferentiableFunction Smooth(const Eigen::VectorXd& w, const Eigen::VectorXd& u) {
  return {[w, u](const Eigen::VectorXd& z) {
            return std::log1p(std::exp(w.dot(z))) + 0.5 * std::pow(u.dot(z), 2);
          },
          [w, u](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            const double s = 1.0 / (1.0 + std::exp(-w.dot(z)));
            return s * w + u.dot(z) * u;
          }};
}

TEST(IntegratedGradients, LinearIsExact) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd w = oracle::GaussianMatrix(6, 1, rng);
    const Eigen::VectorXd x = oracle::GaussianMatrix(6, 1, rng);
    const Eigen::VectorXd attr =
        IntegratedGradients(Linear(w), x, Eigen::VectorXd::Zero(6), 1 + trial);
    EXPECT_LE((attr - w.cwiseProduct(x)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(IntegratedGradients, CompletenessOnSmoothFunction) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd w = oracle::GaussianMatrix(5, 1, rng);
    const Eigen::VectorXd u = oracle::GaussianMatrix(5, 1, rng);
    const Eigen::VectorXd x = oracle::GaussianMatrix(5, 1, rng);
    const Eigen::VectorXd base = oracle::GaussianMatrix(5, 1, rng);
    const auto f = Smooth(w, u);
    const double delta = f.value(x) - f.value(base);
    EXPECT_LE(std::abs(IntegratedGradients(f, x, base, 128).sum() - delta),
              0.01 * std::abs(delta));
  }
}

TEST(IntegratedGradients, RefinementConvergesMonotonically) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = Smooth(oracle::GaussianMatrix(4, 1, rng), oracle::GaussianMatrix(4, 1, rng));
    const Eigen::VectorXd x = oracle::GaussianMatrix(4, 1, rng);
    const Eigen::VectorXd base = Eigen::VectorXd::Zero(4);
    const Eigen::VectorXd reference = IntegratedGradients(f, x, base, 1 << 14);
    double previous = std::numeric_limits<double>::infinity();
    for (int steps = 1; steps <= 512; steps *= 2) {
      const double tv = 0.5 * (IntegratedGradients(f, x, base, steps) - reference).lpNorm<1>();
      EXPECT_LE(tv, previous) << "steps " << steps;
      previous = tv;
    }
    EXPECT_LT(previous, 1e-4);
  }
}

TEST(IntegratedGradients, Errors) {
  const auto f = Linear(Eigen::VectorXd::Ones(3));
  EXPECT_THROW(IntegratedGradients(f, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(2), 8),
               Error);
  EXPECT_THROW(IntegratedGradients(f, Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3), 0),
               Error);
}

TEST(ImportantVertices, SingleCoefficientDependence) {
  Rng rng(4);
  for (int j = 0; j < 6; ++j) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(6);
    w(j) = 1.0;
    const DifferentiableFunction f{
        [j](const Eigen::VectorXd& a) { return std::pow(a(j), 2); },
        [j](const Eigen::VectorXd& a) -> Eigen::VectorXd {
          return 2 * a(j) * Eigen::VectorXd::Unit(a.size(), j);
        }};
    Eigen::VectorXd a = oracle::RandomSimplexWeights(6, rng);
    a(j) += 1.0;
    a /= a.sum();
    const auto top = ImportantVertices(f, a, 3);
    ASSERT_EQ(top.size(), 3u);
    EXPECT_EQ(top[0].index, j);
  }
}

TEST(ImportantVertices, ConstantFunctionFallsBackToIndexOrder) {
  const DifferentiableFunction f{[](const Eigen::VectorXd&) { return 4.0; },
                                 [](const Eigen::VectorXd& a) -> Eigen::VectorXd {
                                   return Eigen::VectorXd::Zero(a.size());
                                 }};
  const auto top = ImportantVertices(f, Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(top[static_cast<std::size_t>(i)].index, i);
    EXPECT_EQ(top[static_cast<std::size_t>(i)].attribution, 0.0);
  }
  EXPECT_THROW(ImportantVertices(f, Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), 5), Error);
}

TEST(ImportantVertices, DescendingWithIndexTies) {
  const auto ranked = RankAttributions(Eigen::Vector4d(0.5, 2.0, 0.5, -1.0));
  ASSERT_EQ(ranked.size(), 4u);
  EXPECT_EQ(ranked[0].index, 1);
  EXPECT_EQ(ranked[1].index, 0);
  EXPECT_EQ(ranked[2].index, 2);
  EXPECT_EQ(ranked[3].index, 3);
}

TEST(FusionProbes, CompletenessThroughTheLayer) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const FusionLayer layer = InitLayer(2, 4, 8, 3, seed);
    const Eigen::MatrixXd x = oracle::GaussianMatrix(5, 8, rng);
    const Eigen::VectorXd a = oracle::RandomSimplexWeights(4, rng);
    const Eigen::MatrixXd m_hat = RowSoftmax(oracle::GaussianMatrix(5, 5, rng));
    const LinearProbe probe = MakeProbe(layer, seed);

    const auto fc = CoefficientProbe(layer, x, m_hat, probe);
    const Eigen::VectorXd center = Eigen::VectorXd::Constant(4, 0.25);
    const double dc = fc.value(a) - fc.value(center);
    EXPECT_LE(std::abs(IntegratedGradients(fc, a, center, 128).sum() - dc),
              0.01 * std::abs(dc));

    const auto fe = EmbeddingProbe(layer, a, m_hat, probe);
    const Eigen::VectorXd flat = FlattenRows(x);
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(flat.size());
    const double de = fe.value(flat) - fe.value(zeros);
    const Eigen::VectorXd attr = IntegratedGradients(fe, flat, zeros, 128);
    EXPECT_LE(std::abs(attr.sum() - de), 0.01 * std::abs(de));
    EXPECT_NEAR(PositionAttributions(attr, 5).sum(), attr.sum(), 1e-12);
  }
}

TEST(Flatten, RowMajorRoundTrip) {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd flat = FlattenRows(m);
  EXPECT_EQ(flat, (Eigen::VectorXd(6) << 1, 2, 3, 4, 5, 6).finished());
  EXPECT_EQ(UnflattenRows(flat, 2, 3), m);
  EXPECT_EQ(PositionAttributions(flat, 2), Eigen::Vector2d(6, 15));
  EXPECT_THROW(UnflattenRows(flat, 4, 2), Error);
  EXPECT_THROW(PositionAttributions(flat, 4), Error);
}

}  // namespace
}  // namespace cpm
