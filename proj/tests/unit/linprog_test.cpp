#include "cpm/linprog.hpp"

#include <vector>

#include <gtest/gtest.h>

#include "cpm/rng.hpp"
#include "oracles.hpp"

namespace cpm {
namespace {

// Best objective over every vertex of {A x <= b}: each choice of dim(x)
// constraints taken as equalities.
double BruteForceMax(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                     const Eigen::VectorXd& b) {
  const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> pick(static_cast<std::size_t>(n));
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd sub(n, n);
      Eigen::VectorXd rhs(n);
      for (int i = 0; i < n; ++i) {
        sub.row(i) = a.row(pick[static_cast<std::size_t>(i)]);
        rhs(i) = b(pick[static_cast<std::size_t>(i)]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
      if (lu.rank() < n) return;
      const Eigen::VectorXd x = lu.solve(rhs);
      if (((a * x - b).array() <= 1e-9).all()) best = std::max(best, c.dot(x));
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      recurse(i + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return best;
}

TEST(MaximizeLp, UnitSquare) {
  Eigen::MatrixXd a(4, 2);
  a << 1, 0, 0, 1, -1, 0, 0, -1;
  const Eigen::Vector4d b(1, 1, 0, 0);
  const LpResult r = MaximizeLp(Eigen::Vector2d(1, 2), a, b, Eigen::Vector2d(0.5, 0.5));
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.objective, 3.0, 1e-12);
  EXPECT_LT((r.x - Eigen::Vector2d(1, 1)).norm(), 1e-12);
}

TEST(MaximizeLp, DetectsUnbounded) {
  Eigen::MatrixXd a(2, 2);
  a << -1, 0, 0, -1;
  const LpResult r =
      MaximizeLp(Eigen::Vector2d(1, 1), a, Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
  EXPECT_EQ(r.status, LpStatus::kUnbounded);
}

TEST(MaximizeLp, RejectsInfeasibleStart) {
  Eigen::MatrixXd a(1, 1);
  a << 1;
  const LpResult r = MaximizeLp(Eigen::VectorXd::Ones(1), a, Eigen::VectorXd::Zero(1),
                                Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_EQ(r.status, LpStatus::kInfeasibleStart);
}

TEST(MaximizeLp, DegenerateVertexTerminates) {
  // Many constraints through the same optimum.
  Eigen::MatrixXd a(6, 2);
  a << 1, 0, 0, 1, 1, 1, 2, 1, 1, 2, -1, -1;
  const Eigen::VectorXd b = (Eigen::VectorXd(6) << 1, 1, 2, 3, 3, 5).finished();
  const LpResult r = MaximizeLp(Eigen::Vector2d(1, 1), a, b, Eigen::Vector2d(0, 0));
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.objective, 2.0, 1e-12);
}

TEST(MaximizeLp, AgreesWithVertexEnumeration) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.Index(3));
    const int m = n + 3 + static_cast<int>(rng.Index(6));
    Eigen::MatrixXd a(m + 2 * n, n);
    Eigen::VectorXd b(m + 2 * n);
    a.topRows(m) = oracle::GaussianMatrix(m, n, rng);
    for (int i = 0; i < m; ++i) b(i) = rng.Uniform(0.1, 2.0);  // origin feasible
    a.bottomRows(2 * n) << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
    b.tail(2 * n).setConstant(5.0);
    const Eigen::VectorXd c = oracle::GaussianMatrix(n, 1, rng);
    const LpResult r = MaximizeLp(c, a, b, Eigen::VectorXd::Zero(n));
    ASSERT_EQ(r.status, LpStatus::kOptimal);
    EXPECT_NEAR(r.objective, BruteForceMax(c, a, b), 1e-9) << "trial " << trial;
    EXPECT_LE((a * r.x - b).maxCoeff(), 1e-9);
  }
}

}  // namespace
}  // namespace cpm
