#include "cpm/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cpm/error.hpp"

namespace cpm {
namespace {

constexpr double kPivotTol = 1e-9;
constexpr int kDegenerateRunBeforeBland = 50;

struct RatioStep {
  Eigen::Index row = -1;
  double length = 0.0;
};

// Longest step along `dir` that keeps every inactive row feasible. Rows whose
// slack went slightly negative are treated as tight.
RatioStep RatioTest(const Eigen::MatrixXd& a, const Eigen::VectorXd& slack,
                    const Eigen::VectorXd& dir, const std::vector<char>& active,
                    bool bland) {
  const Eigen::VectorXd rate = a * dir;
  const double threshold = kPivotTol * dir.norm();
  RatioStep best;
  double best_rate = 0.0;
  double best_length = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    if (active[k] || rate(k) <= threshold) continue;
    const double length = std::max(0.0, slack(k)) / rate(k);
    const double tie = 1e-12 * (1.0 + std::abs(best_length));
    bool take = false;
    if (best.row < 0 || length < best_length - tie) {
      take = true;
    } else if (length <= best_length + tie && !bland && rate(k) > best_rate) {
      // Prefer the steepest row among ties for numerical stability; under
      // Bland's rule the lowest index (the first seen) wins.
      take = true;
    }
    if (take) {
      best.row = k;
      best_length = length;
      best_rate = rate(k);
    }
  }
  best.length = best_length;
  return best;
}

}  // namespace

LpResult MaximizeLp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_in,
                    const Eigen::VectorXd& b_in, const Eigen::VectorXd& start,
                    const LpOptions& options) {
  const Eigen::Index dim = c.size();
  if (a_in.cols() != dim || start.size() != dim || a_in.rows() != b_in.size()) {
    throw ValidationError("linear program dimensions are inconsistent");
  }

  // Unit-normalize rows so slacks are distances; drop null rows.
  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(a_in.rows()));
  LpResult result;
  result.x = start;
  for (Eigen::Index k = 0; k < a_in.rows(); ++k) {
    if (a_in.row(k).norm() > 0.0) {
      kept.push_back(k);
    } else if (b_in(k) < -options.feasibility_tol) {
      result.status = LpStatus::kInfeasibleStart;
      return result;
    }
  }
  const auto m = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd a(m, dim);
  Eigen::VectorXd b(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double norm = a_in.row(kept[k]).norm();
    a.row(k) = a_in.row(kept[k]) / norm;
    b(k) = b_in(kept[k]) / norm;
  }

  Eigen::VectorXd x = start;
  Eigen::VectorXd slack = b - a * x;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (slack(k) < -options.feasibility_tol * (1.0 + std::abs(b(k)))) {
      result.status = LpStatus::kInfeasibleStart;
      return result;
    }
  }

  std::vector<char> is_active(static_cast<std::size_t>(m), 0);
  std::vector<Eigen::Index> active;
  const double c_norm = c.norm();

  // Walk from the start point to a vertex, improving the objective where
  // possible. Each move adds one linearly independent active row.
  while (static_cast<Eigen::Index>(active.size()) < dim) {
    Eigen::MatrixXd null_basis;
    if (active.empty()) {
      null_basis = Eigen::MatrixXd::Identity(dim, dim);
    } else {
      Eigen::MatrixXd rows_t(dim, static_cast<Eigen::Index>(active.size()));
      for (std::size_t i = 0; i < active.size(); ++i) {
        rows_t.col(static_cast<Eigen::Index>(i)) = a.row(active[i]).transpose();
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows_t);
      const Eigen::MatrixXd q = qr.householderQ();
      null_basis = q.rightCols(dim - static_cast<Eigen::Index>(active.size()));
    }
    Eigen::VectorXd dir = null_basis * (null_basis.transpose() * c);
    const bool improving = dir.norm() > 1e-12 * std::max(1.0, c_norm);
    if (!improving) dir = null_basis.col(0);

    RatioStep step = RatioTest(a, slack, dir, is_active, false);
    if (step.row < 0) {
      if (improving) {
        result.status = LpStatus::kUnbounded;
        result.x = x;
        return result;
      }
      dir = -dir;
      step = RatioTest(a, slack, dir, is_active, false);
      if (step.row < 0) {
        result.status = LpStatus::kUnbounded;
        result.x = x;
        return result;
      }
    }
    x += step.length * dir;
    slack = b - a * x;
    active.push_back(step.row);
    is_active[step.row] = 1;
    ++result.iterations;
  }

  bool bland = false;
  int degenerate_run = 0;
  const double dual_tol = 1e-11 * std::max(1.0, c_norm);
  Eigen::MatrixXd basis(dim, dim);
  Eigen::VectorXd basis_rhs(dim);

  while (true) {
    if (result.iterations >= options.max_iterations) {
      result.status = LpStatus::kIterationLimit;
      break;
    }
    for (Eigen::Index i = 0; i < dim; ++i) {
      basis.row(i) = a.row(active[i]);
      basis_rhs(i) = b(active[i]);
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
    x = lu.solve(basis_rhs);
    slack = b - a * x;
    const Eigen::VectorXd dual = lu.transpose().solve(c);

    Eigen::Index leave = -1;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (dual(i) >= -dual_tol) continue;
      if (leave < 0) {
        leave = i;
      } else if (bland ? active[i] < active[leave] : dual(i) < dual(leave)) {
        leave = i;
      }
    }
    if (leave < 0) {
      result.status = LpStatus::kOptimal;
      break;
    }

    // Move off row `leave` while the other active rows stay tight.
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(dim);
    unit(leave) = -1.0;
    const Eigen::VectorXd dir = lu.solve(unit);
    const RatioStep step = RatioTest(a, slack, dir, is_active, bland);
    if (step.row < 0) {
      result.status = LpStatus::kUnbounded;
      break;
    }
    if (step.length <= 1e-14 * (1.0 + x.norm())) {
      if (++degenerate_run > kDegenerateRunBeforeBland) bland = true;
    } else {
      degenerate_run = 0;
    }
    is_active[active[leave]] = 0;
    active[leave] = step.row;
    is_active[step.row] = 1;
    ++result.iterations;
  }

  result.x = x;
  result.objective = c.dot(x);
  return result;
}

}  // namespace cpm
