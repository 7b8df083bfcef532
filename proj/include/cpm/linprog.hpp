#pragma once

#include <Eigen/Dense>

namespace cpm {

enum class LpStatus { kOptimal, kUnbounded, kInfeasibleStart, kIterationLimit };

struct LpResult {
  LpStatus status = LpStatus::kOptimal;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-10;  // on unit-normalized rows
  int max_iterations = 20000;
};

// Maximizes c^T x subject to A x <= b over free variables, starting from a
// feasible point. This is the primal simplex method in inequality form: the
// iterate walks vertices of {A x <= b}, each defined by dim(x) active
// constraints. Degenerate cycling is broken by switching to Bland's rule
// after a run of zero-length steps.
LpResult MaximizeLp(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                    const Eigen::VectorXd& b, const Eigen::VectorXd& start,
                    const LpOptions& options = {});

}  // namespace cpm
