#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cpm/error.hpp"
#include "cpm/subspace.hpp"

namespace cpm {

inline constexpr double kDefaultSlack = 1e-6;

struct FitReport {
  int iterations = 0;  // outer iterations of the winning restart
  double final_volume = 0.0;
  double max_violation = 0.0;
  int restarts = 0;
  // Volume after initialization, then after each outer iteration.
  std::vector<double> volume_history;
};

// An R-simplex stored as R+1 vertex rows.
struct Simplex {
  Eigen::MatrixXd vertices;  // (R+1) x R
  double volume = 0.0;
  double slack = kDefaultSlack;
  FitReport fit_report;

  Eigen::Index dim() const { return vertices.cols(); }
  Eigen::Index num_vertices() const { return vertices.rows(); }
};

struct MvesConfig {
  double slack = kDefaultSlack;
  std::uint64_t seed = 0;
  int max_iterations = 500;
  double relative_tolerance = 1e-7;
  // Extra starts from randomized initial vertex picks. The smallest
  // enclosing simplex over all starts is returned.
  int restarts = 8;
  // After each sweep of row updates, re-place every facet optimally with
  // the others held fixed (a concave subproblem). Also monotone in volume.
  bool refine_facets = true;
};

// Raised when the iteration cap is hit and the best simplex still leaves
// points outside by more than the slack.
class FitError : public Error {
 public:
  FitError(const std::string& message, Simplex best, double violation)
      : Error(ErrorKind::kMath, message),
        best_(std::move(best)),
        violation_(violation) {}

  const Simplex& best() const { return best_; }
  double violation() const { return violation_; }

 private:
  Simplex best_;
  double violation_;
};

// Builds a simplex from explicit vertices and fills in its volume.
Simplex MakeSimplex(Eigen::MatrixXd vertices, double slack = kDefaultSlack);

// |det(edge matrix)| / R!.
double Volume(const Eigen::MatrixXd& vertices);
double Volume(const Simplex& simplex);

// Raw barycentric coordinates: solves [V^T; 1^T] a = [p; 1]. Entries can be
// negative for exterior points.
Eigen::VectorXd Barycentric(const Simplex& simplex, const Eigen::VectorXd& point);

// Rows of raw barycentric coordinates for every row of `points`.
Eigen::MatrixXd BarycentricAll(const Simplex& simplex, const Eigen::MatrixXd& points);

// Clip negatives to zero and renormalize to sum one.
Eigen::VectorXd ClipCoefficients(const Eigen::VectorXd& raw);

// max(0, -min raw barycentric coordinate); 0 for an empty point set.
double EnclosureViolation(const Simplex& simplex, const Eigen::MatrixXd& points);

struct CompositionCoefficients {
  Eigen::MatrixXd coeffs;  // n x (R+1), clipped and renormalized
  Eigen::MatrixXd raw;     // n x (R+1), before clipping
  std::vector<UtteranceId> utterance_ids;
  double max_violation = 0.0;  // pre-clip
};

CompositionCoefficients DecomposeAll(const Simplex& simplex,
                                     const ReducedPoints& points);

// Minimum-volume enclosing simplex by cyclic row-wise maximization of
// |det H|, where H maps points to barycentric coordinates. Every row update
// is an exact linear program, so the volume never increases. The reference
// vertex of the parameterization rotates each outer iteration; the run stops
// once a full rotation improves the volume by less than the tolerance.
Simplex FitMves(const Eigen::MatrixXd& points, const MvesConfig& config = {});
Simplex FitMves(const ReducedPoints& points, const MvesConfig& config = {});

}  // namespace cpm
