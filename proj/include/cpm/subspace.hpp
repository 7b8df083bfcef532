#pragma once

#include <vector>

#include <Eigen/Dense>

#include "cpm/corpus.hpp"

namespace cpm {

// Reduced linear subspace of the bag-of-words space.
struct PcaModel {
  Eigen::VectorXd mean;         // F
  Eigen::MatrixXd basis;        // F x R, orthonormal columns
  Eigen::VectorXd eigenvalues;  // R, descending, sample covariance (1/(n-1))
  double total_variance = 0.0;  // trace of the sample covariance

  Eigen::Index dim() const { return basis.cols(); }
  Eigen::Index input_dim() const { return basis.rows(); }

  // Variance not captured by the retained components.
  double discarded_variance() const;
};

struct ReducedPoints {
  Eigen::MatrixXd coords;  // n x R, one utterance per row
  std::vector<UtteranceId> utterance_ids;

  Eigen::Index size() const { return coords.rows(); }
  Eigen::Index dim() const { return coords.cols(); }
};

// Principal components from the SVD of the centered data. Each basis
// column is flipped so that its largest-magnitude entry is positive.
// Throws when `dim` exceeds the numerical rank of the centered data.
PcaModel FitPca(const Eigen::MatrixXd& data, int dim);
PcaModel FitPca(const UtteranceMatrix& data, int dim);

// Column-per-sample data -> row-per-sample reduced coordinates.
Eigen::MatrixXd Project(const PcaModel& model, const Eigen::MatrixXd& data);
ReducedPoints Project(const PcaModel& model, const UtteranceMatrix& data);
Eigen::VectorXd ProjectOne(const PcaModel& model, const Eigen::VectorXd& x);

// Row-per-point reduced coordinates (m x R) -> m x F.
Eigen::MatrixXd Backproject(const PcaModel& model, const Eigen::MatrixXd& coords);

}  // namespace cpm
