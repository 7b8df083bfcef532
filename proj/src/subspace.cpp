#include "cpm/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cpm/error.hpp"

namespace cpm {

double PcaModel::discarded_variance() const {
  return std::max(0.0, total_variance - eigenvalues.sum());
}

PcaModel FitPca(const Eigen::MatrixXd& data, int dim) {
  const Eigen::Index features = data.rows();
  const Eigen::Index n = data.cols();
  if (dim < 1) throw ValidationError("target dimension must be >= 1");
  if (n < 2) {
    throw MathError("rank deficient: max usable R is 0");
  }

  PcaModel model;
  model.mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - model.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double tol = static_cast<double>(std::max(features, n)) *
                     std::numeric_limits<double>::epsilon() *
                     (sigma.size() > 0 ? sigma(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > tol && sigma(i) > 0.0) ++rank;
  }
  // The centered data has rank at most n - 1 no matter what the SVD says.
  rank = std::min(rank, std::min(features, n - 1));
  if (dim > rank) {
    throw MathError("rank deficient: max usable R is " + std::to_string(rank));
  }

  const double denom = static_cast<double>(n - 1);
  model.basis = svd.matrixU().leftCols(dim);
  model.eigenvalues = sigma.head(dim).array().square() / denom;
  model.total_variance = sigma.array().square().sum() / denom;

  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::Index pivot = 0;
    model.basis.col(c).cwiseAbs().maxCoeff(&pivot);
    if (model.basis(pivot, c) < 0.0) model.basis.col(c) *= -1.0;
  }
  return model;
}

PcaModel FitPca(const UtteranceMatrix& data, int dim) {
  return FitPca(data.matrix, dim);
}

Eigen::MatrixXd Project(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (data.rows() != model.input_dim()) {
    throw ValidationError("dimension mismatch: data has " +
                          std::to_string(data.rows()) + " rows, model expects " +
                          std::to_string(model.input_dim()));
  }
  return (data.colwise() - model.mean).transpose() * model.basis;
}

ReducedPoints Project(const PcaModel& model, const UtteranceMatrix& data) {
  return ReducedPoints{Project(model, data.matrix), data.utterance_ids};
}

Eigen::VectorXd ProjectOne(const PcaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.input_dim()) {
    throw ValidationError("dimension mismatch in projection");
  }
  return model.basis.transpose() * (x - model.mean);
}

Eigen::MatrixXd Backproject(const PcaModel& model, const Eigen::MatrixXd& coords) {
  if (coords.cols() != model.dim()) {
    throw ValidationError("dimension mismatch: coordinates have " +
                          std::to_string(coords.cols()) + " columns, model has " +
                          std::to_string(model.dim()));
  }
  return (coords * model.basis.transpose()).rowwise() + model.mean.transpose();
}

}  // namespace cpm
