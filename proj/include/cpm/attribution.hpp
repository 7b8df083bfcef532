#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cpm/fusion.hpp"

namespace cpm {

inline constexpr int kDefaultIgSteps = 128;
inline constexpr int kDefaultImportantVertices = 5;

struct DifferentiableFunction {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};

// (x - baseline) o mean_k grad f(baseline + alpha_k (x - baseline)) with
// midpoint nodes alpha_k = (k + 1/2) / steps.
Eigen::VectorXd IntegratedGradients(const DifferentiableFunction& f,
                                    const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& baseline, int steps);

struct RankedAttribution {
  Eigen::Index index;
  double attribution;
};

// Sorts by attribution, descending; ties by index.
std::vector<RankedAttribution> RankAttributions(const Eigen::VectorXd& attributions);

// IG over the coefficient vector against the simplex-center baseline,
// returning the `top` highest attributions.
std::vector<RankedAttribution> ImportantVertices(const DifferentiableFunction& f,
                                                 const Eigen::VectorXd& coeffs,
                                                 int top = kDefaultImportantVertices,
                                                 int steps = kDefaultIgSteps);

// Probe of the fused layer as a function of the coefficient vector.
DifferentiableFunction CoefficientProbe(const FusionLayer& layer, Eigen::MatrixXd x,
                                        Eigen::MatrixXd m_hat, LinearProbe probe);

// Probe of the fused layer as a function of the row-major flattened
// embeddings (n x model_dim).
DifferentiableFunction EmbeddingProbe(const FusionLayer& layer, Eigen::VectorXd coeffs,
                                      Eigen::MatrixXd m_hat, LinearProbe probe);

Eigen::VectorXd FlattenRows(const Eigen::MatrixXd& m);
Eigen::MatrixXd UnflattenRows(const Eigen::VectorXd& v, Eigen::Index rows,
                              Eigen::Index cols);

// Per-position attribution: sum over each token's embedding entries.
Eigen::VectorXd PositionAttributions(const Eigen::VectorXd& flat, Eigen::Index tokens);

}  // namespace cpm
